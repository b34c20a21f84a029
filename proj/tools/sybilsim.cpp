// sybilsim: run detection experiments, parameter sweeps, and interval queries.
//
//   sybilsim run <config> [--out DIR] [--seed N] [--replications N]
//   sybilsim sweep <grid-config> [--out DIR] [--seed N] [--replications N]
//   sybilsim interval <x1> <y1sq> <r> <c> <alpha> [--oracle SAMPLES]
//
// Exit codes: 0 success, 2 configuration or usage error, 3 runtime error.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sybil/sybil.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> replications;
  int threads{0};
};

void apply(sybil::SimConfig& cfg, const Overrides& o) {
  if (o.seed) cfg.seed = *o.seed;
  if (o.replications) cfg.replications = *o.replications;
  cfg.threads = o.threads;
  cfg.validate();
}

std::string bound(const std::optional<double>& v, const char* unbounded) {
  if (!v) return unbounded;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", *v);
  return buf;
}

double relative_gap(const std::optional<double>& a, const std::optional<double>& b) {
  if (!a || !b) return (a.has_value() == b.has_value()) ? 0.0 : INFINITY;
  return std::abs(*a - *b) / std::max(std::abs(*a), std::abs(*b));
}

void print_pooled(const sybil::SimulationSummary& s) {
  std::cout << "normal_accuracy=" << sybil::format_metric(s.pooled.normal_accuracy)
            << " normal_misclassification_rate=" << sybil::format_metric(s.pooled.normal_misclassification)
            << " sybil_detection_rate=" << sybil::format_metric(s.pooled.sybil_detection) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RSSI-ratio Sybil detection simulator"};
  app.require_subcommand(1);

  Overrides overrides;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<int> replications;
  app.add_option("--seed", seed, "Override the master seed");
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();
  app.add_option("--replications", replications, "Override the replication count");
  app.add_option("--threads", overrides.threads, "Worker threads (0 = all cores; never changes results)");

  std::string run_config;
  auto* run = app.add_subcommand("run", "Run one configuration");
  run->add_option("config", run_config, "Config file (dotted keys, or a summary.json)")->required();

  std::string sweep_config;
  auto* sweep = app.add_subcommand("sweep", "Run a grid over N, S, C, R");
  sweep->add_option("config", sweep_config, "Grid config file")->required();

  double x1 = 0, y1sq = 0, r = 0, c = 0, alpha = 2;
  std::optional<std::size_t> oracle_samples;
  auto* interval = app.add_subcommand("interval", "Print the feasible RSSI-ratio interval");
  interval->add_option("x1", x1, "Node abscissa in the edge-pair frame (m)")->required();
  interval->add_option("y1sq", y1sq, "Squared ordinate (m^2)")->required();
  interval->add_option("r", r, "Reachability radius (m)")->required();
  interval->add_option("c", c, "Half the edge separation (m)")->required();
  interval->add_option("alpha", alpha, "Path-loss exponent")->required();
  interval->add_option("--oracle", oracle_samples, "Also run the sampling oracle with this many samples");

  for (auto* sub : {run, sweep, interval}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  overrides.seed = seed;
  overrides.replications = replications;

  try {
    if (*run) {
      auto cfg = sybil::load_config(run_config);
      apply(cfg, overrides);
      const auto summary = sybil::run_simulation(cfg);
      sybil::write_run_report(out_dir, cfg, summary);
      print_pooled(summary);
      std::cout << "wrote " << out_dir << "/cycles.csv and " << out_dir << "/summary.json\n";
    } else if (*sweep) {
      auto grid = sybil::load_grid(sweep_config);
      apply(grid.base, overrides);
      const auto points = sybil::run_sweep(grid, out_dir);
      for (const auto& p : points) {
        std::cout << sybil::grid_point_name(p.cfg) << ": ";
        print_pooled(p.summary);
      }
      std::cout << "wrote " << out_dir << "/grid.csv (" << points.size() << " points)\n";
    } else if (*interval) {
      if (!(y1sq >= 0.0) || !(r >= 0.0) || !(c > 0.0) || !(alpha > 0.0)) {
        std::cerr << "usage error: require y1sq >= 0, r >= 0, c > 0, alpha > 0\n";
        return kExitConfig;
      }
      const sybil::IntervalInputs in{x1, y1sq, r, alpha};
      const auto closed = sybil::rssi_ratio_interval(in, c);
      std::cout << "closed-form: [" << bound(closed.lo, "unbounded") << ", " << bound(closed.hi, "unbounded") << "]\n";
      if (oracle_samples) {
        if (*oracle_samples < 10'000) {
          std::cerr << "usage error: --oracle needs at least 10000 samples\n";
          return kExitConfig;
        }
        const auto sampled = sybil::ratio_interval_oracle(in, c, *oracle_samples);
        std::cout << "oracle:      [" << bound(sampled.lo, "unbounded") << ", " << bound(sampled.hi, "unbounded")
                  << "]\n";
        std::cout << "relative gap: lo " << sybil::format_metric(relative_gap(closed.lo, sampled.lo)) << ", hi "
                  << sybil::format_metric(relative_gap(closed.hi, sampled.hi)) << '\n';
      }
    }
  } catch (const sybil::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    const bool usage = e.code() == sybil::ErrorCode::ConfigError ||
                       (*interval && e.code() == sybil::ErrorCode::InvalidArgument);
    return usage ? kExitConfig : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
