#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "sybil/protocol.hpp"

using namespace sybil;

namespace {

const ChannelParams kParams{1.0, 2.0};
const Position kE1{1.0, 0.0};
const Position kE2{-1.0, 0.0};

// Round-1 record for a node physically at `pos`, built the way an evaluator does.
DetectionRecord observe_round1(NodeId id, Position pos, double r, std::uint64_t tx = 0) {
  const ControlPacket pkt{id, EdgeId{2}, EdgeId{1}, EdgeRole::Evaluator, Round::First, 0, tx};
  return round1_process(pkt, rssi(kParams, euclidean_distance(pos, kE1)), rssi(kParams, euclidean_distance(pos, kE2)),
                        make_frame(kE1, kE2), kParams, r);
}

double eta_at(Position pos) { return rssi(kParams, euclidean_distance(pos, kE2)) / rssi(kParams, euclidean_distance(pos, kE1)); }

Verdict verdict_for(const std::vector<Judgment>& js, NodeId id) {
  for (const auto& j : js) {
    if (j.claimed_id == id) return j.verdict;
  }
  ADD_FAILURE() << "no verdict for id " << to_underlying(id);
  return Verdict::Normal;
}

MembershipRegistry registry_of(std::initializer_list<std::uint64_t> ids) {
  MembershipRegistry reg;
  for (auto id : ids) reg.enroll(NodeId{id});
  return reg;
}

}  // namespace

TEST(SelectEdgePair, TwoNearest) {
  const std::vector<EdgeSite> edges{{EdgeId{0}, {1, 0}}, {EdgeId{1}, {5, 0}}, {EdgeId{2}, {0, 2}}};
  const auto pair = select_edge_pair({0, 0}, edges);
  EXPECT_EQ(pair.e1.id, EdgeId{0});
  EXPECT_EQ(pair.e2.id, EdgeId{2});
}

TEST(SelectEdgePair, TieGoesToLowerId) {
  const std::vector<EdgeSite> edges{{EdgeId{3}, {1, 0}}, {EdgeId{1}, {-1, 0}}, {EdgeId{7}, {9, 9}}};
  const auto pair = select_edge_pair({0, 0}, edges);
  EXPECT_EQ(pair.e1.id, EdgeId{1});
  EXPECT_EQ(pair.e2.id, EdgeId{3});
}

TEST(SelectEdgePair, NeedsTwoEdges) {
  const std::vector<EdgeSite> edges{{EdgeId{0}, {1, 0}}};
  try {
    select_edge_pair({0, 0}, edges);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientEdges);
  }
}

TEST(SelectEdgePair, MatchesBruteForce) {
  Rng rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<EdgeSite> edges;
    const int n = 2 + static_cast<int>(rng.index(8));
    for (int i = 0; i < n; ++i) edges.push_back({EdgeId{static_cast<std::uint32_t>(i)}, {rng.uniform(0, 100), rng.uniform(0, 100)}});
    const Position node{rng.uniform(0, 100), rng.uniform(0, 100)};
    auto sorted = edges;
    std::sort(sorted.begin(), sorted.end(), [&](const EdgeSite& a, const EdgeSite& b) {
      return euclidean_distance(node, a.pos) < euclidean_distance(node, b.pos);
    });
    const auto pair = select_edge_pair(node, edges);
    EXPECT_EQ(pair.e1.id, sorted[0].id);
    EXPECT_EQ(pair.e2.id, sorted[1].id);
  }
}

TEST(Round1Process, SymmetricNode) {
  const auto rec = observe_round1(NodeId{1}, {0.0, 1.0}, 0.5);
  ASSERT_TRUE(rec.valid);
  EXPECT_NEAR(rec.eta1, 1.0, 1e-12);
  ASSERT_TRUE(rec.interval.bounded());
  EXPECT_NEAR(*rec.interval.lo, 0.33678, 1e-5);
  EXPECT_NEAR(*rec.interval.hi, 2.9694, 1e-4);
  EXPECT_TRUE(rec.interval.contains(rec.eta1));
}

TEST(Round1Process, ZeroRadiusIsPoint) {
  const auto rec = observe_round1(NodeId{1}, {3.0, 2.0}, 0.0);
  ASSERT_TRUE(rec.valid);
  EXPECT_EQ(rec.interval, RatioInterval::point(rec.eta1));
}

TEST(Round1Process, NonPositiveRssiInvalid) {
  const ControlPacket pkt{NodeId{1}, EdgeId{2}, EdgeId{1}, EdgeRole::Evaluator, Round::First, 0, 0};
  const auto rec = round1_process(pkt, 0.0, 0.5, make_frame(kE1, kE2), kParams, 1.0);
  EXPECT_FALSE(rec.valid);
}

TEST(Round1Process, InconsistentRangesInvalid) {
  const ControlPacket pkt{NodeId{1}, EdgeId{2}, EdgeId{1}, EdgeRole::Evaluator, Round::First, 0, 0};
  // d1 = 1, d2 = 10 cannot both hold with the edges 2 m apart.
  const auto rec = round1_process(pkt, 1.0, 0.01, make_frame(kE1, kE2), kParams, 1.0);
  EXPECT_FALSE(rec.valid);
}

// Four devices with distinct ratio signatures; each moves a little between rounds.
struct Scenario {
  std::vector<Position> before{{0.2, 1.5}, {2.5, 1.0}, {-3.0, 0.5}, {6.0, 4.0}};
  std::vector<Position> after{{0.3, 1.45}, {2.45, 1.1}, {-3.05, 0.55}, {6.1, 3.9}};
  double r = 0.2;

  RecordTable round1(std::initializer_list<std::uint64_t> ids) const {
    RecordTable t;
    std::size_t i = 0;
    for (auto id : ids) {
      t[NodeId{id}].push_back(observe_round1(NodeId{id}, before[i], r, i));
      ++i;
    }
    return t;
  }
};

TEST(Judge, AllStableIdsAreNormal) {
  const Scenario s;
  const auto table = s.round1({1, 2, 3, 4});
  std::vector<Round2Entry> r2;
  for (std::uint64_t i = 0; i < 4; ++i) r2.push_back({NodeId{i + 1}, eta_at(s.after[i]), 10 + i});
  const auto js = judge(table, r2, registry_of({1, 2, 3, 4}));
  ASSERT_EQ(js.size(), 4u);
  for (const auto& j : js) EXPECT_EQ(j.verdict, Verdict::Normal);
}

TEST(Judge, RebadgedDeviceIsSybil) {
  const Scenario s;
  const auto table = s.round1({1, 2, 3, 4});
  std::vector<Round2Entry> r2{{NodeId{1}, eta_at(s.after[0]), 10},
                              {NodeId{2}, eta_at(s.after[1]), 11},
                              {NodeId{3}, eta_at(s.after[2]), 12},
                              {NodeId{5}, eta_at(s.after[3]), 13}};
  ASSERT_TRUE(table.at(NodeId{4})[0].interval.contains(r2[3].eta2));
  const auto js = judge(table, r2, registry_of({1, 2, 3, 4}));
  EXPECT_EQ(verdict_for(js, NodeId{1}), Verdict::Normal);
  EXPECT_EQ(verdict_for(js, NodeId{2}), Verdict::Normal);
  EXPECT_EQ(verdict_for(js, NodeId{3}), Verdict::Normal);
  EXPECT_EQ(verdict_for(js, NodeId{5}), Verdict::Sybil);
  EXPECT_EQ(js[3].matched_with, NodeId{4});
}

TEST(Judge, CrossedIdsAreBothSybil) {
  // Device 3 now claims 5; device 4 now claims 3.
  const Scenario s;
  const auto table = s.round1({1, 2, 3, 4});
  std::vector<Round2Entry> r2{{NodeId{1}, eta_at(s.after[0]), 10},
                              {NodeId{2}, eta_at(s.after[1]), 11},
                              {NodeId{3}, eta_at(s.after[3]), 12},
                              {NodeId{5}, eta_at(s.after[2]), 13}};
  ASSERT_FALSE(table.at(NodeId{3})[0].interval.contains(r2[2].eta2));
  const auto js = judge(table, r2, registry_of({1, 2, 3, 4}));
  EXPECT_EQ(verdict_for(js, NodeId{1}), Verdict::Normal);
  EXPECT_EQ(verdict_for(js, NodeId{2}), Verdict::Normal);
  EXPECT_EQ(verdict_for(js, NodeId{3}), Verdict::Sybil);
  EXPECT_EQ(verdict_for(js, NodeId{5}), Verdict::Sybil);
}

TEST(Judge, NewIdFallsBackToRegistry) {
  const Scenario s;
  const auto table = s.round1({1, 2});
  // A device never seen in round 1, far from every vanished record's interval.
  const double eta = eta_at({-40.0, 2.0});
  std::vector<Round2Entry> r2{{NodeId{1}, eta_at(s.after[0]), 10}, {NodeId{2}, eta_at(s.after[1]), 11},
                              {NodeId{9}, eta, 12}, {NodeId{77}, eta, 13}};
  const auto js = judge(table, r2, registry_of({1, 2, 9}));
  EXPECT_EQ(verdict_for(js, NodeId{9}), Verdict::NewMember);
  EXPECT_EQ(verdict_for(js, NodeId{77}), Verdict::Sybil);
  EXPECT_FALSE(js[2].matched_with.has_value());
}

TEST(Judge, PrefersClosestVanishedRecord) {
  RecordTable t;
  DetectionRecord a;
  a.claimed_id = NodeId{1};
  a.eta1 = 1.0;
  a.interval = {0.1, 10.0};
  DetectionRecord b = a;
  b.claimed_id = NodeId{2};
  b.eta1 = 3.0;
  t[a.claimed_id].push_back(a);
  t[b.claimed_id].push_back(b);
  const std::vector<Round2Entry> r2{{NodeId{50}, 2.8, 1}};
  const auto js = judge(t, r2, MembershipRegistry{});
  ASSERT_EQ(js.size(), 1u);
  EXPECT_EQ(js[0].verdict, Verdict::Sybil);
  EXPECT_EQ(js[0].matched_with, NodeId{2});
}

TEST(Judge, DepartedIdsGetNoVerdict) {
  const Scenario s;
  const auto table = s.round1({1, 2, 3, 4});
  const std::vector<Round2Entry> r2{{NodeId{1}, eta_at(s.after[0]), 10}};
  const auto js = judge(table, r2, registry_of({1, 2, 3, 4}));
  ASSERT_EQ(js.size(), 1u);
  EXPECT_EQ(js[0].claimed_id, NodeId{1});
}

TEST(Judge, InvalidRecordIsRepolled) {
  RecordTable t;
  DetectionRecord bad;
  bad.claimed_id = NodeId{4};
  bad.valid = false;
  t[bad.claimed_id].push_back(bad);
  const std::vector<Round2Entry> r2{{NodeId{4}, 1.0, 1}};
  EXPECT_TRUE(judge(t, r2, registry_of({4})).empty());
}

TEST(JudgeProperties, HonestMotionIsAlwaysNormal) {
  Rng rng(99);
  const Position e1{25, 25}, e2{75, 25};
  const auto frame = make_frame(e1, e2);
  for (int trial = 0; trial < 200; ++trial) {
    const double r = rng.uniform(0.0, 30.0);
    RecordTable t;
    std::vector<Round2Entry> r2;
    for (std::uint64_t id = 1; id <= 20; ++id) {
      Position p;
      do {
        p = {rng.uniform(0, 100), rng.uniform(0, 100)};
      } while (euclidean_distance(p, e1) < 0.1 || euclidean_distance(p, e2) < 0.1);
      const ControlPacket pkt{NodeId{id}, EdgeId{1}, EdgeId{0}, EdgeRole::Evaluator, Round::First, 0, id};
      t[NodeId{id}].push_back(round1_process(pkt, rssi(kParams, euclidean_distance(p, e1)),
                                             rssi(kParams, euclidean_distance(p, e2)), frame, kParams, r));
      const double dist = rng.uniform(0.0, r);
      const double dir = rng.uniform(0.0, 2 * std::numbers::pi);
      Position q{p.x + dist * std::cos(dir), p.y + dist * std::sin(dir)};
      if (euclidean_distance(q, e1) < 1e-6 || euclidean_distance(q, e2) < 1e-6) q = p;
      r2.push_back({NodeId{id}, rssi(kParams, euclidean_distance(q, e2)) / rssi(kParams, euclidean_distance(q, e1)), 100 + id});
    }
    MembershipRegistry reg;
    for (std::uint64_t id = 1; id <= 20; ++id) reg.enroll(NodeId{id});
    const auto js = judge(t, r2, reg);
    ASSERT_EQ(js.size(), r2.size());
    for (const auto& j : js) EXPECT_EQ(j.verdict, Verdict::Normal) << "r=" << r;
  }
}

TEST(JudgeProperties, TotalAndDeterministic) {
  Rng rng(123);
  for (int trial = 0; trial < 200; ++trial) {
    RecordTable t;
    for (int i = 0; i < 15; ++i) {
      const NodeId id{rng.index(20)};
      DetectionRecord rec;
      rec.claimed_id = id;
      rec.eta1 = rng.uniform(0.1, 10);
      rec.interval = {rec.eta1 * rng.uniform(0.3, 1.0), rec.eta1 * rng.uniform(1.0, 3.0)};
      t[id].push_back(rec);
    }
    std::vector<Round2Entry> r2;
    for (int i = 0; i < 15; ++i) r2.push_back({NodeId{rng.index(30)}, rng.uniform(0.1, 10), static_cast<std::uint64_t>(i)});
    const auto reg = registry_of({1, 3, 5, 7, 25});
    const auto a = judge(t, r2, reg);
    const auto b = judge(t, r2, reg);
    ASSERT_EQ(a.size(), r2.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a[i].transmission, r2[i].transmission);
      EXPECT_EQ(a[i].verdict, b[i].verdict);
      EXPECT_EQ(a[i].matched_with, b[i].matched_with);
    }
  }
}

TEST(ForwardReport, DeliveryRules) {
  const RssiObservation obs{0.02, Round::First, EdgeId{1}, NodeId{3}, 0, 5};
  const auto msg = forward_report(obs, EdgeId{2}, true);
  ASSERT_TRUE(msg);
  EXPECT_EQ(msg->from, EdgeId{1});
  EXPECT_EQ(msg->to, EdgeId{2});
  EXPECT_FALSE(forward_report(obs, EdgeId{2}, false).has_value());
}

TEST(EdgeDetector, ComputesRatioAfterForwardAndIgnoresDuplicates) {
  EdgeDetector e1(EdgeId{1}, kE1, kParams, 0.5);
  EdgeDetector e2(EdgeId{2}, kE2, kParams, 0.5);
  e2.set_peer(EdgeId{1}, kE1);
  const Position node{0.0, 1.0};

  const ControlPacket to_e2{NodeId{8}, EdgeId{2}, EdgeId{1}, EdgeRole::Evaluator, Round::First, 0, 1};
  const ControlPacket to_e1{NodeId{8}, EdgeId{1}, EdgeId{2}, EdgeRole::Reporter, Round::First, 0, 1};
  EXPECT_FALSE(e2.receive(to_e2, rssi(kParams, euclidean_distance(node, kE2))).has_value());
  const auto obs = e1.receive(to_e1, rssi(kParams, euclidean_distance(node, kE1)));
  ASSERT_TRUE(obs);
  const auto msg = forward_report(*obs, EdgeId{2}, true);
  e2.accept_forward(*msg);
  e2.accept_forward(*msg);

  ASSERT_EQ(e2.records().size(), 1u);
  const auto& recs = e2.records().at(NodeId{8});
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_NEAR(recs[0].eta1, 1.0, 1e-12);
  EXPECT_NEAR(*recs[0].interval.lo, 0.33678, 1e-5);

  const Position moved{0.1, 1.2};
  const ControlPacket to_e2b{NodeId{8}, EdgeId{2}, EdgeId{1}, EdgeRole::Evaluator, Round::Second, 0, 2};
  const ControlPacket to_e1b{NodeId{8}, EdgeId{1}, EdgeId{2}, EdgeRole::Reporter, Round::Second, 0, 2};
  e2.receive(to_e2b, rssi(kParams, euclidean_distance(moved, kE2)));
  e2.accept_forward(*forward_report(*e1.receive(to_e1b, rssi(kParams, euclidean_distance(moved, kE1))), EdgeId{2}, true));
  ASSERT_EQ(e2.round2().size(), 1u);

  const auto js = e2.judge(registry_of({8}));
  ASSERT_EQ(js.size(), 1u);
  EXPECT_EQ(js[0].verdict, Verdict::Normal);
  EXPECT_EQ(e2.records().at(NodeId{8})[0].verdict, Verdict::Normal);
  EXPECT_TRUE(e2.records().at(NodeId{8})[0].matched_round2.has_value());

  e2.clear();
  EXPECT_EQ(e2.retained(), 0u);
}

TEST(EdgeDetector, LostForwardLeavesNoRecord) {
  EdgeDetector e2(EdgeId{2}, kE2, kParams, 0.5);
  e2.set_peer(EdgeId{1}, kE1);
  const ControlPacket to_e2{NodeId{8}, EdgeId{2}, EdgeId{1}, EdgeRole::Evaluator, Round::First, 0, 1};
  e2.receive(to_e2, 0.5);
  EXPECT_TRUE(e2.records().empty());
}
