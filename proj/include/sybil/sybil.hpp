#pragma once

#include "sybil/channel.hpp"
#include "sybil/config.hpp"
#include "sybil/core.hpp"
#include "sybil/geometry.hpp"
#include "sybil/mobility.hpp"
#include "sybil/protocol.hpp"
#include "sybil/report.hpp"
#include "sybil/resilience.hpp"
#include "sybil/sim.hpp"
