#pragma once

#include <cstdint>
#include <string>

#include "symlight/sim.hpp"

namespace symlight {

// Synthetic r x c grid: four-approach intersections, single-lane roads,
// boundary sources/sinks on every perimeter side, Poisson arrivals with
// fixed routes (straight-through or one turn). Horizontal entries carry
// the heavier direction of each demand profile.
struct GridSpec {
  int rows = 1;
  int cols = 1;
  std::string demand = "medium";      // light | medium | heavy
  std::string phase_config = "4";     // "4" | "8" | "mixed"
  int episode_length_s = 3600;
  std::uint64_t seed = 0;
  double lane_length_m = 300.0;
  double lane_speed_mps = 10.0;
  int lane_capacity = 30;
};

Scenario generate_grid_scenario(const GridSpec& spec);

}  // namespace symlight
