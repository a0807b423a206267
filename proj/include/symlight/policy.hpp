#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "symlight/expr.hpp"
#include "symlight/sim.hpp"

namespace symlight {

// The eight movement-level traffic features, all normalized into [0, 1].
// WI/WO/CI/CO/DI/DO are raw lane counts divided by the total number of
// vehicles on lanes incident to the intersection (at least 1); LI/LO are
// raw lane counts over the combined capacity of the two lanes.
struct LaneFeatures {
  double WI = 0, WO = 0, CI = 0, CO = 0, DI = 0, DO = 0, LI = 0, LO = 0;

  FeatureArray as_array() const { return {WI, WO, CI, CO, DI, DO, LI, LO}; }

  bool operator==(const LaneFeatures&) const = default;
};

// Waiting = queued at the stop line; near = within the distance coverable
// at lane free-flow speed during one green interval (decision interval).
LaneFeatures extract_features(const Simulation& sim, int intersection, int movement);

// Sums the priority of each phase's movements and returns the argmax,
// ties to the lowest phase index.
int phase_decision(const ExprTree& priority, const Simulation& sim, int intersection);

// Classical MaxPressure on raw queue counts: phase score is the sum of
// (incoming queue - outgoing queue) over its movements.
int max_pressure_decision(const Simulation& sim, int intersection);

// Round-robin: one decision interval per phase.
int fixed_time_decision(const Simulation& sim, int intersection, double now);

Controller make_policy_controller(TokenList policy);
Controller make_max_pressure_controller();
Controller make_fixed_time_controller();
Controller make_random_controller(std::uint64_t seed);

// Occurrence counts of each variable token across the given policies,
// indexed by variable_index().
std::array<int, kNumVariables> feature_frequency(const std::vector<TokenList>& policies);

}  // namespace symlight
