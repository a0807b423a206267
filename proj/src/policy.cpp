#include "symlight/policy.hpp"

#include <memory>

#include "symlight/rng.hpp"

namespace symlight {

LaneFeatures extract_features(const Simulation& sim, int intersection, int movement) {
  const auto& mv = sim.movements(intersection).at(movement);
  const int in = mv.in_lane;
  const int out = mv.out_lane;

  int total = 0;
  for (int lane : sim.incident_lanes(intersection)) total += sim.lane_occupancy(lane);
  const double denom = std::max(1, total);

  const double green_s = sim.decision_interval_s();
  const double range_in = sim.lane_speed_mps(in) * green_s;
  const double range_out = sim.lane_speed_mps(out) * green_s;
  const double cap_both = sim.lane_capacity(in) + sim.lane_capacity(out);

  LaneFeatures f;
  f.WI = sim.lane_queue_len(in) / denom;
  f.WO = sim.lane_queue_len(out) / denom;
  f.CI = sim.lane_occupancy(in) / denom;
  f.CO = sim.lane_occupancy(out) / denom;
  f.DI = sim.lane_within_range(in, range_in) / denom;
  f.DO = sim.lane_within_range(out, range_out) / denom;
  f.LI = sim.lane_occupancy(in) / cap_both;
  f.LO = sim.lane_occupancy(out) / cap_both;
  return f;
}

int phase_decision(const ExprTree& priority, const Simulation& sim, int intersection) {
  const auto& phases = sim.phases(intersection);
  const auto& movements = sim.movements(intersection);
  // One priority value per movement; phase score is the sum over its movements.
  std::vector<double> value(movements.size());
  for (std::size_t mi = 0; mi < movements.size(); ++mi) {
    value[mi] = evaluate(priority, extract_features(sim, intersection, static_cast<int>(mi)).as_array());
  }
  int best = 0;
  double best_score = 0.0;
  for (std::size_t pi = 0; pi < phases.size(); ++pi) {
    double score = 0.0;
    for (int mi : phases[pi]) score += value[mi];
    if (pi == 0 || score > best_score) {
      best = static_cast<int>(pi);
      best_score = score;
    }
  }
  return best;
}

int max_pressure_decision(const Simulation& sim, int intersection) {
  const auto& phases = sim.phases(intersection);
  const auto& movements = sim.movements(intersection);
  // Raw counts: vehicles queued for this movement upstream, minus the
  // queue on the receiving lane. Destination-split on the incoming side
  // so movements sharing a lane do not double-count each other's demand.
  int best = 0;
  double best_pressure = 0.0;
  for (std::size_t pi = 0; pi < phases.size(); ++pi) {
    double pressure = 0.0;
    for (int mi : phases[pi]) {
      pressure += sim.movement_queue_len(intersection, mi) -
                  sim.lane_queue_len(movements[mi].out_lane);
    }
    if (pi == 0 || pressure > best_pressure) {
      best = static_cast<int>(pi);
      best_pressure = pressure;
    }
  }
  return best;
}

int fixed_time_decision(const Simulation& sim, int intersection, double now) {
  const auto n = static_cast<int>(sim.phases(intersection).size());
  const int slot = static_cast<int>(now) / sim.decision_interval_s();
  return slot % n;
}

Controller make_policy_controller(TokenList policy) {
  auto tree = std::make_shared<ExprTree>(build_tree(policy));
  return [tree](const Simulation& sim, int intersection, double) {
    return phase_decision(*tree, sim, intersection);
  };
}

Controller make_max_pressure_controller() {
  return [](const Simulation& sim, int intersection, double) {
    return max_pressure_decision(sim, intersection);
  };
}

Controller make_fixed_time_controller() {
  return [](const Simulation& sim, int intersection, double now) {
    return fixed_time_decision(sim, intersection, now);
  };
}

Controller make_random_controller(std::uint64_t seed) {
  auto rng = std::make_shared<Rng>(seed);
  return [rng](const Simulation& sim, int intersection, double) {
    const auto n = static_cast<int>(sim.phases(intersection).size());
    return static_cast<int>(rng->uniform_int(0, n - 1));
  };
}

std::array<int, kNumVariables> feature_frequency(const std::vector<TokenList>& policies) {
  std::array<int, kNumVariables> counts{};
  for (const auto& policy : policies) {
    for (Token t : policy) {
      if (is_variable(t)) ++counts[variable_index(t)];
    }
  }
  return counts;
}

}  // namespace symlight
