#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "symlight/policy.hpp"
#include "symlight/scenario_gen.hpp"
#include "symlight/sim.hpp"
#include "test_util.hpp"

using namespace symlight;

namespace {

Network cross_network(double in_length = 100.0) {
  Network net;
  net.roads.push_back(RoadDef{0, kBoundary, 0, {LaneDef{10, in_length, 10.0}}});
  net.roads.push_back(RoadDef{1, kBoundary, 0, {LaneDef{10, in_length, 10.0}}});
  net.roads.push_back(RoadDef{2, 0, kBoundary, {LaneDef{10, 100.0, 10.0}}});
  net.roads.push_back(RoadDef{3, 0, kBoundary, {LaneDef{10, 100.0, 10.0}}});
  IntersectionDef inter;
  inter.id = 0;
  inter.movements = {MovementDef{0, 2}, MovementDef{1, 3}};
  inter.phases = {{0}, {1}};
  net.intersections.push_back(inter);
  return net;
}

// Independent feature recount straight from raw lane contents and the
// scenario's road list (lane ids by listing order).
LaneFeatures brute_force_features(const Simulation& sim, const Network& net, int inter_index,
                                  int movement) {
  const auto& inter = net.intersections[inter_index];
  const auto& mv = inter.movements[movement];

  std::vector<int> incident;
  int lane_id = 0;
  for (const auto& road : net.roads) {
    for (std::size_t l = 0; l < road.lanes.size(); ++l) {
      if (road.from == inter.id || road.to == inter.id) incident.push_back(lane_id);
      ++lane_id;
    }
  }
  int total = 0;
  for (int lane : incident) {
    total += static_cast<int>(sim.queued_vehicles(lane).size() + sim.running_vehicles(lane).size());
  }
  const double denom = std::max(1, total);

  const auto count = [&](int lane) {
    return static_cast<double>(sim.queued_vehicles(lane).size() + sim.running_vehicles(lane).size());
  };
  const auto waiting = [&](int lane) {
    return static_cast<double>(sim.queued_vehicles(lane).size());
  };
  const auto near = [&](int lane) {
    const double range_m = sim.lane_speed_mps(lane) * sim.decision_interval_s();
    int n = static_cast<int>(sim.queued_vehicles(lane).size());  // distance 0
    for (const auto& [veh, arrival] : sim.running_vehicles(lane)) {
      const double distance_m = (arrival - sim.now()) * sim.lane_speed_mps(lane);
      if (distance_m <= range_m) ++n;
    }
    return static_cast<double>(n);
  };

  LaneFeatures f;
  f.WI = waiting(mv.in_lane) / denom;
  f.WO = waiting(mv.out_lane) / denom;
  f.CI = count(mv.in_lane) / denom;
  f.CO = count(mv.out_lane) / denom;
  f.DI = near(mv.in_lane) / denom;
  f.DO = near(mv.out_lane) / denom;
  const double cap = sim.lane_capacity(mv.in_lane) + sim.lane_capacity(mv.out_lane);
  f.LI = count(mv.in_lane) / cap;
  f.LO = count(mv.out_lane) / cap;
  return f;
}

}  // namespace

TEST_CASE("empty intersection has all-zero features") {
  Simulation sim(cross_network());
  sim.reset({});
  const LaneFeatures f = extract_features(sim, 0, 0);
  CHECK(f == LaneFeatures{});
}

TEST_CASE("one queued vehicle on the incoming lane") {
  Simulation sim(cross_network());
  sim.reset({Flow{0.0, {0, 2}}});
  sim.set_phase(0, 1);  // keep movement 0 red so the vehicle stays queued
  for (int t = 0; t < 12; ++t) sim.step();
  REQUIRE(sim.lane_queue_len(0) == 1);

  const LaneFeatures f = extract_features(sim, 0, 0);
  CHECK(f.WI == 1.0);
  CHECK(f.CI == 1.0);
  CHECK(f.DI == 1.0);
  CHECK(f.LI == 0.05);  // 1 / (10 + 10)
  CHECK(f.WO == 0.0);
  CHECK(f.CO == 0.0);
  CHECK(f.DO == 0.0);
  CHECK(f.LO == 0.0);
}

TEST_CASE("near-intersection feature respects the green-duration range") {
  // 300 m approach, 10 m/s, 20 s interval: range is 200 m from the stop line
  Simulation sim(cross_network(300.0));
  sim.reset({Flow{0.0, {0, 2}}});
  sim.set_phase(0, 1);
  for (int t = 0; t < 5; ++t) sim.step();
  // distance (30 - 5) * 10 = 250 m: on the lane but not near
  CHECK(extract_features(sim, 0, 0).CI == 1.0);
  CHECK(extract_features(sim, 0, 0).DI == 0.0);
  for (int t = 0; t < 7; ++t) sim.step();
  // distance (30 - 12) * 10 = 180 m: within range
  CHECK(extract_features(sim, 0, 0).DI == 1.0);
}

TEST_CASE("features agree with a brute-force recount on random grid states") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    GridSpec gs;
    gs.rows = 1 + static_cast<int>(seed % 2);
    gs.cols = 1 + static_cast<int>(seed % 3);
    gs.demand = seed % 2 == 0 ? "heavy" : "medium";
    gs.episode_length_s = 240;
    gs.seed = seed;
    const Scenario scenario = generate_grid_scenario(gs);
    Simulation sim(scenario.network);
    sim.reset(scenario.flows);
    const Controller ctrl = make_random_controller(seed);
    for (int t = 0; t < 240; ++t) {
      if (t % 20 == 0) {
        for (int i = 0; i < sim.num_intersections(); ++i) sim.set_phase(i, ctrl(sim, i, t));
      }
      sim.step();
      if (t % 7 != 0) continue;
      for (int i = 0; i < sim.num_intersections(); ++i) {
        for (std::size_t m = 0; m < sim.movements(i).size(); ++m) {
          const LaneFeatures got = extract_features(sim, i, static_cast<int>(m));
          const LaneFeatures want = brute_force_features(sim, scenario.network, i, static_cast<int>(m));
          REQUIRE(got == want);
          for (double v : got.as_array()) {
            REQUIRE(v >= 0.0);
            REQUIRE(v <= 1.0);
          }
        }
      }
    }
  }
}

TEST_CASE("phase decision prefers the phase with traffic under pi1") {
  Simulation sim(cross_network());
  sim.reset({Flow{0.0, {1, 3}}});  // traffic on movement 1 only
  sim.set_phase(0, 0);             // hold it red so it queues
  for (int t = 0; t < 12; ++t) sim.step();
  REQUIRE(sim.lane_queue_len(1) == 1);
  const ExprTree pi1 = build_tree(parse_policy("mul LI mul DI DI"));
  CHECK(phase_decision(pi1, sim, 0) == 1);
}

TEST_CASE("constant priority ties break to the lowest phase index") {
  Simulation sim(cross_network());
  sim.reset({});
  // div WI WI evaluates to 1 for every movement on an empty intersection
  const ExprTree constant = build_tree(parse_policy("div WI WI"));
  CHECK(phase_decision(constant, sim, 0) == 0);
}

TEST_CASE("a phase with more movements wins under a constant priority") {
  Network net = cross_network();
  net.intersections[0].phases = {{0}, {0, 1}};
  Simulation sim(net);
  sim.reset({});
  const ExprTree constant = build_tree(parse_policy("div WI WI"));
  CHECK(phase_decision(constant, sim, 0) == 1);
}

TEST_CASE("argmax is invariant under positive scaling of movement scores") {
  GridSpec gs;
  gs.rows = 1;
  gs.cols = 1;
  gs.demand = "heavy";
  gs.episode_length_s = 200;
  gs.seed = 21;
  const Scenario scenario = generate_grid_scenario(gs);
  Simulation sim(scenario.network);
  sim.reset(scenario.flows);
  const Controller ctrl = make_random_controller(5);
  const ExprTree pi1 = build_tree(parse_policy("mul LI mul DI DI"));
  for (int t = 0; t < 200; ++t) {
    if (t % 20 == 0) sim.set_phase(0, ctrl(sim, 0, t));
    sim.step();
    const int chosen = phase_decision(pi1, sim, 0);
    // recompute the argmax with every movement score doubled
    const auto& phases = sim.phases(0);
    int best = 0;
    double best_score = 0.0;
    for (std::size_t pi = 0; pi < phases.size(); ++pi) {
      double score = 0.0;
      for (int mi : phases[pi]) {
        score += 2.0 * evaluate(pi1, extract_features(sim, 0, mi).as_array());
      }
      if (pi == 0 || score > best_score) {
        best = static_cast<int>(pi);
        best_score = score;
      }
    }
    CHECK(chosen == best);
  }
}

TEST_CASE("phase decision is pure: repeated calls agree") {
  Simulation sim(cross_network());
  sim.reset({Flow{0.0, {0, 2}}, Flow{3.0, {1, 3}}});
  sim.set_phase(0, 0);
  for (int t = 0; t < 15; ++t) sim.step();
  const ExprTree pi1 = build_tree(parse_policy("mul LI mul DI DI"));
  const int first = phase_decision(pi1, sim, 0);
  for (int i = 0; i < 5; ++i) CHECK(phase_decision(pi1, sim, 0) == first);
}

TEST_CASE("max pressure with empty queues picks phase 0") {
  Simulation sim(cross_network());
  sim.reset({});
  CHECK(max_pressure_decision(sim, 0) == 0);
}

TEST_CASE("max pressure favors the congested approach") {
  Simulation sim(cross_network());
  std::vector<Flow> flows;
  for (int i = 0; i < 5; ++i) flows.push_back(Flow{static_cast<double>(i), {1, 3}});
  sim.reset(flows);
  sim.set_phase(0, 0);  // approach 1 stays red and queues
  for (int t = 0; t < 30; ++t) sim.step();
  REQUIRE(sim.lane_queue_len(1) == 5);
  CHECK(max_pressure_decision(sim, 0) == 1);
}

TEST_CASE("max pressure subtracts the downstream queue (raw counts)") {
  // Main road through two intersections; a stub side approach at each.
  Network net;
  net.roads.push_back(RoadDef{0, kBoundary, 0, {LaneDef{10, 100.0, 10.0}}});  // lane 0: main in
  net.roads.push_back(RoadDef{1, 0, 1, {LaneDef{4, 100.0, 10.0}}});           // lane 1: middle
  net.roads.push_back(RoadDef{2, 1, kBoundary, {LaneDef{10, 100.0, 10.0}}});  // lane 2: main out
  net.roads.push_back(RoadDef{3, kBoundary, 0, {LaneDef{10, 100.0, 10.0}}});  // lane 3: side in @0
  net.roads.push_back(RoadDef{4, 0, kBoundary, {LaneDef{10, 100.0, 10.0}}});  // lane 4: side out @0
  net.roads.push_back(RoadDef{5, kBoundary, 1, {LaneDef{10, 100.0, 10.0}}});  // lane 5: side in @1
  net.roads.push_back(RoadDef{6, 1, kBoundary, {LaneDef{10, 100.0, 10.0}}});  // lane 6: side out @1
  IntersectionDef i0;
  i0.id = 0;
  i0.movements = {MovementDef{0, 1}, MovementDef{3, 4}};
  i0.phases = {{0}, {1}};
  IntersectionDef i1;
  i1.id = 1;
  i1.movements = {MovementDef{1, 2}, MovementDef{5, 6}};
  i1.phases = {{0}, {1}};
  net.intersections = {i0, i1};

  Simulation sim(net);
  std::vector<Flow> flows;
  for (int i = 0; i < 8; ++i) flows.push_back(Flow{static_cast<double>(2 * i), {0, 1, 2}});
  flows.push_back(Flow{0.0, {3, 4}});
  flows.push_back(Flow{2.0, {3, 4}});
  sim.reset(flows);
  sim.set_phase(0, 0);  // main green at i0, so the middle lane fills
  sim.set_phase(1, 1);  // i1 blocks the middle lane
  for (int t = 0; t < 120; ++t) sim.step();
  REQUIRE(sim.lane_queue_len(1) == 4);  // middle lane full and waiting
  REQUIRE(sim.lane_queue_len(0) == 4);  // the rest backed up upstream
  REQUIRE(sim.lane_queue_len(3) == 2);  // side approach waiting
  // pressure(main) = 4 - 4 = 0 < pressure(side) = 2 - 0, despite the longer main queue
  CHECK(max_pressure_decision(sim, 0) == 1);
}

TEST_CASE("fixed time cycles through phases") {
  Simulation sim(cross_network());
  sim.reset({});
  sim.set_decision_interval_s(20);
  CHECK(fixed_time_decision(sim, 0, 0.0) == 0);
  CHECK(fixed_time_decision(sim, 0, 20.0) == 1);
  CHECK(fixed_time_decision(sim, 0, 40.0) == 0);  // wraps modulo the phase count
  CHECK(fixed_time_decision(sim, 0, 60.0) == 1);
}

TEST_CASE("feature frequency counts variable tokens") {
  const TokenList pi1 = parse_policy("mul LI mul DI DI");
  const auto one = feature_frequency({pi1});
  CHECK(one[variable_index(Token::LI)] == 1);
  CHECK(one[variable_index(Token::DI)] == 2);
  CHECK(one[variable_index(Token::WI)] == 0);

  const auto none = feature_frequency({});
  for (int c : none) CHECK(c == 0);

  const auto twice = feature_frequency({pi1, pi1});
  for (int i = 0; i < kNumVariables; ++i) CHECK(twice[i] == 2 * one[i]);
}
