#include "symlight/scenario_gen.hpp"

#include <array>
#include <map>
#include <stdexcept>

#include "symlight/rng.hpp"

namespace symlight {

namespace {

// Sides clockwise; straight/left/right exits relative to the approach side.
enum Side { kNorth = 0, kEast = 1, kSouth = 2, kWest = 3 };

enum Maneuver { kStraight = 0, kLeft = 1, kRight = 2 };

int exit_side(int side, int maneuver) {
  switch (maneuver) {
    case kLeft: return (side + 1) % 4;
    case kRight: return (side + 3) % 4;
    default: return (side + 2) % 4;
  }
}

struct DemandRates {
  double major;  // arrivals per second per horizontal entry road
  double minor;
};

// Calibrated so that on the grids used for acceptance, fixed-time,
// MaxPressure and searched policies separate clearly under "medium".
DemandRates demand_rates(const std::string& profile) {
  if (profile == "light") return {1.0 / 16.0, 1.0 / 32.0};
  if (profile == "medium") return {1.0 / 5.5, 1.0 / 12.0};
  if (profile == "heavy") return {1.0 / 4.2, 1.0 / 10.0};
  throw std::invalid_argument("unknown demand profile '" + profile + "' (want light, medium or heavy)");
}

constexpr double kTurnProbability = 0.45;

}  // namespace

Scenario generate_grid_scenario(const GridSpec& spec) {
  if (spec.rows < 1 || spec.cols < 1) throw std::invalid_argument("grid needs at least 1x1");
  if (spec.phase_config != "4" && spec.phase_config != "8" && spec.phase_config != "mixed") {
    throw std::invalid_argument("unknown phase config '" + spec.phase_config + "' (want 4, 8 or mixed)");
  }
  const DemandRates rates = demand_rates(spec.demand);

  Scenario scenario;
  scenario.episode_length_s = spec.episode_length_s;
  auto& net = scenario.network;

  const auto inter_id = [&](int row, int col) { return row * spec.cols + col; };
  const auto neighbor = [&](int row, int col, int side) -> int {
    switch (side) {
      case kNorth: return row > 0 ? inter_id(row - 1, col) : kBoundary;
      case kEast: return col + 1 < spec.cols ? inter_id(row, col + 1) : kBoundary;
      case kSouth: return row + 1 < spec.rows ? inter_id(row + 1, col) : kBoundary;
      default: return col > 0 ? inter_id(row, col - 1) : kBoundary;
    }
  };

  // Every road has a dedicated left-turn lane (0) and a through+right
  // lane (1), so a waiting left turner never blocks through traffic.
  const LaneDef lane{spec.lane_capacity, spec.lane_length_m, spec.lane_speed_mps};
  const auto add_road = [&](int from, int to) {
    const int id = static_cast<int>(net.roads.size());
    net.roads.push_back(RoadDef{id, from, to, {lane, lane}});
    return id;
  };
  const auto lane_of = [](int road, int index) { return 2 * road + index; };
  const auto lane_for_maneuver = [&](int road, int maneuver) {
    return lane_of(road, maneuver == kLeft ? 0 : 1);
  };

  // in_road[u][side]: road entering u from that side; out_road[u][side]: leaving.
  const int n_inters = spec.rows * spec.cols;
  std::vector<std::array<int, 4>> in_road(n_inters), out_road(n_inters);

  // Internal roads first (both directions per adjacency), then boundary
  // sources/sinks on every perimeter side.
  for (int row = 0; row < spec.rows; ++row) {
    for (int col = 0; col < spec.cols; ++col) {
      const int u = inter_id(row, col);
      if (col + 1 < spec.cols) {
        const int v = inter_id(row, col + 1);
        const int east = add_road(u, v);
        const int west = add_road(v, u);
        out_road[u][kEast] = east;
        in_road[v][kWest] = east;
        out_road[v][kWest] = west;
        in_road[u][kEast] = west;
      }
      if (row + 1 < spec.rows) {
        const int v = inter_id(row + 1, col);
        const int south = add_road(u, v);
        const int north = add_road(v, u);
        out_road[u][kSouth] = south;
        in_road[v][kNorth] = south;
        out_road[v][kNorth] = north;
        in_road[u][kSouth] = north;
      }
    }
  }
  std::vector<int> entry_roads;
  std::map<int, std::pair<int, int>> road_enters;  // entry road -> (intersection, approach side)
  for (int row = 0; row < spec.rows; ++row) {
    for (int col = 0; col < spec.cols; ++col) {
      const int u = inter_id(row, col);
      for (int side = 0; side < 4; ++side) {
        if (neighbor(row, col, side) != kBoundary) continue;
        in_road[u][side] = add_road(kBoundary, u);
        out_road[u][side] = add_road(u, kBoundary);
        entry_roads.push_back(in_road[u][side]);
        road_enters[in_road[u][side]] = {u, side};
      }
    }
  }

  // Movement index = approach side * 6 + maneuver * 2 + target lane,
  // maneuvers ordered straight, left, right.
  for (int row = 0; row < spec.rows; ++row) {
    for (int col = 0; col < spec.cols; ++col) {
      const int u = inter_id(row, col);
      IntersectionDef inter;
      inter.id = u;
      for (int side = 0; side < 4; ++side) {
        for (int maneuver : {kStraight, kLeft, kRight}) {
          for (int target : {0, 1}) {
            inter.movements.push_back(
                MovementDef{lane_for_maneuver(in_road[u][side], maneuver),
                            lane_of(out_road[u][exit_side(side, maneuver)], target)});
          }
        }
      }
      const auto straight_right = [](int side) {
        const int b = side * 6;
        return std::vector<int>{b, b + 1, b + 4, b + 5};
      };
      const auto left = [](int side) {
        const int b = side * 6;
        return std::vector<int>{b + 2, b + 3};
      };
      const auto join = [](std::vector<int> a, const std::vector<int>& b) {
        a.insert(a.end(), b.begin(), b.end());
        return a;
      };
      const bool eight = spec.phase_config == "8" || (spec.phase_config == "mixed" && u % 2 == 1);
      if (eight) {
        inter.phases = {straight_right(kNorth), straight_right(kSouth),
                        straight_right(kEast),  straight_right(kWest),
                        left(kNorth),           left(kSouth),
                        left(kEast),            left(kWest)};
      } else {
        inter.phases = {join(straight_right(kNorth), straight_right(kSouth)),
                        join(straight_right(kEast), straight_right(kWest)),
                        join(left(kNorth), left(kSouth)),
                        join(left(kEast), left(kWest))};
      }
      net.intersections.push_back(std::move(inter));
    }
  }

  // A route is straight-through or turns exactly once; the lane on each
  // road follows the maneuver at the road's downstream intersection.
  const auto walk_route = [&](int entry_road, int turn_step, int turn_maneuver) {
    std::vector<int> roads{entry_road};
    std::vector<int> maneuvers;
    auto [u, side] = road_enters.at(entry_road);
    int step = 0;
    while (true) {
      const int man = step == turn_step ? turn_maneuver : kStraight;
      const int exit = exit_side(side, man);
      maneuvers.push_back(man);
      const int road = out_road[u][exit];
      roads.push_back(road);
      const int next = net.roads[road].to;
      if (next == kBoundary) break;
      u = next;
      side = (exit + 2) % 4;  // enters the neighbor from the opposite side
      ++step;
    }
    std::vector<int> route;
    for (std::size_t i = 0; i < maneuvers.size(); ++i) {
      route.push_back(lane_for_maneuver(roads[i], maneuvers[i]));
    }
    route.push_back(lane_for_maneuver(roads.back(), kStraight));  // exit lane
    return route;
  };

  const auto straight_length = [&](int entry_road) {
    // Number of intersections a straight-through route crosses.
    auto [u, side] = road_enters.at(entry_road);
    int n = 0;
    while (u != kBoundary) {
      ++n;
      const int road = out_road[u][exit_side(side, kStraight)];
      u = net.roads[road].to;
    }
    return n;
  };

  for (int road : entry_roads) {
    const int side = road_enters.at(road).second;
    const bool horizontal = side == kEast || side == kWest;
    const double rate = horizontal ? rates.major : rates.minor;
    const int path_len = straight_length(road);
    Rng rng(mix_seed(spec.seed, static_cast<std::uint64_t>(road)));
    double t = rng.exponential(rate);
    while (t < spec.episode_length_s) {
      int turn_step = -1;
      int turn_maneuver = kStraight;
      if (rng.uniform01() < kTurnProbability) {
        turn_step = static_cast<int>(rng.uniform_int(0, path_len - 1));
        turn_maneuver = rng.uniform_int(0, 1) == 0 ? kLeft : kRight;
      }
      scenario.flows.push_back(Flow{t, walk_route(road, turn_step, turn_maneuver)});
      t += rng.exponential(rate);
    }
  }

  validate_scenario(scenario);
  return scenario;
}

}  // namespace symlight
