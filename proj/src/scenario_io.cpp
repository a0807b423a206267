#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "symlight/sim.hpp"

namespace symlight {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("scenario: " + msg); }

json lane_to_json(const LaneDef& lane) {
  return json{{"capacity", lane.capacity},
              {"length_m", lane.length_m},
              {"speed_mps", lane.speed_mps}};
}

LaneDef lane_from_json(const json& j) {
  return LaneDef{j.at("capacity").get<int>(), j.at("length_m").get<double>(),
                 j.at("speed_mps").get<double>()};
}

}  // namespace

std::string scenario_to_json(const Scenario& scenario) {
  json inters = json::array();
  for (const auto& inter : scenario.network.intersections) {
    json movements = json::array();
    for (const auto& mv : inter.movements) {
      movements.push_back(json{{"in_lane", mv.in_lane}, {"out_lane", mv.out_lane}});
    }
    inters.push_back(json{{"id", inter.id}, {"phases", inter.phases}, {"movements", movements}});
  }
  json roads = json::array();
  for (const auto& road : scenario.network.roads) {
    json lanes = json::array();
    for (const auto& lane : road.lanes) lanes.push_back(lane_to_json(lane));
    roads.push_back(json{{"id", road.id}, {"from", road.from}, {"to", road.to}, {"lanes", lanes}});
  }
  json flows = json::array();
  for (const auto& flow : scenario.flows) {
    flows.push_back(json{{"entry_time_s", flow.entry_time_s}, {"route", flow.route}});
  }
  json j{{"network", json{{"intersections", inters}, {"roads", roads}}},
         {"flows", flows},
         {"episode_length_s", scenario.episode_length_s}};
  return j.dump(2) + "\n";
}

Scenario scenario_from_json(const std::string& text) {
  json j = json::parse(text);
  Scenario s;
  const auto& net = j.at("network");
  for (const auto& ji : net.at("intersections")) {
    IntersectionDef inter;
    inter.id = ji.at("id").get<int>();
    inter.phases = ji.at("phases").get<std::vector<std::vector<int>>>();
    for (const auto& jm : ji.at("movements")) {
      inter.movements.push_back(
          MovementDef{jm.at("in_lane").get<int>(), jm.at("out_lane").get<int>()});
    }
    s.network.intersections.push_back(std::move(inter));
  }
  for (const auto& jr : net.at("roads")) {
    RoadDef road;
    road.id = jr.at("id").get<int>();
    road.from = jr.at("from").get<int>();
    road.to = jr.at("to").get<int>();
    for (const auto& jl : jr.at("lanes")) road.lanes.push_back(lane_from_json(jl));
    s.network.roads.push_back(std::move(road));
  }
  for (const auto& jf : j.at("flows")) {
    s.flows.push_back(Flow{jf.at("entry_time_s").get<double>(),
                           jf.at("route").get<std::vector<int>>()});
  }
  s.episode_length_s = j.at("episode_length_s").get<int>();
  validate_scenario(s);
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return scenario_from_json(buf.str());
}

void save_scenario(const Scenario& scenario, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("cannot write " + path);
  out << scenario_to_json(scenario);
}

void validate_scenario(const Scenario& scenario) {
  const auto& net = scenario.network;
  std::set<int> inter_ids;
  for (const auto& inter : net.intersections) {
    if (!inter_ids.insert(inter.id).second) {
      fail("duplicate intersection id " + std::to_string(inter.id));
    }
  }
  std::set<int> road_ids;
  int lane_total = 0;
  std::map<int, int> lane_road_from;  // global lane id -> road.from
  std::map<int, int> lane_road_to;
  for (const auto& road : net.roads) {
    if (!road_ids.insert(road.id).second) fail("duplicate road id " + std::to_string(road.id));
    for (int endpoint : {road.from, road.to}) {
      if (endpoint != kBoundary && inter_ids.count(endpoint) == 0) {
        fail("road " + std::to_string(road.id) + " references unknown intersection " +
             std::to_string(endpoint));
      }
    }
    if (road.lanes.empty()) fail("road " + std::to_string(road.id) + " has no lanes");
    for (const auto& lane : road.lanes) {
      if (lane.capacity < 1) fail("lane capacity must be at least 1");
      if (lane.length_m <= 0.0 || lane.speed_mps <= 0.0) {
        fail("lane length and speed must be positive");
      }
      lane_road_from[lane_total] = road.from;
      lane_road_to[lane_total] = road.to;
      ++lane_total;
    }
  }
  // (intersection id, in lane, out lane) -> exists
  std::set<std::tuple<int, int, int>> movement_set;
  for (const auto& inter : net.intersections) {
    if (inter.movements.empty()) fail("intersection " + std::to_string(inter.id) + " has no movements");
    if (inter.phases.empty()) fail("intersection " + std::to_string(inter.id) + " has no phases");
    for (const auto& mv : inter.movements) {
      if (mv.in_lane < 0 || mv.in_lane >= lane_total || mv.out_lane < 0 || mv.out_lane >= lane_total) {
        fail("movement lane id out of range at intersection " + std::to_string(inter.id));
      }
      if (lane_road_to.at(mv.in_lane) != inter.id) {
        fail("movement in_lane " + std::to_string(mv.in_lane) + " does not end at intersection " +
             std::to_string(inter.id));
      }
      if (lane_road_from.at(mv.out_lane) != inter.id) {
        fail("movement out_lane " + std::to_string(mv.out_lane) + " does not start at intersection " +
             std::to_string(inter.id));
      }
      if (!movement_set.insert({inter.id, mv.in_lane, mv.out_lane}).second) {
        fail("duplicate movement " + std::to_string(mv.in_lane) + "->" +
             std::to_string(mv.out_lane) + " at intersection " + std::to_string(inter.id));
      }
    }
    for (const auto& phase : inter.phases) {
      if (phase.empty()) fail("empty phase at intersection " + std::to_string(inter.id));
      std::set<int> in_phase;
      for (int mi : phase) {
        if (mi < 0 || mi >= static_cast<int>(inter.movements.size())) {
          fail("phase references movement " + std::to_string(mi) + " out of range at intersection " +
               std::to_string(inter.id));
        }
        // a repeated index would double the movement's discharge rate
        if (!in_phase.insert(mi).second) {
          fail("movement " + std::to_string(mi) + " listed twice in a phase at intersection " +
               std::to_string(inter.id));
        }
      }
    }
  }
  for (std::size_t fi = 0; fi < scenario.flows.size(); ++fi) {
    const auto& flow = scenario.flows[fi];
    const std::string where = "flow " + std::to_string(fi);
    if (flow.entry_time_s < 0.0) fail(where + ": negative entry time");
    if (flow.route.empty()) fail(where + ": empty route");
    for (int lane : flow.route) {
      if (lane < 0 || lane >= lane_total) fail(where + ": lane id out of range");
    }
    if (lane_road_from.at(flow.route.front()) != kBoundary) {
      fail(where + ": route must start on a boundary source road");
    }
    if (lane_road_to.at(flow.route.back()) != kBoundary) {
      fail(where + ": route must end on a boundary sink road");
    }
    for (std::size_t i = 0; i + 1 < flow.route.size(); ++i) {
      const int at = lane_road_to.at(flow.route[i]);
      if (at == kBoundary || movement_set.count({at, flow.route[i], flow.route[i + 1]}) == 0) {
        fail(where + ": no movement connects lane " + std::to_string(flow.route[i]) + " to lane " +
             std::to_string(flow.route[i + 1]));
      }
    }
  }
  if (scenario.episode_length_s <= 0) fail("episode_length_s must be positive");
}

}  // namespace symlight
