#include "symlight/sim.hpp"

#include <algorithm>
#include <cassert>
#include <stdexcept>

#include "symlight/rng.hpp"

namespace symlight {

int Network::lane_count() const {
  int n = 0;
  for (const auto& road : roads) n += static_cast<int>(road.lanes.size());
  return n;
}

Simulation::Simulation(const Network& net) {
  // Global lane ids follow road listing order.
  std::map<int, int> inter_index;  // intersection id -> index
  for (std::size_t i = 0; i < net.intersections.size(); ++i) {
    inter_index[net.intersections[i].id] = static_cast<int>(i);
  }
  inters_.resize(net.intersections.size());
  for (std::size_t i = 0; i < net.intersections.size(); ++i) {
    inters_[i].id = net.intersections[i].id;
    inters_[i].movements = net.intersections[i].movements;
    inters_[i].phases = net.intersections[i].phases;
  }
  int next_lane = 0;
  for (const auto& road : net.roads) {
    for (const auto& lane : road.lanes) {
      lanes_.push_back(LaneTopo{lane.capacity, lane.length_m, lane.speed_mps,
                                lane.length_m / lane.speed_mps});
      if (road.from == kBoundary) entry_lanes_.push_back(next_lane);
      if (road.from != kBoundary) {
        inters_[inter_index.at(road.from)].incident_lanes.push_back(next_lane);
      }
      if (road.to != kBoundary) {
        inters_[inter_index.at(road.to)].incident_lanes.push_back(next_lane);
      }
      ++next_lane;
    }
  }
  for (auto& inter : inters_) {
    std::sort(inter.incident_lanes.begin(), inter.incident_lanes.end());
    inter.incident_lanes.erase(
        std::unique(inter.incident_lanes.begin(), inter.incident_lanes.end()),
        inter.incident_lanes.end());
  }
  reset({});
}

void Simulation::reset(const std::vector<Flow>& flows) {
  lane_state_.assign(lanes_.size(), LaneState{});
  inter_state_.assign(inters_.size(), InterState{});
  discharge_credit_.clear();
  for (const auto& inter : inters_) {
    discharge_credit_.emplace_back(inter.movements.size(), 0.0);
  }
  source_queues_.clear();
  vehicles_.clear();
  vehicles_.reserve(flows.size());
  for (const auto& flow : flows) {
    VehicleState v;
    v.entry_time_s = flow.entry_time_s;
    v.route = flow.route;
    vehicles_.push_back(std::move(v));
  }
  // Per-lane FIFO source queues ordered by (entry time, vehicle id).
  std::vector<int> order(vehicles_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [this](int a, int b) {
    return vehicles_[a].entry_time_s < vehicles_[b].entry_time_s;
  });
  for (int v : order) source_queues_[vehicles_[v].route.front()].push_back(v);
  now_ = 0.0;
  entered_ = 0;
  completed_ = 0;
}

void Simulation::set_phase(int intersection, int phase) {
  auto& topo = inters_.at(intersection);
  if (phase < 0 || phase >= static_cast<int>(topo.phases.size())) {
    throw std::out_of_range("set_phase: phase index " + std::to_string(phase) +
                            " out of range for intersection " + std::to_string(topo.id));
  }
  auto& st = inter_state_[intersection];
  if (st.current_phase == -1) {
    st.current_phase = phase;  // first activation, no clearance
    return;
  }
  if (st.all_red_remaining > 0) {
    if (st.pending_phase != phase) {
      st.pending_phase = phase;
      st.all_red_remaining = kAllRedSeconds;
    }
    return;
  }
  if (phase == st.current_phase) return;  // extend the green
  st.pending_phase = phase;
  st.all_red_remaining = kAllRedSeconds;
}

void Simulation::transfer(int vehicle, int from_lane, int to_lane, double depart_time) {
  auto& from = lane_state_[from_lane];
  assert(!from.queue.empty() && from.queue.front() == vehicle);
  from.queue.pop_front();
  auto& v = vehicles_[vehicle];
  v.route_pos += 1;
  lane_state_[to_lane].running.push_back(
      RunningVeh{vehicle, depart_time + lanes_[to_lane].travel_time_s});
}

void Simulation::step() {
  const double t = now_;

  // Signal clocks: a tick under clearance is red for every movement.
  for (auto& st : inter_state_) {
    st.green_this_tick = (st.all_red_remaining == 0);
    if (st.all_red_remaining > 0) {
      if (--st.all_red_remaining == 0) st.current_phase = st.pending_phase;
    }
  }

  // Queue discharge through the active phase.
  for (std::size_t ii = 0; ii < inters_.size(); ++ii) {
    const auto& st = inter_state_[ii];
    if (!st.green_this_tick || st.current_phase < 0) continue;
    for (int mi : inters_[ii].phases[st.current_phase]) {
      const auto& mv = inters_[ii].movements[mi];
      double& credit = discharge_credit_[ii][mi];
      credit += kSaturationRate * kTickSeconds;
      while (credit >= 1.0) {
        auto& queue = lane_state_[mv.in_lane].queue;
        if (queue.empty()) {
          credit = 0.0;  // no demand, no banking
          break;
        }
        const int veh = queue.front();
        const auto& route = vehicles_[veh].route;
        const int next_lane = route[vehicles_[veh].route_pos + 1];
        if (next_lane != mv.out_lane) {
          credit = 0.0;  // head of line serves a different movement
          break;
        }
        if (lane_occupancy(mv.out_lane) >= lanes_[mv.out_lane].capacity) {
          credit = 1.0;  // blocked downstream; ready to cross when space opens
          break;
        }
        transfer(veh, mv.in_lane, mv.out_lane, t + kTickSeconds);
        credit -= 1.0;
        if (observer_) observer_(static_cast<int>(ii), mi);
      }
    }
  }

  // Scheduled entries, FIFO per entry lane, admitted only when there is room.
  for (auto& [lane, pending] : source_queues_) {
    while (!pending.empty()) {
      const int veh = pending.front();
      if (vehicles_[veh].entry_time_s > t) break;
      if (lane_occupancy(lane) >= lanes_[lane].capacity) break;
      pending.pop_front();
      auto& v = vehicles_[veh];
      v.entered = true;
      v.route_pos = 0;
      lane_state_[lane].running.push_back(RunningVeh{veh, t + lanes_[lane].travel_time_s});
      ++entered_;
    }
  }

  finish_arrivals(t + kTickSeconds);
  now_ = t + kTickSeconds;
}

void Simulation::finish_arrivals(double up_to) {
  for (std::size_t li = 0; li < lane_state_.size(); ++li) {
    auto& st = lane_state_[li];
    while (!st.running.empty() && st.running.front().arrival_time <= up_to) {
      const auto arr = st.running.front();
      st.running.pop_front();
      auto& v = vehicles_[arr.vehicle];
      if (v.route_pos + 1 == static_cast<int>(v.route.size())) {
        // Final route lane ends at a boundary sink: exit at free flow.
        v.exit_time_s = arr.arrival_time;
        ++completed_;
      } else {
        st.queue.push_back(arr.vehicle);
      }
    }
  }
}

EpisodeMetrics Simulation::metrics(double episode_length_s) const {
  EpisodeMetrics m;
  m.entered = entered_;
  m.completed = completed_;
  double total = 0.0;
  for (const auto& v : vehicles_) {
    if (!v.entered) continue;
    const double end = v.exit_time_s >= 0.0 ? v.exit_time_s : episode_length_s;
    total += end - v.entry_time_s;
  }
  m.avg_travel_time_s = entered_ > 0 ? total / entered_ : 0.0;
  m.throughput_veh_min = completed_ / (episode_length_s / 60.0);
  return m;
}

const std::vector<MovementDef>& Simulation::movements(int intersection) const {
  return inters_.at(intersection).movements;
}

const std::vector<std::vector<int>>& Simulation::phases(int intersection) const {
  return inters_.at(intersection).phases;
}

const std::vector<int>& Simulation::incident_lanes(int intersection) const {
  return inters_.at(intersection).incident_lanes;
}

int Simulation::current_phase(int intersection) const {
  return inter_state_.at(intersection).current_phase;
}

bool Simulation::in_all_red(int intersection) const {
  return inter_state_.at(intersection).all_red_remaining > 0;
}

int Simulation::lane_occupancy(int lane) const {
  const auto& st = lane_state_[lane];
  return static_cast<int>(st.running.size() + st.queue.size());
}

int Simulation::lane_queue_len(int lane) const {
  return static_cast<int>(lane_state_[lane].queue.size());
}

std::vector<int> Simulation::queued_vehicles(int lane) const {
  const auto& q = lane_state_[lane].queue;
  return {q.begin(), q.end()};
}

std::vector<std::pair<int, double>> Simulation::running_vehicles(int lane) const {
  std::vector<std::pair<int, double>> out;
  for (const auto& r : lane_state_[lane].running) out.emplace_back(r.vehicle, r.arrival_time);
  return out;
}

int Simulation::lane_within_range(int lane, double range_m) const {
  const auto& st = lane_state_[lane];
  // distance to stop line = (arrival - now) * speed
  const double cutoff = now_ + range_m / lanes_[lane].speed_mps;
  const auto end = std::upper_bound(
      st.running.begin(), st.running.end(), cutoff,
      [](double value, const RunningVeh& v) { return value < v.arrival_time; });
  return static_cast<int>(st.queue.size() + (end - st.running.begin()));
}

int Simulation::movement_queue_len(int intersection, int movement) const {
  const auto& mv = inters_.at(intersection).movements.at(movement);
  int n = 0;
  for (const int veh : lane_state_[mv.in_lane].queue) {
    const auto& v = vehicles_[veh];
    if (v.route[v.route_pos + 1] == mv.out_lane) ++n;
  }
  return n;
}

EpisodeMetrics run_episode(Simulation& sim, const std::vector<Flow>& flows,
                           const Controller& controller, int episode_length_s,
                           int decision_interval_s) {
  if (episode_length_s <= 0 || decision_interval_s <= 0) {
    throw std::invalid_argument("run_episode: episode length and decision interval must be positive");
  }
  sim.reset(flows);
  sim.set_decision_interval_s(decision_interval_s);
  for (int t = 0; t < episode_length_s; ++t) {
    if (t % decision_interval_s == 0) {
      for (int i = 0; i < sim.num_intersections(); ++i) {
        sim.set_phase(i, controller(sim, i, static_cast<double>(t)));
      }
    }
    sim.step();
  }
  return sim.metrics(static_cast<double>(episode_length_s));
}

EpisodeMetrics run_episode(const Network& net, const std::vector<Flow>& flows,
                           const Controller& controller, int episode_length_s,
                           int decision_interval_s) {
  Simulation sim(net);
  return run_episode(sim, flows, controller, episode_length_s, decision_interval_s);
}

std::vector<Flow> jitter_flows(const std::vector<Flow>& flows, int noise_bound_s,
                               std::uint64_t seed) {
  if (noise_bound_s < 0) throw std::invalid_argument("jitter_flows: negative noise bound");
  Rng rng(seed);
  std::vector<Flow> out = flows;
  for (auto& flow : out) {
    const auto noise = static_cast<double>(rng.uniform_int(-noise_bound_s, noise_bound_s));
    flow.entry_time_s = std::max(0.0, flow.entry_time_s + noise);
  }
  return out;
}

}  // namespace symlight
