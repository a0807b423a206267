#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace symlight {

// ---------------------------------------------------------------------------
// Scenario description (what a scenario JSON file contains)
// ---------------------------------------------------------------------------

inline constexpr int kBoundary = -1;  // road endpoint outside the network

struct LaneDef {
  int capacity = 0;       // vehicles
  double length_m = 0.0;
  double speed_mps = 0.0;  // free-flow speed
};

struct RoadDef {
  int id = 0;
  int from = kBoundary;  // intersection id or kBoundary
  int to = kBoundary;
  std::vector<LaneDef> lanes;  // global lane ids are assigned in listing order
};

struct MovementDef {
  int in_lane = 0;   // global lane id
  int out_lane = 0;
};

struct IntersectionDef {
  int id = 0;
  std::vector<MovementDef> movements;
  std::vector<std::vector<int>> phases;  // movement indices given green together
};

struct Network {
  std::vector<IntersectionDef> intersections;
  std::vector<RoadDef> roads;

  int lane_count() const;
};

struct Flow {
  double entry_time_s = 0.0;
  std::vector<int> route;  // global lane ids, boundary source to boundary sink
};

struct Scenario {
  Network network;
  std::vector<Flow> flows;
  int episode_length_s = 3600;
};

// Structural checks; throws std::runtime_error with a description.
void validate_scenario(const Scenario& scenario);

Scenario load_scenario(const std::string& path);
void save_scenario(const Scenario& scenario, const std::string& path);
std::string scenario_to_json(const Scenario& scenario);
Scenario scenario_from_json(const std::string& text);

// Displaces each entry time by an integer uniform draw in
// [-noise_bound_s, +noise_bound_s], clamped at 0. Routes unchanged.
std::vector<Flow> jitter_flows(const std::vector<Flow>& flows, int noise_bound_s,
                               std::uint64_t seed);

// ---------------------------------------------------------------------------
// Episode metrics
// ---------------------------------------------------------------------------

struct EpisodeMetrics {
  double avg_travel_time_s = 0.0;  // over all vehicles that entered
  double throughput_veh_min = 0.0;
  int completed = 0;
  int entered = 0;
};

// ---------------------------------------------------------------------------
// Simulation engine
// ---------------------------------------------------------------------------

inline constexpr int kAllRedSeconds = 3;
inline constexpr double kSaturationRate = 0.5;  // vehicles per second per movement
inline constexpr double kTickSeconds = 1.0;

// Deterministic point-queue microsimulator. Vehicles traverse lanes at
// free-flow speed, wait in a FIFO queue at the stop line, and cross only
// through movements of the active green phase at the saturation rate,
// respecting downstream lane capacity. Single-threaded per instance.
class Simulation {
 public:
  explicit Simulation(const Network& net);

  // Clears all state and schedules the given vehicles. Vehicle id ==
  // index into `flows`.
  void reset(const std::vector<Flow>& flows);

  // Requests a phase. Same phase extends the green; a different phase
  // schedules kAllRedSeconds of clearance first. The first request after
  // reset() activates directly. Throws std::out_of_range on a bad index.
  void set_phase(int intersection, int phase);

  // Advances one tick of kTickSeconds.
  void step();

  double now() const { return now_; }

  EpisodeMetrics metrics(double episode_length_s) const;

  // -- topology ---------------------------------------------------------
  int num_intersections() const { return static_cast<int>(inters_.size()); }
  int num_lanes() const { return static_cast<int>(lanes_.size()); }
  const std::vector<MovementDef>& movements(int intersection) const;
  const std::vector<std::vector<int>>& phases(int intersection) const;
  // Lanes of roads that end at or start from the intersection.
  const std::vector<int>& incident_lanes(int intersection) const;
  int lane_capacity(int lane) const { return lanes_[lane].capacity; }
  double lane_length_m(int lane) const { return lanes_[lane].length_m; }
  double lane_speed_mps(int lane) const { return lanes_[lane].speed_mps; }

  // -- signal state -----------------------------------------------------
  int current_phase(int intersection) const;
  bool in_all_red(int intersection) const;

  // -- traffic state ----------------------------------------------------
  int lane_occupancy(int lane) const;
  int lane_queue_len(int lane) const;
  // Vehicles within range_m of the lane's downstream end (queued ones
  // are at the stop line and always count).
  int lane_within_range(int lane, double range_m) const;
  // Queued vehicles on the movement's incoming lane that are heading
  // through this movement (next route lane == out_lane).
  int movement_queue_len(int intersection, int movement) const;

  int entered() const { return entered_; }
  int completed() const { return completed_; }
  int in_network() const { return entered_ - completed_; }

  // Green-light duration available to a movement between decisions;
  // used as the horizon for the near-intersection feature range.
  int decision_interval_s() const { return decision_interval_s_; }
  void set_decision_interval_s(int s) { decision_interval_s_ = s; }

  // Called on every stop-line crossing as (intersection, movement index).
  using TransferObserver = std::function<void(int, int)>;
  void set_transfer_observer(TransferObserver obs) { observer_ = std::move(obs); }

  struct VehicleState {
    double entry_time_s = 0.0;  // scheduled
    double exit_time_s = -1.0;  // < 0 while in network or not yet entered
    bool entered = false;
    int route_pos = -1;
    std::vector<int> route;
  };
  const std::vector<VehicleState>& vehicles() const { return vehicles_; }

  // Raw lane contents, for independent recomputation in tests.
  std::vector<int> queued_vehicles(int lane) const;
  std::vector<std::pair<int, double>> running_vehicles(int lane) const;  // (id, arrival time)

 private:
  struct LaneTopo {
    int capacity;
    double length_m;
    double speed_mps;
    double travel_time_s;
  };
  struct InterTopo {
    int id;
    std::vector<MovementDef> movements;
    std::vector<std::vector<int>> phases;
    std::vector<int> incident_lanes;
  };
  struct RunningVeh {
    int vehicle;
    double arrival_time;  // at the downstream end of the lane
  };
  struct LaneState {
    std::deque<RunningVeh> running;  // sorted by arrival_time
    std::deque<int> queue;           // vehicle ids at the stop line
  };
  struct InterState {
    int current_phase = -1;  // -1 until the first decision
    int pending_phase = -1;
    int all_red_remaining = 0;
    bool green_this_tick = false;
  };

  void transfer(int vehicle, int from_lane, int to_lane, double depart_time);
  void finish_arrivals(double up_to);

  std::vector<LaneTopo> lanes_;
  std::vector<InterTopo> inters_;

  std::vector<LaneState> lane_state_;
  std::vector<InterState> inter_state_;
  std::vector<std::vector<double>> discharge_credit_;  // per intersection/movement
  std::vector<VehicleState> vehicles_;
  std::vector<int> entry_lanes_;
  std::map<int, std::deque<int>> source_queues_;  // entry lane -> pending vehicles
  double now_ = 0.0;
  int entered_ = 0;
  int completed_ = 0;
  int decision_interval_s_ = 20;
  TransferObserver observer_;
};

// Maps per-intersection observations to a phase index at each decision.
using Controller = std::function<int(const Simulation&, int intersection, double now)>;

// Queries the controller once per intersection every decision_interval_s,
// simulates with a 1 s inner tick, and collects metrics at the horizon.
EpisodeMetrics run_episode(Simulation& sim, const std::vector<Flow>& flows,
                           const Controller& controller, int episode_length_s,
                           int decision_interval_s);

EpisodeMetrics run_episode(const Network& net, const std::vector<Flow>& flows,
                           const Controller& controller, int episode_length_s,
                           int decision_interval_s);

}  // namespace symlight
