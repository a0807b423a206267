#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "symlight/expr.hpp"
#include "symlight/mcts.hpp"
#include "symlight/sim.hpp"

namespace symlight {

struct ExperimentSpec {
  std::string train_scenario;
  std::vector<std::string> transfer_scenarios;
  // fixedtime | maxpressure | random | search | policy:<tokens>
  std::vector<std::string> controllers;
  SearchConfig search;
  int replicas = 9;  // jittered evaluation replicas; 0 = base flow only
  int noise_bound_s = 60;
  std::vector<std::uint64_t> seeds = {0};
  std::string out_dir;
  int jobs = 0;  // parallel episode evaluations; 0 = hardware concurrency
};

ExperimentSpec experiment_spec_from_json(const std::string& text);
std::string experiment_spec_to_json(const ExperimentSpec& spec);

struct ResultRow {
  std::string scenario;
  std::string controller;
  std::uint64_t seed = 0;
  int replica = 0;
  double avg_travel_time_s = 0.0;
  double throughput_veh_min = 0.0;
  std::string policy;  // symbolic controllers only
  int flops = 0;
  int bytes = 0;
  std::string tag;  // transfer "source->target", ablation mode, else empty
};

struct EvalPlan {
  int replicas = 9;
  int noise_bound_s = 60;
  int decision_interval_s = 20;
  int jobs = 0;
};

// The flows a given evaluation replica sees: replica 0 is the base flow,
// replicas >= 1 are entry-time jittered copies with fixed per-replica
// seeds shared by every controller and experiment.
std::vector<Flow> replica_flows(const Scenario& scenario, int replica, int noise_bound_s);

// Per-(controller, seed, replica) episode metrics; search controllers are
// trained once per seed on the base flow, then their best policy is
// evaluated on all replicas. Writes results.csv, summary.json,
// best_policy.txt and per-seed search logs when spec.out_dir is set.
std::vector<ResultRow> run_experiment(const ExperimentSpec& spec);

// Evaluates a frozen policy on target scenarios; no search.
std::vector<ResultRow> transfer_eval(const TokenList& policy, const std::string& source_label,
                                     const std::vector<std::string>& target_paths,
                                     const EvalPlan& plan);

// FM, M1 (raw rewards), M2 (no LI/LO), M3 (uniform rollout), M4 (all
// three) with shared seeds. Rows are tagged with the mode.
std::vector<ResultRow> ablation_suite(const ExperimentSpec& spec);

void write_results_csv(const std::vector<ResultRow>& rows, const std::string& path);
std::string results_csv_text(const std::vector<ResultRow>& rows);

// Per (scenario, controller, tag) means and sample standard deviations
// across seeds and replicas.
std::string summary_json(const std::vector<ResultRow>& rows);

// Round-trip exact formatting used in CSV output.
std::string format_double(double value);

}  // namespace symlight
