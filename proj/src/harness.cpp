#include "symlight/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "symlight/policy.hpp"
#include "symlight/rng.hpp"

namespace symlight {

namespace {

using nlohmann::json;

// Stream ids for derived rngs; fixed so replica flows and random-baseline
// draws are reproducible across runs and shared across controllers.
constexpr std::uint64_t kReplicaStream = 0x4a17735;
constexpr std::uint64_t kRandomCtrlStream = 0xc0117011;

void parallel_for(int n, int jobs, const std::function<void(int)>& body) {
  if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
  jobs = std::max(1, std::min(jobs, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  for (int w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
    });
  }
  for (auto& t : workers) t.join();
}

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}

struct Cell {
  std::string scenario_name;
  const Scenario* scenario;
  std::string controller_name;
  std::uint64_t seed;
  int replica;
  std::string policy_text;  // non-empty for symbolic controllers
  std::string tag;
};

Controller cell_controller(const Cell& cell) {
  if (!cell.policy_text.empty()) return make_policy_controller(parse_policy(cell.policy_text));
  if (cell.controller_name == "fixedtime") return make_fixed_time_controller();
  if (cell.controller_name == "maxpressure") return make_max_pressure_controller();
  if (cell.controller_name == "random") {
    return make_random_controller(mix_seed(kRandomCtrlStream, mix_seed(cell.seed, cell.replica)));
  }
  throw std::invalid_argument("unknown controller '" + cell.controller_name + "'");
}

std::vector<ResultRow> run_cells(const std::vector<Cell>& cells, int decision_interval_s,
                                 int noise_bound_s, int jobs) {
  std::vector<ResultRow> rows(cells.size());
  parallel_for(static_cast<int>(cells.size()), jobs, [&](int i) {
    const Cell& cell = cells[i];
    const auto flows = replica_flows(*cell.scenario, cell.replica, noise_bound_s);
    const auto metrics = run_episode(cell.scenario->network, flows, cell_controller(cell),
                                     cell.scenario->episode_length_s, decision_interval_s);
    ResultRow row;
    row.scenario = cell.scenario_name;
    row.controller = cell.controller_name;
    row.seed = cell.seed;
    row.replica = cell.replica;
    row.avg_travel_time_s = metrics.avg_travel_time_s;
    row.throughput_veh_min = metrics.throughput_veh_min;
    row.policy = cell.policy_text;
    if (!cell.policy_text.empty()) {
      const auto c = cost(parse_policy(cell.policy_text));
      row.flops = c.flops;
      row.bytes = c.bytes;
    }
    row.tag = cell.tag;
    rows[i] = std::move(row);
  });
  return rows;
}

std::string scenario_label(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

std::vector<int> replica_indices(int replicas) {
  std::vector<int> out;
  if (replicas <= 0) {
    out.push_back(0);
  } else {
    for (int r = 1; r <= replicas; ++r) out.push_back(r);
  }
  return out;
}

}  // namespace

std::vector<Flow> replica_flows(const Scenario& scenario, int replica, int noise_bound_s) {
  if (replica == 0) return scenario.flows;
  return jitter_flows(scenario.flows, noise_bound_s, mix_seed(kReplicaStream, replica));
}

std::string format_double(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

std::vector<ResultRow> run_experiment(const ExperimentSpec& spec) {
  const Scenario train = load_scenario(spec.train_scenario);
  const std::string train_name = scenario_label(spec.train_scenario);

  // Train search controllers first, one per seed, in parallel.
  std::map<std::uint64_t, SearchResult> trained;
  const bool wants_search =
      std::find(spec.controllers.begin(), spec.controllers.end(), "search") != spec.controllers.end();
  if (wants_search) {
    std::vector<std::uint64_t> seeds = spec.seeds;
    std::vector<SearchResult> results(seeds.size());
    parallel_for(static_cast<int>(seeds.size()), spec.jobs, [&](int i) {
      SearchConfig config = spec.search;
      config.seed = seeds[i];
      results[i] = search(train, config);
    });
    for (std::size_t i = 0; i < seeds.size(); ++i) trained[seeds[i]] = std::move(results[i]);
  }

  std::vector<Cell> cells;
  for (const auto& name : spec.controllers) {
    for (const auto seed : spec.seeds) {
      std::string policy_text;
      std::string controller_name = name;
      if (name == "search") {
        controller_name = "symlight";
        policy_text = render(trained.at(seed).best_policy);
      } else if (name.rfind("policy:", 0) == 0) {
        controller_name = "policy";
        policy_text = render(parse_policy(name.substr(7)));  // canonicalize
      }
      for (int r : replica_indices(spec.replicas)) {
        cells.push_back(Cell{train_name, &train, controller_name, seed, r, policy_text, ""});
      }
    }
  }
  auto rows = run_cells(cells, spec.search.decision_interval_s, spec.noise_bound_s, spec.jobs);

  if (!spec.out_dir.empty()) {
    std::filesystem::create_directories(spec.out_dir);
    const auto dir = std::filesystem::path(spec.out_dir);
    write_results_csv(rows, (dir / "results.csv").string());
    std::ofstream(dir / "summary.json") << summary_json(rows);
    if (wants_search) {
      // Best across seeds by raw reward; per-seed logs alongside.
      const auto best = std::max_element(
          trained.begin(), trained.end(), [](const auto& a, const auto& b) {
            return a.second.best_raw_reward < b.second.best_raw_reward;
          });
      std::ofstream(dir / "best_policy.txt") << render(best->second.best_policy) << "\n";
      if (trained.size() == 1) {
        write_search_log(trained.begin()->second.log, (dir / "search.log.jsonl").string());
      } else {
        for (const auto& [seed, result] : trained) {
          write_search_log(result.log,
                           (dir / ("search_seed" + std::to_string(seed) + ".log.jsonl")).string());
        }
      }
    }
  }
  return rows;
}

std::vector<ResultRow> transfer_eval(const TokenList& policy, const std::string& source_label,
                                     const std::vector<std::string>& target_paths,
                                     const EvalPlan& plan) {
  std::vector<ResultRow> all;
  const std::string text = render(policy);
  for (const auto& path : target_paths) {
    const Scenario target = load_scenario(path);
    const std::string target_name = scenario_label(path);
    std::vector<Cell> cells;
    for (int r : replica_indices(plan.replicas)) {
      cells.push_back(Cell{target_name, &target, "symlight", 0, r, text,
                           source_label + "->" + target_name});
    }
    auto rows = run_cells(cells, plan.decision_interval_s, plan.noise_bound_s, plan.jobs);
    all.insert(all.end(), rows.begin(), rows.end());
  }
  return all;
}

std::vector<ResultRow> ablation_suite(const ExperimentSpec& spec) {
  const Scenario train = load_scenario(spec.train_scenario);
  const std::string train_name = scenario_label(spec.train_scenario);
  const std::vector<std::string> modes = {"FM", "M1", "M2", "M3", "M4"};

  struct Job {
    std::string mode;
    std::uint64_t seed;
  };
  std::vector<Job> jobs_list;
  for (const auto& mode : modes) {
    for (const auto seed : spec.seeds) jobs_list.push_back(Job{mode, seed});
  }
  std::vector<SearchResult> results(jobs_list.size());
  parallel_for(static_cast<int>(jobs_list.size()), spec.jobs, [&](int i) {
    SearchConfig config = spec.search;
    apply_ablation_mode(config, jobs_list[i].mode);
    config.seed = jobs_list[i].seed;
    results[i] = search(train, config);
  });

  std::vector<Cell> cells;
  for (std::size_t i = 0; i < jobs_list.size(); ++i) {
    const auto text = render(results[i].best_policy);
    for (int r : replica_indices(spec.replicas)) {
      cells.push_back(Cell{train_name, &train, "symlight-" + jobs_list[i].mode, jobs_list[i].seed,
                           r, text, jobs_list[i].mode});
    }
  }
  auto rows = run_cells(cells, spec.search.decision_interval_s, spec.noise_bound_s, spec.jobs);
  if (!spec.out_dir.empty()) {
    std::filesystem::create_directories(spec.out_dir);
    const auto dir = std::filesystem::path(spec.out_dir);
    write_results_csv(rows, (dir / "results.csv").string());
    std::ofstream(dir / "summary.json") << summary_json(rows);
  }
  return rows;
}

std::string results_csv_text(const std::vector<ResultRow>& rows) {
  std::string out =
      "scenario,controller,seed,replica,avg_travel_time_s,throughput_veh_min,policy,flops,bytes,tag\n";
  for (const auto& row : rows) {
    out += csv_quote(row.scenario) + "," + csv_quote(row.controller) + "," +
           std::to_string(row.seed) + "," + std::to_string(row.replica) + "," +
           format_double(row.avg_travel_time_s) + "," + format_double(row.throughput_veh_min) +
           "," + csv_quote(row.policy) + "," + std::to_string(row.flops) + "," +
           std::to_string(row.bytes) + "," + csv_quote(row.tag) + "\n";
  }
  return out;
}

void write_results_csv(const std::vector<ResultRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << results_csv_text(rows);
}

namespace {

json mean_std(const std::vector<double>& values) {
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  if (values.size() > 1) {
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size() - 1);
  }
  return json{{"mean", mean}, {"std", std::sqrt(var)}, {"n", values.size()}};
}

}  // namespace

std::string summary_json(const std::vector<ResultRow>& rows) {
  std::map<std::tuple<std::string, std::string, std::string>,
           std::pair<std::vector<double>, std::vector<double>>>
      groups;
  for (const auto& row : rows) {
    auto& [tts, tps] = groups[{row.scenario, row.controller, row.tag}];
    tts.push_back(row.avg_travel_time_s);
    tps.push_back(row.throughput_veh_min);
  }
  json out;
  out["groups"] = json::array();
  for (const auto& [key, vals] : groups) {
    out["groups"].push_back(json{{"scenario", std::get<0>(key)},
                                 {"controller", std::get<1>(key)},
                                 {"tag", std::get<2>(key)},
                                 {"avg_travel_time_s", mean_std(vals.first)},
                                 {"throughput_veh_min", mean_std(vals.second)}});
  }
  return out.dump(2) + "\n";
}

ExperimentSpec experiment_spec_from_json(const std::string& text) {
  const json j = json::parse(text);
  ExperimentSpec spec;
  spec.train_scenario = j.at("train_scenario").get<std::string>();
  if (j.contains("transfer_scenarios")) {
    spec.transfer_scenarios = j.at("transfer_scenarios").get<std::vector<std::string>>();
  }
  if (j.contains("controllers")) {
    spec.controllers = j.at("controllers").get<std::vector<std::string>>();
  }
  if (j.contains("replicas")) spec.replicas = j.at("replicas").get<int>();
  if (j.contains("noise_bound_s")) spec.noise_bound_s = j.at("noise_bound_s").get<int>();
  if (j.contains("seeds")) spec.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  if (j.contains("out_dir")) spec.out_dir = j.at("out_dir").get<std::string>();
  if (j.contains("jobs")) spec.jobs = j.at("jobs").get<int>();
  if (j.contains("search")) {
    const auto& js = j.at("search");
    auto& s = spec.search;
    if (js.contains("max_operators")) s.max_operators = js.at("max_operators").get<int>();
    if (js.contains("epsilon")) s.epsilon = js.at("epsilon").get<double>();
    if (js.contains("c_uct")) s.c_uct = js.at("c_uct").get<double>();
    if (js.contains("alpha")) s.alpha = js.at("alpha").get<double>();
    if (js.contains("k")) s.k = js.at("k").get<int>();
    if (js.contains("iterations")) s.iterations = js.at("iterations").get<int>();
    if (js.contains("reward_shaping")) s.reward_shaping = js.at("reward_shaping").get<bool>();
    if (js.contains("use_li_lo")) s.use_li_lo = js.at("use_li_lo").get<bool>();
    if (js.contains("use_psr")) s.use_psr = js.at("use_psr").get<bool>();
    if (js.contains("eval_replicas")) s.eval_replicas = js.at("eval_replicas").get<int>();
    if (js.contains("noise_bound_s")) s.noise_bound_s = js.at("noise_bound_s").get<int>();
    if (js.contains("decision_interval_s")) {
      s.decision_interval_s = js.at("decision_interval_s").get<int>();
    }
  }
  return spec;
}

std::string experiment_spec_to_json(const ExperimentSpec& spec) {
  json j{{"train_scenario", spec.train_scenario},
         {"transfer_scenarios", spec.transfer_scenarios},
         {"controllers", spec.controllers},
         {"replicas", spec.replicas},
         {"noise_bound_s", spec.noise_bound_s},
         {"seeds", spec.seeds},
         {"out_dir", spec.out_dir},
         {"jobs", spec.jobs},
         {"search",
          json{{"max_operators", spec.search.max_operators},
               {"epsilon", spec.search.epsilon},
               {"c_uct", spec.search.c_uct},
               {"alpha", spec.search.alpha},
               {"k", spec.search.k},
               {"iterations", spec.search.iterations},
               {"reward_shaping", spec.search.reward_shaping},
               {"use_li_lo", spec.search.use_li_lo},
               {"use_psr", spec.search.use_psr},
               {"eval_replicas", spec.search.eval_replicas},
               {"noise_bound_s", spec.search.noise_bound_s},
               {"decision_interval_s", spec.search.decision_interval_s}}}};
  return j.dump(2) + "\n";
}

}  // namespace symlight
