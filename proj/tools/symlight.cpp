#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "symlight/harness.hpp"
#include "symlight/mcts.hpp"
#include "symlight/policy.hpp"
#include "symlight/scenario_gen.hpp"
#include "symlight/sim.hpp"

namespace {

using nlohmann::json;
using namespace symlight;

double parse_c_uct(const std::string& text) {
  if (text == "sqrt2") return std::sqrt(2.0);
  if (text == "1/sqrt2" || text == "invsqrt2") return 1.0 / std::sqrt(2.0);
  try {
    return std::stod(text);
  } catch (const std::exception&) {
    throw CLI::ValidationError("--c-uct", "expected sqrt2, 1/sqrt2 or a number, got '" + text + "'");
  }
}

// Provenance: every run that writes results records how it was produced.
void write_run_meta(const std::string& dir, int argc, char** argv, const json& resolved) {
  std::filesystem::create_directories(dir);
  json meta;
  meta["invocation"] = json::array();
  for (int i = 0; i < argc; ++i) meta["invocation"].push_back(argv[i]);
  meta["config"] = resolved;
  std::ofstream(std::filesystem::path(dir) / "run_meta.json") << meta.dump(2) << "\n";
}

json search_config_json(const SearchConfig& c) {
  return json{{"max_operators", c.max_operators},
              {"epsilon", c.epsilon},
              {"c_uct", c.c_uct},
              {"alpha", c.alpha},
              {"k", c.k},
              {"iterations", c.iterations},
              {"seed", c.seed},
              {"reward_shaping", c.reward_shaping},
              {"use_li_lo", c.use_li_lo},
              {"use_psr", c.use_psr},
              {"eval_replicas", c.eval_replicas},
              {"noise_bound_s", c.noise_bound_s},
              {"decision_interval_s", c.decision_interval_s}};
}

json group_summary(const std::vector<ResultRow>& rows) {
  return json::parse(summary_json(rows));
}

void print_rows(const std::vector<ResultRow>& rows, bool as_json) {
  if (as_json) {
    std::cout << group_summary(rows).dump() << "\n";
    return;
  }
  const json summary = group_summary(rows);
  for (const auto& g : summary.at("groups")) {
    std::printf("%-24s %-16s travel_time %.2f s (±%.2f)  throughput %.2f veh/min\n",
                g.at("scenario").get<std::string>().c_str(),
                g.at("controller").get<std::string>().c_str(),
                g.at("avg_travel_time_s").at("mean").get<double>(),
                g.at("avg_travel_time_s").at("std").get<double>(),
                g.at("throughput_veh_min").at("mean").get<double>());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string read_policy_file(const std::string& path) {
  std::string text = read_file(path);
  // single-line policy text
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  return text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"symlight: symbolic traffic-signal policy search"};
  app.require_subcommand(1);
  bool as_json = false;
  std::string log_level = "info";
  app.add_flag("--json", as_json, "machine-parseable stdout");
  app.add_option("--log-level", log_level, "quiet|info")->capture_default_str();

  // ---- search ------------------------------------------------------------
  auto* cmd_search = app.add_subcommand("search", "train a priority function by MCTS");
  std::string sc_scenario, sc_out, sc_cuct = "sqrt2", sc_spec;
  SearchConfig sc;
  int sc_replicas = 9;
  int sc_jobs = 0;
  cmd_search->add_option("--scenario", sc_scenario, "scenario JSON");
  cmd_search->add_option("--spec", sc_spec, "experiment spec JSON (flags override)");
  cmd_search->add_option("--iterations", sc.iterations)->capture_default_str();
  cmd_search->add_option("--max-ops", sc.max_operators)->capture_default_str();
  cmd_search->add_option("--epsilon", sc.epsilon)->capture_default_str();
  cmd_search->add_option("--c-uct", sc_cuct, "sqrt2, 1/sqrt2 or a number")->capture_default_str();
  cmd_search->add_option("--alpha", sc.alpha)->capture_default_str();
  cmd_search->add_option("--k", sc.k)->capture_default_str();
  cmd_search->add_option("--seed", sc.seed)->capture_default_str();
  cmd_search->add_option("--decision-interval", sc.decision_interval_s)->capture_default_str();
  cmd_search->add_option("--eval-replicas", sc.eval_replicas,
                         "average candidate rewards over jittered replicas")->capture_default_str();
  cmd_search->add_option("--replicas", sc_replicas, "final-policy evaluation replicas")
      ->capture_default_str();
  cmd_search->add_option("--noise", sc.noise_bound_s, "entry-time noise bound, seconds")
      ->capture_default_str();
  cmd_search->add_option("--jobs", sc_jobs, "parallel episode evaluations (0 = all cores)");
  cmd_search->add_option("--out", sc_out, "output directory");
  std::string sc_mode = "FM";
  cmd_search->add_option("--mode", sc_mode, "FM|M1|M2|M3|M4")->capture_default_str();

  // ---- eval ----------------------------------------------------------------
  auto* cmd_eval = app.add_subcommand("eval", "evaluate a policy on a scenario");
  std::string ev_scenario, ev_policy, ev_policy_file, ev_out;
  int ev_replicas = 0, ev_noise = 60, ev_interval = 20;
  std::uint64_t ev_seed = 0;
  cmd_eval->add_option("--scenario", ev_scenario)->required();
  cmd_eval->add_option("--policy", ev_policy, "token text, e.g. \"mul LI mul DI DI\"");
  cmd_eval->add_option("--policy-file", ev_policy_file);
  cmd_eval->add_option("--replicas", ev_replicas, "0 = base flow only")->capture_default_str();
  cmd_eval->add_option("--noise", ev_noise)->capture_default_str();
  cmd_eval->add_option("--decision-interval", ev_interval)->capture_default_str();
  cmd_eval->add_option("--seed", ev_seed)->capture_default_str();
  cmd_eval->add_option("--out", ev_out, "output directory");

  // ---- baseline ------------------------------------------------------------
  auto* cmd_base = app.add_subcommand("baseline", "run a classical controller");
  std::string bl_scenario, bl_name, bl_out;
  int bl_replicas = 0, bl_noise = 60, bl_jobs = 0, bl_interval = 20;
  std::uint64_t bl_seed = 0;
  cmd_base->add_option("--scenario", bl_scenario)->required();
  cmd_base->add_option("--name", bl_name, "maxpressure|fixedtime|random")->required();
  cmd_base->add_option("--replicas", bl_replicas)->capture_default_str();
  cmd_base->add_option("--noise", bl_noise)->capture_default_str();
  cmd_base->add_option("--decision-interval", bl_interval)->capture_default_str();
  cmd_base->add_option("--seed", bl_seed)->capture_default_str();
  cmd_base->add_option("--jobs", bl_jobs);
  cmd_base->add_option("--out", bl_out, "output directory");

  // ---- gen-scenario ----------------------------------------------------------
  auto* cmd_gen = app.add_subcommand("gen-scenario", "generate a synthetic grid scenario");
  GridSpec grid;
  std::string gen_out;
  cmd_gen->add_option("--rows", grid.rows)->capture_default_str();
  cmd_gen->add_option("--cols", grid.cols)->capture_default_str();
  cmd_gen->add_option("--demand", grid.demand, "light|medium|heavy")->capture_default_str();
  cmd_gen->add_option("--phases", grid.phase_config, "4|8|mixed")->capture_default_str();
  cmd_gen->add_option("--episode-length", grid.episode_length_s)->capture_default_str();
  cmd_gen->add_option("--seed", grid.seed)->capture_default_str();
  cmd_gen->add_option("--out", gen_out, "output scenario JSON path")->required();

  // ---- ablate ------------------------------------------------------------------
  auto* cmd_ablate = app.add_subcommand("ablate", "run ablation modes");
  std::string ab_scenario, ab_mode = "all", ab_out, ab_seeds = "0";
  SearchConfig ab;
  int ab_replicas = 9, ab_jobs = 0;
  cmd_ablate->add_option("--scenario", ab_scenario)->required();
  cmd_ablate->add_option("--mode", ab_mode, "FM|M1|M2|M3|M4|all")->capture_default_str();
  cmd_ablate->add_option("--iterations", ab.iterations)->capture_default_str();
  cmd_ablate->add_option("--seeds", ab_seeds, "comma-separated seed list")->capture_default_str();
  cmd_ablate->add_option("--replicas", ab_replicas)->capture_default_str();
  cmd_ablate->add_option("--jobs", ab_jobs);
  cmd_ablate->add_option("--out", ab_out, "output directory");

  // ---- transfer -------------------------------------------------------------------
  auto* cmd_transfer = app.add_subcommand("transfer", "evaluate a frozen policy on unseen scenarios");
  std::string tr_policy_file, tr_policy, tr_source = "trained";
  std::vector<std::string> tr_scenarios;
  std::string tr_out;
  int tr_replicas = 9, tr_noise = 60, tr_jobs = 0, tr_interval = 20;
  cmd_transfer->add_option("--policy-file", tr_policy_file);
  cmd_transfer->add_option("--policy", tr_policy);
  cmd_transfer->add_option("--scenario", tr_scenarios, "target scenario(s)")->required();
  cmd_transfer->add_option("--source", tr_source, "label for the training environment");
  cmd_transfer->add_option("--replicas", tr_replicas)->capture_default_str();
  cmd_transfer->add_option("--noise", tr_noise)->capture_default_str();
  cmd_transfer->add_option("--decision-interval", tr_interval)->capture_default_str();
  cmd_transfer->add_option("--jobs", tr_jobs);
  cmd_transfer->add_option("--out", tr_out, "output directory");

  // ---- analyze ---------------------------------------------------------------------
  auto* cmd_analyze = app.add_subcommand("analyze", "feature frequency / deployability cost");
  std::string an_freq_dir, an_cost_dir;
  cmd_analyze->add_option("--feature-freq", an_freq_dir, "results directory");
  cmd_analyze->add_option("--cost", an_cost_dir, "results directory");

  // global flags may trail the subcommand
  for (CLI::App* sub : {cmd_search, cmd_eval, cmd_base, cmd_gen, cmd_ablate, cmd_transfer,
                        cmd_analyze}) {
    sub->fallthrough();
  }

  CLI11_PARSE(app, argc, argv);

  const bool quiet = log_level == "quiet";

  try {
    if (*cmd_search) {
      ExperimentSpec spec;
      sc.c_uct = parse_c_uct(sc_cuct);
      apply_ablation_mode(sc, sc_mode);
      if (sc_spec.empty()) {
        spec.search = sc;
        spec.seeds = {sc.seed};
        spec.replicas = sc_replicas;
        spec.noise_bound_s = sc.noise_bound_s;
        spec.jobs = sc_jobs;
        spec.out_dir = sc_out;
      } else {
        // spec file first, explicitly passed flags override field by field
        spec = experiment_spec_from_json(read_file(sc_spec));
        const auto passed = [&](const std::string& flag) { return cmd_search->count(flag) > 0; };
        if (passed("--iterations")) spec.search.iterations = sc.iterations;
        if (passed("--max-ops")) spec.search.max_operators = sc.max_operators;
        if (passed("--epsilon")) spec.search.epsilon = sc.epsilon;
        if (passed("--c-uct")) spec.search.c_uct = sc.c_uct;
        if (passed("--alpha")) spec.search.alpha = sc.alpha;
        if (passed("--k")) spec.search.k = sc.k;
        if (passed("--decision-interval")) spec.search.decision_interval_s = sc.decision_interval_s;
        if (passed("--eval-replicas")) spec.search.eval_replicas = sc.eval_replicas;
        if (passed("--mode")) {
          spec.search.reward_shaping = sc.reward_shaping;
          spec.search.use_li_lo = sc.use_li_lo;
          spec.search.use_psr = sc.use_psr;
        }
        if (passed("--seed")) spec.seeds = {sc.seed};
        if (passed("--replicas")) spec.replicas = sc_replicas;
        if (passed("--noise")) spec.noise_bound_s = sc.noise_bound_s;
        if (passed("--jobs")) spec.jobs = sc_jobs;
        if (passed("--out")) spec.out_dir = sc_out;
      }
      if (!sc_scenario.empty()) spec.train_scenario = sc_scenario;
      if (spec.train_scenario.empty()) throw std::runtime_error("search: --scenario required");
      spec.controllers = {"search"};
      if (!spec.out_dir.empty()) {
        write_run_meta(spec.out_dir, argc, argv, search_config_json(spec.search));
      }
      auto rows = run_experiment(spec);
      if (as_json) {
        json j = group_summary(rows);
        // the trained policy of each seed, one-line canonical text
        json found = json::object();
        for (const auto& row : rows) {
          if (row.controller == "symlight") found[std::to_string(row.seed)] = row.policy;
        }
        j["policies"] = found;
        std::cout << j.dump() << "\n";
      } else {
        if (!spec.out_dir.empty() && !quiet) {
          std::cout << "results written to " << spec.out_dir << "\n";
        }
        print_rows(rows, false);
      }
      return 0;
    }

    if (*cmd_eval) {
      if (ev_policy.empty() == ev_policy_file.empty()) {
        throw std::runtime_error("eval: provide exactly one of --policy / --policy-file");
      }
      const std::string text = ev_policy.empty() ? read_policy_file(ev_policy_file) : ev_policy;
      const TokenList policy = parse_policy(text);
      const Scenario scenario = load_scenario(ev_scenario);
      std::vector<ResultRow> rows;
      {
        std::vector<int> replicas;
        if (ev_replicas <= 0) replicas = {0};
        else for (int r = 1; r <= ev_replicas; ++r) replicas.push_back(r);
        for (int r : replicas) {
          const auto flows = replica_flows(scenario, r, ev_noise);
          const auto m = run_episode(scenario.network, flows, make_policy_controller(policy),
                                     scenario.episode_length_s, ev_interval);
          ResultRow row;
          row.scenario = std::filesystem::path(ev_scenario).stem().string();
          row.controller = "policy";
          row.seed = ev_seed;
          row.replica = r;
          row.avg_travel_time_s = m.avg_travel_time_s;
          row.throughput_veh_min = m.throughput_veh_min;
          row.policy = render(policy);
          row.flops = cost(policy).flops;
          row.bytes = cost(policy).bytes;
          rows.push_back(row);
        }
      }
      if (!ev_out.empty()) {
        write_run_meta(ev_out, argc, argv, json{{"policy", render(policy)}, {"replicas", ev_replicas}});
        write_results_csv(rows, (std::filesystem::path(ev_out) / "results.csv").string());
        std::ofstream(std::filesystem::path(ev_out) / "summary.json") << summary_json(rows);
      }
      if (as_json) {
        json j = group_summary(rows);
        j["policy"] = render(policy);
        j["infix"] = to_infix(build_tree(policy));
        std::cout << j.dump() << "\n";
      } else {
        std::cout << "policy: " << render(policy) << "  =  " << to_infix(build_tree(policy)) << "\n";
        print_rows(rows, false);
      }
      return 0;
    }

    if (*cmd_base) {
      ExperimentSpec spec;
      spec.train_scenario = bl_scenario;
      spec.controllers = {bl_name};
      spec.seeds = {bl_seed};
      spec.replicas = bl_replicas;
      spec.noise_bound_s = bl_noise;
      spec.search.decision_interval_s = bl_interval;
      spec.jobs = bl_jobs;
      spec.out_dir = bl_out;
      if (!bl_out.empty()) {
        write_run_meta(bl_out, argc, argv, json{{"name", bl_name}, {"replicas", bl_replicas}});
      }
      auto rows = run_experiment(spec);
      print_rows(rows, as_json);
      return 0;
    }

    if (*cmd_gen) {
      const Scenario scenario = generate_grid_scenario(grid);
      save_scenario(scenario, gen_out);
      if (as_json) {
        std::cout << json{{"out", gen_out},
                          {"intersections", scenario.network.intersections.size()},
                          {"roads", scenario.network.roads.size()},
                          {"vehicles", scenario.flows.size()}}
                         .dump()
                  << "\n";
      } else if (!quiet) {
        std::cout << "wrote " << gen_out << ": " << scenario.network.intersections.size()
                  << " intersections, " << scenario.network.roads.size() << " roads, "
                  << scenario.flows.size() << " vehicles\n";
      }
      return 0;
    }

    if (*cmd_ablate) {
      ExperimentSpec spec;
      spec.train_scenario = ab_scenario;
      spec.search = ab;
      spec.replicas = ab_replicas;
      spec.jobs = ab_jobs;
      spec.out_dir = ab_out;
      spec.seeds.clear();
      {
        std::stringstream ss(ab_seeds);
        std::string item;
        while (std::getline(ss, item, ',')) spec.seeds.push_back(std::stoull(item));
      }
      if (!ab_out.empty()) {
        write_run_meta(ab_out, argc, argv,
                       json{{"mode", ab_mode}, {"search", search_config_json(spec.search)}});
      }
      std::vector<ResultRow> rows;
      if (ab_mode == "all") {
        rows = ablation_suite(spec);
      } else {
        apply_ablation_mode(spec.search, ab_mode);  // validates the name
        spec.controllers = {"search"};
        rows = run_experiment(spec);
        for (auto& row : rows) {
          row.controller = "symlight-" + ab_mode;
          row.tag = ab_mode;
        }
        if (!ab_out.empty()) {
          write_results_csv(rows, (std::filesystem::path(ab_out) / "results.csv").string());
          std::ofstream(std::filesystem::path(ab_out) / "summary.json") << summary_json(rows);
        }
      }
      print_rows(rows, as_json);
      return 0;
    }

    if (*cmd_transfer) {
      if (tr_policy.empty() == tr_policy_file.empty()) {
        throw std::runtime_error("transfer: provide exactly one of --policy / --policy-file");
      }
      const std::string text = tr_policy.empty() ? read_policy_file(tr_policy_file) : tr_policy;
      const TokenList policy = parse_policy(text);
      EvalPlan plan{tr_replicas, tr_noise, tr_interval, tr_jobs};
      auto rows = transfer_eval(policy, tr_source, tr_scenarios, plan);
      if (!tr_out.empty()) {
        write_run_meta(tr_out, argc, argv, json{{"policy", render(policy)}, {"source", tr_source}});
        write_results_csv(rows, (std::filesystem::path(tr_out) / "results.csv").string());
        std::ofstream(std::filesystem::path(tr_out) / "summary.json") << summary_json(rows);
      }
      print_rows(rows, as_json);
      return 0;
    }

    if (*cmd_analyze) {
      if (an_freq_dir.empty() == an_cost_dir.empty()) {
        throw std::runtime_error("analyze: provide exactly one of --feature-freq / --cost");
      }
      const std::string dir = an_freq_dir.empty() ? an_cost_dir : an_freq_dir;
      // Distinct policies found in the run's results.csv.
      const std::string csv = read_file((std::filesystem::path(dir) / "results.csv").string());
      std::vector<std::string> texts;
      std::stringstream lines(csv);
      std::string line;
      std::getline(lines, line);  // header
      while (std::getline(lines, line)) {
        // policy is the 7th field, always quoted
        int field = 0;
        std::size_t pos = 0;
        std::string policy_text;
        while (pos < line.size()) {
          std::string value;
          if (line[pos] == '"') {
            ++pos;
            while (pos < line.size()) {
              if (line[pos] == '"' && pos + 1 < line.size() && line[pos + 1] == '"') {
                value += '"';
                pos += 2;
              } else if (line[pos] == '"') {
                ++pos;
                break;
              } else {
                value += line[pos++];
              }
            }
          } else {
            while (pos < line.size() && line[pos] != ',') value += line[pos++];
          }
          if (field == 6) policy_text = value;
          if (pos < line.size() && line[pos] == ',') ++pos;
          ++field;
        }
        if (!policy_text.empty() &&
            std::find(texts.begin(), texts.end(), policy_text) == texts.end()) {
          texts.push_back(policy_text);
        }
      }
      std::vector<TokenList> policies;
      for (const auto& t : texts) policies.push_back(parse_policy(t));
      if (!an_freq_dir.empty()) {
        const auto counts = feature_frequency(policies);
        json j;
        for (int i = 0; i < kNumVariables; ++i) {
          j[std::string(token_name(token_at(kNumOperators + i)))] = counts[i];
        }
        if (as_json) {
          std::cout << json{{"policies", texts.size()}, {"feature_frequency", j}}.dump() << "\n";
        } else {
          std::cout << "feature frequency over " << texts.size() << " distinct policies:\n";
          for (int i = 0; i < kNumVariables; ++i) {
            std::cout << "  " << token_name(token_at(kNumOperators + i)) << ": " << counts[i] << "\n";
          }
        }
      } else {
        json items = json::array();
        for (const auto& p : policies) {
          const auto c = cost(p);
          items.push_back(json{{"policy", render(p)}, {"flops", c.flops}, {"bytes", c.bytes}});
        }
        if (as_json) {
          std::cout << json{{"policies", items}}.dump() << "\n";
        } else {
          for (const auto& it : items) {
            std::cout << it.at("policy").get<std::string>() << "  flops=" << it.at("flops")
                      << " bytes=" << it.at("bytes") << "\n";
          }
        }
      }
      return 0;
    }
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
