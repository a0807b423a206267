#include "symlight/mcts.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "json.hpp"
#include "symlight/policy.hpp"

namespace symlight {

void apply_ablation_mode(SearchConfig& config, const std::string& mode) {
  config.reward_shaping = true;
  config.use_li_lo = true;
  config.use_psr = true;
  if (mode == "FM") return;
  if (mode == "M1") {
    config.reward_shaping = false;
  } else if (mode == "M2") {
    config.use_li_lo = false;
  } else if (mode == "M3") {
    config.use_psr = false;
  } else if (mode == "M4") {
    config.reward_shaping = false;
    config.use_li_lo = false;
    config.use_psr = false;
  } else {
    throw std::invalid_argument("unknown ablation mode '" + mode + "' (want FM, M1, M2, M3 or M4)");
  }
}

std::vector<int> legal_actions(int operator_count, const SearchConfig& config) {
  std::vector<int> actions;
  actions.reserve(kNumTokens);
  if (operator_count < config.max_operators) {
    for (int i = 0; i < kNumOperators; ++i) actions.push_back(i);
  }
  for (int i = kNumOperators; i < kNumTokens; ++i) {
    if (!config.use_li_lo && (token_at(i) == Token::LI || token_at(i) == Token::LO)) continue;
    actions.push_back(i);
  }
  return actions;
}

// ---------------------------------------------------------------------------
// PsrTable
// ---------------------------------------------------------------------------

void PsrTable::rebuild(const std::vector<TokenList>& policies) {
  for (auto& row : counts_) row.fill(0);
  for (const auto& policy : policies) {
    const ExprTree tree = build_tree(policy);
    ++counts_[kRootParentIndex][token_index(tree.nodes[0].token)];
    for (const auto& node : tree.nodes) {
      for (int a = 0; a < arity(node.token); ++a) {
        ++counts_[token_index(node.token)][token_index(tree.nodes[node.child[a]].token)];
      }
    }
  }
}

std::vector<double> PsrTable::distribution(int parent, const std::vector<int>& actions) const {
  double total = 0.0;
  for (int a : actions) total += counts_[parent][a];
  const double denom = total + alpha_ * static_cast<double>(actions.size());
  std::vector<double> probs(actions.size());
  for (std::size_t i = 0; i < actions.size(); ++i) {
    probs[i] = (counts_[parent][actions[i]] + alpha_) / denom;
  }
  return probs;
}

// ---------------------------------------------------------------------------
// Archive
// ---------------------------------------------------------------------------

bool Archive::insert(const TokenList& policy, double raw_reward) {
  for (const auto& e : entries_) {
    if (e.policy == policy) return false;  // identical candidates evaluate identically
  }
  entries_.push_back(ArchiveEntry{policy, raw_reward});
  std::stable_sort(entries_.begin(), entries_.end(),
                   [](const ArchiveEntry& a, const ArchiveEntry& b) {
                     return a.raw_reward > b.raw_reward;
                   });
  bool changed = entries_.size() <= static_cast<std::size_t>(k_);
  if (entries_.size() > static_cast<std::size_t>(k_)) {
    changed = entries_.back().policy != policy;  // stayed in the top k?
    entries_.pop_back();
  }
  return changed;
}

std::vector<TokenList> Archive::policies() const {
  std::vector<TokenList> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.policy);
  return out;
}

// ---------------------------------------------------------------------------
// RewardShaper
// ---------------------------------------------------------------------------

double RewardShaper::shape(double raw) {
  if (raw <= 0.0) throw std::invalid_argument("shaped reward requires a positive raw reward");
  const double shaped = raw / std::max(best_raw_, raw);
  best_raw_ = std::max(best_raw_, raw);
  return shaped;
}

// ---------------------------------------------------------------------------
// PolicyEvaluator
// ---------------------------------------------------------------------------

namespace {
// Fixed stream ids so every candidate (and every search seed) scores
// against the same jittered replicas.
constexpr std::uint64_t kEvalJitterStream = 0x5eaf00d;
}  // namespace

PolicyEvaluator::PolicyEvaluator(const Scenario& scenario, const SearchConfig& config)
    : sim_(scenario.network),
      episode_length_s_(scenario.episode_length_s),
      decision_interval_s_(config.decision_interval_s) {
  if (config.eval_replicas <= 0) {
    eval_flows_.push_back(scenario.flows);
  } else {
    for (int r = 0; r < config.eval_replicas; ++r) {
      eval_flows_.push_back(
          jitter_flows(scenario.flows, config.noise_bound_s, mix_seed(kEvalJitterStream, r)));
    }
  }
}

double PolicyEvaluator::avg_travel_time(const TokenList& policy) {
  const std::string key = render(policy);
  if (auto it = cache_.find(key); it != cache_.end()) {
    ++cache_hits_;
    return it->second;
  }
  const Controller controller = make_policy_controller(policy);
  double total = 0.0;
  for (const auto& flows : eval_flows_) {
    total += run_episode(sim_, flows, controller, episode_length_s_, decision_interval_s_)
                 .avg_travel_time_s;
    ++episodes_run_;
  }
  const double mean = total / static_cast<double>(eval_flows_.size());
  cache_.emplace(key, mean);
  return mean;
}

// ---------------------------------------------------------------------------
// SearchTree
// ---------------------------------------------------------------------------

SearchTree::SearchTree(const Scenario& scenario, const SearchConfig& config)
    : config_(config),
      evaluator_(scenario, config),
      rng_(config.seed),
      psr_(config.alpha),
      archive_(config.k) {
  nodes_.push_back(SearchNode{});  // root: the empty list, remainder 1
}

double SearchTree::uct(const SearchNode& parent, const SearchNode& child) const {
  if (child.n_edge == 0) return std::numeric_limits<double>::infinity();
  return child.q_edge +
         config_.c_uct * std::sqrt(std::log(static_cast<double>(parent.n_visits)) /
                                   static_cast<double>(child.n_edge));
}

std::vector<int> SearchTree::unexplored_actions(const SearchNode& node) const {
  std::vector<int> out;
  for (int a : legal_actions(node.operator_count, config_)) {
    const auto child = node.children[a];
    if (child == -1 || nodes_[child].n_edge == 0) out.push_back(a);
  }
  return out;
}

std::vector<int> SearchTree::select_path() {
  std::vector<int> path{0};
  int cur = 0;
  while (true) {
    const SearchNode& node = nodes_[cur];
    if (node.terminal) break;
    if (!unexplored_actions(node).empty()) break;
    const auto actions = legal_actions(node.operator_count, config_);
    int next = -1;
    if (rng_.uniform01() < config_.epsilon) {
      // epsilon-greedy: uniformly random among the explored children
      next = node.children[actions[rng_.uniform_int(0, static_cast<std::int64_t>(actions.size()) - 1)]];
    } else {
      double best = -std::numeric_limits<double>::infinity();
      for (int a : actions) {
        const double u = uct(node, nodes_[node.children[a]]);
        if (u > best) {
          best = u;
          next = node.children[a];
        }
      }
    }
    path.push_back(next);
    cur = next;
  }
  return path;
}

int SearchTree::expand(int node_idx) {
  const auto options = unexplored_actions(nodes_[node_idx]);
  if (options.empty()) throw std::logic_error("expand: node has no unexplored action");
  const int action = options[rng_.uniform_int(0, static_cast<std::int64_t>(options.size()) - 1)];
  if (nodes_[node_idx].children[action] != -1) {
    return nodes_[node_idx].children[action];  // created earlier, still unvisited
  }
  SearchNode child;
  child.state = nodes_[node_idx].state;
  child.state.push_back(token_at(action));
  child.parent = node_idx;
  child.action = action;
  child.remainder = nodes_[node_idx].remainder + arity(token_at(action)) - 1;
  child.operator_count = nodes_[node_idx].operator_count + (is_operator(token_at(action)) ? 1 : 0);
  child.terminal = child.remainder == 0;
  const int idx = static_cast<int>(nodes_.size());
  nodes_.push_back(std::move(child));
  nodes_[node_idx].children[action] = idx;
  return idx;
}

TokenList SearchTree::rollout(TokenList state) {
  auto r = remainder(state);
  if (!r) throw MalformedTokenList("rollout: malformed start state");
  int rem = *r;
  int ops = count_operators(state);
  while (rem > 0) {
    const auto parent = parent_slot(state);
    const int parent_idx = parent ? token_index(*parent) : kRootParentIndex;
    const auto actions = legal_actions(ops, config_);
    int picked;
    if (config_.use_psr) {
      const auto probs = psr_.distribution(parent_idx, actions);
      const double draw = rng_.uniform01();
      double cum = 0.0;
      picked = actions.back();
      for (std::size_t i = 0; i < actions.size(); ++i) {
        cum += probs[i];
        if (draw < cum) {
          picked = actions[i];
          break;
        }
      }
    } else {
      picked = actions[rng_.uniform_int(0, static_cast<std::int64_t>(actions.size()) - 1)];
    }
    const Token t = token_at(picked);
    state.push_back(t);
    rem += arity(t) - 1;
    ops += is_operator(t) ? 1 : 0;
  }
  return state;
}

void SearchTree::backpropagate(const std::vector<int>& path, double reward) {
  for (int idx : path) {
    SearchNode& node = nodes_[idx];
    node.n_visits += 1;
    if (node.parent != -1) {
      node.n_edge += 1;
      node.q_edge = std::max(node.q_edge, reward);
    }
  }
}

SearchResult SearchTree::run() {
  SearchResult result;
  result.log.reserve(config_.iterations);
  for (int iter = 0; iter < config_.iterations; ++iter) {
    auto path = select_path();
    int leaf = path.back();
    if (!nodes_[leaf].terminal) {
      leaf = expand(leaf);
      path.push_back(leaf);
    }
    const TokenList candidate =
        nodes_[leaf].terminal ? nodes_[leaf].state : rollout(nodes_[leaf].state);

    const double avg_tt = evaluator_.avg_travel_time(candidate);
    double raw;
    if (avg_tt > 0.0) {
      raw = 1.0 / avg_tt;
    } else {
      // Degenerate empty episode: fall back to the current best raw reward.
      raw = shaper_.best_raw() > 0.0 ? shaper_.best_raw() : 1.0;
      std::fprintf(stderr, "warning: zero travel time for candidate '%s' (iter %d), reward pinned to current best\n",
                   render(candidate).c_str(), iter);
    }
    // The shaper always tracks the running best; M1 backpropagates raw.
    const double normalized = shaper_.shape(raw);
    const double shaped = config_.reward_shaping ? normalized : raw;

    if (archive_.insert(candidate, raw)) psr_.rebuild(archive_.policies());
    backpropagate(path, shaped);

    result.log.push_back(SearchLogEntry{iter, render(candidate), raw, shaped, shaper_.best_raw()});
  }
  result.archive = archive_.entries();
  if (result.archive.empty()) throw std::logic_error("search produced no candidates");
  result.best_policy = result.archive.front().policy;
  result.best_raw_reward = result.archive.front().raw_reward;
  result.best_avg_travel_time_s = 1.0 / result.best_raw_reward;
  return result;
}

SearchResult search(const Scenario& scenario, const SearchConfig& config) {
  SearchTree tree(scenario, config);
  return tree.run();
}

void write_search_log(const std::vector<SearchLogEntry>& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write search log to " + path);
  for (const auto& entry : log) {
    nlohmann::json j{{"iter", entry.iter},
                     {"candidate", entry.candidate},
                     {"raw_reward", entry.raw_reward},
                     {"shaped_reward", entry.shaped_reward},
                     {"best_so_far", entry.best_so_far}};
    out << j.dump() << "\n";
  }
}

}  // namespace symlight
