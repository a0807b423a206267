#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "symlight/expr.hpp"
#include "symlight/rng.hpp"
#include "symlight/sim.hpp"

namespace symlight {

struct SearchConfig {
  int max_operators = 6;
  double epsilon = 0.2;
  double c_uct = 1.4142135623730951;  // sqrt(2); 1/sqrt(2) also reported, so configurable
  double alpha = 1.0;
  int k = 10;
  int iterations = 500;
  std::uint64_t seed = 0;
  // Ablation switches: M1 disables reward shaping, M2 drops LI/LO from the
  // variable set, M3 falls back to uniform rollout. M4 is all three.
  bool reward_shaping = true;
  bool use_li_lo = true;
  bool use_psr = true;
  // Candidate evaluation: base flow by default, or the mean travel time
  // over this many noise-jittered replicas.
  int eval_replicas = 0;
  int noise_bound_s = 60;
  int decision_interval_s = 20;
};

void apply_ablation_mode(SearchConfig& config, const std::string& mode);  // FM, M1..M4

// Tokens legal as the next action: operators drop out of the set once the
// operator count reaches the cap, so every expansion terminates.
std::vector<int> legal_actions(int operator_count, const SearchConfig& config);

// Row index for the pseudo-parent of the first token.
inline constexpr int kRootParentIndex = kNumTokens;

// Parent-child structural frequencies harvested from the archive.
class PsrTable {
 public:
  explicit PsrTable(double alpha) : alpha_(alpha) {}

  void rebuild(const std::vector<TokenList>& policies);

  int count(int parent, int child) const { return counts_[parent][child]; }
  double alpha() const { return alpha_; }

  // Smoothed conditional distribution over the legal action set:
  // P(a) = (c(parent, a) + alpha) / (sum_a' c(parent, a') + alpha * |A|).
  std::vector<double> distribution(int parent, const std::vector<int>& actions) const;

 private:
  double alpha_;
  std::array<std::array<int, kNumTokens>, kNumTokens + 1> counts_{};
};

struct ArchiveEntry {
  TokenList policy;
  double raw_reward = 0.0;
};

// The k best distinct policies seen so far, best-first.
class Archive {
 public:
  explicit Archive(int k) : k_(k) {}

  // Returns true when top-k membership changed.
  bool insert(const TokenList& policy, double raw_reward);

  const std::vector<ArchiveEntry>& entries() const { return entries_; }
  std::vector<TokenList> policies() const;
  bool empty() const { return entries_.empty(); }

 private:
  int k_;
  std::vector<ArchiveEntry> entries_;
};

// Normalizes raw rewards by the best raw reward seen, so shaped values
// lie in (0, 1] and the first evaluation is exactly 1.
class RewardShaper {
 public:
  double shape(double raw);
  double best_raw() const { return best_raw_; }

 private:
  double best_raw_ = 0.0;
};

// Runs episodes for terminal candidates; identical token lists reuse
// their result.
class PolicyEvaluator {
 public:
  PolicyEvaluator(const Scenario& scenario, const SearchConfig& config);

  double avg_travel_time(const TokenList& policy);

  int episodes_run() const { return episodes_run_; }
  int cache_hits() const { return cache_hits_; }

 private:
  Simulation sim_;
  std::vector<std::vector<Flow>> eval_flows_;
  int episode_length_s_;
  int decision_interval_s_;
  std::unordered_map<std::string, double> cache_;
  int episodes_run_ = 0;
  int cache_hits_ = 0;
};

struct SearchNode {
  TokenList state;
  int parent = -1;
  int action = -1;  // token index of the edge from the parent
  int remainder = 1;
  int operator_count = 0;
  bool terminal = false;
  int n_visits = 0;   // N(state)
  int n_edge = 0;     // N(parent state, action)
  double q_edge = 0;  // max shaped reward through this edge
  std::array<std::int32_t, kNumTokens> children;

  SearchNode() { children.fill(-1); }
};

struct SearchLogEntry {
  int iter = 0;
  std::string candidate;
  double raw_reward = 0.0;
  double shaped_reward = 0.0;
  double best_so_far = 0.0;
};

struct SearchResult {
  TokenList best_policy;
  double best_raw_reward = 0.0;
  double best_avg_travel_time_s = 0.0;
  std::vector<ArchiveEntry> archive;
  std::vector<SearchLogEntry> log;
};

// The full search loop over one scenario. Deterministic per config.seed.
class SearchTree {
 public:
  SearchTree(const Scenario& scenario, const SearchConfig& config);

  SearchResult run();

  // Exposed for unit tests.
  std::vector<int> select_path();
  int expand(int node);
  TokenList rollout(TokenList state);
  void backpropagate(const std::vector<int>& path, double reward);
  const std::vector<SearchNode>& nodes() const { return nodes_; }
  const PsrTable& psr() const { return psr_; }

 private:
  double uct(const SearchNode& parent, const SearchNode& child) const;
  std::vector<int> unexplored_actions(const SearchNode& node) const;

  SearchConfig config_;
  PolicyEvaluator evaluator_;
  Rng rng_;
  std::vector<SearchNode> nodes_;
  PsrTable psr_;
  Archive archive_;
  RewardShaper shaper_;
};

SearchResult search(const Scenario& scenario, const SearchConfig& config);

// One JSON object per iteration: {iter, candidate, raw_reward,
// shaped_reward, best_so_far}.
void write_search_log(const std::vector<SearchLogEntry>& log, const std::string& path);

}  // namespace symlight
