#pragma once

// Shared generators and independent oracles for the test suites. Oracles
// deliberately use different algorithms than the library code they check.

#include <array>
#include <map>
#include <vector>

#include "symlight/expr.hpp"
#include "symlight/rng.hpp"
#include "symlight/tokens.hpp"

namespace symlight::testutil {

// Random legal expansion: append uniformly chosen tokens, operators only
// while under the cap, until the expression completes.
inline TokenList random_complete_list(Rng& rng, int max_operators) {
  TokenList tokens;
  int rem = 1;
  int ops = 0;
  while (rem > 0) {
    int pick;
    if (ops < max_operators) {
      pick = static_cast<int>(rng.uniform_int(0, kNumTokens - 1));
    } else {
      pick = static_cast<int>(rng.uniform_int(kNumOperators, kNumTokens - 1));
    }
    const Token t = token_at(pick);
    tokens.push_back(t);
    rem += arity(t) - 1;
    ops += is_operator(t) ? 1 : 0;
  }
  return tokens;
}

inline FeatureArray random_features(Rng& rng) {
  FeatureArray f;
  // Rational grid values mimic count ratios from the simulator.
  for (auto& v : f) v = static_cast<double>(rng.uniform_int(0, 256)) / 256.0;
  return f;
}

// Independent parent-child tally via breadth-first level arithmetic:
// level k+1 holds, in order, the children of level k's tokens.
// Parent index kNumTokens stands for the root pseudo-parent.
inline std::map<std::pair<int, int>, int> level_tally(const TokenList& tokens) {
  std::map<std::pair<int, int>, int> counts;
  std::vector<std::size_t> level{0};
  std::size_t next = 1;
  ++counts[{kNumTokens, token_index(tokens[0])}];
  while (!level.empty()) {
    std::vector<std::size_t> next_level;
    for (const std::size_t pos : level) {
      for (int a = 0; a < arity(tokens[pos]); ++a) {
        ++counts[{token_index(tokens[pos]), token_index(tokens[next])}];
        next_level.push_back(next);
        ++next;
      }
    }
    level = std::move(next_level);
  }
  return counts;
}

}  // namespace symlight::testutil
