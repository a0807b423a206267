#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "symlight/tokens.hpp"

namespace symlight {

// A priority function is an ordered token list: the breadth-first
// traversal of its expression tree. Uniquely decodable given arities.
using TokenList = std::vector<Token>;

// Feature vector fed to evaluation, indexed by variable_index().
using FeatureArray = std::array<double, kNumVariables>;

struct MalformedTokenList : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// R(pi) = 1 + sum(arity) - |pi|. Zero means the list is a complete
// expression; positive means more tokens are needed. Returns nullopt when
// some strict prefix already closed (such a list cannot arise from legal
// expansion).
std::optional<int> remainder(const TokenList& tokens);

// remainder(tokens) == 0
bool is_complete(const TokenList& tokens);

struct ExprNode {
  Token token;
  std::array<std::int32_t, 2> child{-1, -1};  // arity-many are valid
};

// Arena-backed expression tree; node 0 is the root and nodes appear in
// breadth-first order, so re-serializing is just reading tokens in order.
struct ExprTree {
  std::vector<ExprNode> nodes;

  int operator_count() const;
};

// Decodes a complete token list: each successive token fills the front
// open argument slot; operators append their own slots to the back.
// Throws MalformedTokenList unless remainder(tokens) == 0.
ExprTree build_tree(const TokenList& tokens);

// Breadth-first serialization; inverse of build_tree.
TokenList bft_serialize(const ExprTree& tree);

// Total evaluation: Div(a, 0) == 1, overflow saturates to the largest
// finite double, never NaN.
double evaluate(const ExprTree& tree, const FeatureArray& feats);

// Convenience: build_tree + evaluate.
double evaluate(const TokenList& tokens, const FeatureArray& feats);

// Owner of the breadth-first slot the next appended token will fill;
// nullopt is the distinguished Root pseudo-parent (empty list).
// Throws MalformedTokenList on complete or malformed lists.
std::optional<Token> parent_slot(const TokenList& tokens);

struct PolicyCost {
  int flops = 0;  // operator nodes = scalar float ops per evaluation
  int bytes = 0;  // one byte per token

  bool operator==(const PolicyCost&) const = default;
};

// Throws MalformedTokenList unless the list is complete.
PolicyCost cost(const TokenList& tokens);

// Canonical text form: whitespace-separated tokens in list order,
// e.g. "add neg mul WO WI WI".
std::string render(const TokenList& tokens);

// Inverse of render. Throws MalformedTokenList on unknown names or when
// the decoded list is not a complete expression.
TokenList parse_policy(const std::string& text);

// Human-readable infix rendering, e.g. "((-WO) + (WI * WI))".
std::string to_infix(const ExprTree& tree);

int count_operators(const TokenList& tokens);

}  // namespace symlight
