#include "symlight/expr.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <sstream>

namespace symlight {

namespace {

// Clamp +/-inf to the largest finite double so evaluation stays total.
double saturate(double x) {
  constexpr double kMax = std::numeric_limits<double>::max();
  if (x > kMax) return kMax;
  if (x < -kMax) return -kMax;
  return x;
}

}  // namespace

std::optional<int> remainder(const TokenList& tokens) {
  int r = 1;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (r == 0) return std::nullopt;  // list continues past a complete prefix
    r += arity(tokens[i]) - 1;
  }
  return r;
}

bool is_complete(const TokenList& tokens) {
  auto r = remainder(tokens);
  return r.has_value() && *r == 0;
}

int ExprTree::operator_count() const {
  int n = 0;
  for (const auto& node : nodes) n += is_operator(node.token) ? 1 : 0;
  return n;
}

ExprTree build_tree(const TokenList& tokens) {
  if (!is_complete(tokens)) {
    throw MalformedTokenList("build_tree: token list is not a complete expression");
  }
  ExprTree tree;
  tree.nodes.reserve(tokens.size());
  // (node, child position) pairs waiting for an argument, front-first.
  std::deque<std::pair<std::int32_t, int>> slots;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto idx = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.push_back(ExprNode{tokens[i], {-1, -1}});
    if (i > 0) {
      auto [parent, pos] = slots.front();
      slots.pop_front();
      tree.nodes[parent].child[pos] = idx;
    }
    for (int a = 0; a < arity(tokens[i]); ++a) slots.emplace_back(idx, a);
  }
  return tree;
}

TokenList bft_serialize(const ExprTree& tree) {
  // Nodes are stored in breadth-first order by construction.
  TokenList out;
  out.reserve(tree.nodes.size());
  for (const auto& node : tree.nodes) out.push_back(node.token);
  return out;
}

double evaluate(const ExprTree& tree, const FeatureArray& feats) {
  // Nodes are in BFT order, so children always follow their parent;
  // a single reverse sweep computes every subtree value.
  std::vector<double> value(tree.nodes.size());
  for (auto i = static_cast<std::int32_t>(tree.nodes.size()) - 1; i >= 0; --i) {
    const auto& node = tree.nodes[i];
    switch (node.token) {
      case Token::Add:
        value[i] = saturate(value[node.child[0]] + value[node.child[1]]);
        break;
      case Token::Neg:
        value[i] = -value[node.child[0]];
        break;
      case Token::Mul:
        value[i] = saturate(value[node.child[0]] * value[node.child[1]]);
        break;
      case Token::Div: {
        const double den = value[node.child[1]];
        value[i] = den == 0.0 ? 1.0 : saturate(value[node.child[0]] / den);
        break;
      }
      case Token::Min:
        value[i] = std::min(value[node.child[0]], value[node.child[1]]);
        break;
      case Token::Max:
        value[i] = std::max(value[node.child[0]], value[node.child[1]]);
        break;
      default:
        value[i] = feats[variable_index(node.token)];
        break;
    }
  }
  return value[0];
}

double evaluate(const TokenList& tokens, const FeatureArray& feats) {
  return evaluate(build_tree(tokens), feats);
}

std::optional<Token> parent_slot(const TokenList& tokens) {
  // Replay the slot queue of build_tree, tracking slot owners only.
  // The queue starts with the Root pseudo-slot (nullopt).
  std::deque<std::optional<Token>> slots;
  slots.push_back(std::nullopt);
  for (const Token t : tokens) {
    if (slots.empty()) {
      throw MalformedTokenList("parent_slot: tokens past a complete expression");
    }
    slots.pop_front();
    for (int a = 0; a < arity(t); ++a) slots.emplace_back(t);
  }
  if (slots.empty()) {
    throw MalformedTokenList("parent_slot: list is already complete");
  }
  return slots.front();
}

PolicyCost cost(const TokenList& tokens) {
  if (!is_complete(tokens)) {
    throw MalformedTokenList("cost: token list is not a complete expression");
  }
  PolicyCost c;
  c.bytes = static_cast<int>(tokens.size());
  c.flops = count_operators(tokens);
  return c;
}

int count_operators(const TokenList& tokens) {
  int n = 0;
  for (const Token t : tokens) n += is_operator(t) ? 1 : 0;
  return n;
}

std::string render(const TokenList& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += ' ';
    out += token_name(tokens[i]);
  }
  return out;
}

TokenList parse_policy(const std::string& text) {
  TokenList tokens;
  std::istringstream in(text);
  std::string word;
  while (in >> word) {
    auto t = token_from_name(word);
    if (!t) throw MalformedTokenList("parse_policy: unknown token '" + word + "'");
    tokens.push_back(*t);
  }
  auto r = remainder(tokens);
  if (!r) throw MalformedTokenList("parse_policy: tokens continue past a complete expression");
  if (*r != 0) {
    throw MalformedTokenList("parse_policy: incomplete expression, " +
                             std::to_string(*r) + " token(s) missing");
  }
  return tokens;
}

namespace {

std::string infix_rec(const ExprTree& tree, std::int32_t idx) {
  const auto& node = tree.nodes[idx];
  switch (node.token) {
    case Token::Add:
      return "(" + infix_rec(tree, node.child[0]) + " + " + infix_rec(tree, node.child[1]) + ")";
    case Token::Neg:
      return "(-" + infix_rec(tree, node.child[0]) + ")";
    case Token::Mul:
      return "(" + infix_rec(tree, node.child[0]) + " * " + infix_rec(tree, node.child[1]) + ")";
    case Token::Div:
      return "(" + infix_rec(tree, node.child[0]) + " / " + infix_rec(tree, node.child[1]) + ")";
    case Token::Min:
      return "min(" + infix_rec(tree, node.child[0]) + ", " + infix_rec(tree, node.child[1]) + ")";
    case Token::Max:
      return "max(" + infix_rec(tree, node.child[0]) + ", " + infix_rec(tree, node.child[1]) + ")";
    default:
      return std::string(token_name(node.token));
  }
}

}  // namespace

std::string to_infix(const ExprTree& tree) {
  if (tree.nodes.empty()) return "";
  return infix_rec(tree, 0);
}

}  // namespace symlight
