#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace symlight {

// Token alphabet: 6 operators followed by 8 lane-feature variables.
// The enumeration order is the canonical order used everywhere
// (serialization, action indexing, PSR table rows/columns).
enum class Token : std::uint8_t {
  Add = 0,
  Neg,
  Mul,
  Div,  // protected: x/0 == 1
  Min,
  Max,
  WI,  // waiting vehicles, incoming lane
  WO,  // waiting vehicles, outgoing lane
  CI,  // vehicle count, incoming lane
  CO,  // vehicle count, outgoing lane
  DI,  // vehicles near the junction, incoming lane
  DO,  // vehicles near the junction, outgoing lane
  LI,  // occupancy ratio, incoming lane
  LO,  // occupancy ratio, outgoing lane
};

inline constexpr int kNumOperators = 6;
inline constexpr int kNumVariables = 8;
inline constexpr int kNumTokens = kNumOperators + kNumVariables;

constexpr int token_index(Token t) { return static_cast<int>(t); }

constexpr Token token_at(int index) { return static_cast<Token>(index); }

constexpr bool is_operator(Token t) { return token_index(t) < kNumOperators; }

constexpr bool is_variable(Token t) { return !is_operator(t); }

// Index of a variable token within the 8-slot feature vector.
constexpr int variable_index(Token t) { return token_index(t) - kNumOperators; }

constexpr int arity(Token t) {
  switch (t) {
    case Token::Neg:
      return 1;
    case Token::Add:
    case Token::Mul:
    case Token::Div:
    case Token::Min:
    case Token::Max:
      return 2;
    default:
      return 0;
  }
}

std::string_view token_name(Token t);

// Strict lookup; nullopt for unknown names.
std::optional<Token> token_from_name(std::string_view name);

}  // namespace symlight
