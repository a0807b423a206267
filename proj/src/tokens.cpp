#include "symlight/tokens.hpp"

namespace symlight {

namespace {

constexpr std::array<std::string_view, kNumTokens> kNames = {
    "add", "neg", "mul", "div", "min", "max",
    "WI",  "WO",  "CI",  "CO",  "DI",  "DO",  "LI", "LO",
};

}  // namespace

std::string_view token_name(Token t) { return kNames[token_index(t)]; }

std::optional<Token> token_from_name(std::string_view name) {
  for (int i = 0; i < kNumTokens; ++i) {
    if (kNames[i] == name) return token_at(i);
  }
  return std::nullopt;
}

}  // namespace symlight
