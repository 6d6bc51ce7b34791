#pragma once

// Shared formula test material: an S-expression dump written independently
// of the printer, a hand-written corpus and a random AST generator.

#include "strata/formula.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <string>

namespace strata::corpus {

std::string sexpr(const Expr& e);

struct CorpusEntry {
  const char* formula;
  const char* ast;
};

std::span<const CorpusEntry> formulas();

class AstGen {
 public:
  explicit AstGen(std::uint32_t seed) : rng_(seed) {}

  ExprPtr expr(int depth);

 private:
  int roll(int n);
  std::string name();
  ExprPtr leaf();
  ExprPtr call(int depth);

  std::mt19937 rng_;
};

}  // namespace strata::corpus
