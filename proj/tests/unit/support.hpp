#pragma once

// Shared helpers for the unit tests: random valid models.

#include <random>
#include <vector>

#include "rwre/model.hpp"

namespace rwre::testing {

inline ModelSpec random_model(std::uint64_t seed, bool allow_one_child = true) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<OffspringAtom> off;
  double total = 0.0;
  const std::uint32_t first = allow_one_child ? 1 : 2;
  for (std::uint32_t k = first; k <= 3; ++k) {
    off.push_back({k, u(gen)});
    total += off.back().q;
  }
  for (auto& a : off) a.q /= total;
  std::vector<EnvAtom> env;
  const int atoms = 2 + static_cast<int>(gen() % 2);
  total = 0.0;
  std::uniform_real_distribution<double> la(std::log(0.2), std::log(3.0));
  for (int j = 0; j < atoms; ++j) {
    env.push_back({std::exp(la(gen)), u(gen)});
    total += env.back().w;
  }
  for (auto& e : env) e.w /= total;
  return {OffspringLaw(off), EnvLaw(env)};
}

}  // namespace rwre::testing
