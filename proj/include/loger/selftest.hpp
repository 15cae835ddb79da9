#pragma once

// Self-verification against the brute-force oracles on small generated graphs.

#include <cstdint>
#include <string>
#include <vector>

namespace loger {

struct SelftestCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Grounding counts, pseudolikelihood gradient, reasoner gradient, beam/oracle
// equivalence and checkpoint round trip.
std::vector<SelftestCheck> run_selftest(std::uint64_t seed);

}  // namespace loger
