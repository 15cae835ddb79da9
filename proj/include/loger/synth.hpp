#pragma once

// Synthetic knowledge graphs with planted composition rules, and brute-force
// oracles used for self-verification.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "loger/kg.hpp"
#include "loger/logic.hpp"
#include "loger/path.hpp"
#include "loger/rules.hpp"

namespace loger {

// A chain user -r1-> pool_1 -r2-> ... pool_{L-1} <-rL- item. Its rule body is
// [r1, ..., r_{L-1}, rL^-1]; for L = 1 the single relation links user to item.
struct PlantedRuleSpec {
  std::size_t length = 2;
  std::size_t pool_size = 30;
  std::size_t user_fanout = 1;
  std::size_t mid_fanout = 1;
  std::size_t item_fanout = 1;
  double precision = 0.9;  // fraction of grounded pairs that become interactions
};

struct SynthSpec {
  std::size_t users = 200;
  std::size_t items = 100;
  std::vector<PlantedRuleSpec> planted{{2}, {2}, {3}};
  // Each decoy relation links users and items to a shared tag pool, independent of interactions.
  std::size_t decoy_relations = 5;
  std::size_t decoy_pool = 100;
  double noise_rate = 0.05;  // per user-item pair
  double holdout_fraction = 0.2;
  std::uint64_t seed = 1;
};

struct SynthDataset {
  Schema schema;
  KnowledgeGraph graph;  // forward relations, every interaction
  KnowledgeGraph train;  // forward relations, held-out interactions removed
  std::vector<Triple> held_out;
  std::vector<std::vector<std::string>> planted;  // rule bodies by relation name
};

SynthDataset generate(const SynthSpec& spec);

// Resolves relation names (`rel^-1` for reverse) against an augmented graph.
std::vector<RelationId> resolve_body(const KnowledgeGraph& kg, std::span<const std::string> names);

// Fraction of user-item pairs grounded by `body` that are interactions in kg.
double measured_precision(const KnowledgeGraph& kg, std::span<const RelationId> body);

// Every walk of length 1..max_len from u (ending at v when given), depth-first in
// adjacency order. Throws kOracleScale beyond max_expansions edge expansions.
std::vector<Path> exhaustive_paths(const KnowledgeGraph& kg, EntityId u,
                                   std::optional<EntityId> v, std::size_t max_len,
                                   std::size_t max_expansions = 10000);

// True if the walk crosses the interaction edge between its own endpoints.
bool uses_own_interaction_edge(const KnowledgeGraph& kg, const Path& path);

// Brute-force n_l over observed interactions (and hidden pairs when given).
std::uint64_t oracle_count_groundings(const KnowledgeGraph& kg, std::span<const RelationId> body,
                                      std::span<const Triple> hidden = {});

// Brute-force L_uv: rule ids whose body some non-self-referential walk from u to v spells.
std::vector<RuleId> oracle_rules_for_pair(const KnowledgeGraph& kg, const RuleSet& rules,
                                          EntityId u, EntityId v);

// Pseudolikelihood by direct summation: observed interactions contribute log p, hidden
// pairs q log p + (1 - q) log(1 - p); pairs without rule evidence contribute nothing.
double pl_oracle(const KnowledgeGraph& kg, const RuleSet& rules,
                 std::span<const HiddenTriple> hidden, std::span<const double> w);

}  // namespace loger
