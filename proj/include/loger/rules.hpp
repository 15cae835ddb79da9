#pragma once

// Composition rules r_1 o ... o r_j => r_ui and their groundings.
//
// A grounding of rule l for the pair (u, v) is a distinct entity sequence
// (u, e_1, ..., v) whose relations spell the rule body. When (u, r_ui, v) is an
// observed triple, walks that traverse that interaction edge itself (in either
// direction) are not groundings of it.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "loger/kg.hpp"
#include "loger/path.hpp"

namespace loger {

struct Rule {
  std::vector<RelationId> body;
  std::uint64_t support = 0;
};

// Ordered by (body length, lexicographic relation ids); a rule's id is its index.
class RuleSet {
 public:
  RuleSet() = default;
  explicit RuleSet(std::vector<Rule> rules);

  std::size_t size() const noexcept { return rules_.size(); }
  bool empty() const noexcept { return rules_.empty(); }
  const Rule& operator[](RuleId id) const { return rules_.at(id); }
  const std::vector<Rule>& rules() const noexcept { return rules_; }
  std::optional<RuleId> find(std::span<const RelationId> body) const;
  std::size_t max_length() const noexcept;

  // Same set restricted to the given ids (ids are renumbered).
  RuleSet subset(std::span<const RuleId> ids) const;

  // One record per line: `id<TAB>rel1,rel2,...<TAB>support`.
  void write(std::ostream& out, const KnowledgeGraph& kg) const;
  static RuleSet read(std::istream& in, const KnowledgeGraph& kg, const std::string& source);

 private:
  std::vector<Rule> rules_;
  std::map<std::vector<RelationId>, RuleId> index_;
};

std::string rule_to_string(const KnowledgeGraph& kg, const Rule& rule);

// All relation sequences of length <= max_len with at least min_support user-rooted
// grounding instances over observed interactions, except the trivial body [r_ui].
RuleSet mine_rules(const KnowledgeGraph& kg, std::size_t max_len = 3,
                   std::uint64_t min_support = 10);

struct RuleCount {
  RuleId rule = 0;
  std::uint64_t count = 0;
};

// Rules (with grounding counts) connecting one user-item pair, ascending by rule id.
struct PairEvidence {
  EntityId item = 0;
  std::vector<RuleCount> rules;
};

// Per-rule grounding counts from one source by sparse path dynamic programming
// over the prefix trie of the rule bodies.
class GroundingCounter {
 public:
  GroundingCounter(const KnowledgeGraph& kg, const RuleSet& rules);

  // counts[rule] = list of (end entity, number of walks), sorted by entity. When
  // excluded_item is set, the interaction edges u<->excluded_item are skipped.
  std::vector<std::vector<std::pair<EntityId, std::uint64_t>>> walk_counts(
      EntityId u, std::optional<EntityId> excluded_item = std::nullopt) const;

  // Evidence for every item reachable from u by some rule body.
  std::vector<PairEvidence> user_evidence(EntityId u) const;

  PairEvidence pair_evidence(EntityId u, EntityId v) const;

 private:
  struct Node {
    RelationId relation = 0;
    std::optional<RuleId> rule;
    std::vector<std::size_t> children;
  };

  const KnowledgeGraph& kg_;
  const RuleSet& rules_;
  std::vector<Node> trie_;  // node 0 is the root
};

// n_l over observed interactions, plus groundings closing on `hidden` triples when given.
std::uint64_t count_groundings(const KnowledgeGraph& kg, const Rule& rule,
                               std::optional<std::span<const Triple>> hidden = std::nullopt);

// n_l(u): groundings of rule closing on u's observed interactions.
std::uint64_t count_user_groundings(const KnowledgeGraph& kg, const Rule& rule, EntityId u);

struct TripletRules {
  std::vector<RuleId> rules;  // L_hrt, ascending
  std::vector<Path> witnesses;  // one grounding per rule, same order
};

TripletRules rules_for_triplet(const KnowledgeGraph& kg, const RuleSet& rules, EntityId u,
                               EntityId v);

// Cached groundings for every user: observed interactions and unobserved items.
class EvidenceIndex {
 public:
  EvidenceIndex() = default;
  EvidenceIndex(const KnowledgeGraph& kg, const RuleSet& rules);

  std::size_t num_rules() const noexcept { return num_rules_; }
  // Evidence for u's observed interactions (one entry per interaction, possibly empty rules).
  std::span<const PairEvidence> observed(EntityId u) const;
  // Evidence for unobserved items that at least one rule reaches.
  std::span<const PairEvidence> unobserved(EntityId u) const;
  // L_uv with counts; empty when no rule connects u and v.
  std::span<const RuleCount> rules_for(EntityId u, EntityId v) const;
  // n_l(u) for every rule.
  std::vector<std::uint64_t> user_counts(EntityId u) const;

 private:
  struct UserEntry {
    std::vector<PairEvidence> observed;
    std::vector<PairEvidence> unobserved;
  };
  std::size_t num_rules_ = 0;
  std::vector<UserEntry> users_;  // indexed by entity id; empty for non-users
};

// Uniformly samples grounding paths closing on u's observed interactions.
class GroundingSampler {
 public:
  GroundingSampler(const KnowledgeGraph& kg, const RuleSet& rules, const EvidenceIndex& evidence,
                   EntityId u);

  // n_l(u) for every rule.
  const std::vector<std::uint64_t>& counts() const noexcept { return totals_; }
  std::uint64_t total() const noexcept { return grand_total_; }

  // Uniform over the groundings of one rule; requires counts()[rule] > 0.
  Path sample(RuleId rule, Rng& rng) const;
  // Uniform over all groundings of all rules; requires total() > 0.
  Path sample_any(Rng& rng) const;

 private:
  const KnowledgeGraph& kg_;
  const RuleSet& rules_;
  EntityId user_;
  std::span<const PairEvidence> observed_;
  std::vector<std::uint64_t> totals_;
  std::uint64_t grand_total_ = 0;
  // Forward count layers per (rule, target), filled on first use.
  mutable std::map<std::pair<RuleId, EntityId>,
                   std::vector<std::vector<std::pair<EntityId, std::uint64_t>>>>
      layers_;
};

// Calls visit(path) for every walk from u spelling `body`, in adjacency order; stops
// early when visit returns false. Interaction edges u<->excluded_item are skipped.
void for_each_body_walk(const KnowledgeGraph& kg, EntityId u, std::span<const RelationId> body,
                        std::optional<EntityId> excluded_item,
                        const std::function<bool(const Path&)>& visit);

}  // namespace loger
