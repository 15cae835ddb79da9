#pragma once

// Heterogeneous knowledge graph: typed entities, named relations, deduplicated
// triples and a CSR adjacency sorted by (relation, entity).

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace loger {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;
using Rng = std::mt19937_64;

enum class EntityType : std::uint8_t { kUser, kItem, kOther };

const char* to_string(EntityType type) noexcept;
EntityType parse_entity_type(const std::string& s);

struct Triple {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  auto operator<=>(const Triple&) const = default;
};

struct Edge {
  RelationId relation = 0;
  EntityId entity = 0;

  auto operator<=>(const Edge&) const = default;
};

// Maps the prefix of an entity name (`user:42` -> `user`) to its type.
struct Schema {
  std::map<std::string, EntityType> prefixes;
  std::string interaction_relation = "purchase";

  EntityType type_of(const std::string& entity_name) const;

  // `interaction = purchase` plus one `type.<prefix> = user|item|other` per prefix.
  static Schema parse(std::istream& in, const std::string& source);
  static Schema load(const std::string& path);
  void save(const std::string& path) const;
};

class KnowledgeGraph {
 public:
  class Builder;

  KnowledgeGraph() = default;

  std::size_t num_entities() const noexcept { return entity_names_.size(); }
  std::size_t num_relations() const noexcept { return relation_names_.size(); }
  std::size_t num_forward_relations() const noexcept { return forward_relations_; }
  std::size_t num_triples() const noexcept { return triples_.size(); }
  bool has_reverse() const noexcept { return has_reverse_; }

  const std::vector<Triple>& triples() const noexcept { return triples_; }
  const std::string& entity_name(EntityId e) const;
  const std::string& relation_name(RelationId r) const;
  EntityType entity_type(EntityId e) const;
  std::optional<EntityId> find_entity(const std::string& name) const;
  std::optional<RelationId> find_relation(const std::string& name) const;

  // Throws kSchema when the interaction relation never occurred in the input.
  RelationId interaction_relation() const;
  bool has_interaction_relation() const noexcept { return interaction_.has_value(); }
  const std::string& interaction_relation_name() const noexcept { return interaction_name_; }

  // Reverse partner of r; only meaningful after add_reverse_relations.
  RelationId inverse(RelationId r) const;
  bool is_forward(RelationId r) const noexcept { return r < forward_relations_; }

  std::span<const Edge> neighbors(EntityId e) const;
  std::span<const Edge> neighbors(EntityId e, RelationId r) const;
  std::size_t max_out_degree() const noexcept;

  bool contains(const Triple& t) const;
  bool contains(EntityId h, RelationId r, EntityId t) const { return contains(Triple{h, r, t}); }

  const std::vector<EntityId>& users() const noexcept { return users_; }
  const std::vector<EntityId>& items() const noexcept { return items_; }

  // Items linked to u through the interaction relation, ascending.
  std::vector<EntityId> interactions_of(EntityId u) const;
  std::vector<Triple> interaction_triples() const;
  std::size_t num_interactions() const;

  // Forward triples only, in sorted order.
  std::vector<Triple> forward_triples() const;

 private:
  friend class Builder;
  friend KnowledgeGraph add_reverse_relations(const KnowledgeGraph& kg);

  void finalize();

  std::vector<std::string> entity_names_;
  std::vector<EntityType> entity_types_;
  std::unordered_map<std::string, EntityId> entity_index_;
  std::vector<std::string> relation_names_;
  std::unordered_map<std::string, RelationId> relation_index_;
  std::size_t forward_relations_ = 0;
  bool has_reverse_ = false;
  std::string interaction_name_ = "purchase";
  std::optional<RelationId> interaction_;

  std::vector<Triple> triples_;
  std::vector<std::size_t> offsets_;
  std::vector<Edge> edges_;
  std::vector<EntityId> users_;
  std::vector<EntityId> items_;
};

class KnowledgeGraph::Builder {
 public:
  explicit Builder(std::string interaction_relation = "purchase");

  EntityId add_entity(const std::string& name, EntityType type);
  RelationId add_relation(const std::string& name);
  // Returns false if the triple was already present.
  bool add_triple(EntityId head, RelationId relation, EntityId tail);
  bool add_triple(const std::string& head, EntityType head_type, const std::string& relation,
                  const std::string& tail, EntityType tail_type);

  std::size_t num_entities() const noexcept { return graph_.entity_names_.size(); }
  KnowledgeGraph build() &&;

 private:
  struct TripleHash {
    std::size_t operator()(const Triple& t) const noexcept;
  };

  KnowledgeGraph graph_;
  std::vector<Triple> pending_;
  std::unordered_set<Triple, TripleHash> seen_;
};

struct LoadResult {
  KnowledgeGraph graph;
  std::size_t duplicates = 0;
};

// TSV `head<TAB>relation<TAB>tail`; entity types come from the name prefix.
LoadResult load_triples(std::istream& in, const Schema& schema, const std::string& source);
LoadResult load_triples(const std::string& path, const Schema& schema);

// Writes forward triples as TSV, sorted by id.
void write_triples(std::ostream& out, const KnowledgeGraph& kg, std::span<const Triple> triples);

// Adds (t, r^-1, h) for every (h, r, t). Idempotent. Reverse id = forward id + |R_forward|.
KnowledgeGraph add_reverse_relations(const KnowledgeGraph& kg);

struct InteractionSplit {
  KnowledgeGraph train;
  std::vector<Triple> test;
  // Users whose single interaction was kept in train.
  std::vector<EntityId> single_interaction_users;
};

// Per-user stratified random split of the interaction triples. Each user keeps at
// least one training interaction. The returned train graph keeps every entity id.
InteractionSplit split_interactions(const KnowledgeGraph& kg, double test_fraction,
                                    std::uint64_t seed);

// Copy of kg with extra forward triples (or without some), same ids.
KnowledgeGraph with_forward_triples(const KnowledgeGraph& kg, std::span<const Triple> forward);

}  // namespace loger
