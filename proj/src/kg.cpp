#include "loger/kg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>

#include "loger/error.hpp"
#include "loger/kv.hpp"

namespace loger {

const char* to_string(EntityType type) noexcept {
  switch (type) {
    case EntityType::kUser: return "user";
    case EntityType::kItem: return "item";
    case EntityType::kOther: return "other";
  }
  return "other";
}

EntityType parse_entity_type(const std::string& s) {
  if (s == "user") return EntityType::kUser;
  if (s == "item") return EntityType::kItem;
  if (s == "other") return EntityType::kOther;
  fail(ErrorCode::kSchema, "unknown entity type `" + s + "`");
}

EntityType Schema::type_of(const std::string& entity_name) const {
  const auto colon = entity_name.find(':');
  if (colon == std::string::npos) {
    fail(ErrorCode::kSchema, "entity `" + entity_name + "` has no type prefix");
  }
  const auto it = prefixes.find(entity_name.substr(0, colon));
  if (it == prefixes.end()) {
    fail(ErrorCode::kSchema, "entity `" + entity_name + "` has unknown type prefix");
  }
  return it->second;
}

Schema Schema::parse(std::istream& in, const std::string& source) {
  Schema schema;
  for (const auto& [key, value] : parse_key_values(in, source)) {
    if (key == "interaction") {
      schema.interaction_relation = value;
    } else if (key.rfind("type.", 0) == 0 && key.size() > 5) {
      schema.prefixes[key.substr(5)] = parse_entity_type(value);
    } else {
      fail(ErrorCode::kSchema, source + ": unknown schema key `" + key + "`");
    }
  }
  return schema;
}

Schema Schema::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open schema " + path);
  return parse(in, path);
}

void Schema::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write schema " + path);
  out << "interaction = " << interaction_relation << "\n";
  for (const auto& [prefix, type] : prefixes) {
    out << "type." << prefix << " = " << to_string(type) << "\n";
  }
}

// ---------------------------------------------------------------------------

const std::string& KnowledgeGraph::entity_name(EntityId e) const {
  if (e >= entity_names_.size()) fail(ErrorCode::kRange, "entity id out of range");
  return entity_names_[e];
}

const std::string& KnowledgeGraph::relation_name(RelationId r) const {
  if (r >= relation_names_.size()) fail(ErrorCode::kRange, "relation id out of range");
  return relation_names_[r];
}

EntityType KnowledgeGraph::entity_type(EntityId e) const {
  if (e >= entity_types_.size()) fail(ErrorCode::kRange, "entity id out of range");
  return entity_types_[e];
}

std::optional<EntityId> KnowledgeGraph::find_entity(const std::string& name) const {
  const auto it = entity_index_.find(name);
  if (it == entity_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<RelationId> KnowledgeGraph::find_relation(const std::string& name) const {
  const auto it = relation_index_.find(name);
  if (it == relation_index_.end()) return std::nullopt;
  return it->second;
}

RelationId KnowledgeGraph::interaction_relation() const {
  if (!interaction_) {
    fail(ErrorCode::kSchema, "graph has no `" + interaction_name_ + "` interaction relation");
  }
  return *interaction_;
}

RelationId KnowledgeGraph::inverse(RelationId r) const {
  if (!has_reverse_) fail(ErrorCode::kSchema, "graph has no reverse relations");
  if (r >= relation_names_.size()) fail(ErrorCode::kRange, "relation id out of range");
  const auto f = static_cast<RelationId>(forward_relations_);
  return r < f ? r + f : r - f;
}

std::span<const Edge> KnowledgeGraph::neighbors(EntityId e) const {
  if (e >= entity_names_.size()) fail(ErrorCode::kRange, "entity id out of range");
  return {edges_.data() + offsets_[e], offsets_[e + 1] - offsets_[e]};
}

std::span<const Edge> KnowledgeGraph::neighbors(EntityId e, RelationId r) const {
  const auto all = neighbors(e);
  const auto lo = std::lower_bound(all.begin(), all.end(), Edge{r, 0});
  const auto hi = std::lower_bound(lo, all.end(), Edge{r + 1, 0});
  return {all.data() + (lo - all.begin()), static_cast<std::size_t>(hi - lo)};
}

std::size_t KnowledgeGraph::max_out_degree() const noexcept {
  std::size_t best = 0;
  for (std::size_t e = 0; e + 1 < offsets_.size(); ++e) {
    best = std::max(best, offsets_[e + 1] - offsets_[e]);
  }
  return best;
}

bool KnowledgeGraph::contains(const Triple& t) const {
  return std::binary_search(triples_.begin(), triples_.end(), t);
}

std::vector<EntityId> KnowledgeGraph::interactions_of(EntityId u) const {
  std::vector<EntityId> out;
  if (!interaction_) return out;
  for (const Edge& edge : neighbors(u, *interaction_)) out.push_back(edge.entity);
  return out;
}

std::vector<Triple> KnowledgeGraph::interaction_triples() const {
  std::vector<Triple> out;
  if (!interaction_) return out;
  for (const Triple& t : triples_) {
    if (t.relation == *interaction_) out.push_back(t);
  }
  return out;
}

std::size_t KnowledgeGraph::num_interactions() const {
  if (!interaction_) return 0;
  return static_cast<std::size_t>(std::count_if(triples_.begin(), triples_.end(), [&](const Triple& t) {
    return t.relation == *interaction_;
  }));
}

std::vector<Triple> KnowledgeGraph::forward_triples() const {
  std::vector<Triple> out;
  out.reserve(triples_.size());
  for (const Triple& t : triples_) {
    if (is_forward(t.relation)) out.push_back(t);
  }
  return out;
}

void KnowledgeGraph::finalize() {
  std::sort(triples_.begin(), triples_.end());
  const std::size_t n = entity_names_.size();
  offsets_.assign(n + 1, 0);
  for (const Triple& t : triples_) ++offsets_[t.head + 1];
  std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());
  edges_.resize(triples_.size());
  // Triples are sorted by (head, relation, tail), so each head's slice is
  // already in (relation, entity) order.
  for (std::size_t k = 0; k < triples_.size(); ++k) {
    edges_[k] = Edge{triples_[k].relation, triples_[k].tail};
  }
  users_.clear();
  items_.clear();
  for (EntityId e = 0; e < n; ++e) {
    if (entity_types_[e] == EntityType::kUser) users_.push_back(e);
    if (entity_types_[e] == EntityType::kItem) items_.push_back(e);
  }
}

// ---------------------------------------------------------------------------

std::size_t KnowledgeGraph::Builder::TripleHash::operator()(const Triple& t) const noexcept {
  std::uint64_t h = (static_cast<std::uint64_t>(t.head) << 32) ^ t.tail;
  h ^= static_cast<std::uint64_t>(t.relation) * 0x9E3779B97F4A7C15ULL;
  return std::hash<std::uint64_t>{}(h);
}

KnowledgeGraph::Builder::Builder(std::string interaction_relation) {
  graph_.interaction_name_ = std::move(interaction_relation);
}

EntityId KnowledgeGraph::Builder::add_entity(const std::string& name, EntityType type) {
  const auto it = graph_.entity_index_.find(name);
  if (it != graph_.entity_index_.end()) {
    if (graph_.entity_types_[it->second] != type) {
      fail(ErrorCode::kSchema, "entity `" + name + "` registered with two types");
    }
    return it->second;
  }
  const auto id = static_cast<EntityId>(graph_.entity_names_.size());
  graph_.entity_names_.push_back(name);
  graph_.entity_types_.push_back(type);
  graph_.entity_index_.emplace(name, id);
  return id;
}

RelationId KnowledgeGraph::Builder::add_relation(const std::string& name) {
  const auto it = graph_.relation_index_.find(name);
  if (it != graph_.relation_index_.end()) return it->second;
  const auto id = static_cast<RelationId>(graph_.relation_names_.size());
  graph_.relation_names_.push_back(name);
  graph_.relation_index_.emplace(name, id);
  if (name == graph_.interaction_name_) graph_.interaction_ = id;
  return id;
}

bool KnowledgeGraph::Builder::add_triple(EntityId head, RelationId relation, EntityId tail) {
  if (head >= graph_.entity_names_.size() || tail >= graph_.entity_names_.size() ||
      relation >= graph_.relation_names_.size()) {
    fail(ErrorCode::kRange, "triple references an unknown id");
  }
  if (graph_.interaction_ && relation == *graph_.interaction_) {
    if (head == tail) fail(ErrorCode::kSchema, "self-loop on the interaction relation");
    if (graph_.entity_types_[head] != EntityType::kUser ||
        graph_.entity_types_[tail] != EntityType::kItem) {
      fail(ErrorCode::kSchema, "interaction `" + graph_.entity_names_[head] + " -> " +
                                   graph_.entity_names_[tail] + "` must link a user to an item");
    }
  }
  const Triple t{head, relation, tail};
  if (!seen_.insert(t).second) return false;
  pending_.push_back(t);
  return true;
}

bool KnowledgeGraph::Builder::add_triple(const std::string& head, EntityType head_type,
                                         const std::string& relation, const std::string& tail,
                                         EntityType tail_type) {
  const EntityId h = add_entity(head, head_type);
  const EntityId t = add_entity(tail, tail_type);
  const RelationId r = add_relation(relation);
  return add_triple(h, r, t);
}

KnowledgeGraph KnowledgeGraph::Builder::build() && {
  graph_.forward_relations_ = graph_.relation_names_.size();
  graph_.triples_ = std::move(pending_);
  graph_.finalize();
  seen_.clear();
  return std::move(graph_);
}

// ---------------------------------------------------------------------------

LoadResult load_triples(std::istream& in, const Schema& schema, const std::string& source) {
  KnowledgeGraph::Builder builder(schema.interaction_relation);
  LoadResult result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab1 = line.find('\t');
    const auto tab2 = tab1 == std::string::npos ? tab1 : line.find('\t', tab1 + 1);
    if (tab2 == std::string::npos || line.find('\t', tab2 + 1) != std::string::npos) {
      fail(ErrorCode::kParse,
           source + ":" + std::to_string(line_no) + ": expected head<TAB>relation<TAB>tail");
    }
    const std::string head = line.substr(0, tab1);
    const std::string rel = line.substr(tab1 + 1, tab2 - tab1 - 1);
    const std::string tail = line.substr(tab2 + 1);
    if (head.empty() || rel.empty() || tail.empty()) {
      fail(ErrorCode::kParse, source + ":" + std::to_string(line_no) + ": empty field");
    }
    try {
      if (!builder.add_triple(head, schema.type_of(head), rel, tail, schema.type_of(tail))) {
        ++result.duplicates;
      }
    } catch (const Error& e) {
      fail(e.code(), source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  result.graph = std::move(builder).build();
  return result;
}

LoadResult load_triples(const std::string& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open triples " + path);
  return load_triples(in, schema, path);
}

void write_triples(std::ostream& out, const KnowledgeGraph& kg, std::span<const Triple> triples) {
  for (const Triple& t : triples) {
    out << kg.entity_name(t.head) << '\t' << kg.relation_name(t.relation) << '\t'
        << kg.entity_name(t.tail) << '\n';
  }
}

KnowledgeGraph add_reverse_relations(const KnowledgeGraph& kg) {
  if (kg.has_reverse_) return kg;
  KnowledgeGraph out = kg;
  const auto f = static_cast<RelationId>(kg.forward_relations_);
  for (RelationId r = 0; r < f; ++r) {
    const std::string name = kg.relation_names_[r] + "^-1";
    out.relation_index_.emplace(name, static_cast<RelationId>(out.relation_names_.size()));
    out.relation_names_.push_back(name);
  }
  out.triples_.reserve(kg.triples_.size() * 2);
  for (const Triple& t : kg.triples_) out.triples_.push_back(Triple{t.tail, t.relation + f, t.head});
  out.has_reverse_ = true;
  out.finalize();
  return out;
}

KnowledgeGraph with_forward_triples(const KnowledgeGraph& kg, std::span<const Triple> forward) {
  KnowledgeGraph::Builder builder(kg.interaction_relation_name());
  for (EntityId e = 0; e < kg.num_entities(); ++e) builder.add_entity(kg.entity_name(e), kg.entity_type(e));
  for (RelationId r = 0; r < kg.num_forward_relations(); ++r) builder.add_relation(kg.relation_name(r));
  for (const Triple& t : forward) {
    if (!kg.is_forward(t.relation)) fail(ErrorCode::kRange, "expected a forward relation");
    builder.add_triple(t.head, t.relation, t.tail);
  }
  KnowledgeGraph out = std::move(builder).build();
  return kg.has_reverse() ? add_reverse_relations(out) : out;
}

InteractionSplit split_interactions(const KnowledgeGraph& kg, double test_fraction,
                                    std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    fail(ErrorCode::kConfig, "test fraction must lie in (0, 1)");
  }
  InteractionSplit split;
  std::mt19937_64 rng(seed);
  std::vector<Triple> train = kg.forward_triples();
  std::vector<Triple> held;
  if (kg.has_interaction_relation()) {
    const RelationId rui = kg.interaction_relation();
    for (const EntityId u : kg.users()) {
      std::vector<EntityId> items = kg.interactions_of(u);
      if (items.empty()) continue;
      if (items.size() == 1) {
        split.single_interaction_users.push_back(u);
        continue;
      }
      std::shuffle(items.begin(), items.end(), rng);
      auto n_test = static_cast<std::size_t>(std::floor(test_fraction * items.size() + 0.5));
      n_test = std::min(n_test, items.size() - 1);
      for (std::size_t k = 0; k < n_test; ++k) held.push_back(Triple{u, rui, items[k]});
    }
  }
  std::sort(held.begin(), held.end());
  std::erase_if(train, [&](const Triple& t) { return std::binary_search(held.begin(), held.end(), t); });
  split.train = with_forward_triples(kg, train);
  split.test = std::move(held);
  return split;
}

}  // namespace loger
