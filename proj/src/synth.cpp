#include "loger/synth.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "loger/error.hpp"

namespace loger {

namespace {

struct PairLess {
  bool operator()(const std::pair<EntityId, EntityId>& a, const std::pair<EntityId, EntityId>& b) const {
    return a < b;
  }
};

std::vector<std::size_t> pick_distinct(std::size_t pool, std::size_t count, Rng& rng) {
  count = std::min(count, pool);
  std::vector<std::size_t> all(pool);
  for (std::size_t k = 0; k < pool; ++k) all[k] = k;
  // Partial Fisher-Yates.
  for (std::size_t k = 0; k < count; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, pool - 1);
    std::swap(all[k], all[pick(rng)]);
  }
  all.resize(count);
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace

SynthDataset generate(const SynthSpec& spec) {
  if (spec.users < 1 || spec.items < 1) fail(ErrorCode::kGeneration, "need at least one user and item");
  if (!(spec.noise_rate >= 0.0 && spec.noise_rate < 1.0)) {
    fail(ErrorCode::kGeneration, "noise rate must lie in [0, 1)");
  }
  Rng rng(spec.seed);
  SynthDataset out;
  out.schema.interaction_relation = "purchase";
  out.schema.prefixes = {{"user", EntityType::kUser}, {"item", EntityType::kItem}};

  KnowledgeGraph::Builder builder("purchase");
  std::vector<EntityId> users(spec.users), items(spec.items);
  for (std::size_t k = 0; k < spec.users; ++k) users[k] = builder.add_entity(fmt::format("user:{}", k), EntityType::kUser);
  for (std::size_t k = 0; k < spec.items; ++k) items[k] = builder.add_entity(fmt::format("item:{}", k), EntityType::kItem);
  const RelationId purchase = builder.add_relation("purchase");

  std::set<std::pair<EntityId, EntityId>, PairLess> interactions;

  for (std::size_t j = 0; j < spec.planted.size(); ++j) {
    const PlantedRuleSpec& rule = spec.planted[j];
    if (rule.length < 1 || rule.length > 3) fail(ErrorCode::kGeneration, "planted rules need length 1 to 3");
    if (!(rule.precision > 0.0 && rule.precision <= 1.0)) {
      fail(ErrorCode::kGeneration, "planted precision must lie in (0, 1]");
    }
    std::vector<RelationId> rels;
    std::vector<std::string> body;
    for (std::size_t i = 0; i < rule.length; ++i) {
      const std::string name = fmt::format("rule{}_rel{}", j, i + 1);
      rels.push_back(builder.add_relation(name));
      body.push_back(i + 1 == rule.length && rule.length > 1 ? name + "^-1" : name);
    }
    out.planted.push_back(body);

    // reach[u] = set of pool entities (or items for length 1) at the current hop.
    std::vector<std::set<EntityId>> reach(spec.users);
    std::set<std::pair<EntityId, EntityId>, PairLess> grounded;
    if (rule.length == 1) {
      if (rule.user_fanout < 1) fail(ErrorCode::kGeneration, "fanouts must be at least 1");
      for (std::size_t u = 0; u < spec.users; ++u) {
        for (const std::size_t v : pick_distinct(spec.items, rule.user_fanout, rng)) {
          builder.add_triple(users[u], rels[0], items[v]);
          grounded.insert({users[u], items[v]});
        }
      }
    } else {
      if (rule.pool_size < 1 || rule.user_fanout < 1 || rule.item_fanout < 1 || rule.mid_fanout < 1) {
        fail(ErrorCode::kGeneration, "pool sizes and fanouts must be at least 1");
      }
      std::vector<std::vector<EntityId>> pools(rule.length - 1);
      for (std::size_t i = 0; i + 1 < rule.length; ++i) {
        const std::string prefix = fmt::format("rule{}_{}", j, i + 1);
        out.schema.prefixes[prefix] = EntityType::kOther;
        for (std::size_t k = 0; k < rule.pool_size; ++k) {
          pools[i].push_back(builder.add_entity(fmt::format("{}:{}", prefix, k), EntityType::kOther));
        }
      }
      for (std::size_t u = 0; u < spec.users; ++u) {
        for (const std::size_t k : pick_distinct(rule.pool_size, rule.user_fanout, rng)) {
          builder.add_triple(users[u], rels[0], pools[0][k]);
          reach[u].insert(pools[0][k]);
        }
      }
      for (std::size_t i = 1; i + 1 < rule.length; ++i) {
        std::vector<std::vector<EntityId>> next(rule.pool_size);
        for (std::size_t a = 0; a < rule.pool_size; ++a) {
          for (const std::size_t b : pick_distinct(rule.pool_size, rule.mid_fanout, rng)) {
            builder.add_triple(pools[i - 1][a], rels[i], pools[i][b]);
            next[a].push_back(pools[i][b]);
          }
        }
        for (auto& r : reach) {
          std::set<EntityId> hop;
          for (const EntityId e : r) {
            const auto offset = static_cast<std::size_t>(e - pools[i - 1].front());
            hop.insert(next[offset].begin(), next[offset].end());
          }
          r = std::move(hop);
        }
      }
      std::vector<std::vector<EntityId>> holders(rule.pool_size);  // last pool -> items
      const auto& last = pools.back();
      for (std::size_t v = 0; v < spec.items; ++v) {
        for (const std::size_t k : pick_distinct(rule.pool_size, rule.item_fanout, rng)) {
          builder.add_triple(items[v], rels.back(), last[k]);
          holders[k].push_back(items[v]);
        }
      }
      for (std::size_t u = 0; u < spec.users; ++u) {
        for (const EntityId e : reach[u]) {
          for (const EntityId v : holders[static_cast<std::size_t>(e - last.front())]) grounded.insert({users[u], v});
        }
      }
    }

    std::vector<std::pair<EntityId, EntityId>> pairs(grounded.begin(), grounded.end());
    const auto stamp = static_cast<std::size_t>(std::llround(rule.precision * static_cast<double>(pairs.size())));
    if (stamp == 0) {
      fail(ErrorCode::kGeneration, fmt::format("planted rule {} grounds too few pairs for its precision", j));
    }
    std::shuffle(pairs.begin(), pairs.end(), rng);
    interactions.insert(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(stamp));
  }

  for (std::size_t k = 0; k < spec.decoy_relations; ++k) {
    if (spec.decoy_pool < 1) fail(ErrorCode::kGeneration, "decoy pool must be non-empty");
    const RelationId rel = builder.add_relation(fmt::format("decoy{}", k));
    const std::string prefix = fmt::format("tag{}", k);
    out.schema.prefixes[prefix] = EntityType::kOther;
    std::vector<EntityId> tags;
    for (std::size_t t = 0; t < spec.decoy_pool; ++t) {
      tags.push_back(builder.add_entity(fmt::format("{}:{}", prefix, t), EntityType::kOther));
    }
    std::uniform_int_distribution<std::size_t> pick(0, spec.decoy_pool - 1);
    for (const EntityId u : users) builder.add_triple(u, rel, tags[pick(rng)]);
    for (const EntityId v : items) builder.add_triple(v, rel, tags[pick(rng)]);
  }

  std::bernoulli_distribution noise(spec.noise_rate);
  for (const EntityId u : users) {
    for (const EntityId v : items) {
      if (noise(rng)) interactions.insert({u, v});
    }
  }
  for (const auto& [u, v] : interactions) builder.add_triple(u, purchase, v);

  out.graph = std::move(builder).build();
  if (spec.holdout_fraction > 0.0) {
    InteractionSplit split = split_interactions(out.graph, spec.holdout_fraction, spec.seed);
    out.train = std::move(split.train);
    out.held_out = std::move(split.test);
  } else {
    out.train = out.graph;
  }
  return out;
}

std::vector<RelationId> resolve_body(const KnowledgeGraph& kg, std::span<const std::string> names) {
  std::vector<RelationId> body;
  for (const std::string& name : names) {
    const auto r = kg.find_relation(name);
    if (!r) fail(ErrorCode::kSchema, "unknown relation " + name);
    body.push_back(*r);
  }
  return body;
}

double measured_precision(const KnowledgeGraph& kg, std::span<const RelationId> body) {
  const RuleSet rules({Rule{std::vector<RelationId>(body.begin(), body.end()), 0}});
  const GroundingCounter counter(kg, rules);
  const RelationId rui = kg.interaction_relation();
  std::size_t grounded = 0, hit = 0;
  for (const EntityId u : kg.users()) {
    const auto counts = counter.walk_counts(u);
    for (const auto& [e, c] : counts[0]) {
      if (kg.entity_type(e) != EntityType::kItem) continue;
      ++grounded;
      if (kg.contains(u, rui, e)) ++hit;
    }
  }
  return grounded ? static_cast<double>(hit) / static_cast<double>(grounded) : 0.0;
}

std::vector<Path> exhaustive_paths(const KnowledgeGraph& kg, EntityId u,
                                   std::optional<EntityId> v, std::size_t max_len,
                                   std::size_t max_expansions) {
  std::vector<Path> out;
  if (max_len == 0) return out;
  std::size_t expansions = 0;
  Path path;
  path.entities.push_back(u);
  std::function<void()> dfs = [&] {
    for (const Edge& edge : kg.neighbors(path.entities.back())) {
      if (++expansions > max_expansions) {
        fail(ErrorCode::kOracleScale, "exhaustive path enumeration exceeded its expansion guard");
      }
      path.entities.push_back(edge.entity);
      path.relations.push_back(edge.relation);
      if (!v || edge.entity == *v) out.push_back(path);
      if (path.relations.size() < max_len) dfs();
      path.entities.pop_back();
      path.relations.pop_back();
    }
  };
  dfs();
  return out;
}

bool uses_own_interaction_edge(const KnowledgeGraph& kg, const Path& path) {
  if (!kg.has_interaction_relation()) return false;
  const EntityId u = path.source();
  const EntityId v = path.target();
  const RelationId rui = kg.interaction_relation();
  for (std::size_t k = 0; k < path.relations.size(); ++k) {
    const EntityId a = path.entities[k];
    const EntityId b = path.entities[k + 1];
    if (path.relations[k] == rui && a == u && b == v) return true;
    if (kg.has_reverse() && path.relations[k] == kg.inverse(rui) && a == v && b == u) return true;
  }
  return false;
}

namespace {

bool is_grounding(const KnowledgeGraph& kg, const Path& p, std::span<const RelationId> body,
                  bool observed_target) {
  if (!std::equal(p.relations.begin(), p.relations.end(), body.begin(), body.end())) return false;
  return !(observed_target && uses_own_interaction_edge(kg, p));
}

}  // namespace

std::uint64_t oracle_count_groundings(const KnowledgeGraph& kg, std::span<const RelationId> body,
                                      std::span<const Triple> hidden) {
  std::uint64_t total = 0;
  const RelationId rui = kg.interaction_relation();
  for (const EntityId u : kg.users()) {
    for (const Path& p : exhaustive_paths(kg, u, std::nullopt, body.size())) {
      if (kg.entity_type(p.target()) != EntityType::kItem) continue;
      if (kg.contains(u, rui, p.target()) && is_grounding(kg, p, body, true)) ++total;
    }
  }
  for (const Triple& t : hidden) {
    for (const Path& p : exhaustive_paths(kg, t.head, t.tail, body.size())) {
      if (is_grounding(kg, p, body, false)) ++total;
    }
  }
  return total;
}

std::vector<RuleId> oracle_rules_for_pair(const KnowledgeGraph& kg, const RuleSet& rules,
                                          EntityId u, EntityId v) {
  const bool observed = kg.contains(u, kg.interaction_relation(), v);
  std::set<RuleId> found;
  for (const Path& p : exhaustive_paths(kg, u, v, 3)) {
    if (observed && uses_own_interaction_edge(kg, p)) continue;
    if (const auto id = rules.find(p.relations)) found.insert(*id);
  }
  return {found.begin(), found.end()};
}

double pl_oracle(const KnowledgeGraph& kg, const RuleSet& rules,
                 std::span<const HiddenTriple> hidden, std::span<const double> w) {
  const auto log_sigmoid_of_mean = [&](const std::vector<RuleId>& ids, bool positive) {
    double mean = 0.0;
    for (const RuleId l : ids) mean += w[l];
    mean /= static_cast<double>(ids.size());
    const double p = 1.0 / (1.0 + std::exp(-mean));
    return positive ? std::log(p) : std::log(1.0 - p);
  };
  double total = 0.0;
  for (const Triple& t : kg.interaction_triples()) {
    const auto ids = oracle_rules_for_pair(kg, rules, t.head, t.tail);
    if (!ids.empty()) total += log_sigmoid_of_mean(ids, true);
  }
  for (const HiddenTriple& h : hidden) {
    const auto ids = oracle_rules_for_pair(kg, rules, h.user, h.item);
    if (ids.empty()) continue;
    total += h.encoder_score * log_sigmoid_of_mean(ids, true) +
             (1.0 - h.encoder_score) * log_sigmoid_of_mean(ids, false);
  }
  return total;
}

}  // namespace loger
