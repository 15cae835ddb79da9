#include "loger/rules.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>

#include "loger/error.hpp"

namespace loger {

namespace {

using SparseCounts = std::vector<std::pair<EntityId, std::uint64_t>>;

bool body_less(const std::vector<RelationId>& a, const std::vector<RelationId>& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

// The two directed interaction edges between u and v.
struct ExcludedEdges {
  EntityId user = 0;
  EntityId item = 0;
  RelationId forward = 0;
  std::optional<RelationId> backward;
  bool active = false;

  bool blocks(EntityId from, RelationId r, EntityId to) const noexcept {
    if (!active) return false;
    if (r == forward && from == user && to == item) return true;
    return backward && r == *backward && from == item && to == user;
  }
};

ExcludedEdges make_exclusion(const KnowledgeGraph& kg, EntityId u, std::optional<EntityId> v) {
  ExcludedEdges ex;
  if (!v || !kg.has_interaction_relation()) return ex;
  ex.active = true;
  ex.user = u;
  ex.item = *v;
  ex.forward = kg.interaction_relation();
  if (kg.has_reverse()) ex.backward = kg.inverse(ex.forward);
  return ex;
}

SparseCounts propagate(const KnowledgeGraph& kg, const SparseCounts& frontier, RelationId r,
                       const ExcludedEdges& ex) {
  SparseCounts next;
  for (const auto& [x, c] : frontier) {
    for (const Edge& edge : kg.neighbors(x, r)) {
      if (ex.blocks(x, r, edge.entity)) continue;
      next.emplace_back(edge.entity, c);
    }
  }
  std::sort(next.begin(), next.end());
  SparseCounts merged;
  for (const auto& [e, c] : next) {
    if (!merged.empty() && merged.back().first == e) {
      merged.back().second += c;
    } else {
      merged.emplace_back(e, c);
    }
  }
  return merged;
}

std::uint64_t lookup(const SparseCounts& counts, EntityId e) {
  const auto it = std::lower_bound(counts.begin(), counts.end(), std::pair<EntityId, std::uint64_t>{e, 0});
  return it != counts.end() && it->first == e ? it->second : 0;
}

}  // namespace

// ---------------------------------------------------------------------------

RuleSet::RuleSet(std::vector<Rule> rules) : rules_(std::move(rules)) {
  std::sort(rules_.begin(), rules_.end(),
            [](const Rule& a, const Rule& b) { return body_less(a.body, b.body); });
  for (std::size_t k = 0; k < rules_.size(); ++k) {
    const Rule& rule = rules_[k];
    if (rule.body.empty() || rule.body.size() > 3) {
      fail(ErrorCode::kConfig, "rule bodies must have length 1 to 3");
    }
    if (!index_.emplace(rule.body, static_cast<RuleId>(k)).second) {
      fail(ErrorCode::kConfig, "duplicate rule body");
    }
  }
}

std::optional<RuleId> RuleSet::find(std::span<const RelationId> body) const {
  const auto it = index_.find(std::vector<RelationId>(body.begin(), body.end()));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t RuleSet::max_length() const noexcept {
  return rules_.empty() ? 0 : rules_.back().body.size();
}

RuleSet RuleSet::subset(std::span<const RuleId> ids) const {
  std::vector<Rule> picked;
  for (const RuleId id : ids) picked.push_back(rules_.at(id));
  return RuleSet(std::move(picked));
}

void RuleSet::write(std::ostream& out, const KnowledgeGraph& kg) const {
  for (std::size_t k = 0; k < rules_.size(); ++k) {
    out << k << '\t';
    for (std::size_t i = 0; i < rules_[k].body.size(); ++i) {
      out << (i ? "," : "") << kg.relation_name(rules_[k].body[i]);
    }
    out << '\t' << rules_[k].support << '\n';
  }
}

RuleSet RuleSet::read(std::istream& in, const KnowledgeGraph& kg, const std::string& source) {
  std::vector<Rule> rules;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string id, body, support;
    if (!std::getline(fields, id, '\t') || !std::getline(fields, body, '\t') ||
        !std::getline(fields, support)) {
      fail(ErrorCode::kParse, source + ":" + std::to_string(line_no) + ": expected id, body, support");
    }
    Rule rule;
    std::istringstream names(body);
    std::string name;
    while (std::getline(names, name, ',')) {
      const auto r = kg.find_relation(name);
      if (!r) fail(ErrorCode::kParse, source + ":" + std::to_string(line_no) + ": unknown relation " + name);
      rule.body.push_back(*r);
    }
    try {
      rule.support = std::stoull(support);
      if (std::stoull(id) != rules.size()) throw std::invalid_argument("id");
    } catch (const std::exception&) {
      fail(ErrorCode::kParse, source + ":" + std::to_string(line_no) + ": bad id or support");
    }
    rules.push_back(std::move(rule));
  }
  return RuleSet(std::move(rules));
}

std::string rule_to_string(const KnowledgeGraph& kg, const Rule& rule) {
  std::string out;
  for (std::size_t i = 0; i < rule.body.size(); ++i) {
    if (i) out += " o ";
    out += kg.relation_name(rule.body[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------

RuleSet mine_rules(const KnowledgeGraph& kg, std::size_t max_len, std::uint64_t min_support) {
  if (min_support < 1) fail(ErrorCode::kConfig, "min_support must be at least 1");
  if (max_len < 1 || max_len > 3) fail(ErrorCode::kConfig, "rule length must lie in [1, 3]");
  std::map<std::vector<RelationId>, std::uint64_t> support;
  if (!kg.has_interaction_relation()) return {};
  const RelationId rui = kg.interaction_relation();
  const std::optional<RelationId> rui_inv =
      kg.has_reverse() ? std::optional<RelationId>(kg.inverse(rui)) : std::nullopt;

  std::vector<RelationId> seq;
  std::vector<EntityId> used;  // items whose interaction edge with u the walk traversed
  for (const EntityId u : kg.users()) {
    const std::vector<EntityId> owned = kg.interactions_of(u);
    if (owned.empty()) continue;
    std::function<void(EntityId)> dfs = [&](EntityId x) {
      if (!seq.empty() && kg.entity_type(x) == EntityType::kItem &&
          std::binary_search(owned.begin(), owned.end(), x) &&
          std::find(used.begin(), used.end(), x) == used.end()) {
        ++support[seq];
      }
      if (seq.size() == max_len) return;
      for (const Edge& edge : kg.neighbors(x)) {
        std::size_t pushed = 0;
        if (x == u && edge.relation == rui) {
          used.push_back(edge.entity);
          ++pushed;
        }
        if (rui_inv && edge.entity == u && edge.relation == *rui_inv) {
          used.push_back(x);
          ++pushed;
        }
        seq.push_back(edge.relation);
        dfs(edge.entity);
        seq.pop_back();
        used.resize(used.size() - pushed);
      }
    };
    dfs(u);
  }

  std::vector<Rule> rules;
  for (const auto& [body, count] : support) {
    if (count < min_support) continue;
    if (body.size() == 1 && body[0] == rui) continue;
    rules.push_back(Rule{body, count});
  }
  return RuleSet(std::move(rules));
}

// ---------------------------------------------------------------------------

GroundingCounter::GroundingCounter(const KnowledgeGraph& kg, const RuleSet& rules)
    : kg_(kg), rules_(rules) {
  trie_.emplace_back();
  for (std::size_t k = 0; k < rules.size(); ++k) {
    std::size_t node = 0;
    for (const RelationId r : rules[static_cast<RuleId>(k)].body) {
      if (r >= kg.num_relations()) fail(ErrorCode::kRange, "rule uses an unknown relation");
      std::size_t next = 0;
      for (const std::size_t child : trie_[node].children) {
        if (trie_[child].relation == r) next = child;
      }
      if (next == 0) {
        next = trie_.size();
        trie_.push_back(Node{r, std::nullopt, {}});
        trie_[node].children.push_back(next);
      }
      node = next;
    }
    trie_[node].rule = static_cast<RuleId>(k);
  }
}

std::vector<std::vector<std::pair<EntityId, std::uint64_t>>> GroundingCounter::walk_counts(
    EntityId u, std::optional<EntityId> excluded_item) const {
  std::vector<SparseCounts> out(rules_.size());
  const ExcludedEdges ex = make_exclusion(kg_, u, excluded_item);
  std::function<void(std::size_t, const SparseCounts&)> descend = [&](std::size_t node,
                                                                      const SparseCounts& frontier) {
    for (const std::size_t child : trie_[node].children) {
      SparseCounts next = propagate(kg_, frontier, trie_[child].relation, ex);
      if (next.empty()) continue;
      if (trie_[child].rule) out[*trie_[child].rule] = next;
      descend(child, next);
    }
  };
  descend(0, SparseCounts{{u, 1}});
  return out;
}

std::vector<PairEvidence> GroundingCounter::user_evidence(EntityId u) const {
  std::map<EntityId, std::vector<RuleCount>> by_item;
  const auto full = walk_counts(u);
  for (std::size_t l = 0; l < full.size(); ++l) {
    for (const auto& [e, c] : full[l]) {
      if (kg_.entity_type(e) == EntityType::kItem) by_item[e].push_back({static_cast<RuleId>(l), c});
    }
  }
  for (const EntityId v : kg_.interactions_of(u)) {
    auto& slot = by_item[v];
    slot.clear();
    const auto excl = walk_counts(u, v);
    for (std::size_t l = 0; l < excl.size(); ++l) {
      if (const auto c = lookup(excl[l], v)) slot.push_back({static_cast<RuleId>(l), c});
    }
  }
  std::vector<PairEvidence> out;
  for (auto& [item, rules] : by_item) {
    if (!rules.empty()) out.push_back(PairEvidence{item, std::move(rules)});
  }
  return out;
}

PairEvidence GroundingCounter::pair_evidence(EntityId u, EntityId v) const {
  const bool observed =
      kg_.has_interaction_relation() && kg_.contains(u, kg_.interaction_relation(), v);
  const auto counts = walk_counts(u, observed ? std::optional<EntityId>(v) : std::nullopt);
  PairEvidence ev{v, {}};
  for (std::size_t l = 0; l < counts.size(); ++l) {
    if (const auto c = lookup(counts[l], v)) ev.rules.push_back({static_cast<RuleId>(l), c});
  }
  return ev;
}

std::uint64_t count_groundings(const KnowledgeGraph& kg, const Rule& rule,
                               std::optional<std::span<const Triple>> hidden) {
  const RuleSet single({rule});
  const GroundingCounter counter(kg, single);
  std::uint64_t total = 0;
  for (const EntityId u : kg.users()) total += count_user_groundings(kg, rule, u);
  if (hidden) {
    for (const Triple& t : *hidden) {
      const auto ev = counter.pair_evidence(t.head, t.tail);
      for (const RuleCount& rc : ev.rules) total += rc.count;
    }
  }
  return total;
}

std::uint64_t count_user_groundings(const KnowledgeGraph& kg, const Rule& rule, EntityId u) {
  const RuleSet single({rule});
  const GroundingCounter counter(kg, single);
  std::uint64_t total = 0;
  for (const EntityId v : kg.interactions_of(u)) {
    const auto counts = counter.walk_counts(u, v);
    total += lookup(counts[0], v);
  }
  return total;
}

void for_each_body_walk(const KnowledgeGraph& kg, EntityId u, std::span<const RelationId> body,
                        std::optional<EntityId> excluded_item,
                        const std::function<bool(const Path&)>& visit) {
  const ExcludedEdges ex = make_exclusion(kg, u, excluded_item);
  Path path;
  path.entities.push_back(u);
  bool keep_going = true;
  std::function<void()> dfs = [&] {
    if (!keep_going) return;
    if (path.relations.size() == body.size()) {
      keep_going = visit(path);
      return;
    }
    const EntityId x = path.entities.back();
    const RelationId r = body[path.relations.size()];
    for (const Edge& edge : kg.neighbors(x, r)) {
      if (ex.blocks(x, r, edge.entity)) continue;
      path.entities.push_back(edge.entity);
      path.relations.push_back(r);
      dfs();
      path.entities.pop_back();
      path.relations.pop_back();
      if (!keep_going) return;
    }
  };
  dfs();
}

TripletRules rules_for_triplet(const KnowledgeGraph& kg, const RuleSet& rules, EntityId u,
                               EntityId v) {
  TripletRules out;
  const bool observed =
      kg.has_interaction_relation() && kg.contains(u, kg.interaction_relation(), v);
  const GroundingCounter counter(kg, rules);
  for (const RuleCount& rc : counter.pair_evidence(u, v).rules) {
    out.rules.push_back(rc.rule);
    Path witness;
    for_each_body_walk(kg, u, rules[rc.rule].body,
                       observed ? std::optional<EntityId>(v) : std::nullopt, [&](const Path& p) {
                         if (p.target() != v) return true;
                         witness = p;
                         return false;
                       });
    witness.rule = rc.rule;
    out.witnesses.push_back(std::move(witness));
  }
  return out;
}

// ---------------------------------------------------------------------------

EvidenceIndex::EvidenceIndex(const KnowledgeGraph& kg, const RuleSet& rules)
    : num_rules_(rules.size()), users_(kg.num_entities()) {
  const GroundingCounter counter(kg, rules);
  for (const EntityId u : kg.users()) {
    const std::vector<EntityId> owned = kg.interactions_of(u);
    UserEntry& entry = users_[u];
    for (const EntityId v : owned) entry.observed.push_back(PairEvidence{v, {}});
    for (PairEvidence& ev : counter.user_evidence(u)) {
      const auto it = std::lower_bound(owned.begin(), owned.end(), ev.item);
      if (it != owned.end() && *it == ev.item) {
        entry.observed[static_cast<std::size_t>(it - owned.begin())] = std::move(ev);
      } else {
        entry.unobserved.push_back(std::move(ev));
      }
    }
  }
}

std::span<const PairEvidence> EvidenceIndex::observed(EntityId u) const {
  if (u >= users_.size()) fail(ErrorCode::kRange, "entity id out of range");
  return users_[u].observed;
}

std::span<const PairEvidence> EvidenceIndex::unobserved(EntityId u) const {
  if (u >= users_.size()) fail(ErrorCode::kRange, "entity id out of range");
  return users_[u].unobserved;
}

std::span<const RuleCount> EvidenceIndex::rules_for(EntityId u, EntityId v) const {
  const auto by_item = [](const PairEvidence& ev, EntityId item) { return ev.item < item; };
  for (const auto list : {observed(u), unobserved(u)}) {
    const auto it = std::lower_bound(list.begin(), list.end(), v, by_item);
    if (it != list.end() && it->item == v) return it->rules;
  }
  return {};
}

std::vector<std::uint64_t> EvidenceIndex::user_counts(EntityId u) const {
  std::vector<std::uint64_t> counts(num_rules_, 0);
  for (const PairEvidence& ev : observed(u)) {
    for (const RuleCount& rc : ev.rules) counts[rc.rule] += rc.count;
  }
  return counts;
}

// ---------------------------------------------------------------------------

GroundingSampler::GroundingSampler(const KnowledgeGraph& kg, const RuleSet& rules,
                                   const EvidenceIndex& evidence, EntityId u)
    : kg_(kg), rules_(rules), user_(u), observed_(evidence.observed(u)),
      totals_(evidence.user_counts(u)) {
  for (const auto c : totals_) grand_total_ += c;
}

Path GroundingSampler::sample(RuleId rule, Rng& rng) const {
  if (rule >= totals_.size() || totals_[rule] == 0) {
    fail(ErrorCode::kEmpty, "rule has no grounding for this user");
  }
  std::uniform_int_distribution<std::uint64_t> pick(0, totals_[rule] - 1);
  std::uint64_t ticket = pick(rng);
  EntityId target = 0;
  for (const PairEvidence& ev : observed_) {
    const auto it = std::find_if(ev.rules.begin(), ev.rules.end(),
                                 [&](const RuleCount& rc) { return rc.rule == rule; });
    if (it == ev.rules.end()) continue;
    if (ticket < it->count) {
      target = ev.item;
      break;
    }
    ticket -= it->count;
  }

  // Forward layers from u, then walk back choosing predecessors by their counts.
  const auto& body = rules_[rule].body;
  const ExcludedEdges ex = make_exclusion(kg_, user_, target);
  auto [slot, fresh] = layers_.try_emplace({rule, target});
  std::vector<SparseCounts>& layers = slot->second;
  if (fresh) {
    layers.push_back(SparseCounts{{user_, 1}});
    for (const RelationId r : body) layers.push_back(propagate(kg_, layers.back(), r, ex));
  }

  Path path;
  path.entities.assign(body.size() + 1, user_);
  path.relations = body;
  path.entities.back() = target;
  EntityId y = target;
  for (std::size_t hop = body.size(); hop-- > 1;) {
    const RelationId r = body[hop];
    SparseCounts preds;
    std::uint64_t mass = 0;
    for (const auto& [x, c] : layers[hop]) {
      if (!kg_.contains(x, r, y) || ex.blocks(x, r, y)) continue;
      preds.emplace_back(x, c);
      mass += c;
    }
    if (mass == 0) fail(ErrorCode::kInternal, "grounding sampler lost its path");
    std::uniform_int_distribution<std::uint64_t> choose(0, mass - 1);
    std::uint64_t t = choose(rng);
    for (const auto& [x, c] : preds) {
      if (t < c) {
        y = x;
        break;
      }
      t -= c;
    }
    path.entities[hop] = y;
  }
  path.rule = rule;
  return path;
}

Path GroundingSampler::sample_any(Rng& rng) const {
  if (grand_total_ == 0) fail(ErrorCode::kEmpty, "user has no rule groundings");
  std::uniform_int_distribution<std::uint64_t> pick(0, grand_total_ - 1);
  std::uint64_t ticket = pick(rng);
  for (std::size_t l = 0; l < totals_.size(); ++l) {
    if (ticket < totals_[l]) return sample(static_cast<RuleId>(l), rng);
    ticket -= totals_[l];
  }
  fail(ErrorCode::kInternal, "grounding ticket out of range");
}

}  // namespace loger
