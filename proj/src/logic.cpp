#include "loger/logic.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "loger/error.hpp"

namespace loger {

double rule_posterior(std::span<const double> w, std::span<const RuleId> rules) {
  if (rules.empty()) return 0.0;
  double sum = 0.0;
  for (const RuleId l : rules) sum += w[l];
  return sigmoid(sum / static_cast<double>(rules.size()));
}

double rule_posterior(std::span<const double> w, std::span<const RuleCount> rules) {
  if (rules.empty()) return 0.0;
  double sum = 0.0;
  for (const RuleCount& rc : rules) sum += w[rc.rule];
  return sigmoid(sum / static_cast<double>(rules.size()));
}

std::vector<Triple> HiddenSet::triples(RelationId interaction) const {
  std::vector<Triple> out;
  out.reserve(members.size());
  for (const HiddenTriple& h : members) out.push_back(Triple{h.user, interaction, h.item});
  return out;
}

std::vector<HiddenTriple> hidden_candidates(const EmbeddingTable& emb, const KnowledgeGraph& kg,
                                            const EvidenceIndex& evidence,
                                            std::span<const double> w, std::size_t k) {
  std::vector<HiddenTriple> out;
  if (k == 0) return out;
  for (const EntityId u : kg.users()) {
    for (const ScoredItem& s : rank_items_for_user(emb, kg, u, k)) {
      out.push_back({u, s.item, rule_posterior(w, evidence.rules_for(u, s.item)), s.score});
    }
  }
  return out;
}

HiddenSet build_hidden_set(const EmbeddingTable& emb, const KnowledgeGraph& kg,
                           std::span<const double> w, const EvidenceIndex& evidence, double tau,
                           std::size_t k) {
  HiddenSet set;
  for (const HiddenTriple& h : hidden_candidates(emb, kg, evidence, w, k)) {
    if (h.posterior >= tau) set.members.push_back(h);
  }
  return set;
}

std::vector<PlTerm> pseudolikelihood_terms(const KnowledgeGraph& kg, const EvidenceIndex& evidence,
                                           std::span<const HiddenTriple> hidden) {
  std::vector<PlTerm> terms;
  const auto rule_ids = [](std::span<const RuleCount> rcs) {
    std::vector<RuleId> ids;
    for (const RuleCount& rc : rcs) ids.push_back(rc.rule);
    return ids;
  };
  for (const EntityId u : kg.users()) {
    for (const PairEvidence& ev : evidence.observed(u)) {
      if (!ev.rules.empty()) terms.push_back({rule_ids(ev.rules), true, 1.0});
    }
  }
  for (const HiddenTriple& h : hidden) {
    const auto rcs = evidence.rules_for(h.user, h.item);
    if (!rcs.empty()) terms.push_back({rule_ids(rcs), false, h.encoder_score});
  }
  return terms;
}

namespace {

double term_logit(const PlTerm& term, std::span<const double> w) {
  double sum = 0.0;
  for (const RuleId l : term.rules) sum += w[l];
  return sum / static_cast<double>(term.rules.size());
}

}  // namespace

double pseudolikelihood(std::span<const PlTerm> terms, std::span<const double> w) {
  double total = 0.0;
  for (const PlTerm& term : terms) {
    const double s = term_logit(term, w);
    // log p = -softplus(-s), log(1 - p) = -softplus(s)
    if (term.observed) {
      total -= softplus(-s);
    } else {
      total -= term.q * softplus(-s) + (1.0 - term.q) * softplus(s);
    }
  }
  return total;
}

std::vector<double> pseudolikelihood_grad(std::span<const PlTerm> terms, std::span<const double> w) {
  std::vector<double> grad(w.size(), 0.0);
  for (const PlTerm& term : terms) {
    const double p = sigmoid(term_logit(term, w));
    const double target = term.observed ? 1.0 : term.q;
    const double share = (target - p) / static_cast<double>(term.rules.size());
    for (const RuleId l : term.rules) grad[l] += share;
  }
  return grad;
}

MStepResult m_step(std::span<const PlTerm> terms, const RuleWeights& w0, double learning_rate,
                   std::size_t steps) {
  if (steps < 1) fail(ErrorCode::kConfig, "m-step needs at least one step");
  MStepResult result;
  result.weights = w0;
  auto& w = result.weights.values;
  result.initial_objective = pseudolikelihood(terms, w);
  for (std::size_t step = 0; step < steps; ++step) {
    const std::vector<double> grad = pseudolikelihood_grad(terms, w);
    for (std::size_t l = 0; l < w.size(); ++l) {
      w[l] += learning_rate * grad[l];
      if (!std::isfinite(w[l])) {
        fail(ErrorCode::kNumeric, "rule weight diverged at m-step " + std::to_string(step));
      }
    }
  }
  result.final_objective = pseudolikelihood(terms, w);
  return result;
}

double PersonalizedScores::score(RuleId rule) const noexcept {
  const auto it = std::lower_bound(scores.begin(), scores.end(), rule,
                                   [](const RuleScore& s, RuleId r) { return s.rule < r; });
  return it != scores.end() && it->rule == rule ? it->score : 0.0;
}

std::vector<RuleId> PersonalizedScores::top(std::size_t m) const {
  std::vector<RuleScore> sorted = scores;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const RuleScore& a, const RuleScore& b) { return a.score > b.score; });
  std::vector<RuleId> out;
  for (std::size_t k = 0; k < std::min(m, sorted.size()); ++k) out.push_back(sorted[k].rule);
  return out;
}

PersonalizedScores personalized_scores(std::span<const double> w,
                                       std::span<const std::uint64_t> user_counts) {
  PersonalizedScores out;
  double total = 0.0;
  for (const auto c : user_counts) total += static_cast<double>(c);
  if (total == 0.0) return out;
  for (std::size_t l = 0; l < user_counts.size(); ++l) {
    out.scores.push_back({static_cast<RuleId>(l), w[l] * static_cast<double>(user_counts[l]) / total});
  }
  return out;
}

double ranking_score(double q, std::optional<double> posterior, double alpha) {
  return q + (posterior ? alpha * *posterior : 0.0);
}

double ranking_score(const EmbeddingTable& emb, std::span<const double> w, const KnowledgeGraph& kg,
                     const EvidenceIndex& evidence, EntityId u, EntityId v, double alpha) {
  const double q = score_triplet(emb, u, kg.interaction_relation(), v).value();
  const auto rules = evidence.rules_for(u, v);
  return ranking_score(q, rules.empty() ? std::nullopt : std::optional<double>(rule_posterior(w, rules)),
                       alpha);
}

std::vector<ScoredItem> recommend(const EmbeddingTable& emb, std::span<const double> w,
                                  const KnowledgeGraph& kg, const EvidenceIndex& evidence,
                                  EntityId u, double alpha, std::size_t topk) {
  if (topk < 1) fail(ErrorCode::kConfig, "topk must be at least 1");
  if (kg.entity_type(u) != EntityType::kUser) {
    fail(ErrorCode::kType, "`" + kg.entity_name(u) + "` is not a user");
  }
  const std::vector<EntityId> owned = kg.interactions_of(u);
  std::vector<ScoredItem> scored;
  for (const EntityId v : kg.items()) {
    if (std::binary_search(owned.begin(), owned.end(), v)) continue;
    scored.push_back({v, ranking_score(emb, w, kg, evidence, u, v, alpha)});
  }
  const auto better = [](const ScoredItem& a, const ScoredItem& b) {
    return a.score != b.score ? a.score > b.score : a.item < b.item;
  };
  const std::size_t keep = std::min(topk, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(), better);
  scored.resize(keep);
  return scored;
}

std::vector<EmRound> em_train(const KnowledgeGraph& kg, const EvidenceIndex& evidence,
                              EmbeddingTable& emb, RuleWeights& w, const LogicConfig& logic,
                              const EncoderConfig& encoder, Rng& rng) {
  std::vector<EmRound> rounds;
  const RelationId rui = kg.interaction_relation();
  for (std::size_t round = 1; round <= logic.em_rounds; ++round) {
    EmRound diag;
    diag.round = w.round + 1;

    // M-step against the encoder's current beliefs.
    const std::vector<HiddenTriple> candidates =
        hidden_candidates(emb, kg, evidence, w.values, logic.hidden_k);
    const std::vector<PlTerm> terms = pseudolikelihood_terms(kg, evidence, candidates);
    MStepResult m = m_step(terms, w, logic.learning_rate, logic.m_steps);
    w = std::move(m.weights);
    w.round = diag.round;

    // E-step: H+ from the fresh weights, then refit the encoder on G and H+.
    HiddenSet hidden;
    for (HiddenTriple h : candidates) {
      h.posterior = rule_posterior(w.values, evidence.rules_for(h.user, h.item));
      if (h.posterior >= logic.tau) hidden.members.push_back(h);
    }
    const std::vector<Triple> positives = hidden.triples(rui);
    const EncoderTrainStats stats = train_encoder(emb, kg, positives, encoder, rng);

    diag.initial_pseudolikelihood = m.initial_objective;
    diag.pseudolikelihood = m.final_objective;
    diag.mean_positive_score = stats.mean_positive_score;
    diag.hidden_candidates = candidates.size();
    diag.hidden_positive = hidden.members.size();
    diag.pl_terms = terms.size();
    rounds.push_back(diag);
  }
  return rounds;
}

}  // namespace loger
