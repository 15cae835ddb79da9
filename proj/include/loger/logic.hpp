#pragma once

// Neural logic model: global rule weights learned by EM against the encoder,
// personalized rule importance and the blended ranking score.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "loger/encoder.hpp"
#include "loger/kg.hpp"
#include "loger/rules.hpp"

namespace loger {

struct RuleWeights {
  std::vector<double> values;  // w_l, indexed by rule id
  std::size_t round = 0;

  static RuleWeights zeros(std::size_t num_rules) { return {std::vector<double>(num_rules, 0.0), 0}; }
};

// sigmoid(mean of w over the rules). Returns 0 when no rule applies.
double rule_posterior(std::span<const double> w, std::span<const RuleId> rules);
double rule_posterior(std::span<const double> w, std::span<const RuleCount> rules);

struct HiddenTriple {
  EntityId user = 0;
  EntityId item = 0;
  double posterior = 0.0;      // p(X=1 | groundings, w); 0 when no rule applies
  double encoder_score = 0.0;  // q(X=1 | theta)
};

struct HiddenSet {
  std::vector<HiddenTriple> members;

  std::vector<Triple> triples(RelationId interaction) const;
};

struct LogicConfig {
  double tau = 0.5;
  double alpha = 0.3;
  std::size_t hidden_k = 50;
  double learning_rate = 1e-5;
  std::size_t m_steps = 1000;
  std::size_t em_rounds = 3;
};

// Per user, the top-k unobserved items by encoder score with their rule posteriors.
std::vector<HiddenTriple> hidden_candidates(const EmbeddingTable& emb, const KnowledgeGraph& kg,
                                            const EvidenceIndex& evidence,
                                            std::span<const double> w, std::size_t k);

// Candidates whose rule posterior is at least tau.
HiddenSet build_hidden_set(const EmbeddingTable& emb, const KnowledgeGraph& kg,
                           std::span<const double> w, const EvidenceIndex& evidence, double tau,
                           std::size_t k);

// One conditional of the pseudolikelihood: an observed interaction, or a hidden
// pair weighted by the encoder's belief q.
struct PlTerm {
  std::vector<RuleId> rules;  // L_hrt, non-empty
  bool observed = true;
  double q = 1.0;
};

// Observed interaction triples plus hidden pairs; pairs without rule evidence are dropped.
std::vector<PlTerm> pseudolikelihood_terms(const KnowledgeGraph& kg, const EvidenceIndex& evidence,
                                           std::span<const HiddenTriple> hidden);

double pseudolikelihood(std::span<const PlTerm> terms, std::span<const double> w);

// d l_PL / d w_l = sum_obs (1 - p)/|L| + sum_hidden (q - p)/|L| over terms containing l.
std::vector<double> pseudolikelihood_grad(std::span<const PlTerm> terms, std::span<const double> w);

struct MStepResult {
  RuleWeights weights;
  double initial_objective = 0.0;
  double final_objective = 0.0;
};

// Gradient ascent on l_PL from w0; p is recomputed on every step.
MStepResult m_step(std::span<const PlTerm> terms, const RuleWeights& w0, double learning_rate,
                   std::size_t steps);

struct RuleScore {
  RuleId rule = 0;
  double score = 0.0;
};

// y_{u,l} = w_l n_l(u) / sum_l' n_l'(u) for every rule; empty when u has no grounding.
struct PersonalizedScores {
  std::vector<RuleScore> scores;  // ascending rule id

  bool empty() const noexcept { return scores.empty(); }
  double score(RuleId rule) const noexcept;
  // The m rules with the largest scores (ties by ascending id).
  std::vector<RuleId> top(std::size_t m) const;
};

PersonalizedScores personalized_scores(std::span<const double> w,
                                       std::span<const std::uint64_t> user_counts);

// q + alpha * p, with the rule term 0 when no rule applies.
double ranking_score(double q, std::optional<double> posterior, double alpha);
double ranking_score(const EmbeddingTable& emb, std::span<const double> w, const KnowledgeGraph& kg,
                     const EvidenceIndex& evidence, EntityId u, EntityId v, double alpha);

// Unobserved items by ranking score descending, ascending id tie-break.
std::vector<ScoredItem> recommend(const EmbeddingTable& emb, std::span<const double> w,
                                  const KnowledgeGraph& kg, const EvidenceIndex& evidence,
                                  EntityId u, double alpha, std::size_t topk = 10);

struct EmRound {
  std::size_t round = 0;
  double initial_pseudolikelihood = 0.0;  // this round's objective before the M-step
  double pseudolikelihood = 0.0;          // after the M-step
  double mean_positive_score = 0.0;
  std::size_t hidden_candidates = 0;
  std::size_t hidden_positive = 0;  // |H+|
  std::size_t pl_terms = 0;
};

// Each round: top-k candidates from the current encoder, M-step on G and the
// candidates, H+ from the new weights, then an encoder E-step on G and H+.
std::vector<EmRound> em_train(const KnowledgeGraph& kg, const EvidenceIndex& evidence,
                              EmbeddingTable& emb, RuleWeights& w, const LogicConfig& logic,
                              const EncoderConfig& encoder, Rng& rng);

}  // namespace loger
