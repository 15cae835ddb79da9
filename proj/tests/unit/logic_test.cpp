#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "fixtures.hpp"
#include "loger/logic.hpp"
#include "loger/synth.hpp"

using namespace loger;

namespace {

long double sigmoid_oracle(long double x) { return 1.0L / (1.0L + std::exp(-x)); }

// One user, one purchase, matched by likes o tagged^-1; a second taggable item unobserved.
const char* kOneRule = "user:1 purchase item:1\nuser:1 likes tag:1\nitem:1 tagged tag:1\nitem:2 tagged tag:1\n";

struct World {
  KnowledgeGraph kg;
  RuleSet rules;
  EvidenceIndex evidence;
};

World world(const std::string& text, std::uint64_t min_support = 1) {
  World w;
  w.kg = fixtures::augmented(text);
  w.rules = mine_rules(w.kg, 3, min_support);
  w.evidence = EvidenceIndex(w.kg, w.rules);
  return w;
}

}  // namespace

TEST_CASE("rule_posterior examples") {
  const std::vector<RuleId> two{0, 1};
  CHECK(rule_posterior(std::vector<double>{0.0, 0.0}, two) == 0.5);
  CHECK(std::abs(rule_posterior(std::vector<double>{2.0}, std::vector<RuleId>{0}) -
                 static_cast<double>(sigmoid_oracle(2.0L))) < 1e-15);
  CHECK(rule_posterior(std::vector<double>{4.0, -4.0}, two) == 0.5);
  CHECK(rule_posterior(std::vector<double>{4.0, -4.0}, std::vector<RuleId>{}) == 0.0);
}

TEST_CASE("rule_posterior is bounded and monotone in each weight") {
  Rng rng(5);
  std::uniform_real_distribution<double> unit(-3.0, 3.0);
  const std::vector<RuleId> ids{0, 2, 3};
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> w(4);
    for (double& x : w) x = unit(rng);
    const double p = rule_posterior(w, ids);
    CHECK(p > 0.0);
    CHECK(p < 1.0);
    for (const RuleId l : ids) {
      std::vector<double> up = w;
      up[l] += 0.5;
      CHECK(rule_posterior(up, ids) >= p);
    }
  }
}

TEST_CASE("pseudolikelihood gradient hand examples") {
  const World w = world(kOneRule);
  const std::vector<HiddenTriple> none;
  const auto terms = pseudolikelihood_terms(w.kg, w.evidence, none);
  REQUIRE(w.rules.size() >= 1);
  const auto target = w.rules.find(std::vector<RelationId>{fixtures::relation(w.kg, "likes"),
                                                           fixtures::relation(w.kg, "tagged^-1")});
  REQUIRE(target.has_value());
  const std::vector<double> zero(w.rules.size(), 0.0);
  const auto grad = pseudolikelihood_grad(terms, zero);
  CHECK(grad[*target] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(std::abs(pseudolikelihood(terms, zero) - std::log(0.5)) < 1e-15);
  CHECK(std::abs(pl_oracle(w.kg, w.rules, none, zero) - std::log(0.5)) < 1e-15);

  // A hidden pair whose q equals its posterior contributes nothing to the gradient.
  const EntityId u = fixtures::entity(w.kg, "user:1");
  const EntityId i2 = fixtures::entity(w.kg, "item:2");
  std::vector<double> weights(w.rules.size(), 0.7);
  const double p = rule_posterior(weights, w.evidence.rules_for(u, i2));
  const std::vector<HiddenTriple> fixed{{u, i2, p, p}};
  const auto with_hidden = pseudolikelihood_grad(pseudolikelihood_terms(w.kg, w.evidence, fixed), weights);
  const auto without = pseudolikelihood_grad(terms, weights);
  for (std::size_t l = 0; l < weights.size(); ++l) CHECK(std::abs(with_hidden[l] - without[l]) < 1e-15);

  // q = 1 collapses the hidden term to log p.
  const std::vector<HiddenTriple> sure{{u, i2, p, 1.0}};
  const double gap = pl_oracle(w.kg, w.rules, sure, weights) - pl_oracle(w.kg, w.rules, none, weights);
  CHECK(std::abs(gap - std::log(p)) < 1e-12);
}

TEST_CASE("pseudolikelihood gradient matches finite differences on a 3-triple 2-rule fixture") {
  const World w = world("user:1 purchase item:1\nuser:1 likes tag:1\nitem:1 tagged tag:1\n"
                        "user:1 purchase item:2\nitem:2 tagged tag:1\n");
  REQUIRE(w.rules.size() >= 2);
  const EntityId u = fixtures::entity(w.kg, "user:1");
  std::vector<HiddenTriple> hidden;
  for (const PairEvidence& ev : w.evidence.unobserved(u)) hidden.push_back({u, ev.item, 0.0, 0.3});
  const auto terms = pseudolikelihood_terms(w.kg, w.evidence, hidden);
  std::vector<double> weights(w.rules.size());
  for (std::size_t l = 0; l < weights.size(); ++l) weights[l] = 0.4 * static_cast<double>(l) - 0.5;
  const auto grad = pseudolikelihood_grad(terms, weights);
  for (std::size_t l = 0; l < weights.size(); ++l) {
    std::vector<double> up = weights, down = weights;
    constexpr double h = 1e-5;
    up[l] += h;
    down[l] -= h;
    const double fd = (pl_oracle(w.kg, w.rules, hidden, up) - pl_oracle(w.kg, w.rules, hidden, down)) / (2 * h);
    CHECK(std::abs(fd - grad[l]) < 1e-6);
  }
}

TEST_CASE("m_step fixed point and monotone growth") {
  const World w = world(kOneRule);
  const std::vector<HiddenTriple> none;
  const auto terms = pseudolikelihood_terms(w.kg, w.evidence, none);
  const RuleWeights w0 = RuleWeights::zeros(w.rules.size());
  // No terms: zero gradient everywhere.
  const auto still = m_step(std::vector<PlTerm>{}, w0, 0.1, 50);
  CHECK(still.weights.values == w0.values);

  const auto target = *w.rules.find(std::vector<RelationId>{fixtures::relation(w.kg, "likes"),
                                                            fixtures::relation(w.kg, "tagged^-1")});
  double previous = 0.0;
  RuleWeights current = w0;
  for (int k = 0; k < 20; ++k) {
    current = m_step(terms, current, 0.5, 1).weights;
    CHECK(current.values[target] > previous);
    previous = current.values[target];
  }
  const auto result = m_step(terms, w0, 0.5, 20);
  CHECK(result.final_objective > result.initial_objective);
  CHECK(LogicConfig{}.learning_rate == 1e-5);
}

TEST_CASE("hidden set boundaries and contract") {
  const World w = world(fixtures::kShop);
  const auto emb = init_embeddings(w.kg, 8, 12.0, 3);
  const std::vector<double> zero(w.rules.size(), 0.0);
  const HiddenSet half = build_hidden_set(emb, w.kg, zero, w.evidence, 0.5, 50);
  const auto candidates = hidden_candidates(emb, w.kg, w.evidence, zero, 50);
  std::size_t with_rules = 0;
  for (const HiddenTriple& h : candidates) with_rules += w.evidence.rules_for(h.user, h.item).empty() ? 0 : 1;
  CHECK(half.members.size() == with_rules);
  CHECK(with_rules > 0);
  CHECK(build_hidden_set(emb, w.kg, zero, w.evidence, 1.0, 50).members.empty());

  std::vector<double> mixed(w.rules.size());
  for (std::size_t l = 0; l < mixed.size(); ++l) mixed[l] = (l % 2 == 0) ? 1.0 : -1.5;
  const HiddenSet hs = build_hidden_set(emb, w.kg, mixed, w.evidence, 0.5, 1);
  std::map<EntityId, std::size_t> per_user;
  for (const HiddenTriple& h : hs.members) {
    CHECK(h.posterior >= 0.5);
    CHECK(!w.kg.contains(h.user, w.kg.interaction_relation(), h.item));
    CHECK(++per_user[h.user] <= 1);
  }
  LogicConfig defaults;
  CHECK(defaults.tau == 0.5);
  CHECK(defaults.hidden_k == 50);
  CHECK(defaults.alpha == 0.3);
}

TEST_CASE("personalized scores examples and invariances") {
  const std::vector<double> w{2.0, 1.0, 5.0};
  const std::vector<std::uint64_t> counts{3, 1, 0};
  const auto y = personalized_scores(w, counts);
  CHECK(y.score(0) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(y.score(1) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(y.score(2) == 0.0);
  CHECK(y.top(1) == std::vector<RuleId>{0});
  const auto scaled = personalized_scores(w, std::vector<std::uint64_t>{30, 10, 0});
  CHECK(scaled.score(0) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(scaled.score(1) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(scaled.top(3) == y.top(3));
  CHECK(personalized_scores(w, std::vector<std::uint64_t>{0, 0, 0}).empty());
}

TEST_CASE("ranking_score blend") {
  CHECK(std::abs(ranking_score(0.7, 0.6, 0.3) - 0.88) < 1e-15);
  CHECK(ranking_score(0.7, 0.6, 0.0) == 0.7);
  CHECK(ranking_score(0.7, std::nullopt, 0.3) == 0.7);
  CHECK(ranking_score(0.71, 0.6, 0.3) > ranking_score(0.7, 0.6, 0.3));
  CHECK(ranking_score(0.7, 0.61, 0.3) >= ranking_score(0.7, 0.6, 0.3));
}

TEST_CASE("recommend orders by blended score with id tie-break") {
  const World w = world(fixtures::kShop);
  const std::vector<double> zero(w.rules.size(), 0.0);
  auto emb = init_embeddings(w.kg, 4, 12.0, 2);
  // Identical embeddings for every item: all encoder scores tie.
  for (const EntityId v : w.kg.items()) emb.entities.row(v) = emb.entities.row(w.kg.items().front());
  const EntityId u = fixtures::entity(w.kg, "user:4");
  const auto recs = recommend(emb, zero, w.kg, w.evidence, u, 0.0, 10);
  for (std::size_t k = 1; k < recs.size(); ++k) {
    CHECK(recs[k - 1].score == recs[k].score);
    CHECK(recs[k - 1].item < recs[k].item);
  }
  for (const ScoredItem& s : recommend(emb, zero, w.kg, w.evidence, u, 0.0, 10)) {
    CHECK(s.score == score_triplet(emb, u, w.kg.interaction_relation(), s.item).value());
  }
  const auto blended = recommend(emb, zero, w.kg, w.evidence, u, 0.3, 10);
  for (std::size_t k = 1; k < blended.size(); ++k) CHECK(blended[k - 1].score >= blended[k].score);
}

TEST_CASE("em_train with zero rounds leaves state unchanged") {
  const World w = world(fixtures::kShop);
  auto emb = init_embeddings(w.kg, 8, 12.0, 1);
  const auto before = emb;
  RuleWeights weights = RuleWeights::zeros(w.rules.size());
  LogicConfig logic;
  logic.em_rounds = 0;
  EncoderConfig encoder;
  encoder.dim = 8;
  Rng rng(1);
  CHECK(em_train(w.kg, w.evidence, emb, weights, logic, encoder, rng).empty());
  CHECK(emb.entities == before.entities);
  CHECK(weights.values == std::vector<double>(w.rules.size(), 0.0));
}

TEST_CASE("em_train rounds ascend the pseudolikelihood on a small fixture") {
  const World w = world(fixtures::kShop);
  EncoderConfig encoder;
  encoder.dim = 8;
  encoder.epochs = 5;
  encoder.learning_rate = 1e-2;
  LogicConfig logic;
  logic.em_rounds = 3;
  logic.learning_rate = 1e-2;
  logic.m_steps = 50;
  SUBCASE("each M-step ascends its own objective") {
    auto emb = train_encoder(w.kg, {}, encoder, 1);
    RuleWeights weights = RuleWeights::zeros(w.rules.size());
    logic.hidden_k = 2;
    Rng rng(2);
    const auto rounds = em_train(w.kg, w.evidence, emb, weights, logic, encoder, rng);
    REQUIRE(rounds.size() == 3);
    for (std::size_t k = 0; k < rounds.size(); ++k) {
      CHECK(rounds[k].round == k + 1);
      CHECK(std::isfinite(rounds[k].pseudolikelihood));
      CHECK(rounds[k].pseudolikelihood >= rounds[k].initial_pseudolikelihood);
      CHECK(rounds[k].hidden_positive <= rounds[k].hidden_candidates);
    }
    CHECK(weights.round == 3);
  }
  SUBCASE("with a fixed term set the per-round values are nondecreasing") {
    auto emb = train_encoder(w.kg, {}, encoder, 1);
    RuleWeights weights = RuleWeights::zeros(w.rules.size());
    logic.hidden_k = 0;
    Rng rng(2);
    const auto rounds = em_train(w.kg, w.evidence, emb, weights, logic, encoder, rng);
    REQUIRE(rounds.size() == 3);
    for (std::size_t k = 1; k < rounds.size(); ++k) {
      CHECK(rounds[k].pseudolikelihood >= rounds[k - 1].pseudolikelihood);
      CHECK(rounds[k].initial_pseudolikelihood == doctest::Approx(rounds[k - 1].pseudolikelihood).epsilon(1e-12));
    }
  }
}
