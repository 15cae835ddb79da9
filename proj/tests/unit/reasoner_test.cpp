#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "fixtures.hpp"
#include "loger/error.hpp"
#include "loger/reasoner.hpp"
#include "loger/synth.hpp"

using namespace loger;

namespace {

ReasonerParams zero_params(std::size_t d, std::size_t nr) {
  ReasonerParams p = init_reasoner(d, nr, 1);
  p.w_alpha.setZero();
  p.w_i.setZero();
  p.w_c.setZero();
  p.w_o.setZero();
  return p;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

using PathKey = std::pair<std::vector<EntityId>, std::vector<RelationId>>;

std::set<PathKey> keys(const std::vector<Path>& paths) {
  std::set<PathKey> out;
  for (const Path& p : paths) out.insert({p.entities, p.relations});
  return out;
}

}  // namespace

TEST_CASE("zero relation-attention weights average all relations with weight one half") {
  const auto kg = fixtures::augmented(fixtures::kShop);
  const auto emb = init_embeddings(kg, 6, 12.0, 2);
  const ReasonerParams p = zero_params(6, kg.num_relations());
  const auto out = walker_step(p, emb.relations, initial_state(emb, kg.users().front()));
  const Vector expected = 0.5 * emb.relations.colwise().sum().transpose();
  CHECK((out.relation - expected).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("zero gate weights give bias-driven gates") {
  const auto kg = fixtures::augmented(fixtures::kShop);
  const auto emb = init_embeddings(kg, 3, 12.0, 2);
  ReasonerParams p = zero_params(3, kg.num_relations());
  p.b_i << 0.2, -1.0, 3.0;
  p.b_c << -0.5, 0.0, 1.5;
  p.b_o << 1.0, 0.3, -0.7;
  const auto out = walker_step(p, emb.relations, initial_state(emb, kg.users().front()));
  for (Eigen::Index j = 0; j < 3; ++j) {
    const double c = logistic(p.b_i[j]) * std::tanh(p.b_c[j]);
    CHECK(std::abs(out.state.cell[j] - c) < 1e-15);
    CHECK(std::abs(out.entity[j] - logistic(p.b_o[j]) * std::tanh(c)) < 1e-15);
  }
  CHECK(out.state.hop == 1);
}

TEST_CASE("predicted entity coordinates lie in (-1, 1)") {
  const auto kg = fixtures::augmented(fixtures::kShop);
  const auto emb = init_embeddings(kg, 8, 12.0, 3);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    ReasonerParams p = init_reasoner(8, kg.num_relations(), seed);
    p.w_c *= 50.0;
    p.b_c.setConstant(10.0);
    WalkerState s = initial_state(emb, kg.users()[seed % kg.users().size()]);
    for (int t = 0; t < 4; ++t) {
      const auto out = walker_step(p, emb.relations, s);
      CHECK(out.entity.cwiseAbs().maxCoeff() < 1.0);
      s = out.state;
    }
  }
}

TEST_CASE("walker_step rejects mismatched shapes") {
  const auto kg = fixtures::augmented(fixtures::kShop);
  const auto emb = init_embeddings(kg, 4, 12.0, 3);
  const ReasonerParams p = init_reasoner(5, kg.num_relations(), 1);
  CHECK_THROWS_AS(walker_step(p, emb.relations, initial_state(emb, 0)), Error);
  ReasonerParams bad = init_reasoner(4, kg.num_relations(), 1);
  bad.b_o.resize(3);
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("training path sampling") {
  SUBCASE("a single grounding repeats") {
    const auto kg = fixtures::augmented("user:1 purchase item:1\nuser:1 likes tag:1\nitem:1 tagged tag:1\n");
    const RuleSet rules = mine_rules(kg, 2, 1);
    REQUIRE(rules.size() == 1);
    const EvidenceIndex evidence(kg, rules);
    Rng rng(1);
    const auto paths = sample_training_paths(kg, rules, evidence, fixtures::entity(kg, "user:1"),
                                             std::vector<double>{1.0}, 5, 1e-3, rng);
    REQUIRE(paths.size() == 5);
    for (const Path& p : paths) CHECK(p == paths.front());
    CHECK(paths.front().rule == RuleId{0});
  }
  SUBCASE("degenerate weights select one rule and frequencies follow the weights") {
    const auto kg = fixtures::augmented(
        "user:1 purchase item:1\nuser:1 likes tag:1\nitem:1 tagged tag:1\nitem:1 belongs_to cat:1\n"
        "user:1 purchase item:2\nitem:2 belongs_to cat:1\nitem:2 tagged tag:1\nuser:1 purchase item:3\n"
        "item:3 belongs_to cat:1\n");
    const RuleSet rules = mine_rules(kg, 3, 1);
    const EvidenceIndex evidence(kg, rules);
    const EntityId u = fixtures::entity(kg, "user:1");
    const auto counts = evidence.user_counts(u);
    std::vector<RuleId> grounded;
    for (RuleId l = 0; l < rules.size(); ++l) {
      if (counts[l] > 0) grounded.push_back(l);
    }
    REQUIRE(grounded.size() >= 3);
    std::vector<double> w(rules.size(), 0.0);
    w[grounded[0]] = 1.0;
    Rng rng(2);
    for (const Path& p : sample_training_paths(kg, rules, evidence, u, w, 200, 1e-15, rng)) CHECK(p.rule == grounded[0]);

    for (std::size_t k = 0; k < grounded.size(); ++k) w[grounded[k]] = static_cast<double>(k + 1);
    double total = 0.0;
    for (const RuleId l : grounded) total += w[l];
    constexpr std::size_t n = 10000;
    std::map<RuleId, std::size_t> freq;
    for (const Path& p : sample_training_paths(kg, rules, evidence, u, w, n, 1e-3, rng)) ++freq[*p.rule];
    double chi2 = 0.0;
    for (const RuleId l : grounded) {
      const double expected = w[l] / total;
      const double observed = static_cast<double>(freq[l]) / n;
      CHECK(std::abs(observed - expected) < 0.02);
      chi2 += n * (observed - expected) * (observed - expected) / expected;
    }
    // 99.9% quantile for up to 20 degrees of freedom is below 46.
    CHECK(chi2 < 46.0);
  }
  SUBCASE("users without groundings get no paths") {
    const auto kg = fixtures::augmented(std::string(fixtures::kShop) + "user:9 likes tag:2\n");
    const RuleSet rules = mine_rules(kg, 3, 1);
    const EvidenceIndex evidence(kg, rules);
    Rng rng(3);
    CHECK(sample_training_paths(kg, rules, evidence, fixtures::entity(kg, "user:9"),
                                std::vector<double>(rules.size(), 1.0), 5, 1e-3, rng)
              .empty());
  }
}

TEST_CASE("hinge loss at zero gap and in the flat region") {
  const auto kg = fixtures::augmented(fixtures::kShop);
  const RuleSet rules = mine_rules(kg, 3, 1);
  const EvidenceIndex evidence(kg, rules);
  const auto emb = init_embeddings(kg, 6, 12.0, 4);
  const ReasonerParams p = init_reasoner(6, kg.num_relations(), 5);
  Rng rng(6);
  const auto paths = sample_training_paths(kg, rules, evidence, kg.users().front(),
                                           std::vector<double>(rules.size(), 1.0), 3, 1e-3, rng);
  REQUIRE(!paths.empty());
  for (const Path& path : paths) {
    std::vector<HopNegative> same;
    for (std::size_t t = 0; t < path.length(); ++t) same.push_back({path.relations[t], path.entities[t + 1]});
    CHECK(path_hinge_loss(p, emb, path, same, 1.0) == doctest::Approx(2.0 * path.length()).epsilon(1e-14));
    ReasonerParams grad = zeros_like(p);
    CHECK(path_hinge_loss(p, emb, path, same, 0.0, &grad) == 0.0);
    CHECK(grad.w_o.cwiseAbs().maxCoeff() == 0.0);
    CHECK(grad.w_alpha.cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(path_hinge_loss(p, emb, path, std::vector<HopNegative>{}, 1.0), Error);
  }
}

TEST_CASE("sample_negative avoids the positive edge") {
  const auto kg = fixtures::augmented(fixtures::kShop);
  Rng rng(7);
  for (EntityId e = 0; e < kg.num_entities(); ++e) {
    for (const Edge& edge : kg.neighbors(e)) {
      const HopNegative neg = sample_negative(kg, e, edge.relation, edge.entity, rng);
      CHECK(!(neg.relation == edge.relation && neg.entity == edge.entity));
    }
  }
}

TEST_CASE("training lowers the loss on a 20-path fixture") {
  const auto kg = fixtures::augmented(fixtures::kShop);
  const RuleSet rules = mine_rules(kg, 3, 1);
  const EvidenceIndex evidence(kg, rules);
  EncoderConfig enc;
  enc.dim = 8;
  enc.epochs = 20;
  enc.learning_rate = 1e-2;
  const auto emb = train_encoder(kg, {}, enc, 1);
  Rng rng(8);
  std::vector<Path> paths;
  for (const EntityId u : kg.users()) {
    for (Path& p : sample_training_paths(kg, rules, evidence, u, std::vector<double>(rules.size(), 1.0), 10, 1e-3, rng)) {
      if (paths.size() < 20) paths.push_back(std::move(p));
    }
  }
  REQUIRE(paths.size() == 20);
  ReasonerConfig config;
  config.epochs = 100;
  config.batch_size = 4;
  ReasonerTrainStats stats;
  const auto params = train_reasoner(paths, emb, kg, config, 9, &stats);
  REQUIRE(stats.epoch_loss.size() == 100);
  CHECK(stats.epoch_loss.back() < stats.epoch_loss.front());
  CHECK_NOTHROW(params.validate());
  CHECK_THROWS_AS(train_reasoner(std::vector<Path>{}, emb, kg, config, 9), Error);
}

TEST_CASE("beam search on a chain returns exactly the rule path") {
  const auto kg = fixtures::augmented("user:1 likes tag:1\nitem:1 tagged tag:1\nuser:1 purchase item:1\n"
                                      "user:2 purchase item:2\n");
  const RuleSet rules = mine_rules(kg, 2, 1);
  const auto emb = init_embeddings(kg, 4, 12.0, 1);
  const auto p = init_reasoner(4, kg.num_relations(), 2);
  const EntityId u = fixtures::entity(kg, "user:1");
  const auto paths = beam_search(p, emb, kg, rules, u, fixtures::entity(kg, "item:1"), 2, 10);
  REQUIRE(paths.size() == 1);
  CHECK(paths[0].entities ==
        std::vector<EntityId>{u, fixtures::entity(kg, "tag:1"), fixtures::entity(kg, "item:1")});
  CHECK(paths[0].rule.has_value());
  CHECK(beam_search(p, emb, kg, rules, u, fixtures::entity(kg, "item:2"), 3, 10).empty());
}

TEST_CASE("beam search is sound and matches the exhaustive oracle at full width") {
  const auto kg = fixtures::augmented(fixtures::kShop);
  const RuleSet rules = mine_rules(kg, 3, 1);
  const auto emb = init_embeddings(kg, 6, 12.0, 3);
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto p = init_reasoner(6, kg.num_relations(), seed);
    for (const EntityId u : kg.users()) {
      std::set<PathKey> oracle;
      for (const Path& path : exhaustive_paths(kg, u, std::nullopt, 3)) {
        if (rules.find(path.relations)) oracle.insert({path.entities, path.relations});
      }
      const auto full = beam_search(p, emb, kg, rules, u, std::nullopt, 3, kg.max_out_degree());
      CHECK(keys(full) == oracle);
      for (const Path& path : full) {
        CHECK(path_in_graph(kg, path));
        REQUIRE(path.rule.has_value());
        CHECK(rules[*path.rule].body == path.relations);
      }
      for (std::size_t k = 1; k < full.size(); ++k) CHECK(full[k - 1].score >= full[k].score);
      const auto narrow = keys(beam_search(p, emb, kg, rules, u, std::nullopt, 3, 1));
      for (const PathKey& key : narrow) CHECK(oracle.count(key) == 1);
    }
  }
}

TEST_CASE("explain restricts paths to the user's top rules") {
  const auto kg = fixtures::augmented(fixtures::kShop);
  const RuleSet rules = mine_rules(kg, 3, 1);
  const EvidenceIndex evidence(kg, rules);
  const auto emb = init_embeddings(kg, 6, 12.0, 3);
  const auto p = init_reasoner(6, kg.num_relations(), 4);
  const EntityId u = fixtures::entity(kg, "user:1");
  const auto counts = evidence.user_counts(u);
  std::vector<RuleId> grounded;
  for (RuleId l = 0; l < rules.size(); ++l) {
    if (counts[l] > 0) grounded.push_back(l);
  }
  REQUIRE(grounded.size() >= 2);
  std::vector<double> w(rules.size(), 0.1);
  w[grounded[1]] = 5.0;
  const auto y = personalized_scores(w, counts);
  const std::vector<EntityId> items(kg.items().begin(), kg.items().end());

  const auto single = explain(p, emb, kg, rules, u, items, y, 3, 10, 1);
  std::size_t total = 0;
  for (const auto& [item, paths] : single) {
    for (const Path& path : paths) {
      CHECK(path.rule == grounded[1]);
      CHECK(path.target() == item);
      ++total;
    }
  }
  CHECK(total > 0);

  // m = |L| is the unrestricted rule filter.
  const auto all = explain(p, emb, kg, rules, u, items, y, 3, 10, rules.size());
  std::set<PathKey> from_explain, from_beam;
  for (const auto& [item, paths] : all) {
    for (const Path& path : paths) from_explain.insert({path.entities, path.relations});
  }
  for (const Path& path : beam_search(p, emb, kg, rules, u, std::nullopt, 3, 10)) {
    if (std::find(items.begin(), items.end(), path.target()) != items.end()) {
      from_beam.insert({path.entities, path.relations});
    }
  }
  CHECK(from_explain == from_beam);
}
