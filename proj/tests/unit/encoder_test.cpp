#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "loger/encoder.hpp"
#include "loger/error.hpp"

using namespace loger;

namespace {

// Two entities and one relation with hand-set vectors.
EmbeddingTable hand_table(double gamma) {
  EmbeddingTable emb;
  emb.gamma = gamma;
  emb.entities = Matrix(2, 3);
  emb.relations = Matrix(1, 3);
  emb.entities.row(0) << 0.1, -0.2, 0.3;
  emb.relations.row(0) << 0.4, 0.5, -0.6;
  emb.entities.row(1) = emb.entities.row(0) + emb.relations.row(0);
  return emb;
}

long double sigmoid_oracle(long double x) { return 1.0L / (1.0L + std::exp(-x)); }

}  // namespace

TEST_CASE("init_embeddings shapes, determinism and unit norms") {
  const auto kg = fixtures::augmented(fixtures::kShop);
  const auto a = init_embeddings(kg, 100, 12.0, 5);
  const auto b = init_embeddings(kg, 100, 12.0, 5);
  CHECK(a.entities.rows() == static_cast<Eigen::Index>(kg.num_entities()));
  CHECK(a.entities.cols() == 100);
  CHECK(a.relations.rows() == static_cast<Eigen::Index>(kg.num_relations()));
  CHECK(a.relations.cols() == 100);
  CHECK(a.entities == b.entities);
  CHECK(a.relations == b.relations);
  for (Eigen::Index i = 0; i < a.entities.rows(); ++i) CHECK(std::abs(a.entities.row(i).norm() - 1.0) < 1e-6);
  CHECK(init_embeddings(kg, 100, 12.0, 6).entities != a.entities);
}

TEST_CASE("score_triplet at zero distance") {
  CHECK(score_triplet(hand_table(0.0), 0, 0, 1).value() == doctest::Approx(0.5).epsilon(1e-15));
  const double s = score_triplet(hand_table(2.0), 0, 0, 1).value();
  CHECK(std::abs(s - static_cast<double>(sigmoid_oracle(2.0L))) < 1e-12);
  CHECK(std::abs(s - 0.880797) < 1e-6);
}

TEST_CASE("score_triplet tends to zero as the distance grows") {
  EmbeddingTable emb = hand_table(12.0);
  emb.entities.row(1).setConstant(1e6);
  const double s = score_triplet(emb, 0, 0, 1).value();
  CHECK(s >= 0.0);
  CHECK(s < 1e-300);
}

TEST_CASE("scores are in (0,1) and translation invariant") {
  const auto kg = fixtures::augmented(fixtures::kShop);
  EmbeddingTable emb = init_embeddings(kg, 16, 12.0, 3);
  EmbeddingTable shifted = emb;
  Eigen::RowVectorXd shift = Eigen::RowVectorXd::LinSpaced(16, -0.7, 0.9);
  for (Eigen::Index i = 0; i < shifted.entities.rows(); ++i) shifted.entities.row(i) += shift;
  for (const Triple& t : kg.triples()) {
    const double s = score_triplet(emb, t.head, t.relation, t.tail).value();
    CHECK(s > 0.0);
    CHECK(s < 1.0);
    CHECK(std::abs(s - score_triplet(shifted, t.head, t.relation, t.tail).value()) < 1e-12);
  }
}

TEST_CASE("TruthScore rejects values outside [0,1]") {
  CHECK_THROWS_AS(TruthScore(1.5), Error);
  CHECK_THROWS_AS(TruthScore(-0.1), Error);
  CHECK_THROWS_AS(TruthScore(std::nan("")), Error);
}

TEST_CASE("positive_triple_loss gradient matches central differences") {
  const auto kg = fixtures::augmented(fixtures::kShop);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    EmbeddingTable emb = init_embeddings(kg, 8, 2.0, seed);
    const Triple t = kg.triples()[seed % kg.num_triples()];
    Vector gh, gr, gt;
    positive_triple_loss(emb, t, &gh, &gr, &gt);
    const auto check_row = [&](Matrix& m, Eigen::Index row, const Vector& analytic) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        const double saved = m(row, j);
        constexpr double h = 1e-7;
        m(row, j) = saved + h;
        const double up = positive_triple_loss(emb, t, nullptr, nullptr, nullptr);
        m(row, j) = saved - h;
        const double down = positive_triple_loss(emb, t, nullptr, nullptr, nullptr);
        m(row, j) = saved;
        const double fd = (up - down) / (2 * h);
        CHECK(std::abs(fd - analytic[j]) <= 1e-4 * std::max(1.0, std::abs(fd)));
      }
    };
    check_row(emb.entities, t.head, gh);
    check_row(emb.relations, t.relation, gr);
    check_row(emb.entities, t.tail, gt);
  }
}

TEST_CASE("training raises the mean positive score and beats random negatives") {
  const auto kg = fixtures::augmented(fixtures::kShop);
  EncoderConfig config;
  config.dim = 16;
  config.epochs = 50;
  config.learning_rate = 1e-2;
  config.batch_size = 4;
  const auto before = init_embeddings(kg, 16, 12.0, 9);
  const auto forward = kg.forward_triples();
  const auto after = train_encoder(kg, {}, config, 9);
  CHECK(after.epochs_trained == 50);
  CHECK(mean_positive_score(after, forward) > mean_positive_score(before, forward));

  Rng rng(4);
  std::uniform_int_distribution<EntityId> pick(0, static_cast<EntityId>(kg.num_entities() - 1));
  double negative = 0.0;
  std::size_t n = 0;
  for (const Triple& t : forward) {
    const EntityId tail = pick(rng);
    if (kg.contains(t.head, t.relation, tail)) continue;
    negative += score_triplet(after, t.head, t.relation, tail).value();
    ++n;
  }
  CHECK(mean_positive_score(after, forward) > negative / static_cast<double>(n));
}

TEST_CASE("training with an empty hidden set matches the observed-only objective") {
  const auto kg = fixtures::augmented(fixtures::kShop);
  EncoderConfig config;
  config.dim = 8;
  config.epochs = 3;
  const std::vector<Triple> none;
  const auto a = train_encoder(kg, none, config, 11);
  const auto b = train_encoder(kg, {}, config, 11);
  CHECK(a.entities == b.entities);
  EncoderConfig defaults;
  CHECK(defaults.batch_size == 512);
  CHECK(defaults.learning_rate == 1e-4);
  CHECK(defaults.dim == 100);
  CHECK(defaults.gamma == 12.0);
}

TEST_CASE("rank_items_for_user orders by score and skips purchased items") {
  const auto kg = fixtures::augmented(
      "user:1 purchase item:1\nuser:2 purchase item:2\nuser:2 purchase item:3\nitem:1 belongs_to cat:1\n");
  EmbeddingTable emb = init_embeddings(kg, 4, 0.0, 1);
  const EntityId u = fixtures::entity(kg, "user:1");
  const EntityId i2 = fixtures::entity(kg, "item:2");
  const EntityId i3 = fixtures::entity(kg, "item:3");
  const RelationId p = kg.interaction_relation();
  // Place item:2 at distance 0 and item:3 further away.
  emb.entities.row(i2) = emb.entities.row(u) + emb.relations.row(p);
  emb.entities.row(i3) = emb.entities.row(i2).array() + 0.5;
  const auto ranked = rank_items_for_user(emb, kg, u, 50);
  REQUIRE(ranked.size() == 2);
  CHECK(ranked[0].item == i2);
  CHECK(ranked[1].item == i3);
  CHECK(ranked[0].score > ranked[1].score);
  CHECK(rank_items_for_user(emb, kg, u, 1).size() == 1);

  const auto everything = fixtures::augmented("user:1 purchase item:1\nuser:1 purchase item:2\n");
  const auto emb2 = init_embeddings(everything, 4, 12.0, 1);
  CHECK(rank_items_for_user(emb2, everything, fixtures::entity(everything, "user:1"), 50).empty());
}
