#pragma once

// Translational KG encoder. A triple's truth probability is
// sigmoid(gamma - ||e_h + e_r - e_t||_1).

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "loger/kg.hpp"

namespace loger {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

double sigmoid(double x) noexcept;
// log(1 + exp(x)) without overflow.
double softplus(double x) noexcept;

// Probability that a triple holds; always within [0, 1].
class TruthScore {
 public:
  constexpr TruthScore() = default;
  explicit TruthScore(double p);
  constexpr double value() const noexcept { return p_; }
  auto operator<=>(const TruthScore&) const = default;

 private:
  double p_ = 0.0;
};

struct EmbeddingTable {
  Matrix entities;   // |E| x d
  Matrix relations;  // |R| x d
  double gamma = 12.0;
  std::uint64_t seed = 0;
  std::size_t epochs_trained = 0;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(entities.cols()); }
};

struct EncoderConfig {
  std::size_t dim = 100;
  double gamma = 12.0;
  double learning_rate = 1e-4;
  std::size_t batch_size = 512;
  std::size_t epochs = 4;
  std::size_t negatives = 1;
};

// Uniform in [-6/sqrt(d), 6/sqrt(d)], entity rows then scaled to unit L2 norm.
EmbeddingTable init_embeddings(const KnowledgeGraph& kg, std::size_t dim, double gamma,
                               std::uint64_t seed);

double translational_distance(const EmbeddingTable& emb, EntityId h, RelationId r, EntityId t);
TruthScore score_triplet(const EmbeddingTable& emb, EntityId h, RelationId r, EntityId t);

struct EncoderTrainStats {
  std::vector<double> epoch_loss;  // mean loss per positive triple
  double mean_positive_score = 0.0;
};

// Maximizes sum log q(X=1) over the forward triples of kg plus `hidden_positive`,
// with `negatives` corrupted-tail samples per positive pushed toward q = 0.
// Corrupted tails are drawn uniformly among entities of the true tail's type.
EncoderTrainStats train_encoder(EmbeddingTable& emb, const KnowledgeGraph& kg,
                                std::span<const Triple> hidden_positive,
                                const EncoderConfig& config, Rng& rng);

EmbeddingTable train_encoder(const KnowledgeGraph& kg, std::span<const Triple> hidden_positive,
                             const EncoderConfig& config, std::uint64_t seed);

double mean_positive_score(const EmbeddingTable& emb, std::span<const Triple> triples);

// Negative log-likelihood of one positive triple; grad receives d/d(h), d/d(r), d/d(t)
// when non-null (subgradient sign(0) = 0 at L1 kinks).
double positive_triple_loss(const EmbeddingTable& emb, const Triple& t, Vector* grad_h,
                            Vector* grad_r, Vector* grad_t);

struct ScoredItem {
  EntityId item = 0;
  double score = 0.0;
};

// Items not linked to u by the interaction relation, by q(u, r_ui, v) descending with
// ascending id tie-break, truncated to k.
std::vector<ScoredItem> rank_items_for_user(const EmbeddingTable& emb, const KnowledgeGraph& kg,
                                            EntityId u, std::size_t k);

}  // namespace loger
