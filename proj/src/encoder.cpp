#include "loger/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "loger/error.hpp"

namespace loger {

double sigmoid(double x) noexcept {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double z = std::exp(x);
  return z / (1.0 + z);
}

double softplus(double x) noexcept {
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

TruthScore::TruthScore(double p) : p_(p) {
  if (!(p >= 0.0 && p <= 1.0)) fail(ErrorCode::kNumeric, "truth score outside [0, 1]");
}

EmbeddingTable init_embeddings(const KnowledgeGraph& kg, std::size_t dim, double gamma,
                               std::uint64_t seed) {
  if (dim == 0) fail(ErrorCode::kConfig, "embedding dimension must be positive");
  EmbeddingTable emb;
  emb.gamma = gamma;
  emb.seed = seed;
  const double bound = 6.0 / std::sqrt(static_cast<double>(dim));
  Rng rng(seed);
  std::uniform_real_distribution<double> uniform(-bound, bound);
  const auto d = static_cast<Eigen::Index>(dim);
  emb.entities.resize(static_cast<Eigen::Index>(kg.num_entities()), d);
  emb.relations.resize(static_cast<Eigen::Index>(kg.num_relations()), d);
  for (Eigen::Index i = 0; i < emb.entities.size(); ++i) emb.entities.data()[i] = uniform(rng);
  for (Eigen::Index i = 0; i < emb.relations.size(); ++i) emb.relations.data()[i] = uniform(rng);
  emb.entities.rowwise().normalize();
  return emb;
}

double translational_distance(const EmbeddingTable& emb, EntityId h, RelationId r, EntityId t) {
  return (emb.entities.row(h) + emb.relations.row(r) - emb.entities.row(t)).cwiseAbs().sum();
}

TruthScore score_triplet(const EmbeddingTable& emb, EntityId h, RelationId r, EntityId t) {
  if (h >= emb.entities.rows() || t >= emb.entities.rows() || r >= emb.relations.rows()) {
    fail(ErrorCode::kRange, "triple id outside the embedding table");
  }
  return TruthScore(sigmoid(emb.gamma - translational_distance(emb, h, r, t)));
}

double mean_positive_score(const EmbeddingTable& emb, std::span<const Triple> triples) {
  if (triples.empty()) return 0.0;
  double sum = 0.0;
  for (const Triple& t : triples) sum += score_triplet(emb, t.head, t.relation, t.tail).value();
  return sum / static_cast<double>(triples.size());
}

double positive_triple_loss(const EmbeddingTable& emb, const Triple& t, Vector* grad_h,
                            Vector* grad_r, Vector* grad_t) {
  const Vector diff = (emb.entities.row(t.head) + emb.relations.row(t.relation) -
                       emb.entities.row(t.tail)).transpose();
  const double margin = emb.gamma - diff.cwiseAbs().sum();
  // -log sigmoid(m); d/dm = -(1 - sigmoid(m)); dm/d(dist) = -1.
  const double dloss_ddist = 1.0 - sigmoid(margin);
  const Vector sign = diff.unaryExpr([](double x) { return static_cast<double>((x > 0) - (x < 0)); });
  if (grad_h) *grad_h = dloss_ddist * sign;
  if (grad_r) *grad_r = dloss_ddist * sign;
  if (grad_t) *grad_t = -dloss_ddist * sign;
  return softplus(-margin);
}

namespace {

// Adam with per-row lazy updates: only rows that received gradient in a batch move.
class LazyAdam {
 public:
  LazyAdam(Eigen::Index rows, Eigen::Index cols, double lr)
      : m_(Matrix::Zero(rows, cols)), v_(Matrix::Zero(rows, cols)), lr_(lr) {}

  void step(Matrix& param, const Matrix& grad, std::span<const Eigen::Index> rows, std::size_t t) {
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t));
    for (const Eigen::Index row : rows) {
      m_.row(row) = kBeta1 * m_.row(row) + (1.0 - kBeta1) * grad.row(row);
      v_.row(row) = kBeta2 * v_.row(row) + (1.0 - kBeta2) * grad.row(row).cwiseAbs2();
      param.row(row).array() -=
          lr_ * (m_.row(row).array() / c1) / ((v_.row(row).array() / c2).sqrt() + kEps);
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  Matrix m_;
  Matrix v_;
  double lr_;
};

class SparseGrad {
 public:
  SparseGrad(Eigen::Index rows, Eigen::Index cols)
      : grad_(Matrix::Zero(rows, cols)), touched_(static_cast<std::size_t>(rows), false) {}

  template <typename Row>
  void add(Eigen::Index row, const Row& g) {
    grad_.row(row) += g;
    if (!touched_[static_cast<std::size_t>(row)]) {
      touched_[static_cast<std::size_t>(row)] = true;
      rows_.push_back(row);
    }
  }

  const Matrix& matrix() const noexcept { return grad_; }
  std::span<const Eigen::Index> rows() const noexcept { return rows_; }

  void clear() {
    for (const Eigen::Index row : rows_) {
      grad_.row(row).setZero();
      touched_[static_cast<std::size_t>(row)] = false;
    }
    rows_.clear();
  }

 private:
  Matrix grad_;
  std::vector<bool> touched_;
  std::vector<Eigen::Index> rows_;
};

}  // namespace

EncoderTrainStats train_encoder(EmbeddingTable& emb, const KnowledgeGraph& kg,
                                std::span<const Triple> hidden_positive,
                                const EncoderConfig& config, Rng& rng) {
  if (config.batch_size == 0) fail(ErrorCode::kConfig, "encoder batch size must be positive");
  if (emb.entities.rows() != static_cast<Eigen::Index>(kg.num_entities()) ||
      emb.relations.rows() != static_cast<Eigen::Index>(kg.num_relations())) {
    fail(ErrorCode::kConfig, "embedding table does not match the graph");
  }
  std::vector<Triple> positives = kg.forward_triples();
  positives.insert(positives.end(), hidden_positive.begin(), hidden_positive.end());
  EncoderTrainStats stats;
  if (positives.empty()) fail(ErrorCode::kEmpty, "encoder training needs at least one triple");

  std::vector<std::vector<EntityId>> by_type(3);
  for (EntityId e = 0; e < kg.num_entities(); ++e) {
    by_type[static_cast<std::size_t>(kg.entity_type(e))].push_back(e);
  }

  const Eigen::Index d = emb.entities.cols();
  LazyAdam entity_opt(emb.entities.rows(), d, config.learning_rate);
  LazyAdam relation_opt(emb.relations.rows(), d, config.learning_rate);
  SparseGrad entity_grad(emb.entities.rows(), d);
  SparseGrad relation_grad(emb.relations.rows(), d);
  std::size_t step = 0;
  Vector gh, gr, gt;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(positives.begin(), positives.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < positives.size(); start += config.batch_size) {
      const std::size_t stop = std::min(positives.size(), start + config.batch_size);
      const double scale = 1.0 / static_cast<double>(stop - start);
      for (std::size_t k = start; k < stop; ++k) {
        const Triple& pos = positives[k];
        epoch_loss += positive_triple_loss(emb, pos, &gh, &gr, &gt);
        entity_grad.add(pos.head, scale * gh.transpose());
        relation_grad.add(pos.relation, scale * gr.transpose());
        entity_grad.add(pos.tail, scale * gt.transpose());

        const auto& pool = by_type[static_cast<std::size_t>(kg.entity_type(pos.tail))];
        if (pool.size() < 2) continue;
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        for (std::size_t n = 0; n < config.negatives; ++n) {
          EntityId corrupt = pos.tail;
          while (corrupt == pos.tail) corrupt = pool[pick(rng)];
          // -log(1 - sigmoid(m)) = softplus(m); d/d(dist) = -sigmoid(m).
          const Vector diff = (emb.entities.row(pos.head) + emb.relations.row(pos.relation) -
                               emb.entities.row(corrupt)).transpose();
          const double margin = emb.gamma - diff.cwiseAbs().sum();
          epoch_loss += softplus(margin);
          const double coeff = -sigmoid(margin) * scale;
          const Vector sign =
              diff.unaryExpr([](double x) { return static_cast<double>((x > 0) - (x < 0)); });
          entity_grad.add(pos.head, coeff * sign.transpose());
          relation_grad.add(pos.relation, coeff * sign.transpose());
          entity_grad.add(corrupt, -coeff * sign.transpose());
        }
      }
      ++step;
      entity_opt.step(emb.entities, entity_grad.matrix(), entity_grad.rows(), step);
      relation_opt.step(emb.relations, relation_grad.matrix(), relation_grad.rows(), step);
      entity_grad.clear();
      relation_grad.clear();
    }
    epoch_loss /= static_cast<double>(positives.size());
    if (!std::isfinite(epoch_loss) || !emb.entities.allFinite() || !emb.relations.allFinite()) {
      fail(ErrorCode::kTraining, "encoder loss became non-finite at epoch " + std::to_string(epoch));
    }
    stats.epoch_loss.push_back(epoch_loss);
    emb.entities.rowwise().normalize();
    ++emb.epochs_trained;
  }
  stats.mean_positive_score = mean_positive_score(emb, positives);
  return stats;
}

EmbeddingTable train_encoder(const KnowledgeGraph& kg, std::span<const Triple> hidden_positive,
                             const EncoderConfig& config, std::uint64_t seed) {
  if (kg.num_triples() == 0) fail(ErrorCode::kEmpty, "encoder training needs a non-empty graph");
  EmbeddingTable emb = init_embeddings(kg, config.dim, config.gamma, seed);
  Rng rng(seed ^ 0x5eedULL);
  train_encoder(emb, kg, hidden_positive, config, rng);
  return emb;
}

std::vector<ScoredItem> rank_items_for_user(const EmbeddingTable& emb, const KnowledgeGraph& kg,
                                            EntityId u, std::size_t k) {
  if (kg.entity_type(u) != EntityType::kUser) {
    fail(ErrorCode::kType, "`" + kg.entity_name(u) + "` is not a user");
  }
  if (k == 0) fail(ErrorCode::kConfig, "k must be at least 1");
  const RelationId rui = kg.interaction_relation();
  const std::vector<EntityId> owned = kg.interactions_of(u);
  std::vector<ScoredItem> scored;
  for (const EntityId v : kg.items()) {
    if (std::binary_search(owned.begin(), owned.end(), v)) continue;
    scored.push_back({v, score_triplet(emb, u, rui, v).value()});
  }
  const auto better = [](const ScoredItem& a, const ScoredItem& b) {
    return a.score != b.score ? a.score > b.score : a.item < b.item;
  };
  const std::size_t keep = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(), better);
  scored.resize(keep);
  return scored;
}

}  // namespace loger
