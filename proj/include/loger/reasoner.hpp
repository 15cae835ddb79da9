#pragma once

// Recurrent path walker, its hinge-loss training on rule-sampled paths, and
// rule-guided beam search.

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "loger/encoder.hpp"
#include "loger/kg.hpp"
#include "loger/logic.hpp"
#include "loger/path.hpp"
#include "loger/rules.hpp"

namespace loger {

struct ReasonerParams {
  Matrix w_alpha;  // |R| x d
  Vector b_alpha;  // |R|
  Matrix w_i;      // d x 2d, input [e_{t-1}; c_{t-1}]
  Vector b_i;
  Matrix w_c;  // d x 2d, input [z_t; e_{t-1}]
  Vector b_c;
  Matrix w_o;  // d x 3d, input [z_t; e_{t-1}; c_t]
  Vector b_o;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(w_i.rows()); }
  std::size_t num_relations() const noexcept { return static_cast<std::size_t>(w_alpha.rows()); }
  // Throws kRange on inconsistent shapes and kNumeric on non-finite entries.
  void validate() const;
};

// Uniform in +-1/sqrt(fan_in) for matrices, zero biases.
ReasonerParams init_reasoner(std::size_t dim, std::size_t num_relations, std::uint64_t seed);

struct WalkerState {
  Vector entity;  // e_{t-1}
  Vector cell;    // c_{t-1}
  std::size_t hop = 0;
};

// e_0 = user embedding, c_0 = 0.
WalkerState initial_state(const EmbeddingTable& emb, EntityId user);

// Intermediate activations of one step, kept for backpropagation.
struct StepCache {
  Vector input, cell_in;     // e_{t-1}, c_{t-1}
  Vector alpha, relation;    // alpha_t, r_t
  Vector z, in_gate, cand;   // z_t, i_t, tanh(W_c [z; e] + b_c)
  Vector cell, out_gate;     // c_t, o_t
  Vector entity;             // e_t
};

struct WalkerOutput {
  Vector relation;    // predicted r_t
  Vector entity;      // predicted e_t
  WalkerState state;  // (e_t, c_t, t); callers walking a concrete path replace entity
};

WalkerOutput walker_step(const ReasonerParams& params, const Matrix& relation_embeddings,
                         const WalkerState& state, StepCache* cache = nullptr);

// State after moving to a concrete neighbor: the next input is that entity's embedding.
WalkerState advance(const WalkerOutput& out, const Vector& next_entity);

struct ReasonerConfig {
  std::size_t path_length = 3;
  std::size_t beam = 10;
  double margin = 1.0;
  std::size_t epochs = 20;
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::size_t paths_per_user = 100;
  std::size_t top_rules = 5;
  double epsilon = 1e-3;  // floor on rule weights when sampling training paths
};

// n paths closing on u's observed interactions. A rule is drawn with probability
// proportional to max(w, epsilon) among rules grounded for u, then a grounding of it
// uniformly. Empty when no rule grounds for u.
std::vector<Path> sample_training_paths(const KnowledgeGraph& kg, const RuleSet& rules,
                                        const EvidenceIndex& evidence, EntityId u,
                                        std::span<const double> w, std::size_t n, double epsilon,
                                        Rng& rng);

// Negative (relation, entity) for one hop.
struct HopNegative {
  RelationId relation = 0;
  EntityId entity = 0;
};

// One out-edge of `from` other than the positive edge, uniformly; when none exists,
// an entity != positive and a relation != positive uniformly.
HopNegative sample_negative(const KnowledgeGraph& kg, EntityId from, RelationId positive_relation,
                            EntityId positive_entity, Rng& rng);

// Sum over hops of the entity and relation hinge terms for one path with fixed
// negatives. Accumulates dL/dparams into grad when non-null.
double path_hinge_loss(const ReasonerParams& params, const EmbeddingTable& emb, const Path& path,
                       std::span<const HopNegative> negatives, double margin,
                       ReasonerParams* grad = nullptr);

ReasonerParams zeros_like(const ReasonerParams& params);

struct ReasonerTrainStats {
  std::vector<double> epoch_loss;  // mean loss per path
};

// Adam on mini-batches with fresh negatives each epoch; embeddings stay frozen.
ReasonerParams train_reasoner(std::span<const Path> paths, const EmbeddingTable& emb,
                              const KnowledgeGraph& kg, const ReasonerConfig& config,
                              std::uint64_t seed, ReasonerTrainStats* stats = nullptr);

// Rule-guided beam search from u. Each partial path keeps its beam best expansions by
// s = <e_t, e'> + <r_t, r'>. Every expansion whose relation sequence is an allowed
// rule (and that ends at target, when given) is emitted, at any length up to
// path_length. Output is by cumulative score descending, then entity sequence.
std::vector<Path> beam_search(const ReasonerParams& params, const EmbeddingTable& emb,
                              const KnowledgeGraph& kg, const RuleSet& rules, EntityId u,
                              std::optional<EntityId> target, std::size_t path_length,
                              std::size_t beam,
                              std::optional<std::span<const RuleId>> allowed = std::nullopt);

// Paths per item from a beam search restricted to the top-m rules of y_u.
std::map<EntityId, std::vector<Path>> explain(const ReasonerParams& params,
                                              const EmbeddingTable& emb, const KnowledgeGraph& kg,
                                              const RuleSet& rules, EntityId u,
                                              std::span<const EntityId> items,
                                              const PersonalizedScores& y, std::size_t path_length,
                                              std::size_t beam, std::size_t top_rules);

}  // namespace loger
