#include "loger/reasoner.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include "loger/error.hpp"

namespace loger {

namespace {

using Flat = Eigen::Map<Vector>;

template <typename P>
std::array<Flat, 8> flatten(P& p) {
  const auto map = [](auto& m) { return Flat(const_cast<double*>(m.data()), m.size()); };
  return {map(p.w_alpha), map(p.b_alpha), map(p.w_i), map(p.b_i),
          map(p.w_c),     map(p.b_c),     map(p.w_o), map(p.b_o)};
}

Vector logistic(const Vector& x) {
  return x.unaryExpr([](double v) { return sigmoid(v); });
}

void require_dim(const Vector& v, std::size_t d, const char* what) {
  if (static_cast<std::size_t>(v.size()) != d) {
    fail(ErrorCode::kRange, std::string(what) + " has dimension " + std::to_string(v.size()) +
                                ", expected " + std::to_string(d));
  }
}

}  // namespace

void ReasonerParams::validate() const {
  const auto d = w_i.rows();
  const auto nr = w_alpha.rows();
  const bool ok = w_alpha.cols() == d && b_alpha.size() == nr && w_i.cols() == 2 * d &&
                  b_i.size() == d && w_c.rows() == d && w_c.cols() == 2 * d && b_c.size() == d &&
                  w_o.rows() == d && w_o.cols() == 3 * d && b_o.size() == d;
  if (!ok) fail(ErrorCode::kRange, "reasoner parameter shapes are inconsistent");
  const bool finite = w_alpha.allFinite() && b_alpha.allFinite() && w_i.allFinite() &&
                      b_i.allFinite() && w_c.allFinite() && b_c.allFinite() &&
                      w_o.allFinite() && b_o.allFinite();
  if (!finite) fail(ErrorCode::kNumeric, "reasoner parameters contain non-finite values");
}

ReasonerParams init_reasoner(std::size_t dim, std::size_t num_relations, std::uint64_t seed) {
  if (dim == 0 || num_relations == 0) fail(ErrorCode::kConfig, "reasoner needs d >= 1 and |R| >= 1");
  Rng rng(seed);
  const auto d = static_cast<Eigen::Index>(dim);
  const auto nr = static_cast<Eigen::Index>(num_relations);
  const auto uniform = [&](Eigen::Index rows, Eigen::Index cols) {
    std::uniform_real_distribution<double> dist(-1.0 / std::sqrt(static_cast<double>(cols)),
                                                1.0 / std::sqrt(static_cast<double>(cols)));
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
    }
    return m;
  };
  ReasonerParams p;
  p.w_alpha = uniform(nr, d);
  p.b_alpha = Vector::Zero(nr);
  p.w_i = uniform(d, 2 * d);
  p.b_i = Vector::Zero(d);
  p.w_c = uniform(d, 2 * d);
  p.b_c = Vector::Zero(d);
  p.w_o = uniform(d, 3 * d);
  p.b_o = Vector::Zero(d);
  return p;
}

ReasonerParams zeros_like(const ReasonerParams& p) {
  ReasonerParams z;
  z.w_alpha = Matrix::Zero(p.w_alpha.rows(), p.w_alpha.cols());
  z.b_alpha = Vector::Zero(p.b_alpha.size());
  z.w_i = Matrix::Zero(p.w_i.rows(), p.w_i.cols());
  z.b_i = Vector::Zero(p.b_i.size());
  z.w_c = Matrix::Zero(p.w_c.rows(), p.w_c.cols());
  z.b_c = Vector::Zero(p.b_c.size());
  z.w_o = Matrix::Zero(p.w_o.rows(), p.w_o.cols());
  z.b_o = Vector::Zero(p.b_o.size());
  return z;
}

WalkerState initial_state(const EmbeddingTable& emb, EntityId user) {
  WalkerState s;
  s.entity = emb.entities.row(user).transpose();
  s.cell = Vector::Zero(static_cast<Eigen::Index>(emb.dim()));
  return s;
}

WalkerOutput walker_step(const ReasonerParams& params, const Matrix& relation_embeddings,
                         const WalkerState& state, StepCache* cache) {
  const std::size_t d = params.dim();
  require_dim(state.entity, d, "walker entity state");
  require_dim(state.cell, d, "walker cell state");
  if (static_cast<std::size_t>(relation_embeddings.rows()) != params.num_relations() ||
      static_cast<std::size_t>(relation_embeddings.cols()) != d) {
    fail(ErrorCode::kRange, "relation embeddings do not match the reasoner shape");
  }
  const auto n = static_cast<Eigen::Index>(d);
  const Vector& e = state.entity;
  const Vector& c_prev = state.cell;

  const Vector alpha = logistic(params.w_alpha * e + params.b_alpha);
  const Vector r = relation_embeddings.transpose() * alpha;
  const Vector z = e + r;
  const Vector in_gate =
      logistic(params.w_i.leftCols(n) * e + params.w_i.rightCols(n) * c_prev + params.b_i);
  const Vector cand =
      (params.w_c.leftCols(n) * z + params.w_c.rightCols(n) * e + params.b_c).array().tanh().matrix();
  const Vector c = (Vector::Ones(n) - in_gate).cwiseProduct(c_prev) + in_gate.cwiseProduct(cand);
  const Vector out_gate = logistic(params.w_o.leftCols(n) * z + params.w_o.middleCols(n, n) * e +
                                   params.w_o.rightCols(n) * c + params.b_o);
  const Vector e_next = out_gate.cwiseProduct(c.array().tanh().matrix());

  if (cache) {
    *cache = StepCache{e, c_prev, alpha, r, z, in_gate, cand, c, out_gate, e_next};
  }
  return WalkerOutput{r, e_next, WalkerState{e_next, c, state.hop + 1}};
}

WalkerState advance(const WalkerOutput& out, const Vector& next_entity) {
  WalkerState s = out.state;
  s.entity = next_entity;
  return s;
}

std::vector<Path> sample_training_paths(const KnowledgeGraph& kg, const RuleSet& rules,
                                        const EvidenceIndex& evidence, EntityId u,
                                        std::span<const double> w, std::size_t n, double epsilon,
                                        Rng& rng) {
  std::vector<Path> out;
  if (n == 0) return out;
  const GroundingSampler sampler(kg, rules, evidence, u);
  std::vector<double> mass(rules.size(), 0.0);
  double total = 0.0;
  for (std::size_t l = 0; l < rules.size(); ++l) {
    if (sampler.counts()[l] == 0) continue;
    mass[l] = std::max(w[l], epsilon);
    total += mass[l];
  }
  if (total <= 0.0) return out;
  std::discrete_distribution<std::size_t> pick(mass.begin(), mass.end());
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) out.push_back(sampler.sample(static_cast<RuleId>(pick(rng)), rng));
  return out;
}

HopNegative sample_negative(const KnowledgeGraph& kg, EntityId from, RelationId positive_relation,
                            EntityId positive_entity, Rng& rng) {
  const auto edges = kg.neighbors(from);
  if (edges.size() > 1) {
    std::uniform_int_distribution<std::size_t> pick(0, edges.size() - 2);
    std::size_t k = pick(rng);
    // Skip over the positive edge so the draw is uniform over the others.
    const auto pos = std::lower_bound(edges.begin(), edges.end(), Edge{positive_relation, positive_entity});
    if (pos != edges.end() && *pos == Edge{positive_relation, positive_entity} &&
        k >= static_cast<std::size_t>(pos - edges.begin())) {
      ++k;
    }
    return {edges[k].relation, edges[k].entity};
  }
  HopNegative neg{positive_relation, positive_entity};
  if (kg.num_entities() > 1) {
    std::uniform_int_distribution<EntityId> pick(0, static_cast<EntityId>(kg.num_entities() - 2));
    const EntityId e = pick(rng);
    neg.entity = e >= positive_entity ? e + 1 : e;
  }
  if (kg.num_relations() > 1) {
    std::uniform_int_distribution<RelationId> pick(0, static_cast<RelationId>(kg.num_relations() - 2));
    const RelationId r = pick(rng);
    neg.relation = r >= positive_relation ? r + 1 : r;
  }
  return neg;
}

double path_hinge_loss(const ReasonerParams& params, const EmbeddingTable& emb, const Path& path,
                       std::span<const HopNegative> negatives, double margin,
                       ReasonerParams* grad) {
  const std::size_t hops = path.relations.size();
  if (negatives.size() != hops) fail(ErrorCode::kRange, "one negative per hop is required");
  const Matrix& rel = emb.relations;
  const auto n = static_cast<Eigen::Index>(params.dim());

  std::vector<StepCache> caches(hops);
  std::vector<Vector> d_entity(hops), d_relation(hops);
  double loss = 0.0;
  WalkerState state = initial_state(emb, path.source());
  for (std::size_t t = 0; t < hops; ++t) {
    const WalkerOutput out = walker_step(params, rel, state, &caches[t]);
    const auto e_pos = emb.entities.row(path.entities[t + 1]).transpose();
    const auto e_neg = emb.entities.row(negatives[t].entity).transpose();
    const auto r_pos = rel.row(path.relations[t]).transpose();
    const auto r_neg = rel.row(negatives[t].relation).transpose();
    const double he = margin - out.entity.dot(e_pos) + out.entity.dot(e_neg);
    const double hr = margin - out.relation.dot(r_pos) + out.relation.dot(r_neg);
    d_entity[t] = Vector::Zero(n);
    d_relation[t] = Vector::Zero(n);
    if (he > 0.0) {
      loss += he;
      d_entity[t] = e_neg - e_pos;
    }
    if (hr > 0.0) {
      loss += hr;
      d_relation[t] = r_neg - r_pos;
    }
    state = advance(out, e_pos);
  }
  if (!grad) return loss;

  Vector dc_next = Vector::Zero(n);
  for (std::size_t k = hops; k-- > 0;) {
    const StepCache& s = caches[k];
    const Vector tanh_c = s.cell.array().tanh().matrix();
    const Vector ones = Vector::Ones(n);

    const Vector d_o = d_entity[k].cwiseProduct(tanh_c);
    const Vector d_o_pre = d_o.cwiseProduct(s.out_gate.cwiseProduct(ones - s.out_gate));
    grad->w_o.leftCols(n) += d_o_pre * s.z.transpose();
    grad->w_o.middleCols(n, n) += d_o_pre * s.input.transpose();
    grad->w_o.rightCols(n) += d_o_pre * s.cell.transpose();
    grad->b_o += d_o_pre;

    Vector dz = params.w_o.leftCols(n).transpose() * d_o_pre;
    const Vector dc = dc_next +
                      d_entity[k].cwiseProduct(s.out_gate).cwiseProduct(ones - tanh_c.cwiseProduct(tanh_c)) +
                      params.w_o.rightCols(n).transpose() * d_o_pre;

    const Vector d_i_pre = dc.cwiseProduct(s.cand - s.cell_in).cwiseProduct(s.in_gate.cwiseProduct(ones - s.in_gate));
    grad->w_i.leftCols(n) += d_i_pre * s.input.transpose();
    grad->w_i.rightCols(n) += d_i_pre * s.cell_in.transpose();
    grad->b_i += d_i_pre;

    const Vector d_g_pre = dc.cwiseProduct(s.in_gate).cwiseProduct(ones - s.cand.cwiseProduct(s.cand));
    grad->w_c.leftCols(n) += d_g_pre * s.z.transpose();
    grad->w_c.rightCols(n) += d_g_pre * s.input.transpose();
    grad->b_c += d_g_pre;
    dz += params.w_c.leftCols(n).transpose() * d_g_pre;

    const Vector d_r = d_relation[k] + dz;
    const Vector d_a_pre = (rel * d_r).cwiseProduct(s.alpha.cwiseProduct(Vector::Ones(s.alpha.size()) - s.alpha));
    grad->w_alpha += d_a_pre * s.input.transpose();
    grad->b_alpha += d_a_pre;

    dc_next = dc.cwiseProduct(ones - s.in_gate) + params.w_i.rightCols(n).transpose() * d_i_pre;
  }
  return loss;
}

ReasonerParams train_reasoner(std::span<const Path> paths, const EmbeddingTable& emb,
                              const KnowledgeGraph& kg, const ReasonerConfig& config,
                              std::uint64_t seed, ReasonerTrainStats* stats) {
  if (paths.empty()) fail(ErrorCode::kEmpty, "no training paths for the reasoner");
  if (config.batch_size < 1) fail(ErrorCode::kConfig, "reasoner batch size must be at least 1");
  if (!(config.learning_rate > 0.0)) fail(ErrorCode::kConfig, "reasoner learning rate must be positive");
  Rng rng(seed);
  ReasonerParams params = init_reasoner(emb.dim(), static_cast<std::size_t>(emb.relations.rows()), rng());
  ReasonerParams m1 = zeros_like(params), m2 = zeros_like(params);
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  std::size_t step = 0;

  std::vector<std::size_t> order(paths.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<HopNegative> negatives;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      ReasonerParams grad = zeros_like(params);
      for (std::size_t k = begin; k < end; ++k) {
        const Path& p = paths[order[k]];
        negatives.clear();
        for (std::size_t t = 0; t < p.relations.size(); ++t) {
          negatives.push_back(sample_negative(kg, p.entities[t], p.relations[t], p.entities[t + 1], rng));
        }
        epoch_loss += path_hinge_loss(params, emb, p, negatives, config.margin, &grad);
      }
      ++step;
      const double scale = 1.0 / static_cast<double>(end - begin);
      const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
      auto pf = flatten(params);
      auto gf = flatten(grad);
      auto af = flatten(m1);
      auto bf = flatten(m2);
      for (std::size_t i = 0; i < pf.size(); ++i) {
        gf[i] *= scale;
        af[i] = kBeta1 * af[i] + (1.0 - kBeta1) * gf[i];
        bf[i] = kBeta2 * bf[i] + (1.0 - kBeta2) * gf[i].cwiseProduct(gf[i]);
        pf[i].array() -= config.learning_rate * (af[i].array() / c1) /
                         ((bf[i].array() / c2).sqrt() + kEps);
      }
    }
    epoch_loss /= static_cast<double>(paths.size());
    if (!std::isfinite(epoch_loss)) {
      fail(ErrorCode::kTraining, "reasoner loss diverged at epoch " + std::to_string(epoch));
    }
    if (stats) stats->epoch_loss.push_back(epoch_loss);
  }
  params.validate();
  return params;
}

namespace {

struct Partial {
  Path path;
  WalkerState state;
};

bool path_order(const Path& a, const Path& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.entities != b.entities) return a.entities < b.entities;
  return a.relations < b.relations;
}

}  // namespace

std::vector<Path> beam_search(const ReasonerParams& params, const EmbeddingTable& emb,
                              const KnowledgeGraph& kg, const RuleSet& rules, EntityId u,
                              std::optional<EntityId> target, std::size_t path_length,
                              std::size_t beam, std::optional<std::span<const RuleId>> allowed) {
  if (beam < 1) fail(ErrorCode::kConfig, "beam width must be at least 1");
  if (path_length < 1) fail(ErrorCode::kConfig, "path length must be at least 1");
  if (u >= kg.num_entities()) fail(ErrorCode::kRange, "user id out of range");

  std::set<RuleId> permitted;
  if (allowed) {
    permitted.insert(allowed->begin(), allowed->end());
  } else {
    for (RuleId l = 0; l < rules.size(); ++l) permitted.insert(l);
  }
  // Relation prefixes of permitted rules; expansions outside them can never match.
  std::set<std::vector<RelationId>> prefixes;
  for (const RuleId l : permitted) {
    const auto& body = rules[l].body;
    for (std::size_t len = 1; len <= body.size(); ++len) prefixes.emplace(body.begin(), body.begin() + static_cast<std::ptrdiff_t>(len));
  }

  std::vector<Path> out;
  std::vector<Partial> frontier;
  {
    Partial root;
    root.path.entities.push_back(u);
    root.state = initial_state(emb, u);
    frontier.push_back(std::move(root));
  }
  struct Candidate {
    Edge edge;
    double score;
  };
  std::vector<Candidate> candidates;
  for (std::size_t t = 1; t <= path_length && !frontier.empty(); ++t) {
    std::vector<Partial> next;
    for (const Partial& p : frontier) {
      const WalkerOutput step = walker_step(params, emb.relations, p.state);
      candidates.clear();
      for (const Edge& edge : kg.neighbors(p.path.target())) {
        const double s = step.entity.dot(emb.entities.row(edge.entity).transpose()) +
                         step.relation.dot(emb.relations.row(edge.relation).transpose());
        candidates.push_back({edge, s});
      }
      std::stable_sort(candidates.begin(), candidates.end(),
                       [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
      const std::size_t keep = std::min(beam, candidates.size());
      for (std::size_t k = 0; k < keep; ++k) {
        Partial child;
        child.path = p.path;
        child.path.entities.push_back(candidates[k].edge.entity);
        child.path.relations.push_back(candidates[k].edge.relation);
        child.path.score += candidates[k].score;
        if (!prefixes.contains(child.path.relations)) continue;
        if (const auto id = rules.find(child.path.relations); id && permitted.contains(*id)) {
          if (!target || child.path.target() == *target) {
            Path done = child.path;
            done.rule = *id;
            out.push_back(std::move(done));
          }
        }
        if (t < path_length) {
          child.state = advance(step, emb.entities.row(candidates[k].edge.entity).transpose());
          next.push_back(std::move(child));
        }
      }
    }
    frontier = std::move(next);
  }
  std::sort(out.begin(), out.end(), path_order);
  return out;
}

std::map<EntityId, std::vector<Path>> explain(const ReasonerParams& params,
                                              const EmbeddingTable& emb, const KnowledgeGraph& kg,
                                              const RuleSet& rules, EntityId u,
                                              std::span<const EntityId> items,
                                              const PersonalizedScores& y, std::size_t path_length,
                                              std::size_t beam, std::size_t top_rules) {
  std::map<EntityId, std::vector<Path>> out;
  for (const EntityId v : items) out[v];
  const std::vector<RuleId> top = y.top(top_rules);
  if (top.empty() || items.empty()) return out;
  for (Path& p : beam_search(params, emb, kg, rules, u, std::nullopt, path_length, beam,
                             std::span<const RuleId>(top))) {
    const auto it = out.find(p.target());
    if (it != out.end()) it->second.push_back(std::move(p));
  }
  return out;
}

}  // namespace loger
