#include "loger/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "loger/error.hpp"
#include "loger/io.hpp"
#include "loger/reasoner.hpp"
#include "loger/synth.hpp"

namespace loger {

namespace {

SynthDataset small_graph(std::uint64_t seed) {
  SynthSpec spec;
  spec.users = 6;
  spec.items = 5;
  spec.planted = {PlantedRuleSpec{2, 3, 1, 1, 1, 1.0}};
  spec.decoy_relations = 1;
  spec.decoy_pool = 3;
  spec.noise_rate = 0.1;
  spec.holdout_fraction = 0.0;
  spec.seed = seed;
  return generate(spec);
}

SelftestCheck check_groundings(const KnowledgeGraph& kg, const RuleSet& rules) {
  std::size_t mismatches = 0;
  for (const Rule& r : rules.rules()) {
    if (count_groundings(kg, r) != oracle_count_groundings(kg, r.body)) ++mismatches;
  }
  return {"grounding counts vs exhaustive enumeration", mismatches == 0,
          fmt::format("{} rules, {} mismatches", rules.size(), mismatches)};
}

SelftestCheck check_pl_gradient(const KnowledgeGraph& kg, const RuleSet& rules, std::uint64_t seed) {
  const EvidenceIndex evidence(kg, rules);
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<double> w(rules.size());
  for (double& x : w) x = unit(rng);
  std::vector<HiddenTriple> hidden;
  for (const EntityId u : kg.users()) {
    for (const PairEvidence& ev : evidence.unobserved(u)) {
      hidden.push_back({u, ev.item, 0.0, 0.5 * (unit(rng) + 1.0)});
    }
  }
  const auto terms = pseudolikelihood_terms(kg, evidence, hidden);
  const auto grad = pseudolikelihood_grad(terms, w);
  double worst = 0.0;
  constexpr double h = 1e-5;
  for (std::size_t l = 0; l < w.size(); ++l) {
    std::vector<double> up = w, down = w;
    up[l] += h;
    down[l] -= h;
    const double fd = (pl_oracle(kg, rules, hidden, up) - pl_oracle(kg, rules, hidden, down)) / (2 * h);
    worst = std::max(worst, std::abs(fd - grad[l]) / std::max({std::abs(fd), std::abs(grad[l]), 1e-8}));
  }
  const double objective_gap = std::abs(pseudolikelihood(terms, w) - pl_oracle(kg, rules, hidden, w));
  return {"pseudolikelihood gradient vs oracle finite differences", worst < 1e-5 && objective_gap < 1e-9,
          fmt::format("max relative error {:.3g}, objective gap {:.3g}", worst, objective_gap)};
}

SelftestCheck check_reasoner_gradient(const KnowledgeGraph& kg, const RuleSet& rules, std::uint64_t seed) {
  const EvidenceIndex evidence(kg, rules);
  const EmbeddingTable emb = init_embeddings(kg, 4, 12.0, seed);
  const ReasonerParams params = init_reasoner(4, kg.num_relations(), seed + 1);
  Rng rng(seed + 2);
  std::vector<Path> paths;
  for (const EntityId u : kg.users()) {
    for (Path& p : sample_training_paths(kg, rules, evidence, u, std::vector<double>(rules.size(), 1.0), 1, 1e-3, rng)) {
      paths.push_back(std::move(p));
    }
  }
  if (paths.empty()) return {"reasoner hinge gradient vs finite differences", false, "no training paths"};
  const Path& path = paths.front();
  std::vector<HopNegative> negs;
  for (std::size_t t = 0; t < path.relations.size(); ++t) {
    negs.push_back(sample_negative(kg, path.entities[t], path.relations[t], path.entities[t + 1], rng));
  }
  ReasonerParams grad = zeros_like(params);
  path_hinge_loss(params, emb, path, negs, 1.0, &grad);
  ReasonerParams probe = params;
  const auto fd_check = [&](auto member) {
    auto& target = probe.*member;
    const auto& analytic = grad.*member;
    double num = 0.0, den = 0.0;
    for (Eigen::Index i = 0; i < target.size(); ++i) {
      const double saved = target.data()[i];
      constexpr double h = 1e-6;
      target.data()[i] = saved + h;
      const double up = path_hinge_loss(probe, emb, path, negs, 1.0);
      target.data()[i] = saved - h;
      const double down = path_hinge_loss(probe, emb, path, negs, 1.0);
      target.data()[i] = saved;
      const double fd = (up - down) / (2 * h);
      num += (fd - analytic.data()[i]) * (fd - analytic.data()[i]);
      den = std::max(den, std::max(fd * fd, analytic.data()[i] * analytic.data()[i]));
    }
    return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
  };
  const double worst = std::max({fd_check(&ReasonerParams::w_alpha), fd_check(&ReasonerParams::b_alpha),
                                 fd_check(&ReasonerParams::w_i), fd_check(&ReasonerParams::b_i),
                                 fd_check(&ReasonerParams::w_c), fd_check(&ReasonerParams::b_c),
                                 fd_check(&ReasonerParams::w_o), fd_check(&ReasonerParams::b_o)});
  return {"reasoner hinge gradient vs finite differences", worst < 1e-4,
          fmt::format("max relative error {:.3g}", worst)};
}

SelftestCheck check_beam(const KnowledgeGraph& kg, const RuleSet& rules, std::uint64_t seed) {
  const EmbeddingTable emb = init_embeddings(kg, 8, 12.0, seed);
  const ReasonerParams params = init_reasoner(8, kg.num_relations(), seed + 1);
  std::size_t differing = 0;
  for (const EntityId u : kg.users()) {
    std::set<std::pair<std::vector<EntityId>, std::vector<RelationId>>> beam, oracle;
    for (const Path& p : beam_search(params, emb, kg, rules, u, std::nullopt, 3, kg.max_out_degree())) {
      beam.insert({p.entities, p.relations});
    }
    for (const Path& p : exhaustive_paths(kg, u, std::nullopt, 3)) {
      if (rules.find(p.relations)) oracle.insert({p.entities, p.relations});
    }
    if (beam != oracle) ++differing;
  }
  return {"beam search with full width vs exhaustive rule paths", differing == 0,
          fmt::format("{} users differ", differing)};
}

SelftestCheck check_checkpoints(const KnowledgeGraph& kg, const RuleSet& rules, std::uint64_t seed) {
  const EmbeddingTable emb = init_embeddings(kg, 8, 12.0, seed);
  const ReasonerParams params = init_reasoner(8, kg.num_relations(), seed + 1);
  RuleWeights w = RuleWeights::zeros(rules.size());
  for (std::size_t l = 0; l < w.values.size(); ++l) w.values[l] = 0.1 * static_cast<double>(l) - 0.3;
  w.round = 2;
  std::stringstream e1, e2, r1, r2, w1, w2;
  write_embeddings(e1, emb);
  write_embeddings(e2, read_embeddings(e1, "encoder"));
  write_reasoner(r1, params);
  write_reasoner(r2, read_reasoner(r1, "reasoner"));
  write_weights(w1, w, rules, kg);
  write_weights(w2, read_weights(w1, rules.size(), "weights"), rules, kg);
  const bool ok = e1.str() == e2.str() && r1.str() == r2.str() && w1.str() == w2.str();
  return {"checkpoint save/load/save is idempotent", ok, ok ? "byte-identical" : "round trip changed bytes"};
}

}  // namespace

std::vector<SelftestCheck> run_selftest(std::uint64_t seed) {
  const SynthDataset data = small_graph(seed);
  const KnowledgeGraph kg = add_reverse_relations(data.graph);
  const RuleSet rules = mine_rules(kg, 3, 1);
  std::vector<SelftestCheck> checks;
  const auto guarded = [&](const char* name, auto&& check) {
    try {
      checks.push_back(check());
    } catch (const Error& e) {
      checks.push_back({name, false, fmt::format("{}: {}", to_string(e.code()), e.what())});
    }
  };
  guarded("grounding counts", [&] { return check_groundings(kg, rules); });
  guarded("pseudolikelihood gradient", [&] { return check_pl_gradient(kg, rules, seed); });
  guarded("reasoner gradient", [&] { return check_reasoner_gradient(kg, rules, seed); });
  guarded("beam search", [&] { return check_beam(kg, rules, seed); });
  guarded("checkpoints", [&] { return check_checkpoints(kg, rules, seed); });
  return checks;
}

}  // namespace loger
