#include "loger/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "loger/error.hpp"

namespace loger {

namespace {

std::map<EntityId, std::set<EntityId>> group_test(std::span<const Triple> test) {
  std::map<EntityId, std::set<EntityId>> relevant;
  for (const Triple& t : test) relevant[t.head].insert(t.tail);
  return relevant;
}

double ideal_dcg(std::size_t relevant, std::size_t k) {
  double idcg = 0.0;
  for (std::size_t i = 1; i <= std::min(relevant, k); ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 1.0);
  return idcg;
}

void finish(RankingReport& report) {
  if (report.users.empty()) fail(ErrorCode::kEmpty, "no users with test interactions");
  for (const UserRanking& u : report.users) {
    report.precision += u.precision;
    report.recall += u.recall;
    report.ndcg += u.ndcg;
    report.hit_rate += u.hit;
  }
  const auto n = static_cast<double>(report.users.size());
  report.precision /= n;
  report.recall /= n;
  report.ndcg /= n;
  report.hit_rate /= n;
}

}  // namespace

RankingReport ranking_metrics(const Recommendations& recommendations, std::span<const Triple> test,
                              std::size_t k) {
  if (k == 0) fail(ErrorCode::kConfig, "K must be at least 1");
  RankingReport report;
  report.k = k;
  for (const auto& [user, list] : recommendations) {
    if (list.size() > k) {
      fail(ErrorCode::kRange, fmt::format("recommendation list of length {} exceeds K = {}", list.size(), k));
    }
  }
  static const std::vector<EntityId> kNone;
  for (const auto& [user, relevant] : group_test(test)) {
    const auto it = recommendations.find(user);
    const std::vector<EntityId>& list = it == recommendations.end() ? kNone : it->second;
    std::size_t hits = 0;
    double dcg = 0.0;
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (!relevant.contains(list[i])) continue;
      ++hits;
      dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    }
    UserRanking u;
    u.user = user;
    u.precision = static_cast<double>(hits) / static_cast<double>(k);
    u.recall = static_cast<double>(hits) / static_cast<double>(relevant.size());
    u.ndcg = dcg / ideal_dcg(relevant.size(), k);
    u.hit = hits > 0 ? 1.0 : 0.0;
    report.users.push_back(u);
  }
  finish(report);
  return report;
}

RankingReport random_baseline(const KnowledgeGraph& train, std::span<const Triple> test, std::size_t k) {
  if (k == 0) fail(ErrorCode::kConfig, "K must be at least 1");
  RankingReport report;
  report.k = k;
  const std::size_t num_items = train.items().size();
  for (const auto& [user, relevant] : group_test(test)) {
    const std::size_t owned = train.interactions_of(user).size();
    const std::size_t n = num_items - std::min(owned, num_items);
    const std::size_t r = std::min(relevant.size(), n);
    UserRanking u;
    u.user = user;
    if (n > 0 && r > 0) {
      const std::size_t picks = std::min(k, n);
      const double rate = static_cast<double>(r) / static_cast<double>(n);
      double miss_all = 1.0;
      for (std::size_t i = 0; i < picks; ++i) {
        miss_all *= static_cast<double>(n - r >= i ? n - r - i : 0) / static_cast<double>(n - i);
      }
      double dcg = 0.0;
      for (std::size_t i = 1; i <= picks; ++i) dcg += rate / std::log2(static_cast<double>(i) + 1.0);
      u.precision = rate * static_cast<double>(picks) / static_cast<double>(k);
      u.recall = rate * static_cast<double>(picks) / static_cast<double>(relevant.size());
      u.ndcg = dcg / ideal_dcg(relevant.size(), k);
      u.hit = 1.0 - miss_all;
    }
    report.users.push_back(u);
  }
  finish(report);
  return report;
}

RuleDistribution rule_distribution(std::span<const Path> paths, const RuleSet& rules) {
  if (paths.empty()) fail(ErrorCode::kEmpty, "rule distribution of an empty path set");
  std::map<RuleId, std::size_t> counts;
  for (const Path& p : paths) {
    if (!p.rule || *p.rule >= rules.size()) fail(ErrorCode::kRange, "path carries no valid rule id");
    ++counts[*p.rule];
  }
  RuleDistribution dist;
  for (const auto& [rule, c] : counts) {
    dist[rule] = static_cast<double>(c) / static_cast<double>(paths.size());
  }
  return dist;
}

RuleDistribution weight_distribution(const PersonalizedScores& y) {
  double total = 0.0;
  for (const RuleScore& s : y.scores) total += std::max(s.score, 0.0);
  if (!(total > 0.0)) fail(ErrorCode::kEmpty, "personalized rule scores have no positive mass");
  RuleDistribution dist;
  for (const RuleScore& s : y.scores) {
    if (s.score > 0.0) dist[s.rule] = s.score / total;
  }
  return dist;
}

double js_divergence(const RuleDistribution& p, const RuleDistribution& q) {
  std::set<RuleId> support;
  for (const auto& [r, v] : p) support.insert(r);
  for (const auto& [r, v] : q) support.insert(r);
  const auto at = [](const RuleDistribution& d, RuleId r) {
    const auto it = d.find(r);
    return it == d.end() ? 0.0 : it->second;
  };
  double js = 0.0;
  for (const RuleId r : support) {
    const double a = at(p, r);
    const double b = at(q, r);
    const double m = 0.5 * (a + b);
    const double ta = a > 0.0 ? a * std::log2(a / m) : 0.0;
    const double tb = b > 0.0 ? b * std::log2(b / m) : 0.0;
    js += 0.5 * (ta + tb);
  }
  return std::clamp(js, 0.0, 1.0);
}

std::vector<Path> sample_grounding_paths(const KnowledgeGraph& kg, const RuleSet& rules,
                                         const EvidenceIndex& evidence, EntityId u, std::size_t n,
                                         std::uint64_t seed) {
  std::vector<Path> out;
  const GroundingSampler sampler(kg, rules, evidence, u);
  if (sampler.total() == 0) return out;
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(u)};
  Rng rng(seq);
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) out.push_back(sampler.sample_any(rng));
  return out;
}

FaithfulnessReport faithfulness_scores(const KnowledgeGraph& kg, const RuleSet& rules,
                                       const EvidenceIndex& evidence,
                                       const std::map<EntityId, std::vector<Path>>& test_paths,
                                       const std::map<EntityId, PersonalizedScores>& y,
                                       const FaithfulnessConfig& config) {
  std::vector<EntityId> pool;
  for (const auto& [u, paths] : test_paths) pool.push_back(u);
  Rng rng(config.seed);
  std::shuffle(pool.begin(), pool.end(), rng);
  if (pool.size() > config.users) pool.resize(config.users);
  std::sort(pool.begin(), pool.end());

  FaithfulnessReport report;
  for (const EntityId u : pool) {
    const std::string name = kg.entity_name(u);
    const std::vector<Path>& emitted = test_paths.at(u);
    if (emitted.empty()) {
      report.warnings.push_back("user " + name + " skipped: no test paths");
      continue;
    }
    const auto yu = y.find(u);
    if (yu == y.end() || std::none_of(yu->second.scores.begin(), yu->second.scores.end(),
                                      [](const RuleScore& s) { return s.score > 0.0; })) {
      report.warnings.push_back("user " + name + " skipped: no positive rule scores");
      continue;
    }
    const std::vector<Path> train = sample_grounding_paths(kg, rules, evidence, u, config.train_paths, config.seed);
    if (train.empty()) {
      report.warnings.push_back("user " + name + " skipped: no training paths");
      continue;
    }
    const RuleDistribution f = rule_distribution(train, rules);
    const std::size_t m = std::min(config.test_paths, emitted.size());
    const RuleDistribution qf = rule_distribution(std::span<const Path>(emitted).first(m), rules);
    const RuleDistribution qw = weight_distribution(yu->second);
    report.users.push_back({u, js_divergence(qf, f), js_divergence(qw, f)});
  }
  if (report.users.empty()) fail(ErrorCode::kEmpty, "no user qualifies for the faithfulness scores");
  for (const UserFaithfulness& u : report.users) {
    report.js_f += u.js_f;
    report.js_w += u.js_w;
  }
  report.js_f /= static_cast<double>(report.users.size());
  report.js_w /= static_cast<double>(report.users.size());
  return report;
}

std::string format_ranking_table(std::span<const ReportRow> rows) {
  std::size_t width = 6;
  for (const ReportRow& r : rows) width = std::max(width, r.method.size());
  std::string out = fmt::format("{:<{}}  {:>9}  {:>9}  {:>9}  {:>9}\n", "Method", width, "Precision",
                                "Recall", "NDCG", "HR");
  for (const ReportRow& r : rows) {
    out += fmt::format("{:<{}}  {:>9.4f}  {:>9.4f}  {:>9.4f}  {:>9.4f}\n", r.method, width,
                       r.ranking.precision, r.ranking.recall, r.ranking.ndcg, r.ranking.hit_rate);
  }
  return out;
}

}  // namespace loger
