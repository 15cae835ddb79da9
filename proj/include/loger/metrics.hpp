#pragma once

// Top-K ranking metrics and rule-distribution faithfulness scores.

#include <map>
#include <span>
#include <string>
#include <vector>

#include "loger/kg.hpp"
#include "loger/logic.hpp"
#include "loger/path.hpp"
#include "loger/rules.hpp"

namespace loger {

struct UserRanking {
  EntityId user = 0;
  double precision = 0.0;
  double recall = 0.0;
  double ndcg = 0.0;
  double hit = 0.0;
};

struct RankingReport {
  std::size_t k = 10;
  std::vector<UserRanking> users;  // users with at least one test item, ascending id
  double precision = 0.0;
  double recall = 0.0;
  double ndcg = 0.0;
  double hit_rate = 0.0;
};

using Recommendations = std::map<EntityId, std::vector<EntityId>>;

// Macro averages over users with test items; such users without a list score 0.
// Throws kConfig for k = 0, kRange for lists longer than k, kEmpty without test items.
RankingReport ranking_metrics(const Recommendations& recommendations, std::span<const Triple> test,
                              std::size_t k = 10);

// Expected metrics of a uniformly random ranking of each user's unobserved items.
RankingReport random_baseline(const KnowledgeGraph& train, std::span<const Triple> test,
                              std::size_t k = 10);

// Rule id -> probability; entries are positive and sum to 1.
using RuleDistribution = std::map<RuleId, double>;

// Normalized rule histogram. Throws kEmpty for no paths, kRange for a path without
// a rule id in `rules`.
RuleDistribution rule_distribution(std::span<const Path> paths, const RuleSet& rules);

// max(y, 0) normalized. Throws kEmpty when no score is positive.
RuleDistribution weight_distribution(const PersonalizedScores& y);

// Base-2 Jensen-Shannon divergence; missing rules have probability 0.
double js_divergence(const RuleDistribution& p, const RuleDistribution& q);

// Uniform draws, with replacement, over the groundings closing on u's observed
// interactions. Deterministic in (seed, u).
std::vector<Path> sample_grounding_paths(const KnowledgeGraph& kg, const RuleSet& rules,
                                         const EvidenceIndex& evidence, EntityId u, std::size_t n,
                                         std::uint64_t seed);

struct FaithfulnessConfig {
  std::size_t users = 50;
  std::size_t train_paths = 1000;
  std::size_t test_paths = 20;
  std::uint64_t seed = 0;
};

struct UserFaithfulness {
  EntityId user = 0;
  double js_f = 0.0;
  double js_w = 0.0;
};

struct FaithfulnessReport {
  double js_f = 0.0;
  double js_w = 0.0;
  std::vector<UserFaithfulness> users;
  std::vector<std::string> warnings;  // skipped users
};

// JS_f = mean_u JS(Q_f(u), F(u)) and JS_w = mean_u JS(Q_w(u), F(u)) over up to
// config.users users drawn from the keys of test_paths. Q_f uses the first
// config.test_paths emitted paths. Users lacking training paths, test paths or a
// positive y_u are skipped with a warning. Throws kEmpty when every user is skipped.
FaithfulnessReport faithfulness_scores(const KnowledgeGraph& kg, const RuleSet& rules,
                                       const EvidenceIndex& evidence,
                                       const std::map<EntityId, std::vector<Path>>& test_paths,
                                       const std::map<EntityId, PersonalizedScores>& y,
                                       const FaithfulnessConfig& config);

struct ReportRow {
  std::string method;
  RankingReport ranking;
};

// Aligned plain-text table: Method, Precision, Recall, NDCG, HR.
std::string format_ranking_table(std::span<const ReportRow> rows);

}  // namespace loger
