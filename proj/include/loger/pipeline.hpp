#pragma once

// End-to-end orchestration: dataset directories, training, recommendation,
// evaluation and the hidden-set sweep.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "loger/config.hpp"
#include "loger/encoder.hpp"
#include "loger/kg.hpp"
#include "loger/logic.hpp"
#include "loger/metrics.hpp"
#include "loger/reasoner.hpp"
#include "loger/rules.hpp"

namespace loger {

struct DatasetStats {
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t interactions = 0;
  std::size_t entities = 0;
  std::size_t relations = 0;
  std::size_t triples = 0;

  // Two aligned lines: column names, then values.
  std::string table() const;
};

DatasetStats dataset_stats(const KnowledgeGraph& kg);

// Directory layout: schema.cfg, entities.tsv, relations.tsv, train.tsv, test.tsv, stats.txt.
struct Dataset {
  Schema schema;
  KnowledgeGraph train;  // reverse-augmented
  std::vector<Triple> test;
};

// Splits the forward graph and writes the directory. Returns statistics of the
// reverse-augmented full graph.
DatasetStats write_dataset(const std::string& dir, const Schema& schema, const KnowledgeGraph& forward,
                           double test_fraction, std::uint64_t seed);
DatasetStats ingest(const std::string& triples_path, const std::string& schema_path,
                    const std::string& out_dir, double test_fraction, std::uint64_t seed);
Dataset load_dataset(const std::string& dir);

struct Model {
  RuleSet rules;
  EmbeddingTable encoder;
  RuleWeights weights;
  ReasonerParams reasoner;
};

struct TrainResult {
  Model model;
  EmbeddingTable pretrained;      // encoder before any EM round
  std::vector<std::string> log;   // key=value records
};

// mine_rules, encoder pretraining, EM, then reasoner training. Errors are rethrown
// with a `stage=<name>` prefix and their original code.
TrainResult train_model(const Dataset& data, const PipelineConfig& config);

// rules.txt, encoder.ckpt, weights.txt, reasoner.ckpt, train.log
void save_model(const std::string& dir, const Model& model, const KnowledgeGraph& kg,
                std::span<const std::string> log);
Model load_model(const std::string& dir, const KnowledgeGraph& kg);

struct UserRecommendation {
  std::string user;
  std::optional<std::string> error;
  std::vector<ScoredItem> items;
  std::map<EntityId, std::vector<Path>> explanations;
};

std::vector<UserRecommendation> recommend_users(const Dataset& data, const Model& model,
                                                const EvidenceIndex& evidence,
                                                std::span<const std::string> users, std::size_t topk,
                                                const PipelineConfig& config);
// One `user=... rank=... item=... score=... paths=...` record per item; errors as `user=... error=...`.
std::string format_recommendations(const KnowledgeGraph& kg, std::span<const UserRecommendation> recs);
// One path per line in recommendation order.
std::string format_paths(const KnowledgeGraph& kg, std::span<const UserRecommendation> recs);

// Ranking lists for every user with test items.
Recommendations rank_test_users(const Dataset& data, const EmbeddingTable& emb,
                                std::span<const double> w, const EvidenceIndex& evidence,
                                double alpha, std::size_t k);

struct EvaluationReport {
  RankingReport loger;
  RankingReport random;
  FaithfulnessReport faithfulness;

  // key = value records followed by the aligned table.
  std::string text() const;
};

EvaluationReport evaluate_model(const Dataset& data, const Model& model, const EvidenceIndex& evidence,
                                const PipelineConfig& config);

struct SweepRow {
  std::size_t hidden_k = 0;
  RankingReport ranking;
};

// Reruns EM for each K from one shared pretraining; everything else fixed.
std::vector<SweepRow> sweep_hidden(const Dataset& data, const PipelineConfig& config,
                                   std::span<const std::size_t> sizes);
std::string format_sweep(std::span<const SweepRow> rows);

}  // namespace loger
