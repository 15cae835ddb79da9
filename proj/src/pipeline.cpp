#include "loger/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "loger/error.hpp"
#include "loger/io.hpp"

namespace loger {

namespace fs = std::filesystem;

namespace {

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create directory " + dir + ": " + ec.message());
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string part;
  while (std::getline(ss, part, '\t')) out.push_back(part);
  return out;
}

// Lines of a text file without trailing '\r'; blank lines skipped.
std::vector<std::pair<std::size_t, std::string>> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path);
  std::vector<std::pair<std::size_t, std::string>> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.emplace_back(n, line);
  }
  return out;
}

template <typename F>
auto staged(const char* stage, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const Error& e) {
    throw Error(e.code(), fmt::format("stage={}: {}", stage, e.what()));
  }
}

std::vector<Path> reasoner_training_paths(const KnowledgeGraph& kg, const Model& model,
                                          const EvidenceIndex& evidence, const PipelineConfig& config) {
  Rng rng(config.seed + 2);
  std::vector<Path> paths;
  for (const EntityId u : kg.users()) {
    auto p = sample_training_paths(kg, model.rules, evidence, u, model.weights.values,
                                   config.reasoner.paths_per_user, config.reasoner.epsilon, rng);
    paths.insert(paths.end(), std::make_move_iterator(p.begin()), std::make_move_iterator(p.end()));
  }
  return paths;
}

}  // namespace

std::string DatasetStats::table() const {
  return fmt::format("{:>8}  {:>8}  {:>14}  {:>10}  {:>11}  {:>10}\n{:>8}  {:>8}  {:>14}  {:>10}  {:>11}  {:>10}\n",
                     "#Users", "#Items", "#Interactions", "#Entities", "#Relations", "#Triples", users, items,
                     interactions, entities, relations, triples);
}

DatasetStats dataset_stats(const KnowledgeGraph& kg) {
  DatasetStats s;
  s.users = kg.users().size();
  s.items = kg.items().size();
  s.interactions = kg.has_interaction_relation() ? kg.num_interactions() : 0;
  s.entities = kg.num_entities();
  s.relations = kg.num_relations();
  s.triples = kg.num_triples();
  return s;
}

DatasetStats write_dataset(const std::string& dir, const Schema& schema, const KnowledgeGraph& forward,
                           double test_fraction, std::uint64_t seed) {
  if (forward.has_reverse()) fail(ErrorCode::kInternal, "write_dataset expects a forward graph");
  const KnowledgeGraph full = add_reverse_relations(forward);
  const InteractionSplit split = split_interactions(forward, test_fraction, seed);
  ensure_dir(dir);
  schema.save(join(dir, "schema.cfg"));

  std::string entities, relations;
  for (EntityId e = 0; e < forward.num_entities(); ++e) {
    entities += forward.entity_name(e) + "\t" + to_string(forward.entity_type(e)) + "\n";
  }
  for (RelationId r = 0; r < forward.num_forward_relations(); ++r) relations += forward.relation_name(r) + "\n";
  write_file(join(dir, "entities.tsv"), entities);
  write_file(join(dir, "relations.tsv"), relations);

  std::ostringstream train, test;
  write_triples(train, split.train, split.train.forward_triples());
  write_triples(test, forward, split.test);
  write_file(join(dir, "train.tsv"), train.str());
  write_file(join(dir, "test.tsv"), test.str());

  const DatasetStats stats = dataset_stats(full);
  write_file(join(dir, "stats.txt"), stats.table());
  return stats;
}

DatasetStats ingest(const std::string& triples_path, const std::string& schema_path,
                    const std::string& out_dir, double test_fraction, std::uint64_t seed) {
  const Schema schema = Schema::load(schema_path);
  const LoadResult loaded = load_triples(triples_path, schema);
  return write_dataset(out_dir, schema, loaded.graph, test_fraction, seed);
}

Dataset load_dataset(const std::string& dir) {
  Dataset data;
  data.schema = Schema::load(join(dir, "schema.cfg"));
  KnowledgeGraph::Builder builder(data.schema.interaction_relation);
  for (const auto& [n, line] : read_lines(join(dir, "entities.tsv"))) {
    const auto f = split_tabs(line);
    if (f.size() != 2) fail(ErrorCode::kParse, fmt::format("{}:{}: expected `name<TAB>type`", join(dir, "entities.tsv"), n));
    builder.add_entity(f[0], parse_entity_type(f[1]));
  }
  for (const auto& [n, line] : read_lines(join(dir, "relations.tsv"))) builder.add_relation(line);
  const std::size_t known_entities = builder.num_entities();
  const std::string train_path = join(dir, "train.tsv");
  for (const auto& [n, line] : read_lines(train_path)) {
    const auto f = split_tabs(line);
    if (f.size() != 3) fail(ErrorCode::kParse, fmt::format("{}:{}: expected three fields", train_path, n));
    builder.add_triple(f[0], data.schema.type_of(f[0]), f[1], f[2], data.schema.type_of(f[2]));
  }
  if (builder.num_entities() != known_entities) {
    fail(ErrorCode::kParse, train_path + ": references entities missing from entities.tsv");
  }
  const KnowledgeGraph forward = std::move(builder).build();
  data.train = add_reverse_relations(forward);

  const std::string test_path = join(dir, "test.tsv");
  const RelationId rui = data.train.interaction_relation();
  for (const auto& [n, line] : read_lines(test_path)) {
    const auto f = split_tabs(line);
    if (f.size() != 3) fail(ErrorCode::kParse, fmt::format("{}:{}: expected three fields", test_path, n));
    const auto h = data.train.find_entity(f[0]);
    const auto t = data.train.find_entity(f[2]);
    if (!h || !t || f[1] != data.train.relation_name(rui)) {
      fail(ErrorCode::kParse, fmt::format("{}:{}: unknown entity or non-interaction relation", test_path, n));
    }
    data.test.push_back(Triple{*h, rui, *t});
  }
  std::sort(data.test.begin(), data.test.end());
  return data;
}

TrainResult train_model(const Dataset& data, const PipelineConfig& config) {
  config.validate();
  const KnowledgeGraph& kg = data.train;
  TrainResult result;
  Model& model = result.model;
  auto& log = result.log;

  model.rules = staged("rules", [&] { return mine_rules(kg, config.rule_length, config.min_support); });
  log.push_back(fmt::format("stage=rules mined={} max_length={} min_support={}", model.rules.size(),
                            config.rule_length, config.min_support));
  for (RuleId l = 0; l < model.rules.size(); ++l) {
    log.push_back(fmt::format("stage=rules id={} support={} body=\"{}\"", l, model.rules[l].support,
                              rule_to_string(kg, model.rules[l])));
  }
  const EvidenceIndex evidence = staged("evidence", [&] { return EvidenceIndex(kg, model.rules); });

  staged("pretrain", [&] {
    model.encoder = init_embeddings(kg, config.encoder.dim, config.encoder.gamma, config.seed);
    Rng rng(config.seed);
    const EncoderTrainStats stats = train_encoder(model.encoder, kg, {}, config.encoder, rng);
    for (std::size_t e = 0; e < stats.epoch_loss.size(); ++e) {
      log.push_back(fmt::format("stage=pretrain epoch={} loss={:.9g}", e + 1, stats.epoch_loss[e]));
    }
    log.push_back(fmt::format("stage=pretrain mean_positive_score={:.9g}", stats.mean_positive_score));
  });
  result.pretrained = model.encoder;

  model.weights = RuleWeights::zeros(model.rules.size());
  staged("em", [&] {
    Rng rng(config.seed + 1);
    for (const EmRound& r : em_train(kg, evidence, model.encoder, model.weights, config.logic, config.encoder, rng)) {
      log.push_back(fmt::format(
          "stage=em round={} pl_before={:.9g} pl={:.9g} pl_terms={} hidden_candidates={} hidden_positive={} "
          "mean_positive_score={:.9g}",
          r.round, r.initial_pseudolikelihood, r.pseudolikelihood, r.pl_terms, r.hidden_candidates, r.hidden_positive, r.mean_positive_score));
    }
  });

  staged("reasoner", [&] {
    const std::vector<Path> paths = reasoner_training_paths(kg, model, evidence, config);
    log.push_back(fmt::format("stage=reasoner training_paths={}", paths.size()));
    if (paths.empty()) {
      log.push_back("stage=reasoner warning=\"no rule groundings; reasoner left at initialization\"");
      model.reasoner = init_reasoner(config.encoder.dim, kg.num_relations(), config.seed + 3);
      return;
    }
    ReasonerTrainStats stats;
    model.reasoner = train_reasoner(paths, model.encoder, kg, config.reasoner, config.seed + 3, &stats);
    for (std::size_t e = 0; e < stats.epoch_loss.size(); ++e) {
      log.push_back(fmt::format("stage=reasoner epoch={} loss={:.9g}", e + 1, stats.epoch_loss[e]));
    }
  });
  return result;
}

void save_model(const std::string& dir, const Model& model, const KnowledgeGraph& kg,
                std::span<const std::string> log) {
  ensure_dir(dir);
  save_rules(join(dir, "rules.txt"), model.rules, kg);
  save_embeddings(join(dir, "encoder.ckpt"), model.encoder);
  save_weights(join(dir, "weights.txt"), model.weights, model.rules, kg);
  save_reasoner(join(dir, "reasoner.ckpt"), model.reasoner);
  std::string text;
  for (const std::string& line : log) text += line + "\n";
  write_file(join(dir, "train.log"), text);
}

Model load_model(const std::string& dir, const KnowledgeGraph& kg) {
  Model model;
  model.rules = load_rules(join(dir, "rules.txt"), kg);
  model.encoder = load_embeddings(join(dir, "encoder.ckpt"));
  model.weights = load_weights(join(dir, "weights.txt"), model.rules.size());
  model.reasoner = load_reasoner(join(dir, "reasoner.ckpt"));
  if (static_cast<std::size_t>(model.encoder.entities.rows()) != kg.num_entities() ||
      static_cast<std::size_t>(model.encoder.relations.rows()) != kg.num_relations()) {
    fail(ErrorCode::kRange, dir + ": encoder checkpoint does not match the dataset");
  }
  if (model.reasoner.dim() != model.encoder.dim() || model.reasoner.num_relations() != kg.num_relations()) {
    fail(ErrorCode::kRange, dir + ": reasoner checkpoint does not match the encoder");
  }
  return model;
}

std::vector<UserRecommendation> recommend_users(const Dataset& data, const Model& model,
                                                const EvidenceIndex& evidence,
                                                std::span<const std::string> users, std::size_t topk,
                                                const PipelineConfig& config) {
  const KnowledgeGraph& kg = data.train;
  std::vector<UserRecommendation> out;
  for (const std::string& name : users) {
    UserRecommendation rec;
    rec.user = name;
    const auto u = kg.find_entity(name);
    if (!u || kg.entity_type(*u) != EntityType::kUser) {
      rec.error = "unknown user";
      out.push_back(std::move(rec));
      continue;
    }
    rec.items = recommend(model.encoder, model.weights.values, kg, evidence, *u, config.logic.alpha, topk);
    std::vector<EntityId> items;
    for (const ScoredItem& s : rec.items) items.push_back(s.item);
    const PersonalizedScores y = personalized_scores(model.weights.values, evidence.user_counts(*u));
    rec.explanations = explain(model.reasoner, model.encoder, kg, model.rules, *u, items, y,
                               config.reasoner.path_length, config.reasoner.beam, config.reasoner.top_rules);
    out.push_back(std::move(rec));
  }
  return out;
}

std::string format_recommendations(const KnowledgeGraph& kg, std::span<const UserRecommendation> recs) {
  std::string out;
  for (const UserRecommendation& r : recs) {
    if (r.error) {
      out += fmt::format("user={} error=\"{}\"\n", r.user, *r.error);
      continue;
    }
    for (std::size_t k = 0; k < r.items.size(); ++k) {
      const EntityId v = r.items[k].item;
      const auto it = r.explanations.find(v);
      const std::size_t n = it == r.explanations.end() ? 0 : it->second.size();
      out += fmt::format("user={} rank={} item={} score={:.6f} paths={}\n", r.user, k + 1, kg.entity_name(v),
                         r.items[k].score, n);
    }
  }
  return out;
}

std::string format_paths(const KnowledgeGraph& kg, std::span<const UserRecommendation> recs) {
  std::string out;
  for (const UserRecommendation& r : recs) {
    for (const ScoredItem& s : r.items) {
      const auto it = r.explanations.find(s.item);
      if (it == r.explanations.end()) continue;
      for (const Path& p : it->second) out += format_path(kg, p) + "\n";
    }
  }
  return out;
}

Recommendations rank_test_users(const Dataset& data, const EmbeddingTable& emb,
                                std::span<const double> w, const EvidenceIndex& evidence,
                                double alpha, std::size_t k) {
  Recommendations recs;
  std::set<EntityId> users;
  for (const Triple& t : data.test) users.insert(t.head);
  for (const EntityId u : users) {
    std::vector<EntityId>& list = recs[u];
    for (const ScoredItem& s : recommend(emb, w, data.train, evidence, u, alpha, k)) list.push_back(s.item);
  }
  return recs;
}

std::string EvaluationReport::text() const {
  std::string out;
  out += fmt::format("k = {}\nusers = {}\n", loger.k, loger.users.size());
  const auto block = [&](const char* name, const RankingReport& r) {
    out += fmt::format("{}.precision = {:.6f}\n{}.recall = {:.6f}\n{}.ndcg = {:.6f}\n{}.hr = {:.6f}\n", name,
                       r.precision, name, r.recall, name, r.ndcg, name, r.hit_rate);
  };
  block("loger", loger);
  block("random", random);
  out += fmt::format("faithfulness.users = {}\njs_f = {:.6f}\njs_w = {:.6f}\n", faithfulness.users.size(),
                     faithfulness.js_f, faithfulness.js_w);
  for (const std::string& w : faithfulness.warnings) out += "# warning: " + w + "\n";
  out += "\n";
  const std::vector<ReportRow> rows{{"LOGER", loger}, {"Random", random}};
  out += format_ranking_table(rows);
  out += fmt::format("\n{:<8}  {:>9}  {:>9}\n{:<8}  {:>9.4f}  {:>9.4f}\n", "Method", "JS_f", "JS_w", "LOGER",
                     faithfulness.js_f, faithfulness.js_w);
  return out;
}

EvaluationReport evaluate_model(const Dataset& data, const Model& model, const EvidenceIndex& evidence,
                                const PipelineConfig& config) {
  if (data.test.empty()) fail(ErrorCode::kEmpty, "the dataset has no test interactions");
  const KnowledgeGraph& kg = data.train;
  EvaluationReport report;
  report.loger = ranking_metrics(
      rank_test_users(data, model.encoder, model.weights.values, evidence, config.logic.alpha, config.metrics.k),
      data.test, config.metrics.k);
  report.random = random_baseline(kg, data.test, config.metrics.k);

  std::vector<EntityId> pool;
  for (const UserRanking& u : report.loger.users) pool.push_back(u.user);
  Rng rng(config.seed + 4);
  std::shuffle(pool.begin(), pool.end(), rng);
  if (pool.size() > config.metrics.users) pool.resize(config.metrics.users);
  std::sort(pool.begin(), pool.end());

  std::map<EntityId, std::vector<Path>> emitted;
  std::map<EntityId, PersonalizedScores> y;
  for (const EntityId u : pool) {
    y[u] = personalized_scores(model.weights.values, evidence.user_counts(u));
    std::vector<EntityId> items;
    for (const ScoredItem& s :
         recommend(model.encoder, model.weights.values, kg, evidence, u, config.logic.alpha, config.metrics.k)) {
      items.push_back(s.item);
    }
    const auto paths = explain(model.reasoner, model.encoder, kg, model.rules, u, items, y[u],
                               config.reasoner.path_length, config.reasoner.beam, config.reasoner.top_rules);
    std::vector<Path>& list = emitted[u];
    for (const EntityId v : items) {
      for (const Path& p : paths.at(v)) {
        if (list.size() < config.metrics.test_paths) list.push_back(p);
      }
    }
  }
  FaithfulnessConfig fc;
  fc.users = config.metrics.users;
  fc.train_paths = config.metrics.train_paths;
  fc.test_paths = config.metrics.test_paths;
  fc.seed = config.seed + 5;
  report.faithfulness = faithfulness_scores(kg, model.rules, evidence, emitted, y, fc);
  return report;
}

std::vector<SweepRow> sweep_hidden(const Dataset& data, const PipelineConfig& config,
                                   std::span<const std::size_t> sizes) {
  config.validate();
  if (data.test.empty()) fail(ErrorCode::kEmpty, "the dataset has no test interactions");
  const KnowledgeGraph& kg = data.train;
  const RuleSet rules = mine_rules(kg, config.rule_length, config.min_support);
  const EvidenceIndex evidence(kg, rules);
  EmbeddingTable pretrained = init_embeddings(kg, config.encoder.dim, config.encoder.gamma, config.seed);
  {
    Rng rng(config.seed);
    train_encoder(pretrained, kg, {}, config.encoder, rng);
  }
  std::vector<SweepRow> rows;
  for (const std::size_t k : sizes) {
    LogicConfig logic = config.logic;
    logic.hidden_k = k;
    EmbeddingTable emb = pretrained;
    RuleWeights w = RuleWeights::zeros(rules.size());
    Rng rng(config.seed + 1);
    staged("em", [&] { em_train(kg, evidence, emb, w, logic, config.encoder, rng); });
    rows.push_back({k, ranking_metrics(rank_test_users(data, emb, w.values, evidence, logic.alpha, config.metrics.k),
                                       data.test, config.metrics.k)});
  }
  return rows;
}

std::string format_sweep(std::span<const SweepRow> rows) {
  std::string out = fmt::format("{:>4}  {:>9}  {:>9}  {:>9}  {:>9}\n", "K", "Precision", "Recall", "NDCG", "HR");
  for (const SweepRow& r : rows) {
    out += fmt::format("{:>4}  {:>9.4f}  {:>9.4f}  {:>9.4f}  {:>9.4f}\n", r.hidden_k, r.ranking.precision,
                       r.ranking.recall, r.ranking.ndcg, r.ranking.hit_rate);
  }
  return out;
}

}  // namespace loger
