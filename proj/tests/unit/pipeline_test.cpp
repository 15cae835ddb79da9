#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "loger/error.hpp"
#include "loger/io.hpp"
#include "loger/pipeline.hpp"
#include "loger/synth.hpp"

using namespace loger;
namespace fs = std::filesystem;

namespace {

PipelineConfig small_config(const fs::path& root) {
  PipelineConfig c;
  c.dataset = (root / "data").string();
  c.output = (root / "model").string();
  c.seed = 3;
  c.min_support = 3;
  c.encoder.dim = 16;
  c.encoder.epochs = 10;
  c.encoder.learning_rate = 1e-2;
  c.encoder.batch_size = 64;
  c.logic.em_rounds = 2;
  c.logic.m_steps = 50;
  c.logic.learning_rate = 1e-3;
  c.logic.hidden_k = 10;
  c.reasoner.epochs = 2;
  c.reasoner.paths_per_user = 5;
  c.metrics.users = 10;
  c.metrics.train_paths = 200;
  return c;
}

SynthSpec small_spec() {
  SynthSpec s;
  s.users = 40;
  s.items = 20;
  s.planted = {PlantedRuleSpec{2, 6}, PlantedRuleSpec{3, 6}};
  s.decoy_relations = 2;
  s.decoy_pool = 10;
  s.holdout_fraction = 0.0;
  s.seed = 3;
  return s;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("dataset directory round trip and determinism") {
  TempDir tmp("loger_pipeline_dataset");
  const SynthDataset ds = generate(small_spec());
  const auto stats = write_dataset((tmp.path / "a").string(), ds.schema, ds.graph, 0.2, 5);
  write_dataset((tmp.path / "b").string(), ds.schema, ds.graph, 0.2, 5);
  for (const char* f : {"train.tsv", "test.tsv", "entities.tsv", "relations.tsv", "schema.cfg", "stats.txt"}) {
    CHECK(read_file((tmp.path / "a" / f).string()) == read_file((tmp.path / "b" / f).string()));
  }
  const auto table = stats.table();
  for (const char* col : {"#Users", "#Items", "#Interactions", "#Entities", "#Relations", "#Triples"}) {
    CHECK(table.find(col) != std::string::npos);
  }
  const Dataset data = load_dataset((tmp.path / "a").string());
  CHECK(data.train.has_reverse());
  CHECK(data.train.num_entities() == ds.graph.num_entities());
  CHECK(data.train.num_interactions() + data.test.size() == ds.graph.num_interactions());
  CHECK(stats.triples == 2 * ds.graph.num_triples());
  CHECK_THROWS_AS(load_dataset((tmp.path / "missing").string()), Error);
}

TEST_CASE("train, save, load, recommend and evaluate") {
  TempDir tmp("loger_pipeline_train");
  const SynthDataset ds = generate(small_spec());
  PipelineConfig config = small_config(tmp.path);
  write_dataset(config.dataset, ds.schema, ds.graph, 0.2, config.seed);
  const Dataset data = load_dataset(config.dataset);
  const TrainResult result = train_model(data, config);
  save_model(config.output, result.model, data.train, result.log);
  for (const char* f : {"rules.txt", "encoder.ckpt", "weights.txt", "reasoner.ckpt", "train.log"}) {
    CHECK(fs::exists(fs::path(config.output) / f));
  }
  std::size_t em_lines = 0;
  for (const std::string& line : result.log) em_lines += line.rfind("stage=em round=", 0) == 0 ? 1 : 0;
  CHECK(em_lines == 2);

  const Model model = load_model(config.output, data.train);
  CHECK(model.weights.values == result.model.weights.values);
  CHECK(model.encoder.entities == result.model.encoder.entities);
  const EvidenceIndex evidence(data.train, model.rules);

  const std::vector<std::string> users{"user:0", "user:1", "nobody:1"};
  const auto recs = recommend_users(data, model, evidence, users, 10, config);
  REQUIRE(recs.size() == 3);
  CHECK(recs[0].items.size() == 10);
  CHECK(recs[2].error.has_value());
  for (const auto& r : recs) {
    for (const auto& [item, paths] : r.explanations) {
      for (const Path& p : paths) {
        CHECK(path_in_graph(data.train, p));
        CHECK(p.target() == item);
      }
    }
  }
  CHECK(recommend_users(data, model, evidence, users, 1, config)[0].items.size() == 1);
  const std::string text = format_recommendations(data.train, recs);
  CHECK(text.find("user=nobody:1 error=\"unknown user\"") != std::string::npos);
  CHECK(text.find("user=user:0 rank=1 item=") != std::string::npos);

  const EvaluationReport report = evaluate_model(data, model, evidence, config);
  for (const double m : {report.loger.precision, report.loger.recall, report.loger.ndcg, report.loger.hit_rate,
                         report.random.hit_rate, report.faithfulness.js_f, report.faithfulness.js_w}) {
    CHECK(m >= 0.0);
    CHECK(m <= 1.0);
  }
  const std::string out = report.text();
  CHECK(out.find("js_f = ") != std::string::npos);
  CHECK(out.find("Method") != std::string::npos);
}

TEST_CASE("zero EM rounds keep the pretrained encoder and zero weights") {
  TempDir tmp("loger_pipeline_zero");
  const SynthDataset ds = generate(small_spec());
  PipelineConfig config = small_config(tmp.path);
  config.logic.em_rounds = 0;
  write_dataset(config.dataset, ds.schema, ds.graph, 0.2, config.seed);
  const Dataset data = load_dataset(config.dataset);
  const TrainResult result = train_model(data, config);
  CHECK(result.model.encoder.entities == result.pretrained.entities);
  for (const double w : result.model.weights.values) CHECK(w == 0.0);
  CHECK(result.model.weights.round == 0);
}

TEST_CASE("a truthful recommender reaches a hit rate of one") {
  TempDir tmp("loger_pipeline_oracle");
  const SynthDataset ds = generate(small_spec());
  PipelineConfig config = small_config(tmp.path);
  write_dataset(config.dataset, ds.schema, ds.graph, 0.2, config.seed);
  const Dataset data = load_dataset(config.dataset);
  Recommendations truth;
  for (const Triple& t : data.test) {
    if (truth[t.head].size() < 10) truth[t.head].push_back(t.tail);
  }
  CHECK(ranking_metrics(truth, data.test, 10).hit_rate == 1.0);
}

TEST_CASE("sweep over hidden sizes gives one row per size") {
  TempDir tmp("loger_pipeline_sweep");
  const SynthDataset ds = generate(small_spec());
  PipelineConfig config = small_config(tmp.path);
  config.logic.em_rounds = 1;
  write_dataset(config.dataset, ds.schema, ds.graph, 0.2, config.seed);
  const Dataset data = load_dataset(config.dataset);
  const std::vector<std::size_t> sizes{0, 10, 20};
  const auto rows = sweep_hidden(data, config, sizes);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].hidden_k == 0);
  const std::string table = format_sweep(rows);
  CHECK(std::count(table.begin(), table.end(), '\n') == 4);

  // K = 0 has an empty H+, i.e. the encoder-only ranking of the pretrained encoder refit on G.
  PipelineConfig encoder_only = config;
  encoder_only.logic.hidden_k = 0;
  const auto one = sweep_hidden(data, encoder_only, std::vector<std::size_t>{0});
  CHECK(one[0].ranking.ndcg == rows[0].ranking.ndcg);
}

TEST_CASE("train errors carry the stage and code") {
  KnowledgeGraph::Builder b("purchase");
  const EntityId u = b.add_entity("user:0", EntityType::kUser);
  const EntityId t = b.add_entity("tag:0", EntityType::kOther);
  b.add_triple(u, b.add_relation("likes"), t);
  Dataset data;
  data.train = add_reverse_relations(std::move(b).build());
  try {
    train_model(data, small_config(fs::temp_directory_path()));
    FAIL("training without interactions must throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kSchema);
    const std::string what = e.what();
    CHECK(what.rfind("stage=", 0) == 0);
    CHECK(what.find("purchase") != std::string::npos);
  }
}
