#include "loger/loger.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "loger/config.hpp"
#include "loger/error.hpp"
#include "loger/io.hpp"
#include "loger/pipeline.hpp"
#include "loger/selftest.hpp"
#include "loger/synth.hpp"

struct loger_config {
  loger::PipelineConfig value;
};

struct loger_model {
  loger::PipelineConfig config;
  loger::Dataset data;
  loger::Model model;
  loger::EvidenceIndex evidence;
};

namespace {

thread_local std::string g_last_error;

loger_status set_error(loger_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename F>
loger_status guard(F&& body) {
  try {
    g_last_error.clear();
    return body();
  } catch (const loger::Error& e) {
    return set_error(static_cast<loger_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(LOGER_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(LOGER_ERR_INTERNAL, e.what());
  }
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void emit(char** target, const std::string& s) {
  if (target) *target = dup(s);
}

#define LOGER_REQUIRE(cond, what) \
  if (!(cond)) return set_error(LOGER_ERR_ARGUMENT, what)

}  // namespace

extern "C" {

const char* loger_last_error(void) { return g_last_error.c_str(); }

const char* loger_status_name(loger_status status) {
  if (status == LOGER_ERR_ARGUMENT) return "argument";
  return loger::to_string(static_cast<loger::ErrorCode>(status));
}

void loger_string_free(char* s) { std::free(s); }

loger_status loger_config_new(loger_config** out) {
  LOGER_REQUIRE(out, "null output pointer");
  return guard([&] {
    *out = new loger_config{};
    return LOGER_OK;
  });
}

loger_status loger_config_load(const char* path, loger_config** out) {
  LOGER_REQUIRE(path && out, "null argument");
  return guard([&] {
    auto config = std::make_unique<loger_config>();
    config->value = loger::PipelineConfig::load(path);
    *out = config.release();
    return LOGER_OK;
  });
}

loger_status loger_config_set(loger_config* config, const char* key, const char* value) {
  LOGER_REQUIRE(config && key && value, "null argument");
  return guard([&] {
    config->value.set(key, value);
    return LOGER_OK;
  });
}

loger_status loger_config_get(const loger_config* config, const char* key, char** value) {
  LOGER_REQUIRE(config && key && value, "null argument");
  return guard([&] {
    *value = dup(config->value.get(key));
    return LOGER_OK;
  });
}

loger_status loger_config_dump(const loger_config* config, char** text) {
  LOGER_REQUIRE(config && text, "null argument");
  return guard([&] {
    *text = dup(config->value.dump());
    return LOGER_OK;
  });
}

loger_status loger_config_keys(char** text) {
  LOGER_REQUIRE(text, "null argument");
  return guard([&] {
    std::string out;
    for (const loger::ConfigKey& k : loger::config_keys()) out += k.name + "\t" + k.help + "\n";
    *text = dup(out);
    return LOGER_OK;
  });
}

void loger_config_free(loger_config* config) { delete config; }

loger_status loger_ingest(const loger_config* config, const char* triples_path, const char* schema_path,
                          char** stats) {
  LOGER_REQUIRE(config && triples_path && schema_path, "null argument");
  return guard([&] {
    const auto& c = config->value;
    c.validate();
    const loger::DatasetStats s = loger::ingest(triples_path, schema_path, c.dataset, c.test_fraction, c.seed);
    emit(stats, s.table());
    return LOGER_OK;
  });
}

loger_status loger_train(const loger_config* config, char** log) {
  LOGER_REQUIRE(config, "null argument");
  return guard([&] {
    const auto& c = config->value;
    const loger::Dataset data = loger::load_dataset(c.dataset);
    const loger::TrainResult result = loger::train_model(data, c);
    loger::save_model(c.output, result.model, data.train, result.log);
    std::string text;
    for (const std::string& line : result.log) text += line + "\n";
    emit(log, text);
    return LOGER_OK;
  });
}

loger_status loger_model_load(const loger_config* config, loger_model** out) {
  LOGER_REQUIRE(config && out, "null argument");
  return guard([&] {
    auto m = std::make_unique<loger_model>();
    m->config = config->value;
    m->config.validate();
    m->data = loger::load_dataset(m->config.dataset);
    m->model = loger::load_model(m->config.output, m->data.train);
    m->evidence = loger::EvidenceIndex(m->data.train, m->model.rules);
    *out = m.release();
    return LOGER_OK;
  });
}

void loger_model_free(loger_model* model) { delete model; }

loger_status loger_model_recommend(const loger_model* model, const char* users, size_t topk,
                                   char** recommendations, char** paths) {
  LOGER_REQUIRE(model && users, "null argument");
  LOGER_REQUIRE(topk >= 1, "topk must be at least 1");
  return guard([&] {
    std::vector<std::string> names;
    std::istringstream in(users);
    std::string line;
    while (std::getline(in, line)) {
      line = loger::trim(line);
      if (!line.empty()) names.push_back(line);
    }
    const auto recs = loger::recommend_users(model->data, model->model, model->evidence, names, topk, model->config);
    emit(recommendations, loger::format_recommendations(model->data.train, recs));
    emit(paths, loger::format_paths(model->data.train, recs));
    return LOGER_OK;
  });
}

loger_status loger_model_evaluate(const loger_model* model, char** report) {
  LOGER_REQUIRE(model && report, "null argument");
  return guard([&] {
    *report = dup(loger::evaluate_model(model->data, model->model, model->evidence, model->config).text());
    return LOGER_OK;
  });
}

loger_status loger_sweep_hidden(const loger_config* config, const size_t* sizes, size_t count, char** table) {
  LOGER_REQUIRE(config && sizes && table && count > 0, "null or empty argument");
  return guard([&] {
    const loger::Dataset data = loger::load_dataset(config->value.dataset);
    const std::vector<std::size_t> ks(sizes, sizes + count);
    *table = dup(loger::format_sweep(loger::sweep_hidden(data, config->value, ks)));
    return LOGER_OK;
  });
}

loger_status loger_synth(const loger_config* config, const char* out_dir, char** summary) {
  LOGER_REQUIRE(config && out_dir, "null argument");
  return guard([&] {
    loger::SynthSpec spec = config->value.synth;
    spec.seed = config->value.seed;
    spec.holdout_fraction = 0.0;
    const loger::SynthDataset ds = loger::generate(spec);
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) loger::fail(loger::ErrorCode::kIo, std::string("cannot create directory ") + out_dir);
    const std::filesystem::path dir(out_dir);
    std::ostringstream triples;
    loger::write_triples(triples, ds.graph, ds.graph.forward_triples());
    loger::write_file((dir / "triples.tsv").string(), triples.str());
    ds.schema.save((dir / "schema.cfg").string());
    const loger::KnowledgeGraph full = loger::add_reverse_relations(ds.graph);
    std::string planted, text;
    text += fmt::format("users = {}\nitems = {}\ninteractions = {}\ntriples = {}\n", ds.graph.users().size(),
                        ds.graph.items().size(), ds.graph.num_interactions(), ds.graph.num_triples());
    for (std::size_t k = 0; k < ds.planted.size(); ++k) {
      std::string body;
      for (const std::string& r : ds.planted[k]) body += (body.empty() ? "" : ",") + r;
      planted += body + "\n";
      const double precision = loger::measured_precision(full, loger::resolve_body(full, ds.planted[k]));
      text += fmt::format("planted.{} = {} precision={:.4f}\n", k, body, precision);
    }
    loger::write_file((dir / "planted.txt").string(), planted);
    emit(summary, text);
    return LOGER_OK;
  });
}

loger_status loger_selftest(uint64_t seed, char** report) {
  return guard([&] {
    bool ok = true;
    std::string text;
    for (const loger::SelftestCheck& c : loger::run_selftest(seed)) {
      ok = ok && c.passed;
      text += fmt::format("{} {} ({})\n", c.passed ? "PASS" : "FAIL", c.name, c.detail);
    }
    emit(report, text);
    return ok ? LOGER_OK : set_error(LOGER_ERR_INTERNAL, "self-test failed");
  });
}

}  // extern "C"
