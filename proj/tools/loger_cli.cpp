// Command-line front end. Links only the C interface.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "loger/loger.h"

namespace {

// Owns a string returned by the library.
struct Text {
  char* ptr = nullptr;
  ~Text() { loger_string_free(ptr); }
  std::string str() const { return ptr ? std::string(ptr) : std::string(); }
};

struct ConfigHandle {
  loger_config* ptr = nullptr;
  ~ConfigHandle() { loger_config_free(ptr); }
};

struct ModelHandle {
  loger_model* ptr = nullptr;
  ~ModelHandle() { loger_model_free(ptr); }
};

int report(loger_status status) {
  if (status != LOGER_OK) {
    std::cerr << "error[" << loger_status_name(status) << "]: " << loger_last_error() << "\n";
  }
  return static_cast<int>(status);
}

bool write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return true;
  }
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out.good()) {
    std::cerr << "error[io]: cannot write " << path << "\n";
    return false;
  }
  return true;
}

std::vector<std::pair<std::string, std::string>> key_list() {
  std::vector<std::pair<std::string, std::string>> keys;
  Text text;
  if (loger_config_keys(&text.ptr) != LOGER_OK) return keys;
  std::istringstream in(text.str());
  std::string line;
  while (std::getline(in, line)) {
    const auto tab = line.find('\t');
    if (tab == std::string::npos) continue;
    keys.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return keys;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge-graph recommender with learned composition rules and path explanations"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  app.add_option("--config", config_path, "Configuration file (flat key = value)")->check(CLI::ExistingFile);

  const auto keys = key_list();
  std::map<std::string, std::string> overrides;
  std::vector<std::pair<std::string, CLI::Option*>> key_options;
  for (const auto& [name, help] : keys) {
    key_options.emplace_back(name, app.add_option("--" + name, overrides[name], help)->group("Configuration keys"));
  }

  auto* ingest = app.add_subcommand("ingest", "Load triples and a schema, split, write the dataset directory");
  std::string triples_path, schema_path;
  ingest->add_option("--triples", triples_path, "TSV triples file")->required();
  ingest->add_option("--schema", schema_path, "Schema config file")->required();

  auto* train = app.add_subcommand("train", "Mine rules, train encoder, EM and reasoner; write checkpoints");

  auto* recommend = app.add_subcommand("recommend", "Top-k items and explanation paths per user");
  std::vector<std::string> users;
  std::string users_file, recs_out, paths_out;
  std::size_t topk = 10;
  recommend->add_option("--users", users, "User entity names");
  recommend->add_option("--users-file", users_file, "File with one user name per line")->check(CLI::ExistingFile);
  recommend->add_option("--topk", topk, "Items per user")->check(CLI::PositiveNumber);
  recommend->add_option("--out", recs_out, "Recommendations output (default stdout)");
  recommend->add_option("--paths", paths_out, "Explanation paths output");

  auto* evaluate = app.add_subcommand("evaluate", "Ranking and faithfulness report on the test split");
  std::string report_out;
  evaluate->add_option("--out", report_out, "Report output (default stdout)");

  auto* sweep = app.add_subcommand("sweep-hidden", "Rerun EM per hidden-set size and tabulate metrics");
  std::vector<std::size_t> sizes{10, 20, 30, 40, 50};
  std::string sweep_out;
  sweep->add_option("--sizes", sizes, "Hidden-set sizes")->delimiter(',');
  sweep->add_option("--out", sweep_out, "Table output (default stdout)");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic graph with planted rules");
  std::string synth_out;
  synth->add_option("--out", synth_out, "Output directory")->required();

  app.add_subcommand("selftest", "Run the built-in oracle checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : LOGER_ERR_ARGUMENT;
  }

  ConfigHandle config;
  loger_status status = config_path.empty() ? loger_config_new(&config.ptr)
                                            : loger_config_load(config_path.c_str(), &config.ptr);
  if (status != LOGER_OK) return report(status);
  for (const auto& [name, option] : key_options) {
    if (option->count() == 0) continue;
    status = loger_config_set(config.ptr, name.c_str(), overrides[name].c_str());
    if (status != LOGER_OK) return report(status);
  }

  if (ingest->parsed()) {
    Text stats;
    status = loger_ingest(config.ptr, triples_path.c_str(), schema_path.c_str(), &stats.ptr);
    if (status == LOGER_OK) std::cout << stats.str();
    return report(status);
  }
  if (train->parsed()) {
    Text log;
    status = loger_train(config.ptr, &log.ptr);
    if (status == LOGER_OK) std::cout << log.str();
    return report(status);
  }
  if (recommend->parsed()) {
    std::string names;
    for (const std::string& u : users) names += u + "\n";
    if (!users_file.empty()) {
      std::ifstream in(users_file);
      names += std::string(std::istreambuf_iterator<char>(in), {});
      names += "\n";
    }
    if (names.empty()) {
      std::cerr << "error[argument]: no users given (--users or --users-file)\n";
      return LOGER_ERR_ARGUMENT;
    }
    ModelHandle model;
    status = loger_model_load(config.ptr, &model.ptr);
    if (status != LOGER_OK) return report(status);
    Text recs, paths;
    status = loger_model_recommend(model.ptr, names.c_str(), topk, &recs.ptr, &paths.ptr);
    if (status != LOGER_OK) return report(status);
    if (!write_output(recs_out, recs.str())) return LOGER_ERR_IO;
    if (!paths_out.empty() && !write_output(paths_out, paths.str())) return LOGER_ERR_IO;
    return LOGER_OK;
  }
  if (evaluate->parsed()) {
    ModelHandle model;
    status = loger_model_load(config.ptr, &model.ptr);
    if (status != LOGER_OK) return report(status);
    Text text;
    status = loger_model_evaluate(model.ptr, &text.ptr);
    if (status != LOGER_OK) return report(status);
    return write_output(report_out, text.str()) ? LOGER_OK : LOGER_ERR_IO;
  }
  if (sweep->parsed()) {
    Text table;
    status = loger_sweep_hidden(config.ptr, sizes.data(), sizes.size(), &table.ptr);
    if (status != LOGER_OK) return report(status);
    return write_output(sweep_out, table.str()) ? LOGER_OK : LOGER_ERR_IO;
  }
  if (synth->parsed()) {
    Text summary;
    status = loger_synth(config.ptr, synth_out.c_str(), &summary.ptr);
    if (status == LOGER_OK) std::cout << summary.str();
    return report(status);
  }
  Text seed_text;
  if (loger_config_get(config.ptr, "seed", &seed_text.ptr) != LOGER_OK) return report(LOGER_ERR_INTERNAL);
  Text text;
  status = loger_selftest(std::stoull(seed_text.str()), &text.ptr);
  std::cout << text.str();
  return report(status);
}
