#include "loger/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <sstream>

#include <fmt/format.h>

#include "loger/error.hpp"

namespace loger {

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || text.empty()) {
    fail(ErrorCode::kConfig, fmt::format("`{}`: cannot parse `{}`", key, text));
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(value)) fail(ErrorCode::kConfig, fmt::format("`{}`: `{}` is not finite", key, text));
  }
  return value;
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(parse_number<std::size_t>(key, trim(part)));
  return out;
}

std::string format_list(const std::vector<PlantedRuleSpec>& planted) {
  std::string out;
  for (std::size_t k = 0; k < planted.size(); ++k) out += (k ? "," : "") + std::to_string(planted[k].length);
  return out;
}

PlantedRuleSpec planted_template(const SynthSpec& s) {
  return s.planted.empty() ? PlantedRuleSpec{} : s.planted.front();
}

struct Field {
  ConfigKey key;
  std::function<void(PipelineConfig&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

template <typename T, typename Access>
Field number(std::string name, std::string help, Access access) {
  return Field{{name, std::move(help)},
               [access, name](PipelineConfig& c, const std::string& v) { access(c) = parse_number<T>(name, v); },
               [access](const PipelineConfig& c) {
                 return fmt::format("{}", access(const_cast<PipelineConfig&>(c)));
               }};
}

template <typename Access>
Field text(std::string name, std::string help, Access access) {
  return Field{{name, std::move(help)},
               [access](PipelineConfig& c, const std::string& v) { access(c) = v; },
               [access](const PipelineConfig& c) { return access(const_cast<PipelineConfig&>(c)); }};
}

// Applies to every planted rule.
template <typename T, typename Member>
Field planted(std::string name, std::string help, Member member) {
  return Field{{name, std::move(help)},
               [member, name](PipelineConfig& c, const std::string& v) {
                 const T value = parse_number<T>(name, v);
                 for (PlantedRuleSpec& p : c.synth.planted) p.*member = value;
               },
               [member](const PipelineConfig& c) { return fmt::format("{}", planted_template(c.synth).*member); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(text("dataset", "dataset directory", [](PipelineConfig& c) -> std::string& { return c.dataset; }));
    f.push_back(text("output", "checkpoint directory", [](PipelineConfig& c) -> std::string& { return c.output; }));
    f.push_back(number<std::uint64_t>("seed", "master random seed", [](PipelineConfig& c) -> std::uint64_t& { return c.seed; }));
    f.push_back(number<double>("split.test_fraction", "share of each user's interactions held out",
                               [](PipelineConfig& c) -> double& { return c.test_fraction; }));
    f.push_back(number<std::size_t>("rules.max_length", "maximum rule body length",
                                    [](PipelineConfig& c) -> std::size_t& { return c.rule_length; }));
    f.push_back(number<std::uint64_t>("rules.min_support", "minimum grounding instances per mined rule",
                                      [](PipelineConfig& c) -> std::uint64_t& { return c.min_support; }));
    f.push_back(number<std::size_t>("encoder.dim", "embedding dimension d",
                                    [](PipelineConfig& c) -> std::size_t& { return c.encoder.dim; }));
    f.push_back(number<double>("encoder.gamma", "TransE margin gamma",
                               [](PipelineConfig& c) -> double& { return c.encoder.gamma; }));
    f.push_back(number<double>("encoder.lr", "encoder Adam learning rate",
                               [](PipelineConfig& c) -> double& { return c.encoder.learning_rate; }));
    f.push_back(number<std::size_t>("encoder.batch", "encoder batch size",
                                    [](PipelineConfig& c) -> std::size_t& { return c.encoder.batch_size; }));
    f.push_back(number<std::size_t>("encoder.epochs", "encoder epochs per training call",
                                    [](PipelineConfig& c) -> std::size_t& { return c.encoder.epochs; }));
    f.push_back(number<std::size_t>("encoder.negatives", "corrupted tails per positive",
                                    [](PipelineConfig& c) -> std::size_t& { return c.encoder.negatives; }));
    f.push_back(number<double>("logic.tau", "posterior threshold for H+",
                               [](PipelineConfig& c) -> double& { return c.logic.tau; }));
    f.push_back(number<double>("logic.alpha", "weight of the rule posterior in ranking",
                               [](PipelineConfig& c) -> double& { return c.logic.alpha; }));
    f.push_back(number<std::size_t>("logic.hidden_k", "encoder candidates per user (K)",
                                    [](PipelineConfig& c) -> std::size_t& { return c.logic.hidden_k; }));
    f.push_back(number<double>("logic.lr", "rule-weight learning rate",
                               [](PipelineConfig& c) -> double& { return c.logic.learning_rate; }));
    f.push_back(number<std::size_t>("logic.m_steps", "gradient steps per M-step",
                                    [](PipelineConfig& c) -> std::size_t& { return c.logic.m_steps; }));
    f.push_back(number<std::size_t>("logic.em_rounds", "EM rounds",
                                    [](PipelineConfig& c) -> std::size_t& { return c.logic.em_rounds; }));
    f.push_back(number<std::size_t>("reasoner.path_length", "maximum path length T",
                                    [](PipelineConfig& c) -> std::size_t& { return c.reasoner.path_length; }));
    f.push_back(number<std::size_t>("reasoner.beam", "neighbors kept per partial path (beta)",
                                    [](PipelineConfig& c) -> std::size_t& { return c.reasoner.beam; }));
    f.push_back(number<double>("reasoner.margin", "hinge margin",
                               [](PipelineConfig& c) -> double& { return c.reasoner.margin; }));
    f.push_back(number<std::size_t>("reasoner.epochs", "reasoner epochs",
                                    [](PipelineConfig& c) -> std::size_t& { return c.reasoner.epochs; }));
    f.push_back(number<double>("reasoner.lr", "reasoner Adam learning rate",
                               [](PipelineConfig& c) -> double& { return c.reasoner.learning_rate; }));
    f.push_back(number<std::size_t>("reasoner.batch", "reasoner batch size",
                                    [](PipelineConfig& c) -> std::size_t& { return c.reasoner.batch_size; }));
    f.push_back(number<std::size_t>("reasoner.paths_per_user", "training paths sampled per user",
                                    [](PipelineConfig& c) -> std::size_t& { return c.reasoner.paths_per_user; }));
    f.push_back(number<std::size_t>("reasoner.top_rules", "rules of y_u used for explanations (m)",
                                    [](PipelineConfig& c) -> std::size_t& { return c.reasoner.top_rules; }));
    f.push_back(number<double>("reasoner.epsilon", "weight floor when sampling training paths",
                               [](PipelineConfig& c) -> double& { return c.reasoner.epsilon; }));
    f.push_back(number<std::size_t>("metrics.k", "ranking cutoff K",
                                    [](PipelineConfig& c) -> std::size_t& { return c.metrics.k; }));
    f.push_back(number<std::size_t>("metrics.users", "users sampled for faithfulness",
                                    [](PipelineConfig& c) -> std::size_t& { return c.metrics.users; }));
    f.push_back(number<std::size_t>("metrics.train_paths", "training paths per user for F(u)",
                                    [](PipelineConfig& c) -> std::size_t& { return c.metrics.train_paths; }));
    f.push_back(number<std::size_t>("metrics.test_paths", "emitted paths per user for Q_f(u)",
                                    [](PipelineConfig& c) -> std::size_t& { return c.metrics.test_paths; }));
    f.push_back(number<std::size_t>("synth.users", "synthetic users",
                                    [](PipelineConfig& c) -> std::size_t& { return c.synth.users; }));
    f.push_back(number<std::size_t>("synth.items", "synthetic items",
                                    [](PipelineConfig& c) -> std::size_t& { return c.synth.items; }));
    f.push_back(Field{{"synth.rule_lengths", "comma-separated planted rule lengths"},
                      [](PipelineConfig& c, const std::string& v) {
                        const PlantedRuleSpec base = planted_template(c.synth);
                        c.synth.planted.clear();
                        for (const std::size_t len : parse_list("synth.rule_lengths", v)) {
                          PlantedRuleSpec p = base;
                          p.length = len;
                          c.synth.planted.push_back(p);
                        }
                      },
                      [](const PipelineConfig& c) { return format_list(c.synth.planted); }});
    f.push_back(planted<double>("synth.precision", "share of rule-grounded pairs made interactions",
                                &PlantedRuleSpec::precision));
    f.push_back(planted<std::size_t>("synth.pool_size", "attribute entities per planted hop",
                                     &PlantedRuleSpec::pool_size));
    f.push_back(planted<std::size_t>("synth.user_fanout", "attribute links per user", &PlantedRuleSpec::user_fanout));
    f.push_back(planted<std::size_t>("synth.item_fanout", "attribute links per item", &PlantedRuleSpec::item_fanout));
    f.push_back(number<std::size_t>("synth.decoys", "decoy relations",
                                    [](PipelineConfig& c) -> std::size_t& { return c.synth.decoy_relations; }));
    f.push_back(number<std::size_t>("synth.decoy_pool", "tag entities per decoy relation",
                                    [](PipelineConfig& c) -> std::size_t& { return c.synth.decoy_pool; }));
    f.push_back(number<double>("synth.noise", "random interaction rate per user-item pair",
                               [](PipelineConfig& c) -> double& { return c.synth.noise_rate; }));
    return f;
  }();
  return table;
}

const Field& field(const std::string& key) {
  for (const Field& f : fields()) {
    if (f.key.name == key) return f;
  }
  fail(ErrorCode::kConfig, "unknown configuration key `" + key + "`");
}

void require(bool ok, const std::string& message) {
  if (!ok) fail(ErrorCode::kConfig, message);
}

}  // namespace

void PipelineConfig::set(const std::string& key, const std::string& value) { field(key).set(*this, trim(value)); }

std::string PipelineConfig::get(const std::string& key) const { return field(key).get(*this); }

void PipelineConfig::apply(const KeyValues& kv) {
  for (const auto& [key, value] : kv) set(key, value);
}

void PipelineConfig::validate() const {
  require(test_fraction > 0.0 && test_fraction < 1.0, "split.test_fraction must lie in (0, 1)");
  require(rule_length >= 1 && rule_length <= 3, "rules.max_length must lie in [1, 3]");
  require(min_support >= 1, "rules.min_support must be at least 1");
  require(encoder.dim >= 1, "encoder.dim must be at least 1");
  require(encoder.gamma > 0.0, "encoder.gamma must be positive");
  require(encoder.learning_rate > 0.0, "encoder.lr must be positive");
  require(encoder.batch_size >= 1, "encoder.batch must be at least 1");
  require(encoder.negatives >= 1, "encoder.negatives must be at least 1");
  require(logic.tau >= 0.0 && logic.tau <= 1.0, "logic.tau must lie in [0, 1]");
  require(logic.alpha >= 0.0, "logic.alpha must be nonnegative");
  require(logic.learning_rate > 0.0, "logic.lr must be positive");
  require(logic.m_steps >= 1, "logic.m_steps must be at least 1");
  require(reasoner.path_length >= 1, "reasoner.path_length must be at least 1");
  require(reasoner.beam >= 1, "reasoner.beam must be at least 1");
  require(reasoner.margin > 0.0, "reasoner.margin must be positive");
  require(reasoner.learning_rate > 0.0, "reasoner.lr must be positive");
  require(reasoner.batch_size >= 1, "reasoner.batch must be at least 1");
  require(reasoner.top_rules >= 1, "reasoner.top_rules must be at least 1");
  require(reasoner.epsilon > 0.0, "reasoner.epsilon must be positive");
  require(metrics.k >= 1, "metrics.k must be at least 1");
  require(metrics.test_paths >= 1 && metrics.train_paths >= 1, "metrics path counts must be at least 1");
}

std::string PipelineConfig::dump() const {
  std::string out;
  for (const Field& f : fields()) out += f.key.name + " = " + f.get(*this) + "\n";
  return out;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
  PipelineConfig c;
  c.apply(read_key_values(path));
  return c;
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const Field& f : fields()) out.push_back(f.key);
    return out;
  }();
  return keys;
}

}  // namespace loger
