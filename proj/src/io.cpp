#include "loger/io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "loger/error.hpp"
#include "loger/kv.hpp"

namespace loger {

namespace {

constexpr const char* kEncoderMagic = "loger-encoder 1";
constexpr const char* kReasonerMagic = "loger-reasoner 1";

void put_doubles(std::ostream& out, const double* data, std::size_t n) {
  std::array<char, 8> bytes{};
  for (std::size_t i = 0; i < n; ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(data[i]);
    for (std::size_t b = 0; b < 8; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xffu);
    out.write(bytes.data(), 8);
  }
}

void get_doubles(std::istream& in, double* data, std::size_t n, const std::string& source) {
  std::array<char, 8> bytes{};
  for (std::size_t i = 0; i < n; ++i) {
    if (!in.read(bytes.data(), 8)) fail(ErrorCode::kParse, source + ": truncated checkpoint payload");
    std::uint64_t bits = 0;
    for (std::size_t b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[b])) << (8 * b);
    data[i] = std::bit_cast<double>(bits);
  }
}

// Reads the magic line and `key = value` records up to `end`.
KeyValues read_header(std::istream& in, const char* magic, const std::string& source) {
  std::string line;
  if (!std::getline(in, line) || line != magic) {
    fail(ErrorCode::kParse, source + ": expected checkpoint header `" + magic + "`");
  }
  std::ostringstream body;
  while (std::getline(in, line)) {
    if (line == "end") {
      std::istringstream records(body.str());
      return parse_key_values(records, source);
    }
    body << line << '\n';
  }
  fail(ErrorCode::kParse, source + ": checkpoint header has no `end` line");
}

std::uint64_t header_uint(const KeyValues& kv, const std::string& key, const std::string& source) {
  const auto it = kv.find(key);
  if (it == kv.end()) fail(ErrorCode::kParse, source + ": checkpoint header lacks `" + key + "`");
  try {
    std::size_t pos = 0;
    const auto v = std::stoull(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    fail(ErrorCode::kParse, source + ": bad integer for `" + key + "`");
  }
}

double header_double(const KeyValues& kv, const std::string& key, const std::string& source) {
  const auto it = kv.find(key);
  if (it == kv.end()) fail(ErrorCode::kParse, source + ": checkpoint header lacks `" + key + "`");
  try {
    std::size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    fail(ErrorCode::kParse, source + ": bad number for `" + key + "`");
  }
}

std::ifstream open_in(const std::string& path, bool binary) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path);
  return in;
}

std::ofstream open_out(const std::string& path, bool binary) {
  std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path);
  return out;
}

void close_out(std::ofstream& out, const std::string& path) {
  out.close();
  if (!out) fail(ErrorCode::kIo, "failed writing " + path);
}

template <typename M>
void put_matrix(std::ostream& out, const M& m) {
  put_doubles(out, m.data(), static_cast<std::size_t>(m.size()));
}

template <typename M>
void get_matrix(std::istream& in, M& m, const std::string& source) {
  get_doubles(in, m.data(), static_cast<std::size_t>(m.size()), source);
}

}  // namespace

void write_embeddings(std::ostream& out, const EmbeddingTable& emb) {
  out << kEncoderMagic << '\n'
      << "entities = " << emb.entities.rows() << '\n'
      << "relations = " << emb.relations.rows() << '\n'
      << "dim = " << emb.dim() << '\n'
      << fmt::format("gamma = {:.17g}\n", emb.gamma) << "seed = " << emb.seed << '\n'
      << "epochs_trained = " << emb.epochs_trained << '\n'
      << "encoding = f64le row-major entities then relations\n"
      << "end\n";
  put_matrix(out, emb.entities);
  put_matrix(out, emb.relations);
}

EmbeddingTable read_embeddings(std::istream& in, const std::string& source) {
  const KeyValues kv = read_header(in, kEncoderMagic, source);
  EmbeddingTable emb;
  const auto ne = static_cast<Eigen::Index>(header_uint(kv, "entities", source));
  const auto nr = static_cast<Eigen::Index>(header_uint(kv, "relations", source));
  const auto d = static_cast<Eigen::Index>(header_uint(kv, "dim", source));
  emb.gamma = header_double(kv, "gamma", source);
  emb.seed = header_uint(kv, "seed", source);
  emb.epochs_trained = header_uint(kv, "epochs_trained", source);
  emb.entities.resize(ne, d);
  emb.relations.resize(nr, d);
  get_matrix(in, emb.entities, source);
  get_matrix(in, emb.relations, source);
  if (!emb.entities.allFinite() || !emb.relations.allFinite()) {
    fail(ErrorCode::kNumeric, source + ": embeddings contain non-finite values");
  }
  return emb;
}

void save_embeddings(const std::string& path, const EmbeddingTable& emb) {
  auto out = open_out(path, true);
  write_embeddings(out, emb);
  close_out(out, path);
}

EmbeddingTable load_embeddings(const std::string& path) {
  auto in = open_in(path, true);
  return read_embeddings(in, path);
}

void write_reasoner(std::ostream& out, const ReasonerParams& p) {
  p.validate();
  out << kReasonerMagic << '\n'
      << "dim = " << p.dim() << '\n'
      << "relations = " << p.num_relations() << '\n'
      << "encoding = f64le row-major w_alpha b_alpha w_i b_i w_c b_c w_o b_o\n"
      << "end\n";
  put_matrix(out, p.w_alpha);
  put_matrix(out, p.b_alpha);
  put_matrix(out, p.w_i);
  put_matrix(out, p.b_i);
  put_matrix(out, p.w_c);
  put_matrix(out, p.b_c);
  put_matrix(out, p.w_o);
  put_matrix(out, p.b_o);
}

ReasonerParams read_reasoner(std::istream& in, const std::string& source) {
  const KeyValues kv = read_header(in, kReasonerMagic, source);
  const auto d = static_cast<Eigen::Index>(header_uint(kv, "dim", source));
  const auto nr = static_cast<Eigen::Index>(header_uint(kv, "relations", source));
  if (d == 0 || nr == 0) fail(ErrorCode::kParse, source + ": empty reasoner shape");
  ReasonerParams p;
  p.w_alpha.resize(nr, d);
  p.b_alpha.resize(nr);
  p.w_i.resize(d, 2 * d);
  p.b_i.resize(d);
  p.w_c.resize(d, 2 * d);
  p.b_c.resize(d);
  p.w_o.resize(d, 3 * d);
  p.b_o.resize(d);
  get_matrix(in, p.w_alpha, source);
  get_matrix(in, p.b_alpha, source);
  get_matrix(in, p.w_i, source);
  get_matrix(in, p.b_i, source);
  get_matrix(in, p.w_c, source);
  get_matrix(in, p.b_c, source);
  get_matrix(in, p.w_o, source);
  get_matrix(in, p.b_o, source);
  p.validate();
  return p;
}

void save_reasoner(const std::string& path, const ReasonerParams& params) {
  auto out = open_out(path, true);
  write_reasoner(out, params);
  close_out(out, path);
}

ReasonerParams load_reasoner(const std::string& path) {
  auto in = open_in(path, true);
  return read_reasoner(in, path);
}

void write_weights(std::ostream& out, const RuleWeights& w, const RuleSet& rules, const KnowledgeGraph& kg) {
  if (w.values.size() != rules.size()) fail(ErrorCode::kRange, "weight count does not match the rule set");
  out << "round = " << w.round << '\n' << "rules = " << w.values.size() << '\n';
  for (std::size_t l = 0; l < w.values.size(); ++l) {
    out << fmt::format("{}\t{:.17g}\t{}\n", l, w.values[l], rule_to_string(kg, rules[static_cast<RuleId>(l)]));
  }
}

RuleWeights read_weights(std::istream& in, std::size_t num_rules, const std::string& source) {
  RuleWeights w;
  w.values.assign(num_rules, 0.0);
  std::vector<bool> seen(num_rules, false);
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::size_t> declared;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto where = fmt::format("{}:{}", source, line_no);
    if (t.find('\t') == std::string::npos) {
      const auto eq = t.find('=');
      if (eq == std::string::npos) fail(ErrorCode::kParse, where + ": expected `key = value`");
      const std::string key = trim(t.substr(0, eq));
      const std::string value = trim(t.substr(eq + 1));
      try {
        if (key == "round") {
          w.round = std::stoull(value);
        } else if (key == "rules") {
          declared = std::stoull(value);
        } else {
          fail(ErrorCode::kParse, where + ": unknown key `" + key + "`");
        }
      } catch (const std::invalid_argument&) {
        fail(ErrorCode::kParse, where + ": bad integer");
      } catch (const std::out_of_range&) {
        fail(ErrorCode::kParse, where + ": integer out of range");
      }
      continue;
    }
    std::istringstream fields(t);
    std::string id_text, weight_text;
    std::getline(fields, id_text, '\t');
    std::getline(fields, weight_text, '\t');
    std::size_t id = 0;
    double weight = 0.0;
    try {
      id = std::stoull(id_text);
      weight = std::stod(weight_text);
    } catch (const std::exception&) {
      fail(ErrorCode::kParse, where + ": expected `id<TAB>weight<TAB>rule`");
    }
    if (id >= num_rules) fail(ErrorCode::kRange, where + ": rule id beyond the rule set");
    if (!std::isfinite(weight)) fail(ErrorCode::kNumeric, where + ": non-finite weight");
    w.values[id] = weight;
    seen[id] = true;
  }
  if (declared && *declared != num_rules) {
    fail(ErrorCode::kRange, source + ": weights are for a rule set of a different size");
  }
  for (std::size_t l = 0; l < num_rules; ++l) {
    if (!seen[l]) fail(ErrorCode::kParse, fmt::format("{}: missing weight for rule {}", source, l));
  }
  return w;
}

void save_weights(const std::string& path, const RuleWeights& w, const RuleSet& rules, const KnowledgeGraph& kg) {
  auto out = open_out(path, false);
  write_weights(out, w, rules, kg);
  close_out(out, path);
}

RuleWeights load_weights(const std::string& path, std::size_t num_rules) {
  auto in = open_in(path, false);
  return read_weights(in, num_rules, path);
}

void save_rules(const std::string& path, const RuleSet& rules, const KnowledgeGraph& kg) {
  auto out = open_out(path, false);
  rules.write(out, kg);
  close_out(out, path);
}

RuleSet load_rules(const std::string& path, const KnowledgeGraph& kg) {
  auto in = open_in(path, false);
  return RuleSet::read(in, kg, path);
}

std::string read_file(const std::string& path) {
  auto in = open_in(path, true);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  auto out = open_out(path, true);
  out << contents;
  close_out(out, path);
}

}  // namespace loger
