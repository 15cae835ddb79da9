#include "loger/kv.hpp"

#include <fstream>
#include <istream>

#include "loger/error.hpp"

namespace loger {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

KeyValues parse_key_values(std::istream& in, const std::string& source) {
  KeyValues out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::kParse, source + ":" + std::to_string(line_no) + ": expected `key = value`");
    }
    std::string key = trim(body.substr(0, eq));
    if (key.empty()) {
      fail(ErrorCode::kParse, source + ":" + std::to_string(line_no) + ": empty key");
    }
    out[key] = trim(body.substr(eq + 1));
  }
  return out;
}

KeyValues read_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path);
  return parse_key_values(in, path);
}

}  // namespace loger
