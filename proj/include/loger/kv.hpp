#pragma once

#include <iosfwd>
#include <map>
#include <string>

namespace loger {

// Flat `key = value` text records. Blank lines and lines starting with '#'
// are ignored; later keys override earlier ones.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(std::istream& in, const std::string& source);
KeyValues read_key_values(const std::string& path);

std::string trim(const std::string& s);

}  // namespace loger
