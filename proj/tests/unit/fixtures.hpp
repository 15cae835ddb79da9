#pragma once

// Small hand-built graphs shared by the unit tests.

#include <sstream>
#include <string>

#include "loger/kg.hpp"

namespace fixtures {

inline loger::Schema schema() {
  loger::Schema s;
  s.prefixes = {{"user", loger::EntityType::kUser},
                {"item", loger::EntityType::kItem},
                {"cat", loger::EntityType::kOther},
                {"tag", loger::EntityType::kOther}};
  return s;
}

// One `head relation tail` triple per line, whitespace separated.
inline loger::LoadResult load(const std::string& text) {
  std::istringstream lines(text);
  std::string out, h, r, t;
  while (lines >> h >> r >> t) out += h + "\t" + r + "\t" + t + "\n";
  std::istringstream in(out);
  return loger::load_triples(in, schema(), "fixture");
}

inline loger::KnowledgeGraph graph(const std::string& text) { return load(text).graph; }

inline loger::KnowledgeGraph augmented(const std::string& text) {
  return loger::add_reverse_relations(graph(text));
}

inline loger::EntityId entity(const loger::KnowledgeGraph& kg, const std::string& name) {
  return *kg.find_entity(name);
}

inline loger::RelationId relation(const loger::KnowledgeGraph& kg, const std::string& name) {
  return *kg.find_relation(name);
}

// Four users, three items, two categories; user:1 and user:2 share tastes.
inline const char* kShop = R"(
user:1 purchase item:1
user:1 purchase item:2
user:2 purchase item:1
user:2 purchase item:3
user:3 purchase item:2
user:4 purchase item:3
item:1 belongs_to cat:1
item:2 belongs_to cat:1
item:3 belongs_to cat:2
user:1 likes tag:1
user:2 likes tag:1
user:3 likes tag:2
item:2 tagged tag:1
item:3 tagged tag:2
)";

}  // namespace fixtures
