#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "loger/kg.hpp"

namespace loger {

using RuleId = std::uint32_t;

// Alternating walk e_0 -[r_1]-> e_1 ... -[r_T]-> e_T.
struct Path {
  std::vector<EntityId> entities;
  std::vector<RelationId> relations;
  std::optional<RuleId> rule;
  double score = 0.0;

  std::size_t length() const noexcept { return relations.size(); }
  EntityId source() const { return entities.front(); }
  EntityId target() const { return entities.back(); }

  bool operator==(const Path& other) const {
    return entities == other.entities && relations == other.relations;
  }
};

// `user:1 -[mentions]-> feature:3 -[described_by^-1]-> item:9 # rule=4 score=1.25`
std::string format_path(const KnowledgeGraph& kg, const Path& path);

// True if every consecutive (e, r, e') of the path is an edge of kg.
bool path_in_graph(const KnowledgeGraph& kg, const Path& path);

}  // namespace loger
