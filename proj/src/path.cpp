#include "loger/path.hpp"

#include <fmt/format.h>

namespace loger {

std::string format_path(const KnowledgeGraph& kg, const Path& path) {
  std::string out = kg.entity_name(path.entities.front());
  for (std::size_t k = 0; k < path.relations.size(); ++k) {
    out += fmt::format(" -[{}]-> {}", kg.relation_name(path.relations[k]),
                       kg.entity_name(path.entities[k + 1]));
  }
  out += " #";
  if (path.rule) out += fmt::format(" rule={}", *path.rule);
  out += fmt::format(" score={:.6f}", path.score);
  return out;
}

bool path_in_graph(const KnowledgeGraph& kg, const Path& path) {
  if (path.entities.size() != path.relations.size() + 1) return false;
  for (std::size_t k = 0; k < path.relations.size(); ++k) {
    if (path.entities[k] >= kg.num_entities() || path.entities[k + 1] >= kg.num_entities()) return false;
    if (!kg.contains(path.entities[k], path.relations[k], path.entities[k + 1])) return false;
  }
  return true;
}

}  // namespace loger
