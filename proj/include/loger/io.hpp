#pragma once

// Checkpoint persistence. Binary checkpoints start with a text header ending in a
// line `end`, followed by little-endian IEEE-754 doubles.

#include <iosfwd>
#include <string>

#include "loger/encoder.hpp"
#include "loger/kg.hpp"
#include "loger/logic.hpp"
#include "loger/reasoner.hpp"
#include "loger/rules.hpp"

namespace loger {

void write_embeddings(std::ostream& out, const EmbeddingTable& emb);
EmbeddingTable read_embeddings(std::istream& in, const std::string& source);
void save_embeddings(const std::string& path, const EmbeddingTable& emb);
EmbeddingTable load_embeddings(const std::string& path);

void write_reasoner(std::ostream& out, const ReasonerParams& params);
ReasonerParams read_reasoner(std::istream& in, const std::string& source);
void save_reasoner(const std::string& path, const ReasonerParams& params);
ReasonerParams load_reasoner(const std::string& path);

// Text: a `round = n` record, then `id<TAB>weight<TAB>rule` per rule.
void write_weights(std::ostream& out, const RuleWeights& w, const RuleSet& rules, const KnowledgeGraph& kg);
RuleWeights read_weights(std::istream& in, std::size_t num_rules, const std::string& source);
void save_weights(const std::string& path, const RuleWeights& w, const RuleSet& rules, const KnowledgeGraph& kg);
RuleWeights load_weights(const std::string& path, std::size_t num_rules);

void save_rules(const std::string& path, const RuleSet& rules, const KnowledgeGraph& kg);
RuleSet load_rules(const std::string& path, const KnowledgeGraph& kg);

// Whole-file helpers; throw kIo with the path on failure.
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

}  // namespace loger
