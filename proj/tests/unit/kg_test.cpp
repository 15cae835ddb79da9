#include <doctest.h>

#include <algorithm>
#include <map>
#include <sstream>

#include "fixtures.hpp"
#include "loger/error.hpp"
#include "loger/kg.hpp"

using namespace loger;

TEST_CASE("load_triples counts entities, relations and triples") {
  const auto kg = fixtures::graph("user:1 purchase item:1\nitem:1 belongs_to cat:1\nuser:2 purchase item:1\n");
  CHECK(kg.num_entities() == 4);
  CHECK(kg.num_relations() == 2);
  CHECK(kg.num_triples() == 3);
  CHECK(kg.entity_type(fixtures::entity(kg, "user:1")) == EntityType::kUser);
  CHECK(kg.entity_type(fixtures::entity(kg, "cat:1")) == EntityType::kOther);
  CHECK(kg.users().size() == 2);
  CHECK(kg.items().size() == 1);
}

TEST_CASE("load_triples on empty input gives an empty graph") {
  const auto kg = fixtures::graph("");
  CHECK(kg.num_entities() == 0);
  CHECK(kg.num_triples() == 0);
}

TEST_CASE("duplicated lines are stored once and counted") {
  const auto result = fixtures::load("user:1 purchase item:1\nuser:1 purchase item:1\n");
  CHECK(result.graph.num_triples() == 1);
  CHECK(result.duplicates == 1);
}

TEST_CASE("malformed input raises typed errors") {
  std::istringstream two_fields("user:1\tpurchase\n");
  CHECK_THROWS_AS(load_triples(two_fields, fixtures::schema(), "x"), Error);
  std::istringstream bad_prefix("robot:1\tpurchase\titem:1\n");
  try {
    load_triples(bad_prefix, fixtures::schema(), "x");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kSchema);
  }
  CHECK_THROWS_AS(load_triples("/nonexistent/triples.tsv", fixtures::schema()), Error);
}

TEST_CASE("add_reverse_relations doubles triples and relations") {
  const auto base = fixtures::graph("user:1 purchase item:1\nitem:1 belongs_to cat:1\nuser:2 purchase item:1\n");
  const auto kg = add_reverse_relations(base);
  CHECK(kg.num_triples() == 6);
  CHECK(kg.num_relations() == 4);
  const RelationId p = fixtures::relation(kg, "purchase");
  const RelationId pinv = fixtures::relation(kg, "purchase^-1");
  CHECK(kg.inverse(p) == pinv);
  CHECK(kg.inverse(pinv) == p);
  CHECK(kg.contains(fixtures::entity(kg, "item:1"), pinv, fixtures::entity(kg, "user:1")));
  CHECK(add_reverse_relations(kg).num_triples() == kg.num_triples());
  CHECK(add_reverse_relations(fixtures::graph("")).num_triples() == 0);
}

TEST_CASE("reverse closure, adjacency completeness and id density") {
  const auto kg = fixtures::augmented(fixtures::kShop);
  std::size_t degree_sum = 0;
  EntityId max_entity = 0;
  RelationId max_relation = 0;
  for (const Triple& t : kg.triples()) {
    CHECK(kg.contains(t.tail, kg.inverse(t.relation), t.head));
    max_entity = std::max({max_entity, t.head, t.tail});
    max_relation = std::max(max_relation, t.relation);
  }
  for (EntityId e = 0; e < kg.num_entities(); ++e) degree_sum += kg.neighbors(e).size();
  CHECK(degree_sum == kg.num_triples());
  CHECK(max_entity + 1 == kg.num_entities());
  CHECK(max_relation + 1 == kg.num_relations());
}

TEST_CASE("neighbors of a star, an isolated node and after augmentation") {
  const auto star = fixtures::graph("user:1 purchase item:1\nuser:1 purchase item:2\nuser:1 likes tag:1\n");
  CHECK(star.neighbors(fixtures::entity(star, "user:1")).size() == 3);
  CHECK(star.neighbors(fixtures::entity(star, "tag:1")).empty());

  // In-edges of item:1 by hand: user:1, user:2 (purchase), none else; out-edge cat:1.
  const auto kg = fixtures::augmented(
      "user:1 purchase item:1\nuser:2 purchase item:1\nitem:1 belongs_to cat:1\nitem:2 belongs_to cat:1\n"
      "user:1 purchase item:2\n");
  CHECK(kg.neighbors(fixtures::entity(kg, "item:1")).size() == 3);
  CHECK(kg.neighbors(fixtures::entity(kg, "cat:1")).size() == 2);
  CHECK(kg.neighbors(fixtures::entity(kg, "user:1")).size() == 2);
  const auto by_rel = kg.neighbors(fixtures::entity(kg, "item:1"), fixtures::relation(kg, "purchase^-1"));
  CHECK(by_rel.size() == 2);
  CHECK(std::is_sorted(by_rel.begin(), by_rel.end()));
}

namespace {

KnowledgeGraph ten_interactions() {
  std::string text;
  for (int i = 1; i <= 10; ++i) text += "user:1 purchase item:" + std::to_string(i) + "\n";
  text += "item:1 belongs_to cat:1\n";
  return fixtures::graph(text);
}

}  // namespace

TEST_CASE("split_interactions is deterministic and partitions interactions") {
  const auto kg = ten_interactions();
  const auto a = split_interactions(kg, 0.3, 7);
  const auto b = split_interactions(kg, 0.3, 7);
  CHECK(a.test.size() + a.train.num_interactions() == 10);
  CHECK(a.train.num_interactions() == 7);
  CHECK(a.test.size() == 3);
  CHECK(a.test == b.test);
  CHECK(a.train.triples() == b.train.triples());
  CHECK(a.train.num_entities() == kg.num_entities());

  std::vector<Triple> all = a.train.interaction_triples();
  all.insert(all.end(), a.test.begin(), a.test.end());
  std::sort(all.begin(), all.end());
  CHECK(all == kg.interaction_triples());
  // Attribute triples are untouched.
  CHECK(a.train.num_triples() - a.train.num_interactions() == 1);
}

TEST_CASE("single-interaction users keep their interaction in train") {
  const auto kg = fixtures::graph("user:1 purchase item:1\nuser:2 purchase item:1\nuser:2 purchase item:2\n");
  const auto split = split_interactions(kg, 0.5, 3);
  CHECK(split.train.contains(fixtures::entity(kg, "user:1"), fixtures::relation(kg, "purchase"),
                             fixtures::entity(kg, "item:1")));
  CHECK(split.single_interaction_users == std::vector<EntityId>{fixtures::entity(kg, "user:1")});
  CHECK_THROWS_AS(split_interactions(kg, 1.5, 3), Error);
}

TEST_CASE("write_triples round trips through load_triples") {
  const auto kg = fixtures::graph(fixtures::kShop);
  std::ostringstream out;
  write_triples(out, kg, kg.forward_triples());
  std::istringstream in(out.str());
  const auto again = load_triples(in, fixtures::schema(), "roundtrip").graph;
  std::ostringstream out2;
  write_triples(out2, again, again.forward_triples());
  CHECK(out.str() == out2.str());
  CHECK(again.num_triples() == kg.num_triples());
}

TEST_CASE("schema parse and errors") {
  std::istringstream in("interaction = buys\ntype.user = user\ntype.item = item\ntype.brand = other\n");
  const Schema s = Schema::parse(in, "schema");
  CHECK(s.interaction_relation == "buys");
  CHECK(s.type_of("brand:x") == EntityType::kOther);
  CHECK_THROWS_AS(s.type_of("noprefix"), Error);
  std::istringstream bad("colour = blue\n");
  CHECK_THROWS_AS(Schema::parse(bad, "schema"), Error);
}
