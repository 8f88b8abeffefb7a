#include "doctest.h"

#include <algorithm>
#include <set>

#include "dcgsql/linker.hpp"
#include "dcgsql/synth.hpp"

using namespace dcgsql;

TEST_SUITE_BEGIN("linker");

namespace {

bool has_edge(const std::vector<Edge>& edges, int src, int dst, EdgeType type) {
  return std::find(edges.begin(), edges.end(), Edge{src, dst, type}) != edges.end();
}

/// Two-table schema: head(age, name) and dept(budget).
DatabaseSchema mini_schema() {
  DatabaseSchema db;
  db.db_id = "mini";
  db.tables = {TableDef{"head", {{"age", ValueType::Number}, {"name", ValueType::Text}}},
               TableDef{"dept", {{"budget", ValueType::Number}}}};
  return db;
}

RelevanceScores flat_scores(const DatabaseSchema& db, std::size_t q, double prob,
                            double attention) {
  RelevanceScores scores;
  scores.sample_id = "s";
  for (const auto& t : db.tables) {
    scores.tables[t.name] = {prob, std::vector<double>(q, attention)};
    for (const auto& c : t.columns)
      scores.columns[{t.name, c.name}] = {prob, std::vector<double>(q, attention)};
  }
  return scores;
}

}  // namespace

TEST_CASE("edge type inverses") {
  for (int i = 0; i < kEdgeTypeCount; ++i) {
    EdgeType t = static_cast<EdgeType>(i);
    CHECK(inverse(inverse(t)) == t);
    CHECK(edge_type_from_string(to_string(t)) == t);
  }
  CHECK(inverse(EdgeType::SelfLoop) == EdgeType::SelfLoop);
  CHECK(inverse(EdgeType::NoRelation) == EdgeType::NoRelation);
  CHECK(inverse(EdgeType::QuestionDistPlus1) == EdgeType::QuestionDistMinus1);
  CHECK(inverse(EdgeType::QuestionDistPlus2) == EdgeType::QuestionDistMinus2);
  CHECK_THROWS_AS(edge_type_from_string("foo"), UserError);
}

TEST_CASE("attention match edges respect strict thresholds") {
  DatabaseSchema db = mini_schema();
  TokenSeq tokens = tokenize_question("older than 56");
  NodeLayout layout = make_node_layout(tokens, db);
  RelevanceScores scores = flat_scores(db, 3, 0.9, 0.0);

  SUBCASE("strictly above creates the edge") {
    scores.tables["head"].attention = {0.67, 0.0, 0.0};
    auto edges = attention_match_edges(scores, db, 0.66, 0.43, layout);
    CHECK(has_edge(edges, layout.table_index.at("head"), 0, EdgeType::AttentionMatchTable));
  }
  SUBCASE("exactly at the threshold does not") {
    scores.tables["head"].attention = {0.66, 0.0, 0.0};
    auto edges = attention_match_edges(scores, db, 0.66, 0.43, layout);
    CHECK(edges.empty());
  }
  SUBCASE("column peaks on 'older' and '56' link both tokens to age") {
    scores.columns[{"head", "age"}].attention = {1.0, 0.2, 0.8};
    auto edges = attention_match_edges(scores, db, 0.66, 0.43, layout);
    const int age = layout.column_index.at({"head", "age"});
    CHECK(has_edge(edges, age, 0, EdgeType::AttentionMatchColumn));
    CHECK(has_edge(edges, age, 2, EdgeType::AttentionMatchColumn));
    CHECK_FALSE(has_edge(edges, age, 1, EdgeType::AttentionMatchColumn));
  }
  SUBCASE("raising a threshold never adds edges") {
    scores.columns[{"head", "age"}].attention = {1.0, 0.5, 0.44};
    auto low = attention_match_edges(scores, db, 0.4, 0.43, layout);
    auto high = attention_match_edges(scores, db, 0.66, 0.6, layout);
    for (const Edge& e : high) CHECK(has_edge(low, e.src, e.dst, e.type));
    CHECK(high.size() <= low.size());
  }
}

TEST_CASE("name match edges") {
  SUBCASE("adjacent tokens matching a multi-word column get exact edges") {
    DatabaseSchema db;
    db.db_id = "m";
    db.tables = {TableDef{"people", {{"head id", ValueType::Number}}}};
    TokenSeq tokens = tokenize_question("what head id please");
    NodeLayout layout = make_node_layout(tokens, db);
    auto edges = name_match_edges(tokens, db, layout);
    const int col = layout.column_index.at({"people", "head id"});
    CHECK(has_edge(edges, 1, col, EdgeType::ExactNameMatch));
    CHECK(has_edge(edges, 2, col, EdgeType::ExactNameMatch));
    CHECK_FALSE(has_edge(edges, 0, col, EdgeType::ExactNameMatch));
  }
  SUBCASE("single token exact match") {
    DatabaseSchema db = mini_schema();
    TokenSeq tokens = tokenize_question("the name field");
    NodeLayout layout = make_node_layout(tokens, db);
    auto edges = name_match_edges(tokens, db, layout);
    CHECK(has_edge(edges, 1, layout.column_index.at({"head", "name"}),
                   EdgeType::ExactNameMatch));
  }
  SUBCASE("substring lemmas give partial matches") {
    DatabaseSchema db;
    db.db_id = "w";
    db.tables = {TableDef{"countrylanguage", {{"percentage", ValueType::Number}}}};
    TokenSeq tokens = tokenize_question("which country speaks");
    NodeLayout layout = make_node_layout(tokens, db);
    auto edges = name_match_edges(tokens, db, layout);
    CHECK(has_edge(edges, 1, layout.table_index.at("countrylanguage"),
                   EdgeType::PartialNameMatch));
  }
}

TEST_CASE("value match edges") {
  DatabaseSchema world = synth::world_catalog().databases[0];
  TokenSeq tokens = tokenize_question("Which regions speak Dutch or English?");
  ValueMatches matches{{"countrylanguage.language", {"Dutch", "English"}}};

  SUBCASE("each matched token links to the column") {
    NodeLayout layout = make_node_layout(tokens, world);
    auto edges = value_match_edges(matches, world, tokens, layout);
    const int lang = layout.column_index.at({"countrylanguage", "language"});
    REQUIRE(edges.size() == 2);
    CHECK(has_edge(edges, 3, lang, EdgeType::ValueMatch));
    CHECK(has_edge(edges, 5, lang, EdgeType::ValueMatch));
  }
  SUBCASE("empty matches give no edges") {
    NodeLayout layout = make_node_layout(tokens, world);
    CHECK(value_match_edges({}, world, tokens, layout).empty());
  }
  SUBCASE("a pruned-away column produces no edge") {
    DatabaseSchema pruned = world;
    pruned.tables.erase(pruned.tables.begin() + 3);  // drop countrylanguage
    pruned.foreign_keys.clear();
    NodeLayout layout = make_node_layout(tokens, pruned);
    CHECK(value_match_edges(matches, pruned, tokens, layout).empty());
  }
}

TEST_CASE("schema structure edges") {
  SUBCASE("kept foreign key becomes one edge pair after closure") {
    DatabaseSchema db;
    db.db_id = "w";
    db.tables = {TableDef{"city", {{"countrycode", ValueType::Text}}},
                 TableDef{"country", {{"code", ValueType::Text}}}};
    db.foreign_keys = {ForeignKey{"city", "countrycode", "country", "code"}};
    TokenSeq tokens = tokenize_question("q");
    NodeLayout layout = make_node_layout(tokens, db);
    auto edges = schema_structure_edges(db, layout);
    const int from = layout.column_index.at({"city", "countrycode"});
    const int to = layout.column_index.at({"country", "code"});
    CHECK(has_edge(edges, from, to, EdgeType::ForeignKey));
  }
  SUBCASE("one kept column gives ColumnOfTable and no SameTable") {
    DatabaseSchema db;
    db.db_id = "m";
    db.tables = {TableDef{"t", {{"a", ValueType::Text}}}};
    NodeLayout layout = make_node_layout(tokenize_question("q"), db);
    auto edges = schema_structure_edges(db, layout);
    REQUIRE(edges.size() == 1);
    CHECK(edges[0].type == EdgeType::ColumnOfTable);
  }
  SUBCASE("two kept columns give one SameTable pair") {
    DatabaseSchema db;
    db.db_id = "m";
    db.tables = {TableDef{"t", {{"a", ValueType::Text}, {"b", ValueType::Text}}}};
    NodeLayout layout = make_node_layout(tokenize_question("q"), db);
    auto edges = schema_structure_edges(db, layout);
    std::size_t same = 0;
    for (const Edge& e : edges) same += e.type == EdgeType::SameTable ? 1 : 0;
    CHECK(same == 1);
  }
  SUBCASE("primary key column links to its table") {
    DatabaseSchema db;
    db.db_id = "m";
    db.tables = {TableDef{"t", {{"id", ValueType::Number}}}};
    db.primary_keys = {{"t", "id"}};
    NodeLayout layout = make_node_layout(tokenize_question("q"), db);
    auto edges = schema_structure_edges(db, layout);
    CHECK(has_edge(edges, layout.column_index.at({"t", "id"}), layout.table_index.at("t"),
                   EdgeType::PrimaryKey));
  }
}

TEST_CASE("question distance edges") {
  SUBCASE("three tokens") {
    auto edges = question_distance_edges(tokenize_question("a b c"));
    CHECK(has_edge(edges, 0, 1, EdgeType::QuestionDistPlus1));
    CHECK(has_edge(edges, 1, 2, EdgeType::QuestionDistPlus1));
    CHECK(has_edge(edges, 0, 2, EdgeType::QuestionDistPlus2));
    CHECK(has_edge(edges, 1, 0, EdgeType::QuestionDistMinus1));
    CHECK(has_edge(edges, 2, 0, EdgeType::QuestionDistMinus2));
    CHECK(edges.size() == 6);
  }
  SUBCASE("single token has none") {
    CHECK(question_distance_edges(tokenize_question("a")).empty());
  }
  SUBCASE("two tokens") {
    auto edges = question_distance_edges(tokenize_question("a b"));
    REQUIRE(edges.size() == 2);
    CHECK(has_edge(edges, 0, 1, EdgeType::QuestionDistPlus1));
    CHECK(has_edge(edges, 1, 0, EdgeType::QuestionDistMinus1));
  }
}

TEST_CASE("graph assembly") {
  DatabaseSchema db;
  db.db_id = "m";
  db.tables = {TableDef{"head", {{"age", ValueType::Number}, {"name", ValueType::Text}}},
               TableDef{"dept", {{"budget", ValueType::Number}}}};
  Sample sample{"s1", "m", "how many heads are older than 56", {}};
  TokenSeq tokens = tokenize_question(sample.question);
  RelevanceScores scores = flat_scores(db, tokens.size(), 0.9, 0.2);
  scores.columns[{"head", "age"}].attention[5] = 1.0;  // "older"

  SchemaLinkGraph g = build_graph(sample, tokens, db, scores, {});

  SUBCASE("node count is tokens + tables + columns") {
    CHECK(g.nodes.size() == 7 + 2 + 3);
    CHECK(g.question_len == 7);
  }
  SUBCASE("every node has a self loop and closure holds") {
    for (int i = 0; i < static_cast<int>(g.nodes.size()); ++i)
      CHECK(std::find(g.edges.begin(), g.edges.end(), Edge{i, i, EdgeType::SelfLoop}) !=
            g.edges.end());
    for (const Edge& e : g.edges)
      CHECK(std::find(g.edges.begin(), g.edges.end(),
                      Edge{e.dst, e.src, inverse(e.type)}) != g.edges.end());
  }
  SUBCASE("no scores above threshold still yields a valid graph") {
    RelevanceScores low = flat_scores(db, tokens.size(), 0.9, 0.0);
    SchemaLinkGraph quiet = build_graph(sample, tokens, db, low, {});
    CHECK(!quiet.edges.empty());
    for (const Edge& e : quiet.edges) {
      CHECK(e.type != EdgeType::AttentionMatchTable);
      CHECK(e.type != EdgeType::AttentionMatchColumn);
    }
  }
  SUBCASE("serialization round-trips exactly") {
    std::string bytes = serialize_graph(g);
    SchemaLinkGraph restored = deserialize_graph(bytes);
    CHECK(restored == g);
    CHECK(serialize_graph(restored) == bytes);
  }
  SUBCASE("graphs are equal iff serializations are byte-equal") {
    SchemaLinkGraph g2 = build_graph(sample, tokens, db, scores, {});
    CHECK(serialize_graph(g2) == serialize_graph(g));
    SchemaLinkGraph g3 = g2;
    g3.sample_id = "other";
    CHECK(serialize_graph(g3) != serialize_graph(g));
  }
  SUBCASE("unknown edge type fails to deserialize") {
    std::string bytes = serialize_graph(g);
    std::string corrupted = bytes;
    auto pos = corrupted.find("SelfLoop");
    corrupted.replace(pos, 8, "FooEdges");
    CHECK_THROWS_AS(deserialize_graph(corrupted), UserError);
  }
  SUBCASE("raising the decision threshold never adds nodes") {
    PrunedSchema loose = prune(scores, db, 0.3);
    PrunedSchema tight = prune(scores, db, 0.95);
    std::set<std::string> loose_tables, tight_tables;
    for (const auto& t : loose.tables) loose_tables.insert(t.name);
    for (const auto& t : tight.tables) tight_tables.insert(t.name);
    for (const auto& t : tight_tables)
      CHECK((loose_tables.count(t) == 1 || tight.tables.size() == 1));
    CHECK(tight.column_count() <= loose.column_count());
  }
}

TEST_SUITE_END();
