#include "doctest.h"

#include <map>

#include "dcgsql/sqlkit.hpp"
#include "dcgsql/synth.hpp"

using namespace dcgsql;

TEST_SUITE_BEGIN("sqlkit");

namespace {

SqlAst parse(const std::string& sql) { return parse_sql(sql); }

bool em(const std::string& a, const std::string& b) {
  return exact_set_match(parse(a), parse(b));
}

}  // namespace

TEST_CASE("parsing the appendix exemplars") {
  SUBCASE("simple aggregate") {
    SqlAst ast = parse("SELECT COUNT(*) FROM head WHERE age > 56 ;");
    REQUIRE(ast.query.core.items.size() == 1);
    CHECK(ast.query.core.items[0].agg == AggFn::Count);
    CHECK(ast.query.core.items[0].first.col.is_star());
    REQUIRE(ast.query.core.from.size() == 1);
    CHECK(ast.query.core.from[0].table == "head");
    REQUIRE(ast.query.core.where.has_value());
    CHECK(ast.query.core.where->conds.size() == 1);
    CHECK(ast.query.core.where->conds[0].op == CmpOp::Gt);
  }
  SUBCASE("intersect produces a compound root") {
    SqlAst ast = parse(
        "SELECT status FROM city WHERE population > 1500 "
        "INTERSECT SELECT status FROM city WHERE population < 500 ;");
    REQUIRE(ast.query.compound.size() == 1);
    CHECK(ast.query.compound[0].first == SetOp::Intersect);
    TreeNode tree = ast_tree(ast);
    CHECK(tree.label == "INTERSECT");
    REQUIRE(tree.children.size() == 2);
    CHECK(tree.children[0].label == "SELECT");
    CHECK(tree.children[1].label == "SELECT");
  }
  SUBCASE("syntax error reports the offset") {
    try {
      parse("SELEC x");
      FAIL("expected a parse error");
    } catch (const SqlParseError& e) {
      CHECK(e.offset == 0);
    }
  }
  SUBCASE("aliases resolve to table names") {
    SqlAst ast = parse(
        "SELECT T1.name , T1.long , AVG(T2.duration) FROM station AS T1 JOIN trip AS T2 "
        "ON T1.id = T2.start_station_id GROUP BY T2.start_station_id ;");
    CHECK(ast.query.core.items[0].first.col.table == "station");
    CHECK(ast.query.core.items[2].first.col.table == "trip");
    REQUIRE(ast.query.core.joins.size() == 1);
    REQUIRE(ast.query.core.joins[0].on.has_value());
  }
  SUBCASE("unknown column is rejected when a schema is supplied") {
    const DatabaseSchema world = synth::world_catalog().databases[0];
    CHECK_THROWS_AS(parse_sql("SELECT bogus FROM city", &world), UserError);
    CHECK_NOTHROW(parse_sql("SELECT name FROM city", &world));
  }
}

TEST_CASE("clause sets") {
  SUBCASE("select order is discarded") {
    CHECK(clause_sets(parse("SELECT a, b FROM t")) == clause_sets(parse("SELECT b, a FROM t")));
  }
  SUBCASE("differing where columns are unequal") {
    CHECK(clause_sets(parse("SELECT a FROM t WHERE b > 1")) !=
          clause_sets(parse("SELECT a FROM t WHERE c > 1")));
  }
  SUBCASE("equality operands are symmetric after alias resolution") {
    auto a = parse(
        "SELECT T1.name FROM station AS T1 JOIN trip AS T2 ON T1.id = T2.start_station_id");
    auto b = parse(
        "SELECT T1.name FROM station AS T1 JOIN trip AS T2 ON T2.start_station_id = T1.id");
    CHECK(clause_sets(a) == clause_sets(b));
  }
  SUBCASE("literals are anonymized unless compare_values is set") {
    CHECK(em("SELECT a FROM t WHERE b > 1", "SELECT a FROM t WHERE b > 999"));
    ClauseSetOptions strict;
    strict.compare_values = true;
    CHECK_FALSE(exact_set_match(parse("SELECT a FROM t WHERE b > 1"),
                                parse("SELECT a FROM t WHERE b > 999"), strict));
  }
}

TEST_CASE("exact set match") {
  CHECK(em("SELECT name FROM city", "SELECT name FROM city"));
  CHECK(em("SELECT a, b FROM t", "SELECT b, a FROM t"));
  CHECK_FALSE(em("SELECT a FROM t", "SELECT a FROM t LIMIT 3"));

  SUBCASE("reflexive and symmetric") {
    const char* queries[] = {
        "SELECT name FROM city",
        "SELECT a, COUNT(*) FROM t GROUP BY a HAVING COUNT(*) > 2",
        "SELECT x FROM y WHERE z IN (SELECT z FROM w) ORDER BY x DESC LIMIT 5",
    };
    for (const char* q : queries) CHECK(em(q, q));
    for (const char* q1 : queries)
      for (const char* q2 : queries) CHECK(em(q1, q2) == em(q2, q1));
  }
}

TEST_CASE("categorization of the four appendix exemplars") {
  CHECK(categorize(parse("SELECT COUNT(*) FROM head WHERE age > 56 ;")) ==
        QueryCategory::Simple);
  CHECK(categorize(parse(
            "SELECT T1.name , T1.long , AVG(T2.duration) FROM station AS T1 JOIN trip AS T2 "
            "ON T1.id = T2.start_station_id GROUP BY T2.start_station_id ;")) ==
        QueryCategory::Join);
  CHECK(categorize(parse(
            "SELECT date , zip_code FROM weather WHERE min_dew_point_f < "
            "(SELECT min(min_dew_point_f) FROM weather WHERE zip_code = 94107) ;")) ==
        QueryCategory::Nested);
  CHECK(categorize(parse(
            "SELECT status FROM city WHERE population > 1500 INTERSECT "
            "SELECT status FROM city WHERE population < 500 ;")) == QueryCategory::Iuen);
}

TEST_CASE("categorization precedence") {
  CHECK(categorize(parse("SELECT a FROM t JOIN u ON t.id = u.id "
                         "WHERE a > (SELECT AVG(a) FROM t)")) == QueryCategory::Nested);
  CHECK(categorize(parse("SELECT a FROM t WHERE a IN (SELECT a FROM u) "
                         "UNION SELECT a FROM v")) == QueryCategory::Iuen);
  CHECK(categorize(parse("SELECT a FROM t WHERE a NOT IN (SELECT a FROM u)")) ==
        QueryCategory::Iuen);
  CHECK(categorize(parse("SELECT a FROM t WHERE a IN (SELECT a FROM u)")) ==
        QueryCategory::Nested);
}

TEST_CASE("hardness follows the component-count rules") {
  CHECK(hardness(parse("SELECT name FROM city")) == Hardness::Easy);
  CHECK(hardness(parse("SELECT COUNT(*) FROM head WHERE age > 56")) == Hardness::Easy);
  // one component plus one nested set-op component lands in the hard band
  CHECK(hardness(parse("SELECT status FROM city WHERE population > 1500 INTERSECT "
                       "SELECT status FROM city WHERE population < 500")) == Hardness::Hard);
  // two select items push the nested query over the hard band's limits
  CHECK(hardness(parse("SELECT date , zip_code FROM weather WHERE min_dew_point_f < "
                       "(SELECT min(min_dew_point_f) FROM weather WHERE zip_code = 94107)")) ==
        Hardness::Extra);
  CHECK(hardness(parse("SELECT T1.name , T1.long , AVG(T2.duration) FROM station AS T1 "
                       "JOIN trip AS T2 ON T1.id = T2.start_station_id "
                       "GROUP BY T2.start_station_id")) == Hardness::Medium);

  SUBCASE("adding components never lowers the level") {
    auto level = [](const std::string& sql) { return static_cast<int>(hardness(parse(sql))); };
    CHECK(level("SELECT a FROM t") <= level("SELECT a FROM t WHERE b > 1"));
    CHECK(level("SELECT a FROM t WHERE b > 1") <=
          level("SELECT a FROM t WHERE b > 1 ORDER BY a"));
    CHECK(level("SELECT a FROM t WHERE b > 1 ORDER BY a") <=
          level("SELECT a FROM t WHERE b > 1 ORDER BY a LIMIT 5"));
    CHECK(level("SELECT a FROM t WHERE b > 1 ORDER BY a LIMIT 5") <=
          level("SELECT a FROM t JOIN u ON t.id = u.id WHERE b > 1 ORDER BY a LIMIT 5"));
    CHECK(level("SELECT a FROM t") <=
          level("SELECT a FROM t WHERE a IN (SELECT a FROM u)"));
  }
}

// Brute-force ordered-forest edit distance used as the TED oracle.
namespace {

int forest_distance(const std::vector<TreeNode>& f1, const std::vector<TreeNode>& f2);

std::size_t forest_size(const std::vector<TreeNode>& f) {
  std::size_t n = 0;
  for (const auto& t : f) n += t.size();
  return n;
}

std::string forest_key(const std::vector<TreeNode>& f) {
  std::string key;
  for (const auto& t : f) {
    key += t.label + "(";
    key += forest_key(t.children);
    key += ")";
  }
  return key;
}

std::map<std::string, int> g_memo;

int forest_distance(const std::vector<TreeNode>& f1, const std::vector<TreeNode>& f2) {
  if (f1.empty()) return static_cast<int>(forest_size(f2));
  if (f2.empty()) return static_cast<int>(forest_size(f1));
  const std::string key = forest_key(f1) + "|" + forest_key(f2);
  auto it = g_memo.find(key);
  if (it != g_memo.end()) return it->second;

  const TreeNode& a = f1.front();
  const TreeNode& b = f2.front();
  std::vector<TreeNode> rest1(f1.begin() + 1, f1.end());
  std::vector<TreeNode> rest2(f2.begin() + 1, f2.end());

  std::vector<TreeNode> f1_open = a.children;
  f1_open.insert(f1_open.end(), rest1.begin(), rest1.end());
  std::vector<TreeNode> f2_open = b.children;
  f2_open.insert(f2_open.end(), rest2.begin(), rest2.end());

  int best = 1 + forest_distance(f1_open, f2);          // delete root of a
  best = std::min(best, 1 + forest_distance(f1, f2_open));  // insert root of b
  int match = (a.label == b.label ? 0 : 1) + forest_distance(a.children, b.children) +
              forest_distance(rest1, rest2);
  best = std::min(best, match);
  g_memo[key] = best;
  return best;
}

int brute_ted(const TreeNode& a, const TreeNode& b) { return forest_distance({a}, {b}); }

}  // namespace

TEST_CASE("tree edit distance basics") {
  TreeNode a{"A", {}};
  TreeNode b{"B", {}};
  CHECK(tree_edit_distance(a, a) == 0);
  CHECK(tree_edit_distance(a, b) == 1);

  SqlAst q1 = parse("SELECT name FROM city");
  CHECK(tree_edit_distance(q1, q1) == 0);
  SqlAst q2 = parse("SELECT name FROM city WHERE population > 5");
  int d12 = tree_edit_distance(q1, q2);
  CHECK(d12 > 0);
  CHECK(d12 == tree_edit_distance(q2, q1));
}

TEST_CASE("tree edit distance agrees with the brute-force oracle on samples") {
  // A handful of structured trees plus SQL-derived ones.
  std::vector<TreeNode> trees;
  trees.push_back(TreeNode{"A", {}});
  trees.push_back(TreeNode{"A", {TreeNode{"B", {}}}});
  trees.push_back(TreeNode{"A", {TreeNode{"B", {}}, TreeNode{"C", {}}}});
  trees.push_back(TreeNode{"B", {TreeNode{"A", {TreeNode{"C", {}}}}}});
  trees.push_back(TreeNode{"C", {TreeNode{"C", {}}, TreeNode{"C", {TreeNode{"A", {}}}}}});
  trees.push_back(
      TreeNode{"A", {TreeNode{"B", {TreeNode{"C", {}}, TreeNode{"A", {}}}}, TreeNode{"B", {}}}});
  for (const auto& t1 : trees)
    for (const auto& t2 : trees) CHECK(tree_edit_distance(t1, t2) == brute_ted(t1, t2));
}

TEST_CASE("tree edit distance triangle inequality on sampled triples") {
  std::vector<SqlAst> asts;
  asts.push_back(parse("SELECT a FROM t"));
  asts.push_back(parse("SELECT a, b FROM t WHERE c > 1"));
  asts.push_back(parse("SELECT COUNT(*) FROM t GROUP BY a"));
  asts.push_back(parse("SELECT a FROM t ORDER BY a DESC LIMIT 3"));
  for (const auto& x : asts)
    for (const auto& y : asts)
      for (const auto& z : asts) {
        int dxz = tree_edit_distance(x, z);
        int dxy = tree_edit_distance(x, y);
        int dyz = tree_edit_distance(y, z);
        CHECK(dxz <= dxy + dyz);
      }
}

TEST_CASE("nested clause to phrase") {
  auto phrase_of = [](const std::string& subquery_sql) {
    SqlAst ast = parse(subquery_sql);
    return nested_to_phrase(ast);
  };
  CHECK(phrase_of("SELECT min(min_dew_point_f) FROM weather WHERE zip_code = 94107") ==
        "zip code of the weather is 94107");
  CHECK(phrase_of("SELECT Status FROM city WHERE Population > 1500") ==
        "population of the city is above 1500");
  CHECK(phrase_of("SELECT Status FROM city WHERE Population < 500") ==
        "population of the city is less than 500");
  CHECK(phrase_of("SELECT a FROM t WHERE b >= 3") == "b of the t is at least 3");
  CHECK(phrase_of("SELECT a FROM t WHERE b <= 3") == "b of the t is at most 3");
  SUBCASE("unsupported shapes fall back to the fragment") {
    SqlAst ast = parse("SELECT AVG(distance) FROM routes");
    CHECK(nested_to_phrase(ast) == ast.source);
  }
}

TEST_CASE("ast json dump has labels and children") {
  std::string dump = tree_to_json(ast_tree(parse("SELECT name FROM city")));
  CHECK(dump.find("\"label\"") != std::string::npos);
  CHECK(dump.find("SELECT") != std::string::npos);
  CHECK(dump.find("tab:city") != std::string::npos);
}

TEST_SUITE_END();
