#include "doctest.h"

#include "dcgsql/promptkit.hpp"
#include "dcgsql/synth.hpp"
#include "support.hpp"

using namespace dcgsql;
using testsupport::fixture;

TEST_SUITE_BEGIN("promptkit");

namespace {

DatabaseSchema pruned_one(const std::string& table,
                          const std::vector<std::string>& columns) {
  DatabaseSchema db;
  db.db_id = table;
  TableDef t;
  t.name = table;
  for (const auto& c : columns) t.columns.push_back({c, ValueType::Text});
  db.tables.push_back(std::move(t));
  return db;
}

}  // namespace

TEST_CASE("schema block rendering") {
  SUBCASE("world block with bracketed value matches") {
    const DatabaseSchema world = synth::world_catalog().databases[0];
    ValueMatches matches{{"countrylanguage.language", {"Dutch", "English"}}};
    std::string block = render_schema_block(world, matches);
    CHECK(block.find("# countrylanguage (countrycode, language [Dutch, English], isofficial, "
                     "percentage)") != std::string::npos);
    CHECK(block.find("# Foreign Keys = [city.countrycode = country.code, "
                     "countrylanguage.countrycode = country.code]") != std::string::npos);
  }
  SUBCASE("no foreign keys renders an empty list") {
    std::string block = render_schema_block(pruned_one("head", {"age"}), {});
    CHECK(block.find("# Foreign Keys = []") != std::string::npos);
    CHECK(block.find("# head (age)") != std::string::npos);
  }
  SUBCASE("a pruned schema never names a pruned-out item") {
    DatabaseSchema world = synth::world_catalog().databases[0];
    RelevanceScores scores;
    scores.sample_id = "s";
    for (const auto& t : world.tables) {
      scores.tables[t.name] = {t.name == "city" ? 0.9 : 0.1, {1.0}};
      for (const auto& c : t.columns)
        scores.columns[{t.name, c.name}] = {c.name == "name" ? 0.9 : 0.1, {1.0}};
    }
    PrunedSchema pruned = prune(scores, world, 0.5);
    std::string block = render_schema_block(pruned, {});
    CHECK(block.find("country (") == std::string::npos);
    CHECK(block.find("countrycode") == std::string::npos);
    CHECK(block.find("# city (name)") != std::string::npos);
  }
}

TEST_CASE("chain-of-thought demonstration blocks match the golden files") {
  SUBCASE("SIMPLE has no reasoning line") {
    CotDemo demo;
    demo.question = "How many heads of the departments are older than 56 ?";
    demo.gold_sql = "SELECT COUNT(*) FROM head WHERE age > 56";
    demo.schema = pruned_one("head", {"age"});
    std::string block = render_cot_demo(demo, QueryCategory::Simple);
    CHECK(block == fixture("cot_simple.txt"));
    CHECK(block.find("step by step") == std::string::npos);
    CHECK(block.ends_with("### SQL: SELECT COUNT(*) FROM head WHERE age > 56 ;"));
  }
  SUBCASE("JOIN carries the verbatim intermediate representation") {
    CotDemo demo;
    demo.question =
        "For each station, return its longitude and the average duration of trips that "
        "started from the station.";
    demo.gold_sql =
        "SELECT T1.name , T1.long , AVG(T2.duration) FROM station AS T1 JOIN trip AS T2 ON "
        "T1.id = T2.start_station_id GROUP BY T2.start_station_id";
    DatabaseSchema schema;
    schema.db_id = "bike";
    schema.tables = {
        TableDef{"station",
                 {{"id", ValueType::Number}, {"name", ValueType::Text}, {"long", ValueType::Number}}},
        TableDef{"trip",
                 {{"duration", ValueType::Number}, {"start_station_id", ValueType::Number}}}};
    schema.foreign_keys = {ForeignKey{"trip", "start_station_id", "station", "id"}};
    demo.schema = schema;
    std::string block = render_cot_demo(demo, QueryCategory::Join);
    CHECK(block == fixture("cot_join.txt"));
    CHECK(block.find("Let's think step by step. we need to join the tables 'station' and "
                     "'trip'.") != std::string::npos);
    CHECK(block.find("Intermediate representation: \"FROM station AS T1 JOIN trip AS T2 ON "
                     "T1.id = T2.start_station_id\".") != std::string::npos);
  }
  SUBCASE("NESTED carries the tokenized subquery and its phrase") {
    CotDemo demo;
    demo.question =
        "On which day and in which zip code was the min dew point lower than any day in zip "
        "code 94107?";
    demo.gold_sql =
        "SELECT date , zip_code FROM weather WHERE min_dew_point_f < (SELECT "
        "min(min_dew_point_f) FROM weather WHERE zip_code = 94107)";
    demo.schema = pruned_one("weather", {"date", "min_dew_point_f", "zip_code"});
    std::string block = render_cot_demo(demo, QueryCategory::Nested);
    CHECK(block == fixture("cot_nested.txt"));
    CHECK(block.find("we need a nested subquery for 'zip code of the weather is 94107'.") !=
          std::string::npos);
    CHECK(block.find("Nested subquery: \"( SELECT min ( min_dew_point_f ) FROM weather WHERE "
                     "zip_code = 94107 )\".") != std::string::npos);
  }
  SUBCASE("IUEN names the set operator and both subqueries") {
    CotDemo demo;
    demo.question =
        "Show the status shared by cities with population bigger than 1500 and smaller than "
        "500.";
    demo.gold_sql =
        "SELECT Status FROM city WHERE Population > 1500 INTERSECT SELECT Status FROM city "
        "WHERE Population < 500";
    demo.schema = pruned_one("city", {"status", "population"});
    std::string block = render_cot_demo(demo, QueryCategory::Iuen);
    CHECK(block == fixture("cot_iuen.txt"));
    CHECK(block.find("can be solved using the 'INTERSECT' set operator") != std::string::npos);
    CHECK(block.find("one for 'population of the city is above 1500' and the other for "
                     "'population of the city is less than 500'") != std::string::npos);
    CHECK(block.find("First subquery: SELECT Status FROM city WHERE Population > 1500") !=
          std::string::npos);
  }
  SUBCASE("template slot mismatch is an error") {
    CotDemo demo;
    demo.question = "q";
    demo.gold_sql = "SELECT a FROM t";
    demo.schema = pruned_one("t", {"a"});
    CHECK_THROWS_AS(render_cot_demo(demo, QueryCategory::Join), UserError);
    CHECK_THROWS_AS(render_cot_demo(demo, QueryCategory::Nested), UserError);
  }
}

TEST_CASE("prompt assembly") {
  const DatabaseSchema world = synth::world_catalog().databases[0];
  ValueMatches matches{{"countrylanguage.language", {"Dutch", "English"}}};

  SUBCASE("zero demonstrations give the test block alone") {
    PromptBundle bundle =
        assemble_prompt({}, {}, "Which regions speak Dutch or English?", world, matches);
    CHECK(bundle.demonstrations.empty());
    CHECK(bundle.full_text == bundle.test_block);
  }
  SUBCASE("the world test case matches the golden fixture byte for byte") {
    PromptBundle bundle =
        assemble_prompt({}, {}, "Which regions speak Dutch or English?", world, matches);
    CHECK(bundle.full_text == fixture("testcase_prompt.txt"));
    CHECK(bundle.test_block.ends_with("### SQL:"));
  }
  SUBCASE("four demos render most-similar last by default") {
    CotDemo demo;
    demo.question = "How many heads of the departments are older than 56 ?";
    demo.gold_sql = "SELECT COUNT(*) FROM head WHERE age > 56";
    demo.schema = pruned_one("head", {"age"});
    std::vector<CotDemo> demos(4, demo);
    demos[0].question = "most similar question";
    std::vector<QueryCategory> cats(4, QueryCategory::Simple);
    PromptBundle bundle =
        assemble_prompt(demos, cats, "Which regions speak Dutch or English?", world, matches);
    REQUIRE(bundle.demonstrations.size() == 4);
    CHECK(bundle.demonstrations.back().find("most similar question") != std::string::npos);
    CHECK(bundle.full_text.ends_with(bundle.test_block));

    PromptOptions keep_order;
    keep_order.most_similar_last = false;
    PromptBundle forward = assemble_prompt(demos, cats, "q", world, matches, keep_order);
    CHECK(forward.demonstrations.front().find("most similar question") != std::string::npos);
  }
  SUBCASE("assembly is deterministic") {
    PromptBundle a =
        assemble_prompt({}, {}, "Which regions speak Dutch or English?", world, matches);
    PromptBundle b =
        assemble_prompt({}, {}, "Which regions speak Dutch or English?", world, matches);
    CHECK(a.full_text == b.full_text);
    CHECK(a.token_estimate == b.token_estimate);
    CHECK(a.token_estimate == (a.full_text.size() + 3) / 4);
  }
}

TEST_SUITE_END();
