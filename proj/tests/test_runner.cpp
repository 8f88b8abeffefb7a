#include "doctest.h"

#include <cmath>

#include "dcgsql/runner.hpp"
#include "dcgsql/synth.hpp"
#include "support.hpp"

using namespace dcgsql;
using testsupport::TempDir;

TEST_SUITE_BEGIN("runner");

TEST_CASE("sql extraction") {
  CHECK(extract_sql("SELECT 1;") == "SELECT 1");
  CHECK(extract_sql("Sure thing:\n```sql\nSELECT name FROM city;\n```\n") ==
        "SELECT name FROM city");
  CHECK(extract_sql("select a from t") == "select a from t");
  CHECK(extract_sql("no sql here") == std::nullopt);
  CHECK(extract_sql("") == std::nullopt);
}

TEST_CASE("stub and echo clients") {
  SUBCASE("stub returns the canned answer for a known prompt") {
    StubLlmClient stub;
    stub.put("the prompt", "SELECT 1;");
    CHECK(stub.complete("the prompt", 0.5, 64) == "SELECT 1;");
    CHECK(stub.complete("unknown", 0.5, 64) == "");
  }
  SUBCASE("generate extracts from the stub's completion") {
    StubLlmClient stub;
    PromptBundle bundle;
    bundle.full_text = "p";
    stub.put("p", "SELECT 1;");
    CHECK(generate(stub, bundle) == "SELECT 1");
  }
  SUBCASE("echo returns the gold SQL of the last demonstration") {
    EchoLlmClient echo;
    PromptBundle bundle;
    bundle.full_text =
        "### Question: q1\n### SQL: SELECT a FROM t ;\n\n"
        "### Question: q2\n### SQL: SELECT b FROM u ;\n\n"
        "### Question: test\n### SQL:";
    CHECK(generate(echo, bundle) == "SELECT b FROM u");
  }
  SUBCASE("stub map files round-trip through the loader") {
    TempDir dir("stub");
    testsupport::write_file(dir.file("map.json"),
                            std::string("{\"") + prompt_hash("p") +
                                "\":\"SELECT 9;\",\"<default>\":\"SELECT 0;\"}");
    StubLlmClient stub = StubLlmClient::from_file(dir.file("map.json"));
    CHECK(stub.complete("p", 0.5, 64) == "SELECT 9;");
    CHECK(stub.complete("other", 0.5, 64) == "SELECT 0;");
  }
}

TEST_CASE("usefulness from log-likelihoods") {
  CHECK(usefulness_from_loglikelihood({}) == 0.0);
  CHECK(usefulness_from_loglikelihood({0.0, 0.0}) == doctest::Approx(1.0));
  CHECK(usefulness_from_loglikelihood({-1.0, -3.0}) == doctest::Approx(std::exp(-2.0)));
  CHECK(usefulness_from_loglikelihood({-1.0, -3.0}, false) == doctest::Approx(std::exp(-4.0)));
}

namespace {

struct ExFixture {
  TempDir dir{"ex"};
  std::string db_file;
  ExFixture() {
    DatabaseSchema shop = synth::make_e2e_fixture().catalog.at("shop");
    db_file = dir.file("shop.sqlite");
    synth::make_sqlite_db(db_file, shop, synth::make_e2e_fixture().rows.at("shop"));
  }
};

}  // namespace

TEST_CASE("execution accuracy") {
  ExFixture fx;
  auto ex = [&](const std::string& pred, const std::string& gold) {
    return execution_accuracy(pred, gold, fx.db_file);
  };

  CHECK(ex("SELECT pname FROM products", "SELECT pname FROM products") == ExOutcome::Match);
  CHECK(ex("SELECT 1+1", "SELECT 2") == ExOutcome::Match);
  CHECK(ex("SELECT pname FROM products ORDER BY price DESC",
           "SELECT pname FROM products ORDER BY price") == ExOutcome::Mismatch);
  SUBCASE("multiset comparison ignores order without a gold ORDER BY") {
    CHECK(ex("SELECT pname FROM products ORDER BY pname DESC",
             "SELECT pname FROM products") == ExOutcome::Match);
  }
  SUBCASE("gold ORDER BY forces ordered comparison") {
    CHECK(ex("SELECT pname FROM products ORDER BY price",
             "SELECT pname FROM products ORDER BY price") == ExOutcome::Match);
  }
  SUBCASE("prediction errors score false") {
    CHECK(ex("SELECT nothing FROM nowhere", "SELECT 1") == ExOutcome::Mismatch);
    CHECK(ex("garbage", "SELECT 1") == ExOutcome::Mismatch);
    CHECK(ex("", "SELECT 1") == ExOutcome::Mismatch);
  }
  SUBCASE("gold errors are flagged") {
    CHECK(ex("SELECT 1", "SELECT nothing FROM nowhere") == ExOutcome::GoldError);
  }
  SUBCASE("timeouts score false") {
    ExecutionOptions fast;
    fast.timeout_seconds = 0.3;
    CHECK(execution_accuracy(
              "WITH RECURSIVE c(x) AS (SELECT 1 UNION ALL SELECT x+1 FROM c) "
              "SELECT COUNT(*) FROM c",
              "SELECT 1", fx.db_file, fast) == ExOutcome::Mismatch);
  }
  SUBCASE("missing database file is an error") {
    CHECK_THROWS_AS(execution_accuracy("SELECT 1", "SELECT 1", fx.dir.file("none.sqlite")),
                    UserError);
  }
}

TEST_CASE("evaluation report") {
  synth::E2eFixture fx = synth::make_e2e_fixture();
  TempDir dir("eval");
  for (const auto& db : fx.catalog.databases)
    synth::make_sqlite_db(value_store_path(dir.path.string(), db.db_id), db,
                          fx.rows.at(db.db_id));
  std::vector<Sample> dataset(fx.tests.begin(), fx.tests.begin() + 4);

  SUBCASE("two correct out of four gives 50.0") {
    std::map<std::string, std::string> preds;
    preds[dataset[0].id] = *dataset[0].gold_sql;
    preds[dataset[1].id] = *dataset[1].gold_sql;
    preds[dataset[2].id] = "SELECT pname FROM products WHERE price > 99999";
    preds[dataset[3].id] = "SELECT oid FROM orders";
    EvalReport report = evaluate(dataset, preds, fx.catalog, dir.path.string());
    CHECK(report.overall.n == 4);
    CHECK(pct(report.overall.ex_correct, report.overall.n) == doctest::Approx(50.0));
    std::size_t level_sum = 0;
    for (const auto& [name, stats] : report.by_hardness) level_sum += stats.n;
    CHECK(level_sum == report.overall.n);
  }
  SUBCASE("identical predictions give 100/100 and zero TED against themselves") {
    std::map<std::string, std::string> preds;
    std::map<std::string, std::vector<std::string>> retrieved;
    std::vector<Sample> pool;
    for (const auto& s : dataset) {
      preds[s.id] = *s.gold_sql;
      Sample twin = s;
      twin.id = "twin_" + s.id;
      pool.push_back(twin);
      retrieved[s.id] = {twin.id};
    }
    EvalReport report =
        evaluate(dataset, preds, fx.catalog, dir.path.string(), &retrieved, &pool);
    CHECK(pct(report.overall.ex_correct, report.overall.n) == doctest::Approx(100.0));
    CHECK(pct(report.overall.em_correct, report.overall.n) == doctest::Approx(100.0));
    REQUIRE(report.avg_ted.has_value());
    CHECK(*report.avg_ted == doctest::Approx(0.0));
  }
  SUBCASE("missing predictions are counted wrong with a failure record") {
    std::map<std::string, std::string> preds;
    preds[dataset[0].id] = *dataset[0].gold_sql;
    EvalReport report = evaluate(dataset, preds, fx.catalog, dir.path.string());
    CHECK(report.overall.n == 4);
    CHECK(report.overall.ex_correct == 1);
    CHECK(report.failures.size() == 3);
  }
  SUBCASE("re-running yields an identical report") {
    std::map<std::string, std::string> preds;
    for (const auto& s : dataset) preds[s.id] = *s.gold_sql;
    EvalReport a = evaluate(dataset, preds, fx.catalog, dir.path.string());
    EvalReport b = evaluate(dataset, preds, fx.catalog, dir.path.string());
    CHECK(report_to_json(a) == report_to_json(b));
  }
  SUBCASE("prediction for an unknown id is an error") {
    std::map<std::string, std::string> preds{{"ghost", "SELECT 1"}};
    CHECK_THROWS_AS(evaluate(dataset, preds, fx.catalog, dir.path.string()), UserError);
  }
  SUBCASE("rendered accuracies use one decimal place") {
    std::map<std::string, std::string> preds;
    preds[dataset[0].id] = *dataset[0].gold_sql;
    dataset.resize(3);
    EvalReport report = evaluate(dataset, preds, fx.catalog, dir.path.string());
    CHECK(pct(report.overall.ex_correct, report.overall.n) == doctest::Approx(33.3));
    std::string rendered = render_report(report);
    CHECK(rendered.find("33.3") != std::string::npos);
  }
}

TEST_CASE("retrieval latency measurement") {
  std::vector<SchemaLinkGraph> queries;
  for (int i = 0; i < 5; ++i) queries.push_back(synth::random_graph(8, 200));
  EncoderConfig config;
  config.d = 16;
  config.layers = 1;
  config.heads = 2;
  config.d_ff = 32;
  EncoderParams params = EncoderParams::init(config, build_encoder_vocab(queries), 6);
  RetrievalIndex index = build_index({queries[0]}, params, RelationVocabulary{});

  SUBCASE("empty query set is an error") {
    CHECK_THROWS_AS(measure_retrieval_latency(index, {}, params), UserError);
  }
  SUBCASE("repeated identical queries give p95 >= mean >= 0") {
    LatencyStats stats = measure_retrieval_latency(index, queries, params, 1);
    CHECK(stats.mean_seconds >= 0.0);
    CHECK(stats.p95_seconds >= stats.mean_seconds);
  }
}

TEST_SUITE_END();
