#include "doctest.h"

#include <cmath>

#include "dcgsql/pruner.hpp"
#include "dcgsql/synth.hpp"
#include "support.hpp"

using namespace dcgsql;
using testsupport::TempDir;
using testsupport::write_file;

TEST_SUITE_BEGIN("pruner");

namespace {

DatabaseSchema world() { return synth::world_catalog().databases[0]; }

std::size_t count_kind(const PrunerInput& input, PrunerUnit::Kind kind) {
  std::size_t n = 0;
  for (const auto& u : input.units)
    if (u.kind == kind) ++n;
  return n;
}

CrossEncoderParams tiny_params(const std::vector<std::string>& extra_words = {}) {
  std::set<std::string> words{"which", "regions", "speak", "dutch", "or", "english",
                              "head",  "id",      "name"};
  for (const auto& w : extra_words) words.insert(w);
  CrossEncoderConfig config;
  config.d = 16;
  config.layers = 1;
  config.heads = 2;
  config.d_ff = 32;
  config.max_seq = 128;
  return CrossEncoderParams::init(config, Vocab::build(words), 3);
}

}  // namespace

TEST_CASE("input sequence layout") {
  SUBCASE("world database marker counts") {
    TokenSeq tokens = tokenize_question("Which regions speak Dutch or English?");
    PrunerInput input = build_input_sequence(tokens, world());
    CHECK(input.question_len == 6);
    CHECK(count_kind(input, PrunerUnit::Kind::QuestionToken) == 6);
    CHECK(count_kind(input, PrunerUnit::Kind::TabMarker) == 4);
    CHECK(count_kind(input, PrunerUnit::Kind::ColMarker) == 26);
    // question tokens first, then the first table marker
    CHECK(input.units[0].kind == PrunerUnit::Kind::QuestionToken);
    CHECK(input.units[6].kind == PrunerUnit::Kind::TabMarker);
    CHECK(input.units[6].table == "city");
  }
  SUBCASE("multi-word names contribute one marker plus word units") {
    DatabaseSchema db;
    db.db_id = "mini";
    db.tables = {TableDef{"head id", {}}};
    TokenSeq tokens = tokenize_question("show heads");
    PrunerInput input = build_input_sequence(tokens, db);
    REQUIRE(input.units.size() == 2 + 1 + 2);
    CHECK(input.units[2].kind == PrunerUnit::Kind::TabMarker);
    CHECK(input.units[3].kind == PrunerUnit::Kind::NameWord);
    CHECK(input.units[3].word == "head");
    CHECK(input.units[4].word == "id");
  }
  SUBCASE("single table with no columns") {
    DatabaseSchema db;
    db.db_id = "mini";
    db.tables = {TableDef{"people", {}}};
    PrunerInput input = build_input_sequence(tokenize_question("who"), db);
    REQUIRE(input.units.size() == 3);
    CHECK(input.units[1].kind == PrunerUnit::Kind::TabMarker);
    CHECK(input.units[2].kind == PrunerUnit::Kind::NameWord);
  }
}

TEST_CASE("relevance labels from gold SQL") {
  DatabaseSchema dept;
  dept.db_id = "department_management";
  dept.tables = {TableDef{"head",
                          {{"head_id", ValueType::Number},
                           {"name", ValueType::Text},
                           {"age", ValueType::Number}}}};
  RelevanceLabels labels = derive_relevance_labels("SELECT COUNT(*) FROM head WHERE age > 56", dept);
  CHECK(labels.positive_tables == std::set<std::string>{"head"});
  CHECK(labels.positive_columns ==
        std::set<std::pair<std::string, std::string>>{{"head", "age"}});

  RelevanceLabels city = derive_relevance_labels("SELECT name FROM city", world());
  CHECK(city.positive_tables == std::set<std::string>{"city"});
  CHECK(city.positive_columns ==
        std::set<std::pair<std::string, std::string>>{{"city", "name"}});

  DatabaseSchema weather;
  weather.db_id = "weather";
  weather.tables = {TableDef{"weather",
                             {{"date", ValueType::Time},
                              {"min_dew_point_f", ValueType::Number},
                              {"zip_code", ValueType::Number}}}};
  RelevanceLabels nested = derive_relevance_labels(
      "SELECT date , zip_code FROM weather WHERE min_dew_point_f < "
      "(SELECT min(min_dew_point_f) FROM weather WHERE zip_code = 94107)",
      weather);
  CHECK(nested.positive_tables == std::set<std::string>{"weather"});
  CHECK(nested.positive_columns == std::set<std::pair<std::string, std::string>>{
                                       {"weather", "date"},
                                       {"weather", "min_dew_point_f"},
                                       {"weather", "zip_code"}});

  SUBCASE("select star is table-only evidence") {
    RelevanceLabels star = derive_relevance_labels("SELECT * FROM city", world());
    CHECK(star.positive_tables == std::set<std::string>{"city"});
    CHECK(star.positive_columns.empty());
  }
  SUBCASE("unknown schema item is an error") {
    CHECK_THROWS_AS(derive_relevance_labels("SELECT ghost FROM city", world()), UserError);
  }
  SUBCASE("labels are always a subset of the schema") {
    const DatabaseSchema db = world();
    RelevanceLabels labels2 = derive_relevance_labels(
        "SELECT T1.name FROM city AS T1 JOIN country AS T2 ON T1.countrycode = T2.code "
        "WHERE T2.continent = 'Europe' ORDER BY T1.population DESC LIMIT 3",
        db);
    for (const auto& t : labels2.positive_tables) CHECK(db.find_table(t) != nullptr);
    for (const auto& [t, c] : labels2.positive_columns) CHECK(db.has_column(t, c));
  }
}

TEST_CASE("marker state initialization") {
  CrossEncoderParams params = tiny_params();
  DatabaseSchema db;
  db.db_id = "mini";
  db.tables = {TableDef{"head id", {{"name", ValueType::Text}}}};
  PrunerInput input = build_input_sequence(tokenize_question("which head"), db);
  nn::Matrix states = init_special_token_states(params, input);

  const int d = params.config.d;
  // unit 2 is the TAB marker for "head id": mean of embedding(head), embedding(id)
  const double* head = params.embeddings.row(params.vocab.id("head"));
  const double* id = params.embeddings.row(params.vocab.id("id"));
  for (int c = 0; c < d; ++c) {
    double expected = 0.5 * (head[c] + id[c]) + params.positional.at(2, c);
    CHECK(states.at(2, c) == doctest::Approx(expected).epsilon(1e-12));
  }
  // unit 5 is the COL marker for single-word "name": exactly embedding(name)
  const double* name = params.embeddings.row(params.vocab.id("name"));
  REQUIRE(input.units[5].kind == PrunerUnit::Kind::ColMarker);
  for (int c = 0; c < d; ++c)
    CHECK(states.at(5, c) ==
          doctest::Approx(name[c] + params.positional.at(5, c)).epsilon(1e-12));

  SUBCASE("all-zero embeddings give zero marker states") {
    params.embeddings.zero();
    params.positional.zero();
    nn::Matrix zeroed = init_special_token_states(params, input);
    for (double v : zeroed.data) CHECK(v == 0.0);
  }
}

TEST_CASE("relevance scoring") {
  CrossEncoderParams params = tiny_params();
  SUBCASE("zero classification heads give probability one half") {
    PrunerInput input =
        build_input_sequence(tokenize_question("Which regions speak Dutch or English?"),
                             world());
    RelevanceScores scores = score_relevance(params, input);
    REQUIRE(scores.tables.size() == 4);
    REQUIRE(scores.columns.size() == 26);
    for (const auto& [name, score] : scores.tables) CHECK(score.prob == doctest::Approx(0.5));
    for (const auto& [key, score] : scores.columns) CHECK(score.prob == doctest::Approx(0.5));
  }
  SUBCASE("single question token forces attention row [1.0]") {
    DatabaseSchema db;
    db.db_id = "mini";
    db.tables = {TableDef{"head", {{"name", ValueType::Text}}}};
    PrunerInput input = build_input_sequence(tokenize_question("head"), db);
    RelevanceScores scores = score_relevance(params, input);
    for (const auto& [name, score] : scores.tables) {
      REQUIRE(score.attention.size() == 1);
      CHECK(score.attention[0] == doctest::Approx(1.0));
    }
  }
  SUBCASE("pre-max rows sum to one and final rows peak at one") {
    PrunerInput input = build_input_sequence(
        tokenize_question("Which regions speak Dutch or English?"), world());
    RelevanceDetail detail = score_relevance_detailed(params, input);
    for (const auto& [name, row] : detail.table_rows) {
      double sum = 0.0;
      for (double v : row) sum += v;
      CHECK(std::abs(sum - 1.0) < 1e-9);
    }
    for (const auto& [name, score] : detail.scores.tables) {
      double mx = 0.0;
      for (double v : score.attention) mx = std::max(mx, v);
      CHECK(mx == doctest::Approx(1.0));
    }
  }
}

TEST_CASE("pruning") {
  DatabaseSchema dept;
  dept.db_id = "d";
  dept.tables = {TableDef{"head", {{"age", ValueType::Number}, {"name", ValueType::Text}}},
                 TableDef{"dept", {{"budget", ValueType::Number}}}};
  dept.foreign_keys = {};
  RelevanceScores scores;
  scores.sample_id = "s";
  scores.tables["head"] = {0.9, {1.0}};
  scores.tables["dept"] = {0.2, {1.0}};
  scores.columns[{"head", "age"}] = {0.8, {1.0}};
  scores.columns[{"head", "name"}] = {0.1, {1.0}};
  scores.columns[{"dept", "budget"}] = {0.9, {1.0}};

  SUBCASE("keeps items above the threshold") {
    PrunedSchema pruned = prune(scores, dept, 0.5);
    REQUIRE(pruned.tables.size() == 1);
    CHECK(pruned.tables[0].name == "head");
    REQUIRE(pruned.tables[0].columns.size() == 1);
    CHECK(pruned.tables[0].columns[0].name == "age");
  }
  SUBCASE("threshold comparison is strict") {
    scores.tables["head"].prob = 0.5;
    PrunedSchema pruned = prune(scores, dept, 0.5);
    // head at exactly 0.5 is dropped; fallback keeps the argmax table
    REQUIRE(pruned.tables.size() == 1);
    CHECK(pruned.tables[0].name == "head");  // 0.5 > 0.2 still argmax
  }
  SUBCASE("all-zero scores fall back to argmax table with top-3 columns") {
    for (auto& [k, v] : scores.tables) v.prob = 0.0;
    for (auto& [k, v] : scores.columns) v.prob = 0.0;
    PrunedSchema pruned = prune(scores, dept, 0.5);
    REQUIRE(pruned.tables.size() == 1);
    CHECK(pruned.tables[0].name == "head");
    CHECK(pruned.tables[0].columns.size() == 2);  // head has only two columns
  }
  SUBCASE("output is a sub-schema and never empty") {
    for (double thr : {0.05, 0.3, 0.5, 0.85, 0.99}) {
      PrunedSchema pruned = prune(scores, dept, thr);
      CHECK(!pruned.tables.empty());
      for (const auto& t : pruned.tables) {
        const TableDef* orig = dept.find_table(t.name);
        REQUIRE(orig != nullptr);
        for (const auto& c : t.columns) CHECK(orig->find_column(c.name) != nullptr);
      }
    }
  }
  SUBCASE("foreign keys are restricted to kept endpoints") {
    DatabaseSchema two = world();
    RelevanceScores ws;
    ws.sample_id = "w";
    for (const auto& t : two.tables) {
      ws.tables[t.name] = {0.9, {1.0}};
      for (const auto& c : t.columns) ws.columns[{t.name, c.name}] = {0.9, {1.0}};
    }
    ws.columns[{"country", "code"}].prob = 0.1;  // drop one FK endpoint
    PrunedSchema pruned = prune(ws, two, 0.5);
    for (const auto& fk : pruned.foreign_keys) {
      CHECK(pruned.has_column(fk.from_table, fk.from_column));
      CHECK(pruned.has_column(fk.to_table, fk.to_column));
    }
    CHECK(pruned.foreign_keys.empty());  // both FKs pointed at country.code
  }
}

TEST_CASE("scores files") {
  TempDir dir("scores");
  SchemaCatalog catalog = synth::world_catalog();
  std::vector<Sample> samples{{"q1", "world", "Which regions speak Dutch or English?", {}}};

  RelevanceScores good;
  good.sample_id = "q1";
  const DatabaseSchema& db = catalog.databases[0];
  for (const auto& t : db.tables) {
    good.tables[t.name] = {0.5, std::vector<double>(6, 0.5)};
    for (const auto& c : t.columns)
      good.columns[{t.name, c.name}] = {0.5, std::vector<double>(6, 0.5)};
  }

  SUBCASE("well-formed file round-trips") {
    save_scores_file({good}, dir.file("s.jsonl"));
    auto loaded = load_scores_file(dir.file("s.jsonl"), catalog, samples);
    REQUIRE(loaded.size() == 1);
    CHECK(loaded[0].tables.size() == 4);
    CHECK(loaded[0].columns.size() == 26);
  }
  SUBCASE("attention length mismatch names the sample") {
    RelevanceScores bad = good;
    bad.tables["city"].attention.pop_back();
    save_scores_file({bad}, dir.file("bad.jsonl"));
    CHECK(testsupport::throws_with_substring(
        [&] { load_scores_file(dir.file("bad.jsonl"), catalog, samples); }, "q1"));
  }
  SUBCASE("probability outside [0,1] is rejected") {
    RelevanceScores bad = good;
    bad.tables["city"].prob = 1.3;
    save_scores_file({bad}, dir.file("bad.jsonl"));
    CHECK_THROWS_AS(load_scores_file(dir.file("bad.jsonl"), catalog, samples), UserError);
  }
  SUBCASE("missing schema item is rejected") {
    RelevanceScores bad = good;
    bad.tables.erase("city");
    save_scores_file({bad}, dir.file("bad.jsonl"));
    CHECK(testsupport::throws_with_substring(
        [&] { load_scores_file(dir.file("bad.jsonl"), catalog, samples); }, "city"));
  }
}

TEST_CASE("training is deterministic and zero epochs keep parameters") {
  synth::PrunerCorpus corpus = synth::make_pruner_corpus(24, 5);
  Vocab vocab = build_pruner_vocab(corpus.samples, corpus.catalog);
  CrossEncoderConfig config;
  config.d = 16;
  config.layers = 1;
  config.heads = 2;
  config.d_ff = 32;

  SUBCASE("zero epochs") {
    CrossEncoderParams params = CrossEncoderParams::init(config, vocab, 3);
    CrossEncoderParams before = params;
    PrunerTrainConfig tc;
    tc.epochs = 0;
    PrunerMetrics metrics =
        train_pruner(params, corpus.samples, corpus.catalog, corpus.labels, tc);
    CHECK(params.embeddings == before.embeddings);
    CHECK(params.table_head_w == before.table_head_w);
    CHECK(metrics.epoch_loss.empty());
  }
  SUBCASE("same seed, bit-identical parameters") {
    PrunerTrainConfig tc;
    tc.epochs = 2;
    tc.seed = 11;
    CrossEncoderParams p1 = CrossEncoderParams::init(config, vocab, 3);
    CrossEncoderParams p2 = CrossEncoderParams::init(config, vocab, 3);
    train_pruner(p1, corpus.samples, corpus.catalog, corpus.labels, tc);
    train_pruner(p2, corpus.samples, corpus.catalog, corpus.labels, tc);
    auto t1 = p1.tensors();
    auto t2 = p2.tensors();
    for (std::size_t i = 0; i < t1.size(); ++i) CHECK(t1[i]->data == t2[i]->data);
  }
  SUBCASE("empty dataset is an error") {
    CrossEncoderParams params = CrossEncoderParams::init(config, vocab, 3);
    CHECK_THROWS_AS(train_pruner(params, {}, corpus.catalog, {}, PrunerTrainConfig{}),
                    UserError);
  }
}

TEST_CASE("checkpoint round trip") {
  TempDir dir("pruner_ckpt");
  CrossEncoderParams params = tiny_params();
  save_pruner_checkpoint(params, dir.file("p.ckpt"));
  CrossEncoderParams loaded = load_pruner_checkpoint(dir.file("p.ckpt"));
  CHECK(loaded.config.d == params.config.d);
  CHECK(loaded.vocab.words == params.vocab.words);
  auto t1 = params.tensors();
  auto t2 = loaded.tensors();
  REQUIRE(t1.size() == t2.size());
  for (std::size_t i = 0; i < t1.size(); ++i) CHECK(t1[i]->data == t2[i]->data);
}

TEST_SUITE_END();
