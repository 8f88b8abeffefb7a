#include "dcgsql/synth.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <set>

#include "dcgsql/nn.hpp"
#include "dcgsql/sqlkit.hpp"

namespace dcgsql::synth {

namespace {

struct Db {
  sqlite3* handle = nullptr;
  explicit Db(const std::string& path) {
    if (sqlite3_open(path.c_str(), &handle) != SQLITE_OK) {
      std::string msg = handle ? sqlite3_errmsg(handle) : "open failed";
      sqlite3_close(handle);
      throw Error("cannot create database '" + path + "': " + msg);
    }
  }
  ~Db() { sqlite3_close(handle); }
  void exec(const std::string& sql) {
    char* err = nullptr;
    if (sqlite3_exec(handle, sql.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
      std::string msg = err ? err : "error";
      sqlite3_free(err);
      throw Error("sqlite exec failed: " + msg + " in: " + sql);
    }
  }
};

bool parse_ll(const std::string& s, long long& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_dbl(const std::string& s, double& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

void make_sqlite_db(const std::string& path, const DatabaseSchema& schema,
                    const std::map<std::string, std::vector<std::vector<std::string>>>& rows) {
  std::filesystem::create_directories(std::filesystem::path(path).parent_path());
  std::filesystem::remove(path);
  Db db(path);
  db.exec("BEGIN");
  for (const auto& table : schema.tables) {
    if (table.name == "sqlite_sequence") {
      // Reserved name; materialize it via an AUTOINCREMENT table instead.
      db.exec("CREATE TABLE \"_seq_seed\" (id INTEGER PRIMARY KEY AUTOINCREMENT)");
      db.exec("INSERT INTO \"_seq_seed\" DEFAULT VALUES");
      db.exec("DROP TABLE \"_seq_seed\"");
      db.exec("DELETE FROM sqlite_sequence");
      auto rit = rows.find(table.name);
      if (rit != rows.end())
        for (const auto& row : rit->second)
          if (row.size() == 2)
            db.exec("INSERT INTO sqlite_sequence(name, seq) VALUES ('" + row[0] + "', " +
                    row[1] + ")");
      continue;
    }
    std::string create = "CREATE TABLE \"" + table.name + "\" (";
    for (std::size_t i = 0; i < table.columns.size(); ++i) {
      if (i > 0) create += ", ";
      create += "\"" + table.columns[i].name + "\" " +
                (table.columns[i].type == ValueType::Number ? "NUMERIC" : "TEXT");
    }
    create += ")";
    db.exec(create);

    auto rit = rows.find(table.name);
    if (rit == rows.end()) continue;
    std::string insert = "INSERT INTO \"" + table.name + "\" VALUES (";
    for (std::size_t i = 0; i < table.columns.size(); ++i)
      insert += i == 0 ? "?" : ", ?";
    insert += ")";
    sqlite3_stmt* stmt = nullptr;
    if (sqlite3_prepare_v2(db.handle, insert.c_str(), -1, &stmt, nullptr) != SQLITE_OK)
      throw Error("sqlite prepare failed for table " + table.name);
    for (const auto& row : rit->second) {
      sqlite3_reset(stmt);
      for (std::size_t c = 0; c < row.size() && c < table.columns.size(); ++c) {
        const int idx = static_cast<int>(c) + 1;
        long long iv;
        double dv;
        if (table.columns[c].type == ValueType::Number && parse_ll(row[c], iv))
          sqlite3_bind_int64(stmt, idx, iv);
        else if (table.columns[c].type == ValueType::Number && parse_dbl(row[c], dv))
          sqlite3_bind_double(stmt, idx, dv);
        else
          sqlite3_bind_text(stmt, idx, row[c].c_str(), -1, SQLITE_TRANSIENT);
      }
      if (sqlite3_step(stmt) != SQLITE_DONE) {
        sqlite3_finalize(stmt);
        throw Error("sqlite insert failed for table " + table.name);
      }
    }
    sqlite3_finalize(stmt);
  }
  db.exec("COMMIT");
}

// ---------------------------------------------------------------------------
// World fixture
// ---------------------------------------------------------------------------

SchemaCatalog world_catalog() {
  DatabaseSchema world;
  world.db_id = "world";
  world.tables = {
      TableDef{"city",
               {{"id", ValueType::Number},
                {"name", ValueType::Text},
                {"countrycode", ValueType::Text},
                {"district", ValueType::Text},
                {"population", ValueType::Number}}},
      TableDef{"sqlite_sequence", {{"name", ValueType::Text}, {"seq", ValueType::Number}}},
      TableDef{"country",
               {{"code", ValueType::Text},
                {"name", ValueType::Text},
                {"continent", ValueType::Text},
                {"region", ValueType::Text},
                {"surfacearea", ValueType::Number},
                {"indepyear", ValueType::Number},
                {"population", ValueType::Number},
                {"lifeexpectancy", ValueType::Number},
                {"gnp", ValueType::Number},
                {"gnpold", ValueType::Number},
                {"localname", ValueType::Text},
                {"governmentform", ValueType::Text},
                {"headofstate", ValueType::Text},
                {"capital", ValueType::Number},
                {"code2", ValueType::Text}}},
      TableDef{"countrylanguage",
               {{"countrycode", ValueType::Text},
                {"language", ValueType::Text},
                {"isofficial", ValueType::Text},
                {"percentage", ValueType::Number}}}};
  world.foreign_keys = {ForeignKey{"city", "countrycode", "country", "code"},
                        ForeignKey{"countrylanguage", "countrycode", "country", "code"}};
  world.primary_keys = {{"city", "id"}, {"country", "code"}};
  SchemaCatalog catalog;
  catalog.databases.push_back(std::move(world));
  return catalog;
}

void write_world_value_store(const std::string& db_file) {
  const SchemaCatalog catalog = world_catalog();
  std::map<std::string, std::vector<std::vector<std::string>>> rows;
  rows["city"] = {{"1", "Amsterdam", "NLD", "Noord-Holland", "731200"},
                  {"2", "Rotterdam", "NLD", "Zuid-Holland", "593321"},
                  {"3", "London", "GBR", "England", "7285000"},
                  {"4", "Paris", "FRA", "Ile-de-France", "2125246"}};
  rows["sqlite_sequence"] = {{"city", "4"}};
  rows["country"] = {
      {"NLD", "Netherlands", "Europe", "Western Europe", "41526", "1581", "15864000",
       "78.3", "371362", "360478", "Nederland", "Constitutional Monarchy", "Beatrix", "5",
       "NL"},
      {"GBR", "United Kingdom", "Europe", "British Islands", "242900", "1066", "59623400",
       "77.7", "1378330", "1296830", "United Kingdom", "Constitutional Monarchy",
       "Elisabeth II", "456", "GB"},
      {"FRA", "France", "Europe", "Western Europe", "551500", "843", "59225700", "78.8",
       "1424285", "1392448", "France", "Republic", "Jacques Chirac", "2974", "FR"}};
  rows["countrylanguage"] = {{"NLD", "Dutch", "T", "95.6"},
                             {"GBR", "English", "T", "97.3"},
                             {"FRA", "French", "T", "93.6"},
                             {"NLD", "Fries", "F", "3.7"}};
  make_sqlite_db(db_file, catalog.databases[0], rows);
}

// ---------------------------------------------------------------------------
// Heuristic scores
// ---------------------------------------------------------------------------

RelevanceScores heuristic_scores_for(const Sample& sample, const DatabaseSchema& db,
                                     const RelevanceLabels& labels) {
  const TokenSeq tokens = tokenize_question(sample.question);
  auto attention_row = [&](const std::string& name) {
    std::vector<double> row(tokens.size(), 0.15);
    std::set<std::string> words;
    for (const auto& w : split_name_words(name)) words.insert(w);
    for (const auto& tok : tokens.tokens)
      if (words.count(tok.surface) || words.count(tok.lemma)) row[tok.index] = 1.0;
    return row;
  };
  RelevanceScores scores;
  scores.sample_id = sample.id;
  for (const auto& table : db.tables) {
    ItemScore item;
    item.prob = labels.positive_tables.count(table.name) ? 0.9 : 0.1;
    item.attention = attention_row(table.name);
    scores.tables[table.name] = std::move(item);
    for (const auto& column : table.columns) {
      ItemScore col;
      col.prob = labels.positive_columns.count({table.name, column.name}) ? 0.9 : 0.1;
      col.attention = attention_row(column.name);
      scores.columns[{table.name, column.name}] = std::move(col);
    }
  }
  return scores;
}

std::vector<RelevanceScores> heuristic_scores(const std::vector<Sample>& samples,
                                              const SchemaCatalog& catalog) {
  std::vector<RelevanceScores> out;
  for (const auto& sample : samples) {
    const DatabaseSchema& db = catalog.at(sample.db_id);
    RelevanceLabels labels;
    if (sample.gold_sql) labels = derive_relevance_labels(*sample.gold_sql, db);
    out.push_back(heuristic_scores_for(sample, db, labels));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Word generation
// ---------------------------------------------------------------------------

namespace {

std::string make_word(nn::Rng& rng, int syllables) {
  static const char consonants[] = "bdfgklmnprstvz";
  static const char vowels[] = "aeiou";
  std::string word;
  for (int s = 0; s < syllables; ++s) {
    word.push_back(consonants[rng.bounded(sizeof consonants - 1)]);
    word.push_back(vowels[rng.bounded(sizeof vowels - 1)]);
  }
  return word;
}

std::vector<std::string> make_lexicon(nn::Rng& rng, std::size_t count) {
  std::set<std::string> seen;
  std::vector<std::string> words;
  while (words.size() < count) {
    std::string w = make_word(rng, 2 + static_cast<int>(rng.bounded(2)));
    if (seen.insert(w).second) words.push_back(std::move(w));
  }
  return words;
}

const std::vector<std::string> kFillers = {"show", "list", "find", "what",  "which", "how",
                                           "many", "the",  "of",  "with",  "all",   "total",
                                           "each", "per",  "for", "give"};

}  // namespace

// ---------------------------------------------------------------------------
// Pruner corpus
// ---------------------------------------------------------------------------

PrunerCorpus make_pruner_corpus(std::size_t n_samples, std::uint64_t seed) {
  nn::Rng rng(seed);
  std::vector<std::string> lexicon = make_lexicon(rng, 320);
  std::size_t next_word = 0;
  auto take_word = [&] { return lexicon[next_word++ % lexicon.size()]; };

  PrunerCorpus corpus;
  constexpr int kDbs = 10, kTables = 4, kColumns = 3;
  for (int d = 0; d < kDbs; ++d) {
    DatabaseSchema db;
    db.db_id = "synth" + std::to_string(d);
    for (int t = 0; t < kTables; ++t) {
      TableDef table;
      table.name = take_word();
      for (int c = 0; c < kColumns; ++c) {
        std::string name = take_word();
        if (rng.bounded(3) == 0) name += " " + take_word();  // multi-word column
        table.columns.push_back({name, ValueType::Text});
      }
      db.tables.push_back(std::move(table));
    }
    corpus.catalog.databases.push_back(std::move(db));
  }

  for (std::size_t i = 0; i < n_samples; ++i) {
    const DatabaseSchema& db = corpus.catalog.databases[rng.bounded(kDbs)];
    RelevanceLabels labels;
    std::vector<std::string> tokens{kFillers[rng.bounded(kFillers.size())], "the"};
    const std::size_t n_tables = 1 + rng.bounded(2);
    std::set<std::size_t> table_picks;
    while (table_picks.size() < n_tables) table_picks.insert(rng.bounded(kTables));
    for (std::size_t ti : table_picks) {
      const TableDef& table = db.tables[ti];
      labels.positive_tables.insert(table.name);
      const std::size_t n_cols = 1 + rng.bounded(2);
      std::set<std::size_t> col_picks;
      while (col_picks.size() < n_cols) col_picks.insert(rng.bounded(kColumns));
      for (std::size_t ci : col_picks) {
        labels.positive_columns.emplace(table.name, table.columns[ci].name);
        for (const auto& w : split_name_words(table.columns[ci].name)) tokens.push_back(w);
      }
      tokens.push_back("of");
      for (const auto& w : split_name_words(table.name)) tokens.push_back(w);
    }
    if (rng.bounded(2) == 0) tokens.push_back(kFillers[rng.bounded(kFillers.size())]);

    Sample sample;
    sample.id = "p" + std::to_string(i);
    sample.db_id = db.db_id;
    for (const auto& tok : tokens) {
      if (!sample.question.empty()) sample.question.push_back(' ');
      sample.question += tok;
    }
    corpus.labels[sample.id] = std::move(labels);
    corpus.samples.push_back(std::move(sample));
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// Retrieval corpus
// ---------------------------------------------------------------------------

RetrievalCorpus make_retrieval_corpus(std::size_t n_samples, std::uint64_t seed) {
  nn::Rng rng(seed);
  std::vector<std::string> lexicon = make_lexicon(rng, 400);
  std::size_t next_word = 0;
  auto take_word = [&] { return lexicon[next_word++ % lexicon.size()]; };

  RetrievalCorpus corpus;
  constexpr int kDbs = 10, kTables = 4, kColumns = 3, kGroups = 25;
  for (int d = 0; d < kDbs; ++d) {
    DatabaseSchema db;
    db.db_id = "pool" + std::to_string(d);
    for (int t = 0; t < kTables; ++t) {
      TableDef table;
      table.name = take_word();
      for (int c = 0; c < kColumns; ++c)
        table.columns.push_back({take_word(), c == 0 ? ValueType::Number : ValueType::Text});
      db.tables.push_back(std::move(table));
    }
    corpus.catalog.databases.push_back(std::move(db));
  }

  // Each skeleton group carries two distinctive keywords and an SQL shape.
  struct Group {
    std::vector<std::string> keywords;
    int shape = 0;
  };
  std::vector<Group> groups(kGroups);
  for (int g = 0; g < kGroups; ++g) {
    groups[g].keywords = {take_word(), take_word()};
    groups[g].shape = g % 5;
  }

  auto make_sql = [&](int shape, const std::string& table, const std::string& col,
                      const std::string& col2) {
    switch (shape) {
      case 0: return "SELECT " + col + " FROM " + table;
      case 1: return "SELECT COUNT(*) FROM " + table + " WHERE " + col + " > 10";
      case 2: return "SELECT " + col + " FROM " + table + " ORDER BY " + col2;
      case 3: return "SELECT " + col + " , COUNT(*) FROM " + table + " GROUP BY " + col;
      default: return "SELECT MAX(" + col + ") FROM " + table;
    }
  };

  for (std::size_t i = 0; i < n_samples; ++i) {
    const int g = static_cast<int>(i % kGroups);
    const DatabaseSchema& db = corpus.catalog.databases[rng.bounded(kDbs)];
    const TableDef& table = db.tables[rng.bounded(kTables)];
    const std::string& col = table.columns[rng.bounded(kColumns)].name;
    const std::string& col2 = table.columns[rng.bounded(kColumns)].name;

    Sample sample;
    sample.id = "s" + std::to_string(i);
    sample.db_id = db.db_id;
    sample.question = groups[g].keywords[0] + " " + groups[g].keywords[1] + " " + col +
                      " of " + table.name + " " + kFillers[rng.bounded(kFillers.size())];
    sample.gold_sql = make_sql(groups[g].shape, table.name, col, col2);
    corpus.group_of[sample.id] = g;
    corpus.samples.push_back(std::move(sample));
  }

  // Graphs from heuristic scores at the paper thresholds.
  for (const auto& sample : corpus.samples) {
    const DatabaseSchema& db = corpus.catalog.at(sample.db_id);
    RelevanceLabels labels = derive_relevance_labels(*sample.gold_sql, db);
    RelevanceScores scores = heuristic_scores_for(sample, db, labels);
    PrunedSchema pruned = prune(scores, db, 0.5);
    corpus.graphs.push_back(build_graph(sample, tokenize_question(sample.question), pruned,
                                        scores, {}, {}));
  }

  // Planted usefulness ranking: same-group candidates are positives.
  const std::size_t n_train_anchors = std::min<std::size_t>(n_samples / 4, 125);
  constexpr std::size_t kPos = 4, kNeg = 8;
  for (std::size_t a = 0; a < n_train_anchors; ++a) {
    const Sample& anchor = corpus.samples[a];
    const int g = corpus.group_of.at(anchor.id);
    ScoredCandidateSet set;
    set.anchor_id = anchor.id;
    for (const auto& candidate : corpus.samples) {
      if (candidate.id == anchor.id) continue;
      const bool same = corpus.group_of.at(candidate.id) == g;
      const double jitter = 0.05 * rng.uniform01();
      set.ranked.emplace_back(candidate.id, same ? 0.9 + jitter : 0.05 + jitter);
    }
    std::sort(set.ranked.begin(), set.ranked.end(), [](const auto& x, const auto& y) {
      if (x.second != y.second) return x.second > y.second;
      return x.first < y.first;
    });
    for (std::size_t p = 0; p < kPos; ++p) set.positives.push_back(set.ranked[p].first);
    for (std::size_t n = set.ranked.size() - kNeg; n < set.ranked.size(); ++n)
      set.negatives.push_back(set.ranked[n].first);
    corpus.train_sets.push_back(std::move(set));
  }
  for (std::size_t i = n_train_anchors; i < std::min(n_train_anchors + 50, n_samples); ++i)
    corpus.eval_anchor_ids.push_back(corpus.samples[i].id);
  return corpus;
}

// ---------------------------------------------------------------------------
// End-to-end fixture
// ---------------------------------------------------------------------------

E2eFixture make_e2e_fixture() {
  E2eFixture fx;

  DatabaseSchema shop;
  shop.db_id = "shop";
  shop.tables = {
      TableDef{"products",
               {{"pid", ValueType::Number},
                {"pname", ValueType::Text},
                {"price", ValueType::Number},
                {"category", ValueType::Text}}},
      TableDef{"orders",
               {{"oid", ValueType::Number},
                {"product_id", ValueType::Number},
                {"qty", ValueType::Number}}},
      TableDef{"customers",
               {{"cid", ValueType::Number},
                {"cname", ValueType::Text},
                {"city", ValueType::Text}}}};
  shop.foreign_keys = {ForeignKey{"orders", "product_id", "products", "pid"}};
  shop.primary_keys = {{"products", "pid"}, {"orders", "oid"}, {"customers", "cid"}};

  DatabaseSchema library;
  library.db_id = "library";
  library.tables = {
      TableDef{"books",
               {{"bid", ValueType::Number},
                {"title", ValueType::Text},
                {"year", ValueType::Number}}},
      TableDef{"authors", {{"aid", ValueType::Number}, {"aname", ValueType::Text}}},
      TableDef{"loans",
               {{"lid", ValueType::Number},
                {"book_id", ValueType::Number},
                {"member", ValueType::Text}}}};
  library.foreign_keys = {ForeignKey{"loans", "book_id", "books", "bid"}};
  library.primary_keys = {{"books", "bid"}, {"authors", "aid"}, {"loans", "lid"}};

  DatabaseSchema travel;
  travel.db_id = "travel";
  travel.tables = {
      TableDef{"cities",
               {{"cid", ValueType::Number},
                {"cname", ValueType::Text},
                {"population", ValueType::Number}}},
      TableDef{"routes",
               {{"rid", ValueType::Number},
                {"origin", ValueType::Text},
                {"target", ValueType::Text},
                {"distance", ValueType::Number}}}};
  travel.primary_keys = {{"cities", "cid"}, {"routes", "rid"}};

  fx.catalog.databases = {shop, library, travel};

  fx.rows["shop"]["products"] = {{"1", "hammer", "12", "tools"},
                                 {"2", "drill", "85", "tools"},
                                 {"3", "lamp", "25", "home"},
                                 {"4", "chair", "40", "home"},
                                 {"5", "mug", "6", "kitchen"},
                                 {"6", "kettle", "30", "kitchen"}};
  fx.rows["shop"]["orders"] = {{"1", "2", "3"}, {"2", "2", "1"}, {"3", "5", "10"},
                               {"4", "3", "2"}, {"5", "1", "4"}};
  fx.rows["shop"]["customers"] = {{"1", "Ada", "Rome"},
                                  {"2", "Bo", "Oslo"},
                                  {"3", "Cid", "Rome"},
                                  {"4", "Dee", "Kyoto"}};
  fx.rows["library"]["books"] = {{"1", "Dune", "1965"},
                                 {"2", "Hyperion", "1989"},
                                 {"3", "Blindsight", "2006"},
                                 {"4", "Contact", "1985"},
                                 {"5", "Anathem", "2008"}};
  fx.rows["library"]["authors"] = {{"1", "Herbert"}, {"2", "Simmons"}, {"3", "Watts"}};
  fx.rows["library"]["loans"] = {{"1", "1", "kim"},
                                 {"2", "3", "lee"},
                                 {"3", "1", "kim"},
                                 {"4", "5", "ada"}};
  fx.rows["travel"]["cities"] = {{"1", "Tokyo", "13960000"},
                                 {"2", "Lyon", "513000"},
                                 {"3", "Porto", "237000"},
                                 {"4", "Cairo", "9540000"}};
  fx.rows["travel"]["routes"] = {{"1", "Tokyo", "Lyon", "9710"},
                                 {"2", "Lyon", "Porto", "1210"},
                                 {"3", "Porto", "Cairo", "3770"},
                                 {"4", "Cairo", "Tokyo", "9570"}};

  struct Case {
    const char* db;
    const char* question;
    const char* sql;
  };
  const Case cases[] = {
      {"shop", "list all product names", "SELECT pname FROM products"},
      {"shop", "how many orders are there", "SELECT COUNT(*) FROM orders"},
      {"shop", "names of products with price above 20",
       "SELECT pname FROM products WHERE price > 20"},
      {"shop", "product names ordered by price", "SELECT pname FROM products ORDER BY price"},
      {"shop", "total quantity per product",
       "SELECT product_id , SUM(qty) FROM orders GROUP BY product_id"},
      {"shop", "names of products that have orders",
       "SELECT DISTINCT T1.pname FROM products AS T1 JOIN orders AS T2 ON T1.pid = "
       "T2.product_id"},
      {"shop", "name of the cheapest product",
       "SELECT pname FROM products ORDER BY price LIMIT 1"},
      {"shop", "customers from rome", "SELECT cname FROM customers WHERE city = 'Rome'"},
      {"library", "titles of books published after 1990",
       "SELECT title FROM books WHERE year > 1990"},
      {"library", "count books per year", "SELECT year , COUNT(*) FROM books GROUP BY year"},
      {"library", "titles of borrowed books",
       "SELECT DISTINCT T1.title FROM books AS T1 JOIN loans AS T2 ON T1.bid = T2.book_id"},
      {"library", "members with more than 1 loan",
       "SELECT member FROM loans GROUP BY member HAVING COUNT(*) > 1"},
      {"library", "title of the oldest book",
       "SELECT title FROM books ORDER BY year LIMIT 1"},
      {"library", "titles of books never borrowed",
       "SELECT title FROM books WHERE bid NOT IN (SELECT book_id FROM loans)"},
      {"travel", "city names with population above 1000000",
       "SELECT cname FROM cities WHERE population > 1000000"},
      {"travel", "average route distance", "SELECT AVG(distance) FROM routes"},
      {"travel", "routes longer than the average",
       "SELECT rid FROM routes WHERE distance > (SELECT AVG(distance) FROM routes)"},
      {"travel", "number of cities", "SELECT COUNT(*) FROM cities"},
      {"travel", "origins of routes by descending distance",
       "SELECT origin FROM routes ORDER BY distance DESC"},
      {"travel", "city names sorted alphabetically", "SELECT cname FROM cities ORDER BY cname"},
  };
  int n = 0;
  for (const Case& c : cases) {
    ++n;
    Sample test;
    test.id = "t" + std::to_string(n);
    test.db_id = c.db;
    test.question = c.question;
    test.gold_sql = c.sql;
    fx.tests.push_back(test);
    Sample twin = test;
    twin.id = "tw" + std::to_string(n);
    fx.pool.push_back(std::move(twin));
  }

  const Case distractors[] = {
      {"shop", "all product categories", "SELECT DISTINCT category FROM products"},
      {"shop", "most expensive product name",
       "SELECT pname FROM products ORDER BY price DESC LIMIT 1"},
      {"shop", "how many customers are there", "SELECT COUNT(*) FROM customers"},
      {"shop", "order quantities above 2", "SELECT oid FROM orders WHERE qty > 2"},
      {"shop", "cities of all customers", "SELECT city FROM customers"},
      {"library", "all author names", "SELECT aname FROM authors"},
      {"library", "books from before 1980", "SELECT title FROM books WHERE year < 1980"},
      {"library", "how many loans are there", "SELECT COUNT(*) FROM loans"},
      {"library", "members who borrowed books", "SELECT DISTINCT member FROM loans"},
      {"library", "latest book year", "SELECT MAX(year) FROM books"},
      {"travel", "smallest city population", "SELECT MIN(population) FROM cities"},
      {"travel", "routes shorter than 2000", "SELECT rid FROM routes WHERE distance < 2000"},
      {"travel", "destinations of all routes", "SELECT target FROM routes"},
      {"travel", "city names and populations", "SELECT cname , population FROM cities"},
      {"travel", "longest route origin",
       "SELECT origin FROM routes ORDER BY distance DESC LIMIT 1"},
  };
  for (const Case& c : distractors) {
    ++n;
    Sample s;
    s.id = "d" + std::to_string(n);
    s.db_id = c.db;
    s.question = c.question;
    s.gold_sql = c.sql;
    fx.pool.push_back(std::move(s));
  }
  return fx;
}

void write_e2e_files(const E2eFixture& fx, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  save_catalog(fx.catalog, dir + "/catalog.json");
  save_dataset(fx.pool, dir + "/pool.jsonl");
  save_dataset(fx.tests, dir + "/test.jsonl");
  for (const auto& db : fx.catalog.databases) {
    auto it = fx.rows.find(db.db_id);
    make_sqlite_db(value_store_path(dir + "/dbs", db.db_id), db,
                   it == fx.rows.end() ? std::map<std::string, std::vector<std::vector<std::string>>>{}
                                       : it->second);
  }
  save_scores_file(heuristic_scores(fx.pool, fx.catalog), dir + "/scores_pool.jsonl");
  save_scores_file(heuristic_scores(fx.tests, fx.catalog), dir + "/scores_test.jsonl");
}

// ---------------------------------------------------------------------------
// Random graphs
// ---------------------------------------------------------------------------

SchemaLinkGraph random_graph(std::size_t n_nodes, std::uint64_t seed) {
  nn::Rng rng(seed);
  SchemaLinkGraph g;
  g.sample_id = "rand" + std::to_string(seed);
  const std::size_t n_tokens = std::max<std::size_t>(1, n_nodes / 2);
  for (std::size_t i = 0; i < n_nodes; ++i) {
    GraphNode node;
    if (i < n_tokens) {
      node.kind = GraphNode::Kind::Token;
      node.token_index = i;
      node.surface = make_word(rng, 2);
    } else if (i == n_tokens) {
      node.kind = GraphNode::Kind::Table;
      node.table = make_word(rng, 2);
    } else {
      node.kind = GraphNode::Kind::Column;
      node.table = "t";
      node.column = make_word(rng, 2);
    }
    g.nodes.push_back(std::move(node));
  }
  g.question_len = n_tokens;

  static const EdgeType kForward[] = {
      EdgeType::AttentionMatchTable, EdgeType::AttentionMatchColumn,
      EdgeType::ExactNameMatch, EdgeType::PartialNameMatch, EdgeType::ValueMatch,
      EdgeType::ColumnOfTable, EdgeType::ForeignKey, EdgeType::PrimaryKey,
      EdgeType::SameTable, EdgeType::QuestionDistPlus1, EdgeType::QuestionDistPlus2};
  std::set<Edge> edges;
  const std::size_t n_edges = n_nodes * 2;
  for (std::size_t e = 0; e < n_edges; ++e) {
    int i = static_cast<int>(rng.bounded(n_nodes));
    int j = static_cast<int>(rng.bounded(n_nodes));
    if (i == j) continue;
    EdgeType t = kForward[rng.bounded(std::size(kForward))];
    edges.insert({i, j, t});
    edges.insert({j, i, inverse(t)});
  }
  for (std::size_t i = 0; i < n_nodes; ++i)
    edges.insert({static_cast<int>(i), static_cast<int>(i), EdgeType::SelfLoop});
  g.edges.assign(edges.begin(), edges.end());
  return g;
}

}  // namespace dcgsql::synth
