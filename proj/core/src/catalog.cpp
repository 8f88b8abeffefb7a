#include "dcgsql/catalog.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace dcgsql {

using nlohmann::json;

ValueType value_type_from_string(const std::string& s) {
  if (s == "text") return ValueType::Text;
  if (s == "number") return ValueType::Number;
  if (s == "time") return ValueType::Time;
  if (s == "boolean") return ValueType::Boolean;
  if (s == "other") return ValueType::Other;
  throw UserError("unknown column type '" + s + "'");
}

std::string to_string(ValueType t) {
  switch (t) {
    case ValueType::Text: return "text";
    case ValueType::Number: return "number";
    case ValueType::Time: return "time";
    case ValueType::Boolean: return "boolean";
    case ValueType::Other: return "other";
  }
  return "other";
}

const ColumnDef* TableDef::find_column(const std::string& column) const {
  for (const auto& c : columns)
    if (c.name == column) return &c;
  return nullptr;
}

const TableDef* DatabaseSchema::find_table(const std::string& table) const {
  for (const auto& t : tables)
    if (t.name == table) return &t;
  return nullptr;
}

bool DatabaseSchema::has_column(const std::string& table, const std::string& column) const {
  const TableDef* t = find_table(table);
  return t != nullptr && t->find_column(column) != nullptr;
}

std::size_t DatabaseSchema::column_count() const {
  std::size_t n = 0;
  for (const auto& t : tables) n += t.columns.size();
  return n;
}

const DatabaseSchema* SchemaCatalog::find(const std::string& db_id) const {
  for (const auto& db : databases)
    if (db.db_id == db_id) return &db;
  return nullptr;
}

const DatabaseSchema& SchemaCatalog::at(const std::string& db_id) const {
  const DatabaseSchema* db = find(db_id);
  if (!db) throw UserError("unknown db_id '" + db_id + "'");
  return *db;
}

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UserError("cannot open file '" + path + "'");
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void validate_schema(const DatabaseSchema& db) {
  if (db.db_id.empty()) throw UserError("database with empty db_id");
  std::set<std::string> table_names;
  for (const auto& t : db.tables) {
    if (!table_names.insert(t.name).second)
      throw UserError(db.db_id + ": duplicate table '" + t.name + "'");
    std::set<std::string> col_names;
    for (const auto& c : t.columns)
      if (!col_names.insert(c.name).second)
        throw UserError(db.db_id + ": duplicate column '" + t.name + "." + c.name + "'");
  }
  auto check_endpoint = [&](const std::string& table, const std::string& column,
                            const char* kind) {
    const TableDef* t = db.find_table(table);
    if (!t)
      throw UserError(db.db_id + ": " + kind + " references unknown table '" + table + "'");
    if (!t->find_column(column))
      throw UserError(db.db_id + ": " + kind + " references unknown column '" + table +
                      "." + column + "'");
  };
  for (const auto& fk : db.foreign_keys) {
    check_endpoint(fk.from_table, fk.from_column, "foreign key");
    check_endpoint(fk.to_table, fk.to_column, "foreign key");
  }
  for (const auto& [table, column] : db.primary_keys)
    check_endpoint(table, column, "primary key");
}

}  // namespace

SchemaCatalog parse_catalog_json(const std::string& text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw UserError(origin + ": malformed JSON: " + e.what());
  }
  if (!doc.is_object() || !doc.contains("databases") || !doc["databases"].is_array())
    throw UserError(origin + ": expected object with a 'databases' array");

  SchemaCatalog catalog;
  std::set<std::string> seen_ids;
  for (const auto& dj : doc["databases"]) {
    DatabaseSchema db;
    db.db_id = dj.value("db_id", std::string());
    if (db.db_id.empty()) throw UserError(origin + ": database with empty db_id");
    if (!seen_ids.insert(db.db_id).second)
      throw UserError(origin + ": duplicate db_id '" + db.db_id + "'");
    for (const auto& tj : dj.value("tables", json::array())) {
      TableDef table;
      table.name = lower(tj.value("name", std::string()));
      for (const auto& cj : tj.value("columns", json::array())) {
        ColumnDef col;
        col.name = lower(cj.value("name", std::string()));
        col.type = value_type_from_string(cj.value("type", std::string("text")));
        table.columns.push_back(std::move(col));
      }
      db.tables.push_back(std::move(table));
    }
    for (const auto& pj : dj.value("primary_keys", json::array())) {
      if (!pj.is_array() || pj.size() != 2)
        throw UserError(db.db_id + ": primary key entries must be [table, column]");
      db.primary_keys.emplace_back(lower(pj[0].get<std::string>()),
                                   lower(pj[1].get<std::string>()));
    }
    for (const auto& fj : dj.value("foreign_keys", json::array())) {
      if (!fj.is_array() || fj.size() != 4)
        throw UserError(db.db_id +
                        ": foreign key entries must be [from_table, from_column, to_table, to_column]");
      db.foreign_keys.push_back(ForeignKey{
          lower(fj[0].get<std::string>()), lower(fj[1].get<std::string>()),
          lower(fj[2].get<std::string>()), lower(fj[3].get<std::string>())});
    }
    validate_schema(db);
    catalog.databases.push_back(std::move(db));
  }
  return catalog;
}

SchemaCatalog load_catalog(const std::string& path) {
  return parse_catalog_json(read_file(path), path);
}

std::string serialize_catalog(const SchemaCatalog& catalog) {
  json dbs = json::array();
  for (const auto& db : catalog.databases) {
    json tables = json::array();
    for (const auto& t : db.tables) {
      json cols = json::array();
      for (const auto& c : t.columns)
        cols.push_back({{"name", c.name}, {"type", to_string(c.type)}});
      tables.push_back({{"name", t.name}, {"columns", cols}});
    }
    json pks = json::array();
    for (const auto& [table, column] : db.primary_keys)
      pks.push_back(json::array({table, column}));
    json fks = json::array();
    for (const auto& fk : db.foreign_keys)
      fks.push_back(json::array({fk.from_table, fk.from_column, fk.to_table, fk.to_column}));
    dbs.push_back({{"db_id", db.db_id},
                   {"tables", tables},
                   {"primary_keys", pks},
                   {"foreign_keys", fks}});
  }
  return json{{"databases", dbs}}.dump();
}

void save_catalog(const SchemaCatalog& catalog, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UserError("cannot write file '" + path + "'");
  out << serialize_catalog(catalog) << "\n";
}

std::vector<Sample> load_dataset(const std::string& path, const SchemaCatalog& catalog) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UserError("cannot open file '" + path + "'");
  std::vector<Sample> samples;
  std::set<std::string> seen_ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw UserError(path + ":" + std::to_string(lineno) + ": malformed JSON: " + e.what());
    }
    Sample s;
    s.id = obj.value("id", std::string());
    if (s.id.empty())
      throw UserError(path + ":" + std::to_string(lineno) + ": missing id");
    if (!seen_ids.insert(s.id).second)
      throw UserError(path + ": duplicate sample id '" + s.id + "'");
    s.db_id = obj.value("db_id", std::string());
    if (!catalog.find(s.db_id))
      throw UserError(path + ": sample '" + s.id + "' references unknown db_id '" +
                      s.db_id + "'");
    if (!obj.contains("question") || !obj["question"].is_string())
      throw UserError(path + ": sample '" + s.id + "' is missing a question");
    s.question = obj["question"].get<std::string>();
    if (obj.contains("sql") && obj["sql"].is_string())
      s.gold_sql = obj["sql"].get<std::string>();
    samples.push_back(std::move(s));
  }
  return samples;
}

void save_dataset(const std::vector<Sample>& samples, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UserError("cannot write file '" + path + "'");
  for (const auto& s : samples) {
    json obj{{"id", s.id}, {"db_id", s.db_id}, {"question", s.question}};
    if (s.gold_sql)
      obj["sql"] = *s.gold_sql;
    else
      obj["sql"] = nullptr;
    out << obj.dump() << "\n";
  }
}

namespace {

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

std::string lemma_of(const std::string& surface) {
  static const char* suffixes[] = {"ing", "es", "ed", "s"};
  for (const char* suf : suffixes) {
    std::size_t n = std::strlen(suf);
    if (surface.size() > n && surface.ends_with(suf) && surface.size() - n >= 3)
      return surface.substr(0, surface.size() - n);
  }
  return surface;
}

}  // namespace

TokenSeq tokenize_question(const std::string& text) {
  bool all_space = std::all_of(text.begin(), text.end(), [](unsigned char c) {
    return std::isspace(c) != 0;
  });
  if (text.empty() || all_space) throw UserError("cannot tokenize empty question");

  TokenSeq seq;
  std::string current;
  auto flush = [&] {
    if (current.empty()) return;
    Token tok;
    tok.surface = current;
    tok.lemma = lemma_of(current);
    tok.index = seq.tokens.size();
    seq.tokens.push_back(std::move(tok));
    current.clear();
  };
  for (char raw : text) {
    char c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
    if (is_word_char(c))
      current.push_back(c);
    else
      flush();  // whitespace and punctuation both end a token
  }
  flush();
  if (seq.tokens.empty()) throw UserError("question contains no word tokens");
  return seq;
}

std::vector<std::string> split_name_words(const std::string& name) {
  std::vector<std::string> words;
  std::string current;
  for (char raw : name) {
    char c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
    if (is_word_char(c)) {
      current.push_back(c);
    } else if (!current.empty()) {
      words.push_back(current);
      current.clear();
    }
  }
  if (!current.empty()) words.push_back(current);
  return words;
}

std::string value_store_path(const std::string& db_root, const std::string& db_id) {
  std::string root = db_root;
  if (!root.empty() && root.back() != '/') root.push_back('/');
  return root + db_id + "/" + db_id + ".sqlite";
}

}  // namespace dcgsql
