#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dcgsql/errors.hpp"

namespace dcgsql {

enum class ValueType { Text, Number, Time, Boolean, Other };

ValueType value_type_from_string(const std::string& s);
std::string to_string(ValueType t);

struct ColumnDef {
  std::string name;  // lowercase
  ValueType type = ValueType::Text;
  bool operator==(const ColumnDef&) const = default;
};

struct TableDef {
  std::string name;  // lowercase
  std::vector<ColumnDef> columns;  // ingestion order, prompt rendering depends on it
  bool operator==(const TableDef&) const = default;

  const ColumnDef* find_column(const std::string& column) const;
};

struct ForeignKey {
  std::string from_table, from_column, to_table, to_column;
  bool operator==(const ForeignKey&) const = default;
};

struct DatabaseSchema {
  std::string db_id;
  std::vector<TableDef> tables;
  std::vector<ForeignKey> foreign_keys;
  std::vector<std::pair<std::string, std::string>> primary_keys;  // (table, column)
  bool operator==(const DatabaseSchema&) const = default;

  const TableDef* find_table(const std::string& table) const;
  bool has_column(const std::string& table, const std::string& column) const;
  std::size_t column_count() const;
};

/// A pruned schema is just a sub-schema; same shape, fewer items.
using PrunedSchema = DatabaseSchema;

struct SchemaCatalog {
  std::vector<DatabaseSchema> databases;  // ingestion order

  const DatabaseSchema* find(const std::string& db_id) const;
  const DatabaseSchema& at(const std::string& db_id) const;
};

struct Sample {
  std::string id;
  std::string db_id;
  std::string question;
  std::optional<std::string> gold_sql;
};

struct Token {
  std::string surface;  // lowercase
  std::string lemma;
  std::size_t index = 0;
  bool operator==(const Token&) const = default;
};

struct TokenSeq {
  std::vector<Token> tokens;
  std::size_t size() const { return tokens.size(); }
  bool operator==(const TokenSeq&) const = default;
};

/// Matched cell values per column, keyed "table.column". Values keep their
/// original casing and are ordered by first matching token index, then
/// lexicographically.
using ValueMatches = std::map<std::string, std::vector<std::string>>;

SchemaCatalog load_catalog(const std::string& path);
SchemaCatalog parse_catalog_json(const std::string& text, const std::string& origin);
std::string serialize_catalog(const SchemaCatalog& catalog);
void save_catalog(const SchemaCatalog& catalog, const std::string& path);

std::vector<Sample> load_dataset(const std::string& path, const SchemaCatalog& catalog);
void save_dataset(const std::vector<Sample>& samples, const std::string& path);

TokenSeq tokenize_question(const std::string& text);

/// Splits a schema item name into its words (whitespace and underscores
/// act as separators): "head id" and "head_id" both give {"head","id"}.
std::vector<std::string> split_name_words(const std::string& name);

/// Default location of a database's value store under a root directory.
std::string value_store_path(const std::string& db_root, const std::string& db_id);

ValueMatches value_match(const TokenSeq& tokens, const DatabaseSchema& db,
                         const std::string& value_store);

}  // namespace dcgsql
