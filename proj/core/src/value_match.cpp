#include <sqlite3.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <map>
#include <optional>

#include "dcgsql/catalog.hpp"

namespace dcgsql {

namespace {

constexpr int kMaxScannedValues = 5000;

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

struct Db {
  sqlite3* handle = nullptr;
  explicit Db(const std::string& path) {
    if (sqlite3_open_v2(path.c_str(), &handle, SQLITE_OPEN_READONLY, nullptr) != SQLITE_OK) {
      std::string msg = handle ? sqlite3_errmsg(handle) : "open failed";
      sqlite3_close(handle);
      throw UserError("cannot open value store '" + path + "': " + msg);
    }
  }
  ~Db() { sqlite3_close(handle); }
  Db(const Db&) = delete;
  Db& operator=(const Db&) = delete;
};

std::string quote_ident(const std::string& name) {
  std::string out = "\"";
  for (char c : name) {
    out.push_back(c);
    if (c == '"') out.push_back('"');
  }
  out.push_back('"');
  return out;
}

}  // namespace

ValueMatches value_match(const TokenSeq& tokens, const DatabaseSchema& db,
                         const std::string& value_store) {
  if (!std::filesystem::exists(value_store))
    throw UserError("value store '" + value_store + "' does not exist");
  Db conn(value_store);

  // Candidate strings: single tokens and contiguous bigrams, lowercased,
  // each mapped to the first token index it covers.
  std::map<std::string, std::size_t> candidates;
  for (const auto& tok : tokens.tokens) {
    candidates.try_emplace(tok.surface, tok.index);
    if (tok.index + 1 < tokens.tokens.size())
      candidates.try_emplace(tok.surface + " " + tokens.tokens[tok.index + 1].surface,
                             tok.index);
  }
  std::map<std::string, std::optional<double>> numeric_tokens;
  for (const auto& tok : tokens.tokens) numeric_tokens[tok.surface] = parse_number(tok.surface);

  ValueMatches out;
  for (const auto& table : db.tables) {
    for (const auto& column : table.columns) {
      std::string sql = "SELECT DISTINCT " + quote_ident(column.name) + " FROM " +
                        quote_ident(table.name) + " LIMIT " +
                        std::to_string(kMaxScannedValues);
      sqlite3_stmt* stmt = nullptr;
      if (sqlite3_prepare_v2(conn.handle, sql.c_str(), -1, &stmt, nullptr) != SQLITE_OK) {
        std::string msg = sqlite3_errmsg(conn.handle);
        sqlite3_finalize(stmt);
        throw UserError("value store '" + value_store + "' does not match schema: " +
                        table.name + "." + column.name + ": " + msg);
      }
      // (value, first matching token index)
      std::vector<std::pair<std::string, std::size_t>> matched;
      while (sqlite3_step(stmt) == SQLITE_ROW) {
        if (sqlite3_column_type(stmt, 0) == SQLITE_NULL) continue;
        const unsigned char* text = sqlite3_column_text(stmt, 0);
        if (!text) continue;
        std::string value(reinterpret_cast<const char*>(text));
        if (value.empty()) continue;
        if (column.type == ValueType::Number) {
          auto cell = parse_number(value);
          if (!cell) continue;
          for (const auto& tok : tokens.tokens) {
            const auto& num = numeric_tokens[tok.surface];
            if (num && *num == *cell) {
              matched.emplace_back(value, tok.index);
              break;
            }
          }
        } else {
          auto it = candidates.find(lower(value));
          if (it != candidates.end()) matched.emplace_back(value, it->second);
        }
      }
      sqlite3_finalize(stmt);
      if (matched.empty()) continue;
      std::sort(matched.begin(), matched.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second < b.second;
        return a.first < b.first;
      });
      std::vector<std::string> values;
      for (auto& [value, idx] : matched)
        if (std::find(values.begin(), values.end(), value) == values.end())
          values.push_back(value);
      out[table.name + "." + column.name] = std::move(values);
    }
  }
  return out;
}

}  // namespace dcgsql
