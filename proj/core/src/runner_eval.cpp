#include <sqlite3.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <variant>

#include "dcgsql/runner.hpp"
#include "json.hpp"

namespace dcgsql {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Execution accuracy
// ---------------------------------------------------------------------------

namespace {

struct Cell {
  enum class Kind { Null, Int, Real, Text, Blob };
  Kind kind = Kind::Null;
  long long i = 0;
  double r = 0.0;
  std::string s;

  double numeric() const { return kind == Cell::Kind::Int ? static_cast<double>(i) : r; }
  bool is_numeric() const { return kind == Kind::Int || kind == Kind::Real; }

  bool operator==(const Cell& o) const {
    if (is_numeric() && o.is_numeric()) return numeric() == o.numeric();
    if (kind != o.kind) return false;
    switch (kind) {
      case Kind::Null: return true;
      case Kind::Int: return i == o.i;
      case Kind::Real: return r == o.r;
      case Kind::Text:
      case Kind::Blob: return s == o.s;
    }
    return false;
  }
  bool operator<(const Cell& o) const {
    auto rank = [](const Cell& c) {
      if (c.kind == Kind::Null) return 0;
      if (c.is_numeric()) return 1;
      if (c.kind == Kind::Text) return 2;
      return 3;
    };
    if (rank(*this) != rank(o)) return rank(*this) < rank(o);
    if (is_numeric()) return numeric() < o.numeric();
    return s < o.s;
  }
};

using Row = std::vector<Cell>;

struct TimeoutCtx {
  std::chrono::steady_clock::time_point deadline;
};

int progress_callback(void* raw) {
  auto* ctx = static_cast<TimeoutCtx*>(raw);
  return std::chrono::steady_clock::now() > ctx->deadline ? 1 : 0;
}

/// Runs a query and collects all rows. Returns false on any SQLite error or
/// timeout.
bool run_query(sqlite3* db, const std::string& sql, double timeout_seconds,
               std::vector<Row>& rows) {
  TimeoutCtx ctx{std::chrono::steady_clock::now() +
                 std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                     std::chrono::duration<double>(timeout_seconds))};
  sqlite3_progress_handler(db, 1000, progress_callback, &ctx);
  sqlite3_stmt* stmt = nullptr;
  if (sqlite3_prepare_v2(db, sql.c_str(), -1, &stmt, nullptr) != SQLITE_OK) {
    sqlite3_finalize(stmt);
    return false;
  }
  bool ok = true;
  while (true) {
    int rc = sqlite3_step(stmt);
    if (rc == SQLITE_ROW) {
      Row row;
      const int cols = sqlite3_column_count(stmt);
      for (int c = 0; c < cols; ++c) {
        Cell cell;
        switch (sqlite3_column_type(stmt, c)) {
          case SQLITE_NULL: cell.kind = Cell::Kind::Null; break;
          case SQLITE_INTEGER:
            cell.kind = Cell::Kind::Int;
            cell.i = sqlite3_column_int64(stmt, c);
            break;
          case SQLITE_FLOAT:
            cell.kind = Cell::Kind::Real;
            cell.r = sqlite3_column_double(stmt, c);
            break;
          case SQLITE_BLOB: {
            cell.kind = Cell::Kind::Blob;
            const char* data = static_cast<const char*>(sqlite3_column_blob(stmt, c));
            cell.s.assign(data ? data : "", sqlite3_column_bytes(stmt, c));
            break;
          }
          default: {
            cell.kind = Cell::Kind::Text;
            const unsigned char* text = sqlite3_column_text(stmt, c);
            cell.s = text ? reinterpret_cast<const char*>(text) : "";
            break;
          }
        }
        row.push_back(std::move(cell));
      }
      rows.push_back(std::move(row));
    } else {
      ok = rc == SQLITE_DONE;
      break;
    }
  }
  sqlite3_finalize(stmt);
  sqlite3_progress_handler(db, 0, nullptr, nullptr);
  return ok;
}

bool row_less(const Row& a, const Row& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(),
                                      [](const Cell& x, const Cell& y) { return x < y; });
}

/// Top-level ORDER BY detection by token scan outside parentheses.
bool has_toplevel_order_by(const std::string& sql) {
  int depth = 0;
  std::string word;
  bool saw_order = false;
  auto check = [&]() {
    if (depth != 0 || word.empty()) {
      word.clear();
      return false;
    }
    std::string lowered = word;
    std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    word.clear();
    if (lowered == "order") {
      saw_order = true;
      return false;
    }
    if (saw_order && lowered == "by") return true;
    saw_order = false;
    return false;
  };
  for (std::size_t i = 0; i < sql.size(); ++i) {
    char c = sql[i];
    if (c == '\'' || c == '"') {
      if (check()) return true;
      char quote = c;
      for (++i; i < sql.size() && sql[i] != quote; ++i) {
      }
      continue;
    }
    if (c == '(') {
      if (check()) return true;
      ++depth;
    } else if (c == ')') {
      if (check()) return true;
      depth = std::max(0, depth - 1);
    } else if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') {
      word.push_back(c);
    } else {
      if (check()) return true;
    }
  }
  return check();
}

}  // namespace

ExOutcome execution_accuracy(const std::string& pred_sql, const std::string& gold_sql,
                             const std::string& db_file, const ExecutionOptions& options) {
  if (!std::filesystem::exists(db_file))
    throw UserError("database file '" + db_file + "' does not exist");
  sqlite3* db = nullptr;
  if (sqlite3_open_v2(db_file.c_str(), &db, SQLITE_OPEN_READONLY, nullptr) != SQLITE_OK) {
    std::string msg = db ? sqlite3_errmsg(db) : "open failed";
    sqlite3_close(db);
    throw UserError("cannot open database '" + db_file + "': " + msg);
  }

  std::vector<Row> gold_rows;
  if (!run_query(db, gold_sql, options.timeout_seconds, gold_rows)) {
    sqlite3_close(db);
    return ExOutcome::GoldError;
  }
  std::vector<Row> pred_rows;
  if (pred_sql.empty() || !run_query(db, pred_sql, options.timeout_seconds, pred_rows)) {
    sqlite3_close(db);
    return ExOutcome::Mismatch;
  }
  sqlite3_close(db);

  if (gold_rows.size() != pred_rows.size()) return ExOutcome::Mismatch;
  if (!gold_rows.empty() && gold_rows[0].size() != pred_rows[0].size())
    return ExOutcome::Mismatch;

  if (!has_toplevel_order_by(gold_sql)) {
    std::sort(gold_rows.begin(), gold_rows.end(), row_less);
    std::sort(pred_rows.begin(), pred_rows.end(), row_less);
  }
  return gold_rows == pred_rows ? ExOutcome::Match : ExOutcome::Mismatch;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

double pct(std::size_t correct, std::size_t n) {
  if (n == 0) return 0.0;
  return std::round(1000.0 * static_cast<double>(correct) / static_cast<double>(n)) / 10.0;
}

EvalReport evaluate(const std::vector<Sample>& dataset,
                    const std::map<std::string, std::string>& predictions,
                    const SchemaCatalog& catalog, const std::string& db_root,
                    const std::map<std::string, std::vector<std::string>>* retrieved,
                    const std::vector<Sample>* pool, const ExecutionOptions& exec,
                    const ClauseSetOptions& em_opts) {
  for (const auto& [id, sql] : predictions) {
    bool known = std::any_of(dataset.begin(), dataset.end(),
                             [&](const Sample& s) { return s.id == id; });
    if (!known) throw UserError("prediction for unknown sample '" + id + "'");
  }

  std::map<std::string, const Sample*> pool_by_id;
  if (pool)
    for (const auto& s : *pool) pool_by_id[s.id] = &s;

  EvalReport report;
  for (const char* level : {"easy", "medium", "hard", "extra"})
    report.by_hardness[level] = LevelStats{};

  double ted_sum = 0.0;
  std::size_t ted_samples = 0;

  for (const auto& sample : dataset) {
    if (!sample.gold_sql) {
      report.failures.emplace_back(sample.id, "missing gold SQL");
      continue;
    }
    const DatabaseSchema& db = catalog.at(sample.db_id);

    SqlAst gold_ast;
    try {
      gold_ast = parse_sql(*sample.gold_sql, &db);
    } catch (const Error& e) {
      report.failures.emplace_back(sample.id, std::string("gold SQL unparsable: ") + e.what());
      continue;
    }

    std::string pred;
    auto pit = predictions.find(sample.id);
    if (pit == predictions.end() || pit->second.empty()) {
      report.failures.emplace_back(sample.id, "missing prediction");
    } else {
      pred = pit->second;
    }

    bool ex = false;
    const std::string db_file = value_store_path(db_root, sample.db_id);
    ExOutcome outcome;
    try {
      outcome = execution_accuracy(pred, *sample.gold_sql, db_file, exec);
    } catch (const Error& e) {
      report.failures.emplace_back(sample.id, e.what());
      continue;
    }
    if (outcome == ExOutcome::GoldError) {
      report.failures.emplace_back(sample.id, "gold SQL failed to execute");
      continue;
    }
    ex = outcome == ExOutcome::Match;

    bool em = false;
    if (!pred.empty()) {
      try {
        SqlAst pred_ast = parse_sql(pred, &db);
        em = exact_set_match(pred_ast, gold_ast, em_opts);
      } catch (const Error&) {
        report.failures.emplace_back(sample.id, "prediction unparsable for exact-set-match");
      }
    }

    LevelStats& level = report.by_hardness[to_string(hardness(gold_ast))];
    ++level.n;
    ++report.overall.n;
    if (ex) {
      ++level.ex_correct;
      ++report.overall.ex_correct;
    }
    if (em) {
      ++level.em_correct;
      ++report.overall.em_correct;
    }

    if (retrieved && pool) {
      auto rit = retrieved->find(sample.id);
      if (rit != retrieved->end() && !rit->second.empty()) {
        double sum = 0.0;
        std::size_t count = 0;
        for (const auto& demo_id : rit->second) {
          auto dit = pool_by_id.find(demo_id);
          if (dit == pool_by_id.end() || !dit->second->gold_sql) continue;
          try {
            SqlAst demo_ast = parse_sql(*dit->second->gold_sql);
            SqlAst gold_plain = parse_sql(*sample.gold_sql);
            sum += tree_edit_distance(demo_ast, gold_plain);
            ++count;
          } catch (const Error&) {
          }
        }
        if (count > 0) {
          ted_sum += sum / static_cast<double>(count);
          ++ted_samples;
        }
      }
    }
  }
  if (ted_samples > 0) report.avg_ted = ted_sum / static_cast<double>(ted_samples);
  return report;
}

std::string render_report(const EvalReport& report) {
  std::string out;
  char line[128];
  std::snprintf(line, sizeof line, "%-8s %6s %7s %7s\n", "level", "n", "EX", "EM");
  out += line;
  auto emit = [&](const std::string& name, const LevelStats& s) {
    std::snprintf(line, sizeof line, "%-8s %6zu %7.1f %7.1f\n", name.c_str(), s.n,
                  pct(s.ex_correct, s.n), pct(s.em_correct, s.n));
    out += line;
  };
  for (const char* level : {"easy", "medium", "hard", "extra"}) {
    auto it = report.by_hardness.find(level);
    if (it != report.by_hardness.end()) emit(level, it->second);
  }
  emit("all", report.overall);
  if (report.avg_ted) {
    std::snprintf(line, sizeof line, "avg TED of retrieved demonstrations: %.2f\n",
                  *report.avg_ted);
    out += line;
  }
  if (!report.failures.empty()) {
    out += "failures:\n";
    for (const auto& [id, reason] : report.failures) out += "  " + id + ": " + reason + "\n";
  }
  return out;
}

std::string report_to_json(const EvalReport& report) {
  auto level_json = [](const LevelStats& s) {
    return json{{"n", s.n}, {"ex", pct(s.ex_correct, s.n)}, {"em", pct(s.em_correct, s.n)}};
  };
  json by_hardness;
  for (const auto& [name, stats] : report.by_hardness) by_hardness[name] = level_json(stats);
  json failures = json::array();
  for (const auto& [id, reason] : report.failures)
    failures.push_back({{"id", id}, {"reason", reason}});
  json doc{{"overall", level_json(report.overall)},
           {"by_hardness", by_hardness},
           {"failures", failures}};
  if (report.avg_ted)
    doc["avg_ted"] = *report.avg_ted;
  else
    doc["avg_ted"] = nullptr;
  return doc.dump(2);
}

void save_report(const EvalReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UserError("cannot write file '" + path + "'");
  out << report_to_json(report) << "\n";
}

// ---------------------------------------------------------------------------
// Latency
// ---------------------------------------------------------------------------

LatencyStats measure_retrieval_latency(const RetrievalIndex& index,
                                       const std::vector<SchemaLinkGraph>& queries,
                                       const EncoderParams& params, std::size_t k) {
  if (queries.empty()) throw UserError("empty query set");
  k = std::min(k, index.entries.size());
  std::vector<double> times;
  times.reserve(queries.size());
  for (const auto& g : queries) {
    auto t0 = std::chrono::steady_clock::now();
    auto result = retrieve_top_k(index, g, params, k);
    auto t1 = std::chrono::steady_clock::now();
    (void)result;
    times.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  LatencyStats stats;
  for (double t : times) stats.mean_seconds += t;
  stats.mean_seconds /= static_cast<double>(times.size());
  std::vector<double> sorted = times;
  std::sort(sorted.begin(), sorted.end());
  std::size_t idx = static_cast<std::size_t>(
      std::ceil(0.95 * static_cast<double>(sorted.size())));
  stats.p95_seconds = sorted[std::min(sorted.size() - 1, idx == 0 ? 0 : idx - 1)];
  return stats;
}

}  // namespace dcgsql
