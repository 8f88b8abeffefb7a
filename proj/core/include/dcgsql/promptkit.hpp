#pragma once

#include <string>
#include <vector>

#include "dcgsql/catalog.hpp"
#include "dcgsql/sqlkit.hpp"

namespace dcgsql {

/// "### SQLite SQL tables, with their properties:" block: one line per table
/// in catalog order, matched cell values bracketed after their column, and a
/// closing Foreign Keys line.
std::string render_schema_block(const DatabaseSchema& schema,
                                const ValueMatches& value_matches);

struct CotDemo {
  std::string question;
  std::string gold_sql;
  DatabaseSchema schema;  // pruned or full, as configured
  ValueMatches value_matches;
};

/// One demonstration block: instruction, schema, question, the category's
/// reasoning lines, and the final "### SQL: ... ;" line.
std::string render_cot_demo(const CotDemo& demo, QueryCategory category);

struct PromptBundle {
  std::vector<std::string> demonstrations;
  std::string test_block;
  std::string full_text;
  std::size_t token_estimate = 0;
};

struct PromptOptions {
  std::size_t max_demos = 8;
  bool most_similar_last = true;  // nearest the question
};

/// Assembles the few-shot prompt. `demos` must be ordered by descending
/// retrieval similarity.
PromptBundle assemble_prompt(const std::vector<CotDemo>& demos,
                             const std::vector<QueryCategory>& categories,
                             const std::string& test_question,
                             const DatabaseSchema& test_schema,
                             const ValueMatches& test_value_matches,
                             const PromptOptions& options = {});

}  // namespace dcgsql
