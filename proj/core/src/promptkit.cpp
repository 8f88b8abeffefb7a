#include "dcgsql/promptkit.hpp"

#include <algorithm>
#include <sstream>

namespace dcgsql {

namespace {

const char* kInstruction =
    "### Answer the question by SQLite SQL query only and with no explanation.";
const char* kSchemaHeader = "### SQLite SQL tables, with their properties:";
const char* kStepByStep = "Let's think step by step.";

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string strip_trailing_semicolon(std::string sql) {
  sql = trim(sql);
  while (!sql.empty() && sql.back() == ';') sql = trim(sql.substr(0, sql.size() - 1));
  return sql;
}

std::string quoted_list(const std::vector<std::string>& names) {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i > 0) out += i + 1 == names.size() ? " and " : ", ";
    out += "'" + names[i] + "'";
  }
  return out;
}

/// The first WHERE/HAVING condition carrying a subquery, searched in the
/// top-level core.
const Condition* find_subquery_condition(const SelectCore& core) {
  for (const auto* chain : {core.where ? &*core.where : nullptr,
                            core.having ? &*core.having : nullptr}) {
    if (!chain) continue;
    for (const auto& cond : chain->conds)
      if (cond.rhs_query) return &cond;
  }
  return nullptr;
}

std::vector<std::string> nested_reasoning_lines(const SqlAst& ast) {
  const Condition* cond = find_subquery_condition(ast.query.core);
  if (!cond)
    throw UserError("NESTED template requires a WHERE/HAVING subquery");
  const std::string fragment =
      ast.source.substr(cond->subquery_begin, cond->subquery_end - cond->subquery_begin);
  const std::string tokens = space_join_sql_tokens(fragment);
  const std::string phrase = nested_to_phrase(*cond->rhs_query, tokens);
  return {std::string(kStepByStep) + " we need a nested subquery for '" + phrase + "'.",
          "Nested subquery: \"" + tokens + "\".",
          "With the nested subquery, we can get the final SQL query."};
}

std::vector<std::string> reasoning_lines(const CotDemo& demo, QueryCategory category,
                                         const SqlAst& ast) {
  switch (category) {
    case QueryCategory::Simple:
      return {};
    case QueryCategory::Join: {
      const SelectCore& core = ast.query.core;
      if (core.from.size() < 2)
        throw UserError("JOIN template requires at least two joined tables");
      std::vector<std::string> tables;
      for (const auto& src : core.from)
        tables.push_back(src.table.empty() ? std::string("subquery") : src.table);
      const std::string fragment =
          ast.source.substr(core.from_begin, core.from_end - core.from_begin);
      return {std::string(kStepByStep) + " we need to join the tables " +
                  quoted_list(tables) + ".",
              "Create an intermediate representation, then use it to construct the query.",
              "Intermediate representation: \"" + trim(fragment) + "\"."};
    }
    case QueryCategory::Nested:
      return nested_reasoning_lines(ast);
    case QueryCategory::Iuen: {
      if (ast.query.compound.empty()) {
        // NOT IN subqueries follow the nested template.
        return nested_reasoning_lines(ast);
      }
      const SetOp op = ast.query.compound.front().first;
      std::vector<std::string> sqls, phrases;
      static const char* ordinals[] = {"First", "Second", "Third", "Fourth"};
      for (std::size_t i = 0;
           i < ast.query.component_spans.size() && i < std::size(ordinals); ++i) {
        const auto& [begin, end] = ast.query.component_spans[i];
        std::string text = trim(ast.source.substr(begin, end - begin));
        Query component;
        component.core = i == 0 ? ast.query.core : ast.query.compound[i - 1].second;
        phrases.push_back(nested_to_phrase(component, text));
        sqls.push_back(std::move(text));
      }
      std::string head = std::string(kStepByStep) + " The question can be solved using the '" +
                         to_string(op) + "' set operator and two subqueries: one for '" +
                         phrases[0] + "' and the other for '" + phrases[1] + "'.";
      std::vector<std::string> lines{std::move(head)};
      for (std::size_t i = 0; i < sqls.size(); ++i)
        lines.push_back(std::string(ordinals[i]) + " subquery: " + sqls[i]);
      lines.push_back("With the nested subquery, we can get the final SQL query.");
      return lines;
    }
  }
  return {};
}

}  // namespace

std::string render_schema_block(const DatabaseSchema& schema,
                                const ValueMatches& value_matches) {
  std::ostringstream out;
  out << kSchemaHeader << "\n#";
  for (const auto& table : schema.tables) {
    out << "\n# " << table.name << " (";
    for (std::size_t i = 0; i < table.columns.size(); ++i) {
      if (i > 0) out << ", ";
      out << table.columns[i].name;
      auto it = value_matches.find(table.name + "." + table.columns[i].name);
      if (it != value_matches.end() && !it->second.empty()) {
        out << " [";
        for (std::size_t v = 0; v < it->second.size(); ++v) {
          if (v > 0) out << ", ";
          out << it->second[v];
        }
        out << "]";
      }
    }
    out << ")";
  }
  out << "\n# Foreign Keys = [";
  for (std::size_t i = 0; i < schema.foreign_keys.size(); ++i) {
    const auto& fk = schema.foreign_keys[i];
    if (i > 0) out << ", ";
    out << fk.from_table << "." << fk.from_column << " = " << fk.to_table << "."
        << fk.to_column;
  }
  out << "]\n#";
  return out.str();
}

std::string render_cot_demo(const CotDemo& demo, QueryCategory category) {
  if (demo.gold_sql.empty()) throw UserError("demonstration has no gold SQL");
  SqlAst ast = parse_sql(demo.gold_sql);
  std::ostringstream out;
  out << kInstruction << "\n"
      << render_schema_block(demo.schema, demo.value_matches) << "\n"
      << "### Question: " << demo.question;
  for (const auto& line : reasoning_lines(demo, category, ast)) out << "\n" << line;
  out << "\n### SQL: " << strip_trailing_semicolon(demo.gold_sql) << " ;";
  return out.str();
}

PromptBundle assemble_prompt(const std::vector<CotDemo>& demos,
                             const std::vector<QueryCategory>& categories,
                             const std::string& test_question,
                             const DatabaseSchema& test_schema,
                             const ValueMatches& test_value_matches,
                             const PromptOptions& options) {
  if (demos.size() != categories.size())
    throw UserError("demo/category count mismatch");
  if (demos.size() > options.max_demos)
    throw UserError("too many demonstrations: " + std::to_string(demos.size()) +
                    " with a maximum of " + std::to_string(options.max_demos));

  PromptBundle bundle;
  std::vector<std::size_t> order(demos.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  // Inputs arrive most-similar first; rendering most-similar last places the
  // best demonstration next to the question.
  if (options.most_similar_last) std::reverse(order.begin(), order.end());
  for (std::size_t i : order)
    bundle.demonstrations.push_back(render_cot_demo(demos[i], categories[i]));

  std::ostringstream test;
  test << kInstruction << "\n"
       << render_schema_block(test_schema, test_value_matches) << "\n"
       << "### Question: " << test_question << "\n"
       << "### SQL:";
  bundle.test_block = test.str();

  std::ostringstream full;
  for (const auto& block : bundle.demonstrations) full << block << "\n\n";
  full << bundle.test_block;
  bundle.full_text = full.str();
  bundle.token_estimate = (bundle.full_text.size() + 3) / 4;
  return bundle;
}

}  // namespace dcgsql
