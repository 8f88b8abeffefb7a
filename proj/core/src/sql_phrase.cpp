#include <sstream>

#include "dcgsql/sqlkit.hpp"

namespace dcgsql {

namespace {

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

const char* op_words(CmpOp op) {
  switch (op) {
    case CmpOp::Eq: return "is";
    case CmpOp::Gt: return "is above";
    case CmpOp::Lt: return "is less than";
    case CmpOp::Ge: return "is at least";
    case CmpOp::Le: return "is at most";
    default: return nullptr;
  }
}

}  // namespace

std::string nested_to_phrase(const Query& subquery, const std::string& source_fragment) {
  std::string fallback = source_fragment;
  if (!subquery.compound.empty()) return fallback;
  const SelectCore& core = subquery.core;
  const ConditionChain* chain = core.where ? &*core.where : nullptr;
  if (!chain && core.having) chain = &*core.having;
  if (!chain || chain->conds.empty()) return fallback;

  const Condition& cond = chain->conds.front();
  if (cond.kind != Condition::Kind::Cmp || cond.negated || !cond.rhs_val) return fallback;
  const char* op = op_words(cond.op);
  if (!op) return fallback;
  if (cond.lhs.arith != ArithOp::None) return fallback;
  if (cond.lhs.first.kind != Operand::Kind::Column) return fallback;
  const Operand& rhs = cond.rhs_val->first;
  if (cond.rhs_val->agg != AggFn::None || cond.rhs_val->arith != ArithOp::None) return fallback;
  if (rhs.kind != Operand::Kind::Number && rhs.kind != Operand::Kind::String) return fallback;

  const ColumnRef& col = cond.lhs.first.col;
  std::string table = col.table;
  if (table.empty() && !core.from.empty()) table = core.from.front().table;
  if (table.empty()) return fallback;

  std::vector<std::string> lhs_words;
  if (cond.lhs.agg != AggFn::None) lhs_words.push_back(to_string(cond.lhs.agg));
  if (!col.is_star())
    for (const auto& w : split_name_words(col.column)) lhs_words.push_back(w);
  if (lhs_words.empty()) return fallback;

  std::ostringstream phrase;
  phrase << join_words(lhs_words) << " of the " << join_words(split_name_words(table))
         << " " << op << " " << rhs.text;
  return phrase.str();
}

std::string nested_to_phrase(const SqlAst& subquery) {
  return nested_to_phrase(subquery.query, subquery.source);
}

}  // namespace dcgsql
