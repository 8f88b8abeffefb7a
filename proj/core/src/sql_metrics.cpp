#include <algorithm>
#include <sstream>

#include "dcgsql/sqlkit.hpp"
#include "json.hpp"

namespace dcgsql {

namespace {

// ---------------------------------------------------------------------------
// Labeled-tree view
// ---------------------------------------------------------------------------

TreeNode query_tree(const Query& q);

std::string col_label(const ColumnRef& col) {
  if (col.is_star()) return col.table.empty() ? "col:*" : "col:" + col.table + ".*";
  return col.table.empty() ? "col:" + col.column : "col:" + col.table + "." + col.column;
}

TreeNode operand_tree(const Operand& op) {
  switch (op.kind) {
    case Operand::Kind::Column: return TreeNode{col_label(op.col), {}};
    case Operand::Kind::Number:
    case Operand::Kind::String: return TreeNode{"LITERAL", {}};
    case Operand::Kind::Null: return TreeNode{"NULL", {}};
  }
  return TreeNode{"LITERAL", {}};
}

TreeNode val_unit_tree(const ValUnit& val) {
  TreeNode inner = operand_tree(val.first);
  if (val.arith != ArithOp::None) {
    const char* op = val.arith == ArithOp::Add   ? "+"
                     : val.arith == ArithOp::Sub ? "-"
                     : val.arith == ArithOp::Mul ? "*"
                                                 : "/";
    inner = TreeNode{op, {inner, operand_tree(val.second)}};
  }
  if (val.agg != AggFn::None) {
    TreeNode agg{to_string(val.agg), {}};
    std::transform(agg.label.begin(), agg.label.end(), agg.label.begin(), ::toupper);
    if (val.distinct) agg.children.push_back(TreeNode{"DISTINCT", {}});
    agg.children.push_back(std::move(inner));
    return agg;
  }
  return inner;
}

TreeNode condition_tree(const Condition& cond) {
  TreeNode node;
  switch (cond.kind) {
    case Condition::Kind::Cmp: node.label = to_string(cond.op); break;
    case Condition::Kind::In: node.label = cond.negated ? "NOT_IN" : "IN"; break;
    case Condition::Kind::Like: node.label = cond.negated ? "NOT_LIKE" : "LIKE"; break;
    case Condition::Kind::Between: node.label = "BETWEEN"; break;
    case Condition::Kind::IsNull: node.label = cond.negated ? "IS_NOT_NULL" : "IS_NULL"; break;
    case Condition::Kind::Exists: node.label = cond.negated ? "NOT_EXISTS" : "EXISTS"; break;
  }
  if (cond.kind != Condition::Kind::Exists) node.children.push_back(val_unit_tree(cond.lhs));
  if (cond.negated && cond.kind == Condition::Kind::Cmp)
    node.label = "NOT_" + node.label;
  if (cond.rhs_val) node.children.push_back(val_unit_tree(*cond.rhs_val));
  if (cond.rhs_query)
    node.children.push_back(TreeNode{"SUBQUERY", {query_tree(*cond.rhs_query)}});
  for (const auto& op : cond.rhs_list) node.children.push_back(operand_tree(op));
  return node;
}

TreeNode chain_tree(const ConditionChain& chain, const char* label) {
  TreeNode node{label, {}};
  for (std::size_t i = 0; i < chain.conds.size(); ++i) {
    if (i > 0)
      node.children.push_back(TreeNode{chain.or_connective[i - 1] ? "OR" : "AND", {}});
    node.children.push_back(condition_tree(chain.conds[i]));
  }
  return node;
}

TreeNode core_tree(const SelectCore& core) {
  TreeNode root{"SELECT", {}};
  if (core.distinct) root.children.push_back(TreeNode{"DISTINCT", {}});
  for (const auto& item : core.items) root.children.push_back(val_unit_tree(item));

  TreeNode from{"FROM", {}};
  for (std::size_t i = 0; i < core.from.size(); ++i) {
    const TableSource& src = core.from[i];
    TreeNode entry = src.subquery
                         ? TreeNode{"SUBQUERY", {query_tree(*src.subquery)}}
                         : TreeNode{"tab:" + src.table, {}};
    if (i == 0) {
      from.children.push_back(std::move(entry));
    } else {
      TreeNode join{"JOIN", {std::move(entry)}};
      const auto& on = core.joins[i - 1].on;
      if (on) join.children.push_back(chain_tree(*on, "ON"));
      from.children.push_back(std::move(join));
    }
  }
  root.children.push_back(std::move(from));

  if (core.where) root.children.push_back(chain_tree(*core.where, "WHERE"));
  if (!core.group_by.empty()) {
    TreeNode group{"GROUP_BY", {}};
    for (const auto& col : core.group_by) group.children.push_back(val_unit_tree(col));
    root.children.push_back(std::move(group));
  }
  if (core.having) root.children.push_back(chain_tree(*core.having, "HAVING"));
  if (!core.order_by.empty()) {
    TreeNode order{"ORDER_BY", {}};
    for (const auto& item : core.order_by) {
      TreeNode dir{item.desc ? "DESC" : "ASC", {val_unit_tree(item.val)}};
      order.children.push_back(std::move(dir));
    }
    root.children.push_back(std::move(order));
  }
  if (core.limit)
    root.children.push_back(TreeNode{"LIMIT", {TreeNode{"LITERAL", {}}}});
  return root;
}

TreeNode query_tree(const Query& q) {
  TreeNode root = core_tree(q.core);
  for (const auto& [op, core] : q.compound)
    root = TreeNode{to_string(op), {std::move(root), core_tree(core)}};
  return root;
}

}  // namespace

std::size_t TreeNode::size() const {
  std::size_t n = 1;
  for (const auto& c : children) n += c.size();
  return n;
}

TreeNode ast_tree(const SqlAst& ast) { return query_tree(ast.query); }

std::string tree_to_json(const TreeNode& node) {
  nlohmann::json j;
  j["label"] = node.label;
  auto children = nlohmann::json::array();
  for (const auto& c : node.children) children.push_back(nlohmann::json::parse(tree_to_json(c)));
  j["children"] = children;
  return j.dump();
}

// ---------------------------------------------------------------------------
// Clause sets
// ---------------------------------------------------------------------------

namespace {

std::string canon_col(const ColumnRef& col) {
  if (col.is_star()) return "*";
  return col.table.empty() ? col.column : col.table + "." + col.column;
}

std::string canon_operand(const Operand& op, bool anonymize) {
  switch (op.kind) {
    case Operand::Kind::Column: return canon_col(op.col);
    case Operand::Kind::Number: return anonymize ? "?" : op.text;
    case Operand::Kind::String: return anonymize ? "?" : "'" + op.text + "'";
    case Operand::Kind::Null: return "null";
  }
  return "?";
}

std::string canon_val(const ValUnit& val, bool anonymize) {
  std::string inner = canon_operand(val.first, anonymize);
  if (val.arith != ArithOp::None) {
    const char* op = val.arith == ArithOp::Add   ? "+"
                     : val.arith == ArithOp::Sub ? "-"
                     : val.arith == ArithOp::Mul ? "*"
                                                 : "/";
    inner = "(" + inner + op + canon_operand(val.second, anonymize) + ")";
  }
  if (val.agg != AggFn::None)
    return to_string(val.agg) + "(" + (val.distinct ? "distinct " : "") + inner + ")";
  return inner;
}

std::string serialize_clause_sets(const ClauseSets& sets);

std::string canon_subquery(const Query& q, const ClauseSetOptions& opts);

std::string canon_condition(const Condition& cond, const ClauseSetOptions& opts) {
  // Literal values in comparisons are anonymized unless compare_values is set;
  // the comparison structure itself is always retained.
  bool anonymize = !opts.compare_values;
  std::string lhs =
      cond.kind == Condition::Kind::Exists ? "" : canon_val(cond.lhs, false);
  switch (cond.kind) {
    case Condition::Kind::Cmp: {
      std::string rhs;
      if (cond.rhs_val)
        rhs = canon_val(*cond.rhs_val, anonymize);
      else if (cond.rhs_query)
        rhs = "(" + canon_subquery(*cond.rhs_query, opts) + ")";
      std::string op = to_string(cond.op);
      if (cond.op == CmpOp::Eq || cond.op == CmpOp::Ne) {
        // a = b and b = a are the same condition
        if (rhs < lhs) std::swap(lhs, rhs);
      }
      std::string text = lhs + " " + op + " " + rhs;
      return cond.negated ? "not " + text : text;
    }
    case Condition::Kind::In: {
      std::string rhs;
      if (cond.rhs_query) {
        rhs = "(" + canon_subquery(*cond.rhs_query, opts) + ")";
      } else {
        std::vector<std::string> vals;
        for (const auto& op : cond.rhs_list) vals.push_back(canon_operand(op, anonymize));
        std::sort(vals.begin(), vals.end());
        std::string joined;
        for (const auto& v : vals) joined += (joined.empty() ? "" : ",") + v;
        rhs = "(" + joined + ")";
      }
      return lhs + (cond.negated ? " not in " : " in ") + rhs;
    }
    case Condition::Kind::Like:
      return lhs + (cond.negated ? " not like " : " like ") +
             canon_operand(cond.rhs_list[0], anonymize);
    case Condition::Kind::Between:
      return lhs + " between " + canon_operand(cond.rhs_list[0], anonymize) + " and " +
             canon_operand(cond.rhs_list[1], anonymize);
    case Condition::Kind::IsNull:
      return lhs + (cond.negated ? " is not null" : " is null");
    case Condition::Kind::Exists:
      return std::string(cond.negated ? "not " : "") + "exists (" +
             canon_subquery(*cond.rhs_query, opts) + ")";
  }
  return "";
}

void add_chain(ClauseSets& sets, const std::string& kind, const ConditionChain& chain,
               const ClauseSetOptions& opts) {
  auto& elems = sets.kinds[kind];
  for (const auto& cond : chain.conds) elems.insert(canon_condition(cond, opts));
  std::size_t ors = 0;
  for (bool is_or : chain.or_connective) ors += is_or ? 1 : 0;
  if (!chain.or_connective.empty())
    elems.insert("connectives:and=" + std::to_string(chain.or_connective.size() - ors) +
                 ",or=" + std::to_string(ors));
}

ClauseSets core_clause_sets(const SelectCore& core, const ClauseSetOptions& opts) {
  ClauseSets sets;
  auto& select = sets.kinds["select"];
  if (core.distinct) select.insert("distinct");
  for (const auto& item : core.items) select.insert(canon_val(item, false));

  auto& from = sets.kinds["from"];
  for (const auto& src : core.from)
    from.insert(src.subquery ? "(" + canon_subquery(*src.subquery, opts) + ")" : src.table);
  for (const auto& join : core.joins) {
    if (!join.on) continue;
    for (const auto& cond : join.on->conds)
      sets.kinds["join"].insert(canon_condition(cond, opts));
  }
  if (core.where) add_chain(sets, "where", *core.where, opts);
  if (!core.group_by.empty()) {
    auto& group = sets.kinds["group_by"];
    for (const auto& col : core.group_by) group.insert(canon_val(col, false));
  }
  if (core.having) add_chain(sets, "having", *core.having, opts);
  if (!core.order_by.empty()) {
    auto& order = sets.kinds["order_by"];
    for (const auto& item : core.order_by)
      order.insert(canon_val(item.val, false) + (item.desc ? " desc" : " asc"));
  }
  if (core.limit) sets.kinds["limit"].insert("limit " + std::to_string(*core.limit));
  return sets;
}

std::string serialize_clause_sets(const ClauseSets& sets) {
  std::ostringstream out;
  for (const auto& [kind, elems] : sets.kinds) {
    out << kind << "{";
    bool first = true;
    for (const auto& e : elems) {
      if (!first) out << ";";
      out << e;
      first = false;
    }
    out << "}";
  }
  return out.str();
}

std::string canon_subquery(const Query& q, const ClauseSetOptions& opts) {
  std::string text = serialize_clause_sets(core_clause_sets(q.core, opts));
  for (const auto& [op, core] : q.compound)
    text += " " + to_string(op) + " " + serialize_clause_sets(core_clause_sets(core, opts));
  return text;
}

}  // namespace

ClauseSets clause_sets(const SqlAst& ast, const ClauseSetOptions& opts) {
  ClauseSets sets = core_clause_sets(ast.query.core, opts);
  for (std::size_t i = 0; i < ast.query.compound.size(); ++i) {
    const auto& [op, core] = ast.query.compound[i];
    sets.kinds["setop"].insert(std::to_string(i) + ":" + to_string(op) + " " +
                               serialize_clause_sets(core_clause_sets(core, opts)));
  }
  return sets;
}

bool exact_set_match(const SqlAst& pred, const SqlAst& gold, const ClauseSetOptions& opts) {
  return clause_sets(pred, opts) == clause_sets(gold, opts);
}

// ---------------------------------------------------------------------------
// Categorization
// ---------------------------------------------------------------------------

namespace {

struct QueryFacts {
  bool has_setop = false;
  bool has_not_in_subquery = false;
  bool has_subquery = false;
  bool has_join = false;
};

void scan_core(const SelectCore& core, QueryFacts& facts);

void scan_query(const Query& q, QueryFacts& facts) {
  if (!q.compound.empty()) facts.has_setop = true;
  scan_core(q.core, facts);
  for (const auto& [op, core] : q.compound) scan_core(core, facts);
}

void scan_chain(const ConditionChain& chain, QueryFacts& facts) {
  for (const auto& cond : chain.conds) {
    if (cond.rhs_query) {
      facts.has_subquery = true;
      if (cond.kind == Condition::Kind::In && cond.negated)
        facts.has_not_in_subquery = true;
      scan_query(*cond.rhs_query, facts);
    }
  }
}

void scan_core(const SelectCore& core, QueryFacts& facts) {
  if (!core.joins.empty()) facts.has_join = true;
  for (const auto& src : core.from) {
    if (src.subquery) {
      facts.has_subquery = true;
      scan_query(*src.subquery, facts);
    }
  }
  if (core.where) scan_chain(*core.where, facts);
  if (core.having) scan_chain(*core.having, facts);
  for (const auto& join : core.joins)
    if (join.on) scan_chain(*join.on, facts);
}

}  // namespace

QueryCategory categorize(const SqlAst& ast) {
  QueryFacts facts;
  scan_query(ast.query, facts);
  if (facts.has_setop || facts.has_not_in_subquery) return QueryCategory::Iuen;
  if (facts.has_subquery) return QueryCategory::Nested;
  if (facts.has_join) return QueryCategory::Join;
  return QueryCategory::Simple;
}

// ---------------------------------------------------------------------------
// Hardness (Spider component-count rules)
// ---------------------------------------------------------------------------

namespace {

int count_aggs_chain(const std::optional<ConditionChain>& chain) {
  if (!chain) return 0;
  int n = 0;
  for (const auto& cond : chain->conds) {
    if (cond.kind != Condition::Kind::Exists && cond.lhs.agg != AggFn::None) ++n;
    if (cond.rhs_val && cond.rhs_val->agg != AggFn::None) ++n;
  }
  return n;
}

int count_component1(const SelectCore& core) {
  int count = 0;
  if (core.where) ++count;
  if (!core.group_by.empty()) ++count;
  if (!core.order_by.empty()) ++count;
  if (core.limit) ++count;
  count += static_cast<int>(core.from.size()) - 1;  // joins

  auto count_ors = [](const std::optional<ConditionChain>& chain) {
    if (!chain) return 0;
    int n = 0;
    for (bool is_or : chain->or_connective) n += is_or ? 1 : 0;
    return n;
  };
  auto count_likes = [](const std::optional<ConditionChain>& chain) {
    if (!chain) return 0;
    int n = 0;
    for (const auto& cond : chain->conds)
      if (cond.kind == Condition::Kind::Like) ++n;
    return n;
  };
  count += count_ors(core.where) + count_likes(core.where);
  count += count_ors(core.having) + count_likes(core.having);
  for (const auto& join : core.joins) count += count_ors(join.on) + count_likes(join.on);
  return count;
}

int count_component2(const Query& q) {
  int nested = static_cast<int>(q.compound.size());
  auto scan = [&](const std::optional<ConditionChain>& chain) {
    if (!chain) return;
    for (const auto& cond : chain->conds)
      if (cond.rhs_query) ++nested;
  };
  scan(q.core.where);
  scan(q.core.having);
  for (const auto& join : q.core.joins) scan(join.on);
  return nested;
}

int count_others(const SelectCore& core) {
  int count = 0;
  int aggs = 0;
  for (const auto& item : core.items)
    if (item.agg != AggFn::None) ++aggs;
  aggs += count_aggs_chain(core.where);
  aggs += count_aggs_chain(core.having);
  for (const auto& col : core.group_by)
    if (col.agg != AggFn::None) ++aggs;
  for (const auto& item : core.order_by)
    if (item.val.agg != AggFn::None) ++aggs;
  if (aggs > 1) ++count;
  if (core.items.size() > 1) ++count;
  if (core.where && core.where->conds.size() > 1) ++count;
  if (core.group_by.size() > 1) ++count;
  return count;
}

}  // namespace

Hardness hardness(const SqlAst& ast) {
  const SelectCore& core = ast.query.core;
  int comp1 = count_component1(core);
  int comp2 = count_component2(ast.query);
  int others = count_others(core);

  if (comp1 <= 1 && others == 0 && comp2 == 0) return Hardness::Easy;
  if ((others <= 2 && comp1 <= 1 && comp2 == 0) || (comp1 <= 2 && others < 2 && comp2 == 0))
    return Hardness::Medium;
  if ((others > 2 && comp1 <= 2 && comp2 == 0) ||
      (comp1 > 2 && comp1 <= 3 && others <= 2 && comp2 == 0) ||
      (comp1 <= 1 && others == 0 && comp2 <= 1))
    return Hardness::Hard;
  return Hardness::Extra;
}

}  // namespace dcgsql
