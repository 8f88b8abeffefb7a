#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dcgsql/catalog.hpp"

namespace dcgsql {

// ---------------------------------------------------------------------------
// Abstract syntax
// ---------------------------------------------------------------------------

enum class AggFn { None, Count, Sum, Avg, Min, Max };
enum class CmpOp { Eq, Ne, Lt, Gt, Le, Ge };
enum class SetOp { Intersect, Union, Except };
enum class ArithOp { None, Add, Sub, Mul, Div };

std::string to_string(AggFn f);
std::string to_string(CmpOp op);
std::string to_string(SetOp op);

struct ColumnRef {
  std::string table;   // resolved table name, or the raw qualifier if unresolved
  std::string column;  // lowercase; "*" for star
  bool is_star() const { return column == "*"; }
};

struct Operand {
  enum class Kind { Column, Number, String, Null };
  Kind kind = Kind::Column;
  ColumnRef col;
  std::string text;  // literal text as written
};

/// A possibly aggregated, possibly arithmetic value expression.
struct ValUnit {
  AggFn agg = AggFn::None;
  bool distinct = false;
  Operand first;
  ArithOp arith = ArithOp::None;
  Operand second;
};

struct Query;
using QueryPtr = std::shared_ptr<const Query>;

struct Condition {
  enum class Kind { Cmp, In, Like, Between, IsNull, Exists };
  Kind kind = Kind::Cmp;
  bool negated = false;  // NOT IN, NOT LIKE, IS NOT NULL, NOT EXISTS
  ValUnit lhs;
  CmpOp op = CmpOp::Eq;
  std::optional<ValUnit> rhs_val;      // column or literal right-hand side
  QueryPtr rhs_query;                  // subquery right-hand side
  std::vector<Operand> rhs_list;       // IN list / BETWEEN bounds / LIKE pattern
  std::size_t subquery_begin = 0, subquery_end = 0;  // span of rhs_query in source
};

struct ConditionChain {
  std::vector<Condition> conds;
  std::vector<bool> or_connective;  // size = conds.size()-1; true = OR
};

struct TableSource {
  std::string table;  // empty when subquery
  std::string alias;
  QueryPtr subquery;
};

struct JoinClause {
  TableSource source;
  std::optional<ConditionChain> on;
};

struct OrderItem {
  ValUnit val;
  bool desc = false;
};

struct SelectCore {
  bool distinct = false;
  std::vector<ValUnit> items;
  std::vector<TableSource> from;  // first entry + one per JOIN
  std::vector<JoinClause> joins;  // parallel to from[1..]
  std::optional<ConditionChain> where;
  std::vector<ValUnit> group_by;
  std::optional<ConditionChain> having;
  std::vector<OrderItem> order_by;
  std::optional<long long> limit;
  std::size_t from_begin = 0, from_end = 0;  // source span of FROM..ON fragment
};

struct Query {
  SelectCore core;
  std::vector<std::pair<SetOp, SelectCore>> compound;  // set-operation chain
  std::vector<std::pair<std::size_t, std::size_t>> component_spans;
};

struct SqlAst {
  Query query;
  std::string source;

  bool has_compound() const { return !query.compound.empty(); }
};

/// Ordered labeled tree view used by the edit-distance metric and the JSON
/// debug dump.
struct TreeNode {
  std::string label;
  std::vector<TreeNode> children;
  std::size_t size() const;
  bool operator==(const TreeNode&) const = default;
};

SqlAst parse_sql(const std::string& text, const DatabaseSchema* schema = nullptr);

/// Re-lexes a SQL fragment and joins the tokens with single spaces, keeping
/// each token's original spelling: "(SELECT min(x) ..." becomes
/// "( SELECT min ( x ) ...".
std::string space_join_sql_tokens(const std::string& fragment);

TreeNode ast_tree(const SqlAst& ast);
std::string tree_to_json(const TreeNode& node);

// ---------------------------------------------------------------------------
// Clause decomposition and exact-set-match
// ---------------------------------------------------------------------------

struct ClauseSets {
  /// clause kind -> canonicalized elements
  std::map<std::string, std::set<std::string>> kinds;
  bool operator==(const ClauseSets&) const = default;
};

struct ClauseSetOptions {
  bool compare_values = false;  // keep literal values in WHERE/HAVING comparisons
};

ClauseSets clause_sets(const SqlAst& ast, const ClauseSetOptions& opts = {});
bool exact_set_match(const SqlAst& pred, const SqlAst& gold,
                     const ClauseSetOptions& opts = {});

// ---------------------------------------------------------------------------
// Categorization and hardness
// ---------------------------------------------------------------------------

enum class QueryCategory { Simple, Join, Nested, Iuen };
enum class Hardness { Easy, Medium, Hard, Extra };

std::string to_string(QueryCategory c);
std::string to_string(Hardness h);

QueryCategory categorize(const SqlAst& ast);
Hardness hardness(const SqlAst& ast);

// ---------------------------------------------------------------------------
// Tree edit distance (Zhang-Shasha, unit costs, ordered trees)
// ---------------------------------------------------------------------------

int tree_edit_distance(const TreeNode& a, const TreeNode& b);
int tree_edit_distance(const SqlAst& a, const SqlAst& b);

// ---------------------------------------------------------------------------
// Nested-clause-to-phrase conversion
// ---------------------------------------------------------------------------

/// Renders a WHERE/HAVING-embedded subquery as a short English phrase, e.g.
/// "zip code of the weather is 94107". Unsupported shapes fall back to
/// quoting the SQL fragment verbatim.
std::string nested_to_phrase(const Query& subquery, const std::string& source_fragment);
std::string nested_to_phrase(const SqlAst& subquery);

}  // namespace dcgsql
