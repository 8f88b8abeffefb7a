#include <algorithm>
#include <cctype>
#include <cstdlib>

#include "dcgsql/sqlkit.hpp"

namespace dcgsql {

namespace {

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

enum class TokKind { Ident, Number, String, Symbol, End };

struct Tok {
  TokKind kind = TokKind::End;
  std::string text;   // identifiers lowercased, symbols verbatim
  std::string raw;    // original spelling
  std::size_t begin = 0, end = 0;
};

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::vector<Tok> lex(const std::string& src) {
  std::vector<Tok> toks;
  std::size_t i = 0;
  const std::size_t n = src.size();
  while (i < n) {
    char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    Tok t;
    t.begin = i;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < n && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
      t.kind = TokKind::Ident;
      t.raw = src.substr(i, j - i);
      t.text = lower(t.raw);
      i = j;
    } else if (std::isdigit(static_cast<unsigned char>(c)) ||
               (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
      std::size_t j = i;
      bool dot = false;
      while (j < n && (std::isdigit(static_cast<unsigned char>(src[j])) ||
                       (src[j] == '.' && !dot))) {
        if (src[j] == '.') dot = true;
        ++j;
      }
      t.kind = TokKind::Number;
      t.raw = src.substr(i, j - i);
      t.text = t.raw;
      i = j;
    } else if (c == '\'' || c == '"' || c == '`') {
      char quote = c;
      std::size_t j = i + 1;
      std::string value;
      bool closed = false;
      while (j < n) {
        if (src[j] == quote) {
          if (j + 1 < n && src[j + 1] == quote) {  // doubled quote escape
            value.push_back(quote);
            j += 2;
            continue;
          }
          closed = true;
          ++j;
          break;
        }
        value.push_back(src[j]);
        ++j;
      }
      if (!closed) throw SqlParseError("unterminated string literal", i);
      t.kind = TokKind::String;
      t.raw = src.substr(i, j - i);
      t.text = value;
      i = j;
    } else {
      static const char* two_char[] = {"!=", "<>", "<=", ">=", "=="};
      std::string pair = src.substr(i, 2);
      bool is_two = std::any_of(std::begin(two_char), std::end(two_char),
                                [&](const char* s) { return pair == s; });
      t.kind = TokKind::Symbol;
      if (is_two) {
        t.raw = pair;
        i += 2;
      } else {
        t.raw = std::string(1, c);
        i += 1;
      }
      t.text = t.raw;
    }
    t.end = i;
    toks.push_back(std::move(t));
  }
  Tok end;
  end.kind = TokKind::End;
  end.begin = end.end = n;
  toks.push_back(end);
  return toks;
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

const std::set<std::string> kKeywords = {
    "select", "from", "where", "group",  "by",     "having",    "order",
    "limit",  "join", "on",    "as",     "and",    "or",        "not",
    "in",     "like", "between", "is",   "null",   "distinct",  "intersect",
    "union",  "except", "asc", "desc",   "inner",  "left",      "right",
    "outer",  "exists", "all",  "count", "sum",    "avg",       "min", "max"};

struct Parser {
  const std::string& src;
  std::vector<Tok> toks;
  std::size_t pos = 0;
  const DatabaseSchema* schema;

  Parser(const std::string& s, const DatabaseSchema* sch) : src(s), schema(sch) {
    toks = lex(s);
  }

  const Tok& peek(std::size_t ahead = 0) const {
    std::size_t i = std::min(pos + ahead, toks.size() - 1);
    return toks[i];
  }
  const Tok& advance() { return toks[std::min(pos++, toks.size() - 1)]; }
  bool at_end() const { return peek().kind == TokKind::End; }

  bool is_kw(const Tok& t, const char* kw) const {
    return t.kind == TokKind::Ident && t.text == kw;
  }
  bool check_kw(const char* kw, std::size_t ahead = 0) const { return is_kw(peek(ahead), kw); }
  bool match_kw(const char* kw) {
    if (check_kw(kw)) {
      ++pos;
      return true;
    }
    return false;
  }
  void expect_kw(const char* kw) {
    if (!match_kw(kw))
      throw SqlParseError(std::string("expected '") + kw + "'", peek().begin);
  }
  bool check_sym(const char* sym, std::size_t ahead = 0) const {
    const Tok& t = peek(ahead);
    return t.kind == TokKind::Symbol && t.text == sym;
  }
  bool match_sym(const char* sym) {
    if (check_sym(sym)) {
      ++pos;
      return true;
    }
    return false;
  }
  void expect_sym(const char* sym) {
    if (!match_sym(sym))
      throw SqlParseError(std::string("expected '") + sym + "'", peek().begin);
  }

  // --- grammar ---

  Query parse_query() {
    Query q;
    std::size_t begin = peek().begin;
    q.core = parse_select_core();
    q.component_spans.emplace_back(begin, prev_end());
    while (true) {
      SetOp op;
      if (match_kw("intersect"))
        op = SetOp::Intersect;
      else if (match_kw("union"))
        op = SetOp::Union;
      else if (match_kw("except"))
        op = SetOp::Except;
      else
        break;
      match_kw("all");
      std::size_t comp_begin = peek().begin;
      q.compound.emplace_back(op, parse_select_core());
      q.component_spans.emplace_back(comp_begin, prev_end());
    }
    return q;
  }

  std::size_t prev_end() const { return pos > 0 ? toks[pos - 1].end : 0; }

  static std::optional<AggFn> agg_from(const std::string& name) {
    if (name == "count") return AggFn::Count;
    if (name == "sum") return AggFn::Sum;
    if (name == "avg") return AggFn::Avg;
    if (name == "min") return AggFn::Min;
    if (name == "max") return AggFn::Max;
    return std::nullopt;
  }

  SelectCore parse_select_core() {
    if (!check_kw("select"))
      throw SqlParseError("expected SELECT", peek().begin);
    advance();
    SelectCore core;
    core.distinct = match_kw("distinct");
    core.items.push_back(parse_val_unit());
    while (match_sym(",")) core.items.push_back(parse_val_unit());

    core.from_begin = peek().begin;
    expect_kw("from");
    core.from.push_back(parse_table_source());
    core.from_end = prev_end();
    while (true) {
      std::size_t save = pos;
      bool has_join = false;
      if (check_kw("join")) {
        has_join = true;
        advance();
      } else if (check_kw("inner") || check_kw("left") || check_kw("right")) {
        advance();
        match_kw("outer");
        expect_kw("join");
        has_join = true;
      }
      if (!has_join) {
        pos = save;
        break;
      }
      JoinClause join;
      join.source = parse_table_source();
      if (match_kw("on")) join.on = parse_condition_chain();
      core.from.push_back(join.source);
      core.joins.push_back(std::move(join));
      core.from_end = prev_end();
    }

    if (match_kw("where")) core.where = parse_condition_chain();
    if (check_kw("group")) {
      advance();
      expect_kw("by");
      core.group_by.push_back(parse_val_unit());
      while (match_sym(",")) core.group_by.push_back(parse_val_unit());
    }
    if (match_kw("having")) core.having = parse_condition_chain();
    if (check_kw("order")) {
      advance();
      expect_kw("by");
      do {
        OrderItem item;
        item.val = parse_val_unit();
        if (match_kw("desc"))
          item.desc = true;
        else
          match_kw("asc");
        core.order_by.push_back(std::move(item));
      } while (match_sym(","));
    }
    if (match_kw("limit")) {
      const Tok& t = peek();
      if (t.kind != TokKind::Number)
        throw SqlParseError("expected number after LIMIT", t.begin);
      core.limit = std::strtoll(t.text.c_str(), nullptr, 10);
      advance();
    }
    resolve_core(core);
    return core;
  }

  TableSource parse_table_source() {
    TableSource ts;
    if (match_sym("(")) {
      auto q = std::make_shared<Query>(parse_query());
      expect_sym(")");
      ts.subquery = q;
    } else {
      const Tok& t = peek();
      if (t.kind != TokKind::Ident || kKeywords.count(t.text))
        throw SqlParseError("expected table name", t.begin);
      ts.table = t.text;
      advance();
    }
    if (match_kw("as")) {
      const Tok& t = peek();
      if (t.kind != TokKind::Ident)
        throw SqlParseError("expected alias after AS", t.begin);
      ts.alias = t.text;
      advance();
    } else if (peek().kind == TokKind::Ident && !kKeywords.count(peek().text)) {
      ts.alias = peek().text;
      advance();
    }
    return ts;
  }

  ConditionChain parse_condition_chain() {
    ConditionChain chain;
    chain.conds.push_back(parse_condition());
    while (true) {
      if (match_kw("and"))
        chain.or_connective.push_back(false);
      else if (match_kw("or"))
        chain.or_connective.push_back(true);
      else
        break;
      chain.conds.push_back(parse_condition());
    }
    return chain;
  }

  Condition parse_condition() {
    Condition cond;
    if (match_kw("not")) {
      if (check_kw("exists")) {
        advance();
        cond.kind = Condition::Kind::Exists;
        cond.negated = true;
        parse_subquery_rhs(cond);
        return cond;
      }
      cond.negated = true;
    }
    if (check_kw("exists")) {
      advance();
      cond.kind = Condition::Kind::Exists;
      parse_subquery_rhs(cond);
      return cond;
    }
    cond.lhs = parse_val_unit();
    bool pre_negated = cond.negated;
    cond.negated = false;
    if (match_kw("not")) cond.negated = true;
    cond.negated = cond.negated || pre_negated;

    const Tok& t = peek();
    if (t.kind == TokKind::Symbol) {
      static const std::map<std::string, CmpOp> ops = {
          {"=", CmpOp::Eq},  {"==", CmpOp::Eq}, {"!=", CmpOp::Ne}, {"<>", CmpOp::Ne},
          {"<", CmpOp::Lt},  {">", CmpOp::Gt},  {"<=", CmpOp::Le}, {">=", CmpOp::Ge}};
      auto it = ops.find(t.text);
      if (it != ops.end()) {
        advance();
        cond.kind = Condition::Kind::Cmp;
        cond.op = it->second;
        if (check_sym("(") && check_kw("select", 1)) {
          parse_subquery_rhs(cond);
        } else {
          cond.rhs_val = parse_val_unit();
        }
        return cond;
      }
      throw SqlParseError("unexpected symbol '" + t.text + "' in condition", t.begin);
    }
    if (match_kw("in")) {
      cond.kind = Condition::Kind::In;
      expect_sym("(");
      if (check_kw("select")) {
        std::size_t begin = pos > 0 ? toks[pos - 1].begin : 0;
        auto q = std::make_shared<Query>(parse_query());
        cond.rhs_query = q;
        cond.subquery_begin = begin;
        expect_sym(")");
        cond.subquery_end = prev_end();
      } else {
        cond.rhs_list.push_back(parse_operand());
        while (match_sym(",")) cond.rhs_list.push_back(parse_operand());
        expect_sym(")");
      }
      return cond;
    }
    if (match_kw("like")) {
      cond.kind = Condition::Kind::Like;
      cond.rhs_list.push_back(parse_operand());
      return cond;
    }
    if (match_kw("between")) {
      cond.kind = Condition::Kind::Between;
      cond.rhs_list.push_back(parse_operand());
      expect_kw("and");
      cond.rhs_list.push_back(parse_operand());
      return cond;
    }
    if (match_kw("is")) {
      cond.kind = Condition::Kind::IsNull;
      if (match_kw("not")) cond.negated = true;
      expect_kw("null");
      return cond;
    }
    throw SqlParseError("expected comparison operator", t.begin);
  }

  void parse_subquery_rhs(Condition& cond) {
    expect_sym("(");
    cond.subquery_begin = pos > 0 ? toks[pos - 1].begin : 0;
    auto q = std::make_shared<Query>(parse_query());
    cond.rhs_query = q;
    expect_sym(")");
    cond.subquery_end = prev_end();
  }

  ValUnit parse_val_unit() {
    ValUnit unit;
    const Tok& t = peek();
    if (t.kind == TokKind::Ident) {
      auto agg = agg_from(t.text);
      if (agg && check_sym("(", 1)) {
        advance();
        advance();  // '('
        unit.agg = *agg;
        unit.distinct = match_kw("distinct");
        unit.first = parse_operand();
        expect_sym(")");
        maybe_arith(unit);
        return unit;
      }
    }
    unit.first = parse_operand();
    maybe_arith(unit);
    return unit;
  }

  void maybe_arith(ValUnit& unit) {
    const Tok& t = peek();
    if (t.kind != TokKind::Symbol) return;
    ArithOp op = ArithOp::None;
    if (t.text == "+") op = ArithOp::Add;
    else if (t.text == "-") op = ArithOp::Sub;
    else if (t.text == "*") op = ArithOp::Mul;  // only when followed by an operand
    else if (t.text == "/") op = ArithOp::Div;
    if (op == ArithOp::None) return;
    if (op == ArithOp::Mul) {
      const Tok& next = peek(1);
      bool operand_follows = next.kind == TokKind::Number || next.kind == TokKind::String ||
                             (next.kind == TokKind::Ident && !kKeywords.count(next.text));
      if (!operand_follows) return;
    }
    advance();
    unit.arith = op;
    unit.second = parse_operand();
  }

  Operand parse_operand() {
    Operand op;
    const Tok& t = peek();
    if (t.kind == TokKind::Number) {
      op.kind = Operand::Kind::Number;
      op.text = t.raw;
      advance();
      return op;
    }
    if (t.kind == TokKind::String) {
      op.kind = Operand::Kind::String;
      op.text = t.text;
      advance();
      return op;
    }
    if (t.kind == TokKind::Symbol && t.text == "*") {
      op.kind = Operand::Kind::Column;
      op.col.column = "*";
      advance();
      return op;
    }
    if (t.kind == TokKind::Ident && t.text == "null") {
      op.kind = Operand::Kind::Null;
      op.text = "null";
      advance();
      return op;
    }
    if (t.kind == TokKind::Ident && !kKeywords.count(t.text)) {
      op.kind = Operand::Kind::Column;
      std::string first = t.text;
      advance();
      if (match_sym(".")) {
        const Tok& t2 = peek();
        if (t2.kind == TokKind::Symbol && t2.text == "*") {
          op.col.table = first;
          op.col.column = "*";
          advance();
          return op;
        }
        if (t2.kind != TokKind::Ident)
          throw SqlParseError("expected column after '.'", t2.begin);
        op.col.table = first;
        op.col.column = t2.text;
        advance();
      } else {
        op.col.column = first;
      }
      return op;
    }
    throw SqlParseError("expected value", t.begin);
  }

  // --- name resolution ---

  struct Scope {
    std::map<std::string, std::string> aliases;  // alias -> table name
    std::vector<std::string> tables;             // concrete table names in FROM
    const Scope* parent = nullptr;
  };

  void resolve_core(SelectCore& core) {
    Scope scope;
    std::set<std::string> virtual_tables;  // FROM-subquery aliases
    bool anonymous_subquery = false;
    for (const auto& src_tbl : core.from) {
      if (!src_tbl.table.empty()) {
        scope.tables.push_back(src_tbl.table);
        if (!src_tbl.alias.empty()) scope.aliases[src_tbl.alias] = src_tbl.table;
        if (schema && !schema->find_table(src_tbl.table))
          throw UserError("unknown table '" + src_tbl.table + "' in SQL");
      } else if (!src_tbl.alias.empty()) {
        scope.aliases[src_tbl.alias] = src_tbl.alias;
        virtual_tables.insert(src_tbl.alias);
      } else {
        anonymous_subquery = true;
      }
    }
    auto resolve_col = [&](ColumnRef& col) {
      if (col.is_star()) {
        if (!col.table.empty()) col.table = resolve_table_name(scope, col.table);
        return;
      }
      if (!col.table.empty()) {
        col.table = resolve_table_name(scope, col.table);
        if (schema && !virtual_tables.count(col.table) &&
            !schema->has_column(col.table, col.column))
          throw UserError("unknown column '" + col.table + "." + col.column + "' in SQL");
        return;
      }
      // Unqualified: pick the first FROM table that has the column.
      for (const auto& table : scope.tables) {
        if (!schema) {
          if (scope.tables.size() == 1) col.table = table;
          break;
        }
        const TableDef* t = schema->find_table(table);
        if (t && t->find_column(col.column)) {
          col.table = table;
          return;
        }
      }
      if (schema && col.table.empty() && !anonymous_subquery && virtual_tables.empty())
        throw UserError("cannot resolve column '" + col.column + "' in SQL");
    };
    auto resolve_val = [&](ValUnit& val) {
      if (val.first.kind == Operand::Kind::Column) resolve_col(val.first.col);
      if (val.arith != ArithOp::None && val.second.kind == Operand::Kind::Column)
        resolve_col(val.second.col);
    };
    auto resolve_chain = [&](std::optional<ConditionChain>& chain) {
      if (!chain) return;
      for (auto& cond : chain->conds) {
        if (cond.kind != Condition::Kind::Exists) resolve_val(cond.lhs);
        if (cond.rhs_val) resolve_val(*cond.rhs_val);
      }
    };
    for (auto& item : core.items) resolve_val(item);
    for (auto& join : core.joins) resolve_chain(join.on);
    resolve_chain(core.where);
    for (auto& col : core.group_by) resolve_val(col);
    resolve_chain(core.having);
    for (auto& item : core.order_by) resolve_val(item.val);
  }

  std::string resolve_table_name(const Scope& scope, const std::string& name) {
    auto it = scope.aliases.find(name);
    if (it != scope.aliases.end()) return it->second;
    if (schema && !schema->find_table(name) &&
        std::find(scope.tables.begin(), scope.tables.end(), name) == scope.tables.end())
      throw UserError("unknown table or alias '" + name + "' in SQL");
    return name;
  }
};

}  // namespace

std::string space_join_sql_tokens(const std::string& fragment) {
  std::string out;
  for (const Tok& t : lex(fragment)) {
    if (t.kind == TokKind::End) break;
    if (!out.empty()) out.push_back(' ');
    out += t.raw;
  }
  return out;
}

SqlAst parse_sql(const std::string& text, const DatabaseSchema* schema) {
  if (text.empty()) throw SqlParseError("empty SQL text", 0);
  Parser parser(text, schema);
  SqlAst ast;
  ast.source = text;
  ast.query = parser.parse_query();
  parser.match_sym(";");
  if (!parser.at_end())
    throw SqlParseError("trailing input after query", parser.peek().begin);
  return ast;
}

std::string to_string(AggFn f) {
  switch (f) {
    case AggFn::None: return "none";
    case AggFn::Count: return "count";
    case AggFn::Sum: return "sum";
    case AggFn::Avg: return "avg";
    case AggFn::Min: return "min";
    case AggFn::Max: return "max";
  }
  return "none";
}

std::string to_string(CmpOp op) {
  switch (op) {
    case CmpOp::Eq: return "=";
    case CmpOp::Ne: return "!=";
    case CmpOp::Lt: return "<";
    case CmpOp::Gt: return ">";
    case CmpOp::Le: return "<=";
    case CmpOp::Ge: return ">=";
  }
  return "=";
}

std::string to_string(SetOp op) {
  switch (op) {
    case SetOp::Intersect: return "INTERSECT";
    case SetOp::Union: return "UNION";
    case SetOp::Except: return "EXCEPT";
  }
  return "INTERSECT";
}

std::string to_string(QueryCategory c) {
  switch (c) {
    case QueryCategory::Simple: return "SIMPLE";
    case QueryCategory::Join: return "JOIN";
    case QueryCategory::Nested: return "NESTED";
    case QueryCategory::Iuen: return "IUEN";
  }
  return "SIMPLE";
}

std::string to_string(Hardness h) {
  switch (h) {
    case Hardness::Easy: return "easy";
    case Hardness::Medium: return "medium";
    case Hardness::Hard: return "hard";
    case Hardness::Extra: return "extra";
  }
  return "easy";
}

}  // namespace dcgsql
