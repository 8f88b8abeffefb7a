#include "dcgsql/linker.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include "json.hpp"

namespace dcgsql {

using nlohmann::json;

EdgeType inverse(EdgeType t) {
  switch (t) {
    case EdgeType::AttentionMatchTable: return EdgeType::AttentionMatchTableInv;
    case EdgeType::AttentionMatchTableInv: return EdgeType::AttentionMatchTable;
    case EdgeType::AttentionMatchColumn: return EdgeType::AttentionMatchColumnInv;
    case EdgeType::AttentionMatchColumnInv: return EdgeType::AttentionMatchColumn;
    case EdgeType::ExactNameMatch: return EdgeType::ExactNameMatchInv;
    case EdgeType::ExactNameMatchInv: return EdgeType::ExactNameMatch;
    case EdgeType::PartialNameMatch: return EdgeType::PartialNameMatchInv;
    case EdgeType::PartialNameMatchInv: return EdgeType::PartialNameMatch;
    case EdgeType::ValueMatch: return EdgeType::ValueMatchInv;
    case EdgeType::ValueMatchInv: return EdgeType::ValueMatch;
    case EdgeType::ColumnOfTable: return EdgeType::ColumnOfTableInv;
    case EdgeType::ColumnOfTableInv: return EdgeType::ColumnOfTable;
    case EdgeType::ForeignKey: return EdgeType::ForeignKeyInv;
    case EdgeType::ForeignKeyInv: return EdgeType::ForeignKey;
    case EdgeType::PrimaryKey: return EdgeType::PrimaryKeyInv;
    case EdgeType::PrimaryKeyInv: return EdgeType::PrimaryKey;
    case EdgeType::SameTable: return EdgeType::SameTableInv;
    case EdgeType::SameTableInv: return EdgeType::SameTable;
    case EdgeType::QuestionDistMinus2: return EdgeType::QuestionDistPlus2;
    case EdgeType::QuestionDistMinus1: return EdgeType::QuestionDistPlus1;
    case EdgeType::QuestionDistPlus1: return EdgeType::QuestionDistMinus1;
    case EdgeType::QuestionDistPlus2: return EdgeType::QuestionDistMinus2;
    case EdgeType::SelfLoop: return EdgeType::SelfLoop;
    case EdgeType::NoRelation: return EdgeType::NoRelation;
  }
  return EdgeType::NoRelation;
}

namespace {

const std::pair<EdgeType, const char*> kEdgeNames[] = {
    {EdgeType::AttentionMatchTable, "AttentionMatchTable"},
    {EdgeType::AttentionMatchTableInv, "AttentionMatchTableInv"},
    {EdgeType::AttentionMatchColumn, "AttentionMatchColumn"},
    {EdgeType::AttentionMatchColumnInv, "AttentionMatchColumnInv"},
    {EdgeType::ExactNameMatch, "ExactNameMatch"},
    {EdgeType::ExactNameMatchInv, "ExactNameMatchInv"},
    {EdgeType::PartialNameMatch, "PartialNameMatch"},
    {EdgeType::PartialNameMatchInv, "PartialNameMatchInv"},
    {EdgeType::ValueMatch, "ValueMatch"},
    {EdgeType::ValueMatchInv, "ValueMatchInv"},
    {EdgeType::ColumnOfTable, "ColumnOfTable"},
    {EdgeType::ColumnOfTableInv, "ColumnOfTableInv"},
    {EdgeType::ForeignKey, "ForeignKey"},
    {EdgeType::ForeignKeyInv, "ForeignKeyInv"},
    {EdgeType::PrimaryKey, "PrimaryKey"},
    {EdgeType::PrimaryKeyInv, "PrimaryKeyInv"},
    {EdgeType::SameTable, "SameTable"},
    {EdgeType::SameTableInv, "SameTableInv"},
    {EdgeType::QuestionDistMinus2, "QuestionDistMinus2"},
    {EdgeType::QuestionDistMinus1, "QuestionDistMinus1"},
    {EdgeType::QuestionDistPlus1, "QuestionDistPlus1"},
    {EdgeType::QuestionDistPlus2, "QuestionDistPlus2"},
    {EdgeType::SelfLoop, "SelfLoop"},
    {EdgeType::NoRelation, "NoRelation"},
};

}  // namespace

std::string to_string(EdgeType t) {
  for (const auto& [type, name] : kEdgeNames)
    if (type == t) return name;
  return "NoRelation";
}

EdgeType edge_type_from_string(const std::string& name) {
  for (const auto& [type, n] : kEdgeNames)
    if (name == n) return type;
  throw UserError("unknown edge type '" + name + "'");
}

NodeLayout make_node_layout(const TokenSeq& tokens, const PrunedSchema& pruned) {
  NodeLayout layout;
  layout.question_len = tokens.size();
  for (const auto& tok : tokens.tokens) {
    GraphNode node;
    node.kind = GraphNode::Kind::Token;
    node.token_index = tok.index;
    node.surface = tok.surface;
    layout.nodes.push_back(std::move(node));
  }
  for (const auto& table : pruned.tables) {
    GraphNode node;
    node.kind = GraphNode::Kind::Table;
    node.table = table.name;
    layout.table_index[table.name] = static_cast<int>(layout.nodes.size());
    layout.nodes.push_back(std::move(node));
  }
  for (const auto& table : pruned.tables) {
    for (const auto& column : table.columns) {
      GraphNode node;
      node.kind = GraphNode::Kind::Column;
      node.table = table.name;
      node.column = column.name;
      layout.column_index[{table.name, column.name}] = static_cast<int>(layout.nodes.size());
      layout.nodes.push_back(std::move(node));
    }
  }
  return layout;
}

std::vector<Edge> attention_match_edges(const RelevanceScores& scores,
                                        const PrunedSchema& pruned, double tau_tab,
                                        double tau_col, const NodeLayout& layout) {
  std::vector<Edge> edges;
  for (const auto& table : pruned.tables) {
    auto it = scores.tables.find(table.name);
    if (it == scores.tables.end())
      throw UserError("no relevance scores for table '" + table.name + "'");
    const auto& attention = it->second.attention;
    int src = layout.table_index.at(table.name);
    for (std::size_t t = 0; t < attention.size() && t < layout.question_len; ++t)
      if (attention[t] > tau_tab)
        edges.push_back({src, static_cast<int>(t), EdgeType::AttentionMatchTable});
    for (const auto& column : table.columns) {
      auto cit = scores.columns.find({table.name, column.name});
      if (cit == scores.columns.end())
        throw UserError("no relevance scores for column '" + table.name + "." +
                        column.name + "'");
      int csrc = layout.column_index.at({table.name, column.name});
      const auto& cattn = cit->second.attention;
      for (std::size_t t = 0; t < cattn.size() && t < layout.question_len; ++t)
        if (cattn[t] > tau_col)
          edges.push_back({csrc, static_cast<int>(t), EdgeType::AttentionMatchColumn});
    }
  }
  return edges;
}

namespace {

std::string joined_name_words(const std::string& name) {
  std::string out;
  for (const auto& w : split_name_words(name)) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

/// Token spans whose surfaces joined by spaces equal the item name, maximal
/// in the sense that the span covers the full name.
std::vector<std::pair<std::size_t, std::size_t>> exact_spans(const TokenSeq& tokens,
                                                             const std::string& item_name) {
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  const std::string target = joined_name_words(item_name);
  for (std::size_t start = 0; start < tokens.size(); ++start) {
    std::string joined;
    for (std::size_t end = start; end < tokens.size(); ++end) {
      if (!joined.empty()) joined.push_back(' ');
      joined += tokens.tokens[end].surface;
      if (joined.size() > target.size()) break;
      if (joined == target) {
        spans.emplace_back(start, end);
        break;
      }
    }
  }
  return spans;
}

bool partial_match(const std::string& lemma, const std::string& name) {
  if (lemma.size() >= 3 && name.find(lemma) != std::string::npos) return true;
  if (name.size() >= 3 && lemma.find(name) != std::string::npos) return true;
  return false;
}

}  // namespace

std::vector<Edge> name_match_edges(const TokenSeq& tokens, const PrunedSchema& pruned,
                                   const NodeLayout& layout) {
  std::vector<Edge> edges;
  auto match_item = [&](const std::string& name, int item_node) {
    std::set<std::size_t> exact_tokens;
    for (const auto& [start, end] : exact_spans(tokens, name))
      for (std::size_t t = start; t <= end; ++t) exact_tokens.insert(t);
    for (std::size_t t : exact_tokens)
      edges.push_back({static_cast<int>(t), item_node, EdgeType::ExactNameMatch});
    const std::string normalized = joined_name_words(name);
    for (const auto& tok : tokens.tokens) {
      if (exact_tokens.count(tok.index)) continue;
      if (partial_match(tok.lemma, normalized))
        edges.push_back({static_cast<int>(tok.index), item_node, EdgeType::PartialNameMatch});
    }
  };
  for (const auto& table : pruned.tables) {
    match_item(table.name, layout.table_index.at(table.name));
    for (const auto& column : table.columns)
      match_item(column.name, layout.column_index.at({table.name, column.name}));
  }
  return edges;
}

std::vector<Edge> value_match_edges(const ValueMatches& matches, const PrunedSchema& pruned,
                                    const TokenSeq& tokens, const NodeLayout& layout) {
  std::vector<Edge> edges;
  std::set<std::pair<int, int>> seen;
  for (const auto& [key, values] : matches) {
    auto dot = key.find('.');
    if (dot == std::string::npos) continue;
    std::pair<std::string, std::string> column{key.substr(0, dot), key.substr(dot + 1)};
    auto it = layout.column_index.find(column);
    if (it == layout.column_index.end()) continue;  // pruned away
    const int col_node = it->second;
    for (const auto& value : values) {
      std::string lowered;
      lowered.reserve(value.size());
      for (char c : value)
        lowered.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
      for (const auto& tok : tokens.tokens) {
        bool hit = tok.surface == lowered;
        if (!hit && tok.index + 1 < tokens.size() &&
            tok.surface + " " + tokens.tokens[tok.index + 1].surface == lowered)
          hit = true;
        bool second_of_bigram =
            tok.index > 0 &&
            tokens.tokens[tok.index - 1].surface + " " + tok.surface == lowered;
        if (!hit && !second_of_bigram) continue;
        if (seen.emplace(static_cast<int>(tok.index), col_node).second)
          edges.push_back({static_cast<int>(tok.index), col_node, EdgeType::ValueMatch});
      }
    }
  }
  return edges;
}

std::vector<Edge> schema_structure_edges(const PrunedSchema& pruned,
                                         const NodeLayout& layout) {
  std::vector<Edge> edges;
  for (const auto& table : pruned.tables) {
    const int table_node = layout.table_index.at(table.name);
    std::vector<int> column_nodes;
    for (const auto& column : table.columns)
      column_nodes.push_back(layout.column_index.at({table.name, column.name}));
    for (int cn : column_nodes) edges.push_back({cn, table_node, EdgeType::ColumnOfTable});
    for (std::size_t i = 0; i < column_nodes.size(); ++i)
      for (std::size_t j = i + 1; j < column_nodes.size(); ++j)
        edges.push_back({column_nodes[i], column_nodes[j], EdgeType::SameTable});
  }
  for (const auto& fk : pruned.foreign_keys) {
    auto from = layout.column_index.find({fk.from_table, fk.from_column});
    auto to = layout.column_index.find({fk.to_table, fk.to_column});
    if (from != layout.column_index.end() && to != layout.column_index.end())
      edges.push_back({from->second, to->second, EdgeType::ForeignKey});
  }
  for (const auto& [table, column] : pruned.primary_keys) {
    auto col = layout.column_index.find({table, column});
    auto tab = layout.table_index.find(table);
    if (col != layout.column_index.end() && tab != layout.table_index.end())
      edges.push_back({col->second, tab->second, EdgeType::PrimaryKey});
  }
  return edges;
}

std::vector<Edge> question_distance_edges(const TokenSeq& tokens) {
  std::vector<Edge> edges;
  const int n = static_cast<int>(tokens.size());
  for (int i = 0; i < n; ++i) {
    for (int d = -2; d <= 2; ++d) {
      if (d == 0) continue;
      const int j = i + d;
      if (j < 0 || j >= n) continue;
      EdgeType type = d == -2   ? EdgeType::QuestionDistMinus2
                      : d == -1 ? EdgeType::QuestionDistMinus1
                      : d == 1  ? EdgeType::QuestionDistPlus1
                                : EdgeType::QuestionDistPlus2;
      edges.push_back({i, j, type});
    }
  }
  return edges;
}

SchemaLinkGraph build_graph(const Sample& sample, const TokenSeq& tokens,
                            const PrunedSchema& pruned, const RelevanceScores& scores,
                            const ValueMatches& value_matches, const GraphOptions& options) {
  NodeLayout layout = make_node_layout(tokens, pruned);
  std::set<Edge> edges;
  auto add_all = [&](const std::vector<Edge>& produced) {
    for (const Edge& e : produced) {
      edges.insert(e);
      edges.insert({e.dst, e.src, inverse(e.type)});
    }
  };
  add_all(attention_match_edges(scores, pruned, options.tau_tab, options.tau_col, layout));
  add_all(name_match_edges(tokens, pruned, layout));
  if (options.include_value_match_edges)
    add_all(value_match_edges(value_matches, pruned, tokens, layout));
  add_all(schema_structure_edges(pruned, layout));
  add_all(question_distance_edges(tokens));
  for (int i = 0; i < static_cast<int>(layout.nodes.size()); ++i)
    edges.insert({i, i, EdgeType::SelfLoop});

  SchemaLinkGraph g;
  g.sample_id = sample.id;
  g.nodes = std::move(layout.nodes);
  g.edges.assign(edges.begin(), edges.end());
  g.pruned_schema = pruned;
  g.value_matches = value_matches;
  g.question_len = tokens.size();
  return g;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

json schema_to_json(const DatabaseSchema& db) {
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
  return json{{"db_id", db.db_id},
              {"tables", tables},
              {"primary_keys", pks},
              {"foreign_keys", fks}};
}

DatabaseSchema schema_from_json(const json& j) {
  DatabaseSchema db;
  db.db_id = j.value("db_id", std::string());
  for (const auto& tj : j.value("tables", json::array())) {
    TableDef t;
    t.name = tj.value("name", std::string());
    for (const auto& cj : tj.value("columns", json::array()))
      t.columns.push_back(
          {cj.value("name", std::string()), value_type_from_string(cj.value("type", "text"))});
    db.tables.push_back(std::move(t));
  }
  for (const auto& pj : j.value("primary_keys", json::array()))
    db.primary_keys.emplace_back(pj[0].get<std::string>(), pj[1].get<std::string>());
  for (const auto& fj : j.value("foreign_keys", json::array()))
    db.foreign_keys.push_back(ForeignKey{fj[0].get<std::string>(), fj[1].get<std::string>(),
                                         fj[2].get<std::string>(), fj[3].get<std::string>()});
  return db;
}

}  // namespace

std::string serialize_graph(const SchemaLinkGraph& g) {
  json nodes = json::array();
  for (const auto& node : g.nodes) {
    switch (node.kind) {
      case GraphNode::Kind::Token:
        nodes.push_back(
            {{"kind", "token"}, {"index", node.token_index}, {"surface", node.surface}});
        break;
      case GraphNode::Kind::Table:
        nodes.push_back({{"kind", "table"}, {"name", node.table}});
        break;
      case GraphNode::Kind::Column:
        nodes.push_back({{"kind", "column"}, {"table", node.table}, {"name", node.column}});
        break;
    }
  }
  json edges = json::array();
  std::vector<Edge> sorted = g.edges;
  std::sort(sorted.begin(), sorted.end());
  for (const Edge& e : sorted)
    edges.push_back(json::array({e.src, e.dst, to_string(e.type)}));
  json doc{{"sample_id", g.sample_id},
           {"nodes", nodes},
           {"edges", edges},
           {"pruned_schema", schema_to_json(g.pruned_schema)},
           {"value_matches", g.value_matches},
           {"question_len", g.question_len}};
  return doc.dump();
}

SchemaLinkGraph deserialize_graph(const std::string& bytes) {
  json doc;
  try {
    doc = json::parse(bytes);
  } catch (const json::exception& e) {
    throw UserError(std::string("malformed graph payload: ") + e.what());
  }
  SchemaLinkGraph g;
  g.sample_id = doc.value("sample_id", std::string());
  g.question_len = doc.value("question_len", static_cast<std::size_t>(0));
  for (const auto& nj : doc.value("nodes", json::array())) {
    GraphNode node;
    std::string kind = nj.value("kind", std::string());
    if (kind == "token") {
      node.kind = GraphNode::Kind::Token;
      node.token_index = nj.value("index", static_cast<std::size_t>(0));
      node.surface = nj.value("surface", std::string());
    } else if (kind == "table") {
      node.kind = GraphNode::Kind::Table;
      node.table = nj.value("name", std::string());
    } else if (kind == "column") {
      node.kind = GraphNode::Kind::Column;
      node.table = nj.value("table", std::string());
      node.column = nj.value("name", std::string());
    } else {
      throw UserError("unknown node kind '" + kind + "'");
    }
    g.nodes.push_back(std::move(node));
  }
  for (const auto& ej : doc.value("edges", json::array())) {
    if (!ej.is_array() || ej.size() != 3) throw UserError("malformed edge entry");
    Edge e;
    e.src = ej[0].get<int>();
    e.dst = ej[1].get<int>();
    e.type = edge_type_from_string(ej[2].get<std::string>());
    if (e.src < 0 || e.dst < 0 || e.src >= static_cast<int>(g.nodes.size()) ||
        e.dst >= static_cast<int>(g.nodes.size()))
      throw UserError("edge endpoint out of range");
    g.edges.push_back(e);
  }
  std::sort(g.edges.begin(), g.edges.end());
  if (doc.contains("pruned_schema")) g.pruned_schema = schema_from_json(doc["pruned_schema"]);
  if (doc.contains("value_matches"))
    g.value_matches = doc["value_matches"].get<ValueMatches>();
  return g;
}

void save_graphs(const std::vector<SchemaLinkGraph>& graphs, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UserError("cannot write file '" + path + "'");
  for (const auto& g : graphs) out << serialize_graph(g) << "\n";
}

std::vector<SchemaLinkGraph> load_graphs(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UserError("cannot open file '" + path + "'");
  std::vector<SchemaLinkGraph> graphs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    graphs.push_back(deserialize_graph(line));
  }
  return graphs;
}

}  // namespace dcgsql
