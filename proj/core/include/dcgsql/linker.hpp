#pragma once

#include <map>
#include <string>
#include <vector>

#include "dcgsql/catalog.hpp"
#include "dcgsql/pruner.hpp"

namespace dcgsql {

/// Typed edges of the schema link graph. Directed kinds come in forward /
/// Inv pairs; question-distance kinds are inverses of each other; SelfLoop
/// and NoRelation are their own inverses.
enum class EdgeType {
  AttentionMatchTable,
  AttentionMatchTableInv,
  AttentionMatchColumn,
  AttentionMatchColumnInv,
  ExactNameMatch,
  ExactNameMatchInv,
  PartialNameMatch,
  PartialNameMatchInv,
  ValueMatch,
  ValueMatchInv,
  ColumnOfTable,
  ColumnOfTableInv,
  ForeignKey,
  ForeignKeyInv,
  PrimaryKey,
  PrimaryKeyInv,
  SameTable,
  SameTableInv,
  QuestionDistMinus2,
  QuestionDistMinus1,
  QuestionDistPlus1,
  QuestionDistPlus2,
  SelfLoop,
  NoRelation,
};

constexpr int kEdgeTypeCount = 24;

EdgeType inverse(EdgeType t);
std::string to_string(EdgeType t);
EdgeType edge_type_from_string(const std::string& name);

struct GraphNode {
  enum class Kind { Token, Table, Column };
  Kind kind = Kind::Token;
  std::size_t token_index = 0;  // Token
  std::string surface;          // Token
  std::string table;            // Table / Column
  std::string column;           // Column
  bool operator==(const GraphNode&) const = default;
};

struct Edge {
  int src = 0;
  int dst = 0;
  EdgeType type = EdgeType::NoRelation;
  auto operator<=>(const Edge&) const = default;
};

/// Canonical node layout: question tokens first (by index), then kept tables
/// (catalog order), then kept columns (catalog order).
struct NodeLayout {
  std::vector<GraphNode> nodes;
  std::map<std::string, int> table_index;
  std::map<std::pair<std::string, std::string>, int> column_index;
  std::size_t question_len = 0;
};

NodeLayout make_node_layout(const TokenSeq& tokens, const PrunedSchema& pruned);

struct SchemaLinkGraph {
  std::string sample_id;
  std::vector<GraphNode> nodes;
  std::vector<Edge> edges;  // sorted by (src, dst, type), inverse-closed
  PrunedSchema pruned_schema;
  ValueMatches value_matches;
  std::size_t question_len = 0;

  bool operator==(const SchemaLinkGraph&) const = default;
};

std::vector<Edge> attention_match_edges(const RelevanceScores& scores,
                                        const PrunedSchema& pruned, double tau_tab,
                                        double tau_col, const NodeLayout& layout);
std::vector<Edge> name_match_edges(const TokenSeq& tokens, const PrunedSchema& pruned,
                                   const NodeLayout& layout);
std::vector<Edge> value_match_edges(const ValueMatches& matches, const PrunedSchema& pruned,
                                    const TokenSeq& tokens, const NodeLayout& layout);
std::vector<Edge> schema_structure_edges(const PrunedSchema& pruned,
                                         const NodeLayout& layout);
std::vector<Edge> question_distance_edges(const TokenSeq& tokens);

struct GraphOptions {
  double tau_tab = 0.66;
  double tau_col = 0.43;
  bool include_value_match_edges = true;
};

SchemaLinkGraph build_graph(const Sample& sample, const TokenSeq& tokens,
                            const PrunedSchema& pruned, const RelevanceScores& scores,
                            const ValueMatches& value_matches,
                            const GraphOptions& options = {});

std::string serialize_graph(const SchemaLinkGraph& g);
SchemaLinkGraph deserialize_graph(const std::string& bytes);

void save_graphs(const std::vector<SchemaLinkGraph>& graphs, const std::string& path);
std::vector<SchemaLinkGraph> load_graphs(const std::string& path);

}  // namespace dcgsql
