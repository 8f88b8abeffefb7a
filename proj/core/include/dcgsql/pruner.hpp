#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "dcgsql/catalog.hpp"
#include "dcgsql/nn.hpp"

namespace dcgsql {

// ---------------------------------------------------------------------------
// Input sequence: question tokens, then per table a TAB marker and its name
// words, then per column a COL marker and its name words.
// ---------------------------------------------------------------------------

struct PrunerUnit {
  enum class Kind { QuestionToken, TabMarker, ColMarker, NameWord };
  Kind kind = Kind::QuestionToken;
  std::size_t token_index = 0;  // QuestionToken
  std::string table;            // marker / name-word owner
  std::string column;           // set for ColMarker and its name words
  std::string word;             // QuestionToken surface or name word
};

struct PrunerInput {
  std::vector<PrunerUnit> units;
  std::size_t question_len = 0;
};

PrunerInput build_input_sequence(const TokenSeq& tokens, const DatabaseSchema& db);

// ---------------------------------------------------------------------------
// Relevance scores and labels
// ---------------------------------------------------------------------------

struct ItemScore {
  double prob = 0.0;
  std::vector<double> attention;  // one entry per question token, row max = 1
};

struct RelevanceScores {
  std::string sample_id;
  std::map<std::string, ItemScore> tables;
  std::map<std::pair<std::string, std::string>, ItemScore> columns;
};

struct RelevanceLabels {
  std::set<std::string> positive_tables;
  std::set<std::pair<std::string, std::string>> positive_columns;
};

RelevanceLabels derive_relevance_labels(const std::string& gold_sql,
                                        const DatabaseSchema& db);

// ---------------------------------------------------------------------------
// Cross-encoder
// ---------------------------------------------------------------------------

struct Vocab {
  std::vector<std::string> words;  // words[0] is the reserved unknown entry
  std::map<std::string, int> index;

  static Vocab build(const std::set<std::string>& words);
  int id(const std::string& word) const;
  std::size_t size() const { return words.size(); }
};

/// Builds the word vocabulary for a corpus: question token surfaces plus
/// schema-item name words of every referenced database.
Vocab build_pruner_vocab(const std::vector<Sample>& samples, const SchemaCatalog& catalog);

struct CrossEncoderConfig {
  int d = 64;
  int layers = 2;
  int heads = 4;
  int d_ff = 256;
  int max_seq = 256;
};

struct CrossEncoderParams {
  CrossEncoderConfig config;
  std::uint64_t seed = 0;
  Vocab vocab;
  nn::Matrix embeddings;  // vocab x d
  nn::Matrix positional;  // max_seq x d
  std::vector<nn::TransformerLayerParams> layers;
  nn::Matrix table_head_w, table_head_b;  // 1 x d, 1 x 1; zero at init
  nn::Matrix column_head_w, column_head_b;

  static CrossEncoderParams init(const CrossEncoderConfig& config, Vocab vocab,
                                 std::uint64_t seed);
  std::vector<nn::Matrix*> tensors();
  std::vector<const nn::Matrix*> tensors() const;
};

/// Initial unit states: vocab embeddings (markers take the mean over their
/// item's name words) plus positional embeddings.
nn::Matrix init_special_token_states(const CrossEncoderParams& params,
                                     const PrunerInput& input);

struct RelevanceDetail {
  RelevanceScores scores;
  /// Attention rows renormalized over question tokens (sum 1) before the
  /// division by the row maximum.
  std::map<std::string, std::vector<double>> table_rows;
  std::map<std::pair<std::string, std::string>, std::vector<double>> column_rows;
};

RelevanceScores score_relevance(const CrossEncoderParams& params, const PrunerInput& input);
RelevanceDetail score_relevance_detailed(const CrossEncoderParams& params,
                                         const PrunerInput& input);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct PrunerTrainConfig {
  int epochs = 30;
  double lr = 1e-3;
  int batch = 8;
  std::uint64_t seed = 7;
  double holdout_fraction = 0.2;
  double decision_threshold = 0.5;
};

struct PrfMetrics {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct PrunerMetrics {
  PrfMetrics tables, columns;
  std::vector<double> epoch_loss;  // mean training BCE per epoch
};

PrunerMetrics train_pruner(CrossEncoderParams& params, const std::vector<Sample>& samples,
                           const SchemaCatalog& catalog,
                           const std::map<std::string, RelevanceLabels>& labels,
                           const PrunerTrainConfig& config);

// ---------------------------------------------------------------------------
// Pruning and score files
// ---------------------------------------------------------------------------

PrunedSchema prune(const RelevanceScores& scores, const DatabaseSchema& db,
                   double decision_threshold);

std::vector<RelevanceScores> load_scores_file(const std::string& path,
                                              const SchemaCatalog& catalog,
                                              const std::vector<Sample>& samples);
void save_scores_file(const std::vector<RelevanceScores>& scores, const std::string& path);

void save_pruner_checkpoint(const CrossEncoderParams& params, const std::string& path);
CrossEncoderParams load_pruner_checkpoint(const std::string& path);

}  // namespace dcgsql
