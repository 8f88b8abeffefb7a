#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "dcgsql/encoder.hpp"

namespace dcgsql {

// ---------------------------------------------------------------------------
// Usefulness scoring
// ---------------------------------------------------------------------------

/// Scores how useful a candidate demonstration is for generating the
/// anchor's gold SQL; values live in [0,1] and must be deterministic per
/// (anchor, candidate) within one run.
class UsefulnessProvider {
 public:
  virtual ~UsefulnessProvider() = default;
  virtual double score(const Sample& anchor, const Sample& candidate) = 0;
};

class StubConstantProvider : public UsefulnessProvider {
 public:
  explicit StubConstantProvider(double value) : value_(value) {}
  double score(const Sample&, const Sample&) override { return value_; }

 private:
  double value_;
};

class FileBackedProvider : public UsefulnessProvider {
 public:
  explicit FileBackedProvider(const std::string& path);
  FileBackedProvider() = default;
  double score(const Sample& anchor, const Sample& candidate) override;
  void put(const std::string& anchor_id, const std::string& candidate_id, double score);
  void save(const std::string& path) const;

 private:
  std::map<std::pair<std::string, std::string>, double> scores_;
};

/// Wraps an arbitrary scoring function (e.g. an LLM-likelihood client).
class CallbackProvider : public UsefulnessProvider {
 public:
  using Fn = std::function<double(const Sample&, const Sample&)>;
  explicit CallbackProvider(Fn fn) : fn_(std::move(fn)) {}
  double score(const Sample& anchor, const Sample& candidate) override {
    return fn_(anchor, candidate);
  }

 private:
  Fn fn_;
};

struct ScoredCandidateSet {
  std::string anchor_id;
  std::vector<std::pair<std::string, double>> ranked;  // score descending
  std::vector<std::string> positives;                  // first m_pos ids
  std::vector<std::string> negatives;                  // last m_neg ids
};

ScoredCandidateSet score_candidates(const Sample& anchor, const std::vector<Sample>& pool,
                                    UsefulnessProvider& provider, std::size_t m_pos,
                                    std::size_t m_neg);

void save_candidate_sets(const std::vector<ScoredCandidateSet>& sets,
                         const std::string& path);
std::vector<ScoredCandidateSet> load_candidate_sets(const std::string& path);

// ---------------------------------------------------------------------------
// Contrastive loss
// ---------------------------------------------------------------------------

struct ContrastiveResult {
  double loss = 0.0;
  std::vector<double> d_anchor;
  std::vector<std::vector<double>> d_positives;
  std::vector<std::vector<double>> d_negatives;
};

/// InfoNCE with in-set negatives: mean over positives of
/// -log exp(sim(a,p)/t) / (exp(sim(a,p)/t) + sum_n exp(sim(a,n)/t)).
ContrastiveResult contrastive_loss(const GraphEmbedding& anchor,
                                   const std::vector<GraphEmbedding>& positives,
                                   const std::vector<GraphEmbedding>& negatives,
                                   double temperature);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct RetrieverTrainConfig {
  int epochs = 5;
  double lr = 1e-3;
  int batch = 4;
  double temperature = 0.1;
  std::uint64_t seed = 7;
};

struct RetrieverTrainResult {
  std::vector<double> epoch_loss;  // mean loss per epoch, including epoch 0
};

RetrieverTrainResult train_retriever(EncoderParams& params,
                                     const std::vector<SchemaLinkGraph>& graphs,
                                     const std::vector<ScoredCandidateSet>& sets,
                                     const RetrieverTrainConfig& config);

// ---------------------------------------------------------------------------
// Index and retrieval
// ---------------------------------------------------------------------------

struct RetrievalIndex {
  std::vector<GraphEmbedding> entries;
  std::string fingerprint;  // encoder checkpoint fingerprint
  int dim = 0;
};

RetrievalIndex build_index(const std::vector<SchemaLinkGraph>& pool,
                           const EncoderParams& params, const RelationVocabulary& vocab);

void save_index(const RetrievalIndex& index, const std::string& path);
RetrievalIndex load_index(const std::string& path);

/// Exact brute-force top-k by dot-product similarity, descending; ties break
/// by sample id ascending.
std::vector<std::pair<std::string, double>> retrieve_top_k(const RetrievalIndex& index,
                                                           const SchemaLinkGraph& user_graph,
                                                           const EncoderParams& params,
                                                           std::size_t k);

}  // namespace dcgsql
