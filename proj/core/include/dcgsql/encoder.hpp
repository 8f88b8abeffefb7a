#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dcgsql/linker.hpp"
#include "dcgsql/nn.hpp"
#include "dcgsql/pruner.hpp"

namespace dcgsql {

/// Stable bijection EdgeType -> relation id. Ids follow the enum order, so
/// the mapping is identical across runs.
struct RelationVocabulary {
  int id(EdgeType t) const { return static_cast<int>(t); }
  int no_relation_id() const { return static_cast<int>(EdgeType::NoRelation); }
  int self_loop_id() const { return static_cast<int>(EdgeType::SelfLoop); }
  int size() const { return kEdgeTypeCount; }
};

/// N x N matrix of relation ids; (i,j) holds the highest-priority edge type
/// from i to j, NoRelation when absent, SelfLoop on the diagonal.
using RelationMatrix = std::vector<std::vector<int>>;

RelationMatrix relation_matrix(const SchemaLinkGraph& g, const RelationVocabulary& vocab);

struct EncoderConfig {
  int d = 64;
  int layers = 2;
  int heads = 4;
  int d_ff = 256;
};

struct RelationLayerParams {
  nn::Matrix wq, wk, wv, wo;
  nn::Matrix w1, b1, w2, b2;
  nn::Matrix ln1_g, ln1_b, ln2_g, ln2_b;
  nn::Matrix rel_k, rel_v;  // relations x (d/heads), shared across heads

  void init(int d, int dff, int relations, int dk, nn::Rng& rng);
  std::vector<nn::Matrix*> tensors();
  std::vector<const nn::Matrix*> tensors() const;
};

struct EncoderParams {
  EncoderConfig config;
  std::uint64_t seed = 0;
  Vocab vocab;               // lexical words of token surfaces and item names
  nn::Matrix kind_embeddings;  // 3 x d (token, table, column)
  nn::Matrix word_embeddings;  // vocab x d
  std::vector<RelationLayerParams> layers;

  static EncoderParams init(const EncoderConfig& config, Vocab vocab, std::uint64_t seed);
  std::vector<nn::Matrix*> tensors();
  std::vector<const nn::Matrix*> tensors() const;
};

Vocab build_encoder_vocab(const std::vector<SchemaLinkGraph>& graphs);

struct GraphEmbedding {
  std::string sample_id;
  std::vector<double> vector;
};

double similarity(const GraphEmbedding& a, const GraphEmbedding& b);

struct RelationLayerCache {
  nn::Matrix input, q, k, v;
  std::vector<nn::Matrix> attn;
  nn::Matrix concat, res1, y1, ff_pre, ff_act, res2;
  nn::LayerNormCache ln1, ln2;
  RelationMatrix rel;
};

struct EncodeCache {
  nn::Matrix states0;
  RelationMatrix rel;
  std::vector<RelationLayerCache> layer_caches;
  nn::Matrix final_states;
};

/// Relation-aware attention score: q_i . (k_j + rK[rel(i,j)]) / sqrt(d/H);
/// output mixes (v_j + rV[rel(i,j)]) by the attention weights, then the usual
/// projection, residual + layer norm, and feed-forward block.
nn::Matrix relation_aware_attention(const RelationLayerParams& p, int heads,
                                    const nn::Matrix& states, const RelationMatrix& rel,
                                    RelationLayerCache* cache = nullptr);
nn::Matrix relation_aware_attention_backward(const RelationLayerParams& p, int heads,
                                             const RelationLayerCache& cache,
                                             const nn::Matrix& d_out,
                                             RelationLayerParams& grads);

GraphEmbedding encode(const EncoderParams& params, const SchemaLinkGraph& g,
                      const RelationVocabulary& vocab, EncodeCache* cache = nullptr);

/// Gradients of a scalar loss w.r.t. every parameter, given the loss gradient
/// w.r.t. the graph embedding. Accumulates into `grads`.
void encode_backward(const EncoderParams& params, const SchemaLinkGraph& g,
                     const RelationVocabulary& vocab, const EncodeCache& cache,
                     const std::vector<double>& d_embedding, EncoderParams& grads);

EncoderParams zeros_like_encoder(const EncoderParams& p);

/// Plain (relation-free) transformer encoding of the same node sequence;
/// reference path for the zero-relation reduction check.
GraphEmbedding encode_plain(const EncoderParams& params, const SchemaLinkGraph& g);

void save_encoder_checkpoint(const EncoderParams& params, const std::string& path);
EncoderParams load_encoder_checkpoint(const std::string& path);
/// Fingerprint of the checkpoint serialization of `params`.
std::string encoder_fingerprint(const EncoderParams& params);

void save_embeddings(const std::vector<GraphEmbedding>& embeddings, const std::string& path);
std::vector<GraphEmbedding> load_embeddings(const std::string& path);

}  // namespace dcgsql
