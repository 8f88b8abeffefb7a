#include "dcgsql/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "checkpoint_io.hpp"
#include "json.hpp"

namespace dcgsql {

using nlohmann::json;

namespace {

/// Priority for multi-edge node pairs; lower wins.
int type_priority(EdgeType t) {
  switch (t) {
    case EdgeType::SelfLoop: return 0;
    case EdgeType::AttentionMatchTable:
    case EdgeType::AttentionMatchTableInv:
    case EdgeType::AttentionMatchColumn:
    case EdgeType::AttentionMatchColumnInv: return 1;
    case EdgeType::ExactNameMatch:
    case EdgeType::ExactNameMatchInv: return 2;
    case EdgeType::ValueMatch:
    case EdgeType::ValueMatchInv: return 3;
    case EdgeType::PartialNameMatch:
    case EdgeType::PartialNameMatchInv: return 4;
    case EdgeType::ForeignKey:
    case EdgeType::ForeignKeyInv: return 5;
    case EdgeType::PrimaryKey:
    case EdgeType::PrimaryKeyInv: return 6;
    case EdgeType::ColumnOfTable:
    case EdgeType::ColumnOfTableInv: return 7;
    case EdgeType::SameTable:
    case EdgeType::SameTableInv: return 8;
    case EdgeType::QuestionDistMinus2:
    case EdgeType::QuestionDistMinus1:
    case EdgeType::QuestionDistPlus1:
    case EdgeType::QuestionDistPlus2: return 9;
    case EdgeType::NoRelation: return 100;
  }
  return 100;
}

}  // namespace

RelationMatrix relation_matrix(const SchemaLinkGraph& g, const RelationVocabulary& vocab) {
  const int n = static_cast<int>(g.nodes.size());
  RelationMatrix rel(n, std::vector<int>(n, vocab.no_relation_id()));
  for (const Edge& e : g.edges) {
    if (e.src < 0 || e.src >= n || e.dst < 0 || e.dst >= n)
      throw Error("edge endpoint outside node range");
    int& cell = rel[e.src][e.dst];
    EdgeType current = static_cast<EdgeType>(cell);
    if (cell == vocab.no_relation_id() || type_priority(e.type) < type_priority(current) ||
        (type_priority(e.type) == type_priority(current) &&
         vocab.id(e.type) < vocab.id(current)))
      cell = vocab.id(e.type);
  }
  for (int i = 0; i < n; ++i) rel[i][i] = vocab.self_loop_id();
  return rel;
}

void RelationLayerParams::init(int d, int dff, int relations, int dk, nn::Rng& rng) {
  wq = nn::Matrix(d, d);
  wk = nn::Matrix(d, d);
  wv = nn::Matrix(d, d);
  wo = nn::Matrix(d, d);
  w1 = nn::Matrix(d, dff);
  b1 = nn::Matrix(1, dff);
  w2 = nn::Matrix(dff, d);
  b2 = nn::Matrix(1, d);
  ln1_g = nn::Matrix(1, d);
  ln1_b = nn::Matrix(1, d);
  ln2_g = nn::Matrix(1, d);
  ln2_b = nn::Matrix(1, d);
  rng.fill_uniform(wq, -0.05, 0.05);
  rng.fill_uniform(wk, -0.05, 0.05);
  rng.fill_uniform(wv, -0.05, 0.05);
  rng.fill_uniform(wo, -0.05, 0.05);
  rng.fill_uniform(w1, -0.05, 0.05);
  rng.fill_uniform(w2, -0.05, 0.05);
  std::fill(ln1_g.data.begin(), ln1_g.data.end(), 1.0);
  std::fill(ln2_g.data.begin(), ln2_g.data.end(), 1.0);
  rel_k = nn::Matrix(relations, dk);
  rel_v = nn::Matrix(relations, dk);
  rng.fill_uniform(rel_k, -0.05, 0.05);
  rng.fill_uniform(rel_v, -0.05, 0.05);
}

std::vector<nn::Matrix*> RelationLayerParams::tensors() {
  return {&wq, &wk, &wv, &wo, &w1, &b1, &w2, &b2,
          &ln1_g, &ln1_b, &ln2_g, &ln2_b, &rel_k, &rel_v};
}

std::vector<const nn::Matrix*> RelationLayerParams::tensors() const {
  return {&wq, &wk, &wv, &wo, &w1, &b1, &w2, &b2,
          &ln1_g, &ln1_b, &ln2_g, &ln2_b, &rel_k, &rel_v};
}

EncoderParams EncoderParams::init(const EncoderConfig& config, Vocab vocab,
                                  std::uint64_t seed) {
  if (config.d % config.heads != 0) throw Error("encoder dim not divisible by head count");
  EncoderParams p;
  p.config = config;
  p.seed = seed;
  p.vocab = std::move(vocab);
  nn::Rng rng(seed);
  p.kind_embeddings = nn::Matrix(3, config.d);
  p.word_embeddings = nn::Matrix(static_cast<int>(p.vocab.size()), config.d);
  rng.fill_uniform(p.kind_embeddings, -0.05, 0.05);
  rng.fill_uniform(p.word_embeddings, -0.05, 0.05);
  const int dk = config.d / config.heads;
  p.layers.resize(config.layers);
  RelationVocabulary rv;
  for (auto& layer : p.layers) layer.init(config.d, config.d_ff, rv.size(), dk, rng);
  return p;
}

std::vector<nn::Matrix*> EncoderParams::tensors() {
  std::vector<nn::Matrix*> out = {&kind_embeddings, &word_embeddings};
  for (auto& layer : layers)
    for (nn::Matrix* t : layer.tensors()) out.push_back(t);
  return out;
}

std::vector<const nn::Matrix*> EncoderParams::tensors() const {
  std::vector<const nn::Matrix*> out = {&kind_embeddings, &word_embeddings};
  for (const auto& layer : layers)
    for (const nn::Matrix* t : layer.tensors()) out.push_back(t);
  return out;
}

Vocab build_encoder_vocab(const std::vector<SchemaLinkGraph>& graphs) {
  std::set<std::string> words;
  for (const auto& g : graphs) {
    for (const auto& node : g.nodes) {
      switch (node.kind) {
        case GraphNode::Kind::Token: words.insert(node.surface); break;
        case GraphNode::Kind::Table:
          for (const auto& w : split_name_words(node.table)) words.insert(w);
          break;
        case GraphNode::Kind::Column:
          for (const auto& w : split_name_words(node.column)) words.insert(w);
          break;
      }
    }
  }
  return Vocab::build(words);
}

double similarity(const GraphEmbedding& a, const GraphEmbedding& b) {
  if (a.vector.size() != b.vector.size())
    throw Error("embedding dimension mismatch: " + std::to_string(a.vector.size()) +
                " vs " + std::to_string(b.vector.size()));
  double sum = 0.0;
  for (std::size_t i = 0; i < a.vector.size(); ++i) sum += a.vector[i] * b.vector[i];
  return sum;
}

// ---------------------------------------------------------------------------
// Relation-aware attention
// ---------------------------------------------------------------------------

nn::Matrix relation_aware_attention(const RelationLayerParams& p, int heads,
                                    const nn::Matrix& states, const RelationMatrix& rel,
                                    RelationLayerCache* cache) {
  const int n = states.rows;
  const int d = states.cols;
  const int dk = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  nn::Matrix q = nn::matmul(states, p.wq);
  nn::Matrix k = nn::matmul(states, p.wk);
  nn::Matrix v = nn::matmul(states, p.wv);

  nn::Matrix concat(n, d);
  std::vector<nn::Matrix> attn(heads);
  for (int h = 0; h < heads; ++h) {
    nn::Matrix scores(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double* rk = p.rel_k.row(rel[i][j]);
        double sum = 0.0;
        for (int c = 0; c < dk; ++c)
          sum += q.at(i, h * dk + c) * (k.at(j, h * dk + c) + rk[c]);
        scores.at(i, j) = sum * scale;
      }
    }
    attn[h] = nn::softmax_rows(scores);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double a = attn[h].at(i, j);
        if (a == 0.0) continue;
        const double* rv = p.rel_v.row(rel[i][j]);
        for (int c = 0; c < dk; ++c)
          concat.at(i, h * dk + c) += a * (v.at(j, h * dk + c) + rv[c]);
      }
    }
  }

  nn::Matrix attn_out = nn::matmul(concat, p.wo);
  nn::Matrix res1 = states;
  nn::add_inplace(res1, attn_out);
  nn::LayerNormCache ln1_cache;
  nn::Matrix y1 = nn::layer_norm(res1, p.ln1_g, p.ln1_b, &ln1_cache);

  nn::Matrix ff_pre = nn::matmul(y1, p.w1);
  for (int i = 0; i < ff_pre.rows; ++i)
    for (int j = 0; j < ff_pre.cols; ++j) ff_pre.at(i, j) += p.b1.at(0, j);
  nn::Matrix ff_act = ff_pre;
  for (double& x : ff_act.data) x = std::max(0.0, x);
  nn::Matrix ff_out = nn::matmul(ff_act, p.w2);
  for (int i = 0; i < ff_out.rows; ++i)
    for (int j = 0; j < ff_out.cols; ++j) ff_out.at(i, j) += p.b2.at(0, j);
  nn::Matrix res2 = y1;
  nn::add_inplace(res2, ff_out);
  nn::LayerNormCache ln2_cache;
  nn::Matrix y2 = nn::layer_norm(res2, p.ln2_g, p.ln2_b, &ln2_cache);

  for (const double x : y2.data)
    if (!std::isfinite(x)) throw Error("non-finite value in relation-aware attention");

  if (cache) {
    cache->input = states;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->attn = std::move(attn);
    cache->concat = std::move(concat);
    cache->res1 = std::move(res1);
    cache->y1 = y1;
    cache->ff_pre = std::move(ff_pre);
    cache->ff_act = std::move(ff_act);
    cache->res2 = std::move(res2);
    cache->ln1 = std::move(ln1_cache);
    cache->ln2 = std::move(ln2_cache);
    cache->rel = rel;
  }
  return y2;
}

nn::Matrix relation_aware_attention_backward(const RelationLayerParams& p, int heads,
                                             const RelationLayerCache& cache,
                                             const nn::Matrix& d_out,
                                             RelationLayerParams& grads) {
  const nn::Matrix& x = cache.input;
  const RelationMatrix& rel = cache.rel;
  const int n = x.rows;
  const int d = x.cols;
  const int dk = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  nn::Matrix d_res2 =
      nn::layer_norm_backward(d_out, p.ln2_g, cache.ln2, grads.ln2_g, grads.ln2_b);
  nn::Matrix d_y1 = d_res2;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) grads.b2.at(0, j) += d_res2.at(i, j);
  nn::add_inplace(grads.w2, nn::matmul_tn(cache.ff_act, d_res2));
  nn::Matrix d_ff_pre = nn::matmul_nt(d_res2, p.w2);
  for (std::size_t i = 0; i < d_ff_pre.data.size(); ++i)
    if (cache.ff_pre.data[i] <= 0.0) d_ff_pre.data[i] = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d_ff_pre.cols; ++j) grads.b1.at(0, j) += d_ff_pre.at(i, j);
  nn::add_inplace(grads.w1, nn::matmul_tn(cache.y1, d_ff_pre));
  nn::add_inplace(d_y1, nn::matmul_nt(d_ff_pre, p.w1));

  nn::Matrix d_res1 =
      nn::layer_norm_backward(d_y1, p.ln1_g, cache.ln1, grads.ln1_g, grads.ln1_b);
  nn::Matrix dx = d_res1;
  nn::add_inplace(grads.wo, nn::matmul_tn(cache.concat, d_res1));
  nn::Matrix d_concat = nn::matmul_nt(d_res1, p.wo);

  nn::Matrix dq(n, d), dkm(n, d), dv(n, d);
  for (int h = 0; h < heads; ++h) {
    const nn::Matrix& a = cache.attn[h];
    nn::Matrix da(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double* rv = p.rel_v.row(rel[i][j]);
        double sum = 0.0;
        for (int c = 0; c < dk; ++c)
          sum += d_concat.at(i, h * dk + c) * (cache.v.at(j, h * dk + c) + rv[c]);
        da.at(i, j) = sum;
        const double av = a.at(i, j);
        if (av != 0.0) {
          double* drv = grads.rel_v.row(rel[i][j]);
          for (int c = 0; c < dk; ++c) {
            const double g = av * d_concat.at(i, h * dk + c);
            dv.at(j, h * dk + c) += g;
            drv[c] += g;
          }
        }
      }
    }
    nn::Matrix ds(n, n);
    for (int i = 0; i < n; ++i) {
      double dot = 0.0;
      for (int j = 0; j < n; ++j) dot += a.at(i, j) * da.at(i, j);
      for (int j = 0; j < n; ++j) ds.at(i, j) = a.at(i, j) * (da.at(i, j) - dot);
    }
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double g = ds.at(i, j) * scale;
        if (g == 0.0) continue;
        const double* rk = p.rel_k.row(rel[i][j]);
        double* drk = grads.rel_k.row(rel[i][j]);
        for (int c = 0; c < dk; ++c) {
          dq.at(i, h * dk + c) += g * (cache.k.at(j, h * dk + c) + rk[c]);
          const double gq = g * cache.q.at(i, h * dk + c);
          dkm.at(j, h * dk + c) += gq;
          drk[c] += gq;
        }
      }
    }
  }

  nn::add_inplace(grads.wq, nn::matmul_tn(x, dq));
  nn::add_inplace(grads.wk, nn::matmul_tn(x, dkm));
  nn::add_inplace(grads.wv, nn::matmul_tn(x, dv));
  nn::add_inplace(dx, nn::matmul_nt(dq, p.wq));
  nn::add_inplace(dx, nn::matmul_nt(dkm, p.wk));
  nn::add_inplace(dx, nn::matmul_nt(dv, p.wv));
  return dx;
}

// ---------------------------------------------------------------------------
// Graph encoding
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> node_words(const GraphNode& node) {
  switch (node.kind) {
    case GraphNode::Kind::Token: return {node.surface};
    case GraphNode::Kind::Table: return split_name_words(node.table);
    case GraphNode::Kind::Column: return split_name_words(node.column);
  }
  return {};
}

int node_kind_row(const GraphNode& node) {
  switch (node.kind) {
    case GraphNode::Kind::Token: return 0;
    case GraphNode::Kind::Table: return 1;
    case GraphNode::Kind::Column: return 2;
  }
  return 0;
}

nn::Matrix initial_states(const EncoderParams& params, const SchemaLinkGraph& g) {
  const int n = static_cast<int>(g.nodes.size());
  const int d = params.config.d;
  nn::Matrix states(n, d);
  for (int i = 0; i < n; ++i) {
    const GraphNode& node = g.nodes[i];
    const double* kind = params.kind_embeddings.row(node_kind_row(node));
    for (int c = 0; c < d; ++c) states.at(i, c) = kind[c];
    auto words = node_words(node);
    if (words.empty()) words.push_back("<unk>");
    const double inv = 1.0 / static_cast<double>(words.size());
    for (const auto& w : words) {
      const double* emb = params.word_embeddings.row(params.vocab.id(w));
      for (int c = 0; c < d; ++c) states.at(i, c) += inv * emb[c];
    }
  }
  return states;
}

}  // namespace

GraphEmbedding encode(const EncoderParams& params, const SchemaLinkGraph& g,
                      const RelationVocabulary& vocab, EncodeCache* cache) {
  if (g.nodes.empty()) throw UserError("cannot encode an empty graph");
  nn::Matrix states = initial_states(params, g);
  RelationMatrix rel = relation_matrix(g, vocab);

  EncodeCache local;
  EncodeCache& c = cache ? *cache : local;
  c.states0 = states;
  c.rel = rel;
  c.layer_caches.resize(params.layers.size());
  nn::Matrix current = states;
  for (std::size_t l = 0; l < params.layers.size(); ++l)
    current = relation_aware_attention(params.layers[l], params.config.heads, current, rel,
                                       &c.layer_caches[l]);
  c.final_states = current;

  GraphEmbedding emb;
  emb.sample_id = g.sample_id;
  emb.vector.assign(params.config.d, 0.0);
  const double inv = 1.0 / static_cast<double>(current.rows);
  for (int i = 0; i < current.rows; ++i)
    for (int j = 0; j < current.cols; ++j) emb.vector[j] += inv * current.at(i, j);
  return emb;
}

void encode_backward(const EncoderParams& params, const SchemaLinkGraph& g,
                     const RelationVocabulary& /*vocab*/, const EncodeCache& cache,
                     const std::vector<double>& d_embedding, EncoderParams& grads) {
  const int n = cache.final_states.rows;
  const int d = params.config.d;
  if (static_cast<int>(d_embedding.size()) != d)
    throw Error("embedding gradient dimension mismatch");

  nn::Matrix current(n, d);
  const double inv = 1.0 / static_cast<double>(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) current.at(i, j) = inv * d_embedding[j];

  for (std::size_t l = params.layers.size(); l-- > 0;)
    current = relation_aware_attention_backward(params.layers[l], params.config.heads,
                                                cache.layer_caches[l], current,
                                                grads.layers[l]);

  for (int i = 0; i < n; ++i) {
    const GraphNode& node = g.nodes[i];
    double* kind = grads.kind_embeddings.row(node_kind_row(node));
    for (int c = 0; c < d; ++c) kind[c] += current.at(i, c);
    auto words = node_words(node);
    if (words.empty()) words.push_back("<unk>");
    const double winv = 1.0 / static_cast<double>(words.size());
    for (const auto& w : words) {
      double* emb = grads.word_embeddings.row(params.vocab.id(w));
      for (int c = 0; c < d; ++c) emb[c] += winv * current.at(i, c);
    }
  }
}

EncoderParams zeros_like_encoder(const EncoderParams& p) {
  EncoderParams z;
  z.config = p.config;
  z.seed = p.seed;
  z.vocab = p.vocab;
  z.kind_embeddings = nn::Matrix(p.kind_embeddings.rows, p.kind_embeddings.cols);
  z.word_embeddings = nn::Matrix(p.word_embeddings.rows, p.word_embeddings.cols);
  z.layers.resize(p.layers.size());
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    const auto& src = p.layers[i];
    auto& dst = z.layers[i];
    auto src_tensors = src.tensors();
    auto dst_tensors = dst.tensors();
    for (std::size_t t = 0; t < src_tensors.size(); ++t)
      *dst_tensors[t] = nn::Matrix(src_tensors[t]->rows, src_tensors[t]->cols);
  }
  return z;
}

GraphEmbedding encode_plain(const EncoderParams& params, const SchemaLinkGraph& g) {
  nn::Matrix current = initial_states(params, g);
  for (const auto& layer : params.layers) {
    nn::TransformerLayerParams plain;
    plain.wq = layer.wq;
    plain.wk = layer.wk;
    plain.wv = layer.wv;
    plain.wo = layer.wo;
    plain.w1 = layer.w1;
    plain.b1 = layer.b1;
    plain.w2 = layer.w2;
    plain.b2 = layer.b2;
    plain.ln1_g = layer.ln1_g;
    plain.ln1_b = layer.ln1_b;
    plain.ln2_g = layer.ln2_g;
    plain.ln2_b = layer.ln2_b;
    current = nn::transformer_layer_forward(plain, params.config.heads, current, nullptr);
  }
  GraphEmbedding emb;
  emb.sample_id = g.sample_id;
  emb.vector.assign(params.config.d, 0.0);
  const double inv = 1.0 / static_cast<double>(current.rows);
  for (int i = 0; i < current.rows; ++i)
    for (int j = 0; j < current.cols; ++j) emb.vector[j] += inv * current.at(i, j);
  return emb;
}

// ---------------------------------------------------------------------------
// Checkpoints and embedding files
// ---------------------------------------------------------------------------

namespace {

json encoder_header(const EncoderParams& params) {
  return json{{"kind", "encoder"},
              {"d", params.config.d},
              {"layers", params.config.layers},
              {"heads", params.config.heads},
              {"d_ff", params.config.d_ff},
              {"relations", RelationVocabulary{}.size()},
              {"seed", params.seed},
              {"vocab", params.vocab.words}};
}

}  // namespace

void save_encoder_checkpoint(const EncoderParams& params, const std::string& path) {
  detail::write_checkpoint(path, encoder_header(params), params.tensors());
}

EncoderParams load_encoder_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UserError("cannot open checkpoint '" + path + "'");
  json header = detail::read_checkpoint_header(in, path);
  if (header.value("kind", std::string()) != "encoder")
    throw UserError("checkpoint '" + path + "' is not an encoder checkpoint");
  EncoderConfig config;
  config.d = header.value("d", 64);
  config.layers = header.value("layers", 2);
  config.heads = header.value("heads", 4);
  config.d_ff = header.value("d_ff", 256);
  Vocab vocab;
  vocab.words = header.value("vocab", std::vector<std::string>{});
  for (std::size_t i = 0; i < vocab.words.size(); ++i)
    vocab.index[vocab.words[i]] = static_cast<int>(i);
  EncoderParams params =
      EncoderParams::init(config, std::move(vocab), header.value("seed", 0ull));
  detail::read_tensors(in, path, params.tensors());
  return params;
}

std::string encoder_fingerprint(const EncoderParams& params) {
  return detail::bytes_fingerprint(
      detail::checkpoint_bytes(encoder_header(params), params.tensors()));
}

void save_embeddings(const std::vector<GraphEmbedding>& embeddings,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UserError("cannot write file '" + path + "'");
  for (const auto& e : embeddings)
    out << json{{"sample_id", e.sample_id}, {"vector", e.vector}}.dump() << "\n";
}

std::vector<GraphEmbedding> load_embeddings(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UserError("cannot open file '" + path + "'");
  std::vector<GraphEmbedding> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json obj = json::parse(line);
    GraphEmbedding e;
    e.sample_id = obj.value("sample_id", std::string());
    e.vector = obj.value("vector", std::vector<double>{});
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace dcgsql
