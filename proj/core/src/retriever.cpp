#include "dcgsql/retriever.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <utility>

#include "json.hpp"

namespace dcgsql {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Providers
// ---------------------------------------------------------------------------

FileBackedProvider::FileBackedProvider(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UserError("cannot open usefulness scores '" + path + "'");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw UserError(path + ":" + std::to_string(lineno) + ": malformed JSON: " + e.what());
    }
    scores_[{obj.value("anchor_id", std::string()), obj.value("candidate_id", std::string())}] =
        obj.value("score", 0.0);
  }
}

double FileBackedProvider::score(const Sample& anchor, const Sample& candidate) {
  auto it = scores_.find({anchor.id, candidate.id});
  if (it == scores_.end())
    throw UserError("no usefulness score for anchor '" + anchor.id + "' candidate '" +
                    candidate.id + "'");
  return it->second;
}

void FileBackedProvider::put(const std::string& anchor_id, const std::string& candidate_id,
                             double score) {
  scores_[{anchor_id, candidate_id}] = score;
}

void FileBackedProvider::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UserError("cannot write file '" + path + "'");
  for (const auto& [key, score] : scores_)
    out << json{{"anchor_id", key.first}, {"candidate_id", key.second}, {"score", score}}
               .dump()
        << "\n";
}

// ---------------------------------------------------------------------------
// Candidate scoring
// ---------------------------------------------------------------------------

ScoredCandidateSet score_candidates(const Sample& anchor, const std::vector<Sample>& pool,
                                    UsefulnessProvider& provider, std::size_t m_pos,
                                    std::size_t m_neg) {
  if (!anchor.gold_sql)
    throw UserError("anchor '" + anchor.id + "' has no gold SQL");
  ScoredCandidateSet set;
  set.anchor_id = anchor.id;
  for (const auto& candidate : pool) {
    if (candidate.id == anchor.id) continue;
    double score;
    try {
      score = provider.score(anchor, candidate);
    } catch (const Error& e) {
      throw UserError("usefulness provider failed for candidate '" + candidate.id +
                      "': " + e.what());
    }
    set.ranked.emplace_back(candidate.id, score);
  }
  if (m_pos + m_neg > set.ranked.size())
    throw UserError("pool of " + std::to_string(set.ranked.size() + 1) +
                    " is too small for m_pos=" + std::to_string(m_pos) +
                    " and m_neg=" + std::to_string(m_neg));
  std::sort(set.ranked.begin(), set.ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  for (std::size_t i = 0; i < m_pos; ++i) set.positives.push_back(set.ranked[i].first);
  for (std::size_t i = set.ranked.size() - m_neg; i < set.ranked.size(); ++i)
    set.negatives.push_back(set.ranked[i].first);
  return set;
}

void save_candidate_sets(const std::vector<ScoredCandidateSet>& sets,
                         const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UserError("cannot write file '" + path + "'");
  for (const auto& set : sets) {
    json ranked = json::array();
    for (const auto& [id, score] : set.ranked) ranked.push_back(json::array({id, score}));
    out << json{{"anchor_id", set.anchor_id},
                {"ranked", ranked},
                {"positives", set.positives},
                {"negatives", set.negatives}}
               .dump()
        << "\n";
  }
}

std::vector<ScoredCandidateSet> load_candidate_sets(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UserError("cannot open file '" + path + "'");
  std::vector<ScoredCandidateSet> sets;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json obj = json::parse(line);
    ScoredCandidateSet set;
    set.anchor_id = obj.value("anchor_id", std::string());
    for (const auto& rj : obj.value("ranked", json::array()))
      set.ranked.emplace_back(rj[0].get<std::string>(), rj[1].get<double>());
    set.positives = obj.value("positives", std::vector<std::string>{});
    set.negatives = obj.value("negatives", std::vector<std::string>{});
    sets.push_back(std::move(set));
  }
  return sets;
}

// ---------------------------------------------------------------------------
// Contrastive loss
// ---------------------------------------------------------------------------

ContrastiveResult contrastive_loss(const GraphEmbedding& anchor,
                                   const std::vector<GraphEmbedding>& positives,
                                   const std::vector<GraphEmbedding>& negatives,
                                   double temperature) {
  if (positives.empty() || negatives.empty())
    throw UserError("contrastive loss needs at least one positive and one negative");
  if (temperature <= 0.0) throw UserError("temperature must be positive");
  const std::size_t d = anchor.vector.size();
  const double inv_t = 1.0 / temperature;
  const double inv_p = 1.0 / static_cast<double>(positives.size());

  std::vector<double> z_neg(negatives.size());
  for (std::size_t n = 0; n < negatives.size(); ++n) {
    double s = similarity(anchor, negatives[n]);
    if (!std::isfinite(s)) throw Error("non-finite similarity");
    z_neg[n] = s * inv_t;
  }

  ContrastiveResult result;
  result.d_anchor.assign(d, 0.0);
  result.d_positives.assign(positives.size(), std::vector<double>(d, 0.0));
  result.d_negatives.assign(negatives.size(), std::vector<double>(d, 0.0));

  for (std::size_t p = 0; p < positives.size(); ++p) {
    double s = similarity(anchor, positives[p]);
    if (!std::isfinite(s)) throw Error("non-finite similarity");
    const double z_p = s * inv_t;
    double mx = z_p;
    for (double z : z_neg) mx = std::max(mx, z);
    double denom = std::exp(z_p - mx);
    for (double z : z_neg) denom += std::exp(z - mx);
    const double log_denom = mx + std::log(denom);
    result.loss += inv_p * (log_denom - z_p);

    const double sigma_p = std::exp(z_p - log_denom);
    // d loss / d z_p and d loss / d z_n for this positive's term
    const double dzp = inv_p * (sigma_p - 1.0);
    for (std::size_t c = 0; c < d; ++c) {
      result.d_anchor[c] += dzp * inv_t * positives[p].vector[c];
      result.d_positives[p][c] += dzp * inv_t * anchor.vector[c];
    }
    for (std::size_t n = 0; n < negatives.size(); ++n) {
      const double dzn = inv_p * std::exp(z_neg[n] - log_denom);
      for (std::size_t c = 0; c < d; ++c) {
        result.d_anchor[c] += dzn * inv_t * negatives[n].vector[c];
        result.d_negatives[n][c] += dzn * inv_t * anchor.vector[c];
      }
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

RetrieverTrainResult train_retriever(EncoderParams& params,
                                     const std::vector<SchemaLinkGraph>& graphs,
                                     const std::vector<ScoredCandidateSet>& sets,
                                     const RetrieverTrainConfig& config) {
  std::map<std::string, const SchemaLinkGraph*> by_id;
  for (const auto& g : graphs) by_id[g.sample_id] = &g;
  auto graph_of = [&](const std::string& id) -> const SchemaLinkGraph& {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw UserError("no graph for sample '" + id + "'");
    return *it->second;
  };
  for (const auto& set : sets) {
    graph_of(set.anchor_id);
    for (const auto& id : set.positives) graph_of(id);
    for (const auto& id : set.negatives) graph_of(id);
  }

  RelationVocabulary rel_vocab;
  RetrieverTrainResult result;
  nn::Rng rng(config.seed);
  nn::Adam adam({config.lr});

  auto set_loss = [&](const ScoredCandidateSet& set, EncoderParams* grads) {
    EncodeCache anchor_cache;
    GraphEmbedding anchor = encode(params, graph_of(set.anchor_id), rel_vocab,
                                   grads ? &anchor_cache : nullptr);
    std::vector<GraphEmbedding> pos, neg;
    std::vector<EncodeCache> pos_caches(set.positives.size()),
        neg_caches(set.negatives.size());
    for (std::size_t i = 0; i < set.positives.size(); ++i)
      pos.push_back(encode(params, graph_of(set.positives[i]), rel_vocab,
                           grads ? &pos_caches[i] : nullptr));
    for (std::size_t i = 0; i < set.negatives.size(); ++i)
      neg.push_back(encode(params, graph_of(set.negatives[i]), rel_vocab,
                           grads ? &neg_caches[i] : nullptr));
    ContrastiveResult res = contrastive_loss(anchor, pos, neg, config.temperature);
    if (grads) {
      encode_backward(params, graph_of(set.anchor_id), rel_vocab, anchor_cache,
                      res.d_anchor, *grads);
      for (std::size_t i = 0; i < set.positives.size(); ++i)
        encode_backward(params, graph_of(set.positives[i]), rel_vocab, pos_caches[i],
                        res.d_positives[i], *grads);
      for (std::size_t i = 0; i < set.negatives.size(); ++i)
        encode_backward(params, graph_of(set.negatives[i]), rel_vocab, neg_caches[i],
                        res.d_negatives[i], *grads);
    }
    return res.loss;
  };

  auto mean_loss = [&]() {
    double sum = 0.0;
    for (const auto& set : sets) sum += set_loss(set, nullptr);
    return sum / static_cast<double>(sets.size());
  };

  result.epoch_loss.push_back(mean_loss());  // epoch 0: before any update
  std::vector<std::size_t> order(sets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  long long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch)) {
      ++step;
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch));
      EncoderParams grads = zeros_like_encoder(params);
      double batch_loss = 0.0;
      for (std::size_t i = start; i < end; ++i) batch_loss += set_loss(sets[order[i]], &grads);
      if (!std::isfinite(batch_loss))
        throw Error("non-finite training loss at step " + std::to_string(step));
      const double inv = 1.0 / static_cast<double>(end - start);
      for (nn::Matrix* g : grads.tensors())
        for (double& v : g->data) v *= inv;
      adam.step(params.tensors(), std::as_const(grads).tensors());
    }
    result.epoch_loss.push_back(mean_loss());
  }
  return result;
}

// ---------------------------------------------------------------------------
// Index and retrieval
// ---------------------------------------------------------------------------

RetrievalIndex build_index(const std::vector<SchemaLinkGraph>& pool,
                           const EncoderParams& params, const RelationVocabulary& vocab) {
  RetrievalIndex index;
  index.dim = params.config.d;
  index.fingerprint = encoder_fingerprint(params);
  std::set<std::string> seen;
  for (const auto& g : pool) {
    if (!seen.insert(g.sample_id).second)
      throw UserError("duplicate sample id '" + g.sample_id + "' in pool");
    index.entries.push_back(encode(params, g, vocab));
  }
  return index;
}

void save_index(const RetrievalIndex& index, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UserError("cannot write file '" + path + "'");
  out << json{{"fingerprint", index.fingerprint},
              {"dim", index.dim},
              {"count", index.entries.size()}}
             .dump()
      << "\n";
  for (const auto& e : index.entries)
    out << json{{"sample_id", e.sample_id}, {"vector", e.vector}}.dump() << "\n";
}

RetrievalIndex load_index(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UserError("cannot open file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw UserError("index file '" + path + "' is empty");
  json header = json::parse(line);
  RetrievalIndex index;
  index.fingerprint = header.value("fingerprint", std::string());
  index.dim = header.value("dim", 0);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json obj = json::parse(line);
    GraphEmbedding e;
    e.sample_id = obj.value("sample_id", std::string());
    e.vector = obj.value("vector", std::vector<double>{});
    if (static_cast<int>(e.vector.size()) != index.dim)
      throw UserError("index entry '" + e.sample_id + "' has wrong dimension");
    index.entries.push_back(std::move(e));
  }
  return index;
}

std::vector<std::pair<std::string, double>> retrieve_top_k(const RetrievalIndex& index,
                                                           const SchemaLinkGraph& user_graph,
                                                           const EncoderParams& params,
                                                           std::size_t k) {
  if (k < 1 || k > index.entries.size())
    throw UserError("k=" + std::to_string(k) + " is out of range for an index of " +
                    std::to_string(index.entries.size()));
  const std::string fp = encoder_fingerprint(params);
  if (fp != index.fingerprint)
    throw UserError("encoder fingerprint " + fp + " does not match index fingerprint " +
                    index.fingerprint);
  RelationVocabulary vocab;
  GraphEmbedding query = encode(params, user_graph, vocab);
  std::vector<std::pair<std::string, double>> scored;
  scored.reserve(index.entries.size());
  for (const auto& e : index.entries) scored.emplace_back(e.sample_id, similarity(query, e));
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  scored.resize(k);
  return scored;
}

}  // namespace dcgsql
