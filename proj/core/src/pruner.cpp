#include "dcgsql/pruner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <utility>

#include "checkpoint_io.hpp"
#include "dcgsql/sqlkit.hpp"
#include "json.hpp"

namespace dcgsql {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Input sequence
// ---------------------------------------------------------------------------

PrunerInput build_input_sequence(const TokenSeq& tokens, const DatabaseSchema& db) {
  PrunerInput input;
  input.question_len = tokens.size();
  for (const auto& tok : tokens.tokens) {
    PrunerUnit u;
    u.kind = PrunerUnit::Kind::QuestionToken;
    u.token_index = tok.index;
    u.word = tok.surface;
    input.units.push_back(std::move(u));
  }
  for (const auto& table : db.tables) {
    PrunerUnit tab;
    tab.kind = PrunerUnit::Kind::TabMarker;
    tab.table = table.name;
    input.units.push_back(std::move(tab));
    for (const auto& w : split_name_words(table.name)) {
      PrunerUnit word;
      word.kind = PrunerUnit::Kind::NameWord;
      word.table = table.name;
      word.word = w;
      input.units.push_back(std::move(word));
    }
    for (const auto& column : table.columns) {
      PrunerUnit col;
      col.kind = PrunerUnit::Kind::ColMarker;
      col.table = table.name;
      col.column = column.name;
      input.units.push_back(std::move(col));
      for (const auto& w : split_name_words(column.name)) {
        PrunerUnit word;
        word.kind = PrunerUnit::Kind::NameWord;
        word.table = table.name;
        word.column = column.name;
        word.word = w;
        input.units.push_back(std::move(word));
      }
    }
  }
  return input;
}

// ---------------------------------------------------------------------------
// Labels from gold SQL
// ---------------------------------------------------------------------------

namespace {

void collect_refs(const Query& q, const DatabaseSchema& db, RelevanceLabels& out);

void collect_val(const ValUnit& val, const DatabaseSchema& db, RelevanceLabels& out) {
  auto add = [&](const Operand& op) {
    if (op.kind != Operand::Kind::Column) return;
    const ColumnRef& col = op.col;
    if (col.is_star() || col.table.empty()) return;
    if (db.has_column(col.table, col.column))
      out.positive_columns.emplace(col.table, col.column);
  };
  add(val.first);
  if (val.arith != ArithOp::None) add(val.second);
}

void collect_chain(const std::optional<ConditionChain>& chain, const DatabaseSchema& db,
                   RelevanceLabels& out) {
  if (!chain) return;
  for (const auto& cond : chain->conds) {
    if (cond.kind != Condition::Kind::Exists) collect_val(cond.lhs, db, out);
    if (cond.rhs_val) collect_val(*cond.rhs_val, db, out);
    if (cond.rhs_query) collect_refs(*cond.rhs_query, db, out);
  }
}

void collect_core(const SelectCore& core, const DatabaseSchema& db, RelevanceLabels& out) {
  for (const auto& src : core.from) {
    if (!src.table.empty() && db.find_table(src.table))
      out.positive_tables.insert(src.table);
    if (src.subquery) collect_refs(*src.subquery, db, out);
  }
  for (const auto& item : core.items) collect_val(item, db, out);
  for (const auto& join : core.joins) collect_chain(join.on, db, out);
  collect_chain(core.where, db, out);
  for (const auto& col : core.group_by) collect_val(col, db, out);
  collect_chain(core.having, db, out);
  for (const auto& item : core.order_by) collect_val(item.val, db, out);
}

void collect_refs(const Query& q, const DatabaseSchema& db, RelevanceLabels& out) {
  collect_core(q.core, db, out);
  for (const auto& [op, core] : q.compound) collect_core(core, db, out);
}

}  // namespace

RelevanceLabels derive_relevance_labels(const std::string& gold_sql,
                                        const DatabaseSchema& db) {
  SqlAst ast = parse_sql(gold_sql, &db);
  RelevanceLabels labels;
  collect_refs(ast.query, db, labels);
  return labels;
}

// ---------------------------------------------------------------------------
// Vocabulary and parameters
// ---------------------------------------------------------------------------

Vocab Vocab::build(const std::set<std::string>& words) {
  Vocab v;
  v.words.push_back("<unk>");
  v.index["<unk>"] = 0;
  for (const auto& w : words) {
    if (v.index.count(w)) continue;
    v.index[w] = static_cast<int>(v.words.size());
    v.words.push_back(w);
  }
  return v;
}

int Vocab::id(const std::string& word) const {
  auto it = index.find(word);
  return it == index.end() ? 0 : it->second;
}

Vocab build_pruner_vocab(const std::vector<Sample>& samples, const SchemaCatalog& catalog) {
  std::set<std::string> words;
  std::set<std::string> dbs;
  for (const auto& s : samples) {
    dbs.insert(s.db_id);
    for (const auto& tok : tokenize_question(s.question).tokens) words.insert(tok.surface);
  }
  for (const auto& db_id : dbs) {
    const DatabaseSchema& db = catalog.at(db_id);
    for (const auto& t : db.tables) {
      for (const auto& w : split_name_words(t.name)) words.insert(w);
      for (const auto& c : t.columns)
        for (const auto& w : split_name_words(c.name)) words.insert(w);
    }
  }
  return Vocab::build(words);
}

CrossEncoderParams CrossEncoderParams::init(const CrossEncoderConfig& config, Vocab vocab,
                                            std::uint64_t seed) {
  CrossEncoderParams p;
  p.config = config;
  p.seed = seed;
  p.vocab = std::move(vocab);
  nn::Rng rng(seed);
  p.embeddings = nn::Matrix(static_cast<int>(p.vocab.size()), config.d);
  p.positional = nn::Matrix(config.max_seq, config.d);
  rng.fill_uniform(p.embeddings, -0.05, 0.05);
  rng.fill_uniform(p.positional, -0.05, 0.05);
  p.layers.resize(config.layers);
  for (auto& layer : p.layers) layer.init(config.d, config.d_ff, rng);
  // Heads start at zero so an untrained model scores every item at 0.5.
  p.table_head_w = nn::Matrix(1, config.d);
  p.table_head_b = nn::Matrix(1, 1);
  p.column_head_w = nn::Matrix(1, config.d);
  p.column_head_b = nn::Matrix(1, 1);
  return p;
}

std::vector<nn::Matrix*> CrossEncoderParams::tensors() {
  std::vector<nn::Matrix*> out = {&embeddings, &positional};
  for (auto& layer : layers)
    for (nn::Matrix* t : layer.tensors()) out.push_back(t);
  out.push_back(&table_head_w);
  out.push_back(&table_head_b);
  out.push_back(&column_head_w);
  out.push_back(&column_head_b);
  return out;
}

std::vector<const nn::Matrix*> CrossEncoderParams::tensors() const {
  std::vector<const nn::Matrix*> out = {&embeddings, &positional};
  for (const auto& layer : layers)
    for (const nn::Matrix* t : layer.tensors()) out.push_back(t);
  out.push_back(&table_head_w);
  out.push_back(&table_head_b);
  out.push_back(&column_head_w);
  out.push_back(&column_head_b);
  return out;
}

namespace {

CrossEncoderParams zeros_like(const CrossEncoderParams& p) {
  CrossEncoderParams z;
  z.config = p.config;
  z.seed = p.seed;
  z.vocab = p.vocab;
  z.embeddings = nn::Matrix(p.embeddings.rows, p.embeddings.cols);
  z.positional = nn::Matrix(p.positional.rows, p.positional.cols);
  z.layers.resize(p.layers.size());
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    const auto& src = p.layers[i];
    auto& dst = z.layers[i];
    dst.wq = nn::Matrix(src.wq.rows, src.wq.cols);
    dst.wk = nn::Matrix(src.wk.rows, src.wk.cols);
    dst.wv = nn::Matrix(src.wv.rows, src.wv.cols);
    dst.wo = nn::Matrix(src.wo.rows, src.wo.cols);
    dst.w1 = nn::Matrix(src.w1.rows, src.w1.cols);
    dst.b1 = nn::Matrix(src.b1.rows, src.b1.cols);
    dst.w2 = nn::Matrix(src.w2.rows, src.w2.cols);
    dst.b2 = nn::Matrix(src.b2.rows, src.b2.cols);
    dst.ln1_g = nn::Matrix(src.ln1_g.rows, src.ln1_g.cols);
    dst.ln1_b = nn::Matrix(src.ln1_b.rows, src.ln1_b.cols);
    dst.ln2_g = nn::Matrix(src.ln2_g.rows, src.ln2_g.cols);
    dst.ln2_b = nn::Matrix(src.ln2_b.rows, src.ln2_b.cols);
  }
  z.table_head_w = nn::Matrix(1, p.config.d);
  z.table_head_b = nn::Matrix(1, 1);
  z.column_head_w = nn::Matrix(1, p.config.d);
  z.column_head_b = nn::Matrix(1, 1);
  return z;
}

std::vector<std::string> marker_name_words(const PrunerInput& input, std::size_t pos) {
  const PrunerUnit& u = input.units[pos];
  if (u.kind == PrunerUnit::Kind::TabMarker) return split_name_words(u.table);
  return split_name_words(u.column);
}

struct ForwardCache {
  nn::Matrix states0;
  std::vector<nn::TransformerLayerCache> layer_caches;
  nn::Matrix final_states;
  std::vector<std::size_t> marker_positions;
  std::vector<bool> marker_is_table;
  std::vector<double> logits;
};

void forward(const CrossEncoderParams& params, const PrunerInput& input, ForwardCache& cache) {
  const int n = static_cast<int>(input.units.size());
  if (n == 0) throw UserError("empty input sequence");
  if (n > params.config.max_seq)
    throw UserError("input sequence of " + std::to_string(n) +
                    " units exceeds the maximum of " +
                    std::to_string(params.config.max_seq));
  const int d = params.config.d;

  nn::Matrix states(n, d);
  for (int i = 0; i < n; ++i) {
    const PrunerUnit& u = input.units[i];
    if (u.kind == PrunerUnit::Kind::TabMarker || u.kind == PrunerUnit::Kind::ColMarker) {
      auto words = marker_name_words(input, i);
      if (words.empty()) words.push_back("<unk>");
      for (const auto& w : words) {
        const double* emb = params.embeddings.row(params.vocab.id(w));
        for (int c = 0; c < d; ++c) states.at(i, c) += emb[c];
      }
      for (int c = 0; c < d; ++c) states.at(i, c) /= static_cast<double>(words.size());
    } else {
      const double* emb = params.embeddings.row(params.vocab.id(u.word));
      for (int c = 0; c < d; ++c) states.at(i, c) = emb[c];
    }
    const double* pos = params.positional.row(i);
    for (int c = 0; c < d; ++c) states.at(i, c) += pos[c];
  }
  cache.states0 = states;

  cache.layer_caches.resize(params.layers.size());
  nn::Matrix current = states;
  for (std::size_t l = 0; l < params.layers.size(); ++l)
    current = nn::transformer_layer_forward(params.layers[l], params.config.heads, current,
                                            &cache.layer_caches[l]);
  cache.final_states = std::move(current);

  cache.marker_positions.clear();
  cache.marker_is_table.clear();
  cache.logits.clear();
  for (int i = 0; i < n; ++i) {
    const PrunerUnit& u = input.units[i];
    bool is_tab = u.kind == PrunerUnit::Kind::TabMarker;
    bool is_col = u.kind == PrunerUnit::Kind::ColMarker;
    if (!is_tab && !is_col) continue;
    const nn::Matrix& hw = is_tab ? params.table_head_w : params.column_head_w;
    const nn::Matrix& hb = is_tab ? params.table_head_b : params.column_head_b;
    double logit = hb.at(0, 0);
    for (int c = 0; c < d; ++c) logit += hw.at(0, c) * cache.final_states.at(i, c);
    cache.marker_positions.push_back(static_cast<std::size_t>(i));
    cache.marker_is_table.push_back(is_tab);
    cache.logits.push_back(logit);
  }
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Stable binary cross-entropy from logits.
double bce_from_logit(double z, double y) {
  return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

void backward(const CrossEncoderParams& params, const PrunerInput& input,
              const ForwardCache& cache, const std::vector<double>& d_logits,
              CrossEncoderParams& grads) {
  const int n = static_cast<int>(input.units.size());
  const int d = params.config.d;

  nn::Matrix d_states(n, d);
  for (std::size_t m = 0; m < cache.marker_positions.size(); ++m) {
    const double dz = d_logits[m];
    if (dz == 0.0) continue;
    const std::size_t pos = cache.marker_positions[m];
    const bool is_tab = cache.marker_is_table[m];
    const nn::Matrix& hw = is_tab ? params.table_head_w : params.column_head_w;
    nn::Matrix& d_hw = is_tab ? grads.table_head_w : grads.column_head_w;
    nn::Matrix& d_hb = is_tab ? grads.table_head_b : grads.column_head_b;
    d_hb.at(0, 0) += dz;
    for (int c = 0; c < d; ++c) {
      d_hw.at(0, c) += dz * cache.final_states.at(pos, c);
      d_states.at(static_cast<int>(pos), c) += dz * hw.at(0, c);
    }
  }

  nn::Matrix current = std::move(d_states);
  for (std::size_t l = params.layers.size(); l-- > 0;)
    current = nn::transformer_layer_backward(params.layers[l], params.config.heads,
                                             cache.layer_caches[l], current, grads.layers[l]);

  for (int i = 0; i < n; ++i) {
    const PrunerUnit& u = input.units[i];
    for (int c = 0; c < d; ++c) grads.positional.at(i, c) += current.at(i, c);
    if (u.kind == PrunerUnit::Kind::TabMarker || u.kind == PrunerUnit::Kind::ColMarker) {
      auto words = marker_name_words(input, i);
      if (words.empty()) words.push_back("<unk>");
      const double inv = 1.0 / static_cast<double>(words.size());
      for (const auto& w : words) {
        double* emb = grads.embeddings.row(params.vocab.id(w));
        for (int c = 0; c < d; ++c) emb[c] += inv * current.at(i, c);
      }
    } else {
      double* emb = grads.embeddings.row(params.vocab.id(u.word));
      for (int c = 0; c < d; ++c) emb[c] += current.at(i, c);
    }
  }
}

}  // namespace

nn::Matrix init_special_token_states(const CrossEncoderParams& params,
                                     const PrunerInput& input) {
  const int n = static_cast<int>(input.units.size());
  const int d = params.config.d;
  if (n > params.config.max_seq)
    throw UserError("input sequence exceeds the maximum length");
  nn::Matrix states(n, d);
  for (int i = 0; i < n; ++i) {
    const PrunerUnit& u = input.units[i];
    if (u.kind == PrunerUnit::Kind::TabMarker || u.kind == PrunerUnit::Kind::ColMarker) {
      auto words = marker_name_words(input, i);
      if (words.empty()) words.push_back("<unk>");
      for (const auto& w : words) {
        const double* emb = params.embeddings.row(params.vocab.id(w));
        for (int c = 0; c < d; ++c) states.at(i, c) += emb[c];
      }
      for (int c = 0; c < d; ++c) states.at(i, c) /= static_cast<double>(words.size());
    } else {
      const double* emb = params.embeddings.row(params.vocab.id(u.word));
      for (int c = 0; c < d; ++c) states.at(i, c) = emb[c];
    }
    const double* pos = params.positional.row(i);
    for (int c = 0; c < d; ++c) states.at(i, c) += pos[c];
  }
  return states;
}

RelevanceDetail score_relevance_detailed(const CrossEncoderParams& params,
                                         const PrunerInput& input) {
  ForwardCache cache;
  forward(params, input, cache);
  const std::size_t q = input.question_len;
  const int heads = params.config.heads;

  RelevanceDetail detail;
  for (std::size_t m = 0; m < cache.marker_positions.size(); ++m) {
    const std::size_t pos = cache.marker_positions[m];
    const PrunerUnit& u = input.units[pos];

    std::vector<double> row(q, 0.0);
    const auto& last_attn = cache.layer_caches.back().attn;
    for (int h = 0; h < heads; ++h)
      for (std::size_t j = 0; j < q; ++j)
        row[j] += last_attn[h].at(static_cast<int>(pos), static_cast<int>(j));
    double sum = 0.0;
    for (double& v : row) {
      v /= heads;
      sum += v;
    }
    for (double& v : row) v /= sum;  // renormalize over question tokens
    std::vector<double> final_row = row;
    double mx = *std::max_element(final_row.begin(), final_row.end());
    for (double& v : final_row) v /= mx;  // row maximum becomes 1

    ItemScore score;
    score.prob = sigmoid(cache.logits[m]);
    score.attention = std::move(final_row);
    if (u.kind == PrunerUnit::Kind::TabMarker) {
      detail.scores.tables[u.table] = std::move(score);
      detail.table_rows[u.table] = std::move(row);
    } else {
      detail.scores.columns[{u.table, u.column}] = std::move(score);
      detail.column_rows[{u.table, u.column}] = std::move(row);
    }
  }
  return detail;
}

RelevanceScores score_relevance(const CrossEncoderParams& params, const PrunerInput& input) {
  return score_relevance_detailed(params, input).scores;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

PrunerMetrics train_pruner(CrossEncoderParams& params, const std::vector<Sample>& samples,
                           const SchemaCatalog& catalog,
                           const std::map<std::string, RelevanceLabels>& labels,
                           const PrunerTrainConfig& config) {
  if (samples.empty()) throw UserError("cannot train on an empty dataset");
  for (const auto& s : samples)
    if (!labels.count(s.id))
      throw UserError("sample '" + s.id + "' has no relevance labels");

  struct Prepared {
    const Sample* sample = nullptr;
    PrunerInput input;
    const RelevanceLabels* labels = nullptr;
  };
  std::vector<Prepared> prepared;
  prepared.reserve(samples.size());
  for (const auto& s : samples) {
    Prepared p;
    p.sample = &s;
    p.input = build_input_sequence(tokenize_question(s.question), catalog.at(s.db_id));
    p.labels = &labels.at(s.id);
    prepared.push_back(std::move(p));
  }

  nn::Rng rng(config.seed);
  std::vector<std::size_t> order(prepared.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  const std::size_t holdout =
      std::min(prepared.size() - 1,
               static_cast<std::size_t>(config.holdout_fraction * prepared.size()));
  std::vector<std::size_t> eval_set(order.begin(), order.begin() + holdout);
  std::vector<std::size_t> train_set(order.begin() + holdout, order.end());
  if (train_set.empty()) train_set = order;

  auto marker_label = [](const Prepared& p, const PrunerUnit& u) {
    if (u.kind == PrunerUnit::Kind::TabMarker)
      return p.labels->positive_tables.count(u.table) ? 1.0 : 0.0;
    return p.labels->positive_columns.count({u.table, u.column}) ? 1.0 : 0.0;
  };

  PrunerMetrics metrics;
  nn::Adam adam({config.lr});
  long long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(train_set);
    double epoch_loss_sum = 0.0;
    std::size_t epoch_markers = 0;
    for (std::size_t start = 0; start < train_set.size();
         start += static_cast<std::size_t>(config.batch)) {
      ++step;
      const std::size_t end =
          std::min(train_set.size(), start + static_cast<std::size_t>(config.batch));
      CrossEncoderParams grads = zeros_like(params);

      // Count markers in this batch to normalize the mean BCE.
      std::size_t batch_markers = 0;
      for (std::size_t bi = start; bi < end; ++bi) {
        for (const auto& u : prepared[train_set[bi]].input.units)
          if (u.kind == PrunerUnit::Kind::TabMarker || u.kind == PrunerUnit::Kind::ColMarker)
            ++batch_markers;
      }
      double batch_loss = 0.0;
      for (std::size_t bi = start; bi < end; ++bi) {
        const Prepared& p = prepared[train_set[bi]];
        ForwardCache cache;
        forward(params, p.input, cache);
        std::vector<double> d_logits(cache.logits.size(), 0.0);
        for (std::size_t m = 0; m < cache.marker_positions.size(); ++m) {
          const PrunerUnit& u = p.input.units[cache.marker_positions[m]];
          const double y = marker_label(p, u);
          batch_loss += bce_from_logit(cache.logits[m], y);
          d_logits[m] = (sigmoid(cache.logits[m]) - y) / static_cast<double>(batch_markers);
        }
        backward(params, p.input, cache, d_logits, grads);
      }
      batch_loss /= static_cast<double>(batch_markers);
      if (!std::isfinite(batch_loss))
        throw Error("non-finite training loss at step " + std::to_string(step));
      epoch_loss_sum += batch_loss * static_cast<double>(batch_markers);
      epoch_markers += batch_markers;
      adam.step(params.tensors(), std::as_const(grads).tensors());
    }
    metrics.epoch_loss.push_back(epoch_loss_sum / static_cast<double>(epoch_markers));
  }

  // Held-out precision/recall/F1 at the decision threshold.
  const auto& eval = eval_set.empty() ? train_set : eval_set;
  long tab_tp = 0, tab_fp = 0, tab_fn = 0;
  long col_tp = 0, col_fp = 0, col_fn = 0;
  for (std::size_t idx : eval) {
    const Prepared& p = prepared[idx];
    RelevanceScores scores = score_relevance(params, p.input);
    for (const auto& [table, score] : scores.tables) {
      bool pred = score.prob > config.decision_threshold;
      bool truth = p.labels->positive_tables.count(table) > 0;
      if (pred && truth) ++tab_tp;
      if (pred && !truth) ++tab_fp;
      if (!pred && truth) ++tab_fn;
    }
    for (const auto& [key, score] : scores.columns) {
      bool pred = score.prob > config.decision_threshold;
      bool truth = p.labels->positive_columns.count(key) > 0;
      if (pred && truth) ++col_tp;
      if (pred && !truth) ++col_fp;
      if (!pred && truth) ++col_fn;
    }
  }
  auto prf = [](long tp, long fp, long fn) {
    PrfMetrics m;
    m.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / (tp + fp);
    m.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn);
    m.f1 = m.precision + m.recall == 0.0
               ? 0.0
               : 2.0 * m.precision * m.recall / (m.precision + m.recall);
    return m;
  };
  metrics.tables = prf(tab_tp, tab_fp, tab_fn);
  metrics.columns = prf(col_tp, col_fp, col_fn);
  return metrics;
}

// ---------------------------------------------------------------------------
// Pruning
// ---------------------------------------------------------------------------

PrunedSchema prune(const RelevanceScores& scores, const DatabaseSchema& db,
                   double decision_threshold) {
  auto table_prob = [&](const std::string& name) {
    auto it = scores.tables.find(name);
    return it == scores.tables.end() ? 0.0 : it->second.prob;
  };
  auto column_prob = [&](const std::string& table, const std::string& column) {
    auto it = scores.columns.find({table, column});
    return it == scores.columns.end() ? 0.0 : it->second.prob;
  };

  PrunedSchema pruned;
  pruned.db_id = db.db_id;
  std::set<std::string> kept_tables;
  for (const auto& table : db.tables)
    if (table_prob(table.name) > decision_threshold) kept_tables.insert(table.name);

  std::set<std::pair<std::string, std::string>> kept_columns;
  if (kept_tables.empty()) {
    // Non-emptiness fallback: the single best table with its top-3 columns.
    const TableDef* best = nullptr;
    double best_prob = -1.0;
    for (const auto& table : db.tables) {
      double p = table_prob(table.name);
      if (p > best_prob) {
        best_prob = p;
        best = &table;
      }
    }
    kept_tables.insert(best->name);
    std::vector<std::pair<double, std::size_t>> ranked;
    for (std::size_t i = 0; i < best->columns.size(); ++i)
      ranked.emplace_back(column_prob(best->name, best->columns[i].name), i);
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; i < std::min<std::size_t>(3, ranked.size()); ++i)
      kept_columns.emplace(best->name, best->columns[ranked[i].second].name);
  } else {
    for (const auto& table : db.tables) {
      if (!kept_tables.count(table.name)) continue;
      for (const auto& column : table.columns)
        if (column_prob(table.name, column.name) > decision_threshold)
          kept_columns.emplace(table.name, column.name);
    }
  }

  for (const auto& table : db.tables) {
    if (!kept_tables.count(table.name)) continue;
    TableDef kept;
    kept.name = table.name;
    for (const auto& column : table.columns)
      if (kept_columns.count({table.name, column.name})) kept.columns.push_back(column);
    pruned.tables.push_back(std::move(kept));
  }
  for (const auto& fk : db.foreign_keys)
    if (kept_columns.count({fk.from_table, fk.from_column}) &&
        kept_columns.count({fk.to_table, fk.to_column}))
      pruned.foreign_keys.push_back(fk);
  for (const auto& [table, column] : db.primary_keys)
    if (kept_columns.count({table, column})) pruned.primary_keys.emplace_back(table, column);
  return pruned;
}

// ---------------------------------------------------------------------------
// Score files
// ---------------------------------------------------------------------------

void save_scores_file(const std::vector<RelevanceScores>& scores, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UserError("cannot write file '" + path + "'");
  for (const auto& s : scores) {
    json tables = json::array();
    for (const auto& [name, score] : s.tables)
      tables.push_back({{"name", name}, {"prob", score.prob}, {"attention", score.attention}});
    json columns = json::array();
    for (const auto& [key, score] : s.columns)
      columns.push_back({{"table", key.first},
                         {"name", key.second},
                         {"prob", score.prob},
                         {"attention", score.attention}});
    out << json{{"sample_id", s.sample_id}, {"tables", tables}, {"columns", columns}}.dump()
        << "\n";
  }
}

std::vector<RelevanceScores> load_scores_file(const std::string& path,
                                              const SchemaCatalog& catalog,
                                              const std::vector<Sample>& samples) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UserError("cannot open file '" + path + "'");
  std::map<std::string, const Sample*> by_id;
  for (const auto& s : samples) by_id[s.id] = &s;

  std::vector<RelevanceScores> out;
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
    RelevanceScores scores;
    scores.sample_id = obj.value("sample_id", std::string());
    auto it = by_id.find(scores.sample_id);
    if (it == by_id.end())
      throw UserError(path + ": scores for unknown sample '" + scores.sample_id + "'");
    const Sample& sample = *it->second;
    const DatabaseSchema& db = catalog.at(sample.db_id);
    const std::size_t q = tokenize_question(sample.question).size();

    auto read_score = [&](const json& j, const std::string& what) {
      ItemScore score;
      score.prob = j.value("prob", -1.0);
      if (score.prob < 0.0 || score.prob > 1.0)
        throw UserError(path + ": sample '" + scores.sample_id + "': " + what +
                        " probability outside [0,1]");
      score.attention = j.value("attention", std::vector<double>{});
      if (score.attention.size() != q)
        throw UserError(path + ": sample '" + scores.sample_id + "': " + what +
                        " attention length " + std::to_string(score.attention.size()) +
                        " does not match question token count " + std::to_string(q));
      return score;
    };
    for (const auto& tj : obj.value("tables", json::array())) {
      std::string name = tj.value("name", std::string());
      if (!db.find_table(name))
        throw UserError(path + ": sample '" + scores.sample_id + "': unknown table '" +
                        name + "'");
      scores.tables[name] = read_score(tj, "table " + name);
    }
    for (const auto& cj : obj.value("columns", json::array())) {
      std::string table = cj.value("table", std::string());
      std::string name = cj.value("name", std::string());
      if (!db.has_column(table, name))
        throw UserError(path + ": sample '" + scores.sample_id + "': unknown column '" +
                        table + "." + name + "'");
      scores.columns[{table, name}] = read_score(cj, "column " + table + "." + name);
    }
    for (const auto& table : db.tables) {
      if (!scores.tables.count(table.name))
        throw UserError(path + ": sample '" + scores.sample_id + "': missing table '" +
                        table.name + "'");
      for (const auto& column : table.columns)
        if (!scores.columns.count({table.name, column.name}))
          throw UserError(path + ": sample '" + scores.sample_id + "': missing column '" +
                          table.name + "." + column.name + "'");
    }
    out.push_back(std::move(scores));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

void save_pruner_checkpoint(const CrossEncoderParams& params, const std::string& path) {
  json header{{"kind", "pruner"},
              {"d", params.config.d},
              {"layers", params.config.layers},
              {"heads", params.config.heads},
              {"d_ff", params.config.d_ff},
              {"max_seq", params.config.max_seq},
              {"seed", params.seed},
              {"vocab", params.vocab.words}};
  detail::write_checkpoint(path, header, params.tensors());
}

CrossEncoderParams load_pruner_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UserError("cannot open checkpoint '" + path + "'");
  json header = detail::read_checkpoint_header(in, path);
  if (header.value("kind", std::string()) != "pruner")
    throw UserError("checkpoint '" + path + "' is not a pruner checkpoint");
  CrossEncoderConfig config;
  config.d = header.value("d", 64);
  config.layers = header.value("layers", 2);
  config.heads = header.value("heads", 4);
  config.d_ff = header.value("d_ff", 256);
  config.max_seq = header.value("max_seq", 256);
  Vocab vocab;
  vocab.words = header.value("vocab", std::vector<std::string>{});
  for (std::size_t i = 0; i < vocab.words.size(); ++i)
    vocab.index[vocab.words[i]] = static_cast<int>(i);
  CrossEncoderParams params =
      CrossEncoderParams::init(config, std::move(vocab), header.value("seed", 0ull));
  detail::read_tensors(in, path, params.tensors());
  return params;
}

}  // namespace dcgsql
