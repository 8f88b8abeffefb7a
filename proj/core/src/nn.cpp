#include "dcgsql/nn.hpp"

#include <algorithm>
#include <cmath>

namespace dcgsql::nn {

Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = a.row(i);
    double* orow = out.row(i);
    for (int k = 0; k < a.cols; ++k) {
      const double av = arow[k];
      if (av == 0.0) continue;
      const double* brow = b.row(k);
      for (int j = 0; j < b.cols; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows, b.rows);
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = a.row(i);
    for (int j = 0; j < b.rows; ++j) {
      const double* brow = b.row(j);
      double sum = 0.0;
      for (int k = 0; k < a.cols; ++k) sum += arow[k] * brow[k];
      out.at(i, j) = sum;
    }
  }
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  Matrix out(a.cols, b.cols);
  for (int k = 0; k < a.rows; ++k) {
    const double* arow = a.row(k);
    const double* brow = b.row(k);
    for (int i = 0; i < a.cols; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* orow = out.row(i);
      for (int j = 0; j < b.cols; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

void add_inplace(Matrix& a, const Matrix& b) {
  for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

void axpy(Matrix& a, double c, const Matrix& b) {
  for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += c * b.data[i];
}

Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias,
                  LayerNormCache* cache) {
  Matrix out(x.rows, x.cols);
  if (cache) {
    cache->input = x;
    cache->mean.assign(x.rows, 0.0);
    cache->inv_std.assign(x.rows, 0.0);
  }
  for (int i = 0; i < x.rows; ++i) {
    const double* row = x.row(i);
    double mean = 0.0;
    for (int j = 0; j < x.cols; ++j) mean += row[j];
    mean /= x.cols;
    double var = 0.0;
    for (int j = 0; j < x.cols; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= x.cols;
    double inv_std = 1.0 / std::sqrt(var + kLayerNormEps);
    if (cache) {
      cache->mean[i] = mean;
      cache->inv_std[i] = inv_std;
    }
    for (int j = 0; j < x.cols; ++j)
      out.at(i, j) = gain.at(0, j) * (row[j] - mean) * inv_std + bias.at(0, j);
  }
  return out;
}

Matrix layer_norm_backward(const Matrix& d_out, const Matrix& gain,
                           const LayerNormCache& cache, Matrix& d_gain, Matrix& d_bias) {
  const Matrix& x = cache.input;
  const int d = x.cols;
  Matrix dx(x.rows, d);
  for (int i = 0; i < x.rows; ++i) {
    const double mean = cache.mean[i];
    const double inv_std = cache.inv_std[i];
    const double* xrow = x.row(i);
    const double* dyrow = d_out.row(i);
    double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
    std::vector<double> xhat(d), dxhat(d);
    for (int j = 0; j < d; ++j) {
      xhat[j] = (xrow[j] - mean) * inv_std;
      dxhat[j] = dyrow[j] * gain.at(0, j);
      sum_dxhat += dxhat[j];
      sum_dxhat_xhat += dxhat[j] * xhat[j];
      d_gain.at(0, j) += dyrow[j] * xhat[j];
      d_bias.at(0, j) += dyrow[j];
    }
    for (int j = 0; j < d; ++j)
      dx.at(i, j) = inv_std * (dxhat[j] - sum_dxhat / d - xhat[j] * sum_dxhat_xhat / d);
  }
  return dx;
}

Matrix softmax_rows(const Matrix& scores) {
  Matrix out(scores.rows, scores.cols);
  for (int i = 0; i < scores.rows; ++i) {
    const double* row = scores.row(i);
    double mx = row[0];
    for (int j = 1; j < scores.cols; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (int j = 0; j < scores.cols; ++j) {
      out.at(i, j) = std::exp(row[j] - mx);
      sum += out.at(i, j);
    }
    for (int j = 0; j < scores.cols; ++j) out.at(i, j) /= sum;
  }
  return out;
}

void TransformerLayerParams::init(int d, int dff, Rng& rng) {
  wq = Matrix(d, d);
  wk = Matrix(d, d);
  wv = Matrix(d, d);
  wo = Matrix(d, d);
  w1 = Matrix(d, dff);
  b1 = Matrix(1, dff);
  w2 = Matrix(dff, d);
  b2 = Matrix(1, d);
  ln1_g = Matrix(1, d);
  ln1_b = Matrix(1, d);
  ln2_g = Matrix(1, d);
  ln2_b = Matrix(1, d);
  const double square = std::sqrt(6.0 / (d + d));
  const double ff = std::sqrt(6.0 / (d + dff));
  rng.fill_uniform(wq, -square, square);
  rng.fill_uniform(wk, -square, square);
  rng.fill_uniform(wv, -square, square);
  rng.fill_uniform(wo, -square, square);
  rng.fill_uniform(w1, -ff, ff);
  rng.fill_uniform(w2, -ff, ff);
  std::fill(ln1_g.data.begin(), ln1_g.data.end(), 1.0);
  std::fill(ln2_g.data.begin(), ln2_g.data.end(), 1.0);
}

std::vector<Matrix*> TransformerLayerParams::tensors() {
  return {&wq, &wk, &wv, &wo, &w1, &b1, &w2, &b2, &ln1_g, &ln1_b, &ln2_g, &ln2_b};
}

std::vector<const Matrix*> TransformerLayerParams::tensors() const {
  return {&wq, &wk, &wv, &wo, &w1, &b1, &w2, &b2, &ln1_g, &ln1_b, &ln2_g, &ln2_b};
}

Matrix transformer_layer_forward(const TransformerLayerParams& p, int heads,
                                 const Matrix& x, TransformerLayerCache* cache) {
  const int n = x.rows;
  const int d = x.cols;
  if (d % heads != 0) throw Error("model dim not divisible by head count");
  const int dk = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  Matrix q = matmul(x, p.wq);
  Matrix k = matmul(x, p.wk);
  Matrix v = matmul(x, p.wv);

  Matrix concat(n, d);
  std::vector<Matrix> attn(heads);
  for (int h = 0; h < heads; ++h) {
    Matrix scores(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double sum = 0.0;
        for (int c = 0; c < dk; ++c) sum += q.at(i, h * dk + c) * k.at(j, h * dk + c);
        scores.at(i, j) = sum * scale;
      }
    attn[h] = softmax_rows(scores);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double a = attn[h].at(i, j);
        if (a == 0.0) continue;
        for (int c = 0; c < dk; ++c) concat.at(i, h * dk + c) += a * v.at(j, h * dk + c);
      }
  }

  Matrix attn_out = matmul(concat, p.wo);
  Matrix res1 = x;
  add_inplace(res1, attn_out);
  LayerNormCache ln1_cache;
  Matrix y1 = layer_norm(res1, p.ln1_g, p.ln1_b, &ln1_cache);

  Matrix ff_pre = matmul(y1, p.w1);
  for (int i = 0; i < ff_pre.rows; ++i)
    for (int j = 0; j < ff_pre.cols; ++j) ff_pre.at(i, j) += p.b1.at(0, j);
  Matrix ff_act = ff_pre;
  for (double& xv : ff_act.data) xv = std::max(0.0, xv);
  Matrix ff_out = matmul(ff_act, p.w2);
  for (int i = 0; i < ff_out.rows; ++i)
    for (int j = 0; j < ff_out.cols; ++j) ff_out.at(i, j) += p.b2.at(0, j);

  Matrix res2 = y1;
  add_inplace(res2, ff_out);
  LayerNormCache ln2_cache;
  Matrix y2 = layer_norm(res2, p.ln2_g, p.ln2_b, &ln2_cache);

  if (cache) {
    cache->input = x;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->attn = std::move(attn);
    cache->concat = std::move(concat);
    cache->attn_out = std::move(attn_out);
    cache->res1 = std::move(res1);
    cache->y1 = y1;
    cache->ff_pre = std::move(ff_pre);
    cache->ff_act = std::move(ff_act);
    cache->res2 = std::move(res2);
    cache->ln1 = std::move(ln1_cache);
    cache->ln2 = std::move(ln2_cache);
  }
  return y2;
}

Matrix transformer_layer_backward(const TransformerLayerParams& p, int heads,
                                  const TransformerLayerCache& cache, const Matrix& d_out,
                                  TransformerLayerParams& grads) {
  const Matrix& x = cache.input;
  const int n = x.rows;
  const int d = x.cols;
  const int dk = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  // LN2 and feed-forward
  Matrix d_res2 = layer_norm_backward(d_out, p.ln2_g, cache.ln2, grads.ln2_g, grads.ln2_b);
  Matrix d_y1 = d_res2;  // residual branch
  Matrix d_ff_out = d_res2;

  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) grads.b2.at(0, j) += d_ff_out.at(i, j);
  add_inplace(grads.w2, matmul_tn(cache.ff_act, d_ff_out));
  Matrix d_ff_act = matmul_nt(d_ff_out, p.w2);
  Matrix d_ff_pre = d_ff_act;
  for (std::size_t i = 0; i < d_ff_pre.data.size(); ++i)
    if (cache.ff_pre.data[i] <= 0.0) d_ff_pre.data[i] = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d_ff_pre.cols; ++j) grads.b1.at(0, j) += d_ff_pre.at(i, j);
  add_inplace(grads.w1, matmul_tn(cache.y1, d_ff_pre));
  add_inplace(d_y1, matmul_nt(d_ff_pre, p.w1));

  // LN1 and attention
  Matrix d_res1 = layer_norm_backward(d_y1, p.ln1_g, cache.ln1, grads.ln1_g, grads.ln1_b);
  Matrix dx = d_res1;  // residual branch
  Matrix d_attn_out = d_res1;

  add_inplace(grads.wo, matmul_tn(cache.concat, d_attn_out));
  Matrix d_concat = matmul_nt(d_attn_out, p.wo);

  Matrix dq(n, d), dkm(n, d), dv(n, d);
  for (int h = 0; h < heads; ++h) {
    const Matrix& a = cache.attn[h];
    Matrix da(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double sum = 0.0;
        for (int c = 0; c < dk; ++c) sum += d_concat.at(i, h * dk + c) * cache.v.at(j, h * dk + c);
        da.at(i, j) = sum;
        double av = a.at(i, j);
        if (av != 0.0)
          for (int c = 0; c < dk; ++c)
            dv.at(j, h * dk + c) += av * d_concat.at(i, h * dk + c);
      }
    // softmax backward
    Matrix ds(n, n);
    for (int i = 0; i < n; ++i) {
      double dot = 0.0;
      for (int j = 0; j < n; ++j) dot += a.at(i, j) * da.at(i, j);
      for (int j = 0; j < n; ++j) ds.at(i, j) = a.at(i, j) * (da.at(i, j) - dot);
    }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double g = ds.at(i, j) * scale;
        if (g == 0.0) continue;
        for (int c = 0; c < dk; ++c) {
          dq.at(i, h * dk + c) += g * cache.k.at(j, h * dk + c);
          dkm.at(j, h * dk + c) += g * cache.q.at(i, h * dk + c);
        }
      }
  }

  add_inplace(grads.wq, matmul_tn(x, dq));
  add_inplace(grads.wk, matmul_tn(x, dkm));
  add_inplace(grads.wv, matmul_tn(x, dv));
  add_inplace(dx, matmul_nt(dq, p.wq));
  add_inplace(dx, matmul_nt(dkm, p.wk));
  add_inplace(dx, matmul_nt(dv, p.wv));
  return dx;
}

void Adam::step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads) {
  if (params.size() != grads.size()) throw Error("adam: parameter/gradient count mismatch");
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i]->size(), 0.0);
      v_[i].assign(params[i]->size(), 0.0);
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = *params[i];
    const Matrix& g = *grads[i];
    if (p.size() != g.size()) throw Error("adam: tensor shape mismatch");
    for (std::size_t j = 0; j < p.size(); ++j) {
      m_[i][j] = cfg_.beta1 * m_[i][j] + (1.0 - cfg_.beta1) * g.data[j];
      v_[i][j] = cfg_.beta2 * v_[i][j] + (1.0 - cfg_.beta2) * g.data[j] * g.data[j];
      const double mhat = m_[i][j] / bc1;
      const double vhat = v_[i][j] / bc2;
      p.data[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

double rel_error(double a, double b) {
  double denom = std::max({1.0, std::abs(a), std::abs(b)});
  return std::abs(a - b) / denom;
}

}  // namespace dcgsql::nn
