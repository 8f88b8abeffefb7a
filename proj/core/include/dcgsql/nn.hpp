#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "dcgsql/errors.hpp"

namespace dcgsql::nn {

/// Row-major dense matrix of doubles. Vectors are 1-row matrices.
struct Matrix {
  int rows = 0, cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  double* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
  const double* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }
  std::size_t size() const { return data.size(); }
  void zero() { std::fill(data.begin(), data.end(), 0.0); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  bool operator==(const Matrix&) const = default;
};

Matrix matmul(const Matrix& a, const Matrix& b);      // a(m,k) * b(k,n)
Matrix matmul_nt(const Matrix& a, const Matrix& b);   // a(m,k) * b(n,k)^T
Matrix matmul_tn(const Matrix& a, const Matrix& b);   // a(k,m)^T * b(k,n)
void add_inplace(Matrix& a, const Matrix& b);
void axpy(Matrix& a, double c, const Matrix& b);      // a += c*b

/// Deterministic RNG; uniform doubles are derived from raw 64-bit draws so
/// sequences do not depend on the standard library's distribution details.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  std::uint64_t next_u64() { return gen_(); }
  double uniform01() { return (gen_() >> 11) * (1.0 / 9007199254740992.0); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  std::size_t bounded(std::size_t n) { return static_cast<std::size_t>(gen_() % n); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[bounded(i)]);
  }

  void fill_uniform(Matrix& m, double lo, double hi) {
    for (double& x : m.data) x = uniform(lo, hi);
  }

 private:
  std::mt19937_64 gen_;
};

// ---------------------------------------------------------------------------
// Layer normalization
// ---------------------------------------------------------------------------

constexpr double kLayerNormEps = 1e-5;

struct LayerNormCache {
  Matrix input;
  std::vector<double> mean, inv_std;
};

Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias,
                  LayerNormCache* cache = nullptr);
/// Returns gradient w.r.t. x; accumulates into d_gain/d_bias.
Matrix layer_norm_backward(const Matrix& d_out, const Matrix& gain,
                           const LayerNormCache& cache, Matrix& d_gain, Matrix& d_bias);

Matrix softmax_rows(const Matrix& scores);

// ---------------------------------------------------------------------------
// Plain transformer encoder layer (multi-head self-attention + feed-forward,
// post-norm residuals)
// ---------------------------------------------------------------------------

struct TransformerLayerParams {
  Matrix wq, wk, wv, wo;        // d x d
  Matrix w1, b1, w2, b2;        // d x dff, 1 x dff, dff x d, 1 x d
  Matrix ln1_g, ln1_b, ln2_g, ln2_b;  // 1 x d

  /// Weights drawn uniformly at the fan-scaled width sqrt(6/(fan_in+fan_out)).
  void init(int d, int dff, Rng& rng);
  std::vector<Matrix*> tensors();
  std::vector<const Matrix*> tensors() const;
};

struct TransformerLayerCache {
  Matrix input, q, k, v;
  std::vector<Matrix> attn;  // per head, N x N softmax rows
  Matrix concat, attn_out, res1, y1;
  Matrix ff_pre, ff_act, res2;
  LayerNormCache ln1, ln2;
};

Matrix transformer_layer_forward(const TransformerLayerParams& p, int heads,
                                 const Matrix& x, TransformerLayerCache* cache);
/// Returns gradient w.r.t. the layer input; accumulates parameter gradients.
Matrix transformer_layer_backward(const TransformerLayerParams& p, int heads,
                                  const TransformerLayerCache& cache, const Matrix& d_out,
                                  TransformerLayerParams& grads);

// ---------------------------------------------------------------------------
// Adam optimizer
// ---------------------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(const AdamConfig& cfg = {}) : cfg_(cfg) {}
  void step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads);

 private:
  AdamConfig cfg_;
  long long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

/// Elementwise relative error used by gradient checks:
/// |a-b| / max(1, |a|, |b|).
double rel_error(double a, double b);

}  // namespace dcgsql::nn
