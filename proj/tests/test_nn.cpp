#include "doctest.h"

#include <cmath>

#include "dcgsql/nn.hpp"

using namespace dcgsql;
using nn::Matrix;

TEST_SUITE_BEGIN("nn");

namespace {

// Scalar probe loss: weighted sum of the outputs with fixed coefficients.
double probe_loss(const Matrix& out, const Matrix& weights) {
  double loss = 0.0;
  for (std::size_t i = 0; i < out.data.size(); ++i) loss += out.data[i] * weights.data[i];
  return loss;
}

}  // namespace

TEST_CASE("matmul shapes and values") {
  Matrix a(2, 3), b(3, 2);
  for (int i = 0; i < 6; ++i) {
    a.data[i] = i + 1;
    b.data[i] = i + 1;
  }
  Matrix c = nn::matmul(a, b);
  REQUIRE(c.rows == 2);
  REQUIRE(c.cols == 2);
  CHECK(c.at(0, 0) == doctest::Approx(22));
  CHECK(c.at(1, 1) == doctest::Approx(64));
}

TEST_CASE("softmax rows sum to one") {
  Matrix s(3, 4);
  nn::Rng rng(1);
  rng.fill_uniform(s, -2.0, 2.0);
  Matrix p = nn::softmax_rows(s);
  for (int i = 0; i < 3; ++i) {
    double sum = 0.0;
    for (int j = 0; j < 4; ++j) sum += p.at(i, j);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("layer norm gradients match finite differences") {
  const int n = 3, d = 5;
  nn::Rng rng(7);
  Matrix x(n, d), gain(1, d), bias(1, d), probe(n, d);
  rng.fill_uniform(x, -1.0, 1.0);
  rng.fill_uniform(gain, 0.5, 1.5);
  rng.fill_uniform(bias, -0.5, 0.5);
  rng.fill_uniform(probe, -1.0, 1.0);

  nn::LayerNormCache cache;
  Matrix out = nn::layer_norm(x, gain, bias, &cache);
  Matrix d_gain(1, d), d_bias(1, d);
  Matrix dx = nn::layer_norm_backward(probe, gain, cache, d_gain, d_bias);

  const double eps = 1e-6;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    Matrix xp = x, xm = x;
    xp.data[i] += eps;
    xm.data[i] -= eps;
    double fp = probe_loss(nn::layer_norm(xp, gain, bias), probe);
    double fm = probe_loss(nn::layer_norm(xm, gain, bias), probe);
    CHECK(nn::rel_error(dx.data[i], (fp - fm) / (2 * eps)) < 1e-6);
  }
  for (int j = 0; j < d; ++j) {
    Matrix gp = gain, gm = gain;
    gp.data[j] += eps;
    gm.data[j] -= eps;
    double fp = probe_loss(nn::layer_norm(x, gp, bias), probe);
    double fm = probe_loss(nn::layer_norm(x, gm, bias), probe);
    CHECK(nn::rel_error(d_gain.data[j], (fp - fm) / (2 * eps)) < 1e-6);
  }
}

TEST_CASE("transformer layer gradients match finite differences") {
  const int n = 4, d = 8, dff = 12, heads = 2;
  nn::Rng rng(11);
  nn::TransformerLayerParams params;
  params.init(d, dff, rng);
  Matrix x(n, d), probe(n, d);
  rng.fill_uniform(x, -0.5, 0.5);
  rng.fill_uniform(probe, -1.0, 1.0);

  nn::TransformerLayerCache cache;
  Matrix out = nn::transformer_layer_forward(params, heads, x, &cache);
  nn::TransformerLayerParams grads;
  nn::Rng zero_rng(0);
  grads.init(d, dff, zero_rng);
  for (nn::Matrix* g : grads.tensors()) g->zero();
  Matrix dx = nn::transformer_layer_backward(params, heads, cache, probe, grads);

  const double eps = 1e-5;
  auto loss_at = [&](const Matrix& input) {
    return probe_loss(nn::transformer_layer_forward(params, heads, input, nullptr), probe);
  };
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    Matrix xp = x, xm = x;
    xp.data[i] += eps;
    xm.data[i] -= eps;
    CHECK(nn::rel_error(dx.data[i], (loss_at(xp) - loss_at(xm)) / (2 * eps)) < 1e-4);
  }

  auto param_tensors = params.tensors();
  auto grad_tensors = grads.tensors();
  for (std::size_t t = 0; t < param_tensors.size(); ++t) {
    Matrix& tensor = *param_tensors[t];
    // Probe a few entries of each tensor.
    for (std::size_t i = 0; i < tensor.data.size(); i += std::max<std::size_t>(1, tensor.data.size() / 7)) {
      const double orig = tensor.data[i];
      tensor.data[i] = orig + eps;
      double fp = probe_loss(nn::transformer_layer_forward(params, heads, x, nullptr), probe);
      tensor.data[i] = orig - eps;
      double fm = probe_loss(nn::transformer_layer_forward(params, heads, x, nullptr), probe);
      tensor.data[i] = orig;
      CHECK(nn::rel_error(grad_tensors[t]->data[i], (fp - fm) / (2 * eps)) < 1e-4);
    }
  }
}

TEST_CASE("adam converges on a quadratic") {
  Matrix w(1, 4);
  w.data = {4.0, -3.0, 2.0, -1.0};
  nn::Adam adam({0.05});
  for (int step = 0; step < 400; ++step) {
    Matrix g(1, 4);
    for (int i = 0; i < 4; ++i) g.data[i] = 2.0 * w.data[i];
    adam.step({&w}, {&g});
  }
  for (double v : w.data) CHECK(std::abs(v) < 1e-2);
}

TEST_CASE("rng is deterministic and shuffles stably") {
  nn::Rng a(42), b(42);
  for (int i = 0; i < 10; ++i) CHECK(a.uniform01() == b.uniform01());
  std::vector<int> v1{1, 2, 3, 4, 5, 6}, v2{1, 2, 3, 4, 5, 6};
  nn::Rng r1(9), r2(9);
  r1.shuffle(v1);
  r2.shuffle(v2);
  CHECK(v1 == v2);
}

TEST_SUITE_END();
