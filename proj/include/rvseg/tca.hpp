#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

namespace rvseg {

/// Dense h x w x c feature map, row-major with channels innermost.
struct FeatureGrid {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  FeatureGrid() = default;
  FeatureGrid(int h, int w, int c)
      : height(h), width(w), channels(c),
        data(static_cast<std::size_t>(h) * w * c, 0.0) {
    if (h < 1 || w < 1 || c < 1) {
      throw std::invalid_argument("FeatureGrid: dimensions must be positive");
    }
  }

  std::size_t cells() const { return static_cast<std::size_t>(height) * width; }
  double& at(int r, int c, int ch) {
    return data[(static_cast<std::size_t>(r) * width + c) * channels + ch];
  }
  double at(int r, int c, int ch) const {
    return data[(static_cast<std::size_t>(r) * width + c) * channels + ch];
  }
};

/// Exact Gaussian-CDF GELU (not the tanh approximation).
inline double gelu(double x) {
  return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0)));
}

/// Projection and feed-forward weights for one cross-attention block. Linear
/// maps are row-major (out x in), y = W x + b. The 3x3 convolution acts
/// depthwise per hidden channel with zero padding of 1.
struct AttentionParams {
  int dim = 0;
  int hidden = 0;
  int heads = 1;

  std::vector<double> wq, bq;   // dim x dim, dim
  std::vector<double> wk, bk;
  std::vector<double> wv, bv;
  std::vector<double> w1, b1;   // hidden x dim, hidden
  std::vector<double> conv;     // hidden x 3 x 3
  std::vector<double> w2, b2;   // dim x hidden, dim

  static AttentionParams zeros(int dim, int hidden, int heads = 1) {
    AttentionParams p;
    p.dim = dim;
    p.hidden = hidden;
    p.heads = heads;
    p.wq.assign(static_cast<std::size_t>(dim) * dim, 0.0);
    p.wk = p.wq;
    p.wv = p.wq;
    p.bq.assign(dim, 0.0);
    p.bk = p.bq;
    p.bv = p.bq;
    p.w1.assign(static_cast<std::size_t>(hidden) * dim, 0.0);
    p.b1.assign(hidden, 0.0);
    p.conv.assign(static_cast<std::size_t>(hidden) * 9, 0.0);
    p.w2.assign(static_cast<std::size_t>(dim) * hidden, 0.0);
    p.b2.assign(dim, 0.0);
    p.check();
    return p;
  }

  /// Identity Q/K/V projections, zero feed-forward branch.
  static AttentionParams identity_projections(int dim, int hidden, int heads = 1) {
    AttentionParams p = zeros(dim, hidden, heads);
    for (int i = 0; i < dim; ++i) {
      p.wq[static_cast<std::size_t>(i) * dim + i] = 1.0;
      p.wk[static_cast<std::size_t>(i) * dim + i] = 1.0;
      p.wv[static_cast<std::size_t>(i) * dim + i] = 1.0;
    }
    return p;
  }

  static AttentionParams random(int dim, int hidden, std::uint64_t seed,
                                int heads = 1) {
    AttentionParams p = zeros(dim, hidden, heads);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-0.5, 0.5);
    for (auto* v : {&p.wq, &p.bq, &p.wk, &p.bk, &p.wv, &p.bv, &p.w1, &p.b1,
                    &p.conv, &p.w2, &p.b2}) {
      for (auto& x : *v) x = dist(rng);
    }
    return p;
  }

  void check() const {
    if (dim < 1 || hidden < 1 || heads < 1 || dim % heads != 0) {
      throw std::invalid_argument("AttentionParams: inconsistent dimensions");
    }
    const auto d = static_cast<std::size_t>(dim);
    const auto hd = static_cast<std::size_t>(hidden);
    if (wq.size() != d * d || wk.size() != d * d || wv.size() != d * d ||
        bq.size() != d || bk.size() != d || bv.size() != d ||
        w1.size() != hd * d || b1.size() != hd || conv.size() != hd * 9 ||
        w2.size() != d * hd || b2.size() != d) {
      throw std::invalid_argument("AttentionParams: shape mismatch");
    }
  }
};

namespace detail {

// y[seq][out] = W x + b over the flattened grid.
inline std::vector<double> linear_seq(const FeatureGrid& g,
                                      const std::vector<double>& w,
                                      const std::vector<double>& b, int out_dim) {
  const int in_dim = g.channels;
  const std::size_t n = g.cells();
  std::vector<double> y(n * out_dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* x = &g.data[i * in_dim];
    for (int o = 0; o < out_dim; ++o) {
      double acc = b[o];
      const double* row = &w[static_cast<std::size_t>(o) * in_dim];
      for (int c = 0; c < in_dim; ++c) acc += row[c] * x[c];
      y[i * out_dim + o] = acc;
    }
  }
  return y;
}

}  // namespace detail

/// Row-stochastic attention matrix (n_q x n_k): Softmax(Q K^T / sqrt(d_f)).
/// Exposed for invariant checks; heads > 1 returns the first head's weights.
inline std::vector<double> attention_weights(const FeatureGrid& f_t,
                                             const FeatureGrid& f_prev,
                                             const AttentionParams& params) {
  params.check();
  if (f_t.channels != params.dim || f_prev.channels != params.dim) {
    throw std::invalid_argument("attention_weights: feature dimension mismatch");
  }
  const std::size_t nq = f_t.cells();
  const std::size_t nk = f_prev.cells();
  const int hd = params.dim / params.heads;
  const auto q = detail::linear_seq(f_t, params.wq, params.bq, params.dim);
  const auto k = detail::linear_seq(f_prev, params.wk, params.bk, params.dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(params.dim));

  std::vector<double> w(nq * nk, 0.0);
  for (std::size_t i = 0; i < nq; ++i) {
    double maxl = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < nk; ++j) {
      double l = 0.0;
      for (int c = 0; c < hd; ++c) {
        l += q[i * params.dim + c] * k[j * params.dim + c];
      }
      w[i * nk + j] = l * scale;
      maxl = std::max(maxl, w[i * nk + j]);
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < nk; ++j) {
      w[i * nk + j] = std::exp(w[i * nk + j] - maxl);
      sum += w[i * nk + j];
    }
    for (std::size_t j = 0; j < nk; ++j) w[i * nk + j] /= sum;
  }
  return w;
}

/// Temporal cross attention: queries from the current frame, keys and values
/// from the previous frame, output reshaped onto the current grid.
inline FeatureGrid cross_attention(const FeatureGrid& f_t, const FeatureGrid& f_prev,
                                   const AttentionParams& params) {
  params.check();
  if (f_t.channels != params.dim || f_prev.channels != params.dim) {
    throw std::invalid_argument("cross_attention: feature dimension mismatch");
  }
  const std::size_t nq = f_t.cells();
  const std::size_t nk = f_prev.cells();
  const int d = params.dim;
  const int hd = d / params.heads;
  const auto q = detail::linear_seq(f_t, params.wq, params.bq, d);
  const auto k = detail::linear_seq(f_prev, params.wk, params.bk, d);
  const auto v = detail::linear_seq(f_prev, params.wv, params.bv, d);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  FeatureGrid out(f_t.height, f_t.width, d);
  std::vector<double> logits(nk);
  for (int h = 0; h < params.heads; ++h) {
    const int off = h * hd;
    for (std::size_t i = 0; i < nq; ++i) {
      double maxl = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < nk; ++j) {
        double l = 0.0;
        for (int c = 0; c < hd; ++c) l += q[i * d + off + c] * k[j * d + off + c];
        logits[j] = l * scale;
        maxl = std::max(maxl, logits[j]);
      }
      double sum = 0.0;
      for (std::size_t j = 0; j < nk; ++j) {
        logits[j] = std::exp(logits[j] - maxl);
        sum += logits[j];
      }
      double* o = &out.data[i * d + off];
      for (std::size_t j = 0; j < nk; ++j) {
        const double a = logits[j] / sum;
        for (int c = 0; c < hd; ++c) o[c] += a * v[j * d + off + c];
      }
    }
  }
  return out;
}

/// MLP(GELU(Conv3x3(MLP(x)))) + x with zero padding of 1 on the conv.
inline FeatureGrid feed_forward(const FeatureGrid& x, const AttentionParams& params) {
  params.check();
  if (x.channels != params.dim) {
    throw std::invalid_argument("feed_forward: feature dimension mismatch");
  }
  const int h = x.height, w = x.width;
  const int hd = params.hidden;

  const auto mid = detail::linear_seq(x, params.w1, params.b1, hd);

  // depthwise 3x3, zero padding 1
  std::vector<double> conv(static_cast<std::size_t>(h) * w * hd, 0.0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      for (int ch = 0; ch < hd; ++ch) {
        double acc = 0.0;
        const double* kern = &params.conv[static_cast<std::size_t>(ch) * 9];
        for (int dr = -1; dr <= 1; ++dr) {
          const int rr = r + dr;
          if (rr < 0 || rr >= h) continue;
          for (int dc = -1; dc <= 1; ++dc) {
            const int cc = c + dc;
            if (cc < 0 || cc >= w) continue;
            acc += kern[(dr + 1) * 3 + (dc + 1)] *
                   mid[(static_cast<std::size_t>(rr) * w + cc) * hd + ch];
          }
        }
        conv[(static_cast<std::size_t>(r) * w + c) * hd + ch] = gelu(acc);
      }
    }
  }

  FeatureGrid out = x;  // residual
  for (std::size_t i = 0; i < x.cells(); ++i) {
    const double* mi = &conv[i * hd];
    for (int o = 0; o < params.dim; ++o) {
      double acc = params.b2[o];
      const double* row = &params.w2[static_cast<std::size_t>(o) * hd];
      for (int c = 0; c < hd; ++c) acc += row[c] * mi[c];
      out.data[i * params.dim + o] += acc;
    }
  }
  return out;
}

}  // namespace rvseg
