#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "ventrl/core/matrix.hpp"
#include "ventrl/core/rng.hpp"

namespace ventrl::nn {

struct DenseLayer {
  Matrix w;              // in x out
  std::vector<float> b;  // out
};

// Plain dense MLP: ReLU on hidden layers, identity output. Gradients are
// hand-derived; there is no graph machinery anywhere in this project.
struct MlpParams {
  std::vector<DenseLayer> layers;

  int in_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.front().w.rows()); }
  int out_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.back().w.cols()); }

  // Glorot-uniform init: +/- sqrt(6 / (fan_in + fan_out)) per layer.
  static MlpParams make(std::span<const int> dims, Rng& rng) {
    MlpParams p;
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
      DenseLayer layer;
      layer.w = Matrix(dims[k], dims[k + 1]);
      layer.b.assign(dims[k + 1], 0.0f);
      const float bound = std::sqrt(6.0f / static_cast<float>(dims[k] + dims[k + 1]));
      for (float& v : layer.w.flat()) v = static_cast<float>(rng.uniform_in(-bound, bound));
      p.layers.push_back(std::move(layer));
    }
    return p;
  }

  template <typename Fn>
  void for_each_tensor(Fn&& fn) {
    for (auto& l : layers) {
      fn(std::span<float>(l.w.flat()));
      fn(std::span<float>(l.b.data(), l.b.size()));
    }
  }
  template <typename Fn>
  void for_each_tensor(Fn&& fn) const {
    for (const auto& l : layers) {
      fn(std::span<const float>(l.w.flat()));
      fn(std::span<const float>(l.b.data(), l.b.size()));
    }
  }
};

struct MlpGrads {
  std::vector<DenseLayer> layers;

  static MlpGrads zeros_like(const MlpParams& p) {
    MlpGrads g;
    for (const auto& l : p.layers) {
      DenseLayer z;
      z.w = Matrix(l.w.rows(), l.w.cols());
      z.b.assign(l.b.size(), 0.0f);
      g.layers.push_back(std::move(z));
    }
    return g;
  }

  void zero() {
    for (auto& l : layers) {
      l.w.fill(0.0f);
      std::fill(l.b.begin(), l.b.end(), 0.0f);
    }
  }

  template <typename Fn>
  void for_each_tensor(Fn&& fn) {
    for (auto& l : layers) {
      fn(std::span<float>(l.w.flat()));
      fn(std::span<float>(l.b.data(), l.b.size()));
    }
  }
  template <typename Fn>
  void for_each_tensor(Fn&& fn) const {
    for (const auto& l : layers) {
      fn(std::span<const float>(l.w.flat()));
      fn(std::span<const float>(l.b.data(), l.b.size()));
    }
  }
};

// acts[0] is the input, acts[k] the post-activation output of layer k
// (identity on the last layer). masks[k] is the ReLU mask of hidden layer k.
struct MlpCache {
  std::vector<Matrix> acts;
  std::vector<Matrix> masks;
};

inline Matrix mlp_forward(const MlpParams& p, const Matrix& input, MlpCache* cache = nullptr) {
  if (static_cast<int>(input.cols()) != p.in_dim())
    throw DimensionError("mlp_forward: input width " + std::to_string(input.cols()) +
                         " != first-layer width " + std::to_string(p.in_dim()));
  if (cache) {
    cache->acts.clear();
    cache->masks.clear();
    cache->acts.push_back(input);
  }
  Matrix cur = input;
  const std::size_t n = p.layers.size();
  for (std::size_t k = 0; k < n; ++k) {
    const auto& l = p.layers[k];
    Matrix z;
    matmul_into(z, cur, l.w);
    for (std::size_t r = 0; r < z.rows(); ++r) {
      auto row = z.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) row[c] += l.b[c];
    }
    if (k + 1 < n) {
      Matrix mask(z.rows(), z.cols());
      for (std::size_t i = 0; i < z.size(); ++i) {
        const bool pos = z.flat()[i] > 0.0f;
        mask.flat()[i] = pos ? 1.0f : 0.0f;
        if (!pos) z.flat()[i] = 0.0f;
      }
      if (cache) cache->masks.push_back(std::move(mask));
    }
    if (cache) cache->acts.push_back(z);
    cur = cache ? cache->acts.back() : std::move(z);
  }
  return cur;
}

// Deltas of the backward pass, kept when the input-gradient itself later needs
// to be differentiated (EDAC's diversity term).
struct InputGradCache {
  std::vector<Matrix> deltas;  // deltas[k] = dL/d(layer k pre-activation), k = 0..n-1
};

// Reverse pass. upstream has the shape of the forward output. Any of grads /
// input_grads / igc may be null.
inline void mlp_backward(const MlpParams& p, const MlpCache& cache, const Matrix& upstream,
                         MlpGrads* grads, Matrix* input_grads = nullptr,
                         InputGradCache* igc = nullptr) {
  const std::size_t n = p.layers.size();
  if (upstream.rows() != cache.acts.back().rows() || upstream.cols() != cache.acts.back().cols())
    throw DimensionError("mlp_backward: upstream shape mismatch");
  if (grads && grads->layers.size() != n) throw DimensionError("mlp_backward: grads shape");
  if (igc) igc->deltas.assign(n, Matrix());

  Matrix delta = upstream;
  Matrix tmp;
  for (std::size_t k = n; k-- > 0;) {
    if (igc) igc->deltas[k] = delta;
    if (grads) {
      matmul_tn_into(tmp, cache.acts[k], delta);
      grads->layers[k].w.map() += tmp.map();
      auto& gb = grads->layers[k].b;
      for (std::size_t r = 0; r < delta.rows(); ++r) {
        auto row = delta.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) gb[c] += row[c];
      }
    }
    if (k == 0) {
      if (input_grads) matmul_nt_into(*input_grads, delta, p.layers[0].w);
      break;
    }
    Matrix prev;
    matmul_nt_into(prev, delta, p.layers[k].w);
    const Matrix& mask = cache.masks[k - 1];
    for (std::size_t i = 0; i < prev.size(); ++i) prev.flat()[i] *= mask.flat()[i];
    delta = std::move(prev);
  }
}

// Convenience form mirroring the module surface: runs its own forward.
inline std::pair<MlpGrads, Matrix> mlp_backward(const MlpParams& p, const Matrix& input,
                                                const Matrix& upstream) {
  MlpCache cache;
  mlp_forward(p, input, &cache);
  MlpGrads grads = MlpGrads::zeros_like(p);
  Matrix input_grads;
  mlp_backward(p, cache, upstream, &grads, &input_grads);
  return {std::move(grads), std::move(input_grads)};
}

// Gradient of a scalar loss L(g) with respect to the weights, where
// g = d(sum of outputs)/d(input) was produced by mlp_backward with the deltas
// recorded in igc. ReLU masks are treated as locally constant, so the result
// is exact almost everywhere; biases get no contribution on that path.
inline void mlp_input_grad_backward(const MlpParams& p, const MlpCache& cache,
                                    const InputGradCache& igc, const Matrix& upstream_on_g,
                                    MlpGrads& grads) {
  const std::size_t n = p.layers.size();
  if (igc.deltas.size() != n) throw DimensionError("mlp_input_grad_backward: missing deltas");
  Matrix pk = upstream_on_g;  // dL/d(U_k) with U_k = delta_k * W_k^T; starts at k=0
  Matrix tmp;
  for (std::size_t k = 0; k < n; ++k) {
    matmul_tn_into(tmp, pk, igc.deltas[k]);
    grads.layers[k].w.map() += tmp.map();
    if (k + 1 < n) {
      Matrix next;
      matmul_into(next, pk, p.layers[k].w);
      const Matrix& mask = cache.masks[k];
      for (std::size_t i = 0; i < next.size(); ++i) next.flat()[i] *= mask.flat()[i];
      pk = std::move(next);
    }
  }
}

// ---------------------------------------------------------------------------
// Probability utilities
// ---------------------------------------------------------------------------

inline constexpr double kLogTwoPi = 1.8378770664093453;

struct GaussianHead {
  std::vector<float> mean;
  std::vector<float> log_std;
  float log_std_min = -20.0f;  // IQL-style default clamp
  float log_std_max = 2.0f;

  float clamped_log_std(std::size_t i) const {
    return std::clamp(log_std[i], log_std_min, log_std_max);
  }
};

// Keeps squashed samples strictly inside (-1, 1) even when tanh rounds to 1.
inline float tanh_open(double u) {
  const float a = static_cast<float>(std::tanh(u));
  const float limit = std::nextafter(1.0f, 0.0f);
  return std::clamp(a, -limit, limit);
}

// Squashes a raw Gaussian sample through tanh and returns the log-density of
// the squashed value: Normal log-prob minus sum of log(1 - tanh(u)^2 + 1e-6).
inline std::pair<std::vector<float>, double> tanh_gaussian_log_prob(
    const GaussianHead& head, std::span<const float> raw_sample) {
  if (raw_sample.size() != head.mean.size())
    throw DimensionError("tanh_gaussian_log_prob: sample width mismatch");
  std::vector<float> squashed(raw_sample.size());
  double logp = 0.0;
  for (std::size_t i = 0; i < raw_sample.size(); ++i) {
    const double sigma = std::exp(static_cast<double>(head.clamped_log_std(i)));
    const double z = (static_cast<double>(raw_sample[i]) - head.mean[i]) / sigma;
    const double a = std::tanh(static_cast<double>(raw_sample[i]));
    squashed[i] = tanh_open(raw_sample[i]);
    logp += -0.5 * z * z - std::log(sigma) - 0.5 * kLogTwoPi;
    logp -= std::log(1.0 - a * a + 1e-6);
  }
  return {std::move(squashed), logp};
}

// Max-shifted log-sum-exp per row; result is always >= the row max.
inline std::vector<float> logsumexp_rows(const Matrix& m) {
  if (m.empty()) throw DimensionError("logsumexp_rows: empty matrix");
  std::vector<float> out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    float mx = row[0];
    for (float v : row) mx = std::max(mx, v);
    double s = 0.0;
    for (float v : row) s += std::exp(static_cast<double>(v - mx));
    out[r] = mx + static_cast<float>(std::log(s));
  }
  return out;
}

inline void softmax_rows(const Matrix& logits, Matrix& out) {
  out.resize(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto in = logits.row(r);
    auto dst = out.row(r);
    float mx = in[0];
    for (float v : in) mx = std::max(mx, v);
    double s = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      const double e = std::exp(static_cast<double>(in[c] - mx));
      dst[c] = static_cast<float>(e);
      s += e;
    }
    for (std::size_t c = 0; c < in.size(); ++c) dst[c] = static_cast<float>(dst[c] / s);
  }
}

// mean of |tau - 1{diff < 0}| * diff^2
inline double expectile_loss(std::span<const float> diff, float tau) {
  if (tau <= 0.0f || tau >= 1.0f) throw ValidationError("expectile_loss: tau outside (0,1)");
  if (diff.empty()) return 0.0;
  double acc = 0.0;
  for (float d : diff) {
    const double w = d < 0.0f ? (1.0 - tau) : tau;
    acc += w * static_cast<double>(d) * static_cast<double>(d);
  }
  return acc / static_cast<double>(diff.size());
}

inline std::vector<float> make_quantile_taus(int n) {
  std::vector<float> taus(n);
  for (int i = 0; i < n; ++i) taus[i] = (static_cast<float>(i) + 0.5f) / static_cast<float>(n);
  return taus;
}

// Quantile-Huber objective averaged over all (quantile, target) pairs.
// kappa = 0 selects the pinball (pure quantile regression) limit.
// d_pred, when given, receives d(loss)/d(pred).
inline double quantile_huber_loss(const Matrix& pred, const Matrix& target,
                                  std::span<const float> taus, float kappa = 1.0f,
                                  Matrix* d_pred = nullptr) {
  if (pred.cols() != taus.size()) throw DimensionError("quantile_huber_loss: taus width mismatch");
  if (pred.rows() != target.rows()) throw DimensionError("quantile_huber_loss: batch mismatch");
  if (d_pred) d_pred->resize(pred.rows(), pred.cols());
  const double denom =
      static_cast<double>(pred.rows()) * static_cast<double>(pred.cols()) *
      static_cast<double>(target.cols());
  double acc = 0.0;
  for (std::size_t r = 0; r < pred.rows(); ++r) {
    for (std::size_t i = 0; i < pred.cols(); ++i) {
      const double tau = taus[i];
      double dsum = 0.0;
      for (std::size_t j = 0; j < target.cols(); ++j) {
        const double u = static_cast<double>(target(r, j)) - static_cast<double>(pred(r, i));
        const double w = u < 0.0 ? (1.0 - tau) : tau;
        double huber;
        double dhuber_du;
        if (kappa <= 0.0f) {
          huber = std::abs(u);
          dhuber_du = u < 0.0 ? -1.0 : 1.0;
        } else if (std::abs(u) <= kappa) {
          huber = 0.5 * u * u;
          dhuber_du = u;
        } else {
          huber = kappa * (std::abs(u) - 0.5 * kappa);
          dhuber_du = u < 0.0 ? -kappa : kappa;
        }
        acc += w * huber;
        dsum += -w * dhuber_du;  // d/d(pred) = -d/du
      }
      if (d_pred) (*d_pred)(r, i) = static_cast<float>(dsum / denom);
    }
  }
  return acc / denom;
}

inline int argmax_row(std::span<const float> row) {
  int best = 0;
  for (std::size_t i = 1; i < row.size(); ++i)
    if (row[i] > row[best]) best = static_cast<int>(i);
  return best;
}

}  // namespace ventrl::nn
