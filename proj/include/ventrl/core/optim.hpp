#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "ventrl/core/errors.hpp"

namespace ventrl::nn {

using ParamViews = std::vector<std::span<float>>;
using GradViews = std::vector<std::span<const float>>;

struct AdamState {
  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  long step_count = 0;
  std::vector<std::vector<float>> m;
  std::vector<std::vector<float>> v;
};

// Standard Adam with bias correction. Rejects non-finite gradients so a single
// bad batch cannot poison the accumulators.
inline void adam_step(AdamState& state, const ParamViews& params, const GradViews& grads) {
  if (params.size() != grads.size()) throw DimensionError("adam_step: tensor count mismatch");
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i].size(), 0.0f);
      state.v[i].assign(params[i].size(), 0.0f);
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != grads[i].size())
      throw DimensionError("adam_step: tensor " + std::to_string(i) + " shape mismatch");
    for (float g : grads[i]) {
      if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient, update rejected");
    }
  }
  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(static_cast<double>(state.beta1), state.step_count);
  const double bc2 = 1.0 - std::pow(static_cast<double>(state.beta2), state.step_count);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.m[i];
    auto& v = state.v[i];
    auto p = params[i];
    auto g = grads[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0f - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0f - state.beta2) * g[j] * g[j];
      const double mh = m[j] / bc1;
      const double vh = v[j] / bc2;
      p[j] -= static_cast<float>(state.lr * mh / (std::sqrt(vh) + state.eps));
    }
  }
}

inline double grad_l2_norm(const GradViews& grads) {
  double acc = 0.0;
  for (const auto& g : grads)
    for (float x : g) acc += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(acc);
}

// Rescales so the global L2 norm is at most max_norm; direction preserved.
inline void clip_grad_norm(const ParamViews& grads, float max_norm) {
  if (max_norm <= 0.0f) throw ValidationError("clip_grad_norm: max_norm must be positive");
  GradViews views(grads.begin(), grads.end());
  const double norm = grad_l2_norm(views);
  if (norm <= static_cast<double>(max_norm) || norm == 0.0) return;
  const float scale = static_cast<float>(max_norm / norm);
  for (auto& g : grads)
    for (float& x : g) x *= scale;
}

// target <- (1 - coeff) * target + coeff * online
inline void polyak_update(const ParamViews& target, const GradViews& online, float coeff) {
  if (coeff <= 0.0f || coeff > 1.0f) throw ValidationError("polyak_update: coeff outside (0,1]");
  if (target.size() != online.size()) throw DimensionError("polyak_update: tensor count mismatch");
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i].size() != online[i].size())
      throw DimensionError("polyak_update: tensor shape mismatch");
    for (std::size_t j = 0; j < target[i].size(); ++j)
      target[i][j] = (1.0f - coeff) * target[i][j] + coeff * online[i][j];
  }
}

template <typename T>
ParamViews views_of(T& holder) {
  ParamViews out;
  holder.for_each_tensor([&](std::span<float> s) { out.push_back(s); });
  return out;
}

template <typename T>
GradViews const_views_of(const T& holder) {
  GradViews out;
  holder.for_each_tensor([&](std::span<const float> s) { out.push_back(s); });
  return out;
}

}  // namespace ventrl::nn
