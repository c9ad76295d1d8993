#pragma once

#include <cmath>
#include <vector>

#include "ventrl/core/nn.hpp"
#include "ventrl/core/optim.hpp"
#include "ventrl/learn/batch.hpp"
#include "ventrl/learn/config.hpp"

namespace ventrl::learn {

inline constexpr float kExpAdvMax = 100.0f;
inline constexpr float kIqlLogStdMin = -20.0f;
inline constexpr float kIqlLogStdMax = 2.0f;

// Implicit Q-learning with hybrid actions: twin critics over
// (state, continuous settings, one-hot mode), an expectile value function,
// and advantage-weighted likelihood on both action heads. Policy improvement
// only ever evaluates dataset actions.
struct HybridIql {
  TrainConfig cfg;
  nn::MlpParams value, q1, q2, tq1, tq2;
  nn::MlpParams actor;             // outputs mean(5), logits(2)
  std::vector<float> log_std;      // state-independent, clamped to [-20, 2]
  nn::AdamState opt_value, opt_critic, opt_actor;
  long skipped_batches = 0;

  struct Losses {
    double value_loss = 0.0;
    double critic_loss = 0.0;
    double actor_loss = 0.0;
    double mean_advantage = 0.0;
    bool skipped = false;
  };

  static HybridIql make(const TrainConfig& cfg, int state_dim, Rng rng) {
    HybridIql m;
    m.cfg = cfg;
    const int critic_in = state_dim + data::kContActionCount + data::kModeCount;
    auto dims_for = [&](int in, int out) {
      std::vector<int> dims{in};
      dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
      dims.push_back(out);
      return dims;
    };
    Rng rv = rng.split("value"), r1 = rng.split("critic1"), r2 = rng.split("critic2"),
        ra = rng.split("actor");
    m.value = nn::MlpParams::make(dims_for(state_dim, 1), rv);
    m.q1 = nn::MlpParams::make(dims_for(critic_in, 1), r1);
    m.q2 = nn::MlpParams::make(dims_for(critic_in, 1), r2);
    m.tq1 = m.q1;
    m.tq2 = m.q2;
    m.actor = nn::MlpParams::make(dims_for(state_dim, data::kContActionCount + data::kModeCount), ra);
    m.log_std.assign(data::kContActionCount, 0.0f);
    m.opt_value.lr = cfg.value_lr;
    m.opt_critic.lr = cfg.critic_lr;
    m.opt_actor.lr = cfg.actor_lr;
    return m;
  }

  nn::ParamViews critic_views() {
    auto v = nn::views_of(q1);
    for (auto s : nn::views_of(q2)) v.push_back(s);
    return v;
  }
  nn::GradViews critic_const_views() const {
    auto v = nn::const_views_of(q1);
    for (auto s : nn::const_views_of(q2)) v.push_back(s);
    return v;
  }

  // --- loss pieces, exposed for the gradient tests -------------------------

  double value_loss(const Matrix& states, std::span<const float> adv_target,
                    nn::MlpGrads* grads, std::vector<float>* advantages = nullptr) const {
    const std::size_t b = states.rows();
    nn::MlpCache cache;
    const Matrix v = nn::mlp_forward(value, states, &cache);
    std::vector<float> diff(b);
    for (std::size_t r = 0; r < b; ++r) diff[r] = adv_target[r] - v(r, 0);
    if (advantages) *advantages = diff;
    const double loss = nn::expectile_loss(diff, cfg.expectile_tau);
    if (grads) {
      Matrix upstream(b, 1);
      for (std::size_t r = 0; r < b; ++r) {
        const double w = diff[r] < 0.0f ? (1.0 - cfg.expectile_tau) : cfg.expectile_tau;
        upstream(r, 0) = static_cast<float>(-2.0 * w * diff[r] / static_cast<double>(b));
      }
      nn::mlp_backward(value, cache, upstream, grads);
    }
    return loss;
  }

  double critic_loss(const Matrix& critic_in, std::span<const float> target,
                     nn::MlpGrads* g1, nn::MlpGrads* g2) const {
    const std::size_t b = critic_in.rows();
    double loss = 0.0;
    auto pass = [&](const nn::MlpParams& net, nn::MlpGrads* grads) {
      nn::MlpCache cache;
      const Matrix q = nn::mlp_forward(net, critic_in, &cache);
      Matrix upstream(b, 1);
      double mse = 0.0;
      for (std::size_t r = 0; r < b; ++r) {
        const double err = q(r, 0) - target[r];
        mse += err * err;
        upstream(r, 0) = static_cast<float>(2.0 * err / static_cast<double>(b));
      }
      if (grads) nn::mlp_backward(net, cache, upstream, grads);
      return mse / static_cast<double>(b);
    };
    loss += pass(q1, g1);
    loss += pass(q2, g2);
    return loss;
  }

  double actor_loss(const Matrix& states, const Matrix& cont, const Matrix& disc,
                    std::span<const float> advantages, nn::MlpGrads* grads,
                    std::vector<float>* log_std_grads) const {
    const std::size_t b = states.rows();
    nn::MlpCache cache;
    const Matrix out = nn::mlp_forward(actor, states, &cache);

    std::vector<double> sigma(data::kContActionCount), clamped(data::kContActionCount);
    std::vector<bool> clamp_active(data::kContActionCount);
    for (int i = 0; i < data::kContActionCount; ++i) {
      clamped[i] = std::clamp(log_std[i], kIqlLogStdMin, kIqlLogStdMax);
      clamp_active[i] = log_std[i] > kIqlLogStdMin && log_std[i] < kIqlLogStdMax;
      sigma[i] = std::exp(clamped[i]);
    }

    Matrix upstream(b, out.cols());
    if (log_std_grads) log_std_grads->assign(data::kContActionCount, 0.0f);
    double loss = 0.0;
    Matrix soft;
    {
      Matrix logits = columns(out, data::kContActionCount, data::kModeCount);
      nn::softmax_rows(logits, soft);
    }
    for (std::size_t r = 0; r < b; ++r) {
      const float w = std::min(std::exp(cfg.beta * advantages[r]), kExpAdvMax);
      double neg_logp = 0.0;
      for (int i = 0; i < data::kContActionCount; ++i) {
        const double z = (static_cast<double>(cont(r, i)) - out(r, i)) / sigma[i];
        neg_logp += 0.5 * z * z + clamped[i] + 0.5 * nn::kLogTwoPi;
        upstream(r, i) = static_cast<float>(w * (-z / sigma[i]) / static_cast<double>(b));
        if (log_std_grads && clamp_active[i])
          (*log_std_grads)[i] += static_cast<float>(w * (1.0 - z * z) / static_cast<double>(b));
      }
      for (int k = 0; k < data::kModeCount; ++k) {
        const double p = soft(r, k);
        neg_logp -= disc(r, k) * std::log(std::max(p, 1e-12));
        upstream(r, data::kContActionCount + k) =
            static_cast<float>(w * (p - disc(r, k)) / static_cast<double>(b));
      }
      loss += w * neg_logp;
    }
    loss /= static_cast<double>(b);
    if (grads) nn::mlp_backward(actor, cache, upstream, grads);
    return loss;
  }

  // --- one training step: V, then Q, then actor, then Polyak ---------------

  Losses update(const Batch& batch) {
    const std::size_t b = batch.states.rows();
    Losses losses;

    // advantages from the target critics and the pre-update value net
    const Matrix critic_in = hconcat(hconcat(batch.states, batch.cont), batch.disc);
    std::vector<float> adv_target(b);
    {
      const Matrix a = nn::mlp_forward(tq1, critic_in);
      const Matrix c = nn::mlp_forward(tq2, critic_in);
      for (std::size_t r = 0; r < b; ++r) adv_target[r] = std::min(a(r, 0), c(r, 0));
    }

    std::vector<float> advantages;
    nn::MlpGrads gv = nn::MlpGrads::zeros_like(value);
    losses.value_loss = value_loss(batch.states, adv_target, &gv, &advantages);
    for (float a : advantages) {
      if (!std::isfinite(a)) {
        ++skipped_batches;
        losses.skipped = true;
        return losses;
      }
      losses.mean_advantage += a / static_cast<double>(b);
    }
    nn::adam_step(opt_value, nn::views_of(value), nn::const_views_of(gv));

    // critic regression toward r + gamma * (1-done) * V(s')
    std::vector<float> target(b);
    {
      const Matrix vn = nn::mlp_forward(value, batch.next_states);
      for (std::size_t r = 0; r < b; ++r)
        target[r] = batch.rewards[r] + cfg.gamma * (1.0f - batch.done[r]) * vn(r, 0);
    }
    nn::MlpGrads g1 = nn::MlpGrads::zeros_like(q1);
    nn::MlpGrads g2 = nn::MlpGrads::zeros_like(q2);
    losses.critic_loss = critic_loss(critic_in, target, &g1, &g2);
    if (cfg.clip_grad > 0.0f) {
      auto views = nn::views_of(g1);
      for (auto s : nn::views_of(g2)) views.push_back(s);
      nn::clip_grad_norm(views, cfg.clip_grad);
    }
    {
      auto gviews = nn::const_views_of(g1);
      for (auto s : nn::const_views_of(g2)) gviews.push_back(s);
      nn::adam_step(opt_critic, critic_views(), gviews);
    }

    // advantage-weighted likelihood over both heads, dataset actions only
    nn::MlpGrads ga = nn::MlpGrads::zeros_like(actor);
    std::vector<float> gls;
    losses.actor_loss = actor_loss(batch.states, batch.cont, batch.disc, advantages, &ga, &gls);
    {
      auto params = nn::views_of(actor);
      params.push_back(std::span<float>(log_std));
      auto grads = nn::const_views_of(ga);
      grads.push_back(std::span<const float>(gls));
      nn::adam_step(opt_actor, params, grads);
    }

    nn::polyak_update(nn::views_of(tq1), nn::const_views_of(q1), cfg.polyak);
    nn::polyak_update(nn::views_of(tq2), nn::const_views_of(q2), cfg.polyak);
    if (!std::isfinite(losses.value_loss + losses.critic_loss + losses.actor_loss))
      throw NumericError("HybridIQL: non-finite loss");
    return losses;
  }

  // Deterministic heads: tanh of the Gaussian mean, argmax of the logits.
  void act_batch(const Matrix& states, bool deterministic, Rng* rng, Matrix& cont,
                 Matrix& disc) const {
    const Matrix out = nn::mlp_forward(actor, states);
    cont.resize(states.rows(), data::kContActionCount);
    disc.resize(states.rows(), data::kModeCount);
    disc.fill(0.0f);
    Matrix soft;
    {
      Matrix logits = columns(out, data::kContActionCount, data::kModeCount);
      nn::softmax_rows(logits, soft);
    }
    for (std::size_t r = 0; r < states.rows(); ++r) {
      for (int i = 0; i < data::kContActionCount; ++i) {
        double u = out(r, i);
        if (!deterministic) {
          const double sigma = std::exp(std::clamp(log_std[i], kIqlLogStdMin, kIqlLogStdMax));
          u += sigma * rng->normal();
        }
        cont(r, i) = nn::tanh_open(u);
      }
      int mode = nn::argmax_row(soft.row(r));
      if (!deterministic && rng) mode = rng->uniform() < soft(r, 0) ? 0 : 1;
      disc(r, mode) = 1.0f;
    }
  }
};

}  // namespace ventrl::learn
