#pragma once

#include <cmath>
#include <vector>

#include "ventrl/actions/space.hpp"
#include "ventrl/core/nn.hpp"
#include "ventrl/core/optim.hpp"
#include "ventrl/learn/batch.hpp"
#include "ventrl/learn/config.hpp"

namespace ventrl::learn {

// Conservative Q-learning on the factored per-bin critic. Each critic maps
// the state to one value per action bin; combination values are the linear
// sum of the selected bins, restricted to the combinations seen in training.
struct FactoredCql {
  TrainConfig cfg;
  const actions::RestrictedActionSpace* space = nullptr;
  nn::MlpParams q1, q2, t1, t2;
  nn::AdamState opt1, opt2;

  struct Losses {
    double total = 0.0;
    double conservative1 = 0.0, conservative2 = 0.0;
    double mse1 = 0.0, mse2 = 0.0;
  };

  static FactoredCql make(const TrainConfig& cfg, int state_dim,
                          const actions::RestrictedActionSpace* space, Rng rng) {
    FactoredCql m;
    m.cfg = cfg;
    m.space = space;
    std::vector<int> dims{state_dim};
    dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
    dims.push_back(space->spec.one_hot_width());
    Rng r1 = rng.split("critic1");
    Rng r2 = rng.split("critic2");
    m.q1 = nn::MlpParams::make(dims, r1);
    m.q2 = nn::MlpParams::make(dims, r2);
    m.t1 = m.q1;
    m.t2 = m.q2;
    m.opt1.lr = cfg.lr;
    m.opt2.lr = cfg.lr;
    return m;
  }

  // Loss and gradients without applying the update; shared by update() and
  // the finite-difference tests.
  Losses compute(const Batch& batch, nn::MlpGrads* g1, nn::MlpGrads* g2) const {
    const std::size_t b = batch.states.rows();

    // TD target: r + gamma * (1-done) * max over A_r of elementwise min(Q1,Q2)
    std::vector<float> target(b);
    {
      const Matrix tf1 = nn::mlp_forward(t1, batch.next_states);
      const Matrix tf2 = nn::mlp_forward(t2, batch.next_states);
      const Matrix tq1 = actions::factored_q_values(tf1, *space);
      const Matrix tq2 = actions::factored_q_values(tf2, *space);
      for (std::size_t r = 0; r < b; ++r) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < tq1.cols(); ++j)
          best = std::max(best, static_cast<double>(std::min(tq1(r, j), tq2(r, j))));
        target[r] = batch.rewards[r] +
                    cfg.gamma * (1.0f - batch.done[r]) * static_cast<float>(best);
      }
    }

    Losses losses;
    auto critic_pass = [&](const nn::MlpParams& net, nn::MlpGrads* grads, double& cons,
                           double& mse) {
      nn::MlpCache cache;
      const Matrix per_bin = nn::mlp_forward(net, batch.states, &cache);
      const Matrix q_all = actions::factored_q_values(per_bin, *space);
      Matrix soft;
      nn::softmax_rows(q_all, soft);
      const auto lse = nn::logsumexp_rows(q_all);

      Matrix d_per_bin(b, per_bin.cols());
      cons = 0.0;
      mse = 0.0;
      for (std::size_t r = 0; r < b; ++r) {
        double pred = 0.0;
        for (std::size_t w = 0; w < per_bin.cols(); ++w)
          pred += static_cast<double>(per_bin(r, w)) * batch.onehot(r, w);
        cons += lse[r] - pred;
        const double err = pred - target[r];
        mse += err * err;
        if (grads) {
          const float mse_coeff = static_cast<float>(err / b);          // 0.5 * d(mse)/dpred
          const float cons_coeff = static_cast<float>(cfg.cql_alpha / b);
          for (std::size_t w = 0; w < per_bin.cols(); ++w)
            d_per_bin(r, w) = (mse_coeff - cons_coeff) * batch.onehot(r, w);
        }
      }
      cons /= static_cast<double>(b);
      mse /= static_cast<double>(b);
      if (grads) {
        // conservative term: softmax over combinations mapped back to bins
        Matrix soft_bins;
        matmul_into(soft_bins, soft, space->one_hot);
        const float scale = static_cast<float>(cfg.cql_alpha / b);
        for (std::size_t i = 0; i < d_per_bin.size(); ++i)
          d_per_bin.flat()[i] += scale * soft_bins.flat()[i];
        nn::mlp_backward(net, cache, d_per_bin, grads);
      }
    };

    critic_pass(q1, g1, losses.conservative1, losses.mse1);
    critic_pass(q2, g2, losses.conservative2, losses.mse2);
    losses.total = cfg.cql_alpha * (losses.conservative1 + losses.conservative2) +
                   0.5 * (losses.mse1 + losses.mse2);
    return losses;
  }

  Losses update(const Batch& batch) {
    nn::MlpGrads g1 = nn::MlpGrads::zeros_like(q1);
    nn::MlpGrads g2 = nn::MlpGrads::zeros_like(q2);
    const Losses losses = compute(batch, &g1, &g2);
    if (!std::isfinite(losses.total)) throw NumericError("FactoredCQL: non-finite loss");
    if (cfg.clip_grad > 0.0f) {
      nn::clip_grad_norm(nn::views_of(g1), cfg.clip_grad);
      nn::clip_grad_norm(nn::views_of(g2), cfg.clip_grad);
    }
    nn::adam_step(opt1, nn::views_of(q1), nn::const_views_of(g1));
    nn::adam_step(opt2, nn::views_of(q2), nn::const_views_of(g2));
    nn::polyak_update(nn::views_of(t1), nn::const_views_of(q1), cfg.polyak);
    nn::polyak_update(nn::views_of(t2), nn::const_views_of(q2), cfg.polyak);
    return losses;
  }

  // Greedy combination indices under min(Q1, Q2); only observed combinations
  // are ever selectable.
  std::vector<int> greedy(const Matrix& states) const {
    const Matrix qa = actions::factored_q_values(nn::mlp_forward(q1, states), *space);
    const Matrix qb = actions::factored_q_values(nn::mlp_forward(q2, states), *space);
    std::vector<int> out(states.rows());
    for (std::size_t r = 0; r < states.rows(); ++r) {
      int best = 0;
      float best_val = -std::numeric_limits<float>::infinity();
      for (std::size_t j = 0; j < qa.cols(); ++j) {
        const float v = std::min(qa(r, j), qb(r, j));
        if (v > best_val) {
          best_val = v;
          best = static_cast<int>(j);
        }
      }
      out[r] = best;
    }
    return out;
  }

  // min(Q1,Q2) evaluated at given one-hot actions.
  std::vector<float> q_at(const Matrix& states, const Matrix& onehot) const {
    const Matrix f1 = nn::mlp_forward(q1, states);
    const Matrix f2 = nn::mlp_forward(q2, states);
    std::vector<float> out(states.rows());
    for (std::size_t r = 0; r < states.rows(); ++r) {
      double a = 0.0, b = 0.0;
      for (std::size_t w = 0; w < f1.cols(); ++w) {
        a += static_cast<double>(f1(r, w)) * onehot(r, w);
        b += static_cast<double>(f2(r, w)) * onehot(r, w);
      }
      out[r] = static_cast<float>(std::min(a, b));
    }
    return out;
  }
};

}  // namespace ventrl::learn
