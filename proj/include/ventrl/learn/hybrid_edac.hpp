#pragma once

#include <cmath>
#include <vector>

#include "ventrl/core/nn.hpp"
#include "ventrl/core/optim.hpp"
#include "ventrl/learn/batch.hpp"
#include "ventrl/learn/config.hpp"

namespace ventrl::learn {

inline constexpr float kEdacLogStdMin = -3.0f;
inline constexpr float kEdacLogStdMax = 1.0f;

// SAC-style hybrid actor with an ensemble of critics and a gradient-diversity
// penalty. Critics take (state, continuous action, one-hot mode) on the input
// side; the diversity term is the mean pairwise cosine similarity of the
// critics' normalized action-input gradients at dataset pairs.
struct HybridEdac {
  TrainConfig cfg;
  nn::MlpParams actor;  // outputs mu(5), log_sigma(5), logits(2)
  std::vector<nn::MlpParams> critics, targets;
  float log_alpha_cont = 0.0f;
  float log_alpha_disc = 0.0f;
  nn::AdamState opt_actor, opt_alpha_cont, opt_alpha_disc;
  std::vector<nn::AdamState> opt_critics;

  struct Losses {
    double critic_total = 0.0;
    double td = 0.0;
    double diversity = 0.0;
    double actor_loss = 0.0;
    double alpha_cont_loss = 0.0, alpha_disc_loss = 0.0;
    double mean_abs_q = 0.0;
  };

  static HybridEdac make(const TrainConfig& cfg, int state_dim, Rng rng) {
    if (cfg.ensemble_size < 2) throw ConfigError("HybridEdac: ensemble size must be >= 2");
    HybridEdac m;
    m.cfg = cfg;
    const int critic_in = state_dim + data::kContActionCount + data::kModeCount;
    auto dims_for = [&](int in, int out) {
      std::vector<int> dims{in};
      dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
      dims.push_back(out);
      return dims;
    };
    Rng ra = rng.split("actor");
    m.actor = nn::MlpParams::make(
        dims_for(state_dim, 2 * data::kContActionCount + data::kModeCount), ra);
    for (int i = 0; i < cfg.ensemble_size; ++i) {
      Rng rc = rng.split("critic").split(static_cast<std::uint64_t>(i));
      m.critics.push_back(nn::MlpParams::make(dims_for(critic_in, 1), rc));
      m.targets.push_back(m.critics.back());
      nn::AdamState opt;
      opt.lr = cfg.edac_lr;
      m.opt_critics.push_back(opt);
    }
    m.opt_actor.lr = cfg.edac_lr;
    m.opt_alpha_cont.lr = cfg.edac_lr;
    m.opt_alpha_disc.lr = cfg.edac_lr;
    return m;
  }

  float alpha_cont() const { return std::exp(log_alpha_cont); }
  float alpha_disc() const { return std::exp(log_alpha_disc); }

  // One reparameterized actor evaluation. noise is the standard-normal draw
  // for the continuous head (b x 5); disc_uniform the per-row uniform for the
  // categorical sample. Deterministic mode uses the mean / the mode.
  struct ActorEval {
    Matrix mu, log_sigma_raw;  // b x 5 (raw, pre-clamp)
    Matrix sigma;              // b x 5, from the clamped log-sigma
    Matrix squashed;           // b x 5, tanh of mu + sigma * noise
    Matrix prob;               // b x 2
    Matrix logp_disc;          // b x 2, log(prob + 1e-8)
    Matrix disc_onehot;        // b x 2, sampled (or mode)
    std::vector<double> logp_cont;  // b
    Matrix noise;              // b x 5 (zero when deterministic)
    nn::MlpCache cache;
  };

  ActorEval actor_eval(const Matrix& states, const Matrix* noise,
                       std::span<const double> disc_uniform) const {
    const std::size_t b = states.rows();
    ActorEval ev;
    const Matrix out = nn::mlp_forward(actor, states, &ev.cache);
    ev.mu = columns(out, 0, data::kContActionCount);
    ev.log_sigma_raw = columns(out, data::kContActionCount, data::kContActionCount);
    Matrix logits = columns(out, 2 * data::kContActionCount, data::kModeCount);
    nn::softmax_rows(logits, ev.prob);
    ev.logp_disc = Matrix(b, data::kModeCount);
    for (std::size_t i = 0; i < ev.prob.size(); ++i)
      ev.logp_disc.flat()[i] = std::log(ev.prob.flat()[i] + 1e-8f);

    ev.sigma = Matrix(b, data::kContActionCount);
    ev.squashed = Matrix(b, data::kContActionCount);
    ev.noise = noise ? *noise : Matrix(b, data::kContActionCount, 0.0f);
    ev.logp_cont.assign(b, 0.0);
    for (std::size_t r = 0; r < b; ++r) {
      for (int i = 0; i < data::kContActionCount; ++i) {
        const float ls = std::clamp(ev.log_sigma_raw(r, i), kEdacLogStdMin, kEdacLogStdMax);
        const double sigma = std::exp(static_cast<double>(ls));
        ev.sigma(r, i) = static_cast<float>(sigma);
        const double xi = ev.noise(r, i);
        const double u = ev.mu(r, i) + sigma * xi;
        const float a = nn::tanh_open(u);
        ev.squashed(r, i) = a;
        ev.logp_cont[r] += -0.5 * xi * xi - ls - 0.5 * nn::kLogTwoPi;
        ev.logp_cont[r] -= std::log(1.0 - static_cast<double>(a) * a + 1e-6);
      }
    }
    ev.disc_onehot = Matrix(b, data::kModeCount, 0.0f);
    for (std::size_t r = 0; r < b; ++r) {
      int mode;
      if (disc_uniform.empty()) {
        mode = nn::argmax_row(ev.prob.row(r));
      } else {
        mode = disc_uniform[r] < ev.prob(r, 0) ? 0 : 1;
      }
      ev.disc_onehot(r, mode) = 1.0f;
    }
    return ev;
  }

  // Soft state value used in the critic target, following the hybrid-SAC
  // weighting: sum_d p_d * (q_min - a_c * p_d * logp_c - a_d * logp_d).
  std::vector<float> soft_value(const Matrix& next_states, const ActorEval& ev) const {
    const std::size_t b = next_states.rows();
    const Matrix next_in = hconcat(hconcat(next_states, ev.squashed), ev.disc_onehot);
    std::vector<float> q_min(b, std::numeric_limits<float>::infinity());
    for (const auto& target : targets) {
      const Matrix q = nn::mlp_forward(target, next_in);
      for (std::size_t r = 0; r < b; ++r) q_min[r] = std::min(q_min[r], q(r, 0));
    }
    std::vector<float> v(b);
    const double ac = alpha_cont(), ad = alpha_disc();
    for (std::size_t r = 0; r < b; ++r) {
      double acc = 0.0;
      for (int k = 0; k < data::kModeCount; ++k) {
        const double p = ev.prob(r, k);
        acc += p * (q_min[r] - ac * p * ev.logp_cont[r] - ad * ev.logp_disc(r, k));
      }
      v[r] = static_cast<float>(acc);
    }
    return v;
  }

  // TD + eta * diversity over the ensemble; gradients per critic.
  Losses critic_loss(const Batch& batch, std::span<const float> target,
                     std::vector<nn::MlpGrads>* grads) const {
    const std::size_t b = batch.states.rows();
    const int n = cfg.ensemble_size;
    const int action_width = data::kContActionCount + data::kModeCount;
    const int state_dim = static_cast<int>(batch.states.cols());
    const Matrix critic_in = hconcat(hconcat(batch.states, batch.cont), batch.disc);

    Losses losses;
    std::vector<nn::MlpCache> caches(n);
    std::vector<nn::InputGradCache> igcs(n);
    std::vector<Matrix> action_grads(n);  // b x action_width, raw
    std::vector<Matrix> unit_grads(n);    // normalized rows
    std::vector<std::vector<double>> norms(n, std::vector<double>(b));

    const Matrix ones = Matrix::ones(b, 1);
    for (int i = 0; i < n; ++i) {
      const Matrix q = nn::mlp_forward(critics[i], critic_in, &caches[i]);
      Matrix upstream(b, 1);
      double mse = 0.0;
      for (std::size_t r = 0; r < b; ++r) {
        const double err = q(r, 0) - target[r];
        mse += err * err;
        losses.mean_abs_q += std::abs(q(r, 0)) / static_cast<double>(b * n);
        upstream(r, 0) = static_cast<float>(2.0 * err / static_cast<double>(b));
      }
      losses.td += mse / static_cast<double>(b);
      if (grads) nn::mlp_backward(critics[i], caches[i], upstream, &(*grads)[i]);

      // input gradient of the summed outputs, action columns only
      Matrix input_grads;
      nn::mlp_backward(critics[i], caches[i], ones, nullptr, &input_grads, &igcs[i]);
      action_grads[i] = columns(input_grads, state_dim, action_width);
      unit_grads[i] = action_grads[i];
      for (std::size_t r = 0; r < b; ++r) {
        double s = 0.0;
        for (int c = 0; c < action_width; ++c)
          s += static_cast<double>(action_grads[i](r, c)) * action_grads[i](r, c);
        s = std::sqrt(s);
        norms[i][r] = s;
        const float inv = static_cast<float>(1.0 / (s + 1e-10));
        for (int c = 0; c < action_width; ++c) unit_grads[i](r, c) *= inv;
      }
    }

    // mean over rows and ordered pairs of cosine similarities
    const double pair_denom = static_cast<double>(b) * n * (n - 1);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        for (std::size_t r = 0; r < b; ++r) {
          double dot = 0.0;
          for (int c = 0; c < action_width; ++c)
            dot += static_cast<double>(unit_grads[i](r, c)) * unit_grads[j](r, c);
          losses.diversity += dot / pair_denom;
        }
      }

    if (grads) {
      for (int i = 0; i < n; ++i) {
        // dL/d(unit_i) = eta * 2/(b n (n-1)) * sum_{j != i} unit_j
        Matrix d_unit(b, action_width, 0.0f);
        for (int j = 0; j < n; ++j) {
          if (j == i) continue;
          for (std::size_t c = 0; c < d_unit.size(); ++c)
            d_unit.flat()[c] += unit_grads[j].flat()[c];
        }
        const float scale = static_cast<float>(2.0 * cfg.eta / pair_denom);
        for (float& v : d_unit.flat()) v *= scale;

        // back through the row normalization; rows with a vanished gradient
        // contribute nothing (their cosine terms are zero already)
        Matrix d_raw(b, action_width, 0.0f);
        for (std::size_t r = 0; r < b; ++r) {
          const double s = norms[i][r];
          if (s < 1e-8) continue;
          const double inv = 1.0 / (s + 1e-10);
          double dot = 0.0;
          for (int c = 0; c < action_width; ++c)
            dot += static_cast<double>(d_unit(r, c)) * action_grads[i](r, c);
          for (int c = 0; c < action_width; ++c)
            d_raw(r, c) = static_cast<float>(
                d_unit(r, c) * inv - action_grads[i](r, c) * dot * inv * inv / s);
        }
        Matrix d_input(b, critic_in.cols(), 0.0f);
        for (std::size_t r = 0; r < b; ++r)
          for (int c = 0; c < action_width; ++c) d_input(r, c + state_dim) = d_raw(r, c);
        nn::mlp_input_grad_backward(critics[i], caches[i], igcs[i], d_input, (*grads)[i]);
      }
    }
    losses.critic_total = losses.td + cfg.eta * losses.diversity;
    return losses;
  }

  // Actor objective per the hybrid-SAC weighting; Qmin is reparameterized
  // through the continuous action only (the sampled mode is a constant).
  double actor_loss(const Matrix& states, const ActorEval& ev, nn::MlpGrads* grads) const {
    const std::size_t b = states.rows();
    const int state_dim = static_cast<int>(states.cols());
    const Matrix actor_in = hconcat(hconcat(states, ev.squashed), ev.disc_onehot);
    const int n = cfg.ensemble_size;

    std::vector<float> q_min(b, std::numeric_limits<float>::infinity());
    std::vector<int> argmin(b, 0);
    std::vector<nn::MlpCache> caches(n);
    for (int i = 0; i < n; ++i) {
      const Matrix q = nn::mlp_forward(critics[i], actor_in, &caches[i]);
      for (std::size_t r = 0; r < b; ++r)
        if (q(r, 0) < q_min[r]) {
          q_min[r] = q(r, 0);
          argmin[r] = i;
        }
    }

    const double ac = alpha_cont(), ad = alpha_disc();
    double loss = 0.0;
    for (std::size_t r = 0; r < b; ++r) {
      double s2 = 0.0;
      for (int k = 0; k < data::kModeCount; ++k) {
        const double p = ev.prob(r, k);
        loss += p * (ad * ev.logp_disc(r, k) - q_min[r]);
        s2 += p * p;
      }
      loss += ac * ev.logp_cont[r] * s2 - q_min[r];
    }
    loss /= static_cast<double>(b);
    if (!grads) return loss;

    // dL/d(squashed action) via the per-row argmin critic
    Matrix d_action(b, data::kContActionCount, 0.0f);
    for (int i = 0; i < n; ++i) {
      Matrix upstream(b, 1, 0.0f);
      bool used = false;
      for (std::size_t r = 0; r < b; ++r)
        if (argmin[r] == i) {
          upstream(r, 0) = static_cast<float>(-2.0 / static_cast<double>(b));
          used = true;
        }
      if (!used) continue;
      Matrix input_grads;
      nn::mlp_backward(critics[i], caches[i], upstream, nullptr, &input_grads);
      for (std::size_t r = 0; r < b; ++r)
        if (argmin[r] == i)
          for (int c = 0; c < data::kContActionCount; ++c)
            d_action(r, c) += input_grads(r, state_dim + c);
    }

    // assemble the upstream on the actor outputs [mu, log_sigma, logits]
    Matrix upstream(b, 2 * data::kContActionCount + data::kModeCount, 0.0f);
    for (std::size_t r = 0; r < b; ++r) {
      double s2 = 0.0;
      for (int k = 0; k < data::kModeCount; ++k) s2 += ev.prob(r, k) * ev.prob(r, k);

      // continuous path: logp_c entropy term + Qmin through tanh(mu + sigma*xi)
      const double dlogp_scale = ac * s2 / static_cast<double>(b);
      for (int i = 0; i < data::kContActionCount; ++i) {
        const double a = ev.squashed(r, i);
        const double one_minus_a2 = 1.0 - a * a;
        const double guard = one_minus_a2 + 1e-6;
        const double sigma = ev.sigma(r, i);
        const double xi = ev.noise(r, i);
        const bool clamp_interior = ev.log_sigma_raw(r, i) > kEdacLogStdMin &&
                                    ev.log_sigma_raw(r, i) < kEdacLogStdMax;
        const double dlogp_dmu = 2.0 * a * one_minus_a2 / guard;
        const double dlogp_dls = -1.0 + 2.0 * a * one_minus_a2 * sigma * xi / guard;
        const double da_dmu = one_minus_a2;
        const double da_dls = one_minus_a2 * sigma * xi;
        double dmu = dlogp_scale * dlogp_dmu + d_action(r, i) * da_dmu;
        double dls = dlogp_scale * dlogp_dls + d_action(r, i) * da_dls;
        upstream(r, i) = static_cast<float>(dmu);
        upstream(r, data::kContActionCount + i) = clamp_interior ? static_cast<float>(dls) : 0.0f;
      }

      // discrete path through the softmax
      double csum = 0.0;
      std::array<double, data::kModeCount> cvec{};
      for (int k = 0; k < data::kModeCount; ++k) {
        const double p = ev.prob(r, k);
        cvec[k] = ad * (ev.logp_disc(r, k) + p / (p + 1e-8)) +
                  2.0 * ac * ev.logp_cont[r] * p - 2.0 * q_min[r];
        csum += cvec[k] * p;
      }
      for (int k = 0; k < data::kModeCount; ++k)
        upstream(r, 2 * data::kContActionCount + k) =
            static_cast<float>(ev.prob(r, k) * (cvec[k] - csum) / static_cast<double>(b));
    }
    nn::mlp_backward(actor, ev.cache, upstream, grads);
    return loss;
  }

  std::pair<double, double> alpha_losses(const ActorEval& ev) const {
    const std::size_t b = ev.prob.rows();
    double sum_cont = 0.0, sum_disc = 0.0;
    for (std::size_t r = 0; r < b; ++r) {
      for (int k = 0; k < data::kModeCount; ++k) {
        const double p = ev.prob(r, k);
        sum_cont += p * (p * ev.logp_cont[r] + cfg.target_entropy_cont);
        sum_disc += p * (ev.logp_disc(r, k) + cfg.target_entropy_disc);
      }
    }
    sum_cont /= static_cast<double>(b);
    sum_disc /= static_cast<double>(b);
    return {-log_alpha_cont * sum_cont, -log_alpha_disc * sum_disc};
  }

  Losses update(const Batch& batch, Rng& rng) {
    const std::size_t b = batch.states.rows();

    auto draw_noise = [&](std::size_t rows) {
      Matrix m(rows, data::kContActionCount);
      for (float& v : m.flat()) v = static_cast<float>(rng.normal());
      return m;
    };
    auto draw_uniform = [&](std::size_t rows) {
      std::vector<double> u(rows);
      for (double& v : u) v = rng.uniform();
      return u;
    };

    // temperatures and actor share one evaluation at the batch states
    const Matrix noise = draw_noise(b);
    const auto uniforms = draw_uniform(b);
    ActorEval ev = actor_eval(batch.states, &noise, uniforms);

    Losses losses;
    {
      auto [lc, ld] = alpha_losses(ev);
      losses.alpha_cont_loss = lc;
      losses.alpha_disc_loss = ld;
      // analytic gradients of the dual objectives with respect to log-alpha
      double gc = 0.0, gd = 0.0;
      for (std::size_t r = 0; r < b; ++r)
        for (int k = 0; k < data::kModeCount; ++k) {
          const double p = ev.prob(r, k);
          gc += -p * (p * ev.logp_cont[r] + cfg.target_entropy_cont) / static_cast<double>(b);
          gd += -p * (ev.logp_disc(r, k) + cfg.target_entropy_disc) / static_cast<double>(b);
        }
      const float gcf = static_cast<float>(gc), gdf = static_cast<float>(gd);
      nn::adam_step(opt_alpha_cont, {std::span<float>(&log_alpha_cont, 1)},
                    {std::span<const float>(&gcf, 1)});
      nn::adam_step(opt_alpha_disc, {std::span<float>(&log_alpha_disc, 1)},
                    {std::span<const float>(&gdf, 1)});
    }

    {
      nn::MlpGrads ga = nn::MlpGrads::zeros_like(actor);
      losses.actor_loss = actor_loss(batch.states, ev, &ga);
      nn::adam_step(opt_actor, nn::views_of(actor), nn::const_views_of(ga));
    }

    {
      const Matrix next_noise = draw_noise(b);
      const auto next_uniforms = draw_uniform(b);
      const ActorEval next_ev = actor_eval(batch.next_states, &next_noise, next_uniforms);
      const auto v_next = soft_value(batch.next_states, next_ev);
      std::vector<float> target(b);
      for (std::size_t r = 0; r < b; ++r)
        target[r] = batch.rewards[r] + cfg.gamma * (1.0f - batch.done[r]) * v_next[r];

      std::vector<nn::MlpGrads> grads;
      for (const auto& c : critics) grads.push_back(nn::MlpGrads::zeros_like(c));
      const Losses closses = critic_loss(batch, target, &grads);
      losses.critic_total = closses.critic_total;
      losses.td = closses.td;
      losses.diversity = closses.diversity;
      losses.mean_abs_q = closses.mean_abs_q;
      if (!std::isfinite(losses.critic_total) || losses.critic_total > 1e6)
        throw NumericError("HybridEDAC: critic loss diverged (loss=" +
                           format_g9(losses.critic_total) + ")");
      if (cfg.q_abs_limit > 0.0f && losses.mean_abs_q > cfg.q_abs_limit)
        throw NumericError("HybridEDAC: runaway Q values (mean |Q|=" +
                           format_g9(losses.mean_abs_q) + " exceeds " +
                           format_g9(cfg.q_abs_limit) + ")");
      for (int i = 0; i < cfg.ensemble_size; ++i) {
        if (cfg.clip_grad > 0.0f) nn::clip_grad_norm(nn::views_of(grads[i]), cfg.clip_grad);
        nn::adam_step(opt_critics[i], nn::views_of(critics[i]), nn::const_views_of(grads[i]));
        nn::polyak_update(nn::views_of(targets[i]), nn::const_views_of(critics[i]), cfg.polyak);
      }
    }
    return losses;
  }

  void act_batch(const Matrix& states, bool deterministic, Rng* rng, Matrix& cont,
                 Matrix& disc) const {
    Matrix noise(states.rows(), data::kContActionCount, 0.0f);
    std::vector<double> uniforms;
    if (!deterministic && rng) {
      for (float& v : noise.flat()) v = static_cast<float>(rng->normal());
      uniforms.resize(states.rows());
      for (double& v : uniforms) v = rng->uniform();
    }
    const ActorEval ev = actor_eval(states, &noise, uniforms);
    cont = ev.squashed;
    disc = ev.disc_onehot;
  }
};

}  // namespace ventrl::learn
