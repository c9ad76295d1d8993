#pragma once

#include <cmath>
#include <vector>

#include "ventrl/core/nn.hpp"
#include "ventrl/core/optim.hpp"
#include "ventrl/learn/batch.hpp"
#include "ventrl/learn/train.hpp"

namespace ventrl::ope {

using learn::PolicyFn;
using learn::TransitionTable;

struct FqeConfig {
  long steps = 20000;
  float lr = 1e-3f;
  float gamma = 0.99f;
  float polyak = 0.005f;
  int batch_size = 256;
  std::vector<int> hidden = {256, 256, 256, 256};
  int n_quantiles = 1;  // 1 = plain FQE, >1 = distributional (quantile regression)
  float kappa = 1.0f;
  double divergence_limit = 1e8;
  long log_interval = 200;
};

// Fitted Q-evaluation of a fixed policy: iterated regression of
// Q(s,a) toward r + gamma * Q_target(s', pi(s')). The distributional variant
// regresses N quantiles with the quantile-Huber objective.
struct FqeModel {
  FqeConfig cfg;
  nn::MlpParams q, tq;
  nn::AdamState opt;
  std::vector<float> taus;
  bool fitted = false;

  static FqeModel make(const FqeConfig& cfg, int state_dim, Rng rng) {
    FqeModel m;
    m.cfg = cfg;
    std::vector<int> dims{state_dim + data::kContActionCount + data::kModeCount};
    dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
    dims.push_back(cfg.n_quantiles);
    Rng r = rng.split("fqe");
    m.q = nn::MlpParams::make(dims, r);
    m.tq = m.q;
    m.opt.lr = cfg.lr;
    m.taus = nn::make_quantile_taus(cfg.n_quantiles);
    return m;
  }

  // Expected value at (s, a): the quantile mean (identity for one quantile).
  std::vector<float> q_values(const Matrix& states, const Matrix& cont,
                              const Matrix& disc) const {
    const Matrix out = nn::mlp_forward(q, hconcat(hconcat(states, cont), disc));
    std::vector<float> v(out.rows());
    for (std::size_t r = 0; r < out.rows(); ++r) {
      double acc = 0.0;
      for (float x : out.row(r)) acc += x;
      v[r] = static_cast<float>(acc / static_cast<double>(out.cols()));
    }
    return v;
  }

  // Quantiles sorted non-decreasingly for reporting.
  Matrix quantiles(const Matrix& states, const Matrix& cont, const Matrix& disc) const {
    Matrix out = nn::mlp_forward(q, hconcat(hconcat(states, cont), disc));
    for (std::size_t r = 0; r < out.rows(); ++r) {
      auto row = out.row(r);
      std::sort(row.begin(), row.end());
    }
    return out;
  }
};

namespace detail {

// next-state action source: either the policy or the dataset (behavior)
inline void next_actions(const TransitionTable& table, const PolicyFn* policy, Matrix& cont,
                         Matrix& disc) {
  if (policy) {
    (*policy)(table.next_states, cont, disc);
  } else {
    cont = table.next_cont;
    disc = table.next_disc;
  }
}

}  // namespace detail

// policy == nullptr evaluates the behavior policy (targets use the dataset's
// next action). Throws NumericError with "FQE diverged" on runaway loss.
inline FqeModel fqe_fit(const PolicyFn* policy, const TransitionTable& table,
                        const FqeConfig& cfg, std::uint64_t seed,
                        std::string* loss_log = nullptr) {
  Rng run(seed);
  FqeModel m = FqeModel::make(cfg, table.state_dim(), run.split("init"));
  Rng batches = run.split("batches");

  Matrix next_cont, next_disc;
  detail::next_actions(table, policy, next_cont, next_disc);
  const Matrix inputs = hconcat(hconcat(table.states, table.cont), table.disc);
  const Matrix next_inputs = hconcat(hconcat(table.next_states, next_cont), next_disc);

  const int nq = cfg.n_quantiles;
  if (loss_log) *loss_log = "step,loss\n";
  for (long step = 1; step <= cfg.steps; ++step) {
    const auto idx = learn::sample_indices(table.rows(), cfg.batch_size, batches);
    Matrix x(idx.size(), inputs.cols()), nx(idx.size(), inputs.cols());
    std::vector<float> r(idx.size()), done(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      std::copy(inputs.row(idx[i]).begin(), inputs.row(idx[i]).end(), x.row(i).begin());
      std::copy(next_inputs.row(idx[i]).begin(), next_inputs.row(idx[i]).end(), nx.row(i).begin());
      r[i] = table.rewards[idx[i]];
      done[i] = table.done[idx[i]];
    }

    const Matrix next_q = nn::mlp_forward(m.tq, nx);
    Matrix target(idx.size(), nq);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (int j = 0; j < nq; ++j)
        target(i, j) = r[i] + cfg.gamma * (1.0f - done[i]) * next_q(i, j);

    nn::MlpCache cache;
    const Matrix pred = nn::mlp_forward(m.q, x, &cache);
    double loss;
    Matrix upstream(idx.size(), nq);
    if (nq == 1) {
      loss = 0.0;
      for (std::size_t i = 0; i < idx.size(); ++i) {
        const double err = pred(i, 0) - target(i, 0);
        loss += err * err / static_cast<double>(idx.size());
        upstream(i, 0) = static_cast<float>(2.0 * err / static_cast<double>(idx.size()));
      }
    } else {
      loss = nn::quantile_huber_loss(pred, target, m.taus, cfg.kappa, &upstream);
    }
    if (!std::isfinite(loss) || loss > cfg.divergence_limit)
      throw NumericError("FQE diverged (loss=" + format_g9(loss) + " at step " +
                         std::to_string(step) + ")");
    if (loss_log && (step % cfg.log_interval == 0 || step == 1))
      *loss_log += std::to_string(step) + "," + format_g9(loss) + "\n";

    nn::MlpGrads grads = nn::MlpGrads::zeros_like(m.q);
    nn::mlp_backward(m.q, cache, upstream, &grads);
    nn::adam_step(m.opt, nn::views_of(m.q), nn::const_views_of(grads));
    nn::polyak_update(nn::views_of(m.tq), nn::const_views_of(m.q), cfg.polyak);
  }
  m.fitted = true;
  return m;
}

// Mean Q at the initial states of held-out episodes, actions from the policy.
inline double estimate_v_pi(const FqeModel& m, const TransitionTable& test,
                            const PolicyFn& policy) {
  if (!m.fitted) throw ValidationError("estimate_v_pi: model not fitted");
  if (test.episode_first_row.empty()) throw ValidationError("estimate_v_pi: empty test set");
  const std::size_t n = test.episode_first_row.size();
  Matrix s0(n, test.states.cols());
  for (std::size_t i = 0; i < n; ++i)
    std::copy(test.states.row(test.episode_first_row[i]).begin(),
              test.states.row(test.episode_first_row[i]).end(), s0.row(i).begin());
  Matrix cont, disc;
  policy(s0, cont, disc);
  const auto q = m.q_values(s0, cont, disc);
  double acc = 0.0;
  for (float v : q) acc += v;
  return acc / static_cast<double>(n);
}

// Behavior variant: mean Q at (s0, a0) with the dataset's own first action.
inline double estimate_v_behavior(const FqeModel& m, const TransitionTable& test) {
  if (!m.fitted) throw ValidationError("estimate_v_behavior: model not fitted");
  if (test.episode_first_row.empty()) throw ValidationError("estimate_v_behavior: empty test set");
  const std::size_t n = test.episode_first_row.size();
  Matrix s0(n, test.states.cols()), cont(n, data::kContActionCount), disc(n, data::kModeCount);
  for (std::size_t i = 0; i < n; ++i) {
    const int r = test.episode_first_row[i];
    std::copy(test.states.row(r).begin(), test.states.row(r).end(), s0.row(i).begin());
    std::copy(test.cont.row(r).begin(), test.cont.row(r).end(), cont.row(i).begin());
    std::copy(test.disc.row(r).begin(), test.disc.row(r).end(), disc.row(i).begin());
  }
  const auto q = m.q_values(s0, cont, disc);
  double acc = 0.0;
  for (float v : q) acc += v;
  return acc / static_cast<double>(n);
}

// Mean absolute one-step Bellman residual of the fitted (or initial) model.
inline double bellman_residual(const FqeModel& m, const TransitionTable& table,
                               const PolicyFn* policy) {
  Matrix next_cont, next_disc;
  detail::next_actions(table, policy, next_cont, next_disc);
  const auto q = m.q_values(table.states, table.cont, table.disc);
  const auto qn = m.q_values(table.next_states, next_cont, next_disc);
  double acc = 0.0;
  for (int r = 0; r < table.rows(); ++r) {
    const double y = table.rewards[r] + m.cfg.gamma * (1.0f - table.done[r]) * qn[r];
    acc += std::abs(q[r] - y);
  }
  return acc / table.rows();
}

}  // namespace ventrl::ope
