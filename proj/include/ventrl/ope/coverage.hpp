#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "ventrl/core/nn.hpp"
#include "ventrl/core/optim.hpp"
#include "ventrl/learn/batch.hpp"

namespace ventrl::ope {

using learn::TransitionTable;

struct CoverageConfig {
  long steps = 20000;
  float lr = 1e-3f;
  int batch_size = 256;
  std::vector<int> hidden = {256, 256};  // trunk width per the reference setup
  float log_var_min = -6.0f;
  float log_var_max = 2.0f;
  long log_interval = 100;
  double nll_limit = 1e8;
};

// Density model over (state, action) pairs: a shared trunk with a diagonal
// Gaussian head for the state, one for the continuous settings, and a
// categorical head for the mode. Trained by negative log-likelihood; scoring
// sums the per-head log densities.
struct CoverageModel {
  CoverageConfig cfg;
  nn::MlpParams trunk;
  nn::AdamState opt;
  bool fitted = false;

  static constexpr int kStateD = data::kStateVarCount;
  static constexpr int kContD = data::kContActionCount;
  static constexpr int kDiscD = data::kModeCount;
  // head layout: state mean, state log-var, cont mean, cont log-var, logits
  static constexpr int kOutWidth = 2 * kStateD + 2 * kContD + kDiscD;

  static CoverageModel make(const CoverageConfig& cfg, Rng rng) {
    CoverageModel m;
    m.cfg = cfg;
    std::vector<int> dims{kStateD + kContD + kDiscD};
    dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
    dims.push_back(kOutWidth);
    Rng r = rng.split("coverage");
    m.trunk = nn::MlpParams::make(dims, r);
    m.opt.lr = cfg.lr;
    return m;
  }

  struct RowScore {
    double state = 0.0;
    std::array<double, kContD> cont{};
    double disc = 0.0;
    double total() const {
      double acc = state + disc;
      for (double v : cont) acc += v;
      return acc;
    }
  };

  // log p(s, a) split by head; clamp keeps the Gaussian scales sane.
  std::vector<RowScore> score_rows(const Matrix& states, const Matrix& cont,
                                   const Matrix& disc) const {
    const Matrix out = nn::mlp_forward(trunk, hconcat(hconcat(states, cont), disc));
    std::vector<RowScore> scores(out.rows());
    for (std::size_t r = 0; r < out.rows(); ++r) {
      RowScore& sc = scores[r];
      for (int i = 0; i < kStateD; ++i) {
        const double mean = out(r, i);
        const double lv = std::clamp(out(r, kStateD + i), cfg.log_var_min, cfg.log_var_max);
        const double std = std::exp(lv) + 1e-6;
        const double z = (states(r, i) - mean) / std;
        sc.state += -0.5 * z * z - std::log(std) - 0.5 * nn::kLogTwoPi;
      }
      const int cont0 = 2 * kStateD;
      for (int i = 0; i < kContD; ++i) {
        const double mean = out(r, cont0 + i);
        const double lv = std::clamp(out(r, cont0 + kContD + i), cfg.log_var_min, cfg.log_var_max);
        const double std = std::exp(lv) + 1e-6;
        const double z = (cont(r, i) - mean) / std;
        sc.cont[i] = -0.5 * z * z - std::log(std) - 0.5 * nn::kLogTwoPi;
      }
      const int logits0 = 2 * kStateD + 2 * kContD;
      double mx = out(r, logits0);
      for (int k = 0; k < kDiscD; ++k) mx = std::max(mx, static_cast<double>(out(r, logits0 + k)));
      double denom = 0.0;
      for (int k = 0; k < kDiscD; ++k) denom += std::exp(out(r, logits0 + k) - mx);
      for (int k = 0; k < kDiscD; ++k)
        sc.disc += disc(r, k) * (out(r, logits0 + k) - mx - std::log(denom));
    }
    return scores;
  }
};

// NLL fit per the reference training step: per-element means for the two
// Gaussian heads plus the categorical term.
inline CoverageModel coverage_fit(const TransitionTable& table, const CoverageConfig& cfg,
                                  std::uint64_t seed, std::string* nll_log = nullptr) {
  Rng run(seed);
  CoverageModel m = CoverageModel::make(cfg, run.split("init"));
  Rng batches = run.split("batches");
  constexpr int kStateD = CoverageModel::kStateD;
  constexpr int kContD = CoverageModel::kContD;
  constexpr int kDiscD = CoverageModel::kDiscD;

  const Matrix inputs = hconcat(hconcat(table.states, table.cont), table.disc);
  if (nll_log) *nll_log = "step,nll\n";
  for (long step = 1; step <= cfg.steps; ++step) {
    const auto idx = learn::sample_indices(table.rows(), cfg.batch_size, batches);
    const std::size_t b = idx.size();
    Matrix x(b, inputs.cols());
    for (std::size_t i = 0; i < b; ++i)
      std::copy(inputs.row(idx[i]).begin(), inputs.row(idx[i]).end(), x.row(i).begin());

    nn::MlpCache cache;
    const Matrix out = nn::mlp_forward(m.trunk, x, &cache);
    Matrix upstream(b, out.cols(), 0.0f);
    double nll = 0.0;

    auto gaussian_head = [&](int mean0, int data0, int width, double denom) {
      for (std::size_t r = 0; r < b; ++r) {
        for (int i = 0; i < width; ++i) {
          const double mean = out(r, mean0 + i);
          const float lv_raw = out(r, mean0 + width + i);
          const bool interior = lv_raw > cfg.log_var_min && lv_raw < cfg.log_var_max;
          const double lv = std::clamp(lv_raw, cfg.log_var_min, cfg.log_var_max);
          const double e = std::exp(lv);
          const double std = e + 1e-6;
          const double z = (x(r, data0 + i) - mean) / std;
          nll += (0.5 * z * z + std::log(std) + 0.5 * nn::kLogTwoPi) / denom;
          upstream(r, mean0 + i) = static_cast<float>(-z / std / denom);
          if (interior)
            upstream(r, mean0 + width + i) =
                static_cast<float>((1.0 - z * z) / std * e / denom);
        }
      }
    };
    gaussian_head(0, 0, kStateD, static_cast<double>(b) * kStateD);
    gaussian_head(2 * kStateD, kStateD, kContD, static_cast<double>(b) * kContD);

    const int logits0 = 2 * kStateD + 2 * kContD;
    for (std::size_t r = 0; r < b; ++r) {
      double mx = out(r, logits0);
      for (int k = 0; k < kDiscD; ++k) mx = std::max(mx, static_cast<double>(out(r, logits0 + k)));
      double denom = 0.0;
      for (int k = 0; k < kDiscD; ++k) denom += std::exp(out(r, logits0 + k) - mx);
      for (int k = 0; k < kDiscD; ++k) {
        const double p = std::exp(out(r, logits0 + k) - mx) / denom;
        const double onehot = x(r, kStateD + kContD + k);
        nll += -onehot * (out(r, logits0 + k) - mx - std::log(denom)) / static_cast<double>(b);
        upstream(r, logits0 + k) = static_cast<float>((p - onehot) / static_cast<double>(b));
      }
    }

    if (!std::isfinite(nll) || nll > cfg.nll_limit)
      throw NumericError("coverage_fit: non-finite NLL at step " + std::to_string(step));
    if (nll_log && (step % cfg.log_interval == 0 || step == 1))
      *nll_log += std::to_string(step) + "," + format_g9(nll) + "\n";

    nn::MlpGrads grads = nn::MlpGrads::zeros_like(m.trunk);
    nn::mlp_backward(m.trunk, cache, upstream, &grads);
    nn::adam_step(m.opt, nn::views_of(m.trunk), nn::const_views_of(grads));
  }
  m.fitted = true;
  return m;
}

struct CoverageScore {
  double total = 0.0;
  double state = 0.0;
  std::array<double, CoverageModel::kContD> per_cont{};
  double disc = 0.0;
  long rows = 0;
};

// d^pi: mean log-likelihood of (s, pi(s)) over the supplied states, with the
// per-dimension decomposition alongside.
inline CoverageScore coverage_score(const CoverageModel& m, const Matrix& states,
                                    const Matrix& cont, const Matrix& disc) {
  if (!m.fitted) throw ValidationError("coverage_score: model not fitted");
  const auto rows = m.score_rows(states, cont, disc);
  CoverageScore score;
  score.rows = static_cast<long>(rows.size());
  for (const auto& r : rows) {
    score.total += r.total() / static_cast<double>(rows.size());
    score.state += r.state / static_cast<double>(rows.size());
    score.disc += r.disc / static_cast<double>(rows.size());
    for (int i = 0; i < CoverageModel::kContD; ++i)
      score.per_cont[i] += r.cont[i] / static_cast<double>(rows.size());
  }
  return score;
}

}  // namespace ventrl::ope
