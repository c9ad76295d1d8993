#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "ventrl/actions/space.hpp"
#include "ventrl/ope/coverage.hpp"
#include "ventrl/ope/fqe.hpp"

namespace ventrl::ope {

// Spearman rank correlation with average-rank tie handling. A constant input
// has no defined ranks; that case reports 0 with the degenerate flag set.
inline double spearman(std::span<const double> a, std::span<const double> b,
                       bool* degenerate = nullptr) {
  if (a.size() != b.size() || a.empty()) throw ValidationError("spearman: size mismatch");
  auto ranks = [](std::span<const double> x) {
    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return x[i] < x[j]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
      const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  if (degenerate) *degenerate = false;
  const auto flat = [](std::span<const double> x) {
    for (double v : x)
      if (v != x[0]) return false;
    return true;
  };
  if (flat(a) || flat(b)) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= static_cast<double>(ra.size());
  mb /= static_cast<double>(rb.size());
  double cov = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (va == 0.0 || vb == 0.0) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  return cov / std::sqrt(va * vb);
}

struct CheckpointMetrics {
  std::string id;
  long step = 0;
  std::uint64_t seed = 0;
  double v_pi = 0.0;
  double d_pi = 0.0;
  CoverageScore d_detail;
  bool fqe_diverged = false;
};

// Top 10% of checkpoints by coverage, then the best value estimate among
// them; ties resolve to the earliest step. With fewer than 10 checkpoints the
// coverage winner is returned directly (with the warning flag set).
inline int select_policy(const std::vector<CheckpointMetrics>& metrics,
                         bool* too_few_warning = nullptr) {
  if (metrics.empty()) throw ValidationError("select_policy: no checkpoints");
  std::vector<int> valid;
  for (std::size_t i = 0; i < metrics.size(); ++i)
    if (!metrics[i].fqe_diverged) valid.push_back(static_cast<int>(i));
  if (valid.empty()) throw ValidationError("select_policy: every checkpoint diverged");

  std::vector<int> by_dpi = valid;
  std::sort(by_dpi.begin(), by_dpi.end(), [&](int x, int y) {
    if (metrics[x].d_pi != metrics[y].d_pi) return metrics[x].d_pi > metrics[y].d_pi;
    return metrics[x].step < metrics[y].step;
  });
  if (too_few_warning) *too_few_warning = false;
  if (valid.size() < 10) {
    if (too_few_warning) *too_few_warning = true;
    return by_dpi.front();
  }
  const std::size_t keep = (valid.size() + 9) / 10;  // ceil(10%)
  const double threshold = metrics[by_dpi[keep - 1]].d_pi;  // boundary ties stay in
  int best = -1;
  for (int c : by_dpi) {
    if (metrics[c].d_pi < threshold) break;
    if (best < 0 || metrics[c].v_pi > metrics[best].v_pi ||
        (metrics[c].v_pi == metrics[best].v_pi && metrics[c].step < metrics[best].step))
      best = c;
  }
  return best;
}

using QFn = std::function<std::vector<float>(const Matrix& states, const Matrix& cont,
                                             const Matrix& disc)>;

// Spearman correlation of episode-mean Q values (at dataset actions) with
// (a) the episode-mean range reward and (b) the episode length.
struct RewardEffectiveness {
  double rho_range = 0.0;
  double rho_length = 0.0;
  bool degenerate = false;
};

inline RewardEffectiveness reward_effectiveness(const QFn& q_fn, const TransitionTable& table) {
  const auto q = q_fn(table.states, table.cont, table.disc);
  const int episodes = table.episode_first_row.size();
  if (episodes < 3) throw ValidationError("reward_effectiveness: too few episodes");
  std::vector<double> mean_q(episodes, 0.0), mean_range(episodes, 0.0), length(episodes, 0.0);
  for (int r = 0; r < table.rows(); ++r) {
    const int e = table.episode_of[r];
    mean_q[e] += q[r];
    mean_range[e] += table.r_range[r];
    length[e] += 1.0;
  }
  for (int e = 0; e < episodes; ++e) {
    mean_q[e] /= length[e];
    mean_range[e] /= length[e];
  }
  RewardEffectiveness out;
  bool d1 = false, d2 = false;
  out.rho_range = spearman(mean_q, mean_range, &d1);
  out.rho_length = spearman(mean_q, length, &d2);
  out.degenerate = d1 || d2;
  return out;
}

// ---------------------------------------------------------------------------
// Discretize-then-reconstruct study
// ---------------------------------------------------------------------------

struct ReconstructionRow {
  std::string method;
  double d_pi = 0.0;
  long re_discretization_mismatches = 0;
};

// Scores the policy's continuous actions as-is ("none"), then after
// discretizing and reconstructing with each method. Actions always
// re-discretize into their source bin; the mismatch counter proves it.
inline std::vector<ReconstructionRow> reconstruction_study(
    const learn::PolicyFn& policy, const actions::RestrictedActionSpace& space,
    const CoverageModel& coverage, const Matrix& states, std::uint64_t seed) {
  Matrix cont, disc;
  policy(states, cont, disc);
  std::vector<ReconstructionRow> rows;
  rows.push_back({"none", coverage_score(coverage, states, cont, disc).total, 0});

  const std::size_t n = states.rows();
  for (auto method : {actions::ReconstructMethod::kBinMode,
                      actions::ReconstructMethod::kGaussianAtMode,
                      actions::ReconstructMethod::kBinMean, actions::ReconstructMethod::kUniform}) {
    Rng rng = Rng(seed).split(actions::reconstruct_method_name(method));
    Matrix rec_cont(n, data::kContActionCount);
    Matrix rec_disc(n, data::kModeCount, 0.0f);
    long mismatches = 0;
    for (std::size_t r = 0; r < n; ++r) {
      data::HybridAction a;
      a.mode = disc(r, 1) > disc(r, 0) ? data::VentMode::kPcv : data::VentMode::kVcv;
      a.rr = data::denormalize_setting(data::kRr, cont(r, 0));
      a.vt = data::denormalize_setting(data::kVt, cont(r, 1));
      a.dp = data::denormalize_setting(data::kDp, cont(r, 2));
      a.peep = data::denormalize_setting(data::kPeep, cont(r, 3));
      a.fio2 = data::denormalize_setting(data::kFio2, cont(r, 4));
      const auto d = actions::discretize(a, space.spec, space.mode_masking);
      const auto rec = actions::reconstruct(d, method, space, rng);
      if (!(actions::discretize(rec, space.spec, space.mode_masking) == d)) ++mismatches;
      rec_cont(r, 0) = data::normalize_setting(data::kRr, rec.rr);
      rec_cont(r, 1) = data::normalize_setting(data::kVt, rec.vt);
      rec_cont(r, 2) = data::normalize_setting(data::kDp, rec.dp);
      rec_cont(r, 3) = data::normalize_setting(data::kPeep, rec.peep);
      rec_cont(r, 4) = data::normalize_setting(data::kFio2, rec.fio2);
      rec_disc(r, rec.mode == data::VentMode::kVcv ? 0 : 1) = 1.0f;
    }
    rows.push_back({actions::reconstruct_method_name(method),
                    coverage_score(coverage, states, rec_cont, rec_disc).total, mismatches});
  }
  std::sort(rows.begin(), rows.end(),
            [](const ReconstructionRow& a, const ReconstructionRow& b) { return a.d_pi > b.d_pi; });
  return rows;
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

struct EvalReport {
  std::uint64_t eval_seed = 0;
  std::string dataset_hash;
  double v_behavior = 0.0;
  std::vector<CheckpointMetrics> rows;
  int selected = -1;
  bool selection_warning = false;
  RewardEffectiveness effectiveness;
  bool has_effectiveness = false;
  std::vector<ReconstructionRow> reconstruction;

  std::string to_csv() const {
    std::ostringstream out;
    out << "checkpoint,step,seed,v_pi,d_pi,d_state,d_rr,d_vt,d_dp,d_peep,d_fio2,d_mode,"
           "fqe_diverged,selected\n";
    out << "clinician (behavior),,," << format_g9(v_behavior) << ",,,,,,,,,,\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& r = rows[i];
      out << r.id << "," << r.step << "," << r.seed << ","
          << (r.fqe_diverged ? "na" : format_g9(r.v_pi)) << "," << format_g9(r.d_pi) << ","
          << format_g9(r.d_detail.state);
      for (double v : r.d_detail.per_cont) out << "," << format_g9(v);
      out << "," << format_g9(r.d_detail.disc) << "," << (r.fqe_diverged ? 1 : 0) << ","
          << (static_cast<int>(i) == selected ? 1 : 0) << "\n";
    }
    return out.str();
  }

  std::string summary_text() const {
    std::ostringstream out;
    out << "eval seed " << eval_seed << "\n";
    out << "dataset " << dataset_hash << "\n";
    out << "V^pi_b (clinician, behavior): " << format_g9(v_behavior) << "\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& r = rows[i];
      out << r.id << " step " << r.step << ": ";
      if (r.fqe_diverged)
        out << "FQE diverged";
      else
        out << "V^pi " << format_g9(r.v_pi);
      out << ", d^pi " << format_g9(r.d_pi);
      if (static_cast<int>(i) == selected) out << "  <- selected";
      out << "\n";
    }
    if (selection_warning) out << "warning: fewer than 10 checkpoints, took the coverage winner\n";
    if (has_effectiveness) {
      out << "spearman(Q, range reward) " << format_g9(effectiveness.rho_range) << "\n";
      out << "spearman(Q, episode length) " << format_g9(effectiveness.rho_length) << "\n";
      if (effectiveness.degenerate) out << "warning: constant ranks, correlation reported as 0\n";
    }
    for (const auto& r : reconstruction)
      out << "reconstruction " << r.method << ": d^pi " << format_g9(r.d_pi)
          << " (re-discretization mismatches " << r.re_discretization_mismatches << ")\n";
    return out.str();
  }
};

}  // namespace ventrl::ope
