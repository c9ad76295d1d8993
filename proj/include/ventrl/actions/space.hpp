#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "ventrl/actions/bins.hpp"
#include "ventrl/core/matrix.hpp"
#include "ventrl/core/rng.hpp"
#include "ventrl/data/types.hpp"

namespace ventrl::actions {

struct BinValueStats {
  float mode = 0.0f;
  float mean = 0.0f;
  long count = 0;
};

// The deduplicated set of discretized action combinations observed in a
// dataset, with their one-hot encoding and per-bin value statistics used when
// converting bins back to continuous settings.
struct RestrictedActionSpace {
  BinSpec spec;
  bool mode_masking = false;
  std::vector<DiscreteAction> combos;  // sorted, unique
  Matrix one_hot;                      // |A_r| x one_hot_width
  std::array<std::vector<BinValueStats>, data::kActionDimCount> stats;

  int size() const { return static_cast<int>(combos.size()); }

  int find(const DiscreteAction& d) const {
    auto it = std::lower_bound(combos.begin(), combos.end(), d);
    if (it == combos.end() || !(*it == d)) return -1;
    return static_cast<int>(it - combos.begin());
  }

  void encode_one_hot_row(const DiscreteAction& d, std::span<float> row) const {
    std::fill(row.begin(), row.end(), 0.0f);
    for (int dim = 0; dim < data::kActionDimCount; ++dim)
      row[spec.offset(dim) + d.bins[dim]] = 1.0f;
  }
};

inline RestrictedActionSpace build_restricted_space(const data::Dataset& ds, const BinSpec& spec,
                                                    bool mode_masking = false,
                                                    bool train_split_only = true) {
  spec.validate();
  RestrictedActionSpace space;
  space.spec = spec;
  space.mode_masking = mode_masking;

  std::vector<DiscreteAction> seen;
  for (int dim = 0; dim < data::kActionDimCount; ++dim) {
    space.stats[dim].assign(spec.dims[dim].n_bins(), BinValueStats{});
  }
  // histogram resolution bin_width/20 for the empirical mode
  std::array<std::vector<std::vector<long>>, data::kActionDimCount> hists;
  for (int dim = data::kRr; dim < data::kActionDimCount; ++dim) {
    hists[dim].assign(spec.dims[dim].real_bins(), std::vector<long>(20, 0));
  }
  std::array<std::vector<double>, data::kActionDimCount> sums;
  for (int dim = 0; dim < data::kActionDimCount; ++dim)
    sums[dim].assign(spec.dims[dim].n_bins(), 0.0);

  bool any = false;
  for (const auto& e : ds.episodes) {
    if (train_split_only && e.split == data::Split::kTest) continue;
    for (const auto& s : e.steps) {
      any = true;
      const DiscreteAction d = discretize(s.action, spec, mode_masking);
      seen.push_back(d);
      for (int dim = data::kRr; dim < data::kActionDimCount; ++dim) {
        const int bin = d.bins[dim];
        if (spec.dims[dim].has_null && bin == spec.dims[dim].null_bin()) continue;
        const float v = s.action.setting(dim);
        auto& st = space.stats[dim][bin];
        st.count += 1;
        sums[dim][bin] += v;
        const float lo = spec.dims[dim].edges[bin];
        const float hi = spec.dims[dim].edges[bin + 1];
        int cell = static_cast<int>(std::floor((v - lo) / (hi - lo) * 20.0f));
        cell = std::clamp(cell, 0, 19);
        hists[dim][bin][cell] += 1;
      }
    }
  }
  if (!any) throw ValidationError("build_restricted_space: empty dataset");

  std::sort(seen.begin(), seen.end());
  seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
  space.combos = std::move(seen);

  for (int dim = data::kRr; dim < data::kActionDimCount; ++dim) {
    for (int bin = 0; bin < spec.dims[dim].real_bins(); ++bin) {
      auto& st = space.stats[dim][bin];
      if (st.count == 0) continue;
      st.mean = static_cast<float>(sums[dim][bin] / st.count);
      // histogram argmax, lowest-value tie-break: scan ascending, keep strict max
      const auto& hist = hists[dim][bin];
      int best_cell = 0;
      for (int c = 1; c < 20; ++c)
        if (hist[c] > hist[best_cell]) best_cell = c;
      const float lo = spec.dims[dim].edges[bin];
      const float hi = spec.dims[dim].edges[bin + 1];
      st.mode = lo + (best_cell + 0.5f) * (hi - lo) / 20.0f;
    }
  }

  space.one_hot = Matrix(space.combos.size(), spec.one_hot_width());
  for (std::size_t r = 0; r < space.combos.size(); ++r)
    space.encode_one_hot_row(space.combos[r], space.one_hot.row(r));
  return space;
}

// Linear Q decomposition: per-bin values summed over the bins each action
// combination selects, computed as per_bin_q * one_hot^T.
inline Matrix factored_q_values(const Matrix& per_bin_q, const RestrictedActionSpace& space) {
  if (per_bin_q.cols() != space.one_hot.cols())
    throw DimensionError("factored_q_values: per-bin width " + std::to_string(per_bin_q.cols()) +
                         " != one-hot width " + std::to_string(space.one_hot.cols()));
  Matrix out;
  matmul_nt_into(out, per_bin_q, space.one_hot);
  return out;
}

enum class ReconstructMethod : int { kBinMode = 0, kGaussianAtMode, kBinMean, kUniform };

inline const char* reconstruct_method_name(ReconstructMethod m) {
  switch (m) {
    case ReconstructMethod::kBinMode: return "bin_mode";
    case ReconstructMethod::kGaussianAtMode: return "gaussian_at_mode";
    case ReconstructMethod::kBinMean: return "bin_mean";
    case ReconstructMethod::kUniform: return "uniform";
  }
  return "unknown";
}

namespace detail {

// Acklam's rational approximation of the inverse standard normal CDF.
inline double inverse_normal_cdf(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425, phigh = 1 - plow;
  double q, r;
  if (p < plow) {
    q = std::sqrt(-2 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  if (p > phigh) {
    q = std::sqrt(-2 * std::log(1 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  q = p - 0.5;
  r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Truncated Normal(mu, sigma) on [lo, hi) via inverse-CDF sampling.
inline double truncated_normal(double mu, double sigma, double lo, double hi, Rng& rng) {
  const double a = normal_cdf((lo - mu) / sigma);
  const double b = normal_cdf((hi - mu) / sigma);
  const double u = a + rng.uniform() * (b - a);
  const double x = mu + sigma * inverse_normal_cdf(std::clamp(u, 1e-12, 1.0 - 1e-12));
  const double eps = (hi - lo) * 1e-6;
  return std::clamp(x, lo, hi - eps);
}

}  // namespace detail

struct ReconstructStats {
  long midpoint_fallbacks = 0;
};

// Discrete -> continuous conversion. The mode passes through; each continuous
// setting is drawn from its bin according to the method. Bins never observed
// in the dataset fall back to the bin midpoint.
inline HybridAction reconstruct(const DiscreteAction& d, ReconstructMethod method,
                                const RestrictedActionSpace& space, Rng& rng,
                                ReconstructStats* out_stats = nullptr) {
  HybridAction a;
  a.mode = d.bins[data::kMode] == 1 ? VentMode::kPcv : VentMode::kVcv;
  for (int dim = data::kRr; dim < data::kActionDimCount; ++dim) {
    const auto& bd = space.spec.dims[dim];
    const int bin = d.bins[dim];
    if (bin < 0 || bin >= bd.n_bins())
      throw ValidationError("reconstruct: bin index out of range for " + bd.name);
    if (bd.has_null && bin == bd.null_bin()) {
      // not applicable under this mode; emit the mid-range setting
      a.set_setting(dim, 0.5f * (data::kActionVars[dim].lo + data::kActionVars[dim].hi));
      continue;
    }
    const float lo = bd.edges[bin];
    const float hi = bd.edges[bin + 1];
    const auto& st = space.stats[dim][bin];
    if (st.count == 0 && method != ReconstructMethod::kUniform) {
      a.set_setting(dim, 0.5f * (lo + hi));
      if (out_stats) ++out_stats->midpoint_fallbacks;
      continue;
    }
    switch (method) {
      case ReconstructMethod::kBinMode:
        a.set_setting(dim, st.mode);
        break;
      case ReconstructMethod::kBinMean:
        a.set_setting(dim, st.mean);
        break;
      case ReconstructMethod::kGaussianAtMode:
        a.set_setting(dim, static_cast<float>(detail::truncated_normal(
                               st.mode, (hi - lo) / 4.0, lo, hi, rng)));
        break;
      case ReconstructMethod::kUniform:
        a.set_setting(dim, static_cast<float>(lo + rng.uniform() * (hi - lo) * (1.0 - 1e-7)));
        break;
    }
  }
  return a;
}

// A_r export: one CSV row of bin indices (0-based) per combination.
inline std::string restricted_space_csv(const RestrictedActionSpace& space) {
  std::string out = "mode,rr,vt,dp,peep,fio2\n";
  for (const auto& combo : space.combos) {
    for (int dim = 0; dim < data::kActionDimCount; ++dim) {
      out += std::to_string(combo.bins[dim]);
      out += dim + 1 < data::kActionDimCount ? ',' : '\n';
    }
  }
  return out;
}

}  // namespace ventrl::actions
