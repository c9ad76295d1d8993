#pragma once

#include <string>
#include <vector>

#include "ventrl/core/errors.hpp"
#include "ventrl/data/types.hpp"

namespace ventrl::rewards {

using data::Episode;
using data::OutcomeKind;
using data::StateVector;
using data::Step;

struct RangeItem {
  int var;
  float lo;
  float hi;
  float weight;
};

// Safe physiological target ranges with weights; intervals are closed on both
// ends. The default table drives the per-step range reward.
struct RangeSpec {
  std::vector<RangeItem> items;

  static RangeSpec defaults() {
    RangeSpec spec;
    spec.items = {
        {data::kPh, 7.30f, 7.45f, 2.0f},   {data::kMap, 60.0f, 109.0f, 1.0f},
        {data::kPao2, 55.0f, 80.0f, 2.0f}, {data::kSao2, 88.0f, 96.0f, 2.0f},
        {data::kPaco2, 28.0f, 55.0f, 2.0f}, {data::kHeartRate, 70.0f, 109.0f, 1.0f},
        {data::kSpo2, 88.0f, 96.0f, 2.0f},
    };
    return spec;
  }

  void validate() const {
    for (const auto& item : items) {
      if (item.weight <= 0.0f) throw ValidationError("RangeSpec: weights must be positive");
      if (item.lo >= item.hi) throw ValidationError("RangeSpec: empty safe interval");
    }
  }
};

enum class VfdPlacement : int { kTerminal = 0, kPerStep = 1 };

// Default w_vfd keeps the per-step total (r_range + r_tp + r_vfd) negative on
// typical cohorts, so the time penalty still favors shorter episodes and the
// VFD term modulates rather than dominates.
struct VfdConfig {
  double dt_max_days = 28.0;
  double w_vfd = 0.25;
  VfdPlacement placement = VfdPlacement::kPerStep;
};

// Weighted fraction of monitored variables inside their safe ranges.
inline double range_reward(const StateVector& state, const RangeSpec& spec) {
  double num = 0.0, den = 0.0;
  for (const auto& item : spec.items) {
    den += item.weight;
    const float v = state[item.var];
    if (v >= item.lo && v <= item.hi) num += item.weight;
  }
  if (den <= 0.0) throw ValidationError("range_reward: no weighted variables");
  return num / den;
}

// Constant per-step penalty: the negative of the maximum attainable range
// reward, so a perfect step nets zero before the VFD term.
inline double time_penalty() { return -1.0; }

// Ventilator-free days within the dt_max window. Reintubation and death are
// credited with the free days actually achieved; surviving past the window
// while still ventilated scores zero.
inline double vfd(const Episode& episode, const VfdConfig& cfg = {}) {
  const auto& o = episode.outcome;
  if (o.dt_re_days >= 0.0 && o.dt_re_days < o.dt_mv_days)
    throw ValidationError("vfd: reintubation before end of ventilation");
  if (o.dt_death_days >= 0.0 && o.dt_death_days < o.dt_mv_days &&
      o.kind != OutcomeKind::kDiedOnVent)
    throw ValidationError("vfd: death before end of ventilation");
  switch (o.kind) {
    case OutcomeKind::kReintubated:
      if (o.dt_re_days < cfg.dt_max_days) return o.dt_re_days - o.dt_mv_days;
      break;
    case OutcomeKind::kDiedOnVent:
      return 0.0;
    case OutcomeKind::kDiedAfterExtubation:
      if (o.dt_death_days < cfg.dt_max_days) return o.dt_death_days - o.dt_mv_days;
      break;
    case OutcomeKind::kExtubated:
      break;
  }
  if (cfg.dt_max_days >= o.dt_mv_days) return cfg.dt_max_days - o.dt_mv_days;
  return 0.0;
}

// Per-step VFD reward vector: w_vfd * VFD / dt_max, placed at the terminal
// step only or uniformly at every step.
inline std::vector<double> vfd_reward(const Episode& episode, const VfdConfig& cfg) {
  const double value = cfg.w_vfd * vfd(episode, cfg) / cfg.dt_max_days;
  std::vector<double> out(episode.steps.size(), 0.0);
  if (out.empty()) return out;
  if (cfg.placement == VfdPlacement::kPerStep)
    std::fill(out.begin(), out.end(), value);
  else
    out.back() = value;
  return out;
}

enum class MortalityMode : int { kOff = 0, kTerminal = 1 };

// Which reward terms are active; presets below reproduce the compared
// configurations (per-step VFD, terminal VFD, mortality, mortality + ranges).
struct RewardConfig {
  bool use_range = true;
  bool use_tp = true;
  VfdConfig vfd;
  bool use_vfd = true;
  MortalityMode mortality = MortalityMode::kOff;
  double mortality_scale = 100.0;
  // Range reward alignment: when true the reward on the transition from step
  // t uses the successor state (step t+1; terminal steps use their own).
  bool align_successor = true;

  static RewardConfig vfd_step() { return RewardConfig{}; }
  static RewardConfig vfd_terminal() {
    RewardConfig cfg;
    cfg.vfd.placement = VfdPlacement::kTerminal;
    return cfg;
  }
  static RewardConfig mortality_only() {
    RewardConfig cfg;
    cfg.use_range = false;
    cfg.use_tp = false;
    cfg.use_vfd = false;
    cfg.mortality = MortalityMode::kTerminal;
    return cfg;
  }
  static RewardConfig mortality_with_ranges() {
    RewardConfig cfg;
    cfg.use_vfd = false;
    cfg.mortality = MortalityMode::kTerminal;
    return cfg;
  }

  static RewardConfig by_name(const std::string& name) {
    if (name == "vfd-step") return vfd_step();
    if (name == "vfd-terminal") return vfd_terminal();
    if (name == "mortality") return mortality_only();
    if (name == "mortality-ranges") return mortality_with_ranges();
    throw ConfigError("unknown reward preset '" + name + "'");
  }
};

inline void annotate_rewards(Episode& episode, const RangeSpec& spec, const RewardConfig& cfg) {
  spec.validate();
  const auto vfd_vec = cfg.use_vfd ? vfd_reward(episode, cfg.vfd)
                                   : std::vector<double>(episode.steps.size(), 0.0);
  const std::size_t n = episode.steps.size();
  for (std::size_t t = 0; t < n; ++t) {
    Step& s = episode.steps[t];
    const StateVector& aligned =
        cfg.align_successor ? episode.steps[std::min(t + 1, n - 1)].state : s.state;
    s.reward.range = cfg.use_range ? static_cast<float>(range_reward(aligned, spec)) : 0.0f;
    s.reward.tp = cfg.use_tp ? static_cast<float>(time_penalty()) : 0.0f;
    s.reward.vfd = static_cast<float>(vfd_vec[t]);
    s.reward.mortality = 0.0f;
    if (cfg.mortality == MortalityMode::kTerminal && t + 1 == n)
      s.reward.mortality = static_cast<float>(episode.died() ? -cfg.mortality_scale
                                                             : cfg.mortality_scale);
    s.reward.filled = true;
  }
}

inline void annotate_rewards(data::Dataset& ds, const RangeSpec& spec, const RewardConfig& cfg) {
  for (auto& e : ds.episodes) annotate_rewards(e, spec, cfg);
}

}  // namespace ventrl::rewards
