#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "ventrl/core/errors.hpp"
#include "ventrl/data/variables.hpp"

namespace ventrl::data {

using StateVector = std::array<float, kStateVarCount>;

enum class VentMode : int { kVcv = 0, kPcv = 1 };

// One categorical setting (the mode) plus five continuous settings. Both vt
// and dp are always carried; which one drives the ventilator depends on the
// mode (VCV -> vt, PCV -> dp).
struct HybridAction {
  VentMode mode = VentMode::kVcv;
  float rr = 0.0f;
  float vt = 0.0f;
  float dp = 0.0f;
  float peep = 0.0f;
  float fio2 = 0.0f;

  float setting(int dim) const {
    switch (dim) {
      case kRr: return rr;
      case kVt: return vt;
      case kDp: return dp;
      case kPeep: return peep;
      case kFio2: return fio2;
      default: throw DimensionError("HybridAction::setting: bad dimension");
    }
  }
  void set_setting(int dim, float v) {
    switch (dim) {
      case kRr: rr = v; break;
      case kVt: vt = v; break;
      case kDp: dp = v; break;
      case kPeep: peep = v; break;
      case kFio2: fio2 = v; break;
      default: throw DimensionError("HybridAction::set_setting: bad dimension");
    }
  }
  // The mode-active volume/pressure dimension.
  int active_vp_dim() const { return mode == VentMode::kVcv ? kVt : kDp; }
};

struct RewardParts {
  float range = 0.0f;
  float tp = 0.0f;
  float vfd = 0.0f;
  float mortality = 0.0f;
  bool filled = false;

  float total() const { return range + tp + vfd + mortality; }
};

struct Step {
  int t = 0;  // hours since episode start
  StateVector state{};
  HybridAction action{};
  RewardParts reward{};
};

enum class OutcomeKind : int {
  kExtubated = 0,
  kDiedOnVent,
  kDiedAfterExtubation,
  kReintubated,
};

inline const char* outcome_name(OutcomeKind k) {
  switch (k) {
    case OutcomeKind::kExtubated: return "extubated";
    case OutcomeKind::kDiedOnVent: return "died_on_vent";
    case OutcomeKind::kDiedAfterExtubation: return "died_after_extubation";
    case OutcomeKind::kReintubated: return "reintubated";
  }
  return "unknown";
}

inline OutcomeKind outcome_from_name(const std::string& s) {
  if (s == "extubated") return OutcomeKind::kExtubated;
  if (s == "died_on_vent") return OutcomeKind::kDiedOnVent;
  if (s == "died_after_extubation") return OutcomeKind::kDiedAfterExtubation;
  if (s == "reintubated") return OutcomeKind::kReintubated;
  throw ValidationError("unknown outcome '" + s + "'");
}

struct Outcome {
  OutcomeKind kind = OutcomeKind::kExtubated;
  double dt_mv_days = 0.0;     // days on the ventilator (steps / 24)
  double dt_death_days = -1.0; // days from episode start to death; < 0 if n/a
  double dt_re_days = -1.0;    // days from episode start to reintubation; < 0 if n/a
};

enum class Split : int { kNone = 0, kTrain, kTest };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::kNone: return "none";
    case Split::kTrain: return "train";
    case Split::kTest: return "test";
  }
  return "none";
}

struct Episode {
  std::string patient_id;
  std::string episode_id;
  std::vector<Step> steps;
  Outcome outcome;
  Split split = Split::kNone;

  bool died() const {
    return outcome.kind == OutcomeKind::kDiedOnVent ||
           outcome.kind == OutcomeKind::kDiedAfterExtubation;
  }

  void validate() const {
    if (steps.size() < 4)
      throw ValidationError("episode " + episode_id + ": fewer than 4 hourly steps");
    for (std::size_t i = 0; i < steps.size(); ++i)
      if (steps[i].t != static_cast<int>(i))
        throw ValidationError("episode " + episode_id + ": non-consecutive timestamps");
    if (outcome.dt_re_days >= 0.0 && outcome.dt_re_days < outcome.dt_mv_days)
      throw ValidationError("episode " + episode_id + ": reintubation precedes end of MV");
    if (outcome.kind == OutcomeKind::kDiedAfterExtubation &&
        outcome.dt_death_days < outcome.dt_mv_days)
      throw ValidationError("episode " + episode_id + ": death precedes end of MV");
  }
};

struct VarStats {
  double mean = 0.0;
  double std = 1.0;
  double min = 0.0;
  double max = 0.0;
};

struct NormStats {
  std::array<VarStats, kStateVarCount> state{};
  bool valid = false;
};

struct Dataset {
  std::vector<Episode> episodes;
  NormStats stats;
  bool normalized = false;

  std::size_t total_steps() const {
    std::size_t n = 0;
    for (const auto& e : episodes) n += e.steps.size();
    return n;
  }
};

// Continuous-setting normalization is a fixed affine map from the admissible
// action ranges onto [-1, 1]; computed in double so round-trips are exact to
// well below 1e-6.
inline float normalize_setting(int dim, float value) {
  const auto& info = kActionVars[dim];
  const double unit = (static_cast<double>(value) - info.lo) / (static_cast<double>(info.hi) - info.lo);
  return static_cast<float>(unit * 2.0 - 1.0);
}

inline float denormalize_setting(int dim, float normalized) {
  const auto& info = kActionVars[dim];
  const double unit = (static_cast<double>(normalized) + 1.0) / 2.0;
  return static_cast<float>(info.lo + unit * (static_cast<double>(info.hi) - info.lo));
}

inline float normalize_state_var(int var, float value, const NormStats& stats) {
  return static_cast<float>((static_cast<double>(value) - stats.state[var].mean) /
                            stats.state[var].std);
}

inline float denormalize_state_var(int var, float z, const NormStats& stats) {
  return static_cast<float>(static_cast<double>(z) * stats.state[var].std +
                            stats.state[var].mean);
}

}  // namespace ventrl::data
