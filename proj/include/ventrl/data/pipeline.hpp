#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ventrl/core/rng.hpp"
#include "ventrl/data/raw.hpp"
#include "ventrl/data/types.hpp"

namespace ventrl::data {

struct PipelineConfig {
  double gap_hours = 6.0;               // >= this gap between settings ends an episode
  double min_duration_hours = 4.0;      // shorter episodes are discarded
  double reintubation_window_days = 28.0;
  // Per-variable source priority; sources not listed rank behind listed ones.
  std::map<std::string, std::vector<std::string>> source_priority;
  // Categorical string encodings.
  std::map<std::string, double> sex_encoding = {
      {"male", 0.0}, {"m", 0.0}, {"female", 1.0}, {"f", 1.0}};
  std::map<std::string, double> mode_encoding = {{"VCV", 0.0}, {"PCV", 1.0}};
};

struct PipelineStats {
  long dropped_out_of_range = 0;
  long unknown_variable = 0;
  long unparsable_value = 0;
  long episodes_too_short = 0;
  long episodes_rejected_missing = 0;
  long patients_excluded = 0;
  long single_patient_strata = 0;
  long zero_variance_vars = 0;

  long total_rejections() const {
    return episodes_too_short + episodes_rejected_missing;
  }
};

namespace detail {

struct ParsedRecord {
  std::string patient_id;
  double time_hours = 0.0;
  bool is_action = false;
  int var = -1;  // StateVar or ActionDim index
  double value = 0.0;
  std::string source;
};

inline int priority_rank(const PipelineConfig& cfg, const std::string& var_name,
                         const std::string& source) {
  auto it = cfg.source_priority.find(var_name);
  if (it == cfg.source_priority.end()) return 0;
  for (std::size_t i = 0; i < it->second.size(); ++i)
    if (it->second[i] == source) return static_cast<int>(i);
  return static_cast<int>(it->second.size());
}

}  // namespace detail

// Cleaning: numeric parsing, categorical encoding, range filtering. Unknown
// variables and out-of-range values are dropped and counted, never fatal.
inline std::vector<detail::ParsedRecord> clean(const std::vector<RawRecord>& records,
                                               const PipelineConfig& cfg, PipelineStats& stats) {
  std::vector<detail::ParsedRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    detail::ParsedRecord p;
    p.patient_id = r.patient_id;
    p.time_hours = r.time_hours;
    p.source = r.source;

    if (r.name == kDeathHoursKey) {
      p.var = -2;  // outcome metadata, passed through
      try {
        p.value = std::stod(r.value);
      } catch (const std::exception&) {
        ++stats.unparsable_value;
        continue;
      }
      out.push_back(std::move(p));
      continue;
    }

    const int state_idx = state_var_index(r.name);
    const int action_idx = action_var_index(r.name);
    if (state_idx < 0 && action_idx < 0) {
      ++stats.unknown_variable;
      continue;
    }
    p.is_action = action_idx >= 0;
    p.var = p.is_action ? action_idx : state_idx;

    // value: categorical strings first, then plain numbers
    std::optional<double> value;
    if (!p.is_action && state_idx == kSex) {
      auto it = cfg.sex_encoding.find(r.value);
      if (it != cfg.sex_encoding.end()) value = it->second;
    } else if (p.is_action && action_idx == kMode) {
      auto it = cfg.mode_encoding.find(r.value);
      if (it != cfg.mode_encoding.end()) value = it->second;
    }
    if (!value) {
      try {
        value = std::stod(r.value);
      } catch (const std::exception&) {
        ++stats.unparsable_value;
        continue;
      }
    }
    p.value = *value;

    const float lo = p.is_action ? kActionVars[p.var].lo : kStateVars[p.var].lo;
    const float hi = p.is_action ? kActionVars[p.var].hi : kStateVars[p.var].hi;
    if (p.value < lo || p.value > hi) {
      ++stats.dropped_out_of_range;
      continue;
    }
    out.push_back(std::move(p));
  }
  return out;
}

namespace detail {

// Within one hourly window: keep records from the best-priority source, then
// resolve numerics by median and categoricals by longest covered duration.
inline std::optional<double> aggregate_window(const PipelineConfig& cfg,
                                              const std::string& var_name, bool categorical,
                                              std::vector<const ParsedRecord*>& recs,
                                              double window_end) {
  if (recs.empty()) return std::nullopt;
  int best_rank = std::numeric_limits<int>::max();
  for (const auto* r : recs) best_rank = std::min(best_rank, priority_rank(cfg, var_name, r->source));
  std::vector<const ParsedRecord*> kept;
  for (const auto* r : recs)
    if (priority_rank(cfg, var_name, r->source) == best_rank) kept.push_back(r);

  if (!categorical) {
    std::vector<double> values;
    values.reserve(kept.size());
    for (const auto* r : kept) values.push_back(r->value);
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  }

  std::sort(kept.begin(), kept.end(), [](const ParsedRecord* a, const ParsedRecord* b) {
    return a->time_hours < b->time_hours;
  });
  std::map<double, double> durations;  // value -> covered time
  std::map<double, double> first_seen;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    const double until = i + 1 < kept.size() ? kept[i + 1]->time_hours : window_end;
    const double dur = std::max(0.0, until - kept[i]->time_hours);
    durations[kept[i]->value] += dur;
    if (!first_seen.count(kept[i]->value)) first_seen[kept[i]->value] = kept[i]->time_hours;
  }
  double best_value = kept.front()->value;
  double best_dur = -1.0;
  for (const auto& [value, dur] : durations) {
    const bool better = dur > best_dur + 1e-12 ||
                        (std::abs(dur - best_dur) <= 1e-12 &&
                         first_seen[value] < first_seen[best_value]);
    if (better) {
      best_value = value;
      best_dur = dur;
    }
  }
  return best_value;
}

struct RawEpisode {
  std::string patient_id;
  double start_hours = 0.0;
  int n_steps = 0;
  // per step, per variable: aggregated value or NaN
  std::vector<std::array<double, kStateVarCount>> state;
  std::vector<std::array<double, kActionDimCount>> action;
};

}  // namespace detail

// Forward-fill imputation within one episode. Every variable must be observed
// at the first step; otherwise the episode is rejected.
template <typename Grid>
void forward_fill(Grid& grid, int n_vars, const std::string& episode_id, const char* what) {
  for (int v = 0; v < n_vars; ++v) {
    if (std::isnan(grid[0][v]))
      throw ValidationError("episode " + episode_id + ": " + what + " variable " +
                            std::to_string(v) + " missing at the first step");
    for (std::size_t t = 1; t < grid.size(); ++t)
      if (std::isnan(grid[t][v])) grid[t][v] = grid[t - 1][v];
  }
}

inline void impute(Episode& episode) {
  // Episode-level surface used by tests: NaN fields forward-filled in place.
  std::vector<std::array<double, kStateVarCount>> grid(episode.steps.size());
  for (std::size_t t = 0; t < episode.steps.size(); ++t)
    for (int v = 0; v < kStateVarCount; ++v) grid[t][v] = episode.steps[t].state[v];
  forward_fill(grid, kStateVarCount, episode.episode_id, "state");
  for (std::size_t t = 0; t < episode.steps.size(); ++t)
    for (int v = 0; v < kStateVarCount; ++v)
      episode.steps[t].state[v] = static_cast<float>(grid[t][v]);
}

// Episode construction per the preprocessing rules: settings gaps of at least
// gap_hours split episodes, hourly windows are aggregated, too-short episodes
// are dropped, and outcome metadata is attached afterwards.
inline std::vector<Episode> build_episodes(std::vector<detail::ParsedRecord> records,
                                           const PipelineConfig& cfg, PipelineStats& stats) {
  std::stable_sort(records.begin(), records.end(),
                   [](const detail::ParsedRecord& a, const detail::ParsedRecord& b) {
                     if (a.patient_id != b.patient_id) return a.patient_id < b.patient_id;
                     if (a.time_hours != b.time_hours) return a.time_hours < b.time_hours;
                     if (a.is_action != b.is_action) return a.is_action < b.is_action;
                     return a.var < b.var;
                   });

  std::vector<Episode> episodes;
  std::size_t i = 0;
  while (i < records.size()) {
    const std::string& patient = records[i].patient_id;
    std::size_t j = i;
    while (j < records.size() && records[j].patient_id == patient) ++j;

    double death_hours = -1.0;
    std::vector<const detail::ParsedRecord*> patient_records;
    for (std::size_t k = i; k < j; ++k) {
      if (records[k].var == -2)
        death_hours = records[k].value;
      else
        patient_records.push_back(&records[k]);
    }

    // Episode extents from ventilation-setting record gaps.
    std::vector<double> action_times;
    for (const auto* r : patient_records)
      if (r->is_action) action_times.push_back(r->time_hours);
    std::vector<std::pair<double, double>> spans;  // [first, last] setting time
    for (std::size_t k = 0; k < action_times.size(); ++k) {
      if (spans.empty() || action_times[k] - spans.back().second >= cfg.gap_hours)
        spans.emplace_back(action_times[k], action_times[k]);
      else
        spans.back().second = action_times[k];
    }

    struct Built {
      Episode episode;
      double start = 0.0;
      double end = 0.0;
    };
    std::vector<Built> built;
    int span_index = 0;
    bool any_rejected_missing = false;
    for (const auto& [start, last] : spans) {
      ++span_index;
      const double duration = last - start;
      if (duration < cfg.min_duration_hours) {
        ++stats.episodes_too_short;
        continue;
      }
      const int n_steps = std::max(static_cast<int>(cfg.min_duration_hours),
                                   static_cast<int>(std::ceil(duration)));

      detail::RawEpisode raw;
      raw.patient_id = patient;
      raw.start_hours = start;
      raw.n_steps = n_steps;
      raw.state.assign(n_steps, {});
      raw.action.assign(n_steps, {});
      for (auto& row : raw.state) row.fill(std::numeric_limits<double>::quiet_NaN());
      for (auto& row : raw.action) row.fill(std::numeric_limits<double>::quiet_NaN());

      // bucket -> records, per variable
      std::vector<std::vector<std::vector<const detail::ParsedRecord*>>> state_buckets(
          n_steps, std::vector<std::vector<const detail::ParsedRecord*>>(kStateVarCount));
      std::vector<std::vector<std::vector<const detail::ParsedRecord*>>> action_buckets(
          n_steps, std::vector<std::vector<const detail::ParsedRecord*>>(kActionDimCount));
      for (const auto* r : patient_records) {
        if (r->time_hours < start || r->time_hours > start + n_steps) continue;
        const int bucket =
            std::min(static_cast<int>(std::floor(r->time_hours - start)), n_steps - 1);
        if (r->is_action)
          action_buckets[bucket][r->var].push_back(r);
        else
          state_buckets[bucket][r->var].push_back(r);
      }
      for (int t = 0; t < n_steps; ++t) {
        const double window_end = start + t + 1;
        for (int v = 0; v < kStateVarCount; ++v) {
          auto agg = detail::aggregate_window(cfg, std::string(kStateVars[v].name),
                                              kStateVars[v].categorical, state_buckets[t][v],
                                              window_end);
          if (agg) raw.state[t][v] = *agg;
        }
        for (int v = 0; v < kActionDimCount; ++v) {
          auto agg = detail::aggregate_window(cfg, std::string(kActionVars[v].name),
                                              v == kMode, action_buckets[t][v], window_end);
          if (agg) raw.action[t][v] = *agg;
        }
      }

      Built b;
      b.start = start;
      b.end = start + n_steps;
      b.episode.patient_id = patient;
      b.episode.episode_id = patient + "-e" + std::to_string(span_index);
      try {
        forward_fill(raw.state, kStateVarCount, b.episode.episode_id, "state");
        forward_fill(raw.action, kActionDimCount, b.episode.episode_id, "action");
      } catch (const ValidationError&) {
        ++stats.episodes_rejected_missing;
        any_rejected_missing = true;
        continue;
      }

      b.episode.steps.resize(n_steps);
      for (int t = 0; t < n_steps; ++t) {
        Step& s = b.episode.steps[t];
        s.t = t;
        for (int v = 0; v < kStateVarCount; ++v)
          s.state[v] = static_cast<float>(raw.state[t][v]);
        s.action.mode = raw.action[t][kMode] >= 0.5 ? VentMode::kPcv : VentMode::kVcv;
        s.action.rr = static_cast<float>(raw.action[t][kRr]);
        s.action.vt = static_cast<float>(raw.action[t][kVt]);
        s.action.dp = static_cast<float>(raw.action[t][kDp]);
        s.action.peep = static_cast<float>(raw.action[t][kPeep]);
        s.action.fio2 = static_cast<float>(raw.action[t][kFio2]);
      }
      built.push_back(std::move(b));
    }

    if (built.empty() && any_rejected_missing) ++stats.patients_excluded;

    // Outcomes: reintubation from the next episode's start, death from the
    // patient-level metadata; the first event decides the episode outcome.
    for (std::size_t k = 0; k < built.size(); ++k) {
      Episode& e = built[k].episode;
      e.outcome.dt_mv_days = built[k].episode.steps.size() / 24.0;
      const double start = built[k].start;
      const double end = built[k].end;
      const double next_start = k + 1 < built.size() ? built[k + 1].start : -1.0;

      const bool died_on_vent = death_hours >= 0.0 && death_hours <= end + 1.0 &&
                                (next_start < 0.0 || death_hours < next_start);
      const bool reintubated =
          next_start >= 0.0 &&
          (next_start - start) / 24.0 < cfg.reintubation_window_days &&
          !(death_hours >= 0.0 && death_hours <= end + 1.0);
      if (died_on_vent) {
        e.outcome.kind = OutcomeKind::kDiedOnVent;
        e.outcome.dt_death_days = e.outcome.dt_mv_days;
      } else if (reintubated) {
        e.outcome.kind = OutcomeKind::kReintubated;
        e.outcome.dt_re_days = (next_start - start) / 24.0;
      } else if (death_hours > end + 1.0 && (next_start < 0.0 || death_hours < next_start)) {
        e.outcome.kind = OutcomeKind::kDiedAfterExtubation;
        e.outcome.dt_death_days = (death_hours - start) / 24.0;
      } else {
        e.outcome.kind = OutcomeKind::kExtubated;
      }
      e.validate();
      episodes.push_back(std::move(e));
    }

    i = j;
  }
  return episodes;
}

inline Dataset run_pipeline(const std::vector<RawRecord>& records, const PipelineConfig& cfg,
                            PipelineStats& stats) {
  Dataset ds;
  auto parsed = clean(records, cfg, stats);
  ds.episodes = build_episodes(std::move(parsed), cfg, stats);
  return ds;
}

// Stratified, patient-disjoint split over (episode-length quartile x
// mortality). Quartile thresholds come from the full episode set; patients
// with several episodes are assigned as a unit.
inline void stratified_split(Dataset& ds, double test_frac, std::uint64_t seed,
                             PipelineStats& stats) {
  if (ds.episodes.size() < 10)
    throw ValidationError("stratified_split: need at least 10 episodes");

  std::vector<double> lengths;
  for (const auto& e : ds.episodes) lengths.push_back(static_cast<double>(e.steps.size()));
  std::sort(lengths.begin(), lengths.end());
  auto quartile = [&](double q) { return lengths[static_cast<std::size_t>(q * (lengths.size() - 1))]; };
  const double q1 = quartile(0.25), q2 = quartile(0.5), q3 = quartile(0.75);
  auto length_bin = [&](double len) {
    if (len <= q1) return 0;
    if (len <= q2) return 1;
    if (len <= q3) return 2;
    return 3;
  };

  struct PatientGroup {
    std::string id;
    std::vector<std::size_t> episode_idx;
    int stratum = 0;
  };
  std::map<std::string, PatientGroup> groups;
  for (std::size_t i = 0; i < ds.episodes.size(); ++i) {
    auto& g = groups[ds.episodes[i].patient_id];
    g.id = ds.episodes[i].patient_id;
    g.episode_idx.push_back(i);
  }
  for (auto& [id, g] : groups) {
    double max_len = 0.0;
    bool any_death = false;
    for (auto idx : g.episode_idx) {
      max_len = std::max(max_len, static_cast<double>(ds.episodes[idx].steps.size()));
      any_death = any_death || ds.episodes[idx].died();
    }
    g.stratum = length_bin(max_len) * 2 + (any_death ? 1 : 0);
  }

  std::map<int, std::vector<PatientGroup*>> strata;
  for (auto& [id, g] : groups) strata[g.stratum].push_back(&g);

  for (auto& [stratum, patients] : strata) {
    std::sort(patients.begin(), patients.end(),
              [](const PatientGroup* a, const PatientGroup* b) { return a->id < b->id; });
    if (patients.size() < 2) {
      ++stats.single_patient_strata;
      for (auto* p : patients)
        for (auto idx : p->episode_idx) ds.episodes[idx].split = Split::kTrain;
      continue;
    }
    long stratum_episodes = 0;
    for (const auto* p : patients) stratum_episodes += static_cast<long>(p->episode_idx.size());
    const double target = test_frac * static_cast<double>(stratum_episodes);

    Rng rng = Rng(seed).split("split").split(static_cast<std::uint64_t>(stratum));
    std::vector<PatientGroup*> shuffled = patients;
    for (std::size_t k = shuffled.size(); k > 1; --k)
      std::swap(shuffled[k - 1], shuffled[rng.uniform_int(static_cast<int>(k))]);

    long in_test = 0;
    for (auto* p : shuffled) {
      const long n = static_cast<long>(p->episode_idx.size());
      const Split s = (static_cast<double>(in_test + n) <= target + 1.0 + 1e-9 && in_test < target)
                          ? Split::kTest
                          : Split::kTrain;
      if (s == Split::kTest) in_test += n;
      for (auto idx : p->episode_idx) ds.episodes[idx].split = s;
    }
  }
}

inline NormStats compute_norm_stats(const Dataset& ds, PipelineStats& stats) {
  NormStats ns;
  std::array<double, kStateVarCount> sum{}, sum_sq{};
  std::array<double, kStateVarCount> mn{}, mx{};
  mn.fill(std::numeric_limits<double>::infinity());
  mx.fill(-std::numeric_limits<double>::infinity());
  long n = 0;
  for (const auto& e : ds.episodes) {
    if (e.split != Split::kTrain) continue;
    for (const auto& s : e.steps) {
      ++n;
      for (int v = 0; v < kStateVarCount; ++v) {
        const double x = s.state[v];
        sum[v] += x;
        sum_sq[v] += x * x;
        mn[v] = std::min(mn[v], x);
        mx[v] = std::max(mx[v], x);
      }
    }
  }
  if (n == 0) throw ValidationError("compute_norm_stats: empty training split");
  for (int v = 0; v < kStateVarCount; ++v) {
    const double mean = sum[v] / n;
    double var = sum_sq[v] / n - mean * mean;
    if (var < 0.0) var = 0.0;
    double sd = std::sqrt(var);
    if (sd < 1e-6) {
      sd = 1e-6;
      ++stats.zero_variance_vars;
    }
    ns.state[v] = {mean, sd, mn[v], mx[v]};
  }
  ns.valid = true;
  return ns;
}

inline Dataset normalize(const Dataset& ds, const NormStats& stats) {
  if (!stats.valid) throw ValidationError("normalize: stats not computed");
  Dataset out = ds;
  out.stats = stats;
  out.normalized = true;
  for (auto& e : out.episodes) {
    for (auto& s : e.steps) {
      for (int v = 0; v < kStateVarCount; ++v)
        s.state[v] = normalize_state_var(v, s.state[v], stats);
      s.action.rr = normalize_setting(kRr, s.action.rr);
      s.action.vt = normalize_setting(kVt, s.action.vt);
      s.action.dp = normalize_setting(kDp, s.action.dp);
      s.action.peep = normalize_setting(kPeep, s.action.peep);
      s.action.fio2 = normalize_setting(kFio2, s.action.fio2);
    }
  }
  return out;
}

}  // namespace ventrl::data
