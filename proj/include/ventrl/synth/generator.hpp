#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ventrl/actions/bins.hpp"
#include "ventrl/core/format.hpp"
#include "ventrl/core/rng.hpp"
#include "ventrl/data/pipeline.hpp"
#include "ventrl/data/raw.hpp"
#include "ventrl/reward/rewards.hpp"

namespace ventrl::synth {

using data::RawRecord;

// The generator is a coverage-and-monotonicity harness, not a physiological
// simulator: a scalar severity drives every vital through monotone links, and
// recovery speed scales with how close the applied settings sit to a
// severity-dependent ideal. Episodes therefore shorten (and VFD rises) as the
// behavior policy improves, which is the property the learners are tested on.
struct GeneratorConfig {
  long n_patients = 1000;
  int max_episode_hours = 29 * 24;  // past the 28-day VFD window so the zero branch occurs
  std::uint64_t seed = 0;
  double behavior_noise = 1.0;      // scales the settings noise around the ideal
  double death_hazard = 0.0032;     // per-hour scale, multiplied by severity^2
  double post_ext_death_coeff = 0.35;
  double reintubation_base = 0.05;
  double reintubation_sev_coeff = 0.55;
  double extubation_hazard = 0.25;
  double extubation_threshold = 0.30;
  double long_stay_fraction = 0.03;
  double rho_lo = 0.006;
  double rho_hi = 0.05;
  double severity_noise = 0.015;
  double pcv_base = 0.20;
  double pcv_sev_coeff = 0.40;
  int min_hazard_hour = 6;

  void validate() const {
    if (n_patients < 1) throw ValidationError("generator: n_patients must be >= 1");
    for (double p : {death_hazard, reintubation_base, extubation_hazard, long_stay_fraction})
      if (p < 0.0 || p > 1.0) throw ValidationError("generator: probabilities must be in [0,1]");
  }
};

struct PatientLatent {
  double severity = 0.5;  // s in [0,1]
  double rho = 0.02;      // recovery per hour at perfect settings
  double noise_scale = 1.0;
  double age = 60.0, weight = 78.0, height = 172.0;
  bool female = false;
};

namespace detail {

struct IdealSettings {
  double rr, vt, dp, peep, fio2;
};

inline IdealSettings ideal_for(double s) {
  return {12.0 + 16.0 * s, 8.0 - 2.0 * s, 8.0 + 10.0 * s, 4.0 + 10.0 * s, 30.0 + 55.0 * s};
}

inline double action_quality(const IdealSettings& ideal, bool pcv, double rr, double vt, double dp,
                             double peep, double fio2) {
  double miss = 0.0;
  miss += std::min(1.0, std::abs(rr - ideal.rr) / 10.0);
  miss += pcv ? std::min(1.0, std::abs(dp - ideal.dp) / 6.0)
              : std::min(1.0, std::abs(vt - ideal.vt) / 2.5);
  miss += std::min(1.0, std::abs(peep - ideal.peep) / 5.0);
  miss += std::min(1.0, std::abs(fio2 - ideal.fio2) / 25.0);
  return 1.0 - miss / 4.0;
}

struct VitalLink {
  int var;
  double base;
  double slope;   // value = base + slope * severity + AR(1) noise
  double sigma;   // AR(1) innovation scale
  int cadence;    // record every N hours
};

inline const std::vector<VitalLink>& vital_links() {
  static const std::vector<VitalLink> links = {
      {data::kMap, 88.0, -30.0, 3.0, 1},
      {data::kDbp, 70.0, -20.0, 2.5, 1},
      {data::kSbp, 125.0, -35.0, 4.0, 1},
      {data::kHeartRate, 82.0, 35.0, 3.0, 1},
      {data::kSpo2, 94.5, -8.0, 0.8, 1},
      {data::kSao2, 95.0, -9.0, 0.7, 4},
      {data::kPao2, 72.0, -25.0, 3.0, 4},
      {data::kPaco2, 41.0, 22.0, 2.0, 4},
      {data::kPh, 7.39, -0.22, 0.015, 4},
      {data::kBaseExcess, 0.0, -8.0, 1.0, 4},
      {data::kIvFluids, 600.0, 1500.0, 120.0, 4},
      {data::kUrineOutput, 300.0, -200.0, 30.0, 4},
      {data::kVasopressors, -0.2, 2.2, 0.15, 4},
      {data::kHaemoglobin, 8.5, -2.0, 0.25, 12},
      {data::kWbc, 9.0, 9.0, 0.8, 12},
      {data::kPotassium, 4.1, 0.8, 0.12, 12},
      {data::kChloride, 103.0, 5.0, 1.0, 12},
      {data::kSodium, 139.0, 4.0, 1.0, 12},
      {data::kInr, 1.1, 1.2, 0.08, 12},
  };
  return links;
}

inline double clamp_var(int var, double v) {
  return std::clamp(v, static_cast<double>(data::kStateVars[var].lo),
                    static_cast<double>(data::kStateVars[var].hi));
}

inline double truncated_gauss(Rng& rng, double mu, double sigma, double lo, double hi) {
  for (int i = 0; i < 16; ++i) {
    const double x = mu + sigma * rng.normal();
    if (x >= lo && x <= hi) return x;
  }
  return std::clamp(mu, lo, hi);
}

}  // namespace detail

// Emits the raw-record stream for one cohort. Everything downstream (episode
// building, imputation, splitting) runs through the ordinary data pipeline.
inline std::vector<RawRecord> generate_records(const GeneratorConfig& cfg) {
  cfg.validate();
  std::vector<RawRecord> records;
  Rng run_rng(cfg.seed);

  for (long pid = 0; pid < cfg.n_patients; ++pid) {
    Rng rng = run_rng.split("patient").split(static_cast<std::uint64_t>(pid));
    char name_buf[32];
    std::snprintf(name_buf, sizeof(name_buf), "P%05ld", pid);
    const std::string patient(name_buf);

    PatientLatent latent;
    latent.severity = rng.uniform_in(0.25, 0.92);
    const bool long_stay = rng.bernoulli(cfg.long_stay_fraction);
    latent.rho = long_stay ? rng.uniform_in(0.0002, 0.0012)
                           : rng.uniform_in(cfg.rho_lo, cfg.rho_hi);
    latent.noise_scale = rng.uniform_in(0.7, 1.3);
    latent.age = std::floor(rng.uniform_in(18.0, 95.0));
    latent.female = rng.bernoulli(0.5);
    latent.weight = std::clamp(78.0 + 14.0 * rng.normal(), 45.0, 135.0);
    latent.height = std::clamp(172.0 + 9.0 * rng.normal(), 156.0, 199.0);

    auto emit = [&](double t, std::string_view name, const std::string& value) {
      records.push_back({patient, t, std::string(name), value, ""});
    };
    auto emit_num = [&](double t, std::string_view name, double value) {
      emit(t, name, format_g9(value));
    };

    double episode_start = 0.0;
    double death_hours = -1.0;
    double s = latent.severity;
    bool pcv = rng.bernoulli(std::clamp(cfg.pcv_base + cfg.pcv_sev_coeff * s, 0.0, 1.0));

    for (int episode = 0; episode < 3; ++episode) {
      // demographics + full admission panel at the episode start
      std::array<double, data::kStateVarCount> ar_noise{};
      emit_num(episode_start, "age", latent.age);
      emit(episode_start, "sex", latent.female ? "female" : "male");
      emit_num(episode_start, "weight", latent.weight);
      emit_num(episode_start, "height", latent.height);

      int ended_at = -1;
      enum class End { kExtubated, kDied, kCap } end = End::kCap;
      double rr = 0, vt = 0, dp = 0, peep = 0, fio2 = 0;

      for (int t = 0; t < cfg.max_episode_hours; ++t) {
        const double abs_t = episode_start + t;
        const auto ideal = detail::ideal_for(s);

        // behavior policy: ideal settings + truncated Gaussian noise
        const double k = cfg.behavior_noise * latent.noise_scale;
        rr = detail::truncated_gauss(rng, ideal.rr, 1.8 * k, 5.0, 60.0);
        peep = detail::truncated_gauss(rng, ideal.peep, 1.2 * k, 0.0, 20.0);
        fio2 = detail::truncated_gauss(rng, ideal.fio2, 5.5 * k, 21.0, 100.0);
        // occasional mode review, re-drawn from the severity-linked mix
        if (rng.bernoulli(0.01))
          pcv = rng.bernoulli(std::clamp(cfg.pcv_base + cfg.pcv_sev_coeff * s, 0.0, 1.0));
        if (pcv) {
          dp = detail::truncated_gauss(rng, ideal.dp, 1.4 * k, 0.0, 26.0);
          vt = std::clamp(dp * 0.42 - 0.2 + 0.3 * rng.normal(), 3.0, 12.0);
        } else {
          vt = detail::truncated_gauss(rng, ideal.vt, 0.55 * k, 3.0, 12.0);
          dp = std::clamp(vt * (1.3 + 1.7 * s) + 0.8 * rng.normal(), 0.0, 26.0);
        }
        emit(abs_t, "mode", pcv ? "PCV" : "VCV");
        emit_num(abs_t, "rr", rr);
        emit_num(abs_t, "vt", vt);
        emit_num(abs_t, "dp", dp);
        emit_num(abs_t, "peep", peep);
        emit_num(abs_t, "fio2", fio2);

        // vitals and labs with per-variable cadence, AR(1) around the link
        for (const auto& link : detail::vital_links()) {
          ar_noise[link.var] =
              0.7 * ar_noise[link.var] + link.sigma * latent.noise_scale * rng.normal();
          if (t % link.cadence == 0) {
            const double v = detail::clamp_var(link.var, link.base + link.slope * s +
                                                             ar_noise[link.var]);
            emit_num(abs_t + 0.25, data::kStateVars[link.var].name, v);
          }
        }
        // ventilation observables derived from the applied settings
        const double pinsp = std::clamp(peep + (pcv ? dp : vt * (1.4 + 1.2 * s)) +
                                            0.8 * rng.normal(),
                                        10.0, 60.0);
        emit_num(abs_t + 0.25, "insp_pressure", pinsp);
        emit_num(abs_t + 0.25, "tidal_volume_obs",
                 std::clamp(vt * latent.weight + 15.0 * rng.normal(), 80.0, 2040.0));

        // severity responds to how close the settings are to the ideal
        const double q = detail::action_quality(ideal, pcv, rr, vt, dp, peep, fio2);
        s = std::clamp(s - latent.rho * q + cfg.severity_noise * rng.normal(), 0.0, 1.0);

        if (t >= cfg.min_hazard_hour) {
          const double p_death = cfg.death_hazard * s * s;
          if (rng.bernoulli(p_death)) {
            ended_at = t + 1;
            end = End::kDied;
            break;
          }
          const double p_ext =
              cfg.extubation_hazard *
              std::max(0.0, (cfg.extubation_threshold - s) / cfg.extubation_threshold);
          if (rng.bernoulli(p_ext)) {
            ended_at = t + 1;
            end = End::kExtubated;
            break;
          }
        }
      }
      if (ended_at < 0) ended_at = cfg.max_episode_hours;

      // closing settings marker pins the episode extent at ended_at hours
      const double end_abs = episode_start + ended_at;
      emit(end_abs, "mode", pcv ? "PCV" : "VCV");
      emit_num(end_abs, "rr", rr);
      emit_num(end_abs, "vt", vt);
      emit_num(end_abs, "dp", dp);
      emit_num(end_abs, "peep", peep);
      emit_num(end_abs, "fio2", fio2);

      if (end == End::kDied) {
        death_hours = end_abs + 0.3;
        break;
      }

      // extubated (or window cap): maybe dies afterwards, maybe comes back
      const double p_post_death = cfg.death_hazard > 0.0
                                      ? std::clamp(cfg.post_ext_death_coeff * s + 0.01, 0.0, 0.9)
                                      : 0.0;
      if (rng.bernoulli(p_post_death)) {
        death_hours = end_abs + rng.uniform_in(12.0, 240.0);
        break;
      }
      const double p_re = std::clamp(
          cfg.reintubation_base + cfg.reintubation_sev_coeff * std::max(0.0, s - 0.15), 0.0, 0.8);
      if (episode + 1 < 3 && rng.bernoulli(p_re)) {
        episode_start = end_abs + std::floor(rng.uniform_in(7.0, 72.0));
        s = std::clamp(s + rng.uniform_in(0.15, 0.35), 0.0, 1.0);
        continue;
      }
      break;
    }

    if (death_hours >= 0.0) emit_num(death_hours, data::kDeathHoursKey, death_hours);
  }
  return records;
}

inline data::Dataset generate(const GeneratorConfig& cfg, data::PipelineStats& stats,
                              const data::PipelineConfig& pipeline_cfg = {}) {
  return data::run_pipeline(generate_records(cfg), pipeline_cfg, stats);
}

// ---------------------------------------------------------------------------
// Coverage report
// ---------------------------------------------------------------------------

struct CoverageReport {
  std::array<std::vector<long>, data::kActionDimCount> bin_occupancy;  // mode-gated view
  long episodes = 0;
  long steps = 0;
  std::array<long, 4> vfd_branches{};  // within-window, reintubated, died, zero-by-cap
  std::vector<std::pair<std::string, double>> safe_range_fraction;
  long long full_combinations = 0;
  long long observed_combinations = 0;

  std::string text() const;
};

inline CoverageReport coverage_report(const data::Dataset& ds, const actions::BinSpec& spec,
                                      double dt_max_days = 28.0) {
  if (ds.episodes.empty()) throw ValidationError("coverage_report: empty dataset");
  CoverageReport report;
  report.full_combinations = spec.full_combination_count();
  for (int dim = 0; dim < data::kActionDimCount; ++dim)
    report.bin_occupancy[dim].assign(spec.dims[dim].n_bins(), 0);

  const auto range_spec = rewards::RangeSpec::defaults();
  std::vector<long> in_range(range_spec.items.size(), 0);

  std::vector<actions::DiscreteAction> combos;
  for (const auto& e : ds.episodes) {
    ++report.episodes;
    const auto& o = e.outcome;
    if (o.kind == data::OutcomeKind::kReintubated && o.dt_re_days < dt_max_days)
      ++report.vfd_branches[1];
    else if (e.died() && o.dt_death_days >= 0.0 && o.dt_death_days < dt_max_days)
      ++report.vfd_branches[2];
    else if (o.dt_mv_days <= dt_max_days)
      ++report.vfd_branches[0];
    else
      ++report.vfd_branches[3];

    for (const auto& s : e.steps) {
      ++report.steps;
      const auto gated = actions::discretize(s.action, spec, /*mode_masking=*/true);
      for (int dim = 0; dim < data::kActionDimCount; ++dim)
        ++report.bin_occupancy[dim][gated.bins[dim]];
      combos.push_back(actions::discretize(s.action, spec, /*mode_masking=*/false));
      for (std::size_t i = 0; i < range_spec.items.size(); ++i) {
        const auto& item = range_spec.items[i];
        const float v = s.state[item.var];
        if (v >= item.lo && v <= item.hi) ++in_range[i];
      }
    }
  }
  std::sort(combos.begin(), combos.end());
  combos.erase(std::unique(combos.begin(), combos.end()), combos.end());
  report.observed_combinations = static_cast<long long>(combos.size());
  for (std::size_t i = 0; i < range_spec.items.size(); ++i)
    report.safe_range_fraction.emplace_back(
        std::string(data::kStateVars[range_spec.items[i].var].name),
        static_cast<double>(in_range[i]) / static_cast<double>(report.steps));
  return report;
}

inline std::string CoverageReport::text() const {
  std::ostringstream out;
  out << "episodes " << episodes << "\n";
  out << "steps " << steps << "\n";
  out << "full_action_combinations " << full_combinations << "\n";
  out << "observed_action_combinations " << observed_combinations << "\n";
  out << "vfd_branch within_window " << vfd_branches[0] << "\n";
  out << "vfd_branch reintubated " << vfd_branches[1] << "\n";
  out << "vfd_branch died " << vfd_branches[2] << "\n";
  out << "vfd_branch zero_past_window " << vfd_branches[3] << "\n";
  for (const auto& [name, frac] : safe_range_fraction)
    out << "safe_range_fraction " << name << " " << format_g9(frac) << "\n";
  const char* dim_names[] = {"mode", "rr", "vt", "dp", "peep", "fio2"};
  for (int dim = 0; dim < data::kActionDimCount; ++dim) {
    out << "bin_occupancy " << dim_names[dim];
    for (long n : bin_occupancy[dim]) out << " " << n;
    out << "\n";
  }
  return out.str();
}

// key=value config file
inline GeneratorConfig read_generator_config(const std::string& path) {
  GeneratorConfig cfg;
  for (const auto& raw_line : split(read_text_file(path), '\n')) {
    const std::string line = trim(raw_line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("generator config: expected key=value, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "n_patients") cfg.n_patients = parse_long(value, "n_patients");
    else if (key == "max_episode_hours") cfg.max_episode_hours = static_cast<int>(parse_long(value, key.c_str()));
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_long(value, key.c_str()));
    else if (key == "behavior_noise") cfg.behavior_noise = parse_double(value, key.c_str());
    else if (key == "death_hazard") cfg.death_hazard = parse_double(value, key.c_str());
    else if (key == "post_ext_death_coeff") cfg.post_ext_death_coeff = parse_double(value, key.c_str());
    else if (key == "reintubation_base") cfg.reintubation_base = parse_double(value, key.c_str());
    else if (key == "reintubation_sev_coeff") cfg.reintubation_sev_coeff = parse_double(value, key.c_str());
    else if (key == "extubation_hazard") cfg.extubation_hazard = parse_double(value, key.c_str());
    else if (key == "extubation_threshold") cfg.extubation_threshold = parse_double(value, key.c_str());
    else if (key == "long_stay_fraction") cfg.long_stay_fraction = parse_double(value, key.c_str());
    else if (key == "rho_lo") cfg.rho_lo = parse_double(value, key.c_str());
    else if (key == "rho_hi") cfg.rho_hi = parse_double(value, key.c_str());
    else if (key == "severity_noise") cfg.severity_noise = parse_double(value, key.c_str());
    else if (key == "pcv_base") cfg.pcv_base = parse_double(value, key.c_str());
    else if (key == "pcv_sev_coeff") cfg.pcv_sev_coeff = parse_double(value, key.c_str());
    else if (key == "min_hazard_hour") cfg.min_hazard_hour = static_cast<int>(parse_long(value, key.c_str()));
    else throw ConfigError("generator config: unknown key '" + key + "'");
  }
  return cfg;
}

}  // namespace ventrl::synth
