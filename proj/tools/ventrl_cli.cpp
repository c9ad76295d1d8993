// Command-line front end: generate synthetic cohorts, preprocess raw records,
// train the offline learners, evaluate checkpoints, select a policy, and emit
// report artifacts. One subcommand per process; every run writes a manifest.

#include <atomic>
#include <filesystem>
#include <iostream>
#include <map>
#include <thread>

#include <CLI11.hpp>

#include "ventrl/actions/space.hpp"
#include "ventrl/data/dataset_io.hpp"
#include "ventrl/data/pipeline.hpp"
#include "ventrl/learn/train.hpp"
#include "ventrl/ope/evaluate.hpp"
#include "ventrl/run/manifest.hpp"
#include "ventrl/run/svg.hpp"
#include "ventrl/synth/generator.hpp"

namespace fs = std::filesystem;
using namespace ventrl;

namespace {

struct LoadedData {
  data::Dataset raw;         // clinical units, rewards annotated
  data::NormStats stats;
  std::string dataset_path;
};

LoadedData load_data(const std::string& data_dir, const rewards::RewardConfig& reward_cfg) {
  LoadedData out;
  out.dataset_path = (fs::path(data_dir) / "dataset.csv").string();
  const auto stats_path = (fs::path(data_dir) / "stats.json").string();
  if (!fs::exists(out.dataset_path))
    throw IoError("dataset not found: " + out.dataset_path + " (run `ventrl gen` first)");
  if (!fs::exists(stats_path)) throw IoError("stats not found: " + stats_path);
  out.raw = data::read_dataset(out.dataset_path);
  out.stats = data::read_stats(stats_path);
  rewards::annotate_rewards(out.raw, rewards::RangeSpec::defaults(), reward_cfg);
  return out;
}

rewards::RewardConfig reward_from_flags(const std::string& preset, double w_vfd) {
  auto cfg = rewards::RewardConfig::by_name(preset);
  cfg.vfd.w_vfd = w_vfd;
  return cfg;
}

std::vector<std::string> checkpoint_files(const std::string& dir) {
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".ck") files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no .ck checkpoints under " + dir);
  return files;
}

void parallel_for(int jobs, int n, const std::function<void(int)>& body) {
  if (jobs <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> workers;
  std::exception_ptr error;
  std::mutex error_mutex;
  for (int w = 0; w < jobs; ++w)
    workers.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& w : workers) w.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------

int cmd_gen(const std::string& out_dir, long patients, std::uint64_t seed, double test_frac,
            const std::string& config_path) {
  synth::GeneratorConfig cfg;
  if (!config_path.empty()) cfg = synth::read_generator_config(config_path);
  if (patients > 0) cfg.n_patients = patients;
  cfg.seed = seed;
  cfg.validate();

  run::ensure_dir(out_dir);
  const auto records = synth::generate_records(cfg);
  const auto records_path = (fs::path(out_dir) / "records.csv").string();
  data::write_raw_records(records_path, records);

  data::PipelineConfig pipeline_cfg;
  data::PipelineStats stats;
  auto ds = data::run_pipeline(records, pipeline_cfg, stats);
  data::stratified_split(ds, test_frac, seed, stats);
  const auto norm_stats = data::compute_norm_stats(ds, stats);
  rewards::annotate_rewards(ds, rewards::RangeSpec::defaults(),
                            rewards::RewardConfig::vfd_step());

  data::write_dataset((fs::path(out_dir) / "dataset.csv").string(), ds);
  data::write_stats((fs::path(out_dir) / "stats.json").string(), norm_stats);

  const auto bin_spec = actions::BinSpec::clinician_default();
  write_text_file((fs::path(out_dir) / "bins.txt").string(), actions::bin_table_text(bin_spec));
  const auto report = synth::coverage_report(ds, bin_spec);
  write_text_file((fs::path(out_dir) / "coverage_report.txt").string(), report.text());
  const auto space = actions::build_restricted_space(ds, bin_spec);
  write_text_file((fs::path(out_dir) / "actions.csv").string(),
                  actions::restricted_space_csv(space));

  std::map<std::string, std::string> resolved = {
      {"patients", std::to_string(cfg.n_patients)},
      {"seed", std::to_string(seed)},
      {"test_frac", format_g9(test_frac)},
      {"behavior_noise", format_g9(cfg.behavior_noise)},
      {"max_episode_hours", std::to_string(cfg.max_episode_hours)},
  };
  run::write_manifest(out_dir, "gen", resolved,
                      {records_path, (fs::path(out_dir) / "dataset.csv").string()});

  std::cout << "generated " << ds.episodes.size() << " episodes, " << ds.total_steps()
            << " hourly steps\n";
  std::cout << "observed action combinations: " << report.observed_combinations << " of "
            << report.full_combinations << "\n";
  std::cout << "rejections: " << stats.total_rejections() << "\n";
  return 0;
}

int cmd_preprocess(const std::string& records_path, const std::string& out_dir,
                   std::uint64_t seed, double test_frac) {
  if (!fs::exists(records_path)) throw IoError("records file not found: " + records_path);
  run::ensure_dir(out_dir);
  const auto records = data::read_raw_records(records_path);
  data::PipelineConfig pipeline_cfg;
  data::PipelineStats stats;
  auto ds = data::run_pipeline(records, pipeline_cfg, stats);
  if (ds.episodes.empty()) throw ValidationError("preprocess: no usable episodes");
  data::stratified_split(ds, test_frac, seed, stats);
  const auto norm_stats = data::compute_norm_stats(ds, stats);
  rewards::annotate_rewards(ds, rewards::RangeSpec::defaults(),
                            rewards::RewardConfig::vfd_step());
  data::write_dataset((fs::path(out_dir) / "dataset.csv").string(), ds);
  data::write_stats((fs::path(out_dir) / "stats.json").string(), norm_stats);
  const auto bin_spec = actions::BinSpec::clinician_default();
  const auto report = synth::coverage_report(ds, bin_spec);
  write_text_file((fs::path(out_dir) / "coverage_report.txt").string(), report.text());

  run::write_manifest(out_dir, "preprocess",
                      {{"records", records_path},
                       {"seed", std::to_string(seed)},
                       {"test_frac", format_g9(test_frac)}},
                      {records_path});
  std::cout << "episodes " << ds.episodes.size() << ", steps " << ds.total_steps()
            << ", dropped out-of-range " << stats.dropped_out_of_range << ", rejected episodes "
            << stats.total_rejections() << "\n";
  return 0;
}

int cmd_train(const std::string& data_dir, const std::string& out_dir, const std::string& algo,
              const std::string& preset, std::uint64_t seed, const std::string& config_path,
              long steps_override, const std::string& reward_preset, double w_vfd) {
  const auto algo_id = learn::algo_from_name(algo);
  learn::TrainConfig cfg = preset == "paper" ? learn::TrainConfig::paper_preset(algo_id)
                                             : learn::TrainConfig::desk_preset(algo_id);
  if (!config_path.empty())
    for (const auto& [k, v] : run::read_kv_config(config_path)) cfg.apply(k, v);
  if (steps_override > 0) cfg.steps = steps_override;
  cfg.algo = algo_id;

  const auto reward_cfg = reward_from_flags(reward_preset, w_vfd);
  const auto loaded = load_data(data_dir, reward_cfg);
  run::ensure_dir(out_dir);

  const auto bin_spec = actions::BinSpec::clinician_default();
  const bool needs_space = algo_id == learn::Algo::kFactoredCql;
  actions::RestrictedActionSpace space;
  if (needs_space) space = actions::build_restricted_space(loaded.raw, bin_spec);
  const auto table = learn::build_transitions(loaded.raw, loaded.stats, data::Split::kTrain,
                                              needs_space ? &bin_spec : nullptr);

  std::cout << "training " << algo << " (" << preset << " preset) for " << cfg.steps
            << " steps on " << table.rows() << " transitions\n";
  const auto result = learn::train(cfg, table, needs_space ? &space : nullptr, seed);

  for (const auto& ck : result.checkpoints) {
    char name[64];
    std::snprintf(name, sizeof(name), "checkpoint_%07ld.ck", ck.step);
    ck.save((fs::path(out_dir) / name).string());
  }
  write_text_file((fs::path(out_dir) / "train_log.csv").string(), result.log_csv);

  std::map<std::string, std::string> resolved = {
      {"algo", algo},          {"preset", preset},
      {"seed", std::to_string(seed)}, {"reward", reward_preset},
      {"w_vfd", format_g9(w_vfd)},    {"config_hash", cfg.hash()},
      {"steps", std::to_string(cfg.steps)},
  };
  run::write_manifest(out_dir, "train", resolved, {loaded.dataset_path});
  std::cout << "wrote " << result.checkpoints.size() << " checkpoints to " << out_dir << "\n";
  if (result.skipped_batches > 0)
    std::cout << "skipped " << result.skipped_batches << " batches with non-finite advantages\n";
  return 0;
}

int cmd_eval(const std::string& data_dir, const std::string& checkpoints_dir,
             const std::string& out_dir, std::uint64_t seed, const std::string& preset,
             const std::string& reward_preset, double w_vfd, bool reconstruction, int jobs,
             long fqe_steps, long coverage_steps) {
  const auto reward_cfg = reward_from_flags(reward_preset, w_vfd);
  const auto loaded = load_data(data_dir, reward_cfg);
  run::ensure_dir(out_dir);

  const auto bin_spec = actions::BinSpec::clinician_default();
  const auto space = actions::build_restricted_space(loaded.raw, bin_spec);
  const auto train_table =
      learn::build_transitions(loaded.raw, loaded.stats, data::Split::kTrain, &bin_spec);
  const auto test_table =
      learn::build_transitions(loaded.raw, loaded.stats, data::Split::kTest, &bin_spec);

  ope::FqeConfig fqe_cfg;
  ope::CoverageConfig cov_cfg;
  if (preset == "desk") {
    fqe_cfg.hidden = {128, 128};
    cov_cfg.hidden = {128, 128};
  }
  if (fqe_steps > 0) fqe_cfg.steps = fqe_steps;
  if (coverage_steps > 0) cov_cfg.steps = coverage_steps;

  std::cout << "fitting coverage model (" << cov_cfg.steps << " steps)\n";
  const auto coverage = ope::coverage_fit(train_table, cov_cfg, seed);
  std::cout << "fitting behavior FQE\n";
  const auto behavior_fqe = ope::fqe_fit(nullptr, train_table, fqe_cfg, seed);

  ope::EvalReport report;
  report.eval_seed = seed;
  report.dataset_hash = to_hex(hash_file(loaded.dataset_path));
  report.v_behavior = ope::estimate_v_behavior(behavior_fqe, test_table);

  const auto files = checkpoint_files(checkpoints_dir);
  report.rows.resize(files.size());
  std::mutex log_mutex;
  parallel_for(jobs, static_cast<int>(files.size()), [&](int i) {
    const auto ck = Checkpoint::load(files[i]);
    ope::CheckpointMetrics m;
    m.id = fs::path(files[i]).filename().string();
    m.step = ck.step;
    m.seed = ck.seed;
    const auto policy = learn::policy_from_checkpoint(ck, &space);
    Matrix cont, disc;
    policy(test_table.states, cont, disc);
    m.d_detail = ope::coverage_score(coverage, test_table.states, cont, disc);
    m.d_pi = m.d_detail.total;
    try {
      const auto fqe = ope::fqe_fit(&policy, train_table, fqe_cfg, seed);
      m.v_pi = ope::estimate_v_pi(fqe, test_table, policy);
    } catch (const NumericError& e) {
      m.fqe_diverged = true;
      std::lock_guard<std::mutex> lock(log_mutex);
      std::cout << m.id << ": " << e.what() << " (reported, run continues)\n";
    }
    report.rows[i] = m;
    std::lock_guard<std::mutex> lock(log_mutex);
    std::cout << m.id << ": d^pi " << format_g9(m.d_pi)
              << (m.fqe_diverged ? " (FQE diverged)" : " V^pi " + format_g9(m.v_pi)) << "\n";
  });

  report.selected = ope::select_policy(report.rows, &report.selection_warning);

  // reward-effectiveness correlations for the selected checkpoint's critic
  {
    const auto ck = Checkpoint::load(files[report.selected]);
    const auto policy = learn::policy_from_checkpoint(ck, &space);
    const auto fqe = ope::fqe_fit(&policy, train_table, fqe_cfg, seed);
    ope::QFn q_fn = [&](const Matrix& s, const Matrix& c, const Matrix& d) {
      return fqe.q_values(s, c, d);
    };
    report.effectiveness = ope::reward_effectiveness(q_fn, test_table);
    report.has_effectiveness = true;

    if (reconstruction) {
      if (ck.algo == learn::algo_name(learn::Algo::kFactoredCql))
        throw ConfigError("--reconstruction-study needs a continuous-actor checkpoint");
      report.reconstruction =
          ope::reconstruction_study(policy, space, coverage, test_table.states, seed);
      std::string csv = "method,d_pi,re_discretization_mismatches\n";
      for (const auto& r : report.reconstruction)
        csv += r.method + "," + format_g9(r.d_pi) + "," +
               std::to_string(r.re_discretization_mismatches) + "\n";
      write_text_file((fs::path(out_dir) / "reconstruction.csv").string(), csv);
    }
  }

  write_text_file((fs::path(out_dir) / "report.csv").string(), report.to_csv());
  write_text_file((fs::path(out_dir) / "summary.txt").string(), report.summary_text());
  run::write_manifest(out_dir, "eval",
                      {{"seed", std::to_string(seed)},
                       {"preset", preset},
                       {"reward", reward_preset},
                       {"w_vfd", format_g9(w_vfd)},
                       {"checkpoints", checkpoints_dir},
                       {"fqe_steps", std::to_string(fqe_cfg.steps)},
                       {"coverage_steps", std::to_string(cov_cfg.steps)}},
                      {loaded.dataset_path});
  std::cout << report.summary_text();
  return 0;
}

int cmd_select(const std::string& report_path, const std::string& out_path) {
  const auto text = read_text_file(report_path);
  std::vector<ope::CheckpointMetrics> metrics;
  bool first = true;
  for (const auto& line : split(text, '\n')) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      continue;
    }
    const auto parts = split(line, ',');
    if (parts.size() < 13 || parts[0] == "clinician (behavior)") continue;
    ope::CheckpointMetrics m;
    m.id = parts[0];
    m.step = parse_long(parts[1], "step");
    m.fqe_diverged = parts[12] == "1";
    if (!m.fqe_diverged) m.v_pi = parse_double(parts[3], "v_pi");
    m.d_pi = parse_double(parts[4], "d_pi");
    metrics.push_back(m);
  }
  bool warning = false;
  const int chosen = ope::select_policy(metrics, &warning);
  std::cout << "selected " << metrics[chosen].id << " (step " << metrics[chosen].step << ", V^pi "
            << format_g9(metrics[chosen].v_pi) << ", d^pi " << format_g9(metrics[chosen].d_pi)
            << ")\n";
  if (warning) std::cout << "warning: fewer than 10 checkpoints, took the coverage winner\n";
  if (!out_path.empty()) write_text_file(out_path, metrics[chosen].id + "\n");
  return 0;
}

int cmd_report(const std::string& data_dir, const std::string& checkpoints_dir,
               const std::string& out_dir, std::uint64_t seed, bool sweep_vfd, int sweep_seeds,
               long sweep_steps, int jobs) {
  const auto reward_cfg = rewards::RewardConfig::vfd_step();
  const auto loaded = load_data(data_dir, reward_cfg);
  run::ensure_dir(out_dir);
  const auto bin_spec = actions::BinSpec::clinician_default();
  const auto space = actions::build_restricted_space(loaded.raw, bin_spec);
  const auto test_table =
      learn::build_transitions(loaded.raw, loaded.stats, data::Split::kTest, &bin_spec);

  // action-distribution histograms per bin: behavior plus each checkpoint
  struct Series {
    std::string name;
    std::array<std::vector<long>, data::kActionDimCount> occupancy;
  };
  std::vector<Series> series;
  auto count_actions = [&](const std::string& name, const Matrix& cont, const Matrix& disc) {
    Series s;
    s.name = name;
    for (int dim = 0; dim < data::kActionDimCount; ++dim)
      s.occupancy[dim].assign(bin_spec.dims[dim].n_bins(), 0);
    for (std::size_t r = 0; r < cont.rows(); ++r) {
      data::HybridAction a;
      a.mode = disc(r, 1) > disc(r, 0) ? data::VentMode::kPcv : data::VentMode::kVcv;
      a.rr = data::denormalize_setting(data::kRr, cont(r, 0));
      a.vt = data::denormalize_setting(data::kVt, cont(r, 1));
      a.dp = data::denormalize_setting(data::kDp, cont(r, 2));
      a.peep = data::denormalize_setting(data::kPeep, cont(r, 3));
      a.fio2 = data::denormalize_setting(data::kFio2, cont(r, 4));
      const auto d = actions::discretize(a, bin_spec, false);
      for (int dim = 0; dim < data::kActionDimCount; ++dim) ++s.occupancy[dim][d.bins[dim]];
    }
    series.push_back(std::move(s));
  };
  count_actions("clinician (behavior)", test_table.cont, test_table.disc);
  if (!checkpoints_dir.empty()) {
    for (const auto& file : checkpoint_files(checkpoints_dir)) {
      const auto ck = Checkpoint::load(file);
      const auto policy = learn::policy_from_checkpoint(ck, &space);
      Matrix cont, disc;
      policy(test_table.states, cont, disc);
      count_actions(fs::path(file).filename().string(), cont, disc);
    }
  }
  {
    std::string csv = "policy,dimension,bin,count,fraction\n";
    const char* dim_names[] = {"mode", "rr", "vt", "dp", "peep", "fio2"};
    for (const auto& s : series)
      for (int dim = 0; dim < data::kActionDimCount; ++dim) {
        long total = 0;
        for (long c : s.occupancy[dim]) total += c;
        for (std::size_t b = 0; b < s.occupancy[dim].size(); ++b)
          csv += s.name + "," + dim_names[dim] + "," + std::to_string(b) + "," +
                 std::to_string(s.occupancy[dim][b]) + "," +
                 format_g9(static_cast<double>(s.occupancy[dim][b]) / std::max(1L, total)) + "\n";
      }
    write_text_file((fs::path(out_dir) / "action_histograms.csv").string(), csv);

    const int panel_h = 140, width = 640;
    run::SvgCanvas svg(width, panel_h * data::kActionDimCount);
    for (int dim = 0; dim < data::kActionDimCount; ++dim) {
      const double y0 = dim * panel_h + 20.0;
      svg.text(10, y0 - 6, dim_names[dim]);
      const int bins = bin_spec.dims[dim].n_bins();
      const double band = (width - 60.0) / bins;
      for (std::size_t si = 0; si < series.size(); ++si) {
        long total = 0;
        for (long c : series[si].occupancy[dim]) total += c;
        for (int b = 0; b < bins; ++b) {
          const double frac =
              static_cast<double>(series[si].occupancy[dim][b]) / std::max(1L, total);
          const double bw = band / series.size() - 1.0;
          svg.rect(40 + b * band + si * (bw + 1.0), y0 + (panel_h - 40) * (1.0 - frac),
                   std::max(1.0, bw), (panel_h - 40) * frac, run::series_color(si));
        }
      }
      svg.line(40, y0 + panel_h - 40, width - 20, y0 + panel_h - 40, "#888");
    }
    write_text_file((fs::path(out_dir) / "action_histograms.svg").string(), svg.finish());
  }

  // terminal-reward weight sweep: one FactoredCQL run per (w_vfd, seed),
  // correlations of the FQE value against the range reward
  if (sweep_vfd) {
    const std::vector<double> weights = {0.0, 0.5, 1.0, 2.0, 5.0};
    struct Point {
      double w;
      int seed;
      double rho_range, rho_length;
    };
    std::vector<Point> points(weights.size() * sweep_seeds);
    parallel_for(jobs, static_cast<int>(points.size()), [&](int i) {
      const double w = weights[i / sweep_seeds];
      const int run_seed = static_cast<int>(seed) + i % sweep_seeds;
      auto reward = rewards::RewardConfig::vfd_terminal();
      reward.vfd.w_vfd = w;
      auto ds = loaded.raw;
      rewards::annotate_rewards(ds, rewards::RangeSpec::defaults(), reward);
      const auto train_table =
          learn::build_transitions(ds, loaded.stats, data::Split::kTrain, &bin_spec);
      const auto test_tbl =
          learn::build_transitions(ds, loaded.stats, data::Split::kTest, &bin_spec);
      auto cfg = learn::TrainConfig::desk_preset(learn::Algo::kFactoredCql);
      cfg.steps = sweep_steps;
      cfg.checkpoint_interval = sweep_steps;
      const auto result = learn::train(cfg, train_table, &space, run_seed);
      const auto policy = learn::policy_from_checkpoint(result.checkpoints.back(), &space);
      ope::FqeConfig fqe_cfg;
      fqe_cfg.hidden = {128, 128};
      fqe_cfg.steps = std::max(2000L, sweep_steps / 2);
      const auto fqe = ope::fqe_fit(&policy, train_table, fqe_cfg, run_seed);
      ope::QFn q_fn = [&](const Matrix& s, const Matrix& c, const Matrix& d) {
        return fqe.q_values(s, c, d);
      };
      const auto eff = ope::reward_effectiveness(q_fn, test_tbl);
      points[i] = {w, run_seed, eff.rho_range, eff.rho_length};
    });

    std::string csv = "w_vfd,seed,rho_range,rho_length\n";
    for (const auto& p : points)
      csv += format_g9(p.w) + "," + std::to_string(p.seed) + "," + format_g9(p.rho_range) + "," +
             format_g9(p.rho_length) + "\n";
    write_text_file((fs::path(out_dir) / "vfd_sweep.csv").string(), csv);

    run::SvgCanvas svg(480, 300);
    svg.text(160, 16, "corr(mean Q, range reward) vs w_vfd (terminal)");
    svg.line(50, 260, 440, 260, "#888");
    svg.line(50, 40, 50, 260, "#888");
    std::vector<std::pair<double, double>> curve;
    for (std::size_t wi = 0; wi < weights.size(); ++wi) {
      double mean = 0.0;
      for (int s = 0; s < sweep_seeds; ++s) mean += points[wi * sweep_seeds + s].rho_range;
      mean /= sweep_seeds;
      const double x = 50 + 390.0 * wi / (weights.size() - 1);
      const double y = 260 - (mean + 1.0) / 2.0 * 220.0;
      curve.emplace_back(x, y);
      svg.text(x - 8, 275, format_g9(weights[wi]));
    }
    svg.polyline(curve, run::series_color(0));
    write_text_file((fs::path(out_dir) / "vfd_sweep.svg").string(), svg.finish());
  }

  run::write_manifest(out_dir, "report",
                      {{"seed", std::to_string(seed)},
                       {"sweep_vfd", sweep_vfd ? "1" : "0"},
                       {"sweep_seeds", std::to_string(sweep_seeds)},
                       {"sweep_steps", std::to_string(sweep_steps)}},
                      {loaded.dataset_path});
  std::cout << "report artifacts written to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"offline RL toolkit for mechanical-ventilation settings"};
  app.require_subcommand(1);

  std::string out_dir = "out";
  std::uint64_t seed = 0;
  std::string config_path;

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic ICU cohort dataset");
  long patients = 0;
  double test_frac = 0.2;
  gen->add_option("--patients", patients, "cohort size (overrides config)");
  gen->add_option("--seed", seed, "run seed");
  gen->add_option("--out", out_dir, "output directory");
  gen->add_option("--config", config_path, "generator key=value config file");
  gen->add_option("--test-frac", test_frac, "held-out fraction");

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "build a dataset from raw records");
  std::string records_path;
  pre->add_option("--records", records_path, "raw records CSV")->required();
  pre->add_option("--seed", seed, "split seed");
  pre->add_option("--out", out_dir, "output directory");
  pre->add_option("--test-frac", test_frac, "held-out fraction");

  // train
  auto* train_cmd = app.add_subcommand("train", "train an offline learner");
  std::string data_dir = "out";
  std::string algo = "hybrid-iql";
  std::string preset = "desk";
  std::string reward_preset = "vfd-step";
  double w_vfd = 0.25;
  long steps_override = 0;
  train_cmd->add_option("--data", data_dir, "directory with dataset.csv and stats.json");
  train_cmd->add_option("--algo", algo, "factored-cql|hybrid-iql|hybrid-edac");
  train_cmd->add_option("--preset", preset, "paper|desk")
      ->check(CLI::IsMember({"paper", "desk"}));
  train_cmd->add_option("--seed", seed, "training seed");
  train_cmd->add_option("--out", out_dir, "output directory");
  train_cmd->add_option("--config", config_path, "train key=value config file");
  train_cmd->add_option("--steps", steps_override, "override step count");
  train_cmd->add_option("--reward", reward_preset,
                        "vfd-step|vfd-terminal|mortality|mortality-ranges");
  train_cmd->add_option("--w-vfd", w_vfd, "VFD reward weight");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "off-policy evaluation of checkpoints");
  std::string checkpoints_dir;
  bool reconstruction = false;
  int jobs = 1;
  long fqe_steps = 0, coverage_steps = 0;
  eval_cmd->add_option("--data", data_dir, "directory with dataset.csv and stats.json");
  eval_cmd->add_option("--checkpoints", checkpoints_dir, "directory of .ck files")->required();
  eval_cmd->add_option("--out", out_dir, "output directory");
  eval_cmd->add_option("--seed", seed, "evaluation seed");
  eval_cmd->add_option("--preset", preset, "paper|desk")
      ->check(CLI::IsMember({"paper", "desk"}));
  eval_cmd->add_option("--reward", reward_preset, "reward preset used for FQE targets");
  eval_cmd->add_option("--w-vfd", w_vfd, "VFD reward weight");
  eval_cmd->add_flag("--reconstruction-study", reconstruction,
                     "run the discretize-then-reconstruct coverage study");
  eval_cmd->add_option("--jobs", jobs, "parallel checkpoint evaluations");
  eval_cmd->add_option("--fqe-steps", fqe_steps, "override FQE step budget");
  eval_cmd->add_option("--coverage-steps", coverage_steps, "override coverage step budget");

  // select
  auto* select_cmd = app.add_subcommand("select", "pick a checkpoint from an eval report");
  std::string report_path, selected_out;
  select_cmd->add_option("--report", report_path, "report.csv from eval")->required();
  select_cmd->add_option("--out", selected_out, "write the selected checkpoint id here");

  // report
  auto* report_cmd = app.add_subcommand("report", "action histograms and reward sweeps");
  bool sweep_vfd = false;
  int sweep_seeds = 5;
  long sweep_steps = 6000;
  report_cmd->add_option("--data", data_dir, "directory with dataset.csv and stats.json");
  report_cmd->add_option("--checkpoints", checkpoints_dir, "directory of .ck files");
  report_cmd->add_option("--out", out_dir, "output directory");
  report_cmd->add_option("--seed", seed, "base seed");
  report_cmd->add_flag("--sweep-vfd", sweep_vfd, "train the terminal-reward weight sweep");
  report_cmd->add_option("--sweep-seeds", sweep_seeds, "policies per weight");
  report_cmd->add_option("--sweep-steps", sweep_steps, "training steps per sweep run");
  report_cmd->add_option("--jobs", jobs, "parallel sweep runs");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen(out_dir, patients, seed, test_frac, config_path);
    if (pre->parsed()) return cmd_preprocess(records_path, out_dir, seed, test_frac);
    if (train_cmd->parsed())
      return cmd_train(data_dir, out_dir, algo, preset, seed, config_path, steps_override,
                       reward_preset, w_vfd);
    if (eval_cmd->parsed())
      return cmd_eval(data_dir, checkpoints_dir, out_dir, seed, preset, reward_preset, w_vfd,
                      reconstruction, jobs, fqe_steps, coverage_steps);
    if (select_cmd->parsed()) return cmd_select(report_path, selected_out);
    if (report_cmd->parsed())
      return cmd_report(data_dir, checkpoints_dir, out_dir, seed, sweep_vfd, sweep_seeds,
                        sweep_steps, jobs);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
