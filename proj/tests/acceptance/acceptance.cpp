// Acceptance suite: one pass/fail line per criterion, exit nonzero if any
// fails. Each criterion is self-contained and rebuilds what it needs from a
// seeded synthetic cohort; long trainings run two at a time.
//
//   acceptance [--only N]

#include <atomic>
#include <chrono>
#include <cstring>
#include <set>
#include <functional>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "../support/ref_losses.hpp"

#include "ventrl/data/dataset_io.hpp"
#include "ventrl/data/pipeline.hpp"
#include "ventrl/learn/train.hpp"
#include "ventrl/ope/evaluate.hpp"
#include "ventrl/synth/generator.hpp"

using namespace ventrl;
using namespace ventrl::data;
using namespace ventrl::learn;
using namespace ventrl::ope;

namespace {

struct Check {
  std::ostringstream log;
  bool passed = true;

  void require(bool cond, const std::string& what) {
    log << (cond ? "  ok: " : "  FAIL: ") << what << "\n";
    passed = passed && cond;
  }
  template <typename T>
  void note(const std::string& what, T value) {
    log << "  " << what << " = " << value << "\n";
  }
};

struct Cohort {
  Dataset ds;
  NormStats stats;
  actions::BinSpec spec = actions::BinSpec::clinician_default();
  actions::RestrictedActionSpace space;
  TransitionTable train_t, test_t;

  Cohort(long patients, std::uint64_t seed, const rewards::RewardConfig& reward) {
    synth::GeneratorConfig gen;
    gen.n_patients = patients;
    gen.seed = seed;
    PipelineStats pstats;
    ds = synth::generate(gen, pstats);
    stratified_split(ds, 0.2, seed, pstats);
    rewards::annotate_rewards(ds, rewards::RangeSpec::defaults(), reward);
    stats = compute_norm_stats(ds, pstats);
    space = actions::build_restricted_space(ds, spec);
    train_t = build_transitions(ds, stats, Split::kTrain, &spec);
    test_t = build_transitions(ds, stats, Split::kTest, &spec);
  }
};

void run_pair(const std::function<void()>& a, const std::function<void()>& b) {
  std::thread ta(a);
  b();
  ta.join();
}

// run tasks two at a time (the box has two cores)
void run_tasks(std::vector<std::function<void()>> tasks) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < tasks.size(); i = next.fetch_add(1)) {
      try {
        tasks[i]();
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::thread t(worker);
  worker();
  t.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// 1. Reward formulas exact
// ---------------------------------------------------------------------------

void criterion_1(Check& c) {
  const auto spec = rewards::RangeSpec::defaults();
  StateVector in_range{};
  in_range[kPh] = 7.35f;
  in_range[kMap] = 80.0f;
  in_range[kPao2] = 70.0f;
  in_range[kSao2] = 92.0f;
  in_range[kPaco2] = 40.0f;
  in_range[kHeartRate] = 85.0f;
  in_range[kSpo2] = 93.0f;
  c.require(std::abs(rewards::range_reward(in_range, spec) - 1.0) < 1e-9,
            "all seven variables in range scores exactly 1");

  StateVector only_ph = in_range;
  only_ph[kMap] = 30.0f;
  only_ph[kPao2] = 20.0f;
  only_ph[kSao2] = 40.0f;
  only_ph[kPaco2] = 99.0f;
  only_ph[kHeartRate] = 190.0f;
  only_ph[kSpo2] = 30.0f;
  c.require(std::abs(rewards::range_reward(only_ph, spec) - 2.0 / 12.0) < 1e-9,
            "only pH in range scores exactly 2/12");

  StateVector boundary = in_range;
  boundary[kPh] = 7.3f;
  c.require(std::abs(rewards::range_reward(boundary, spec) - 1.0) < 1e-9,
            "closed interval: pH exactly 7.3 counts");

  c.require(rewards::time_penalty() == -1.0, "time penalty is exactly -1");

  auto episode = [&](OutcomeKind kind, int steps, double death, double re) {
    Episode e;
    e.episode_id = "fixture";
    e.steps.resize(steps);
    e.outcome = {kind, steps / 24.0, death, re};
    return e;
  };
  c.require(rewards::vfd(episode(OutcomeKind::kExtubated, 240, -1, -1)) == 18.0,
            "survived after 10 days: VFD = 28 - 10 = 18");
  c.require(rewards::vfd(episode(OutcomeKind::kDiedOnVent, 240, 10.0, -1)) == 0.0,
            "died on the ventilator: VFD = 0");
  c.require(rewards::vfd(episode(OutcomeKind::kDiedAfterExtubation, 240, 15.0, -1)) == 5.0,
            "extubated day 10, died day 15: VFD = 5");
  c.require(rewards::vfd(episode(OutcomeKind::kReintubated, 240, -1, 12.0)) == 2.0,
            "reintubated day 12 after 10 days: VFD = 2");
  c.require(rewards::vfd(episode(OutcomeKind::kExtubated, 30 * 24, -1, -1)) == 0.0,
            "still ventilated past the window: VFD = 0");
}

// ---------------------------------------------------------------------------
// 2. Factored-Q equivalence
// ---------------------------------------------------------------------------

void criterion_2(Check& c) {
  Rng rng(2024);
  int instances = 0, value_mismatches = 0, argmax_mismatches = 0;
  for (int trial = 0; trial < 50; ++trial) {
    actions::BinSpec spec;
    const char* names[] = {"mode", "rr", "vt", "dp", "peep", "fio2"};
    for (int dim = 0; dim < kActionDimCount; ++dim) {
      actions::BinDim d;
      d.name = names[dim];
      const int bins = 2 + rng.uniform_int(5);
      for (int b = 0; b <= bins; ++b) d.edges.push_back(static_cast<float>(b));
      d.has_null = rng.bernoulli(0.3);
      spec.dims[dim] = d;
    }
    actions::RestrictedActionSpace space;
    space.spec = spec;
    std::set<actions::DiscreteAction> combos;
    const int want = 2 + rng.uniform_int(40);
    while (static_cast<int>(combos.size()) < want) {
      actions::DiscreteAction d;
      for (int dim = 0; dim < kActionDimCount; ++dim)
        d.bins[dim] = rng.uniform_int(spec.dims[dim].n_bins());
      combos.insert(d);
    }
    space.combos.assign(combos.begin(), combos.end());
    space.one_hot = Matrix(space.combos.size(), spec.one_hot_width());
    for (std::size_t r = 0; r < space.combos.size(); ++r)
      space.encode_one_hot_row(space.combos[r], space.one_hot.row(r));

    Matrix per_bin(3 + rng.uniform_int(6), spec.one_hot_width());
    for (float& v : per_bin.flat()) v = static_cast<float>(rng.normal());
    const Matrix q = actions::factored_q_values(per_bin, space);
    ++instances;

    for (std::size_t b = 0; b < q.rows(); ++b) {
      int brute_best = 0;
      double brute_val = -1e30;
      for (std::size_t j = 0; j < space.combos.size(); ++j) {
        double sum = 0.0;
        for (int dim = 0; dim < kActionDimCount; ++dim)
          sum += per_bin(b, spec.offset(dim) + space.combos[j].bins[dim]);
        if (std::abs(q(b, j) - sum) > 1e-6) ++value_mismatches;
        if (sum > brute_val) {
          brute_val = sum;
          brute_best = static_cast<int>(j);
        }
      }
      int fast_best = 0;
      for (std::size_t j = 1; j < q.cols(); ++j)
        if (q(b, j) > q(b, fast_best)) fast_best = static_cast<int>(j);
      if (fast_best != brute_best) ++argmax_mismatches;
    }
  }
  c.note("instances", instances);
  c.require(value_mismatches == 0, "factored values equal brute-force sums to 1e-6");
  c.require(argmax_mismatches == 0, "argmax combinations agree with brute force");
}

// ---------------------------------------------------------------------------
// 3. Gradient correctness on frozen 2-layer / 8-unit networks
// ---------------------------------------------------------------------------

void criterion_3(Check& c) {
  Cohort cohort(20, 303, rewards::RewardConfig::vfd_step());
  Rng rng(3);
  auto idx = sample_indices(cohort.train_t.rows(), 16, rng);
  const auto batch = gather_batch(cohort.train_t, idx, &cohort.space);
  const std::size_t b = batch.states.rows();

  auto report_line = [&](const char* what, const ref::FdReport& r) {
    std::ostringstream msg;
    msg << what << ": " << r.checked << " probes, " << r.failed << " failed, "
        << r.skipped_kinks << " kink-skipped, worst rel " << r.worst_rel;
    c.require(r.ok(), msg.str());
  };

  {  // FactoredCQL
    TrainConfig cfg = TrainConfig::desk_preset(Algo::kFactoredCql);
    cfg.hidden = {8, 8};
    cfg.cql_alpha = 2.0f;
    auto m = FactoredCql::make(cfg, cohort.train_t.state_dim(), &cohort.space, Rng(31));
    nn::MlpGrads g1 = nn::MlpGrads::zeros_like(m.q1);
    nn::MlpGrads g2 = nn::MlpGrads::zeros_like(m.q2);
    const auto losses = m.compute(batch, &g1, &g2);
    const double ref_loss = ref::cql_loss(m.q1, m.q2, m.t1, m.t2, cohort.space, batch,
                                          cfg.cql_alpha, cfg.gamma);
    c.require(std::abs(losses.total - ref_loss) < 1e-5 * std::max(1.0, std::abs(ref_loss)),
              "FactoredCQL loss matches the double-precision reference");
    auto loss_fn = [&]() {
      return ref::cql_loss(m.q1, m.q2, m.t1, m.t2, cohort.space, batch, cfg.cql_alpha, cfg.gamma);
    };
    const auto states_d = ref::to_rows(batch.states);
    auto kinks = [&]() {
      return ref::mask_signature(m.q1, states_d) * 31 + ref::mask_signature(m.q2, states_d);
    };
    report_line("FactoredCQL critic1", ref::fd_check(m.q1, g1, loss_fn, 1e-3, 1e-3, 2e-5, 1, kinks));
    report_line("FactoredCQL critic2", ref::fd_check(m.q2, g2, loss_fn, 1e-3, 1e-3, 2e-5, 1, kinks));
  }

  {  // HybridIQL
    TrainConfig cfg = TrainConfig::desk_preset(Algo::kHybridIql);
    cfg.hidden = {8, 8};
    auto m = HybridIql::make(cfg, cohort.train_t.state_dim(), Rng(32));
    const Matrix critic_in = hconcat(hconcat(batch.states, batch.cont), batch.disc);
    const auto states_d = ref::to_rows(batch.states);
    const auto critic_in_d = ref::to_rows(critic_in);

    std::vector<float> adv_target(b);
    {
      const Matrix a = nn::mlp_forward(m.tq1, critic_in);
      const Matrix q = nn::mlp_forward(m.tq2, critic_in);
      for (std::size_t r = 0; r < b; ++r) adv_target[r] = std::min(a(r, 0), q(r, 0));
    }
    std::vector<double> adv_target_d(adv_target.begin(), adv_target.end());
    nn::MlpGrads gv = nn::MlpGrads::zeros_like(m.value);
    std::vector<float> advantages;
    m.value_loss(batch.states, adv_target, &gv, &advantages);
    report_line("HybridIQL value",
                ref::fd_check(
                    m.value, gv,
                    [&]() {
                      return ref::iql_value_loss(m.value, batch.states, adv_target_d,
                                                 cfg.expectile_tau);
                    },
                    1e-3, 1e-3, 2e-5, 1,
                    [&]() { return ref::mask_signature(m.value, states_d); }));

    std::vector<float> target(b);
    {
      const Matrix vn = nn::mlp_forward(m.value, batch.next_states);
      for (std::size_t r = 0; r < b; ++r)
        target[r] = batch.rewards[r] + cfg.gamma * (1.0f - batch.done[r]) * vn(r, 0);
    }
    std::vector<double> target_d(target.begin(), target.end());
    nn::MlpGrads gq1 = nn::MlpGrads::zeros_like(m.q1);
    nn::MlpGrads gq2 = nn::MlpGrads::zeros_like(m.q2);
    m.critic_loss(critic_in, target, &gq1, &gq2);
    report_line("HybridIQL critic",
                ref::fd_check(
                    m.q1, gq1,
                    [&]() { return ref::iql_critic_loss(m.q1, m.q2, critic_in_d, target_d); },
                    1e-3, 1e-3, 2e-5, 1,
                    [&]() { return ref::mask_signature(m.q1, critic_in_d); }));

    std::vector<double> adv_d(advantages.begin(), advantages.end());
    nn::MlpGrads ga = nn::MlpGrads::zeros_like(m.actor);
    std::vector<float> gls;
    m.actor_loss(batch.states, batch.cont, batch.disc, advantages, &ga, &gls);
    auto actor_ref = [&]() {
      return ref::iql_actor_loss(m.actor, m.log_std, batch.states, batch.cont, batch.disc, adv_d,
                                 m.cfg.beta);
    };
    report_line("HybridIQL actor",
                ref::fd_check(m.actor, ga, actor_ref, 1e-3, 1e-3, 2e-5, 1,
                              [&]() { return ref::mask_signature(m.actor, states_d); }));
    ref::FdReport log_std_report;
    for (int i = 0; i < kContActionCount; ++i)
      ref::fd_probe(log_std_report, &m.log_std[i], gls[i], actor_ref, 1e-3, 1e-3, 2e-5);
    report_line("HybridIQL log-std", log_std_report);
  }

  {  // HybridEDAC, including the diversity term's action-gradient path
    TrainConfig cfg = TrainConfig::desk_preset(Algo::kHybridEdac);
    cfg.hidden = {8, 8};
    cfg.ensemble_size = 3;
    cfg.eta = 1.0f;
    auto m = HybridEdac::make(cfg, cohort.train_t.state_dim(), Rng(33));
    const Matrix critic_in = hconcat(hconcat(batch.states, batch.cont), batch.disc);
    const auto critic_in_d = ref::to_rows(critic_in);
    const int action_width = kContActionCount + kModeCount;

    std::vector<float> target(b);
    Rng trng(5);
    for (auto& t : target) t = static_cast<float>(trng.normal());
    std::vector<double> target_d(target.begin(), target.end());
    std::vector<nn::MlpGrads> grads;
    for (const auto& critic : m.critics) grads.push_back(nn::MlpGrads::zeros_like(critic));
    const auto losses = m.critic_loss(batch, target, &grads);
    double ref_td = 0.0, ref_div = 0.0;
    const double ref_total = ref::edac_critic_loss(m.critics, critic_in_d, target_d, action_width,
                                                   cfg.eta, &ref_td, &ref_div);
    c.require(std::abs(losses.critic_total - ref_total) <
                  1e-4 * std::max(1.0, std::abs(ref_total)),
              "HybridEDAC critic loss (TD + diversity) matches the reference");
    auto critic_kinks = [&]() {
      std::uint64_t sig = 0;
      for (const auto& critic : m.critics) sig = sig * 31 + ref::mask_signature(critic, critic_in_d);
      return sig;
    };
    for (int i = 0; i < cfg.ensemble_size; ++i) {
      std::ostringstream name;
      name << "HybridEDAC critic" << i << " (TD + eta*diversity)";
      report_line(name.str().c_str(),
                  ref::fd_check(
                      m.critics[i], grads[i],
                      [&]() {
                        return ref::edac_critic_loss(m.critics, critic_in_d, target_d,
                                                     action_width, cfg.eta);
                      },
                      1e-3, 1e-3, 3e-5, 1, critic_kinks));
    }

    Matrix noise(b, kContActionCount);
    Rng nrng(9);
    for (float& v : noise.flat()) v = static_cast<float>(0.3 * nrng.normal());
    std::vector<double> uniforms(b);
    for (auto& u : uniforms) u = nrng.uniform();
    const auto ev = m.actor_eval(batch.states, &noise, uniforms);
    nn::MlpGrads ga = nn::MlpGrads::zeros_like(m.actor);
    m.actor_loss(batch.states, ev, &ga);
    auto actor_ref = [&]() {
      return ref::edac_actor_loss(m.actor, m.critics, batch.states, noise, ev.disc_onehot,
                                  m.alpha_cont(), m.alpha_disc());
    };
    report_line("HybridEDAC actor",
                ref::fd_check(m.actor, ga, actor_ref, 1e-3, 1e-3, 3e-5, 1, [&]() {
                  return ref::edac_actor_chain_sig(m.actor, m.critics, batch.states, noise,
                                                   ev.disc_onehot);
                }));
  }
}

// ---------------------------------------------------------------------------
// 4. FQE oracle on the tabular MDP
// ---------------------------------------------------------------------------

void criterion_4(Check& c) {
  const int T[5][2] = {{1, 2}, {2, 0}, {3, 4}, {4, 1}, {0, 3}};
  const double R[5][2] = {{0.9, 0.1}, {0.2, 0.8}, {0.5, 0.3}, {0.0, 1.0}, {0.7, 0.4}};
  const int pi[5] = {0, 1, 1, 1, 0};
  const double gamma = 0.9;

  std::vector<double> v(5, 0.0);
  for (int it = 0; it < 4000; ++it) {
    std::vector<double> next(5);
    for (int s = 0; s < 5; ++s) next[s] = R[s][pi[s]] + gamma * v[T[s][pi[s]]];
    v = next;
  }
  double v_exact = 0.0;
  for (double x : v) v_exact += x / 5.0;

  TransitionTable table;
  const int copies = 4;
  const int n = 10 * copies;
  table.states = Matrix(n, 5);
  table.next_states = Matrix(n, 5);
  table.cont = Matrix(n, kContActionCount, 0.0f);
  table.next_cont = table.cont;
  table.disc = Matrix(n, kModeCount, 0.0f);
  table.next_disc = Matrix(n, kModeCount, 0.0f);
  table.rewards.resize(n);
  table.done.assign(n, 0.0f);
  table.r_range.assign(n, 0.0f);
  table.episode_of.assign(n, 0);
  table.step_of.assign(n, 0);
  int row = 0;
  for (int copy = 0; copy < copies; ++copy)
    for (int s = 0; s < 5; ++s)
      for (int a = 0; a < 2; ++a, ++row) {
        table.states(row, s) = 1.0f;
        table.next_states(row, T[s][a]) = 1.0f;
        table.disc(row, a) = 1.0f;
        table.next_disc(row, pi[T[s][a]]) = 1.0f;
        table.rewards[row] = static_cast<float>(R[s][a]);
        if (copy == 0 && a == 0) table.episode_first_row.push_back(row);
      }

  std::vector<int> pi_copy(pi, pi + 5);
  PolicyFn policy = [pi_copy](const Matrix& states, Matrix& cont, Matrix& disc) {
    cont = Matrix(states.rows(), kContActionCount, 0.0f);
    disc = Matrix(states.rows(), kModeCount, 0.0f);
    for (std::size_t r = 0; r < states.rows(); ++r) {
      int s = 0;
      for (int i = 0; i < 5; ++i)
        if (states(r, i) > 0.5f) s = i;
      disc(r, pi_copy[s]) = 1.0f;
    }
  };

  FqeConfig cfg;
  cfg.hidden = {64, 64};
  cfg.gamma = static_cast<float>(gamma);
  cfg.steps = 15000;
  cfg.lr = 1e-3f;
  cfg.polyak = 0.01f;
  cfg.batch_size = 64;
  const auto plain = fqe_fit(&policy, table, cfg, 3);
  const double v_plain = estimate_v_pi(plain, table, policy);
  c.note("value iteration V^pi", v_exact);
  c.note("FQE V^pi", v_plain);
  c.require(std::abs(v_plain - v_exact) < 1e-2, "FQE matches value iteration within 1e-2");

  FqeConfig dist_cfg = cfg;
  dist_cfg.n_quantiles = 32;
  const auto dist = fqe_fit(&policy, table, dist_cfg, 3);
  const double v_dist = estimate_v_pi(dist, table, policy);
  c.note("DistFQE quantile-mean V^pi", v_dist);
  c.require(std::abs(v_dist - v_exact) < 5e-2, "DistFQE quantile mean within 5e-2");
}

// ---------------------------------------------------------------------------
// 5. CQL conservatism over a full run
// ---------------------------------------------------------------------------

void criterion_5(Check& c) {
  Cohort cohort(1000, 42, rewards::RewardConfig::vfd_step());
  c.note("training transitions", cohort.train_t.rows());

  TrainResult conservative, unregularized;
  auto run_with_alpha = [&](float alpha, TrainResult* out) {
    TrainConfig cfg = TrainConfig::desk_preset(Algo::kFactoredCql);
    cfg.steps = 20000;
    cfg.checkpoint_interval = 20000;
    cfg.cql_alpha = alpha;
    *out = train(cfg, cohort.train_t, &cohort.space, 1);
  };
  run_pair([&] { run_with_alpha(10.0f, &conservative); },
           [&] { run_with_alpha(0.0f, &unregularized); });

  long logged = 0, negative = 0;
  for (const auto& line : split(conservative.log_csv, '\n')) {
    if (line.empty() || line[0] == 's') continue;
    const auto parts = split(line, ',');
    ++logged;
    if (parse_double(parts[2], "cons1") < 0.0 || parse_double(parts[3], "cons2") < 0.0)
      ++negative;
  }
  c.note("logged conservative-loss rows", logged);
  c.require(logged >= 350 && negative == 0, "every logged conservative loss is non-negative");

  auto q_of = [&](const TrainResult& result) {
    TrainConfig cfg = TrainConfig::desk_preset(Algo::kFactoredCql);
    auto m = FactoredCql::make(cfg, cohort.train_t.state_dim(), &cohort.space, Rng(0));
    m.q1 = learn::detail::load_mlp(result.checkpoints.back(), "q1");
    m.q2 = learn::detail::load_mlp(result.checkpoints.back(), "q2");
    Matrix onehot(cohort.test_t.rows(), cohort.space.spec.one_hot_width());
    for (int i = 0; i < cohort.test_t.rows(); ++i)
      cohort.space.encode_one_hot_row(cohort.test_t.bins[i], onehot.row(i));
    return m.q_at(cohort.test_t.states, onehot);
  };
  const auto q10 = q_of(conservative);
  const auto q0 = q_of(unregularized);
  long below = 0;
  for (std::size_t i = 0; i < q10.size(); ++i)
    if (q10[i] <= q0[i]) ++below;
  const double frac = static_cast<double>(below) / q10.size();
  c.note("held-out probe pairs", q10.size());
  c.note("fraction with Q(alpha=10) <= Q(alpha=0)", frac);
  c.require(frac >= 0.90, "alpha=10 lower-bounds the unregularized Q on >= 90% of probes");
}

// ---------------------------------------------------------------------------
// 6. Discretize-then-reconstruct distribution shift
// ---------------------------------------------------------------------------

void criterion_6(Check& c) {
  Cohort cohort(1000, 42, rewards::RewardConfig::vfd_step());
  CoverageConfig cov_cfg;
  cov_cfg.hidden = {128, 128};
  cov_cfg.steps = 10000;
  const auto coverage = coverage_fit(cohort.train_t, cov_cfg, 0);

  std::vector<std::function<void()>> tasks;
  std::vector<std::vector<ReconstructionRow>> results(3);
  for (int seed = 1; seed <= 3; ++seed)
    tasks.push_back([&, seed] {
      TrainConfig cfg = TrainConfig::desk_preset(Algo::kHybridIql);
      cfg.steps = 8000;
      cfg.checkpoint_interval = 8000;
      const auto trained = train(cfg, cohort.train_t, nullptr, seed);
      const auto policy = policy_from_checkpoint(trained.checkpoints.back());
      results[seed - 1] =
          reconstruction_study(policy, cohort.space, coverage, cohort.test_t.states, seed);
    });
  run_tasks(std::move(tasks));

  for (int seed = 1; seed <= 3; ++seed) {
    double none = 0, bin_mode = 0, uniform = 0;
    long mismatches = 0;
    for (const auto& row : results[seed - 1]) {
      if (row.method == "none") none = row.d_pi;
      if (row.method == "bin_mode") bin_mode = row.d_pi;
      if (row.method == "uniform") uniform = row.d_pi;
      mismatches += row.re_discretization_mismatches;
    }
    std::ostringstream msg;
    msg << "seed " << seed << ": d(none)=" << format_g9(none)
        << " > d(bin_mode)=" << format_g9(bin_mode) << " > d(uniform)=" << format_g9(uniform);
    c.require(none > bin_mode && bin_mode > uniform, msg.str());
    c.require(mismatches == 0,
              "seed " + std::to_string(seed) + ": reconstructed actions re-discretize exactly");
  }
}

// ---------------------------------------------------------------------------
// 7. Trained policies vs the behavior policy
// ---------------------------------------------------------------------------

void criterion_7(Check& c) {
  Cohort cohort(1000, 42, rewards::RewardConfig::vfd_step());
  FqeConfig fqe_cfg;
  fqe_cfg.hidden = {128, 128};
  fqe_cfg.steps = 10000;
  CoverageConfig cov_cfg;
  cov_cfg.hidden = {128, 128};
  cov_cfg.steps = 10000;

  CoverageModel coverage;
  FqeModel behavior;
  run_pair([&] { coverage = coverage_fit(cohort.train_t, cov_cfg, 0); },
           [&] { behavior = fqe_fit(nullptr, cohort.train_t, fqe_cfg, 0); });
  const double v_b = estimate_v_behavior(behavior, cohort.test_t);
  c.note("behavior value V^pi_b", v_b);

  struct RunResult {
    double v_pi = 0.0;
    double d_pi = 0.0;
    bool diverged = false;
  };
  const Algo algos[] = {Algo::kFactoredCql, Algo::kHybridIql, Algo::kHybridEdac};
  RunResult results[3][3];

  std::vector<std::function<void()>> tasks;
  for (int ai = 0; ai < 3; ++ai)
    for (int seed = 1; seed <= 3; ++seed)
      tasks.push_back([&, ai, seed] {
        const Algo algo = algos[ai];
        TrainConfig cfg = TrainConfig::desk_preset(algo);
        cfg.steps = 20000;
        cfg.checkpoint_interval = 20000;
        const auto trained =
            train(cfg, cohort.train_t, algo == Algo::kFactoredCql ? &cohort.space : nullptr, seed);
        const auto policy = policy_from_checkpoint(trained.checkpoints.back(), &cohort.space);
        RunResult r;
        Matrix cont, disc;
        policy(cohort.test_t.states, cont, disc);
        r.d_pi = coverage_score(coverage, cohort.test_t.states, cont, disc).total;
        try {
          const auto fqe = fqe_fit(&policy, cohort.train_t, fqe_cfg, 0);
          r.v_pi = estimate_v_pi(fqe, cohort.test_t, policy);
        } catch (const NumericError&) {
          r.diverged = true;
        }
        results[ai][seed - 1] = r;
      });
  run_tasks(std::move(tasks));

  double mean_d[3] = {0, 0, 0};
  for (int ai = 0; ai < 3; ++ai) {
    int beats = 0;
    for (int s = 0; s < 3; ++s) {
      const auto& r = results[ai][s];
      std::ostringstream line;
      line << algo_name(algos[ai]) << " seed " << (s + 1) << ": V^pi "
           << (r.diverged ? "diverged" : format_g9(r.v_pi)) << ", d^pi " << format_g9(r.d_pi);
      c.log << "  " << line.str() << "\n";
      if (!r.diverged && r.v_pi >= v_b) ++beats;
      mean_d[ai] += r.d_pi / 3.0;
    }
    std::ostringstream msg;
    msg << algo_name(algos[ai]) << " achieves V^pi >= V^pi_b on " << beats << "/3 seeds";
    c.require(beats >= 2, msg.str());
  }
  std::ostringstream msg;
  msg << "HybridIQL has the highest mean d^pi (iql " << format_g9(mean_d[1]) << ", cql "
      << format_g9(mean_d[0]) << ", edac " << format_g9(mean_d[2]) << ")";
  c.require(mean_d[1] > mean_d[0] && mean_d[1] > mean_d[2], msg.str());
}

// ---------------------------------------------------------------------------
// 8. Reward design: correlations and the terminal-weight sweep
// ---------------------------------------------------------------------------

void criterion_8(Check& c) {
  FqeConfig fqe_cfg;
  fqe_cfg.hidden = {128, 128};
  fqe_cfg.steps = 8000;

  auto rho_for = [&](const rewards::RewardConfig& reward, int seed) {
    Cohort cohort(1000, 42, reward);
    TrainConfig cfg = TrainConfig::desk_preset(Algo::kFactoredCql);
    cfg.steps = 10000;
    cfg.checkpoint_interval = 10000;
    const auto trained = train(cfg, cohort.train_t, &cohort.space, seed);
    const auto policy = policy_from_checkpoint(trained.checkpoints.back(), &cohort.space);
    const auto fqe = fqe_fit(&policy, cohort.train_t, fqe_cfg, seed);
    QFn q_fn = [&](const Matrix& s, const Matrix& cont, const Matrix& disc) {
      return fqe.q_values(s, cont, disc);
    };
    return reward_effectiveness(q_fn, cohort.test_t);
  };

  // per-seed comparison: per-step VFD + ranges vs terminal mortality
  double rho_vfd[3], rho_mort[3];
  {
    std::vector<std::function<void()>> tasks;
    for (int seed = 1; seed <= 3; ++seed) {
      tasks.push_back(
          [&, seed] { rho_vfd[seed - 1] = rho_for(rewards::RewardConfig::vfd_step(), seed).rho_range; });
      tasks.push_back([&, seed] {
        rho_mort[seed - 1] = rho_for(rewards::RewardConfig::mortality_only(), seed).rho_range;
      });
    }
    run_tasks(std::move(tasks));
  }
  for (int s = 0; s < 3; ++s) {
    std::ostringstream msg;
    msg << "seed " << (s + 1) << ": rho_range(vfd-step) " << format_g9(rho_vfd[s])
        << " > rho_range(mortality) " << format_g9(rho_mort[s]);
    c.require(rho_vfd[s] > rho_mort[s], msg.str());
  }

  // terminal-mode weight sweep: the range correlation falls as w grows
  const std::vector<double> weights = {0.0, 1.0, 5.0, 25.0};
  std::vector<double> rho_w(weights.size());
  {
    std::vector<std::function<void()>> tasks;
    for (std::size_t wi = 0; wi < weights.size(); ++wi)
      tasks.push_back([&, wi] {
        auto reward = rewards::RewardConfig::vfd_terminal();
        reward.vfd.w_vfd = weights[wi];
        rho_w[wi] = rho_for(reward, 1).rho_range;
      });
    run_tasks(std::move(tasks));
  }
  for (std::size_t wi = 0; wi < weights.size(); ++wi)
    c.note("terminal w_vfd=" + format_g9(weights[wi]) + " rho_range", rho_w[wi]);
  bool monotone = true;
  for (std::size_t wi = 1; wi < weights.size(); ++wi)
    monotone = monotone && rho_w[wi] <= rho_w[wi - 1] + 0.05;
  c.require(monotone, "range correlation declines (within 0.05 jitter) as w_vfd grows");
  c.require(rho_w.back() < rho_w.front() - 0.10,
            "range correlation at the largest weight sits well below the w=0 baseline");
}

// ---------------------------------------------------------------------------
// 9. Pipeline invariants and bitwise determinism
// ---------------------------------------------------------------------------

void criterion_9(Check& c) {
  synth::GeneratorConfig gen;
  gen.n_patients = 150;
  gen.seed = 99;

  PipelineStats s1, s2;
  auto d1 = synth::generate(gen, s1);
  auto d2 = synth::generate(gen, s2);
  c.require(s1.total_rejections() == 0 && s1.dropped_out_of_range == 0,
            "generated cohort passes preprocessing with zero rejections");

  stratified_split(d1, 0.2, 5, s1);
  stratified_split(d2, 0.2, 5, s2);
  std::map<std::string, Split> patient_split;
  bool disjoint = true;
  for (const auto& e : d1.episodes) {
    auto it = patient_split.find(e.patient_id);
    if (it == patient_split.end())
      patient_split[e.patient_id] = e.split;
    else if (it->second != e.split)
      disjoint = false;
  }
  c.require(disjoint, "no patient appears in both splits");

  rewards::annotate_rewards(d1, rewards::RangeSpec::defaults(), rewards::RewardConfig::vfd_step());
  rewards::annotate_rewards(d2, rewards::RangeSpec::defaults(), rewards::RewardConfig::vfd_step());
  std::ostringstream f1, f2;
  {
    const auto p1 = std::filesystem::temp_directory_path() / "ventrl_acc_a.csv";
    const auto p2 = std::filesystem::temp_directory_path() / "ventrl_acc_b.csv";
    write_dataset(p1.string(), d1);
    write_dataset(p2.string(), d2);
    c.require(read_text_file(p1.string()) == read_text_file(p2.string()),
              "identical seeds produce byte-identical dataset files");
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);
  }

  const auto stats = compute_norm_stats(d1, s1);
  const auto spec = actions::BinSpec::clinician_default();
  const auto space = actions::build_restricted_space(d1, spec);
  const auto train_t = build_transitions(d1, stats, Split::kTrain, &spec);
  const auto test_t = build_transitions(d1, stats, Split::kTest, &spec);

  auto train_once = [&]() {
    TrainConfig cfg = TrainConfig::desk_preset(Algo::kFactoredCql);
    cfg.hidden = {32, 32};
    cfg.steps = 500;
    cfg.checkpoint_interval = 500;
    return train(cfg, train_t, &space, 7);
  };
  const auto r1 = train_once();
  const auto r2 = train_once();
  {
    const auto p1 = std::filesystem::temp_directory_path() / "ventrl_acc_a.ck";
    const auto p2 = std::filesystem::temp_directory_path() / "ventrl_acc_b.ck";
    r1.checkpoints.back().save(p1.string());
    r2.checkpoints.back().save(p2.string());
    c.require(read_text_file(p1.string()) == read_text_file(p2.string()),
              "identical seeds produce byte-identical checkpoints");
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);
  }

  auto report_once = [&]() {
    FqeConfig fqe_cfg;
    fqe_cfg.hidden = {32, 32};
    fqe_cfg.steps = 400;
    CoverageConfig cov_cfg;
    cov_cfg.hidden = {32, 32};
    cov_cfg.steps = 400;
    const auto coverage = coverage_fit(train_t, cov_cfg, 3);
    const auto behavior = fqe_fit(nullptr, train_t, fqe_cfg, 3);
    EvalReport report;
    report.v_behavior = estimate_v_behavior(behavior, test_t);
    const auto policy = policy_from_checkpoint(r1.checkpoints.back(), &space);
    CheckpointMetrics m;
    m.id = "final";
    m.step = r1.checkpoints.back().step;
    Matrix cont, disc;
    policy(test_t.states, cont, disc);
    m.d_detail = coverage_score(coverage, test_t.states, cont, disc);
    m.d_pi = m.d_detail.total;
    const auto fqe = fqe_fit(&policy, train_t, fqe_cfg, 3);
    m.v_pi = estimate_v_pi(fqe, test_t, policy);
    report.rows.push_back(m);
    report.selected = 0;
    return report.to_csv();
  };
  c.require(report_once() == report_once(), "identical seeds produce byte-identical reports");
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i)
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = std::atoi(argv[i + 1]);

  struct Criterion {
    int id;
    const char* name;
    void (*fn)(Check&);
  };
  const Criterion criteria[] = {
      {1, "reward formulas exact", criterion_1},
      {2, "factored-Q equivalence", criterion_2},
      {3, "gradient correctness", criterion_3},
      {4, "FQE oracle on the tabular MDP", criterion_4},
      {5, "CQL conservatism", criterion_5},
      {6, "discretize-then-reconstruct distribution shift", criterion_6},
      {7, "trained policies vs behavior", criterion_7},
      {8, "reward-design direction", criterion_8},
      {9, "pipeline invariants and determinism", criterion_9},
  };

  bool all_passed = true;
  for (const auto& criterion : criteria) {
    if (only != 0 && criterion.id != only) continue;
    Check check;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criterion.fn(check);
    } catch (const std::exception& e) {
      check.passed = false;
      check.log << "  exception: " << e.what() << "\n";
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (check.passed ? "[PASS]" : "[FAIL]") << " criterion " << criterion.id << " ("
              << static_cast<long>(seconds) << "s): " << criterion.name << "\n";
    std::cout << check.log.str();
    std::cout.flush();
    all_passed = all_passed && check.passed;
  }
  std::cout << (all_passed ? "acceptance: all criteria passed" : "acceptance: FAILURES above")
            << "\n";
  return all_passed ? 0 : 1;
}
