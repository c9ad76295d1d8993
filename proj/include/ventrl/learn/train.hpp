#pragma once

#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "ventrl/core/checkpoint.hpp"
#include "ventrl/learn/factored_cql.hpp"
#include "ventrl/learn/hybrid_edac.hpp"
#include "ventrl/learn/hybrid_iql.hpp"

namespace ventrl::learn {

// Batched deterministic policy: fills normalized continuous actions and the
// one-hot mode for a batch of normalized states.
using PolicyFn = std::function<void(const Matrix& states, Matrix& cont, Matrix& disc)>;

namespace detail {

inline void save_mlp(Checkpoint& ck, const std::string& prefix, const nn::MlpParams& p) {
  for (std::size_t k = 0; k < p.layers.size(); ++k) {
    ck.add(prefix + ".layer" + std::to_string(k) + ".w", p.layers[k].w);
    ck.add(prefix + ".layer" + std::to_string(k) + ".b", p.layers[k].b);
  }
}

inline nn::MlpParams load_mlp(const Checkpoint& ck, const std::string& prefix) {
  nn::MlpParams p;
  for (std::size_t k = 0;; ++k) {
    const std::string base = prefix + ".layer" + std::to_string(k);
    if (!ck.has(base + ".w")) break;
    nn::DenseLayer layer;
    layer.w = ck.get(base + ".w");
    const Matrix& b = ck.get(base + ".b");
    layer.b.assign(b.flat().begin(), b.flat().end());
    p.layers.push_back(std::move(layer));
  }
  if (p.layers.empty()) throw IoError("checkpoint: no layers under '" + prefix + "'");
  return p;
}

}  // namespace detail

inline Checkpoint snapshot(const FactoredCql& m, std::uint64_t seed, long step,
                           const std::string& config_hash) {
  Checkpoint ck;
  ck.seed = seed;
  ck.step = step;
  ck.config_hash = config_hash;
  ck.algo = algo_name(Algo::kFactoredCql);
  detail::save_mlp(ck, "q1", m.q1);
  detail::save_mlp(ck, "q2", m.q2);
  detail::save_mlp(ck, "t1", m.t1);
  detail::save_mlp(ck, "t2", m.t2);
  return ck;
}

inline Checkpoint snapshot(const HybridIql& m, std::uint64_t seed, long step,
                           const std::string& config_hash) {
  Checkpoint ck;
  ck.seed = seed;
  ck.step = step;
  ck.config_hash = config_hash;
  ck.algo = algo_name(Algo::kHybridIql);
  detail::save_mlp(ck, "value", m.value);
  detail::save_mlp(ck, "q1", m.q1);
  detail::save_mlp(ck, "q2", m.q2);
  detail::save_mlp(ck, "tq1", m.tq1);
  detail::save_mlp(ck, "tq2", m.tq2);
  detail::save_mlp(ck, "actor", m.actor);
  ck.add("log_std", m.log_std);
  return ck;
}

inline Checkpoint snapshot(const HybridEdac& m, std::uint64_t seed, long step,
                           const std::string& config_hash) {
  Checkpoint ck;
  ck.seed = seed;
  ck.step = step;
  ck.config_hash = config_hash;
  ck.algo = algo_name(Algo::kHybridEdac);
  detail::save_mlp(ck, "actor", m.actor);
  for (std::size_t i = 0; i < m.critics.size(); ++i) {
    detail::save_mlp(ck, "critic" + std::to_string(i), m.critics[i]);
    detail::save_mlp(ck, "target" + std::to_string(i), m.targets[i]);
  }
  ck.add("log_alpha", std::vector<float>{m.log_alpha_cont, m.log_alpha_disc});
  return ck;
}

struct TrainResult {
  std::vector<Checkpoint> checkpoints;
  std::string log_csv;
  long skipped_batches = 0;
};

// Single-threaded training loop: deterministic batch stream per seed,
// periodic checkpoints, CSV loss log.
inline TrainResult train(const TrainConfig& cfg, const TransitionTable& table,
                         const actions::RestrictedActionSpace* space, std::uint64_t seed) {
  Rng run(seed);
  Rng init = run.split("init");
  Rng batches = run.split("batches");
  Rng updates = run.split("updates");
  const std::string hash = cfg.hash();

  TrainResult result;
  std::ostringstream log;

  auto maybe_checkpoint = [&](auto& learner, long step) {
    if (step % cfg.checkpoint_interval == 0 || step == cfg.steps)
      result.checkpoints.push_back(snapshot(learner, seed, step, hash));
  };

  switch (cfg.algo) {
    case Algo::kFactoredCql: {
      if (!space) throw ConfigError("train: FactoredCQL needs a restricted action space");
      auto m = FactoredCql::make(cfg, table.state_dim(), space, init);
      log << "step,total,conservative1,conservative2,mse1,mse2\n";
      for (long step = 1; step <= cfg.steps; ++step) {
        const auto idx = sample_indices(table.rows(), cfg.batch_size, batches);
        const auto batch = gather_batch(table, idx, space);
        const auto losses = m.update(batch);
        if (step % cfg.log_interval == 0 || step == 1)
          log << step << "," << format_g9(losses.total) << ","
              << format_g9(losses.conservative1) << "," << format_g9(losses.conservative2) << ","
              << format_g9(losses.mse1) << "," << format_g9(losses.mse2) << "\n";
        maybe_checkpoint(m, step);
      }
      break;
    }
    case Algo::kHybridIql: {
      auto m = HybridIql::make(cfg, table.state_dim(), init);
      log << "step,value_loss,critic_loss,actor_loss,mean_advantage\n";
      for (long step = 1; step <= cfg.steps; ++step) {
        const auto idx = sample_indices(table.rows(), cfg.batch_size, batches);
        const auto batch = gather_batch(table, idx);
        const auto losses = m.update(batch);
        if (step % cfg.log_interval == 0 || step == 1)
          log << step << "," << format_g9(losses.value_loss) << ","
              << format_g9(losses.critic_loss) << "," << format_g9(losses.actor_loss) << ","
              << format_g9(losses.mean_advantage) << "\n";
        maybe_checkpoint(m, step);
      }
      result.skipped_batches = m.skipped_batches;
      break;
    }
    case Algo::kHybridEdac: {
      TrainConfig edac_cfg = cfg;
      if (edac_cfg.q_abs_limit == 0.0f) {
        float max_abs_r = 0.0f;
        for (float r : table.rewards) max_abs_r = std::max(max_abs_r, std::abs(r));
        edac_cfg.q_abs_limit = 10.0f * (max_abs_r / (1.0f - cfg.gamma) + 10.0f);
      }
      auto m = HybridEdac::make(edac_cfg, table.state_dim(), init);
      log << "step,critic_total,td,diversity,actor_loss,alpha_cont,alpha_disc,mean_abs_q\n";
      for (long step = 1; step <= cfg.steps; ++step) {
        const auto idx = sample_indices(table.rows(), cfg.batch_size, batches);
        const auto batch = gather_batch(table, idx);
        const auto losses = m.update(batch, updates);
        if (step % cfg.log_interval == 0 || step == 1)
          log << step << "," << format_g9(losses.critic_total) << "," << format_g9(losses.td)
              << "," << format_g9(losses.diversity) << "," << format_g9(losses.actor_loss) << ","
              << format_g9(m.alpha_cont()) << "," << format_g9(m.alpha_disc()) << ","
              << format_g9(losses.mean_abs_q) << "\n";
        maybe_checkpoint(m, step);
      }
      break;
    }
  }
  result.log_csv = log.str();
  return result;
}

// ---------------------------------------------------------------------------
// Policies for evaluation
// ---------------------------------------------------------------------------

// Deterministic policy from a checkpoint. Discrete (FactoredCQL) policies are
// converted to continuous actions by bin-mode reconstruction so the same
// evaluators serve all three learners.
inline PolicyFn policy_from_checkpoint(const Checkpoint& ck,
                                       const actions::RestrictedActionSpace* space = nullptr) {
  const Algo algo = algo_from_name(ck.algo);
  switch (algo) {
    case Algo::kHybridIql: {
      auto actor = std::make_shared<nn::MlpParams>(detail::load_mlp(ck, "actor"));
      return [actor](const Matrix& states, Matrix& cont, Matrix& disc) {
        const Matrix out = nn::mlp_forward(*actor, states);
        cont.resize(states.rows(), data::kContActionCount);
        disc.resize(states.rows(), data::kModeCount);
        disc.fill(0.0f);
        for (std::size_t r = 0; r < states.rows(); ++r) {
          for (int i = 0; i < data::kContActionCount; ++i) cont(r, i) = nn::tanh_open(out(r, i));
          const int mode =
              out(r, data::kContActionCount) >= out(r, data::kContActionCount + 1) ? 0 : 1;
          disc(r, mode) = 1.0f;
        }
      };
    }
    case Algo::kHybridEdac: {
      auto actor = std::make_shared<nn::MlpParams>(detail::load_mlp(ck, "actor"));
      return [actor](const Matrix& states, Matrix& cont, Matrix& disc) {
        const Matrix out = nn::mlp_forward(*actor, states);
        cont.resize(states.rows(), data::kContActionCount);
        disc.resize(states.rows(), data::kModeCount);
        disc.fill(0.0f);
        for (std::size_t r = 0; r < states.rows(); ++r) {
          for (int i = 0; i < data::kContActionCount; ++i) cont(r, i) = nn::tanh_open(out(r, i));
          const int logits0 = 2 * data::kContActionCount;
          const int mode = out(r, logits0) >= out(r, logits0 + 1) ? 0 : 1;
          disc(r, mode) = 1.0f;
        }
      };
    }
    case Algo::kFactoredCql: {
      if (!space)
        throw ConfigError("policy_from_checkpoint: FactoredCQL needs the restricted space");
      auto q1 = std::make_shared<nn::MlpParams>(detail::load_mlp(ck, "q1"));
      auto q2 = std::make_shared<nn::MlpParams>(detail::load_mlp(ck, "q2"));
      return [q1, q2, space](const Matrix& states, Matrix& cont, Matrix& disc) {
        const Matrix qa = actions::factored_q_values(nn::mlp_forward(*q1, states), *space);
        const Matrix qb = actions::factored_q_values(nn::mlp_forward(*q2, states), *space);
        cont.resize(states.rows(), data::kContActionCount);
        disc.resize(states.rows(), data::kModeCount);
        disc.fill(0.0f);
        Rng unused(0);
        for (std::size_t r = 0; r < states.rows(); ++r) {
          int best = 0;
          float best_val = -std::numeric_limits<float>::infinity();
          for (std::size_t j = 0; j < qa.cols(); ++j) {
            const float v = std::min(qa(r, j), qb(r, j));
            if (v > best_val) {
              best_val = v;
              best = static_cast<int>(j);
            }
          }
          const auto a = actions::reconstruct(space->combos[best],
                                              actions::ReconstructMethod::kBinMode, *space, unused);
          cont(r, 0) = data::normalize_setting(data::kRr, a.rr);
          cont(r, 1) = data::normalize_setting(data::kVt, a.vt);
          cont(r, 2) = data::normalize_setting(data::kDp, a.dp);
          cont(r, 3) = data::normalize_setting(data::kPeep, a.peep);
          cont(r, 4) = data::normalize_setting(data::kFio2, a.fio2);
          disc(r, a.mode == data::VentMode::kVcv ? 0 : 1) = 1.0f;
        }
      };
    }
  }
  throw ConfigError("policy_from_checkpoint: unsupported algorithm");
}

// Single-state convenience: normalized in, clinical units out.
inline data::HybridAction act(const PolicyFn& policy, const data::StateVector& raw_state,
                              const data::NormStats& stats) {
  Matrix state(1, data::kStateVarCount);
  for (int v = 0; v < data::kStateVarCount; ++v)
    state(0, v) = data::normalize_state_var(v, raw_state[v], stats);
  Matrix cont, disc;
  policy(state, cont, disc);
  data::HybridAction a;
  a.mode = disc(0, 1) > disc(0, 0) ? data::VentMode::kPcv : data::VentMode::kVcv;
  a.rr = data::denormalize_setting(data::kRr, cont(0, 0));
  a.vt = data::denormalize_setting(data::kVt, cont(0, 1));
  a.dp = data::denormalize_setting(data::kDp, cont(0, 2));
  a.peep = data::denormalize_setting(data::kPeep, cont(0, 3));
  a.fio2 = data::denormalize_setting(data::kFio2, cont(0, 4));
  return a;
}

}  // namespace ventrl::learn
