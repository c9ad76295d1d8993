#pragma once

#include <vector>

#include "ventrl/actions/space.hpp"
#include "ventrl/core/matrix.hpp"
#include "ventrl/core/rng.hpp"
#include "ventrl/data/types.hpp"

namespace ventrl::learn {

using data::Dataset;
using data::NormStats;

// Flat transition storage for one split: states z-scored, continuous settings
// mapped onto [-1,1], the mode one-hot. Terminal transitions keep their own
// state as next_state with done = 1, so bootstrap terms vanish.
struct TransitionTable {
  Matrix states, next_states;  // n x state_dim
  Matrix cont, next_cont;      // n x 5
  Matrix disc, next_disc;      // n x 2
  std::vector<float> rewards;
  std::vector<float> done;
  std::vector<float> r_range;  // range component, kept for reward diagnostics
  std::vector<int> episode_of;
  std::vector<int> step_of;
  std::vector<int> episode_first_row;  // row of each episode's first step
  std::vector<actions::DiscreteAction> bins;  // from raw-unit actions, masking off

  int rows() const { return static_cast<int>(rewards.size()); }
  int state_dim() const { return static_cast<int>(states.cols()); }
};

namespace detail {

inline void fill_normalized_action(const data::HybridAction& a, std::span<float> cont,
                                   std::span<float> disc) {
  cont[0] = data::normalize_setting(data::kRr, a.rr);
  cont[1] = data::normalize_setting(data::kVt, a.vt);
  cont[2] = data::normalize_setting(data::kDp, a.dp);
  cont[3] = data::normalize_setting(data::kPeep, a.peep);
  cont[4] = data::normalize_setting(data::kFio2, a.fio2);
  disc[0] = a.mode == data::VentMode::kVcv ? 1.0f : 0.0f;
  disc[1] = a.mode == data::VentMode::kPcv ? 1.0f : 0.0f;
}

}  // namespace detail

// Builds transitions from a raw-unit, reward-annotated dataset.
inline TransitionTable build_transitions(const Dataset& raw, const NormStats& stats,
                                         data::Split split,
                                         const actions::BinSpec* bin_spec = nullptr) {
  if (!stats.valid) throw ValidationError("build_transitions: missing normalization stats");
  std::size_t n = 0;
  for (const auto& e : raw.episodes)
    if (e.split == split || split == data::Split::kNone) n += e.steps.size();
  if (n == 0) throw ValidationError("build_transitions: split holds no steps");

  TransitionTable t;
  t.states = Matrix(n, data::kStateVarCount);
  t.next_states = Matrix(n, data::kStateVarCount);
  t.cont = Matrix(n, data::kContActionCount);
  t.next_cont = Matrix(n, data::kContActionCount);
  t.disc = Matrix(n, data::kModeCount);
  t.next_disc = Matrix(n, data::kModeCount);
  t.rewards.resize(n);
  t.done.resize(n);
  t.r_range.resize(n);
  t.episode_of.resize(n);
  t.step_of.resize(n);
  if (bin_spec) t.bins.resize(n);

  std::size_t row = 0;
  int episode_index = 0;
  for (const auto& e : raw.episodes) {
    if (!(e.split == split || split == data::Split::kNone)) continue;
    t.episode_first_row.push_back(static_cast<int>(row));
    for (std::size_t k = 0; k < e.steps.size(); ++k, ++row) {
      const auto& s = e.steps[k];
      const bool terminal = k + 1 == e.steps.size();
      const auto& next = terminal ? s : e.steps[k + 1];
      for (int v = 0; v < data::kStateVarCount; ++v) {
        t.states(row, v) = data::normalize_state_var(v, s.state[v], stats);
        t.next_states(row, v) = data::normalize_state_var(v, next.state[v], stats);
      }
      detail::fill_normalized_action(s.action, t.cont.row(row), t.disc.row(row));
      detail::fill_normalized_action(next.action, t.next_cont.row(row), t.next_disc.row(row));
      if (!s.reward.filled)
        throw ValidationError("build_transitions: rewards not annotated");
      t.rewards[row] = s.reward.total();
      t.r_range[row] = s.reward.range;
      t.done[row] = terminal ? 1.0f : 0.0f;
      t.episode_of[row] = episode_index;
      t.step_of[row] = static_cast<int>(k);
      if (bin_spec) t.bins[row] = actions::discretize(s.action, *bin_spec, false);
    }
    ++episode_index;
  }
  return t;
}

struct Batch {
  Matrix states, next_states;
  Matrix cont, disc, next_cont, next_disc;
  Matrix onehot;  // filled when a restricted space is supplied
  std::vector<float> rewards, done;
};

inline Batch gather_batch(const TransitionTable& t, std::span<const int> idx,
                          const actions::RestrictedActionSpace* space = nullptr) {
  const std::size_t b = idx.size();
  Batch out;
  out.states = Matrix(b, t.states.cols());
  out.next_states = Matrix(b, t.states.cols());
  out.cont = Matrix(b, t.cont.cols());
  out.next_cont = Matrix(b, t.cont.cols());
  out.disc = Matrix(b, t.disc.cols());
  out.next_disc = Matrix(b, t.disc.cols());
  out.rewards.resize(b);
  out.done.resize(b);
  if (space) out.onehot = Matrix(b, space->spec.one_hot_width());
  for (std::size_t i = 0; i < b; ++i) {
    const int r = idx[i];
    auto copy_row = [&](const Matrix& src, Matrix& dst) {
      std::copy(src.row(r).begin(), src.row(r).end(), dst.row(i).begin());
    };
    copy_row(t.states, out.states);
    copy_row(t.next_states, out.next_states);
    copy_row(t.cont, out.cont);
    copy_row(t.next_cont, out.next_cont);
    copy_row(t.disc, out.disc);
    copy_row(t.next_disc, out.next_disc);
    out.rewards[i] = t.rewards[r];
    out.done[i] = t.done[r];
    if (space) {
      if (space->find(t.bins[r]) < 0)
        throw ValidationError("batch action outside the restricted action space");
      space->encode_one_hot_row(t.bins[r], out.onehot.row(i));
    }
  }
  return out;
}

inline std::vector<int> sample_indices(int n, int batch_size, Rng& rng) {
  std::vector<int> idx(batch_size);
  for (int& v : idx) v = rng.uniform_int(n);
  return idx;
}

}  // namespace ventrl::learn
