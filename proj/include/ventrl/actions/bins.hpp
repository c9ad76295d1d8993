#pragma once

#include <array>
#include <string>
#include <vector>

#include "ventrl/core/format.hpp"
#include "ventrl/data/types.hpp"

namespace ventrl::actions {

using data::HybridAction;
using data::VentMode;

// One discretization dimension: ordered left-inclusive edges (the last bin is
// closed on the right), plus an optional trailing null bin for settings that
// are not applicable under the current ventilation mode.
struct BinDim {
  std::string name;
  std::vector<float> edges;
  bool has_null = false;

  int real_bins() const { return static_cast<int>(edges.size()) - 1; }
  int n_bins() const { return real_bins() + (has_null ? 1 : 0); }
  int null_bin() const { return has_null ? real_bins() : -1; }
};

// Clinician bin table. The mode-conditioned dimensions (vt under PCV, dp
// under VCV) carry the null bins; the per-dimension widths sum to 37 and the
// full product is 26,880 combinations.
struct BinSpec {
  std::array<BinDim, data::kActionDimCount> dims;

  static BinSpec clinician_default() {
    BinSpec spec;
    spec.dims[data::kMode] = {"mode", {0.0f, 1.0f, 2.0f}, false};
    spec.dims[data::kRr] = {"rr", {5, 10, 15, 20, 25, 30, 35, 60}, false};
    spec.dims[data::kVt] = {"vt", {3, 4, 5, 6, 7, 8, 9, 10, 11, 12}, true};
    spec.dims[data::kDp] = {"dp", {0, 6, 10, 14, 18, 22, 26, 40}, true};
    spec.dims[data::kPeep] = {"peep", {0, 4, 8, 12, 16, 20, 50}, false};
    spec.dims[data::kFio2] = {"fio2", {21, 40, 60, 80, 100}, false};
    return spec;
  }

  int one_hot_width() const {
    int w = 0;
    for (const auto& d : dims) w += d.n_bins();
    return w;
  }
  int offset(int dim) const {
    int w = 0;
    for (int i = 0; i < dim; ++i) w += dims[i].n_bins();
    return w;
  }
  long long full_combination_count() const {
    long long n = 1;
    for (const auto& d : dims) n *= d.n_bins();
    return n;
  }

  void validate() const {
    for (const auto& d : dims) {
      if (d.edges.size() < 2) throw ValidationError("BinSpec: dimension " + d.name + " has no bins");
      for (std::size_t i = 1; i < d.edges.size(); ++i)
        if (d.edges[i] <= d.edges[i - 1])
          throw ValidationError("BinSpec: edges not strictly increasing in " + d.name);
    }
  }
};

struct DiscreteAction {
  std::array<int, data::kActionDimCount> bins{};

  bool operator==(const DiscreteAction&) const = default;
  bool operator<(const DiscreteAction& other) const { return bins < other.bins; }
};

namespace detail {

inline int lookup_bin(const BinDim& dim, float value, const char* dim_name) {
  if (value < dim.edges.front() || value > dim.edges.back())
    throw ValidationError(std::string("discretize: ") + dim_name + " value " +
                          format_g9(value) + " outside [" + format_g9(dim.edges.front()) + ", " +
                          format_g9(dim.edges.back()) + "]");
  if (value >= dim.edges[dim.edges.size() - 2]) return dim.real_bins() - 1;  // last bin closed
  int bin = 0;
  while (value >= dim.edges[bin + 1]) ++bin;
  return bin;
}

}  // namespace detail

// Left-inclusive bin lookup. With mode masking enabled, the setting that the
// current mode does not use is assigned its null bin.
inline DiscreteAction discretize(const HybridAction& a, const BinSpec& spec,
                                 bool mode_masking = false) {
  DiscreteAction d;
  d.bins[data::kMode] = a.mode == VentMode::kPcv ? 1 : 0;
  for (int dim = data::kRr; dim < data::kActionDimCount; ++dim) {
    const bool masked =
        mode_masking && ((dim == data::kDp && a.mode == VentMode::kVcv) ||
                         (dim == data::kVt && a.mode == VentMode::kPcv));
    if (masked) {
      if (!spec.dims[dim].has_null)
        throw ValidationError("discretize: no null bin configured for " + spec.dims[dim].name);
      d.bins[dim] = spec.dims[dim].null_bin();
      continue;
    }
    d.bins[dim] = detail::lookup_bin(spec.dims[dim], a.setting(dim), spec.dims[dim].name.c_str());
  }
  return d;
}

// Plain-text bin table: one line per dimension, "name edge edge ... [null]".
inline BinSpec read_bin_table(const std::string& path) {
  BinSpec spec;
  std::array<bool, data::kActionDimCount> seen{};
  for (const auto& raw_line : split(read_text_file(path), '\n')) {
    const std::string line = trim(raw_line);
    if (line.empty() || line[0] == '#') continue;
    auto parts = split(line, ' ');
    std::erase_if(parts, [](const std::string& s) { return s.empty(); });
    const int dim = data::action_var_index(parts[0]);
    if (dim < 0) throw IoError("bin table: unknown action '" + parts[0] + "'");
    BinDim d;
    d.name = parts[0];
    for (std::size_t i = 1; i < parts.size(); ++i) {
      if (parts[i] == "null")
        d.has_null = true;
      else
        d.edges.push_back(static_cast<float>(parse_double(parts[i], "bin edge")));
    }
    spec.dims[dim] = std::move(d);
    seen[dim] = true;
  }
  for (int i = 0; i < data::kActionDimCount; ++i)
    if (!seen[i]) throw IoError("bin table: missing dimension " + std::string(data::kActionVars[i].name));
  spec.validate();
  return spec;
}

inline std::string bin_table_text(const BinSpec& spec) {
  std::string out = "# action bins, left-inclusive edges; trailing 'null' adds an n.a. bin\n";
  for (const auto& d : spec.dims) {
    out += d.name;
    for (float e : d.edges) out += " " + format_g9(e);
    if (d.has_null) out += " null";
    out += "\n";
  }
  return out;
}

}  // namespace ventrl::actions
