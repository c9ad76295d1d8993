#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "ventrl/core/format.hpp"
#include "ventrl/data/types.hpp"

namespace ventrl::data {

// Dataset file: CSV with one step per line under a header naming the column
// order, plus one trailing episode-summary line per episode:
//   patient_id,episode_id,end,<outcome>,<dt_mv_days>,<dt_death|na>,<dt_re|na>,<split>
// Reward columns are appended once rewards have been annotated.
inline void write_dataset(const std::string& path, const Dataset& ds) {
  const bool with_rewards =
      !ds.episodes.empty() && !ds.episodes.front().steps.empty() &&
      ds.episodes.front().steps.front().reward.filled;
  std::ostringstream out;
  out << "patient_id,episode_id,t";
  for (const auto& v : kStateVars) out << "," << v.name;
  for (const auto& a : kActionVars) out << "," << a.name;
  if (with_rewards) out << ",r_range,r_tp,r_vfd,r_mortality";
  out << "\n";
  for (const auto& e : ds.episodes) {
    for (const auto& s : e.steps) {
      out << e.patient_id << "," << e.episode_id << "," << s.t;
      for (int v = 0; v < kStateVarCount; ++v) out << "," << format_g9(s.state[v]);
      out << "," << static_cast<int>(s.action.mode);
      out << "," << format_g9(s.action.rr) << "," << format_g9(s.action.vt) << ","
          << format_g9(s.action.dp) << "," << format_g9(s.action.peep) << ","
          << format_g9(s.action.fio2);
      if (with_rewards)
        out << "," << format_g9(s.reward.range) << "," << format_g9(s.reward.tp) << ","
            << format_g9(s.reward.vfd) << "," << format_g9(s.reward.mortality);
      out << "\n";
    }
    out << e.patient_id << "," << e.episode_id << ",end," << outcome_name(e.outcome.kind) << ","
        << format_g9(e.outcome.dt_mv_days) << ","
        << (e.outcome.dt_death_days >= 0.0 ? format_g9(e.outcome.dt_death_days) : "na") << ","
        << (e.outcome.dt_re_days >= 0.0 ? format_g9(e.outcome.dt_re_days) : "na") << ","
        << split_name(e.split) << "\n";
  }
  write_text_file(path, out.str());
}

inline Dataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset: " + path);
  Dataset ds;
  std::string line;
  if (!std::getline(in, line)) throw IoError("dataset file is empty: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line, ',');
  const std::size_t base_cols = 3 + kStateVarCount + kActionDimCount;
  if (header.size() < base_cols)
    throw IoError("dataset header has too few columns: " + path);
  const bool with_rewards = header.size() >= base_cols + 3;

  Episode current;
  bool open = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto parts = split(line, ',');
    if (parts.size() < 3) throw IoError("dataset: malformed line '" + line + "'");
    if (parts[2] == "end") {
      if (!open || parts[1] != current.episode_id)
        throw IoError("dataset: summary line without steps: '" + line + "'");
      if (parts.size() < 8) throw IoError("dataset: malformed summary '" + line + "'");
      current.outcome.kind = outcome_from_name(parts[3]);
      current.outcome.dt_mv_days = parse_double(parts[4], "dt_mv");
      current.outcome.dt_death_days = parts[5] == "na" ? -1.0 : parse_double(parts[5], "dt_death");
      current.outcome.dt_re_days = parts[6] == "na" ? -1.0 : parse_double(parts[6], "dt_re");
      if (parts[7] == "train")
        current.split = Split::kTrain;
      else if (parts[7] == "test")
        current.split = Split::kTest;
      else
        current.split = Split::kNone;
      ds.episodes.push_back(std::move(current));
      current = Episode{};
      open = false;
      continue;
    }
    if (parts.size() < base_cols) throw IoError("dataset: malformed step line '" + line + "'");
    if (!open || parts[1] != current.episode_id) {
      if (open) throw IoError("dataset: episode " + current.episode_id + " missing summary line");
      current = Episode{};
      current.patient_id = parts[0];
      current.episode_id = parts[1];
      open = true;
    }
    Step s;
    s.t = static_cast<int>(parse_long(parts[2], "step t"));
    std::size_t c = 3;
    for (int v = 0; v < kStateVarCount; ++v)
      s.state[v] = static_cast<float>(parse_double(parts[c++], "state value"));
    s.action.mode = parse_long(parts[c++], "mode") == 1 ? VentMode::kPcv : VentMode::kVcv;
    s.action.rr = static_cast<float>(parse_double(parts[c++], "rr"));
    s.action.vt = static_cast<float>(parse_double(parts[c++], "vt"));
    s.action.dp = static_cast<float>(parse_double(parts[c++], "dp"));
    s.action.peep = static_cast<float>(parse_double(parts[c++], "peep"));
    s.action.fio2 = static_cast<float>(parse_double(parts[c++], "fio2"));
    if (with_rewards && parts.size() >= base_cols + 4) {
      s.reward.range = static_cast<float>(parse_double(parts[c++], "r_range"));
      s.reward.tp = static_cast<float>(parse_double(parts[c++], "r_tp"));
      s.reward.vfd = static_cast<float>(parse_double(parts[c++], "r_vfd"));
      s.reward.mortality = static_cast<float>(parse_double(parts[c++], "r_mortality"));
      s.reward.filled = true;
    }
    current.steps.push_back(s);
  }
  if (open) throw IoError("dataset: trailing episode without summary line");
  return ds;
}

// Normalization sidecar; written by hand so the 9-significant-digit float
// format is bit-stable across runs.
inline void write_stats(const std::string& path, const NormStats& stats) {
  std::ostringstream out;
  out << "{\n  \"variables\": [\n";
  for (int v = 0; v < kStateVarCount; ++v) {
    const auto& s = stats.state[v];
    out << "    {\"name\": \"" << kStateVars[v].name << "\", \"mean\": " << format_g9(s.mean)
        << ", \"std\": " << format_g9(s.std) << ", \"min\": " << format_g9(s.min)
        << ", \"max\": " << format_g9(s.max) << "}";
    out << (v + 1 < kStateVarCount ? ",\n" : "\n");
  }
  out << "  ],\n  \"actions\": [\n";
  for (int a = 0; a < kActionDimCount; ++a) {
    out << "    {\"name\": \"" << kActionVars[a].name
        << "\", \"lo\": " << format_g9(kActionVars[a].lo)
        << ", \"hi\": " << format_g9(kActionVars[a].hi) << "}";
    out << (a + 1 < kActionDimCount ? ",\n" : "\n");
  }
  out << "  ]\n}\n";
  write_text_file(path, out.str());
}

inline NormStats read_stats(const std::string& path) {
  const auto j = nlohmann::json::parse(read_text_file(path));
  NormStats stats;
  for (const auto& item : j.at("variables")) {
    const int v = state_var_index(item.at("name").get<std::string>());
    if (v < 0) throw IoError("stats: unknown variable " + item.at("name").get<std::string>());
    stats.state[v] = {item.at("mean").get<double>(), item.at("std").get<double>(),
                      item.at("min").get<double>(), item.at("max").get<double>()};
  }
  stats.valid = true;
  return stats;
}

}  // namespace ventrl::data
