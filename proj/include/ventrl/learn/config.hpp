#pragma once

#include <map>
#include <string>
#include <vector>

#include "ventrl/core/errors.hpp"
#include "ventrl/core/format.hpp"

namespace ventrl::learn {

enum class Algo : int { kFactoredCql = 0, kHybridIql, kHybridEdac };

inline const char* algo_name(Algo a) {
  switch (a) {
    case Algo::kFactoredCql: return "factored-cql";
    case Algo::kHybridIql: return "hybrid-iql";
    case Algo::kHybridEdac: return "hybrid-edac";
  }
  return "unknown";
}

inline Algo algo_from_name(const std::string& s) {
  if (s == "factored-cql") return Algo::kFactoredCql;
  if (s == "hybrid-iql") return Algo::kHybridIql;
  if (s == "hybrid-edac") return Algo::kHybridEdac;
  throw ConfigError("unknown algorithm '" + s + "'");
}

// Training hyperparameters. The paper preset keeps the published full-scale
// values; the desk preset shrinks the networks and step counts (and scales
// the slowest learning rates up accordingly) so a full run takes minutes on
// a laptop core instead of a cluster day.
struct TrainConfig {
  Algo algo = Algo::kFactoredCql;
  float gamma = 0.99f;
  std::vector<int> hidden = {256, 256, 256, 256};
  int batch_size = 256;
  long steps = 400000;
  long checkpoint_interval = 20000;
  long log_interval = 50;
  float polyak = 0.005f;
  float clip_grad = 0.0f;  // 0 disables clipping
  float q_abs_limit = 0.0f;  // 0 disables the runaway-Q guard
  // FactoredCQL
  float cql_alpha = 10.0f;
  float lr = 1e-5f;
  // HybridIQL
  float actor_lr = 3e-4f;
  float critic_lr = 3e-4f;
  float value_lr = 3e-4f;
  float beta = 100.0f;
  float expectile_tau = 0.8f;
  // HybridEDAC
  float eta = 0.1f;
  float edac_lr = 3e-5f;
  int ensemble_size = 10;
  float target_entropy_cont = -0.3f;
  float target_entropy_disc = 0.3f;
  // Action-space handling
  bool mode_masking = false;

  static TrainConfig paper_preset(Algo algo) {
    TrainConfig cfg;
    cfg.algo = algo;
    switch (algo) {
      case Algo::kFactoredCql:
        cfg.lr = 1e-5f;
        cfg.cql_alpha = 10.0f;
        cfg.clip_grad = 0.01f;
        break;
      case Algo::kHybridIql:
        break;
      case Algo::kHybridEdac:
        cfg.edac_lr = 3e-5f;
        cfg.ensemble_size = 10;
        break;
    }
    return cfg;
  }

  static TrainConfig desk_preset(Algo algo) {
    TrainConfig cfg = paper_preset(algo);
    cfg.hidden = {128, 128};
    cfg.steps = 20000;
    cfg.checkpoint_interval = 1000;
    switch (algo) {
      case Algo::kFactoredCql:
        cfg.lr = 3e-4f;  // 1e-5 needs the full 400k steps to move Q anywhere
        break;
      case Algo::kHybridIql:
        break;
      case Algo::kHybridEdac:
        cfg.edac_lr = 3e-4f;
        cfg.ensemble_size = 5;
        break;
    }
    return cfg;
  }

  // Config file keys mirror the field names exactly.
  void apply(const std::string& key, const std::string& value) {
    if (key == "algo") algo = algo_from_name(value);
    else if (key == "gamma") gamma = static_cast<float>(parse_double(value, key.c_str()));
    else if (key == "hidden") {
      hidden.clear();
      for (const auto& part : split(value, ','))
        hidden.push_back(static_cast<int>(parse_long(trim(part), "hidden")));
    } else if (key == "batch_size") batch_size = static_cast<int>(parse_long(value, key.c_str()));
    else if (key == "steps") steps = parse_long(value, key.c_str());
    else if (key == "checkpoint_interval") checkpoint_interval = parse_long(value, key.c_str());
    else if (key == "log_interval") log_interval = parse_long(value, key.c_str());
    else if (key == "polyak") polyak = static_cast<float>(parse_double(value, key.c_str()));
    else if (key == "clip_grad") clip_grad = static_cast<float>(parse_double(value, key.c_str()));
    else if (key == "q_abs_limit") q_abs_limit = static_cast<float>(parse_double(value, key.c_str()));
    else if (key == "cql_alpha") cql_alpha = static_cast<float>(parse_double(value, key.c_str()));
    else if (key == "lr") lr = static_cast<float>(parse_double(value, key.c_str()));
    else if (key == "actor_lr") actor_lr = static_cast<float>(parse_double(value, key.c_str()));
    else if (key == "critic_lr") critic_lr = static_cast<float>(parse_double(value, key.c_str()));
    else if (key == "value_lr") value_lr = static_cast<float>(parse_double(value, key.c_str()));
    else if (key == "beta") beta = static_cast<float>(parse_double(value, key.c_str()));
    else if (key == "expectile_tau") expectile_tau = static_cast<float>(parse_double(value, key.c_str()));
    else if (key == "eta") eta = static_cast<float>(parse_double(value, key.c_str()));
    else if (key == "edac_lr") edac_lr = static_cast<float>(parse_double(value, key.c_str()));
    else if (key == "ensemble_size") ensemble_size = static_cast<int>(parse_long(value, key.c_str()));
    else if (key == "target_entropy_cont") target_entropy_cont = static_cast<float>(parse_double(value, key.c_str()));
    else if (key == "target_entropy_disc") target_entropy_disc = static_cast<float>(parse_double(value, key.c_str()));
    else if (key == "mode_masking") mode_masking = value == "1" || value == "true";
    else throw ConfigError("unknown train config key '" + key + "'");
  }

  std::string serialize() const {
    std::string hidden_str;
    for (std::size_t i = 0; i < hidden.size(); ++i)
      hidden_str += (i ? "," : "") + std::to_string(hidden[i]);
    std::map<std::string, std::string> kv = {
        {"algo", algo_name(algo)},
        {"gamma", format_g9(gamma)},
        {"hidden", hidden_str},
        {"batch_size", std::to_string(batch_size)},
        {"steps", std::to_string(steps)},
        {"checkpoint_interval", std::to_string(checkpoint_interval)},
        {"log_interval", std::to_string(log_interval)},
        {"polyak", format_g9(polyak)},
        {"clip_grad", format_g9(clip_grad)},
        {"q_abs_limit", format_g9(q_abs_limit)},
        {"cql_alpha", format_g9(cql_alpha)},
        {"lr", format_g9(lr)},
        {"actor_lr", format_g9(actor_lr)},
        {"critic_lr", format_g9(critic_lr)},
        {"value_lr", format_g9(value_lr)},
        {"beta", format_g9(beta)},
        {"expectile_tau", format_g9(expectile_tau)},
        {"eta", format_g9(eta)},
        {"edac_lr", format_g9(edac_lr)},
        {"ensemble_size", std::to_string(ensemble_size)},
        {"target_entropy_cont", format_g9(target_entropy_cont)},
        {"target_entropy_disc", format_g9(target_entropy_disc)},
        {"mode_masking", mode_masking ? "1" : "0"},
    };
    std::string out;
    for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
    return out;
  }

  std::string hash() const { return to_hex(fnv1a64(serialize())); }
};

}  // namespace ventrl::learn
