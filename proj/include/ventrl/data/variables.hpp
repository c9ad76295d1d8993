#pragma once

#include <array>
#include <string_view>

namespace ventrl::data {

// Observable state variables, in canonical column order. Ranges are the valid
// measurement ranges used by cleaning; values outside are dropped.
enum StateVar : int {
  kMap = 0,
  kDbp,
  kSbp,
  kInspPressure,
  kTidalVolumeObs,
  kHaemoglobin,
  kWbc,
  kSao2,
  kSpo2,
  kPao2,
  kPaco2,
  kBaseExcess,
  kPh,
  kIvFluids,
  kUrineOutput,
  kVasopressors,
  kPotassium,
  kChloride,
  kSodium,
  kInr,
  kHeartRate,
  kAge,
  kSex,
  kWeight,
  kHeight,
  kStateVarCount
};

struct VarInfo {
  std::string_view name;
  std::string_view unit;
  float lo;
  float hi;
  bool categorical;
};

inline constexpr std::array<VarInfo, kStateVarCount> kStateVars = {{
    {"map", "mmHg", 30.0f, 200.0f, false},
    {"dbp", "mmHg", 20.0f, 120.0f, false},
    {"sbp", "mmHg", 50.0f, 260.0f, false},
    {"insp_pressure", "cmH2O", 10.0f, 60.0f, false},
    {"tidal_volume_obs", "ml", 80.0f, 2040.0f, false},
    {"haemoglobin", "mmol/l", 2.0f, 20.0f, false},
    {"wbc", "Gpt/l", 0.0f, 30.0f, false},
    {"sao2", "%", 40.0f, 100.0f, false},
    {"spo2", "%", 30.0f, 100.0f, false},
    {"pao2", "mmHg", 20.0f, 600.0f, false},
    {"paco2", "mmHg", 20.0f, 100.0f, false},
    {"base_excess", "mmol/l", -20.0f, 30.0f, false},
    {"ph", "-", 6.0f, 8.0f, false},
    {"iv_fluids", "ml/4h", 0.0f, 20000.0f, false},
    {"urine_output", "ml/4h", 0.0f, 2000.0f, false},
    {"vasopressors", "NE", 0.0f, 5.0f, false},
    {"potassium", "mmol/l", 2.0f, 10.0f, false},
    {"chloride", "mmol/l", 80.0f, 150.0f, false},
    {"sodium", "mmol/l", 120.0f, 180.0f, false},
    {"inr", "-", 0.9f, 15.0f, false},
    {"heart_rate", "1/min", 20.0f, 200.0f, false},
    {"age", "years", 18.0f, 120.0f, false},
    {"sex", "-", 0.0f, 1.0f, true},
    {"weight", "kg", 40.0f, 140.0f, false},
    {"height", "cm", 155.0f, 200.0f, false},
}};

inline int state_var_index(std::string_view name) {
  for (int i = 0; i < kStateVarCount; ++i)
    if (kStateVars[i].name == name) return i;
  return -1;
}

// Ventilator settings, in canonical column order. Ranges are the admissible
// action space; continuous settings normalize affinely onto [-1, 1].
enum ActionDim : int {
  kMode = 0,
  kRr,
  kVt,
  kDp,
  kPeep,
  kFio2,
  kActionDimCount
};

struct ActionInfo {
  std::string_view name;
  std::string_view unit;
  float lo;
  float hi;
};

inline constexpr std::array<ActionInfo, kActionDimCount> kActionVars = {{
    {"mode", "-", 0.0f, 1.0f},
    {"rr", "1/min", 5.0f, 60.0f},
    {"vt", "ml/kg", 3.0f, 12.0f},
    {"dp", "cmH2O", 0.0f, 26.0f},
    {"peep", "cmH2O", 0.0f, 20.0f},
    {"fio2", "%", 21.0f, 100.0f},
}};

inline int action_var_index(std::string_view name) {
  for (int i = 0; i < kActionDimCount; ++i)
    if (kActionVars[i].name == name) return i;
  return -1;
}

inline constexpr int kContActionCount = 5;  // rr, vt, dp, peep, fio2
inline constexpr int kModeCount = 2;        // VCV, PCV

}  // namespace ventrl::data
