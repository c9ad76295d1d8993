#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "ventrl/core/format.hpp"

namespace ventrl::data {

// Import format for raw measurements, one record per line:
//   patient_id,time_hours,name,value[,source]
// `name` is a state variable, an action setting, or the reserved outcome key
// `death_hours` (value = hours from the patient's first record to death).
// Values may be textual for categoricals (sex: male/female, mode: VCV/PCV).
struct RawRecord {
  std::string patient_id;
  double time_hours = 0.0;
  std::string name;
  std::string value;
  std::string source;
};

inline constexpr const char* kDeathHoursKey = "death_hours";

inline void write_raw_records(const std::string& path, const std::vector<RawRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write raw records: " + path);
  out << "patient_id,time_hours,name,value,source\n";
  for (const auto& r : records) {
    out << r.patient_id << "," << format_g9(r.time_hours) << "," << r.name << "," << r.value
        << "," << r.source << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

inline std::vector<RawRecord> read_raw_records(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open raw records: " + path);
  std::vector<RawRecord> records;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.rfind("patient_id,", 0) == 0) continue;  // header
    }
    auto parts = split(line, ',');
    if (parts.size() < 4) throw IoError("raw records: malformed line '" + line + "'");
    RawRecord r;
    r.patient_id = parts[0];
    r.time_hours = parse_double(parts[1], "raw record time");
    r.name = parts[2];
    r.value = parts[3];
    if (parts.size() > 4) r.source = parts[4];
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace ventrl::data
