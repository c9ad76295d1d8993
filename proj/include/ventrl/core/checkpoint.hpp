#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "ventrl/core/format.hpp"
#include "ventrl/core/matrix.hpp"

namespace ventrl {

// Checkpoint container: a plain-text header of key-value lines (seed, step,
// config_hash, algo) and one "name RxC f32 offset" line per array, then a
// blank line, then the concatenated row-major little-endian float32 payloads.
struct Checkpoint {
  std::uint64_t seed = 0;
  long step = 0;
  std::string config_hash;
  std::string algo;
  std::vector<std::pair<std::string, Matrix>> arrays;

  void add(const std::string& name, const Matrix& m) { arrays.emplace_back(name, m); }
  void add(const std::string& name, const std::vector<float>& v) {
    Matrix m(1, v.size());
    std::copy(v.begin(), v.end(), m.flat().begin());
    arrays.emplace_back(name, std::move(m));
  }

  const Matrix& get(const std::string& name) const {
    for (const auto& [n, m] : arrays)
      if (n == name) return m;
    throw IoError("checkpoint: no array named '" + name + "'");
  }
  bool has(const std::string& name) const {
    for (const auto& [n, m] : arrays)
      if (n == name) return true;
    return false;
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("checkpoint: cannot write " + path);
    out << "seed " << seed << "\n";
    out << "step " << step << "\n";
    out << "config_hash " << config_hash << "\n";
    if (!algo.empty()) out << "algo " << algo << "\n";
    std::size_t offset = 0;
    for (const auto& [name, m] : arrays) {
      out << name << " " << m.rows() << "x" << m.cols() << " f32 " << offset << "\n";
      offset += m.size() * sizeof(float);
    }
    out << "\n";
    for (const auto& [name, m] : arrays)
      out.write(reinterpret_cast<const char*>(m.data()),
                static_cast<std::streamsize>(m.size() * sizeof(float)));
    if (!out) throw IoError("checkpoint: write failed " + path);
  }

  static Checkpoint load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("checkpoint: cannot open " + path);
    Checkpoint ck;
    struct Entry {
      std::string name;
      std::size_t rows, cols, offset;
    };
    std::vector<Entry> entries;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) break;
      const auto parts = split(line, ' ');
      if (parts.size() == 2 && parts[0] == "seed") {
        ck.seed = static_cast<std::uint64_t>(std::stoull(parts[1]));
      } else if (parts.size() == 2 && parts[0] == "step") {
        ck.step = parse_long(parts[1], "checkpoint step");
      } else if (parts.size() == 2 && parts[0] == "config_hash") {
        ck.config_hash = parts[1];
      } else if (parts.size() == 2 && parts[0] == "algo") {
        ck.algo = parts[1];
      } else if (parts.size() == 4 && parts[2] == "f32") {
        const auto shape = split(parts[1], 'x');
        if (shape.size() != 2) throw IoError("checkpoint: bad shape in '" + line + "'");
        entries.push_back({parts[0], static_cast<std::size_t>(parse_long(shape[0], "rows")),
                           static_cast<std::size_t>(parse_long(shape[1], "cols")),
                           static_cast<std::size_t>(parse_long(parts[3], "offset"))});
      } else {
        throw IoError("checkpoint: unrecognized header line '" + line + "'");
      }
    }
    const std::streampos payload_start = in.tellg();
    for (const auto& e : entries) {
      Matrix m(e.rows, e.cols);
      in.seekg(payload_start + static_cast<std::streamoff>(e.offset));
      in.read(reinterpret_cast<char*>(m.data()),
              static_cast<std::streamsize>(m.size() * sizeof(float)));
      if (!in) throw IoError("checkpoint: truncated payload for '" + e.name + "'");
      ck.arrays.emplace_back(e.name, std::move(m));
    }
    return ck;
  }
};

}  // namespace ventrl
