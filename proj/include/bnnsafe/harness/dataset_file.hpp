#pragma once

// Dataset directories: one binary PGM per frame plus labels.csv.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "bnnsafe/bayes/posterior.hpp"
#include "bnnsafe/harness/model_file.hpp"
#include "bnnsafe/sim/dataset.hpp"
#include "bnnsafe/sim/episode.hpp"

namespace bnnsafe::harness {

namespace fs = std::filesystem;

inline constexpr const char* kLabelsHeader = "index,class,steering,scenario,seed";

struct DatasetRow {
  long index = 0;
  int label = 0;
  double steering = 0.0;
  std::string scenario;
  std::uint64_t seed = 0;  // seed of the generating episode
  sim::Observation image;
};

inline std::string image_name(long index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06ld.pgm", index);
  return buf;
}

inline std::string encode_pgm(const sim::Observation& obs) {
  std::string out = "P5\n" + std::to_string(sim::kObsCols) + " " + std::to_string(sim::kObsRows) + "\n255\n";
  out.append(reinterpret_cast<const char*>(obs.pixels.data()), obs.pixels.size());
  return out;
}

inline sim::Observation decode_pgm(const std::string& bytes) {
  std::istringstream in(bytes);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P5" || w != sim::kObsCols || h != sim::kObsRows || maxval != 255)
    throw std::invalid_argument("unexpected PGM header");
  in.get();  // single whitespace before the raster
  sim::Observation obs;
  in.read(reinterpret_cast<char*>(obs.pixels.data()), static_cast<std::streamsize>(obs.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(obs.pixels.size())) throw std::invalid_argument("truncated PGM raster");
  return obs;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  out << bytes;
  if (!out) throw std::runtime_error("failed writing '" + p.string() + "'");
}

inline void write_dataset(const fs::path& dir, const std::vector<sim::DataPoint>& points, sim::MapKind scenario,
                          std::uint64_t seed) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create dataset directory '" + dir.string() + "'");
  std::string csv = std::string(kLabelsHeader) + "\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    write_file(dir / image_name(static_cast<long>(i)), encode_pgm(p.image));
    csv += std::to_string(i) + "," + std::to_string(p.label) + "," + format_double(p.steering) + "," +
           sim::to_string(scenario) + "," +
           std::to_string(derive_seed(seed, static_cast<std::uint64_t>(p.episode))) + "\n";
  }
  write_file(dir / "labels.csv", csv);
}

inline std::vector<DatasetRow> read_dataset(const fs::path& dir, int num_classes) {
  const std::string csv = read_file(dir / "labels.csv");
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line != kLabelsHeader)
    throw std::invalid_argument("labels.csv header must be '" + std::string(kLabelsHeader) + "'");
  std::vector<DatasetRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    if (f.size() != 5) throw std::invalid_argument("labels.csv: malformed row '" + line + "'");
    DatasetRow r;
    try {
      r.index = std::stol(f[0]);
      r.label = std::stoi(f[1]);
      r.steering = std::stod(f[2]);
      r.scenario = f[3];
      r.seed = std::stoull(f[4]);
    } catch (const std::logic_error&) {
      throw std::invalid_argument("labels.csv: malformed row '" + line + "'");
    }
    if (r.label < 0 || r.label >= num_classes)
      throw std::invalid_argument("labels.csv: class " + std::to_string(r.label) + " outside [0, " +
                                  std::to_string(num_classes) + ")");
    const fs::path img = dir / image_name(r.index);
    if (!fs::exists(img)) throw std::invalid_argument("labels.csv references missing image " + img.string());
    r.image = decode_pgm(read_file(img));
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw std::invalid_argument("dataset '" + dir.string() + "' has no rows");
  return rows;
}

// FNV-1a over labels.csv and every referenced image, as a hex string.
inline std::string dataset_hash(const std::vector<DatasetRow>& rows) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& r : rows) {
    const std::string key = std::to_string(r.index) + "," + std::to_string(r.label) + "," +
                            format_double(r.steering) + "," + r.scenario + "," + std::to_string(r.seed) + "\n";
    h = sim::fnv1a(reinterpret_cast<const std::uint8_t*>(key.data()), key.size(), h);
    h = sim::fnv1a(r.image.pixels.data(), r.image.pixels.size(), h);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline bayes::ImageDataset to_image_dataset(const std::vector<DatasetRow>& rows) {
  bayes::ImageDataset out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back({sim::to_tensor(r.image), r.label});
  return out;
}

}  // namespace bnnsafe::harness
