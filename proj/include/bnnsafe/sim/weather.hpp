#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include "bnnsafe/rng.hpp"

namespace bnnsafe::sim {

inline constexpr int kObsRows = 48;
inline constexpr int kObsCols = 64;
inline constexpr std::size_t kObsPixels = static_cast<std::size_t>(kObsRows) * kObsCols;

// 64 x 48 grayscale frame, row-major.
struct Observation {
  std::array<std::uint8_t, kObsPixels> pixels{};

  std::uint8_t at(int row, int col) const { return pixels[static_cast<std::size_t>(row) * kObsCols + col]; }
  std::uint8_t& at(int row, int col) { return pixels[static_cast<std::size_t>(row) * kObsCols + col]; }
  bool operator==(const Observation&) const = default;
};

enum class Weather { clear, cloudy, wet, rain };

inline const char* to_string(Weather w) {
  switch (w) {
    case Weather::clear: return "clear";
    case Weather::cloudy: return "cloudy";
    case Weather::wet: return "wet";
    case Weather::rain: return "rain";
  }
  return "?";
}

inline Weather weather_from_string(const std::string& s) {
  if (s == "clear") return Weather::clear;
  if (s == "cloudy") return Weather::cloudy;
  if (s == "wet") return Weather::wet;
  if (s == "rain") return Weather::rain;
  throw std::invalid_argument("unknown weather '" + s + "'");
}

struct WeatherModel {
  double brightness_offset = 0.0;
  double contrast_gain = 1.0;
  double noise_sigma = 0.0;
  double droplet_rate = 0.0;  // expected droplets per frame
  double droplet_intensity = 235.0;
  double droplet_rx_min = 3.0, droplet_rx_max = 6.0;  // semi-axes in pixels
  double droplet_ry_min = 4.0, droplet_ry_max = 8.0;

  static WeatherModel preset(Weather w) {
    switch (w) {
      case Weather::clear: return {};
      case Weather::cloudy: return {-25.0, 0.9, 0.0, 0.0};
      case Weather::wet: return {10.0, 1.1, 0.0, 4.0};
      case Weather::rain: return {-10.0, 0.85, 12.0, 20.0};
    }
    return {};
  }

  bool is_identity() const {
    return brightness_offset == 0.0 && contrast_gain == 1.0 && noise_sigma == 0.0 && droplet_rate == 0.0;
  }
};

// Tone mapping and sensor noise, then droplets as bright ellipses at
// Poisson-many uniform positions.
inline Observation apply_weather(const Observation& in, const WeatherModel& wm, Rng& rng) {
  if (wm.is_identity()) return in;
  Observation out;
  std::normal_distribution<double> noise(0.0, wm.noise_sigma > 0.0 ? wm.noise_sigma : 1.0);
  for (std::size_t i = 0; i < kObsPixels; ++i) {
    double v = wm.contrast_gain * (static_cast<double>(in.pixels[i]) - 128.0) + 128.0 + wm.brightness_offset;
    if (wm.noise_sigma > 0.0) v += noise(rng);
    out.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  }
  if (wm.droplet_rate > 0.0) {
    std::poisson_distribution<int> count(wm.droplet_rate);
    std::uniform_real_distribution<double> col(0.0, kObsCols), row(0.0, kObsRows);
    std::uniform_real_distribution<double> rx(wm.droplet_rx_min, wm.droplet_rx_max),
        ry(wm.droplet_ry_min, wm.droplet_ry_max);
    const auto level = static_cast<std::uint8_t>(std::clamp(wm.droplet_intensity, 0.0, 255.0));
    const int n = count(rng);
    for (int d = 0; d < n; ++d) {
      const double cx = col(rng), cy = row(rng), ax = rx(rng), ay = ry(rng);
      const int r0 = std::max(0, static_cast<int>(std::floor(cy - ay)));
      const int r1 = std::min(kObsRows - 1, static_cast<int>(std::ceil(cy + ay)));
      const int c0 = std::max(0, static_cast<int>(std::floor(cx - ax)));
      const int c1 = std::min(kObsCols - 1, static_cast<int>(std::ceil(cx + ax)));
      for (int r = r0; r <= r1; ++r)
        for (int c = c0; c <= c1; ++c) {
          const double u = (c + 0.5 - cx) / ax, v = (r + 0.5 - cy) / ay;
          if (u * u + v * v <= 1.0) out.at(r, c) = level;
        }
    }
  }
  return out;
}

}  // namespace bnnsafe::sim
