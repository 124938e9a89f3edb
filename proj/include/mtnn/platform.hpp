#pragma once

// Host description used as the first five features of every sample. On the
// original GPUs these were global memory, SM count, core clock, memory bus
// width and L2 size; here they come from the CPU host.

#include <unistd.h>

#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>

namespace mtnn {

struct PlatformFeatures {
  double gm = 0.0;   // memory, GB
  double sm = 0.0;   // compute units
  double cc = 0.0;   // core clock, MHz
  double mbw = 0.0;  // memory bus width, bits
  double l2c = 0.0;  // L2 cache, KB

  bool valid() const noexcept {
    for (double v : {gm, sm, cc, mbw, l2c}) {
      if (!(v > 0.0) || !std::isfinite(v)) return false;
    }
    return true;
  }

  friend bool operator==(const PlatformFeatures&, const PlatformFeatures&) = default;
};

inline constexpr std::array<std::string_view, 5> kPlatformKeys = {"gm", "sm", "cc", "mbw", "l2c"};

using PlatformOverrides = std::map<std::string, double>;

inline double& platform_field(PlatformFeatures& p, std::string_view key) {
  if (key == "gm") return p.gm;
  if (key == "sm") return p.sm;
  if (key == "cc") return p.cc;
  if (key == "mbw") return p.mbw;
  if (key == "l2c") return p.l2c;
  throw std::invalid_argument("unknown platform feature '" + std::string(key) +
                              "' (expected gm, sm, cc, mbw or l2c)");
}

// Values reported for the two GPUs the original model was trained on.
inline PlatformFeatures gtx1080() { return {8, 20, 1607, 256, 2048}; }
inline PlatformFeatures titan_x() { return {10, 28, 1417, 384, 3072}; }

// Fallbacks when detection fails.
inline constexpr PlatformFeatures kDefaultPlatform{8.0, 4.0, 2000.0, 64.0, 1024.0};

namespace detail {

inline std::optional<double> read_first_number(const std::string& path) {
  std::ifstream in(path);
  double v = 0.0;
  if (in >> v && v > 0.0) return v;
  return std::nullopt;
}

inline std::optional<double> detect_memory_gb() {
  const long pages = ::sysconf(_SC_PHYS_PAGES);
  const long page = ::sysconf(_SC_PAGESIZE);
  if (pages <= 0 || page <= 0) return std::nullopt;
  return static_cast<double>(pages) * static_cast<double>(page) / (1024.0 * 1024.0 * 1024.0);
}

inline std::optional<double> detect_clock_mhz() {
  if (auto khz = read_first_number("/sys/devices/system/cpu/cpu0/cpufreq/cpuinfo_max_freq")) {
    return *khz / 1000.0;
  }
  std::ifstream in("/proc/cpuinfo");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("cpu MHz", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) {
        try {
          const double mhz = std::stod(line.substr(colon + 1));
          if (mhz > 0.0) return mhz;
        } catch (const std::exception&) {
        }
      }
    }
  }
  return std::nullopt;
}

// Accepts "2048K", "2 MiB", "2M" style strings from sysfs and lscpu.
inline std::optional<double> parse_cache_kb(std::string text) {
  std::istringstream is(text);
  double v = 0.0;
  std::string unit;
  if (!(is >> v) || v <= 0.0) return std::nullopt;
  is >> unit;
  if (unit.empty() || unit[0] == 'K' || unit[0] == 'k') return v;
  if (unit[0] == 'M' || unit[0] == 'm') return v * 1024.0;
  if (unit[0] == 'G' || unit[0] == 'g') return v * 1024.0 * 1024.0;
  return std::nullopt;
}

inline std::optional<double> detect_l2_kb() {
#ifdef _SC_LEVEL2_CACHE_SIZE
  const long bytes = ::sysconf(_SC_LEVEL2_CACHE_SIZE);
  if (bytes > 0) return static_cast<double>(bytes) / 1024.0;
#endif
  for (int idx = 0; idx < 8; ++idx) {
    const std::string base = "/sys/devices/system/cpu/cpu0/cache/index" + std::to_string(idx);
    std::ifstream level(base + "/level");
    int lv = 0;
    if (!(level >> lv) || lv != 2) continue;
    std::ifstream size(base + "/size");
    std::string text;
    if (std::getline(size, text)) return parse_cache_kb(text);
  }
  return std::nullopt;
}

}  // namespace detail

// Detects the host, applies overrides, and fills anything undetectable with
// kDefaultPlatform (one warning per field on `log`). The memory bus width has
// no portable CPU query; it is always the 64-bit DDR channel width unless
// overridden.
inline PlatformFeatures probe_platform(const PlatformOverrides& overrides = {},
                                       std::ostream& log = std::cerr) {
  PlatformFeatures p;
  auto fill = [&](double& field, std::optional<double> detected, double fallback,
                  std::string_view key) {
    if (overrides.contains(std::string(key))) return;
    if (detected && *detected > 0.0 && std::isfinite(*detected)) {
      field = *detected;
    } else {
      field = fallback;
      log << "warning: could not detect platform feature '" << key << "', using " << fallback
          << "\n";
    }
  };
  const unsigned hw = std::thread::hardware_concurrency();
  fill(p.gm, detail::detect_memory_gb(), kDefaultPlatform.gm, "gm");
  fill(p.sm, hw > 0 ? std::optional<double>(hw) : std::nullopt, kDefaultPlatform.sm, "sm");
  fill(p.cc, detail::detect_clock_mhz(), kDefaultPlatform.cc, "cc");
  if (!overrides.contains("mbw")) p.mbw = kDefaultPlatform.mbw;
  fill(p.l2c, detail::detect_l2_kb(), kDefaultPlatform.l2c, "l2c");

  for (const auto& [key, value] : overrides) {
    if (!(value > 0.0) || !std::isfinite(value)) {
      throw std::invalid_argument("platform override '" + key + "' must be positive");
    }
    platform_field(p, key) = value;
  }
  return p;
}

// Bytes the process could still obtain, from MemAvailable (falls back to free pages).
inline std::size_t available_memory_bytes() {
  std::ifstream in("/proc/meminfo");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("MemAvailable:", 0) == 0) {
      std::istringstream is(line.substr(13));
      std::size_t kb = 0;
      if (is >> kb) return kb * 1024;
    }
  }
  const long pages = ::sysconf(_SC_AVPHYS_PAGES);
  const long page = ::sysconf(_SC_PAGESIZE);
  if (pages > 0 && page > 0) return static_cast<std::size_t>(pages) * static_cast<std::size_t>(page);
  return 0;
}

}  // namespace mtnn
