#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include "kvc/dataset.hpp"
#include "kvc/rng.hpp"
#include "kvc/synth.hpp"

namespace kvc::testing {

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<unsigned> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            ("kvc_test_" + std::to_string(stamp) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::vector<double> random_scores(SplitMix64& rng, std::size_t n, bool coarse) {
  std::vector<double> out(n);
  for (auto& s : out) s = coarse ? static_cast<double>(rng.below(21)) / 20.0 : rng.uniform();
  return out;
}

// Small balanced synthetic population used across suites.
inline SynthConfig small_config(std::size_t per_group = 3, std::uint64_t seed = 11) {
  SynthConfig c;
  c.subjects_per_group = per_group;
  c.seed = seed;
  return c;
}

}  // namespace kvc::testing
