#pragma once

#include <filesystem>
#include <initializer_list>
#include <string>
#include <vector>

#include "habtox/dataset.hpp"
#include "habtox/rng.hpp"

namespace habtox::test {

inline LabeledData labeled(std::initializer_list<std::initializer_list<double>> rows,
                           std::initializer_list<int> y) {
  LabeledData d;
  d.x = FeatureMatrix(0, rows.begin()->size());
  auto label = y.begin();
  for (const auto& r : rows) d.append(std::vector<double>(r), *label++);
  return d;
}

// n rows of d uniform features in [0, 10); label 1 with probability p.
inline LabeledData random_data(std::size_t n, std::size_t d, double p, std::uint64_t seed) {
  Rng rng(seed);
  LabeledData out;
  out.x = FeatureMatrix(0, d);
  std::vector<double> row(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : row) v = rng.uniform(0.0, 10.0);
    out.append(row, rng.bernoulli(p) ? 1 : 0);
  }
  return out;
}

// Two noisy blobs; the positive one is shifted along every feature.
inline LabeledData blobs(std::size_t n_neg, std::size_t n_pos, std::size_t d, double shift,
                         std::uint64_t seed) {
  Rng rng(seed);
  LabeledData out;
  out.x = FeatureMatrix(0, d);
  std::vector<double> row(d);
  for (std::size_t i = 0; i < n_neg + n_pos; ++i) {
    const int y = i < n_neg ? 0 : 1;
    for (auto& v : row) v = rng.normal() + (y ? shift : 0.0);
    out.append(row, y);
  }
  return out;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    Rng rng(std::hash<std::string>{}(tag));
    path_ = std::filesystem::temp_directory_path() /
            ("habtox_" + tag + "_" + std::to_string(rng.next() % 1000000007ULL));
    std::filesystem::remove_all(path_);
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

}  // namespace habtox::test
