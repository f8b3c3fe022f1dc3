#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace habtox {

// Column order of the consolidated feature vector.
enum class Feature : std::size_t {
  month = 0,
  dsp_tot,
  d_caudata,
  d_fortii,
  d_sacculus,
  d_tripos,
  p_rotundatum,
  sst,
  salinity,
  air_temp,
  wind,
  precip,
  solar,
  river_flow,
};

inline constexpr std::size_t kFeatureCount = 14;

inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "month",       "dsp_tot",  "d_caudata", "d_fortii", "d_sacculus", "d_tripos", "p_rotundatum",
    "sst",         "salinity", "air_temp",  "wind",     "precip",     "solar",    "river_flow"};

// Human-readable names used in rule and DOT exports.
inline constexpr std::array<std::string_view, kFeatureCount> kFeatureLabels = {
    "month",       "DSP-tot",  "D. caudata",      "D. fortii", "D. sacculus",
    "D. tripos",   "P. rotundatum", "SST",        "salinity",  "air temperature",
    "wind speed",  "precipitation", "solar irradiance", "river flow"};

constexpr std::size_t index_of(Feature f) { return static_cast<std::size_t>(f); }

std::vector<std::string> default_feature_names(std::size_t cols);

// Dense row-major matrix of doubles.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}
  FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0; }

  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

  std::span<const double> data() const { return data_; }

  void append_row(std::span<const double> values);
  FeatureMatrix select_rows(std::span<const std::size_t> indices) const;
  std::vector<double> column(std::size_t c) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class RowOrigin : std::uint8_t { original, synthetic };

// Binary-labelled training/evaluation data. Label 1 is the positive
// (toxic) class. `origin` tags rows created by oversampling so evaluation code
// can assert validation folds stay untouched.
struct LabeledData {
  FeatureMatrix x;
  std::vector<int> y;
  std::vector<RowOrigin> origin;

  std::size_t size() const { return y.size(); }
  std::size_t count(int label) const;
  void append(std::span<const double> row, int label, RowOrigin o = RowOrigin::original);
  LabeledData subset(std::span<const std::size_t> indices) const;
  void validate() const;
};

LabeledData make_labeled(FeatureMatrix x, std::vector<int> y);

}  // namespace habtox
