#include "habtox/dataset.hpp"

#include <algorithm>

#include "habtox/error.hpp"

namespace habtox {

std::vector<std::string> default_feature_names(std::size_t cols) {
  std::vector<std::string> names;
  names.reserve(cols);
  for (std::size_t c = 0; c < cols; ++c) {
    names.emplace_back(cols == kFeatureCount ? std::string(kFeatureNames[c]) : "x" + std::to_string(c));
  }
  return names;
}

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw Error(ErrorKind::LengthMismatch, "matrix data size does not match rows*cols");
  }
}

void FeatureMatrix::append_row(std::span<const double> values) {
  if (rows_ == 0 && cols_ == 0) cols_ = values.size();
  if (values.size() != cols_) throw Error(ErrorKind::ArityMismatch, "row arity mismatch");
  data_.insert(data_.end(), values.begin(), values.end());
  ++rows_;
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> indices) const {
  FeatureMatrix out(indices.size(), cols_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::ranges::copy(row(indices[i]), out.row(i).begin());
  }
  return out;
}

std::vector<double> FeatureMatrix::column(std::size_t c) const {
  std::vector<double> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

std::size_t LabeledData::count(int label) const {
  return static_cast<std::size_t>(std::ranges::count(y, label));
}

void LabeledData::append(std::span<const double> row, int label, RowOrigin o) {
  x.append_row(row);
  y.push_back(label);
  origin.push_back(o);
}

LabeledData LabeledData::subset(std::span<const std::size_t> indices) const {
  LabeledData out;
  out.x = x.select_rows(indices);
  out.y.reserve(indices.size());
  out.origin.reserve(indices.size());
  for (std::size_t i : indices) {
    out.y.push_back(y[i]);
    out.origin.push_back(origin.empty() ? RowOrigin::original : origin[i]);
  }
  return out;
}

void LabeledData::validate() const {
  if (x.rows() != y.size() || (!origin.empty() && origin.size() != y.size())) {
    throw Error(ErrorKind::LengthMismatch, "labels and features differ in length");
  }
  for (int v : y) {
    if (v != 0 && v != 1) throw Error(ErrorKind::InvalidArgument, "labels must be 0 or 1");
  }
}

LabeledData make_labeled(FeatureMatrix x, std::vector<int> y) {
  LabeledData d;
  d.x = std::move(x);
  d.y = std::move(y);
  d.origin.assign(d.y.size(), RowOrigin::original);
  d.validate();
  return d;
}

}  // namespace habtox
