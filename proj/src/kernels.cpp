#include "habtox/kernels.hpp"

#include <atomic>
#include <cassert>

namespace habtox::kernels {

namespace scalar {

double squared_distance(const double* a, const double* b, std::size_t n) noexcept {
  double lane[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    for (std::size_t l = 0; l < 4; ++l) {
      const double d = a[i + l] - b[i + l];
      lane[l] += d * d;
    }
  }
  double acc = (lane[0] + lane[1]) + (lane[2] + lane[3]);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

double dot(const double* a, const double* b, std::size_t n) noexcept {
  double lane[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    for (std::size_t l = 0; l < 4; ++l) lane[l] += a[i + l] * b[i + l];
  }
  double acc = (lane[0] + lane[1]) + (lane[2] + lane[3]);
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace scalar

namespace {

std::atomic<Isa>& active() {
  static std::atomic<Isa> isa{detected_isa()};
  return isa;
}

}  // namespace

std::string_view to_string(Isa isa) noexcept {
  return isa == Isa::avx2 ? "avx2" : "scalar";
}

Isa detected_isa() noexcept { return avx2::available() ? Isa::avx2 : Isa::scalar; }

Isa active_isa() noexcept { return active().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) noexcept {
  if (isa == Isa::avx2 && !avx2::available()) isa = Isa::scalar;
  active().store(isa, std::memory_order_relaxed);
}

double squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
  assert(a.size() == b.size());
  if (active_isa() == Isa::avx2) return avx2::squared_distance(a.data(), b.data(), a.size());
  return scalar::squared_distance(a.data(), b.data(), a.size());
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  assert(a.size() == b.size());
  if (active_isa() == Isa::avx2) return avx2::dot(a.data(), b.data(), a.size());
  return scalar::dot(a.data(), b.data(), a.size());
}

void squared_distances(std::span<const double> rows, std::size_t cols,
                       std::span<const double> query, std::span<double> out) noexcept {
  assert(query.size() == cols && rows.size() == out.size() * cols);
  const auto fn = active_isa() == Isa::avx2 ? &avx2::squared_distance : &scalar::squared_distance;
  for (std::size_t r = 0; r < out.size(); ++r) {
    out[r] = fn(rows.data() + r * cols, query.data(), cols);
  }
}

}  // namespace habtox::kernels
