#pragma once

#include <cstddef>
#include <span>
#include <string_view>

// Data-parallel inner loops shared by the neighbour searches, the RBF kernel
// and the MLP forward pass. Each kernel has a scalar reference and an AVX2
// variant; both accumulate in four interleaved lanes and reduce as
// (l0 + l1) + (l2 + l3), then add the tail sequentially, so results are
// bit-identical whichever variant runs.

namespace habtox::kernels {

enum class Isa { scalar, avx2 };

std::string_view to_string(Isa isa) noexcept;

// Best variant the running CPU supports (and the build compiled in).
Isa detected_isa() noexcept;
// Variant currently used by the dispatching entry points.
Isa active_isa() noexcept;
// Test hook; requesting an unsupported variant falls back to scalar.
void set_active_isa(Isa isa) noexcept;

double squared_distance(std::span<const double> a, std::span<const double> b) noexcept;
double dot(std::span<const double> a, std::span<const double> b) noexcept;

// out[r] = squared_distance(rows[r*cols .. +cols], query)
void squared_distances(std::span<const double> rows, std::size_t cols,
                       std::span<const double> query, std::span<double> out) noexcept;

namespace scalar {
double squared_distance(const double* a, const double* b, std::size_t n) noexcept;
double dot(const double* a, const double* b, std::size_t n) noexcept;
}  // namespace scalar

namespace avx2 {
bool available() noexcept;
double squared_distance(const double* a, const double* b, std::size_t n) noexcept;
double dot(const double* a, const double* b, std::size_t n) noexcept;
}  // namespace avx2

}  // namespace habtox::kernels
