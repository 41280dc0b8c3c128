#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "candleaug/ohlc.hpp"

namespace candleaug {

/// Min/max of the source series, kept so normalization can be inverted.
struct Scale {
  double min = 0.0;
  double max = 1.0;
  bool operator==(const Scale&) const = default;
};

struct NormalizedSeries {
  std::vector<double> values;  // each in [0, 1]
  Scale scale;
};

/// Dense, row-major T x T matrix.
class GafMatrix {
 public:
  GafMatrix() = default;
  explicit GafMatrix(std::size_t n) : n_(n), data_(n * n, 0.0) {}

  std::size_t size() const noexcept { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }
  std::vector<double> diagonal() const;

  bool operator==(const GafMatrix&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

inline constexpr std::size_t kNumChannels = 4;

/// Per-channel summation GAFs in open, high, low, close order.
struct GafTensor {
  std::array<GafMatrix, kNumChannels> channels;
  std::array<Scale, kNumChannels> scales;

  std::size_t length() const noexcept { return channels[0].size(); }
  bool operator==(const GafTensor&) const = default;
};

/// Min-max normalization to [0, 1]. Throws EmptySequence (< 2 values) or ConstantSeries.
NormalizedSeries normalize(std::span<const double> series);

std::vector<double> denormalize(const NormalizedSeries& n);

/// entry(i, j) = cos(phi_i + phi_j), phi = arccos(x).
GafMatrix gaf_encode(std::span<const double> normalized);

/// Same matrix via x x^T - sqrt(1 - x^2) sqrt(1 - x^2)^T. Used to cross-check
/// `gaf_encode` and to rebuild off-diagonals after a diagonal edit.
GafMatrix gaf_encode_products(std::span<const double> normalized);

/// Inverts through the diagonal: x = sqrt((g + 1) / 2). Throws DiagonalOutOfRange.
std::vector<double> gaf_decode(const GafMatrix& m);

/// Throws ConstantSeries naming the offending channel.
GafTensor encode_window(const CandleWindow& w);

/// Per channel decode then denormalize, then repair each bar. Throws DiagonalOutOfRange.
CandleWindow decode_tensor(const GafTensor& t);

}  // namespace candleaug
