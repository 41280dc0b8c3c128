#include "candleaug/gaf.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "candleaug/error.hpp"

namespace candleaug {

namespace {
constexpr std::array<const char*, kNumChannels> kChannelNames = {"open", "high", "low", "close"};
}

std::vector<double> GafMatrix::diagonal() const {
  std::vector<double> d(n_);
  for (std::size_t i = 0; i < n_; ++i) d[i] = (*this)(i, i);
  return d;
}

NormalizedSeries normalize(std::span<const double> series) {
  if (series.size() < 2) throw Error(ErrorCode::EmptySequence, "normalization needs at least two values");
  const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
  const double min = *lo;
  const double max = *hi;
  if (!(max > min)) throw Error(ErrorCode::ConstantSeries, "series has zero range");
  NormalizedSeries out;
  out.scale = {min, max};
  out.values.reserve(series.size());
  const double range = max - min;
  for (double x : series) out.values.push_back(std::clamp((x - min) / range, 0.0, 1.0));
  return out;
}

std::vector<double> denormalize(const NormalizedSeries& n) {
  const double range = n.scale.max - n.scale.min;
  std::vector<double> out;
  out.reserve(n.values.size());
  for (double v : n.values) out.push_back(v * range + n.scale.min);
  return out;
}

GafMatrix gaf_encode(std::span<const double> normalized) {
  const std::size_t n = normalized.size();
  std::vector<double> phi(n);
  for (std::size_t i = 0; i < n; ++i) phi[i] = std::acos(std::clamp(normalized[i], -1.0, 1.0));
  GafMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = std::cos(phi[i] + phi[j]);
      m(i, j) = v;
      m(j, i) = v;
    }
  }
  return m;
}

GafMatrix gaf_encode_products(std::span<const double> normalized) {
  const std::size_t n = normalized.size();
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = std::sqrt(std::max(0.0, 1.0 - normalized[i] * normalized[i]));
  GafMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = normalized[i] * normalized[j] - s[i] * s[j];
      m(i, j) = v;
      m(j, i) = v;
    }
  }
  return m;
}

std::vector<double> gaf_decode(const GafMatrix& m) {
  std::vector<double> x(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double g = m(i, i);
    if (!(g >= -1.0 && g <= 1.0)) {
      throw Error(ErrorCode::DiagonalOutOfRange, "diagonal entry " + std::to_string(i) + " = " + std::to_string(g));
    }
    x[i] = std::sqrt((g + 1.0) / 2.0);
  }
  return x;
}

GafTensor encode_window(const CandleWindow& w) {
  GafTensor t;
  for (std::size_t c = 0; c < kNumChannels; ++c) {
    const auto series = w.channel(c);
    NormalizedSeries n;
    try {
      n = normalize(series);
    } catch (const Error& e) {
      throw Error(e.code(), std::string("channel ") + kChannelNames[c] + ": " + e.what());
    }
    t.channels[c] = gaf_encode(n.values);
    t.scales[c] = n.scale;
  }
  return t;
}

CandleWindow decode_tensor(const GafTensor& t) {
  std::array<std::vector<double>, kNumChannels> prices;
  for (std::size_t c = 0; c < kNumChannels; ++c) {
    if (t.channels[c].size() != t.length()) throw Error(ErrorCode::ShapeMismatch, "channels differ in length");
    prices[c] = denormalize({gaf_decode(t.channels[c]), t.scales[c]});
  }
  std::vector<Candle> bars(t.length());
  for (std::size_t i = 0; i < bars.size(); ++i) {
    bars[i] = repair({prices[0][i], prices[1][i], prices[2][i], prices[3][i]});
  }
  return CandleWindow(std::move(bars));
}

}  // namespace candleaug
