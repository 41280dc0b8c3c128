#include "candleaug/ohlc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "candleaug/error.hpp"

namespace candleaug {

bool Candle::valid() const noexcept {
  return open > 0 && high > 0 && low > 0 && close > 0 && high >= std::max(open, close) &&
         low <= std::min(open, close);
}

std::vector<double> CandleWindow::channel(std::size_t c) const {
  std::vector<double> out;
  out.reserve(candles_.size());
  for (const auto& k : candles_) {
    switch (c) {
      case 0: out.push_back(k.open); break;
      case 1: out.push_back(k.high); break;
      case 2: out.push_back(k.low); break;
      default: out.push_back(k.close); break;
    }
  }
  return out;
}

bool CandleWindow::valid() const noexcept {
  return std::all_of(candles_.begin(), candles_.end(), [](const Candle& c) { return c.valid(); });
}

CandleWindow CandleWindow::scaled(double factor) const {
  std::vector<Candle> out = candles_;
  for (auto& c : out) {
    c.open *= factor;
    c.high *= factor;
    c.low *= factor;
    c.close *= factor;
  }
  return CandleWindow(std::move(out));
}

std::string_view label_name(PatternLabel l) noexcept {
  switch (l) {
    case PatternLabel::None: return "None";
    case PatternLabel::MorningStar: return "MorningStar";
    case PatternLabel::EveningStar: return "EveningStar";
    case PatternLabel::BullishEngulfing: return "BullishEngulfing";
    case PatternLabel::BearishEngulfing: return "BearishEngulfing";
    case PatternLabel::ShootingStar: return "ShootingStar";
    case PatternLabel::InvertedHammer: return "InvertedHammer";
    case PatternLabel::BullishHarami: return "BullishHarami";
    case PatternLabel::BearishHarami: return "BearishHarami";
  }
  return "None";
}

std::optional<PatternLabel> parse_label(std::string_view s) noexcept {
  if (s == "None" || s == "0") return PatternLabel::None;
  for (auto l : kAllPatterns) {
    if (s == label_name(l) || s == std::to_string(label_code(l))) return l;
  }
  return std::nullopt;
}

void RuleParams::validate() const {
  if (!(long_body_ratio > 0 && short_body_ratio > 0 && shadow_body_ratio > 0 && trend_slope_min > 0 &&
        doji_epsilon > 0)) {
    throw Error(ErrorCode::InvalidConfig, "rule ratios must be positive");
  }
  if (trend_prefix_len < 2) throw Error(ErrorCode::InvalidConfig, "trend_prefix_len must be >= 2");
}

CandleAnatomy anatomy(const Candle& c) noexcept {
  CandleAnatomy a;
  a.body = std::abs(c.close - c.open);
  a.upper_shadow = c.high - std::max(c.open, c.close);
  a.lower_shadow = std::min(c.open, c.close) - c.low;
  a.direction = c.close > c.open ? Direction::White : (c.close < c.open ? Direction::Black : Direction::Doji);
  return a;
}

Candle repair(const Candle& raw) {
  if (!(raw.open > 0 && raw.high > 0 && raw.low > 0 && raw.close > 0)) {
    throw Error(ErrorCode::NonPositivePrice, "all four prices must be > 0");
  }
  Candle c = raw;
  c.high = std::max({raw.high, raw.open, raw.close});
  c.low = std::min({raw.low, raw.open, raw.close});
  return c;
}

Trend detect_trend(std::span<const double> closes, const RuleParams& params) {
  if (closes.empty()) throw Error(ErrorCode::EmptySequence, "trend needs at least one close");
  const double n = static_cast<double>(closes.size());
  const double mean_x = (n - 1.0) / 2.0;
  const double mean_y = std::accumulate(closes.begin(), closes.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < closes.size(); ++i) {
    const double dx = static_cast<double>(i) - mean_x;
    sxy += dx * (closes[i] - mean_y);
    sxx += dx * dx;
  }
  if (sxx == 0.0) return Trend::None;
  const double slope = sxy / sxx;
  const double threshold = params.trend_slope_min * mean_y;
  if (slope > threshold) return Trend::Up;
  if (slope < -threshold) return Trend::Down;
  return Trend::None;
}

namespace {

// Predicates over the final bars, judged against the trend prefix.
struct RuleContext {
  const RuleParams& p;
  double ref_body;   // mean body of the prefix
  double tolerance;  // doji tolerance in price units

  bool white(const Candle& c) const { return c.close - c.open > tolerance; }
  bool black(const Candle& c) const { return c.open - c.close > tolerance; }
  bool long_body(const Candle& c) const { return anatomy(c).body > p.long_body_ratio * ref_body; }
  bool short_body(const Candle& c) const { return anatomy(c).body < p.short_body_ratio * ref_body; }

  static double top(const Candle& c) { return std::max(c.open, c.close); }
  static double bottom(const Candle& c) { return std::min(c.open, c.close); }
  static double mid(const Candle& c) { return 0.5 * (c.open + c.close); }

  // Small body, long upper shadow, little or no lower shadow.
  bool star_shape(const Candle& c) const {
    const auto a = anatomy(c);
    return short_body(c) && a.upper_shadow >= p.shadow_body_ratio * a.body && a.upper_shadow >= ref_body &&
           a.lower_shadow < p.short_body_ratio * ref_body;
  }

  bool morning_star(const Candle& a, const Candle& b, const Candle& c) const {
    return black(a) && long_body(a) && short_body(b) && top(b) < a.close && white(c) && long_body(c) &&
           c.close > mid(a);
  }
  bool evening_star(const Candle& a, const Candle& b, const Candle& c) const {
    return white(a) && long_body(a) && short_body(b) && bottom(b) > a.close && black(c) && c.close < mid(a);
  }
  bool bullish_engulfing(const Candle& b, const Candle& c) const {
    return black(b) && white(c) && c.open < b.close && c.close > b.open;
  }
  bool bearish_engulfing(const Candle& b, const Candle& c) const {
    return white(b) && black(c) && c.open > b.close && c.close < b.open;
  }
  bool bullish_harami(const Candle& b, const Candle& c) const {
    return black(b) && long_body(b) && short_body(c) && bottom(c) > b.close && top(c) < b.open;
  }
  bool bearish_harami(const Candle& b, const Candle& c) const {
    return white(b) && long_body(b) && black(c) && short_body(c) && bottom(c) > b.open && top(c) < b.close;
  }
};

}  // namespace

PatternLabel match_pattern(const CandleWindow& w, const RuleParams& params) {
  const std::size_t prefix = params.trend_prefix_len;
  if (w.size() < prefix + 3) {
    throw Error(ErrorCode::WindowTooShort,
                "window of " + std::to_string(w.size()) + " bars, need " + std::to_string(prefix + 3));
  }
  const std::size_t t = w.size();
  const std::size_t first = t - 3 - prefix;

  std::vector<double> closes;
  double body_sum = 0.0;
  for (std::size_t i = first; i < first + prefix; ++i) {
    closes.push_back(w[i].close);
    body_sum += anatomy(w[i]).body;
  }
  const Trend trend = detect_trend(closes, params);
  if (trend == Trend::None) return PatternLabel::None;

  const double mean_close = std::accumulate(closes.begin(), closes.end(), 0.0) / static_cast<double>(prefix);
  const RuleContext ctx{params, body_sum / static_cast<double>(prefix), params.doji_epsilon * mean_close};
  const Candle& a = w[t - 3];
  const Candle& b = w[t - 2];
  const Candle& c = w[t - 1];
  const bool down = trend == Trend::Down;
  const bool up = trend == Trend::Up;

  if (down && ctx.morning_star(a, b, c)) return PatternLabel::MorningStar;
  if (up && ctx.evening_star(a, b, c)) return PatternLabel::EveningStar;
  if (down && ctx.bullish_engulfing(b, c)) return PatternLabel::BullishEngulfing;
  if (up && ctx.bearish_engulfing(b, c)) return PatternLabel::BearishEngulfing;
  if (down && ctx.bullish_harami(b, c)) return PatternLabel::BullishHarami;
  if (up && ctx.bearish_harami(b, c)) return PatternLabel::BearishHarami;
  if (up && ctx.star_shape(c)) return PatternLabel::ShootingStar;
  if (down && ctx.star_shape(c)) return PatternLabel::InvertedHammer;
  return PatternLabel::None;
}

}  // namespace candleaug
