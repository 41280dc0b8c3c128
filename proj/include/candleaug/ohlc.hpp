#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace candleaug {

/// One OHLC bar. Valid bars satisfy low <= min(open, close),
/// high >= max(open, close) and all prices > 0.
struct Candle {
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;

  bool valid() const noexcept;
  bool operator==(const Candle&) const = default;
};

enum class Direction { White, Black, Doji };

struct CandleAnatomy {
  double body = 0.0;
  double upper_shadow = 0.0;
  double lower_shadow = 0.0;
  Direction direction = Direction::Doji;
};

/// Fixed-length, ordered sequence of bars.
class CandleWindow {
 public:
  CandleWindow() = default;
  explicit CandleWindow(std::vector<Candle> candles) : candles_(std::move(candles)) {}

  std::size_t size() const noexcept { return candles_.size(); }
  bool empty() const noexcept { return candles_.empty(); }
  const Candle& operator[](std::size_t i) const { return candles_[i]; }
  Candle& operator[](std::size_t i) { return candles_[i]; }
  auto begin() const noexcept { return candles_.begin(); }
  auto end() const noexcept { return candles_.end(); }
  const std::vector<Candle>& candles() const noexcept { return candles_; }

  /// Channel 0..3 = open, high, low, close.
  std::vector<double> channel(std::size_t c) const;
  std::vector<double> closes() const { return channel(3); }

  bool valid() const noexcept;
  /// Multiplies every price by `factor`.
  CandleWindow scaled(double factor) const;

  bool operator==(const CandleWindow&) const = default;

 private:
  std::vector<Candle> candles_;
};

inline constexpr std::size_t kDefaultWindowLength = 10;
inline constexpr std::size_t kNumPatterns = 8;

/// Integer codes 1..8 follow the order the signals are listed in; 0 is None.
enum class PatternLabel : int {
  None = 0,
  MorningStar = 1,
  EveningStar = 2,
  BullishEngulfing = 3,
  BearishEngulfing = 4,
  ShootingStar = 5,
  InvertedHammer = 6,
  BullishHarami = 7,
  BearishHarami = 8,
};

inline constexpr std::array<PatternLabel, kNumPatterns> kAllPatterns = {
    PatternLabel::MorningStar,      PatternLabel::EveningStar,   PatternLabel::BullishEngulfing,
    PatternLabel::BearishEngulfing, PatternLabel::ShootingStar,  PatternLabel::InvertedHammer,
    PatternLabel::BullishHarami,    PatternLabel::BearishHarami,
};

constexpr int label_code(PatternLabel l) noexcept { return static_cast<int>(l); }
std::string_view label_name(PatternLabel l) noexcept;
/// Accepts either the name ("MorningStar") or the integer code ("1").
std::optional<PatternLabel> parse_label(std::string_view s) noexcept;
/// Zero-based class index used by the classifier output layer.
constexpr std::size_t class_index(PatternLabel l) noexcept { return static_cast<std::size_t>(l) - 1; }
constexpr PatternLabel label_from_class(std::size_t k) noexcept { return static_cast<PatternLabel>(k + 1); }

enum class Trend { Up, Down, None };

/// Thresholds for the rule engine. Ratios are dimensionless; the slope
/// threshold is a fraction of the mean close per bar.
struct RuleParams {
  std::size_t trend_prefix_len = 7;
  double trend_slope_min = 0.0005;
  double long_body_ratio = 1.5;
  double short_body_ratio = 0.5;
  double shadow_body_ratio = 2.0;
  double doji_epsilon = 1e-6;

  /// Throws InvalidConfig.
  void validate() const;
};

CandleAnatomy anatomy(const Candle& c) noexcept;

/// Widens high/low so the bar is consistent; open and close are kept.
/// Throws NonPositivePrice.
Candle repair(const Candle& raw);

/// Least-squares slope test over `closes`. Throws EmptySequence.
Trend detect_trend(std::span<const double> closes, const RuleParams& params = {});

/// Labels the pattern formed by the last one to three bars. Throws WindowTooShort.
PatternLabel match_pattern(const CandleWindow& w, const RuleParams& params = {});

}  // namespace candleaug
