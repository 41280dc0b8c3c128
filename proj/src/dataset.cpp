#include "candleaug/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "candleaug/error.hpp"

namespace candleaug {

using nlohmann::json;

std::optional<Timestamp> parse_timestamp(std::string_view s) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  const std::string str(s);
  char sep = 'T';
  int consumed = 0;
  const int fields = std::sscanf(str.c_str(), "%4d-%2d-%2d%c%2d:%2d%n", &y, &mo, &d, &sep, &h, &mi, &consumed);
  std::size_t pos = 0;
  if (fields == 6 && (sep == 'T' || sep == ' ')) {
    pos = static_cast<std::size_t>(consumed);
    if (pos < str.size() && str[pos] == ':') {
      int n = 0;
      if (std::sscanf(str.c_str() + pos, ":%2d%n", &sec, &n) != 1) return std::nullopt;
      pos += static_cast<std::size_t>(n);
    }
    if (pos < str.size() && str[pos] == 'Z') ++pos;
  } else {
    h = mi = sec = 0;
    consumed = 0;
    if (std::sscanf(str.c_str(), "%4d-%2d-%2d%n", &y, &mo, &d, &consumed) != 3) return std::nullopt;
    pos = static_cast<std::size_t>(consumed);
  }
  if (pos != str.size()) return std::nullopt;
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || sec > 60 || h < 0 || mi < 0 || sec < 0) return std::nullopt;
  return std::chrono::sys_days{ymd} + std::chrono::hours{h} + std::chrono::minutes{mi} + std::chrono::seconds{sec};
}

std::string format_timestamp(Timestamp t) {
  const auto days = std::chrono::floor<std::chrono::days>(t);
  const std::chrono::year_month_day ymd{days};
  const std::chrono::hh_mm_ss hms{t - days};
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02ld:%02ld:%02ld", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()),
                static_cast<long>(hms.seconds().count()));
  return buf;
}

namespace {

constexpr std::string_view kCsvHeader = "timestamp,open,high,low,close";

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && s[i] == ' ') ++i;
  return s.substr(i);
}

bool parse_price(std::string_view s, double& out) {
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc{} && ptr == end;
}

}  // namespace

std::vector<TickRow> ingest_csv(std::istream& in, const IngestOptions& opts) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::MalformedRow, "line 1: empty file");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (trim(line) != kCsvHeader) {
    throw Error(ErrorCode::MalformedRow, "line 1: header must be '" + std::string(kCsvHeader) + "'");
  }
  std::vector<TickRow> rows;
  std::optional<Timestamp> previous;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no);
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != 5) throw Error(ErrorCode::MalformedRow, where + ": expected 5 fields");
    const auto ts = parse_timestamp(fields[0]);
    if (!ts) throw Error(ErrorCode::MalformedRow, where + ": bad timestamp '" + std::string(fields[0]) + "'");
    std::array<double, 4> p{};
    for (std::size_t i = 0; i < 4; ++i) {
      if (!parse_price(fields[i + 1], p[i])) {
        throw Error(ErrorCode::MalformedRow, where + ": bad price '" + std::string(fields[i + 1]) + "'");
      }
    }
    if (previous && *ts <= *previous) throw Error(ErrorCode::NonMonotoneTimestamp, where);
    previous = ts;
    const Candle c{p[0], p[1], p[2], p[3]};
    if (!c.valid()) throw Error(ErrorCode::InvalidOHLC, where + ": prices violate OHLC ordering or are <= 0");
    if (opts.from && *ts < *opts.from) continue;
    if (opts.to && *ts >= *opts.to) continue;
    rows.push_back({*ts, c});
  }
  return rows;
}

std::vector<TickRow> ingest_csv(const std::filesystem::path& path, const IngestOptions& opts) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  return ingest_csv(in, opts);
}

std::vector<CandleWindow> slide_windows(std::span<const TickRow> rows, std::size_t length, std::size_t stride) {
  if (length < 2 || stride < 1) throw Error(ErrorCode::InvalidConfig, "need T >= 2 and stride >= 1");
  std::vector<CandleWindow> out;
  if (rows.size() < length) return out;
  out.reserve((rows.size() - length) / stride + 1);
  for (std::size_t start = 0; start + length <= rows.size(); start += stride) {
    std::vector<Candle> bars;
    bars.reserve(length);
    for (std::size_t i = start; i < start + length; ++i) bars.push_back(rows[i].candle);
    out.emplace_back(std::move(bars));
  }
  return out;
}

BalanceResult label_and_balance(std::span<const LabeledWindow> windows, const RuleParams& params,
                                std::size_t per_class, bool allow_fewer) {
  if (per_class < 1) throw Error(ErrorCode::InvalidConfig, "per_class must be >= 1");
  params.validate();
  BalanceResult r;
  for (const auto& w : windows) {
    const PatternLabel label = match_pattern(w.window, params);
    if (label == PatternLabel::None) continue;
    const std::size_t k = class_index(label);
    ++r.found[k];
    if (r.kept[k] >= per_class) continue;
    ++r.kept[k];
    LabeledWindow out = w;
    out.label = label;
    r.windows.push_back(std::move(out));
  }
  if (!allow_fewer) {
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      if (r.kept[k] < per_class) {
        throw Error(ErrorCode::InsufficientClass, std::string(label_name(label_from_class(k))) + " found " +
                                                      std::to_string(r.kept[k]) + ", needed " +
                                                      std::to_string(per_class));
      }
    }
  }
  return r;
}

BalanceResult label_and_balance(std::span<const CandleWindow> windows, const RuleParams& params,
                                std::size_t per_class, bool allow_fewer) {
  std::vector<LabeledWindow> wrapped;
  wrapped.reserve(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    wrapped.push_back({windows[i], PatternLabel::None, SampleSource::Real, json{{"window", i}}});
  }
  return label_and_balance(wrapped, params, per_class, allow_fewer);
}

std::vector<LabeledWindow> to_records(std::span<const GeneratedSample> samples, const SamplerConfig& cfg) {
  const json sampler = {{"scale_low", cfg.scale_low},       {"scale_high", cfg.scale_high},
                        {"reset_period", cfg.reset_period}, {"episodes", cfg.episodes},
                        {"seed", cfg.seed}};
  std::vector<LabeledWindow> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    out.push_back({s.window, s.label, SampleSource::Generated,
                   json{{"source_index", s.source_index}, {"episode", s.episode}, {"sampler", sampler}}});
  }
  return out;
}

namespace {

constexpr std::string_view kDatasetMagic = "candleset v1 T=";

json record_to_json(const LabeledWindow& r) {
  json prices = json::array();
  for (const auto& c : r.window) prices.push_back({c.open, c.high, c.low, c.close});
  json j = {{"label", label_name(r.label)},
            {"source", r.source == SampleSource::Real ? "real" : "generated"},
            {"prices", std::move(prices)}};
  if (!r.origin.is_null() && !(r.origin.is_object() && r.origin.empty())) j["origin"] = r.origin;
  return j;
}

LabeledWindow record_from_json(const json& j, std::size_t length, std::size_t line_no) {
  const std::string where = "line " + std::to_string(line_no);
  LabeledWindow r;
  try {
    const auto label = parse_label(j.at("label").get<std::string>());
    if (!label) throw Error(ErrorCode::ParseError, where + ": unknown label");
    r.label = *label;
    const auto source = j.at("source").get<std::string>();
    if (source == "real") {
      r.source = SampleSource::Real;
    } else if (source == "generated") {
      r.source = SampleSource::Generated;
    } else {
      throw Error(ErrorCode::ParseError, where + ": unknown source '" + source + "'");
    }
    std::vector<Candle> bars;
    for (const auto& row : j.at("prices")) {
      if (row.size() != 4) throw Error(ErrorCode::InconsistentShapes, where + ": bar must have 4 prices");
      bars.push_back({row[0].get<double>(), row[1].get<double>(), row[2].get<double>(), row[3].get<double>()});
    }
    if (bars.size() != length) {
      throw Error(ErrorCode::InconsistentShapes,
                  where + ": " + std::to_string(bars.size()) + " bars, header says T=" + std::to_string(length));
    }
    r.window = CandleWindow(std::move(bars));
    if (j.contains("origin")) r.origin = j["origin"];
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, where + ": " + e.what());
  }
  return r;
}

}  // namespace

void save_dataset(std::span<const LabeledWindow> records, std::size_t length, std::ostream& out) {
  out << kDatasetMagic << length << '\n';
  for (const auto& r : records) {
    if (r.window.size() != length) throw Error(ErrorCode::InconsistentShapes, "record length differs from T");
    out << record_to_json(r).dump() << '\n';
  }
}

void save_dataset(std::span<const LabeledWindow> records, std::size_t length, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  save_dataset(records, length, out);
}

Dataset load_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind(kDatasetMagic, 0) != 0) {
    throw Error(ErrorCode::ParseError, "missing 'candleset v1 T=<T>' header");
  }
  Dataset ds;
  try {
    ds.length = std::stoul(line.substr(kDatasetMagic.size()));
  } catch (const std::exception&) {
    throw Error(ErrorCode::ParseError, "bad T in header '" + line + "'");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": " + e.what());
    }
    ds.records.push_back(record_from_json(j, ds.length, line_no));
  }
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  return load_dataset(in);
}

namespace {

// All sizes are in units of the typical body u; thresholds are kept with
// margin against the rule defaults (long > 1.5 ref, short < 0.5 ref).
class PatternBuilder {
 public:
  PatternBuilder(std::mt19937_64& rng, double base, double unit) : rng_(rng), unit_(unit), last_close_(base) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double u(double lo, double hi) { return unit_ * uniform(lo, hi); }

  Candle bar(double open, double close, double upper, double lower) {
    Candle c{open, std::max(open, close) + upper, std::min(open, close) - lower, close};
    last_close_ = close;
    return c;
  }
  // Ordinary trend bar continuing in `sign` direction.
  Candle trend_bar(int sign) {
    const double open = last_close_ + u(-0.05, 0.05);
    const double close = open + sign * u(0.85, 1.15);
    return bar(open, close, u(0.1, 0.4), u(0.1, 0.4));
  }
  double last_close() const { return last_close_; }

 private:
  std::mt19937_64& rng_;
  double unit_;
  double last_close_;
};

bool bullish(PatternLabel l) {
  return l == PatternLabel::MorningStar || l == PatternLabel::BullishEngulfing || l == PatternLabel::BullishHarami ||
         l == PatternLabel::InvertedHammer;
}

// Builds the final three bars for a downtrend pattern (s = +1) or its mirror
// in an uptrend (s = -1, prices reflected around the last close).
void append_tail(PatternLabel label, PatternBuilder& b, std::vector<Candle>& bars) {
  const int s = bullish(label) ? 1 : -1;
  // Reflection: work in a frame where the trend is down, map back via
  // price = pivot + s * (frame price - pivot). Shadows swap under reflection.
  const double pivot = b.last_close();
  auto emit = [&](double open, double close, double upper, double lower) {
    const double o = pivot + s * (open - pivot);
    const double c = pivot + s * (close - pivot);
    bars.push_back(s > 0 ? b.bar(o, c, upper, lower) : b.bar(o, c, lower, upper));
  };
  auto normal = [&](double& prev_close) {
    const double open = prev_close + b.u(-0.05, 0.05);
    const double close = open - b.u(0.85, 1.15);
    emit(open, close, b.u(0.1, 0.4), b.u(0.1, 0.4));
    prev_close = close;
  };
  double c0 = pivot;
  switch (label) {
    case PatternLabel::MorningStar:
    case PatternLabel::EveningStar: {
      const double long_body = b.u(2.6, 3.2);
      const double a_open = c0 + b.u(-0.05, 0.05);
      const double a_close = a_open - long_body;
      emit(a_open, a_close, b.u(0.1, 0.3), b.u(0.1, 0.3));
      const double b_top = a_close - b.u(0.3, 0.6);
      const double b_body = b.u(0.1, 0.25);
      const bool b_white = b.uniform(0, 1) < 0.5;
      emit(b_white ? b_top - b_body : b_top, b_white ? b_top : b_top - b_body, b.u(0.4, 0.8), b.u(0.4, 0.8));
      const double c_open = b_top - b_body;
      const double c_close = a_close + long_body * b.uniform(0.65, 0.9);
      emit(c_open, c_close, b.u(0.1, 0.3), b.u(0.1, 0.3));
      break;
    }
    case PatternLabel::BullishEngulfing:
    case PatternLabel::BearishEngulfing: {
      normal(c0);
      const double b_open = c0 - b.u(0.0, 0.1);
      const double b_close = b_open - b.u(0.3, 0.5);
      emit(b_open, b_close, b.u(0.05, 0.2), b.u(0.05, 0.2));
      emit(b_close - b.u(0.1, 0.3), b_open + b.u(0.2, 0.6), b.u(0.05, 0.2), b.u(0.05, 0.2));
      break;
    }
    case PatternLabel::BullishHarami:
    case PatternLabel::BearishHarami: {
      normal(c0);
      const double b_open = c0 - b.u(0.0, 0.1);
      const double b_len = b.u(2.6, 3.2);
      const double b_close = b_open - b_len;
      emit(b_open, b_close, b.u(0.05, 0.2), b.u(0.05, 0.2));
      const double c_body = b.u(0.1, 0.25);
      const double c_bottom = b_close + (b_len - c_body) * b.uniform(0.3, 0.7);
      // Reflected, the bearish harami needs a black inner bar: white here.
      emit(c_bottom, c_bottom + c_body, b.u(0.05, 0.3), b.u(0.05, 0.3));
      break;
    }
    case PatternLabel::ShootingStar:
    case PatternLabel::InvertedHammer: {
      normal(c0);
      normal(c0);
      const double c_open = c0 - b.u(0.1, 0.3);
      const double c_body = b.u(0.1, 0.25);
      // In the reflected frame the long shadow must end up on top, so it is
      // drawn as a lower shadow there.
      if (s > 0) {
        emit(c_open, c_open + c_body, b.u(2.0, 3.0), b.u(0.0, 0.1));
      } else {
        emit(c_open, c_open + c_body, b.u(0.0, 0.1), b.u(2.0, 3.0));
      }
      break;
    }
    case PatternLabel::None: break;
  }
}

}  // namespace

CandleWindow synthesize_pattern(PatternLabel label, std::mt19937_64& rng, std::size_t length,
                                const RuleParams& params) {
  if (label == PatternLabel::None) throw Error(ErrorCode::InvalidConfig, "cannot synthesize the None label");
  if (length < params.trend_prefix_len + 3) throw Error(ErrorCode::WindowTooShort, "window too short for pattern");
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const double base = std::uniform_real_distribution<double>(20.0, 200.0)(rng);
    const double unit = base * std::uniform_real_distribution<double>(0.003, 0.006)(rng);
    PatternBuilder b(rng, base, unit);
    const int trend = bullish(label) ? -1 : 1;
    std::vector<Candle> bars;
    for (std::size_t i = 0; i + 3 < length; ++i) bars.push_back(b.trend_bar(trend));
    append_tail(label, b, bars);
    CandleWindow w(std::move(bars));
    if (w.valid() && match_pattern(w, params) == label) return w;
  }
  throw Error(ErrorCode::InvalidConfig, "could not synthesize " + std::string(label_name(label)));
}

std::vector<LabeledWindow> synthetic_corpus(std::size_t per_class, std::uint64_t seed, std::size_t length,
                                            const RuleParams& params) {
  std::mt19937_64 rng(seed);
  std::vector<LabeledWindow> out;
  out.reserve(per_class * kNumPatterns);
  for (std::size_t i = 0; i < per_class; ++i) {
    for (auto label : kAllPatterns) {
      out.push_back({synthesize_pattern(label, rng, length, params), label, SampleSource::Real,
                     json{{"synthetic", out.size()}, {"seed", seed}}});
    }
  }
  return out;
}

}  // namespace candleaug
