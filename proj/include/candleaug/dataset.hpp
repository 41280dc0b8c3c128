#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "candleaug/ohlc.hpp"
#include "candleaug/sampler.hpp"

namespace candleaug {

using Timestamp = std::chrono::sys_seconds;

struct TickRow {
  Timestamp timestamp;
  Candle candle;
};

/// Parses `YYYY-MM-DD[T| ]HH:MM[:SS][Z]`, or a bare date. Returns nullopt on failure.
std::optional<Timestamp> parse_timestamp(std::string_view s);
std::string format_timestamp(Timestamp t);

struct IngestOptions {
  std::optional<Timestamp> from;  // inclusive
  std::optional<Timestamp> to;    // exclusive
};

/// Reads `timestamp,open,high,low,close` CSV. Throws MalformedRow,
/// NonMonotoneTimestamp, InvalidOHLC (each naming the line), IoError.
std::vector<TickRow> ingest_csv(std::istream& in, const IngestOptions& opts = {});
std::vector<TickRow> ingest_csv(const std::filesystem::path& path, const IngestOptions& opts = {});

/// All contiguous windows of `length` bars, the k-th starting at row k * stride.
std::vector<CandleWindow> slide_windows(std::span<const TickRow> rows, std::size_t length, std::size_t stride = 1);

enum class SampleSource { Real, Generated };

struct LabeledWindow {
  CandleWindow window;
  PatternLabel label = PatternLabel::None;
  SampleSource source = SampleSource::Real;
  nlohmann::json origin = nlohmann::json::object();  // row offset or sampler provenance

  bool operator==(const LabeledWindow&) const = default;
};

struct BalanceResult {
  std::vector<LabeledWindow> windows;
  std::array<std::size_t, kNumClasses> found{};  // matches seen per class
  std::array<std::size_t, kNumClasses> kept{};
};

/// Labels every window with the rule engine, drops None, keeps the first
/// `per_class` matches of each class in input order. Throws InsufficientClass
/// unless `allow_fewer`.
BalanceResult label_and_balance(std::span<const LabeledWindow> windows, const RuleParams& params,
                                std::size_t per_class, bool allow_fewer = false);
BalanceResult label_and_balance(std::span<const CandleWindow> windows, const RuleParams& params,
                                std::size_t per_class, bool allow_fewer = false);

/// Wraps sampler output as dataset records, embedding the sampler config.
std::vector<LabeledWindow> to_records(std::span<const GeneratedSample> samples, const SamplerConfig& cfg);

/// Dataset file: header `candleset v1 T=<T>`, then one JSON object per line.
void save_dataset(std::span<const LabeledWindow> records, std::size_t length, std::ostream& out);
void save_dataset(std::span<const LabeledWindow> records, std::size_t length, const std::filesystem::path& path);

struct Dataset {
  std::size_t length = kDefaultWindowLength;
  std::vector<LabeledWindow> records;
};
/// Throws ParseError, InconsistentShapes, IoError.
Dataset load_dataset(std::istream& in);
Dataset load_dataset(const std::filesystem::path& path);

/// Builds a randomized window of `length` bars exhibiting `label` with margin
/// on every rule threshold; the result always satisfies match_pattern.
CandleWindow synthesize_pattern(PatternLabel label, std::mt19937_64& rng, std::size_t length = kDefaultWindowLength,
                                const RuleParams& params = {});

/// `per_class` synthetic windows for each of the eight labels, classes interleaved.
std::vector<LabeledWindow> synthetic_corpus(std::size_t per_class, std::uint64_t seed,
                                            std::size_t length = kDefaultWindowLength, const RuleParams& params = {});

}  // namespace candleaug
