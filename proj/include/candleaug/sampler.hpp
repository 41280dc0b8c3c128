#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "candleaug/classifier.hpp"
#include "candleaug/gaf.hpp"
#include "candleaug/ohlc.hpp"

namespace candleaug {

struct SamplerConfig {
  double scale_low = 0.99;
  double scale_high = 1.01;
  std::size_t reset_period = 3;
  std::size_t episodes = 30;  // R, per seed window
  std::uint64_t seed = 0;

  /// Throws InvalidConfig.
  void validate() const;
};

struct GeneratedSample {
  CandleWindow window;
  PatternLabel label = PatternLabel::None;
  std::size_t source_index = 0;
  std::size_t episode = 0;  // 1-based episode that produced it
};

using SamplerRng = std::mt19937_64;

/// Multiplies every diagonal entry of every channel by an independent draw
/// from U[scale_low, scale_high], clamps to [-1, 1], then rebuilds the
/// off-diagonals so each channel is again a consistent GAF.
GafTensor perturb_diagonals(const GafTensor& t, SamplerRng& rng, const SamplerConfig& cfg);

/// Local-search attack sampling on a single seed window, one episode at a time.
class AttackSampler {
 public:
  /// Throws SeedUnlabeled when the classifier assigns no pattern to the seed.
  AttackSampler(const CandleWindow& seed_window, const Classifier& clf, const SamplerConfig& cfg,
                std::size_t source_index = 0);

  /// Runs one episode; returns the sample if the classifier keeps the seed label.
  std::optional<GeneratedSample> step();

  /// Called at the start of every episode (after any reset, before perturbing)
  /// with the 1-based episode number and the working tensor.
  using EpisodeObserver = std::function<void(std::size_t, const GafTensor&)>;
  void set_observer(EpisodeObserver observer) { observer_ = std::move(observer); }

  PatternLabel seed_label() const noexcept { return label_; }
  const GafTensor& original() const noexcept { return original_; }
  const GafTensor& working() const noexcept { return working_; }
  std::size_t episodes_run() const noexcept { return episode_; }
  std::size_t counter() const noexcept { return counter_; }

 private:
  const Classifier& clf_;
  SamplerConfig cfg_;
  std::size_t source_index_;
  SamplerRng rng_;
  GafTensor original_;
  GafTensor working_;
  PatternLabel label_ = PatternLabel::None;
  std::size_t counter_ = 0;
  std::size_t episode_ = 0;
  EpisodeObserver observer_;
};

/// Runs `cfg.episodes` episodes on one seed. Throws SeedUnlabeled.
std::vector<GeneratedSample> run(const CandleWindow& seed_window, const Classifier& clf, const SamplerConfig& cfg,
                                 std::size_t source_index = 0);

struct SeedStats {
  std::size_t source_index = 0;
  PatternLabel label = PatternLabel::None;
  std::size_t episodes = 0;
  std::size_t accepted = 0;
  std::string error;  // set when the seed was rejected (e.g. SeedUnlabeled)

  double acceptance_rate() const noexcept {
    return episodes == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(episodes);
  }
};

struct GenerationResult {
  std::vector<GeneratedSample> samples;
  std::vector<SeedStats> seeds;
  std::size_t episodes_used = 0;
  bool budget_exhausted = false;
  std::string diagnostic;
};

struct GenerationOptions {
  std::size_t target = 4000;
  /// Total episodes across all seeds; 0 means target * 100.
  std::size_t episode_budget = 0;
};

/// Round-robins `run` over the seeds until every label's quota is filled.
/// The target is split evenly across the labels carried by the seeds, with
/// the remainder going to the lowest label codes. On budget exhaustion the
/// partial set is returned with `budget_exhausted` set.
GenerationResult generate_dataset(std::span<const CandleWindow> seeds, const Classifier& clf,
                                  const SamplerConfig& cfg, const GenerationOptions& opts);

}  // namespace candleaug
