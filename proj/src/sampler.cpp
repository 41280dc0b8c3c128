#include "candleaug/sampler.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "candleaug/error.hpp"

namespace candleaug {

void SamplerConfig::validate() const {
  if (!(scale_low > 0.0 && scale_low <= 1.0 && scale_high >= 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "need 0 < scale_low <= 1 <= scale_high");
  }
  if (reset_period < 1) throw Error(ErrorCode::InvalidConfig, "reset_period must be >= 1");
}

GafTensor perturb_diagonals(const GafTensor& t, SamplerRng& rng, const SamplerConfig& cfg) {
  std::uniform_real_distribution<double> scale(cfg.scale_low, cfg.scale_high);
  GafTensor out = t;
  for (auto& m : out.channels) {
    const std::size_t n = m.size();
    std::vector<double> diag(n);
    for (std::size_t l = 0; l < n; ++l) diag[l] = std::clamp(scale(rng) * m(l, l), -1.0, 1.0);
    std::vector<double> x(n);
    for (std::size_t l = 0; l < n; ++l) x[l] = std::sqrt((diag[l] + 1.0) / 2.0);
    m = gaf_encode_products(x);
    // Keep the perturbed diagonal itself rather than its recomputed image.
    for (std::size_t l = 0; l < n; ++l) m(l, l) = diag[l];
  }
  return out;
}

namespace {
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (a + 1) + 0xbf58476d1ce4e5b9ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace

AttackSampler::AttackSampler(const CandleWindow& seed_window, const Classifier& clf, const SamplerConfig& cfg,
                             std::size_t source_index)
    : clf_(clf), cfg_(cfg), source_index_(source_index), rng_(cfg.seed) {
  cfg_.validate();
  original_ = encode_window(seed_window);
  label_ = clf_.predict(original_);
  if (label_ == PatternLabel::None) {
    throw Error(ErrorCode::SeedUnlabeled, "seed window " + std::to_string(source_index) + " carries no pattern");
  }
  working_ = original_;
}

std::optional<GeneratedSample> AttackSampler::step() {
  if (counter_ == cfg_.reset_period) {
    working_ = original_;
    counter_ = 0;
  }
  if (observer_) observer_(episode_ + 1, working_);
  working_ = perturb_diagonals(working_, rng_, cfg_);
  ++counter_;
  ++episode_;

  // The recalculated series is what gets emitted; A' is its encoding.
  CandleWindow recalculated = decode_tensor(working_);
  GafTensor reencoded;
  try {
    reencoded = encode_window(recalculated);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConstantSeries) return std::nullopt;
    throw;
  }
  if (clf_.predict(reencoded) != label_) return std::nullopt;
  return GeneratedSample{std::move(recalculated), label_, source_index_, episode_};
}

std::vector<GeneratedSample> run(const CandleWindow& seed_window, const Classifier& clf, const SamplerConfig& cfg,
                                 std::size_t source_index) {
  AttackSampler sampler(seed_window, clf, cfg, source_index);
  std::vector<GeneratedSample> out;
  for (std::size_t e = 0; e < cfg.episodes; ++e) {
    if (auto s = sampler.step()) out.push_back(std::move(*s));
  }
  return out;
}

GenerationResult generate_dataset(std::span<const CandleWindow> seeds, const Classifier& clf,
                                  const SamplerConfig& cfg, const GenerationOptions& opts) {
  cfg.validate();
  if (opts.target < 1) throw Error(ErrorCode::InvalidConfig, "target must be >= 1");
  if (seeds.empty()) throw Error(ErrorCode::EmptyDataset, "no seed windows");
  if (cfg.episodes < 1) throw Error(ErrorCode::InvalidConfig, "episodes per seed must be >= 1");
  const std::size_t budget = opts.episode_budget == 0 ? opts.target * 100 : opts.episode_budget;

  GenerationResult result;
  result.seeds.resize(seeds.size());
  std::vector<std::size_t> usable;
  std::array<std::size_t, kNumClasses> seeds_per_class{};
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    SeedStats& st = result.seeds[i];
    st.source_index = i;
    try {
      st.label = clf.predict(encode_window(seeds[i]));
      if (st.label == PatternLabel::None) {
        st.error = "SeedUnlabeled: classifier assigns no pattern";
        continue;
      }
    } catch (const Error& e) {
      st.error = e.what();
      continue;
    }
    usable.push_back(i);
    ++seeds_per_class[class_index(st.label)];
  }
  if (usable.empty()) {
    result.budget_exhausted = true;
    result.diagnostic = "BudgetExhausted: all " + std::to_string(seeds.size()) + " seeds rejected (SeedUnlabeled)";
    return result;
  }

  const auto classes_present =
      static_cast<std::size_t>(std::count_if(seeds_per_class.begin(), seeds_per_class.end(), [](auto n) { return n > 0; }));
  std::array<std::size_t, kNumClasses> quota{};
  std::size_t remainder = opts.target % classes_present;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    if (seeds_per_class[k] == 0) continue;
    quota[k] = opts.target / classes_present + (remainder > 0 ? 1 : 0);
    if (remainder > 0) --remainder;
  }
  std::array<std::size_t, kNumClasses> filled{};

  std::vector<GeneratedSample> samples;
  for (std::size_t round = 0; samples.size() < opts.target; ++round) {
    bool progressed = false;
    for (std::size_t i : usable) {
      const std::size_t k = class_index(result.seeds[i].label);
      if (filled[k] >= quota[k]) continue;
      if (result.episodes_used + cfg.episodes > budget) break;
      SamplerConfig seed_cfg = cfg;
      seed_cfg.seed = mix_seed(cfg.seed, i, round);
      auto out = run(seeds[i], clf, seed_cfg, i);
      result.episodes_used += cfg.episodes;
      result.seeds[i].episodes += cfg.episodes;
      result.seeds[i].accepted += out.size();
      progressed = true;
      for (auto& s : out) {
        if (filled[k] >= quota[k]) break;
        ++filled[k];
        samples.push_back(std::move(s));
      }
      if (samples.size() >= opts.target) break;
    }
    if (!progressed) break;
  }

  result.samples = std::move(samples);
  if (result.samples.size() < opts.target) {
    result.budget_exhausted = true;
    result.diagnostic = "BudgetExhausted: collected " + std::to_string(result.samples.size()) + " of " +
                        std::to_string(opts.target) + " samples in " + std::to_string(result.episodes_used) +
                        " episodes";
  }
  return result;
}

}  // namespace candleaug
