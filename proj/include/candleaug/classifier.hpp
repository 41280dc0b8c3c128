#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "candleaug/gaf.hpp"
#include "candleaug/ohlc.hpp"

namespace candleaug {

/// Maps a GAF tensor to a pattern label. Implementations are deterministic
/// for fixed parameters and safe to call concurrently.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual PatternLabel predict(const GafTensor& t) const = 0;
};

/// Decodes the tensor back to bars and runs the rule engine.
PatternLabel rule_classifier_predict(const GafTensor& t, const RuleParams& params = {});

class RuleClassifier final : public Classifier {
 public:
  explicit RuleClassifier(RuleParams params = {}) : params_(params) {}
  PatternLabel predict(const GafTensor& t) const override { return rule_classifier_predict(t, params_); }
  const RuleParams& params() const noexcept { return params_; }

 private:
  RuleParams params_;
};

inline constexpr std::size_t kConvFilters = 8;
inline constexpr std::size_t kKernelSize = 3;
inline constexpr std::size_t kNumClasses = kNumPatterns;

/// Weights of the one-conv-layer, one-dense-layer network:
/// valid 3x3 conv (8 filters over 4 channels) -> ReLU -> flatten -> dense -> softmax.
struct ClassifierModel {
  std::size_t length = kDefaultWindowLength;  // T
  std::vector<double> conv_kernels;           // [filter][channel][ky][kx]
  std::vector<double> conv_bias;              // [filter]
  std::vector<double> dense_weights;          // [feature][class], feature = filter*S*S + y*S + x
  std::vector<double> dense_bias;             // [class]
  std::uint64_t seed = 0;

  /// Side of each conv feature map, T - 2.
  std::size_t feature_side() const noexcept { return length - (kKernelSize - 1); }
  std::size_t num_features() const noexcept { return kConvFilters * feature_side() * feature_side(); }
  std::size_t num_parameters() const noexcept;

  /// All-zero weights with consistent shapes.
  static ClassifierModel zeros(std::size_t length);
  /// Glorot-uniform weights, zero biases.
  static ClassifierModel initialize(std::size_t length, std::uint64_t seed);

  /// Throws ShapeMismatch.
  void validate() const;

  /// Parameter blocks in a fixed order: conv_kernels, conv_bias, dense_weights, dense_bias.
  std::array<std::span<double>, 4> blocks();
  std::array<std::span<const double>, 4> blocks() const;

  bool operator==(const ClassifierModel&) const = default;
};

struct Prediction {
  std::array<double, kNumClasses> probabilities{};
  PatternLabel label = PatternLabel::None;
};

/// Throws ShapeMismatch.
Prediction forward(const ClassifierModel& m, const GafTensor& t);

/// Cross-entropy of `label` under the model; when `grad` is non-null it is
/// overwritten with the analytic gradient (same shapes as `m`).
double loss_and_gradient(const ClassifierModel& m, const GafTensor& t, PatternLabel label,
                         ClassifierModel* grad = nullptr);

struct LabeledTensor {
  GafTensor tensor;
  PatternLabel label = PatternLabel::None;
};

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  double l2 = 0.0;

  /// Throws InvalidConfig.
  void validate() const;
};

struct TrainResult {
  ClassifierModel model;
  std::vector<double> loss_history;  // mean training loss per epoch
};

/// Mini-batch gradient descent on mean cross-entropy. Deterministic per seed.
/// Throws EmptyDataset, InconsistentShapes, InvalidConfig.
TrainResult train(std::span<const LabeledTensor> data, const TrainConfig& cfg);

/// Fraction of `data` whose predicted label matches.
double accuracy(const ClassifierModel& m, std::span<const LabeledTensor> data);

/// Max relative error between the analytic gradient and central finite
/// differences over every parameter. Throws InvalidConfig for eps <= 0.
double grad_check(const ClassifierModel& m, const LabeledTensor& sample, double eps = 1e-5);

class CnnClassifier final : public Classifier {
 public:
  explicit CnnClassifier(ClassifierModel model);
  PatternLabel predict(const GafTensor& t) const override { return forward(model_, t).label; }
  const ClassifierModel& model() const noexcept { return model_; }

 private:
  ClassifierModel model_;
};

/// Text model format, header `gafcnn-model v1`.
void save_model(const ClassifierModel& m, std::ostream& out);
ClassifierModel load_model(std::istream& in);
void save_model(const ClassifierModel& m, const std::filesystem::path& path);
ClassifierModel load_model(const std::filesystem::path& path);

}  // namespace candleaug
