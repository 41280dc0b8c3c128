#include "candleaug/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "candleaug/error.hpp"

namespace candleaug {

PatternLabel rule_classifier_predict(const GafTensor& t, const RuleParams& params) {
  return match_pattern(decode_tensor(t), params);
}

namespace {

constexpr std::size_t kKernelVolume = kNumChannels * kKernelSize * kKernelSize;

std::size_t kernel_index(std::size_t f, std::size_t c, std::size_t ky, std::size_t kx) {
  return ((f * kNumChannels + c) * kKernelSize + ky) * kKernelSize + kx;
}

// Activations of one forward pass, kept for backprop.
struct Activations {
  std::vector<double> hidden;  // post-ReLU conv output, flattened
  std::array<double, kNumClasses> logits{};
  std::array<double, kNumClasses> probs{};
};

void check_shapes(const ClassifierModel& m, const GafTensor& t) {
  if (t.length() != m.length) {
    throw Error(ErrorCode::ShapeMismatch,
                "tensor length " + std::to_string(t.length()) + " vs model length " + std::to_string(m.length));
  }
  for (const auto& ch : t.channels) {
    if (ch.size() != m.length) throw Error(ErrorCode::ShapeMismatch, "channel length differs from model length");
  }
}

Activations run_forward(const ClassifierModel& m, const GafTensor& t) {
  check_shapes(m, t);
  const std::size_t s = m.feature_side();
  Activations a;
  a.hidden.assign(m.num_features(), 0.0);
  for (std::size_t f = 0; f < kConvFilters; ++f) {
    for (std::size_t y = 0; y < s; ++y) {
      for (std::size_t x = 0; x < s; ++x) {
        double acc = m.conv_bias[f];
        for (std::size_t c = 0; c < kNumChannels; ++c) {
          const GafMatrix& in = t.channels[c];
          for (std::size_t ky = 0; ky < kKernelSize; ++ky) {
            for (std::size_t kx = 0; kx < kKernelSize; ++kx) {
              acc += m.conv_kernels[kernel_index(f, c, ky, kx)] * in(y + ky, x + kx);
            }
          }
        }
        a.hidden[(f * s + y) * s + x] = acc > 0.0 ? acc : 0.0;
      }
    }
  }
  for (std::size_t k = 0; k < kNumClasses; ++k) a.logits[k] = m.dense_bias[k];
  for (std::size_t i = 0; i < a.hidden.size(); ++i) {
    const double h = a.hidden[i];
    if (h == 0.0) continue;
    const double* row = &m.dense_weights[i * kNumClasses];
    for (std::size_t k = 0; k < kNumClasses; ++k) a.logits[k] += row[k] * h;
  }
  const double top = *std::max_element(a.logits.begin(), a.logits.end());
  double z = 0.0;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    a.probs[k] = std::exp(a.logits[k] - top);
    z += a.probs[k];
  }
  for (auto& p : a.probs) p /= z;
  return a;
}

double cross_entropy(const Activations& a, std::size_t target) {
  const double top = *std::max_element(a.logits.begin(), a.logits.end());
  double z = 0.0;
  for (double l : a.logits) z += std::exp(l - top);
  return std::log(z) + top - a.logits[target];
}

void fill_uniform(std::vector<double>& v, double limit, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& x : v) x = dist(rng);
}

}  // namespace

std::size_t ClassifierModel::num_parameters() const noexcept {
  return conv_kernels.size() + conv_bias.size() + dense_weights.size() + dense_bias.size();
}

ClassifierModel ClassifierModel::zeros(std::size_t length) {
  if (length < kKernelSize) throw Error(ErrorCode::ShapeMismatch, "length must be >= kernel size");
  ClassifierModel m;
  m.length = length;
  m.conv_kernels.assign(kConvFilters * kKernelVolume, 0.0);
  m.conv_bias.assign(kConvFilters, 0.0);
  m.dense_weights.assign(m.num_features() * kNumClasses, 0.0);
  m.dense_bias.assign(kNumClasses, 0.0);
  return m;
}

ClassifierModel ClassifierModel::initialize(std::size_t length, std::uint64_t seed) {
  ClassifierModel m = zeros(length);
  m.seed = seed;
  std::mt19937_64 rng(seed);
  const double conv_fan_in = static_cast<double>(kKernelVolume);
  const double conv_fan_out = static_cast<double>(kConvFilters * kKernelSize * kKernelSize);
  fill_uniform(m.conv_kernels, std::sqrt(6.0 / (conv_fan_in + conv_fan_out)), rng);
  fill_uniform(m.dense_weights, std::sqrt(6.0 / static_cast<double>(m.num_features() + kNumClasses)), rng);
  return m;
}

void ClassifierModel::validate() const {
  if (length < kKernelSize || conv_kernels.size() != kConvFilters * kKernelVolume ||
      conv_bias.size() != kConvFilters || dense_weights.size() != num_features() * kNumClasses ||
      dense_bias.size() != kNumClasses) {
    throw Error(ErrorCode::ShapeMismatch, "model tensors inconsistent with T = " + std::to_string(length));
  }
  for (auto block : blocks()) {
    for (double v : block) {
      if (!std::isfinite(v)) throw Error(ErrorCode::ShapeMismatch, "model contains non-finite weights");
    }
  }
}

std::array<std::span<double>, 4> ClassifierModel::blocks() {
  return {std::span<double>(conv_kernels), std::span<double>(conv_bias), std::span<double>(dense_weights),
          std::span<double>(dense_bias)};
}

std::array<std::span<const double>, 4> ClassifierModel::blocks() const {
  return {std::span<const double>(conv_kernels), std::span<const double>(conv_bias),
          std::span<const double>(dense_weights), std::span<const double>(dense_bias)};
}

Prediction forward(const ClassifierModel& m, const GafTensor& t) {
  const Activations a = run_forward(m, t);
  Prediction p;
  p.probabilities = a.probs;
  // max_element returns the first maximum, so ties go to the lowest class.
  const auto best = std::max_element(a.probs.begin(), a.probs.end());
  p.label = label_from_class(static_cast<std::size_t>(best - a.probs.begin()));
  return p;
}

double loss_and_gradient(const ClassifierModel& m, const GafTensor& t, PatternLabel label, ClassifierModel* grad) {
  if (label == PatternLabel::None) throw Error(ErrorCode::InvalidConfig, "cannot score the None label");
  const std::size_t target = class_index(label);
  const Activations a = run_forward(m, t);
  const double loss = cross_entropy(a, target);
  if (grad == nullptr) return loss;

  *grad = ClassifierModel::zeros(m.length);
  grad->seed = m.seed;
  std::array<double, kNumClasses> dlogits{};
  for (std::size_t k = 0; k < kNumClasses; ++k) dlogits[k] = a.probs[k] - (k == target ? 1.0 : 0.0);
  for (std::size_t k = 0; k < kNumClasses; ++k) grad->dense_bias[k] = dlogits[k];

  const std::size_t s = m.feature_side();
  for (std::size_t i = 0; i < a.hidden.size(); ++i) {
    const double h = a.hidden[i];
    const double* row = &m.dense_weights[i * kNumClasses];
    double* grow = &grad->dense_weights[i * kNumClasses];
    double dh = 0.0;
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      grow[k] = dlogits[k] * h;
      dh += row[k] * dlogits[k];
    }
    // ReLU passes gradient only where the unit was active.
    if (h <= 0.0) continue;
    const std::size_t f = i / (s * s);
    const std::size_t y = (i / s) % s;
    const std::size_t x = i % s;
    grad->conv_bias[f] += dh;
    for (std::size_t c = 0; c < kNumChannels; ++c) {
      const GafMatrix& in = t.channels[c];
      for (std::size_t ky = 0; ky < kKernelSize; ++ky) {
        for (std::size_t kx = 0; kx < kKernelSize; ++kx) {
          grad->conv_kernels[kernel_index(f, c, ky, kx)] += dh * in(y + ky, x + kx);
        }
      }
    }
  }
  return loss;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidConfig, "learning_rate must be > 0");
  if (epochs < 1) throw Error(ErrorCode::InvalidConfig, "epochs must be >= 1");
  if (batch_size < 1) throw Error(ErrorCode::InvalidConfig, "batch_size must be >= 1");
  if (!(l2 >= 0.0)) throw Error(ErrorCode::InvalidConfig, "l2 must be >= 0");
}

TrainResult train(std::span<const LabeledTensor> data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw Error(ErrorCode::EmptyDataset, "no training samples");
  const std::size_t length = data.front().tensor.length();
  std::array<bool, kNumClasses> seen{};
  for (const auto& d : data) {
    if (d.tensor.length() != length) throw Error(ErrorCode::InconsistentShapes, "training tensors differ in T");
    if (d.label == PatternLabel::None) throw Error(ErrorCode::InvalidConfig, "None-labeled sample in training set");
    seen[class_index(d.label)] = true;
  }
  if (std::count(seen.begin(), seen.end(), true) < 2) {
    throw Error(ErrorCode::InvalidConfig, "training needs at least two classes");
  }

  TrainResult result{ClassifierModel::initialize(length, cfg.seed), {}};
  ClassifierModel& model = result.model;
  ClassifierModel sample_grad;
  ClassifierModel batch_grad = ClassifierModel::zeros(length);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      for (auto block : batch_grad.blocks()) std::fill(block.begin(), block.end(), 0.0);
      for (std::size_t i = start; i < stop; ++i) {
        const LabeledTensor& d = data[order[i]];
        epoch_loss += loss_and_gradient(model, d.tensor, d.label, &sample_grad);
        auto dst = batch_grad.blocks();
        auto src = sample_grad.blocks();
        for (std::size_t b = 0; b < dst.size(); ++b) {
          for (std::size_t j = 0; j < dst[b].size(); ++j) dst[b][j] += src[b][j];
        }
      }
      const double scale = cfg.learning_rate / static_cast<double>(stop - start);
      auto params = model.blocks();
      auto grads = batch_grad.blocks();
      for (std::size_t b = 0; b < params.size(); ++b) {
        for (std::size_t j = 0; j < params[b].size(); ++j) {
          params[b][j] -= scale * grads[b][j] + cfg.learning_rate * cfg.l2 * params[b][j];
        }
      }
    }
    result.loss_history.push_back(epoch_loss / static_cast<double>(data.size()));
  }
  return result;
}

double accuracy(const ClassifierModel& m, std::span<const LabeledTensor> data) {
  if (data.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& d : data) hits += forward(m, d.tensor).label == d.label ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

double grad_check(const ClassifierModel& m, const LabeledTensor& sample, double eps) {
  if (!(eps > 0.0)) throw Error(ErrorCode::InvalidConfig, "eps must be > 0");
  ClassifierModel analytic;
  loss_and_gradient(m, sample.tensor, sample.label, &analytic);
  ClassifierModel probe = m;
  double worst = 0.0;
  auto probe_blocks = probe.blocks();
  const auto grad_blocks = std::as_const(analytic).blocks();
  for (std::size_t b = 0; b < probe_blocks.size(); ++b) {
    for (std::size_t j = 0; j < probe_blocks[b].size(); ++j) {
      const double saved = probe_blocks[b][j];
      probe_blocks[b][j] = saved + eps;
      const double up = loss_and_gradient(probe, sample.tensor, sample.label);
      probe_blocks[b][j] = saved - eps;
      const double down = loss_and_gradient(probe, sample.tensor, sample.label);
      probe_blocks[b][j] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double exact = grad_blocks[b][j];
      const double denom = std::max({std::abs(exact), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(exact - numeric) / denom);
    }
  }
  return worst;
}

CnnClassifier::CnnClassifier(ClassifierModel model) : model_(std::move(model)) { model_.validate(); }

namespace {
constexpr const char* kModelHeader = "gafcnn-model v1";

void write_block(std::ostream& out, const char* name, std::initializer_list<std::size_t> shape,
                 std::span<const double> values) {
  out << name << ' ' << shape.size();
  for (auto d : shape) out << ' ' << d;
  for (double v : values) out << ' ' << v;
  out << '\n';
}

std::vector<double> read_block(std::istream& in, const std::string& expected) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "missing tensor " + expected);
  std::istringstream ss(line);
  std::string name;
  std::size_t rank = 0;
  if (!(ss >> name >> rank) || name != expected) {
    throw Error(ErrorCode::ParseError, "expected tensor " + expected + ", got '" + name + "'");
  }
  std::size_t count = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    std::size_t d = 0;
    if (!(ss >> d)) throw Error(ErrorCode::ParseError, "bad shape for " + expected);
    count *= d;
  }
  std::vector<double> values(count);
  for (auto& v : values) {
    std::string tok;
    if (!(ss >> tok)) throw Error(ErrorCode::ParseError, "truncated values for " + expected);
    try {
      v = std::stod(tok);
    } catch (const std::exception&) {
      throw Error(ErrorCode::ParseError, "bad value '" + tok + "' in " + expected);
    }
  }
  std::string extra;
  if (ss >> extra) throw Error(ErrorCode::ParseError, "trailing values in " + expected);
  return values;
}
}  // namespace

void save_model(const ClassifierModel& m, std::ostream& out) {
  m.validate();
  const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
  out << kModelHeader << '\n' << m.length << '\n';
  write_block(out, "conv_kernels", {kConvFilters, kNumChannels, kKernelSize, kKernelSize}, m.conv_kernels);
  write_block(out, "conv_bias", {kConvFilters}, m.conv_bias);
  write_block(out, "dense_weights", {m.num_features(), kNumClasses}, m.dense_weights);
  write_block(out, "dense_bias", {kNumClasses}, m.dense_bias);
  out << "seed " << m.seed << '\n';
  out.precision(old_precision);
}

ClassifierModel load_model(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kModelHeader) {
    throw Error(ErrorCode::ParseError, "missing '" + std::string(kModelHeader) + "' header");
  }
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "missing T");
  ClassifierModel m;
  try {
    m.length = std::stoul(line);
  } catch (const std::exception&) {
    throw Error(ErrorCode::ParseError, "bad T '" + line + "'");
  }
  m.conv_kernels = read_block(in, "conv_kernels");
  m.conv_bias = read_block(in, "conv_bias");
  m.dense_weights = read_block(in, "dense_weights");
  m.dense_bias = read_block(in, "dense_bias");
  if (std::getline(in, line) && line.rfind("seed ", 0) == 0) m.seed = std::stoull(line.substr(5));
  m.validate();
  return m;
}

void save_model(const ClassifierModel& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  save_model(m, out);
}

ClassifierModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  return load_model(in);
}

}  // namespace candleaug
