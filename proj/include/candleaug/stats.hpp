#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace candleaug {

inline constexpr std::size_t kQuestionsPerSession = 20;
inline constexpr double kMinSessionSeconds = 5.0;

/// One answered question.
struct ResponseRecord {
  std::string session_id;
  std::size_t question_index = 0;
  std::string source_model;  // generator behind the fake ("cvae", "adversarial", ...)
  bool chose_real = false;
};

struct SessionRecord {
  std::string session_id;
  double total_duration = 0.0;  // seconds
  bool completed = false;
};

struct FilterReport {
  std::vector<SessionRecord> kept;
  std::vector<ResponseRecord> responses;  // responses of kept sessions only
  std::size_t dropped_incomplete = 0;
  std::size_t dropped_too_fast = 0;
};

/// Keeps completed sessions lasting at least `min_seconds`. A session counts
/// as completed only if it is flagged so and has every question answered.
FilterReport filter_sessions(std::span<const SessionRecord> sessions, std::span<const ResponseRecord> responses,
                             double min_seconds = kMinSessionSeconds,
                             std::size_t questions = kQuestionsPerSession);

struct SessionRatio {
  std::string session_id;
  double ratio = 0.0;
  std::size_t questions = 0;  // questions backed by the model in this session
};

struct RatioReport {
  std::vector<SessionRatio> per_session;  // sessions with at least one question from the model
  std::size_t pooled_total = 0;
  std::size_t pooled_correct = 0;

  double pooled_ratio() const noexcept {
    return pooled_total == 0 ? 0.0 : static_cast<double>(pooled_correct) / static_cast<double>(pooled_total);
  }
};

RatioReport correct_ratio_per_capita(std::span<const ResponseRecord> responses, const std::string& model);

struct TTestResult {
  std::size_t n = 0;
  double mean_diff = 0.0;
  double std_diff = 0.0;  // sample std, n - 1 denominator
  double t_value = 0.0;
  double p_value = 1.0;  // two-sided
  std::size_t df() const noexcept { return n - 1; }
};

/// Dependent paired t-test on d = x - y. Throws UnpairedInput, DegenerateVariance.
TTestResult paired_t_test(std::span<const double> xs, std::span<const double> ys);

/// Joins two per-session ratio lists on session id (sessions present in both).
std::pair<std::vector<double>, std::vector<double>> pair_by_session(std::span<const SessionRatio> xs,
                                                                    std::span<const SessionRatio> ys);

/// Regularized incomplete beta I_x(a, b) by continued fraction.
double incomplete_beta(double a, double b, double x);
/// P(|T| >= |t|) for Student's t with `df` degrees of freedom.
double student_t_two_sided_p(double t, double df);

struct Histogram {
  std::vector<std::size_t> counts;
  std::optional<double> mean;  // empty input leaves this unset
};

/// Equal-width bins over [0, 1]; bins are right-closed (lo, hi] and the first
/// bin also takes 0. Throws ScoreOutOfRange, InvalidConfig (bins == 0).
Histogram score_histogram(std::span<const double> scores, std::size_t bins);

/// Contents of a service response log.
struct ResponseLog {
  std::vector<SessionRecord> sessions;
  std::vector<ResponseRecord> responses;
};

/// Throws ParseError, IoError.
ResponseLog read_response_log(std::istream& in);
ResponseLog read_response_log(const std::filesystem::path& path);

}  // namespace candleaug
