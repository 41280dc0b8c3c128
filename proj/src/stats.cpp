#include "candleaug/stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "candleaug/error.hpp"

namespace candleaug {

FilterReport filter_sessions(std::span<const SessionRecord> sessions, std::span<const ResponseRecord> responses,
                             double min_seconds, std::size_t questions) {
  std::unordered_map<std::string, std::set<std::size_t>> answered;
  for (const auto& r : responses) answered[r.session_id].insert(r.question_index);

  FilterReport report;
  std::set<std::string> keep;
  for (const auto& s : sessions) {
    const auto it = answered.find(s.session_id);
    const std::size_t n = it == answered.end() ? 0 : it->second.size();
    if (!s.completed || n < questions) {
      ++report.dropped_incomplete;
    } else if (s.total_duration < min_seconds) {
      ++report.dropped_too_fast;
    } else {
      report.kept.push_back(s);
      keep.insert(s.session_id);
    }
  }
  for (const auto& r : responses) {
    if (keep.count(r.session_id) != 0) report.responses.push_back(r);
  }
  return report;
}

RatioReport correct_ratio_per_capita(std::span<const ResponseRecord> responses, const std::string& model) {
  RatioReport report;
  std::unordered_map<std::string, std::size_t> slot;
  std::vector<std::size_t> correct;
  for (const auto& r : responses) {
    if (r.source_model != model) continue;
    auto [it, inserted] = slot.emplace(r.session_id, report.per_session.size());
    if (inserted) {
      report.per_session.push_back({r.session_id, 0.0, 0});
      correct.push_back(0);
    }
    ++report.per_session[it->second].questions;
    correct[it->second] += r.chose_real ? 1 : 0;
    ++report.pooled_total;
    report.pooled_correct += r.chose_real ? 1 : 0;
  }
  for (std::size_t i = 0; i < report.per_session.size(); ++i) {
    report.per_session[i].ratio =
        static_cast<double>(correct[i]) / static_cast<double>(report.per_session[i].questions);
  }
  return report;
}

std::pair<std::vector<double>, std::vector<double>> pair_by_session(std::span<const SessionRatio> xs,
                                                                    std::span<const SessionRatio> ys) {
  std::unordered_map<std::string, double> by_id;
  for (const auto& y : ys) by_id.emplace(y.session_id, y.ratio);
  std::pair<std::vector<double>, std::vector<double>> out;
  for (const auto& x : xs) {
    const auto it = by_id.find(x.session_id);
    if (it == by_id.end()) continue;
    out.first.push_back(x.ratio);
    out.second.push_back(it->second);
  }
  return out;
}

namespace {

// Modified Lentz evaluation of the incomplete beta continued fraction.
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIterations = 10000;
  constexpr double kTolerance = 1e-8;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kTolerance) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw Error(ErrorCode::InvalidConfig, "incomplete beta needs a, b > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw Error(ErrorCode::InvalidConfig, "incomplete beta needs x in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw Error(ErrorCode::InvalidConfig, "degrees of freedom must be > 0");
  if (std::isinf(t)) return 0.0;
  const double p = incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
  return std::clamp(p, 0.0, 1.0);
}

TTestResult paired_t_test(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    throw Error(ErrorCode::UnpairedInput,
                std::to_string(xs.size()) + " vs " + std::to_string(ys.size()) + " observations");
  }
  if (xs.size() < 2) throw Error(ErrorCode::UnpairedInput, "need at least two pairs");
  const std::size_t n = xs.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = xs[i] - ys[i];
  TTestResult r;
  r.n = n;
  r.mean_diff = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : d) ss += (v - r.mean_diff) * (v - r.mean_diff);
  r.std_diff = std::sqrt(ss / static_cast<double>(n - 1));
  if (!(r.std_diff > 0.0)) throw Error(ErrorCode::DegenerateVariance, "paired differences have zero variance");
  r.t_value = r.mean_diff / (r.std_diff / std::sqrt(static_cast<double>(n)));
  r.p_value = student_t_two_sided_p(r.t_value, static_cast<double>(n - 1));
  return r;
}

Histogram score_histogram(std::span<const double> scores, std::size_t bins) {
  if (bins < 1) throw Error(ErrorCode::InvalidConfig, "bins must be >= 1");
  Histogram h;
  h.counts.assign(bins, 0);
  double sum = 0.0;
  for (double s : scores) {
    if (!(s >= 0.0 && s <= 1.0)) throw Error(ErrorCode::ScoreOutOfRange, "score " + std::to_string(s));
    // Right-closed bins; the small slack keeps exact edges like 0.3 * 10 in their own bin.
    const double scaled = std::ceil(s * static_cast<double>(bins) - 1e-9);
    const auto idx = static_cast<std::size_t>(std::clamp(scaled - 1.0, 0.0, static_cast<double>(bins - 1)));
    ++h.counts[idx];
    sum += s;
  }
  if (!scores.empty()) h.mean = sum / static_cast<double>(scores.size());
  return h;
}

ResponseLog read_response_log(std::istream& in) {
  using nlohmann::json;
  std::string line;
  if (!std::getline(in, line) || line != "responselog v1") {
    throw Error(ErrorCode::ParseError, "missing 'responselog v1' header");
  }
  struct Pending {
    std::size_t questions = 0;
    double created_ms = 0.0;
    double last_answer_ms = 0.0;
    std::set<std::size_t> answered;
  };
  std::vector<std::string> order;
  std::unordered_map<std::string, Pending> sessions;
  ResponseLog log;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const std::string event = j.at("event").get<std::string>();
      const std::string id = j.at("session_id").get<std::string>();
      if (event == "session") {
        if (sessions.count(id) != 0) throw Error(ErrorCode::ParseError, "duplicate session " + id);
        Pending p;
        p.questions = j.at("questions").size();
        p.created_ms = j.at("created_ms").get<double>();
        p.last_answer_ms = p.created_ms;
        sessions.emplace(id, std::move(p));
        order.push_back(id);
      } else if (event == "answer") {
        auto it = sessions.find(id);
        if (it == sessions.end()) throw Error(ErrorCode::ParseError, "answer for unknown session " + id);
        const auto q = j.at("question_id").get<std::size_t>();
        if (!it->second.answered.insert(q).second) continue;
        it->second.last_answer_ms = std::max(it->second.last_answer_ms, j.at("at_ms").get<double>());
        log.responses.push_back(
            {id, q, j.at("source_model").get<std::string>(), j.at("chose_real").get<bool>()});
      }
      // "complete" events carry derived values only.
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  for (const auto& id : order) {
    const Pending& p = sessions.at(id);
    log.sessions.push_back({id, (p.last_answer_ms - p.created_ms) / 1000.0,
                            p.questions > 0 && p.answered.size() == p.questions});
  }
  return log;
}

ResponseLog read_response_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  return read_response_log(in);
}

}  // namespace candleaug
