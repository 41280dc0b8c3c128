#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "candleaug/error.hpp"
#include "candleaug/stats.hpp"
#include "oracles.hpp"

using namespace candleaug;

namespace {

std::vector<ResponseRecord> answers(const std::string& id, std::size_t n, const std::string& model, std::size_t correct) {
  std::vector<ResponseRecord> out;
  for (std::size_t q = 0; q < n; ++q) out.push_back({id, q, model, q < correct});
  return out;
}

// Exactly-shaped differences: mean `mean`, sample std `sd`, n values.
std::vector<double> shaped(std::size_t n, double mean, double sd) {
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = std::sin(1.0 + 2.3 * static_cast<double>(i));
  const double m = std::accumulate(z.begin(), z.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : z) ss += (v - m) * (v - m);
  const double s = std::sqrt(ss / static_cast<double>(n - 1));
  for (double& v : z) v = mean + sd * (v - m) / s;
  return z;
}

}  // namespace

TEST_CASE("filter_sessions") {
  std::vector<SessionRecord> sessions{{"fast", 4.2, true}, {"partial", 80.0, true}, {"ok", 60.0, true},
                                      {"abandoned", 30.0, false}};
  std::vector<ResponseRecord> responses;
  for (const auto& id : {"fast", "ok"}) {
    const auto a = answers(id, 20, "cvae", 10);
    responses.insert(responses.end(), a.begin(), a.end());
  }
  const auto partial = answers("partial", 19, "cvae", 10);
  responses.insert(responses.end(), partial.begin(), partial.end());
  const auto abandoned = answers("abandoned", 5, "cvae", 1);
  responses.insert(responses.end(), abandoned.begin(), abandoned.end());

  const FilterReport r = filter_sessions(sessions, responses);
  REQUIRE(r.kept.size() == 1);
  CHECK(r.kept[0].session_id == "ok");
  CHECK(r.dropped_too_fast == 1);
  CHECK(r.dropped_incomplete == 2);
  CHECK(r.responses.size() == 20);
  for (const auto& x : r.responses) CHECK(x.session_id == "ok");

  // The boundary itself is kept.
  const std::vector<SessionRecord> edge{{"ok", 5.0, true}};
  CHECK(filter_sessions(edge, responses).kept.size() == 1);
}

TEST_CASE("correct_ratio_per_capita") {
  SUBCASE("pooled ratios from back-derived counts") {
    const auto cvae = answers("s", 2419, "cvae", 1370);
    const auto r1 = correct_ratio_per_capita(cvae, "cvae");
    CHECK(r1.pooled_total == 2419);
    CHECK(r1.pooled_correct == 1370);
    CHECK(std::abs(100.0 * r1.pooled_ratio() - 56.63) < 0.01);
    const auto adv = answers("s", 2364, "adversarial", 1229);
    CHECK(std::abs(100.0 * correct_ratio_per_capita(adv, "adversarial").pooled_ratio() - 51.99) < 0.01);
  }
  SUBCASE("per session") {
    std::vector<ResponseRecord> rs;
    for (std::size_t q = 0; q < 20; ++q) rs.push_back({"a", q, q % 2 == 0 ? "cvae" : "adversarial", q % 2 == 0 || q == 1});
    for (std::size_t q = 0; q < 20; ++q) rs.push_back({"b", q, q < 5 ? "cvae" : "adversarial", q == 0});
    const auto c = correct_ratio_per_capita(rs, "cvae");
    REQUIRE(c.per_session.size() == 2);
    CHECK(c.per_session[0].session_id == "a");
    CHECK(c.per_session[0].ratio == 1.0);
    CHECK(c.per_session[0].questions == 10);
    CHECK(c.per_session[1].ratio == 0.2);
    CHECK(c.pooled_total == 15);
    CHECK(c.pooled_correct == 11);
    const auto a = correct_ratio_per_capita(rs, "adversarial");
    CHECK(a.per_session[0].ratio == 0.1);
    CHECK(a.per_session[1].ratio == 0.0);
    CHECK(correct_ratio_per_capita(rs, "other").per_session.empty());

    const auto [xs, ys] = pair_by_session(c.per_session, a.per_session);
    CHECK(xs == std::vector<double>{1.0, 0.2});
    CHECK(ys == std::vector<double>{0.1, 0.0});
  }
}

TEST_CASE("incomplete beta and Student-t tail") {
  // Values frozen from an arbitrary-precision evaluation.
  CHECK(std::abs(incomplete_beta(2, 3, 0.4) - 0.5248) < 1e-12);
  CHECK(std::abs(incomplete_beta(0.5, 0.5, 0.3) - 0.36901011956554537) < 1e-10);
  CHECK(std::abs(incomplete_beta(122, 0.5, 0.9) - 4.0806671324488778e-7) < 1e-14);
  CHECK(incomplete_beta(3, 4, 0.0) == 0.0);
  CHECK(incomplete_beta(3, 4, 1.0) == 1.0);

  CHECK(std::abs(student_t_two_sided_p(1.97, 244) - 0.04996931118202254) < 1e-9);
  CHECK(std::abs(student_t_two_sided_p(-3.7722, 244) - 0.0002031352717169523) < 1e-10);
  CHECK(std::abs(student_t_two_sided_p(2.0, 10) - 0.073388034770740366) < 1e-10);
  CHECK(std::abs(student_t_two_sided_p(0.5, 3) - 0.65144796484815099) < 1e-10);
  CHECK(std::abs(student_t_two_sided_p(1.0, 1) - 0.5) < 1e-8);
  CHECK(std::abs(student_t_two_sided_p(10.0, 244) / 5.9333723129355163e-20 - 1.0) < 1e-6);
  CHECK(student_t_two_sided_p(0.0, 50) == 1.0);

  for (double df : {1.0, 4.0, 30.0, 244.0}) {
    double prev = 1.0 + 1e-15;
    for (double t = 0.0; t < 8.0; t += 0.25) {
      const double p = student_t_two_sided_p(t, df);
      CHECK(std::abs(p - oracle::t_two_sided_quadrature(t, df)) < 1e-6);
      CHECK(p > 0.0);
      CHECK(p <= 1.0);
      CHECK(p < prev);
      prev = p;
    }
  }
}

TEST_CASE("paired_t_test") {
  SUBCASE("summary moments") {
    const auto d = shaped(245, -0.0575, 0.2386);
    const std::vector<double> ys(245, 0.5);
    std::vector<double> xs(245);
    for (std::size_t i = 0; i < 245; ++i) xs[i] = ys[i] + d[i];
    const TTestResult r = paired_t_test(xs, ys);
    CHECK(r.n == 245);
    CHECK(r.df() == 244);
    CHECK(r.mean_diff == doctest::Approx(-0.0575).epsilon(1e-12));
    CHECK(r.std_diff == doctest::Approx(0.2386).epsilon(1e-12));
    CHECK(std::abs(r.t_value - -3.772076114600442) < 1e-9);
    CHECK(std::abs(r.p_value - 0.000203230584146848) < 1e-9);
    CHECK(std::abs(r.t_value - -3.77) <= 0.01);
    CHECK(std::abs(r.p_value - 0.0002) <= 0.0001);
  }
  SUBCASE("antisymmetry and shift invariance") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> xs(30), ys(30);
      for (std::size_t i = 0; i < 30; ++i) {
        xs[i] = u(rng);
        ys[i] = u(rng);
      }
      const auto a = paired_t_test(xs, ys);
      const auto b = paired_t_test(ys, xs);
      CHECK(b.t_value == -a.t_value);
      CHECK(b.p_value == a.p_value);
      const double c = 0.5 * u(rng) - 0.25;
      for (std::size_t i = 0; i < 30; ++i) {
        xs[i] += c;
        ys[i] += c;
      }
      const auto s = paired_t_test(xs, ys);
      CHECK(std::abs(s.t_value - a.t_value) < 1e-12 * std::max(1.0, std::abs(a.t_value)));
      CHECK(std::abs(s.p_value - a.p_value) < 1e-12);
    }
  }
  SUBCASE("errors") {
    const std::vector<double> xs{0.1, 0.2, 0.3};
    try {
      paired_t_test(xs, xs);
      FAIL("expected DegenerateVariance");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DegenerateVariance);
    }
    const std::vector<double> shorter{0.1, 0.2};
    CHECK_THROWS_AS(paired_t_test(xs, shorter), Error);
    const std::vector<double> one{0.1};
    CHECK_THROWS_AS(paired_t_test(one, one), Error);
  }
  SUBCASE("equal means give p = 1") {
    const std::vector<double> xs{0.5, 0.6, 0.4};
    const std::vector<double> ys{0.5, 0.5, 0.5};
    const auto r = paired_t_test(xs, ys);
    CHECK(std::abs(r.t_value) < 1e-15);
    CHECK(r.p_value == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("score_histogram") {
  const std::vector<double> s{0.5, 0.5, 1.0};
  const Histogram h = score_histogram(s, 2);
  CHECK(h.counts == std::vector<std::size_t>{2, 1});
  REQUIRE(h.mean);
  CHECK(*h.mean == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

  const Histogram e = score_histogram({}, 4);
  CHECK(e.counts == std::vector<std::size_t>{0, 0, 0, 0});
  CHECK_FALSE(e.mean);

  const std::vector<double> edges{0.0, 0.05, 0.1, 0.15, 1.0};
  CHECK(score_histogram(edges, 10).counts == std::vector<std::size_t>{3, 1, 0, 0, 0, 0, 0, 0, 0, 1});

  std::mt19937_64 rng(9);
  std::vector<double> many(1000);
  for (auto& v : many) v = static_cast<double>(rng() % 21) / 20.0;
  const Histogram m = score_histogram(many, 10);
  CHECK(std::accumulate(m.counts.begin(), m.counts.end(), std::size_t{0}) == 1000);
  CHECK(std::abs(*m.mean - std::accumulate(many.begin(), many.end(), 0.0) / 1000.0) < 1e-12);

  const std::vector<double> bad{0.5, 1.2};
  try {
    score_histogram(bad, 2);
    FAIL("expected ScoreOutOfRange");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::ScoreOutOfRange);
  }
  CHECK_THROWS_AS(score_histogram(s, 0), Error);
}

TEST_CASE("read_response_log") {
  std::istringstream in(
      "responselog v1\n"
      R"({"event":"session","session_id":"a","created_ms":1000,"questions":[{},{}]})" "\n"
      R"({"event":"session","session_id":"b","created_ms":2000,"questions":[{},{}]})" "\n"
      R"({"event":"answer","session_id":"a","question_id":0,"source_model":"cvae","chose_real":true,"at_ms":3000})" "\n"
      R"({"event":"answer","session_id":"b","question_id":1,"source_model":"adversarial","chose_real":false,"at_ms":2500})" "\n"
      R"({"event":"answer","session_id":"a","question_id":1,"source_model":"adversarial","chose_real":false,"at_ms":9500})" "\n"
      R"({"event":"complete","session_id":"a","score":0.5,"duration_s":8.5})" "\n");
  const ResponseLog log = read_response_log(in);
  REQUIRE(log.sessions.size() == 2);
  CHECK(log.sessions[0].session_id == "a");
  CHECK(log.sessions[0].completed);
  CHECK(log.sessions[0].total_duration == 8.5);
  CHECK_FALSE(log.sessions[1].completed);
  CHECK(log.sessions[1].total_duration == 0.5);
  REQUIRE(log.responses.size() == 3);
  CHECK(log.responses[2].source_model == "adversarial");

  const auto kept = filter_sessions(log.sessions, log.responses, 5.0, 2);
  REQUIRE(kept.kept.size() == 1);
  CHECK(kept.responses.size() == 2);

  std::istringstream no_header(R"({"event":"session"})" "\n");
  CHECK_THROWS_AS(read_response_log(no_header), Error);
  std::istringstream orphan("responselog v1\n" R"({"event":"answer","session_id":"x","question_id":0,"source_model":"cvae","chose_real":true,"at_ms":1})" "\n");
  CHECK_THROWS_AS(read_response_log(orphan), Error);
}
