#include <doctest.h>

#include <httplib.h>

#include <set>
#include <sstream>
#include <thread>

#include "candleaug/error.hpp"
#include "candleaug/service.hpp"
#include "candleaug/stats.hpp"

using namespace candleaug;
using nlohmann::json;

namespace {

// Windows are tagged by their first open so tests can tell real from fake.
CandleWindow tagged(double tag) {
  std::vector<Candle> bars;
  for (int i = 0; i < 10; ++i) bars.push_back({tag + i, tag + i + 1.5, tag + i - 0.5, tag + i + 1.0});
  return CandleWindow(bars);
}

std::vector<CandleWindow> corpus(double base, std::size_t n) {
  std::vector<CandleWindow> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(tagged(base + static_cast<double>(i)));
  return out;
}

bool is_real(const CandleWindow& w) { return w[0].open < 1000.0; }

Side real_side_of(const Question& q) { return is_real(q.left) ? Side::Left : Side::Right; }
Side fake_side_of(const Question& q) { return is_real(q.left) ? Side::Right : Side::Left; }

struct FakeClock {
  double ms = 0.0;
  std::function<double()> fn() {
    return [this] { return ms; };
  }
};

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::IoError;
}

}  // namespace

TEST_CASE("corpus requirements") {
  CHECK(code_of([] { Questionnaire({}, {{"cvae", corpus(1000, 30)}}, {}); }) == ErrorCode::CorpusTooSmall);
  CHECK(code_of([] { Questionnaire(corpus(1, 30), {}, {}); }) == ErrorCode::CorpusTooSmall);
  CHECK(code_of([] { Questionnaire(corpus(1, 30), {{"cvae", corpus(1000, 19)}}, {}); }) == ErrorCode::CorpusTooSmall);
  CHECK(code_of([] { Questionnaire(corpus(1, 19), {{"cvae", corpus(1000, 30)}}, {}); }) == ErrorCode::CorpusTooSmall);
}

TEST_CASE("session construction") {
  Questionnaire q(corpus(1, 25), {{"cvae", corpus(1000, 25)}, {"adversarial", corpus(5000, 25)}}, {20, 3});
  std::size_t left_real = 0;
  std::map<std::string, std::size_t> models;
  for (int s = 0; s < 20; ++s) {
    const auto [id, questions] = q.create_session();
    CHECK(id.size() == 32);
    CHECK(id.find_first_not_of("0123456789abcdef") == std::string::npos);
    REQUIRE(questions.size() == 20);
    std::set<double> reals, fakes;
    for (const auto& x : questions) {
      CHECK(x.real_side == real_side_of(x));
      const CandleWindow& fake = x.real_side == Side::Left ? x.right : x.left;
      const CandleWindow& real = x.real_side == Side::Left ? x.left : x.right;
      reals.insert(real[0].open);
      fakes.insert(fake[0].open);
      CHECK((x.source_model == "cvae") == (fake[0].open < 5000.0));
      ++models[x.source_model];
      left_real += x.real_side == Side::Left;
    }
    CHECK(reals.size() == 20);  // no repeats within a session
    CHECK(fakes.size() == 20);
  }
  CHECK(models["cvae"] > 120);
  CHECK(models["adversarial"] > 120);
  CHECK(left_real > 120);
  CHECK(left_real < 280);

  Questionnaire single(corpus(1, 20), {{"cvae", corpus(1000, 20)}}, {});
  for (const auto& x : single.create_session().second) CHECK(x.source_model == "cvae");
}

TEST_CASE("answers and results") {
  FakeClock clock;
  std::ostringstream log_out;
  ResponseLogWriter log(log_out);
  Questionnaire q(corpus(1, 40), {{"cvae", corpus(1000, 40)}, {"adversarial", corpus(5000, 40)}},
                  {20, 9, clock.fn()}, &log);
  auto [id, questions] = q.create_session();

  CHECK(code_of([&] { q.submit_answer("nope", 0, Side::Left); }) == ErrorCode::UnknownSession);
  CHECK(code_of([&] { q.submit_answer(id, 20, Side::Left); }) == ErrorCode::UnknownQuestion);

  for (std::size_t i = 0; i < 13; ++i) {
    clock.ms += 400;
    q.submit_answer(id, i, real_side_of(questions[i]));
  }
  CHECK(code_of([&] { q.submit_answer(id, 0, Side::Left); }) == ErrorCode::DuplicateAnswer);
  CHECK(code_of([&] { q.session_result(id); }) == ErrorCode::SessionIncomplete);
  for (std::size_t i = 13; i < 20; ++i) {
    clock.ms += 400;
    q.submit_answer(id, i, fake_side_of(questions[i]));
  }
  const SessionSummary r = q.session_result(id);
  CHECK(r.correct == 13);
  CHECK(r.questions == 20);
  CHECK(r.score == 0.65);
  CHECK(r.duration_s == 8.0);
  REQUIRE(r.per_question.size() == 20);
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(r.per_question[i].correct == (i < 13));
    CHECK(r.per_question[i].source_model == questions[i].source_model);
  }
  // Repeated result calls are stable and log once.
  CHECK(q.session_result(id).score == 0.65);

  // A fast session: all answered within 4.2 s.
  auto fast = q.create_session();
  for (std::size_t i = 0; i < 20; ++i) {
    clock.ms += 210;
    q.submit_answer(fast.first, i, Side::Left);
  }
  // An abandoned one.
  auto abandoned = q.create_session();
  for (std::size_t i = 0; i < 5; ++i) q.submit_answer(abandoned.first, i, Side::Left);

  const StudyStats st = q.stats();
  CHECK(st.sessions == 1);
  CHECK(st.dropped_too_fast == 1);
  CHECK(st.dropped_incomplete == 1);

  // Replaying the log reproduces the service score.
  std::istringstream in(log_out.str());
  const ResponseLog replay = read_response_log(in);
  REQUIRE(replay.sessions.size() == 3);
  CHECK(replay.sessions[0].completed);
  CHECK(replay.sessions[0].total_duration == 8.0);
  CHECK(replay.sessions[1].completed);
  CHECK(replay.sessions[1].total_duration == doctest::Approx(4.2).epsilon(1e-12));
  CHECK_FALSE(replay.sessions[2].completed);
  const FilterReport kept = filter_sessions(replay.sessions, replay.responses);
  REQUIRE(kept.kept.size() == 1);
  CHECK(kept.kept[0].session_id == id);
  std::size_t correct = 0;
  for (const auto& x : kept.responses) correct += x.chose_real;
  CHECK(static_cast<double>(correct) / 20.0 == r.score);
  for (const auto& [model, m] : st.models) {
    const auto rr = correct_ratio_per_capita(kept.responses, model);
    CHECK(rr.pooled_total == m.answers);
    CHECK(rr.pooled_correct == m.correct);
  }

  // The log is append-only: one line per event, complete logged once.
  std::size_t completes = 0;
  std::istringstream lines(log_out.str());
  std::string line;
  std::getline(lines, line);
  CHECK(line == "responselog v1");
  while (std::getline(lines, line)) completes += json::parse(line)["event"] == "complete";
  CHECK(completes == 1);
}

TEST_CASE("payload hides the answer key") {
  Questionnaire q(corpus(1, 20), {{"cvae", corpus(1000, 20)}}, {});
  const auto [id, questions] = q.create_session();
  const json p = Questionnaire::session_payload(id, questions);
  const std::string text = p.dump();
  CHECK(text.find("real_side") == std::string::npos);
  CHECK(text.find("source_model") == std::string::npos);
  CHECK(text.find("cvae") == std::string::npos);
  REQUIRE(p["questions"].size() == 20);
  CHECK(p["questions"][0]["left"].size() == 10);
  CHECK(p["questions"][0]["left"][0].size() == 4);
}

TEST_CASE("log writer appends to files") {
  const auto path = std::filesystem::temp_directory_path() / "candleaug_test_log.jsonl";
  std::filesystem::remove(path);
  {
    ResponseLogWriter w(path);
    w.append({{"event", "x"}});
  }
  {
    ResponseLogWriter w(path);
    w.append({{"event", "y"}});
  }
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str() == "responselog v1\n{\"event\":\"x\"}\n{\"event\":\"y\"}\n");
  std::filesystem::remove(path);
}

TEST_CASE("http protocol") {
  Questionnaire q(corpus(1, 30), {{"cvae", corpus(1000, 30)}, {"adversarial", corpus(5000, 30)}}, {20, 2});
  HttpService http(q);
  const int port = http.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread server([&] { http.listen_after_bind(); });
  http.wait_until_ready();
  httplib::Client cli("127.0.0.1", port);

  auto index = cli.Get("/");
  REQUIRE(index);
  CHECK(index->status == 200);

  auto created = cli.Post("/api/sessions", "", "application/json");
  REQUIRE(created);
  CHECK(created->status == 200);
  CHECK(created->body.find("real_side") == std::string::npos);
  const json s = json::parse(created->body);
  const std::string id = s["session_id"];
  REQUIRE(s["questions"].size() == 20);

  auto post_answer = [&](const std::string& sid, const std::string& body) {
    return cli.Post("/api/sessions/" + sid + "/answers", body, "application/json");
  };
  std::size_t expected = 0;
  for (std::size_t i = 0; i < 20; ++i) {
    const bool left_is_real = s["questions"][i]["left"][0][0].get<double>() < 1000.0;
    const std::string side = (i % 3 == 0) == left_is_real ? "left" : "right";
    expected += i % 3 == 0;
    auto r = post_answer(id, json{{"question_id", i}, {"chosen_side", side}}.dump());
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(json::parse(r->body)["accepted"] == true);
    if (i == 4) {
      auto early = cli.Get("/api/sessions/" + id + "/result");
      REQUIRE(early);
      CHECK(early->status == 409);
    }
  }

  auto dup = post_answer(id, R"({"question_id": 3, "chosen_side": "left"})");
  REQUIRE(dup);
  CHECK(dup->status == 409);
  auto unknown = post_answer("deadbeef", R"({"question_id": 3, "chosen_side": "left"})");
  REQUIRE(unknown);
  CHECK(unknown->status == 404);
  for (const char* body : {"{oops", R"({"question_id": 1})", R"({"question_id": 1, "chosen_side": "up"})",
                           R"({"question_id": -1, "chosen_side": "left"})", R"({"question_id": 99, "chosen_side": "left"})"}) {
    auto bad = post_answer(id, body);
    REQUIRE(bad);
    CHECK(bad->status == 422);
    CHECK(json::parse(bad->body).contains("error"));
  }

  auto result = cli.Get("/api/sessions/" + id + "/result");
  REQUIRE(result);
  CHECK(result->status == 200);
  const json r = json::parse(result->body);
  CHECK(r["score"].get<double>() == static_cast<double>(expected) / 20.0);
  CHECK(r["per_question"].size() == 20);
  CHECK(r.contains("duration_s"));
  auto missing = cli.Get("/api/sessions/deadbeef/result");
  REQUIRE(missing);
  CHECK(missing->status == 404);

  auto stats = cli.Get("/api/stats");
  REQUIRE(stats);
  CHECK(stats->status == 200);
  const json st = json::parse(stats->body);
  CHECK(st.contains("sessions"));
  CHECK(st["models"].is_object());

  http.stop();
  server.join();
}
