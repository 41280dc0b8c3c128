#include "candleaug/service.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <httplib.h>

#include "candleaug/error.hpp"

namespace candleaug {

using nlohmann::json;

std::string_view side_name(Side s) noexcept { return s == Side::Left ? "left" : "right"; }

std::optional<Side> parse_side(std::string_view s) noexcept {
  if (s == "left") return Side::Left;
  if (s == "right") return Side::Right;
  return std::nullopt;
}

ResponseLogWriter::ResponseLogWriter(std::ostream& out, bool write_header) : out_(&out) {
  if (write_header) {
    *out_ << "responselog v1\n";
    out_->flush();
  }
}

ResponseLogWriter::ResponseLogWriter(const std::filesystem::path& path) {
  std::error_code ec;
  const bool fresh = !std::filesystem::exists(path, ec) || std::filesystem::file_size(path, ec) == 0;
  owned_ = std::make_unique<std::ofstream>(path, std::ios::app);
  if (!*owned_) throw Error(ErrorCode::IoError, "cannot open log " + path.string());
  out_ = owned_.get();
  if (fresh) {
    *out_ << "responselog v1\n";
    out_->flush();
  }
}

ResponseLogWriter::~ResponseLogWriter() = default;

void ResponseLogWriter::append(const json& record) {
  const std::string line = record.dump();
  std::lock_guard lock(mutex_);
  *out_ << line << '\n';
  out_->flush();
}

namespace {

json window_json(const CandleWindow& w) {
  json rows = json::array();
  for (const auto& c : w) rows.push_back({c.open, c.high, c.low, c.close});
  return rows;
}

double system_ms() {
  using namespace std::chrono;
  return static_cast<double>(duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count());
}

}  // namespace

Questionnaire::Questionnaire(std::vector<CandleWindow> real, std::vector<GeneratedCorpus> generated,
                             ServiceOptions opts, ResponseLogWriter* log)
    : real_(std::move(real)), generated_(std::move(generated)), opts_(std::move(opts)), log_(log), rng_(opts_.seed) {
  if (opts_.questions < 1) throw Error(ErrorCode::InvalidConfig, "sessions need at least one question");
  if (real_.size() < opts_.questions) {
    throw Error(ErrorCode::CorpusTooSmall, "real corpus has " + std::to_string(real_.size()) + " windows, need " +
                                               std::to_string(opts_.questions));
  }
  if (generated_.empty()) throw Error(ErrorCode::CorpusTooSmall, "no generated corpus registered");
  for (const auto& g : generated_) {
    if (g.windows.size() < opts_.questions) {
      throw Error(ErrorCode::CorpusTooSmall, "generated corpus '" + g.model + "' has " +
                                                 std::to_string(g.windows.size()) + " windows, need " +
                                                 std::to_string(opts_.questions));
    }
  }
}

double Questionnaire::now() const { return opts_.clock ? opts_.clock() : system_ms(); }

std::string Questionnaire::new_token() {
  std::string token;
  for (int i = 0; i < 4; ++i) {
    char buf[9];
    std::snprintf(buf, sizeof(buf), "%08x", static_cast<unsigned>(entropy_()));
    token += buf;
  }
  return token;
}

std::pair<std::string, std::vector<Question>> Questionnaire::create_session() {
  std::lock_guard lock(mutex_);
  const std::size_t n = opts_.questions;

  std::vector<std::size_t> real_idx(real_.size());
  std::iota(real_idx.begin(), real_idx.end(), std::size_t{0});
  std::shuffle(real_idx.begin(), real_idx.end(), rng_);

  std::vector<std::vector<std::size_t>> pools(generated_.size());
  for (std::size_t g = 0; g < generated_.size(); ++g) {
    pools[g].resize(generated_[g].windows.size());
    std::iota(pools[g].begin(), pools[g].end(), std::size_t{0});
    std::shuffle(pools[g].begin(), pools[g].end(), rng_);
  }
  std::uniform_int_distribution<std::size_t> pick_corpus(0, generated_.size() - 1);
  std::bernoulli_distribution coin(0.5);

  Session session;
  session.created_ms = now();
  std::vector<std::size_t> used(generated_.size(), 0);
  for (std::size_t q = 0; q < n; ++q) {
    const std::size_t g = pick_corpus(rng_);
    const CandleWindow& fake = generated_[g].windows[pools[g][used[g]++]];
    const CandleWindow& real = real_[real_idx[q]];
    const Side real_side = coin(rng_) ? Side::Left : Side::Right;
    session.questions.push_back({q, real_side == Side::Left ? real : fake, real_side == Side::Left ? fake : real,
                                 real_side, generated_[g].model});
  }
  session.answers.assign(n, std::nullopt);

  std::string id = new_token();
  while (sessions_.count(id) != 0) id = new_token();
  if (log_ != nullptr) {
    json qs = json::array();
    for (const auto& q : session.questions) {
      qs.push_back({{"question_id", q.question_id},
                    {"source_model", q.source_model},
                    {"real_side", side_name(q.real_side)}});
    }
    log_->append({{"event", "session"}, {"session_id", id}, {"created_ms", session.created_ms}, {"questions", qs}});
  }
  auto questions = session.questions;
  sessions_.emplace(id, std::move(session));
  return {id, std::move(questions)};
}

void Questionnaire::submit_answer(const std::string& session_id, std::size_t question_id, Side chosen) {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, session_id);
  Session& s = it->second;
  if (question_id >= s.questions.size()) {
    throw Error(ErrorCode::UnknownQuestion, "question " + std::to_string(question_id));
  }
  if (s.answers[question_id]) {
    throw Error(ErrorCode::DuplicateAnswer, "question " + std::to_string(question_id) + " already answered");
  }
  const Question& q = s.questions[question_id];
  const Answer a{chosen, chosen == q.real_side, now()};
  s.answers[question_id] = a;
  if (log_ != nullptr) {
    log_->append({{"event", "answer"},
                  {"session_id", session_id},
                  {"question_id", question_id},
                  {"source_model", q.source_model},
                  {"chosen_side", side_name(chosen)},
                  {"chose_real", a.correct},
                  {"at_ms", a.at_ms}});
  }
}

SessionSummary Questionnaire::session_result(const std::string& session_id) {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, session_id);
  Session& s = it->second;
  const auto answered = std::count_if(s.answers.begin(), s.answers.end(), [](const auto& a) { return a.has_value(); });
  if (static_cast<std::size_t>(answered) < s.questions.size()) {
    throw Error(ErrorCode::SessionIncomplete,
                std::to_string(answered) + " of " + std::to_string(s.questions.size()) + " answered");
  }
  SessionSummary r;
  r.session_id = session_id;
  r.questions = s.questions.size();
  double last = s.created_ms;
  for (std::size_t i = 0; i < s.questions.size(); ++i) {
    const Answer& a = *s.answers[i];
    r.correct += a.correct ? 1 : 0;
    last = std::max(last, a.at_ms);
    r.per_question.push_back({i, a.correct, s.questions[i].source_model, s.questions[i].real_side});
  }
  r.score = static_cast<double>(r.correct) / static_cast<double>(r.questions);
  r.duration_s = (last - s.created_ms) / 1000.0;
  if (!s.completed_logged && log_ != nullptr) {
    log_->append({{"event", "complete"},
                  {"session_id", session_id},
                  {"score", r.score},
                  {"duration_s", r.duration_s}});
  }
  s.completed_logged = true;
  return r;
}

StudyStats Questionnaire::stats() const {
  std::vector<SessionRecord> sessions;
  std::vector<ResponseRecord> responses;
  {
    std::lock_guard lock(mutex_);
    for (const auto& [id, s] : sessions_) {
      double last = s.created_ms;
      bool complete = true;
      for (std::size_t i = 0; i < s.answers.size(); ++i) {
        if (!s.answers[i]) {
          complete = false;
          continue;
        }
        last = std::max(last, s.answers[i]->at_ms);
        responses.push_back({id, i, s.questions[i].source_model, s.answers[i]->correct});
      }
      sessions.push_back({id, (last - s.created_ms) / 1000.0, complete});
    }
  }
  const FilterReport f = filter_sessions(sessions, responses, opts_.min_session_seconds, opts_.questions);
  StudyStats out;
  out.sessions = f.kept.size();
  out.dropped_incomplete = f.dropped_incomplete;
  out.dropped_too_fast = f.dropped_too_fast;
  for (const auto& g : generated_) {
    const RatioReport r = correct_ratio_per_capita(f.responses, g.model);
    out.models[g.model] = {r.pooled_total, r.pooled_correct, r.pooled_ratio()};
  }
  return out;
}

json Questionnaire::session_payload(const std::string& id, const std::vector<Question>& questions) {
  json qs = json::array();
  for (const auto& q : questions) {
    qs.push_back({{"question_id", q.question_id}, {"left", window_json(q.left)}, {"right", window_json(q.right)}});
  }
  return {{"session_id", id}, {"questions", std::move(qs)}};
}

namespace {

constexpr const char* kJson = "application/json";

constexpr const char* kFallbackPage =
    "<!doctype html><html><head><meta charset=\"utf-8\"><title>Candlestick challenge</title></head>"
    "<body><h1>Candlestick challenge</h1><p>The questionnaire API is served under <code>/api</code>. "
    "Start the server with <code>--static DIR</code> to serve the web client.</p></body></html>";

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownSession: return 404;
    case ErrorCode::DuplicateAnswer: return 409;
    case ErrorCode::SessionIncomplete: return 409;
    case ErrorCode::UnknownQuestion:
    case ErrorCode::MalformedBody: return 422;
    default: return 500;
  }
}

void send_error(httplib::Response& res, const Error& e) {
  res.status = status_for(e.code());
  res.set_content(json{{"error", e.name()}, {"detail", e.what()}}.dump(), kJson);
}

template <typename Handler>
auto guarded(Handler h) {
  return [h](const httplib::Request& req, httplib::Response& res) {
    try {
      h(req, res);
    } catch (const Error& e) {
      send_error(res, e);
    } catch (const json::exception& e) {
      send_error(res, Error(ErrorCode::MalformedBody, e.what()));
    }
  };
}

}  // namespace

HttpService::HttpService(Questionnaire& q, std::optional<std::filesystem::path> static_dir)
    : q_(q), server_(std::make_unique<httplib::Server>()) {
  auto& s = *server_;
  s.Post("/api/sessions", guarded([this](const httplib::Request&, httplib::Response& res) {
           auto [id, questions] = q_.create_session();
           res.set_content(Questionnaire::session_payload(id, questions).dump(), kJson);
         }));
  s.Post(R"(/api/sessions/([A-Za-z0-9_-]+)/answers)",
         guarded([this](const httplib::Request& req, httplib::Response& res) {
           const json body = json::parse(req.body);
           if (!body.is_object() || !body.contains("question_id") || !body.contains("chosen_side") ||
               !body["question_id"].is_number_unsigned() || !body["chosen_side"].is_string()) {
             throw Error(ErrorCode::MalformedBody, "expected {question_id, chosen_side}");
           }
           const auto side = parse_side(body["chosen_side"].get<std::string>());
           if (!side) throw Error(ErrorCode::MalformedBody, "chosen_side must be 'left' or 'right'");
           q_.submit_answer(req.matches[1], body["question_id"].get<std::size_t>(), *side);
           res.set_content(json{{"accepted", true}}.dump(), kJson);
         }));
  s.Get(R"(/api/sessions/([A-Za-z0-9_-]+)/result)",
        guarded([this](const httplib::Request& req, httplib::Response& res) {
          const SessionSummary r = q_.session_result(req.matches[1]);
          json per = json::array();
          for (const auto& p : r.per_question) {
            per.push_back({{"question_id", p.question_id},
                           {"correct", p.correct},
                           {"source_model", p.source_model},
                           {"real_side", side_name(p.real_side)}});
          }
          res.set_content(json{{"score", r.score},
                               {"correct", r.correct},
                               {"questions", r.questions},
                               {"per_question", std::move(per)},
                               {"duration_s", r.duration_s}}
                              .dump(),
                          kJson);
        }));
  s.Get("/api/stats", guarded([this](const httplib::Request&, httplib::Response& res) {
          const StudyStats st = q_.stats();
          json models = json::object();
          for (const auto& [name, m] : st.models) {
            models[name] = {{"answers", m.answers}, {"correct", m.correct}, {"correct_ratio", m.ratio}};
          }
          res.set_content(json{{"sessions", st.sessions},
                               {"dropped_incomplete", st.dropped_incomplete},
                               {"dropped_too_fast", st.dropped_too_fast},
                               {"models", std::move(models)}}
                              .dump(),
                          kJson);
        }));
  if (static_dir && s.set_mount_point("/", static_dir->string())) return;
  s.Get("/", [](const httplib::Request&, httplib::Response& res) { res.set_content(kFallbackPage, "text/html"); });
}

HttpService::~HttpService() = default;

bool HttpService::listen(const std::string& host, int port) { return server_->listen(host, port); }
int HttpService::bind_to_any_port(const std::string& host) { return server_->bind_to_any_port(host); }
bool HttpService::listen_after_bind() { return server_->listen_after_bind(); }
void HttpService::stop() { server_->stop(); }
void HttpService::wait_until_ready() const { server_->wait_until_ready(); }

}  // namespace candleaug
