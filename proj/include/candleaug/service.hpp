#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "candleaug/ohlc.hpp"
#include "candleaug/stats.hpp"

namespace httplib {
class Server;
}

namespace candleaug {

enum class Side { Left, Right };
std::string_view side_name(Side s) noexcept;
std::optional<Side> parse_side(std::string_view s) noexcept;

struct Question {
  std::size_t question_id = 0;
  CandleWindow left;
  CandleWindow right;
  Side real_side = Side::Left;
  std::string source_model;
};

struct GeneratedCorpus {
  std::string model;
  std::vector<CandleWindow> windows;
};

/// Append-only, line-delimited session/answer log. Writes are serialized and
/// flushed one line at a time.
class ResponseLogWriter {
 public:
  /// Writes the `responselog v1` header when `out` is empty-positioned.
  explicit ResponseLogWriter(std::ostream& out, bool write_header = true);
  /// Opens `path` for appending; the header is written if the file is new or empty.
  explicit ResponseLogWriter(const std::filesystem::path& path);
  ~ResponseLogWriter();

  void append(const nlohmann::json& record);

 private:
  std::unique_ptr<std::ostream> owned_;
  std::ostream* out_;
  std::mutex mutex_;
};

struct ServiceOptions {
  std::size_t questions = kQuestionsPerSession;
  std::uint64_t seed = 0;  // question sampling; tokens always come from the OS
  /// Milliseconds since an arbitrary epoch; defaults to the system clock.
  std::function<double()> clock;
  double min_session_seconds = kMinSessionSeconds;
};

struct QuestionResult {
  std::size_t question_id = 0;
  bool correct = false;
  std::string source_model;
  Side real_side = Side::Left;
};

struct SessionSummary {
  std::string session_id;
  std::size_t correct = 0;
  std::size_t questions = 0;
  double score = 0.0;  // correct / questions
  double duration_s = 0.0;
  std::vector<QuestionResult> per_question;
};

struct ModelStats {
  std::size_t answers = 0;
  std::size_t correct = 0;
  double ratio = 0.0;
};

struct StudyStats {
  std::size_t sessions = 0;  // after filtering
  std::size_t dropped_incomplete = 0;
  std::size_t dropped_too_fast = 0;
  std::map<std::string, ModelStats> models;
};

/// Real-vs-generated forced-choice questionnaire state.
class Questionnaire {
 public:
  /// Throws CorpusTooSmall when a corpus cannot supply a full session.
  Questionnaire(std::vector<CandleWindow> real, std::vector<GeneratedCorpus> generated, ServiceOptions opts,
                ResponseLogWriter* log = nullptr);

  /// Returns the session id and its questions; real_side stays server-side.
  std::pair<std::string, std::vector<Question>> create_session();

  /// Throws UnknownSession, UnknownQuestion, DuplicateAnswer.
  void submit_answer(const std::string& session_id, std::size_t question_id, Side chosen);

  /// Throws UnknownSession, SessionIncomplete.
  SessionSummary session_result(const std::string& session_id);

  StudyStats stats() const;

  /// Public payload for a new session (no real_side, no source_model).
  static nlohmann::json session_payload(const std::string& id, const std::vector<Question>& questions);

 private:
  struct Answer {
    Side chosen = Side::Left;
    bool correct = false;
    double at_ms = 0.0;
  };
  struct Session {
    std::vector<Question> questions;
    std::vector<std::optional<Answer>> answers;
    double created_ms = 0.0;
    bool completed_logged = false;
  };

  double now() const;
  std::string new_token();

  std::vector<CandleWindow> real_;
  std::vector<GeneratedCorpus> generated_;
  ServiceOptions opts_;
  ResponseLogWriter* log_;
  mutable std::mutex mutex_;
  std::mt19937_64 rng_;
  std::random_device entropy_;
  std::map<std::string, Session> sessions_;
};

/// HTTP front end for a Questionnaire.
class HttpService {
 public:
  /// `static_dir`, when set, is mounted at `/`.
  HttpService(Questionnaire& q, std::optional<std::filesystem::path> static_dir = std::nullopt);
  ~HttpService();

  /// Binds and serves until stop(); returns false if binding failed.
  bool listen(const std::string& host, int port);
  /// Binds to a free port, returning it (or -1); call listen_after_bind() to serve.
  int bind_to_any_port(const std::string& host);
  bool listen_after_bind();
  void stop();
  void wait_until_ready() const;

 private:
  Questionnaire& q_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace candleaug
