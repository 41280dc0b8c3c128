#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "candleaug/classifier.hpp"
#include "candleaug/cli.hpp"
#include "candleaug/dataset.hpp"
#include "candleaug/service.hpp"
#include "candleaug/stats.hpp"

using namespace candleaug;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("candleaug_cli_" + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Scripted log: session i answers question q correctly per `pattern`.
void write_log(const std::string& path) {
  ResponseLogWriter w{fs::path(path)};
  std::mt19937_64 rng(5);
  for (int s = 0; s < 12; ++s) {
    const std::string id = "s" + std::to_string(s);
    json qs = json::array();
    for (int q = 0; q < 20; ++q) qs.push_back({{"question_id", q}});
    w.append({{"event", "session"}, {"session_id", id}, {"created_ms", 0.0}, {"questions", qs}});
    const int answered = s == 11 ? 7 : 20;
    const double step = s == 10 ? 100.0 : 1500.0;
    for (int q = 0; q < answered; ++q) {
      w.append({{"event", "answer"},
                {"session_id", id},
                {"question_id", q},
                {"source_model", q % 2 == 0 ? "cvae" : "adversarial"},
                {"chose_real", rng() % 3 != 0},
                {"at_ms", step * (q + 1)}});
    }
  }
}

}  // namespace

TEST_CASE("usage errors") {
  CHECK(cli({"roundtrip", "--bogus"}).code == 2);
  CHECK(cli({}).code == 2);
  CHECK(cli({"nosuch"}).code == 2);
  const Run help = cli({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("generate") != std::string::npos);
  CHECK(cli({"generate", "--seeds", "x", "--out", "y", "--classifier", "svm"}).code == 2);
}

TEST_CASE("domain errors exit 1 with the error name") {
  TempDir dir;
  const Run r = cli({"label", "--in", dir / "missing.candleset", "--out", dir / "o"});
  CHECK(r.code == 1);
  CHECK(r.err.find("IoError") != std::string::npos);
}

TEST_CASE("roundtrip self-test") {
  const Run r = cli({"roundtrip", "--windows", "200"});
  CHECK(r.code == 0);
  CHECK(r.out.find("PASS") != std::string::npos);
}

TEST_CASE("ingest from csv") {
  TempDir dir;
  {
    std::ofstream csv(dir / "prices.csv");
    csv << "timestamp,open,high,low,close\n";
    for (int i = 0; i < 40; ++i) {
      const double p = 100 + std::sin(i * 0.7) * 3;
      csv << "2011-03-0" << (1 + i / 20) << ' ' << 10 + (i % 20) / 2 << ':' << (i % 2 ? "30" : "00") << ',' << p << ','
          << p + 1 << ',' << p - 1 << ',' << p + 0.25 << '\n';
    }
  }
  const Run r = cli({"ingest", "--csv", dir / "prices.csv", "--out", dir / "w.candleset", "--stride", "5"});
  REQUIRE(r.code == 0);
  const Dataset ds = load_dataset(fs::path(dir / "w.candleset"));
  CHECK(ds.records.size() == 7);
  const Run filtered = cli({"ingest", "--csv", dir / "prices.csv", "--out", dir / "f.candleset", "--from",
                            "2011-03-02", "--to", "2011-03-03"});
  REQUIRE(filtered.code == 0);
  CHECK(load_dataset(fs::path(dir / "f.candleset")).records.size() == 11);
}

TEST_CASE("pipeline: synth, label, train, gradcheck, generate") {
  TempDir dir;
  REQUIRE(cli({"--seed", "3", "synth", "--per-class", "30", "--out", dir / "corpus.candleset"}).code == 0);

  const Run short_label = cli({"label", "--in", dir / "corpus.candleset", "--out", dir / "l.candleset", "--per-class", "31"});
  CHECK(short_label.code == 1);
  CHECK(short_label.err.find("InsufficientClass") != std::string::npos);

  const Run label = cli({"label", "--in", dir / "corpus.candleset", "--out", dir / "l.candleset", "--per-class", "25"});
  REQUIRE(label.code == 0);
  CHECK(label.out.find("records 200") != std::string::npos);

  const Run train = cli({"--seed", "4", "train", "--data", dir / "l.candleset", "--out", dir / "m.model", "--epochs",
                         "5", "--history", dir / "loss.csv"});
  REQUIRE(train.code == 0);
  const ClassifierModel m = load_model(fs::path(dir / "m.model"));
  CHECK(m.length == 10);
  CHECK(slurp(dir / "loss.csv").rfind("epoch,loss\n", 0) == 0);
  REQUIRE(cli({"--seed", "4", "train", "--data", dir / "l.candleset", "--out", dir / "m2.model", "--epochs", "5"})
              .code == 0);
  CHECK(slurp(dir / "m.model") == slurp(dir / "m2.model"));

  const Run gc = cli({"gradcheck", "--model", dir / "m.model", "--data", dir / "l.candleset", "--points", "3"});
  CHECK(gc.code == 0);
  CHECK(gc.out.find("PASS") != std::string::npos);

  const Run gen = cli({"--seed", "8", "generate", "--seeds", dir / "l.candleset", "--out", dir / "g.candleset",
                       "--target", "80"});
  REQUIRE(gen.code == 0);
  const Dataset g = load_dataset(fs::path(dir / "g.candleset"));
  REQUIRE(g.records.size() == 80);
  for (const auto& r : g.records) {
    CHECK(r.source == SampleSource::Generated);
    CHECK(match_pattern(r.window) == r.label);
    CHECK(r.origin.contains("sampler"));
  }
  REQUIRE(cli({"--seed", "8", "generate", "--seeds", dir / "l.candleset", "--out", dir / "g2.candleset", "--target",
               "80"})
              .code == 0);
  CHECK(slurp(dir / "g.candleset") == slurp(dir / "g2.candleset"));

  const Run model_gen = cli({"generate", "--seeds", dir / "l.candleset", "--out", dir / "gm.candleset", "--target",
                             "16", "--classifier", "model", "--model", dir / "m.model"});
  CHECK(model_gen.code == 0);
  const Run no_model = cli({"generate", "--seeds", dir / "l.candleset", "--out", dir / "x", "--classifier", "model"});
  CHECK(no_model.code == 2);

  const Run starved = cli({"generate", "--seeds", dir / "l.candleset", "--out", dir / "s.candleset", "--target",
                           "500", "--budget", "10"});
  CHECK(starved.code == 1);
  CHECK(starved.err.find("BudgetExhausted") != std::string::npos);
}

TEST_CASE("stats matches the library") {
  TempDir dir;
  write_log(dir / "log.jsonl");
  const Run r = cli({"stats", "--responses", dir / "log.jsonl", "--histogram", dir / "h.csv", "--bins", "4"});
  REQUIRE(r.code == 0);
  const json report = json::parse(r.out);

  const ResponseLog log = read_response_log(fs::path(dir / "log.jsonl"));
  const FilterReport f = filter_sessions(log.sessions, log.responses);
  CHECK(report["sessions_kept"] == 10);
  CHECK(report["dropped_too_fast"] == 1);
  CHECK(report["dropped_incomplete"] == 1);
  const auto x = correct_ratio_per_capita(f.responses, "cvae");
  const auto y = correct_ratio_per_capita(f.responses, "adversarial");
  const auto [xs, ys] = pair_by_session(x.per_session, y.per_session);
  const TTestResult t = paired_t_test(xs, ys);
  CHECK(report["t_test"]["t_value"].get<double>() == t.t_value);
  CHECK(report["t_test"]["p_value"].get<double>() == t.p_value);
  CHECK(report["t_test"]["n"] == 10);
  CHECK(report["models"]["cvae"]["correct"] == x.pooled_correct);

  const std::string csv = slurp(dir / "h.csv");
  CHECK(csv.rfind("bin_low,bin_high,count\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}
