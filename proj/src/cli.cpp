#include "candleaug/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <memory>
#include <random>

#include <CLI11.hpp>
#include <json.hpp>

#include "candleaug/classifier.hpp"
#include "candleaug/dataset.hpp"
#include "candleaug/error.hpp"
#include "candleaug/gaf.hpp"
#include "candleaug/sampler.hpp"
#include "candleaug/service.hpp"
#include "candleaug/stats.hpp"

namespace candleaug {

namespace {

using nlohmann::json;

struct Globals {
  std::uint64_t seed = 0;
  bool quiet = false;
};

Timestamp require_timestamp(const std::string& s, const char* flag) {
  const auto ts = parse_timestamp(s);
  if (!ts) throw CLI::ValidationError(flag, "not an ISO-8601 date or timestamp: " + s);
  return *ts;
}

std::vector<LabeledTensor> to_tensors(const std::vector<LabeledWindow>& records, std::ostream& err, bool quiet) {
  std::vector<LabeledTensor> out;
  std::size_t skipped = 0;
  for (const auto& r : records) {
    if (r.label == PatternLabel::None) {
      ++skipped;
      continue;
    }
    try {
      out.push_back({encode_window(r.window), r.label});
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ConstantSeries) throw;
      ++skipped;
    }
  }
  if (skipped > 0 && !quiet) err << "skipped " << skipped << " unlabeled or constant windows\n";
  return out;
}

std::unique_ptr<Classifier> make_classifier(const std::string& kind, const std::string& model_path) {
  if (kind == "rule") return std::make_unique<RuleClassifier>();
  if (model_path.empty()) throw CLI::ValidationError("--model", "required with --classifier model");
  return std::make_unique<CnnClassifier>(load_model(std::filesystem::path(model_path)));
}

std::sig_atomic_t volatile g_stop_requested = 0;
HttpService* g_service = nullptr;

extern "C" void handle_stop_signal(int) {
  g_stop_requested = 1;
  if (g_service != nullptr) g_service->stop();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Candlestick GAF augmentation toolkit", "candleaug"};
  app.require_subcommand(1, 1);
  Globals g;
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_flag("--quiet", g.quiet, "Suppress progress output");
  std::function<int()> action;

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Read OHLC CSV and write sliding windows as a dataset");
  std::string csv_path, ingest_out, from, to;
  std::size_t window_len = kDefaultWindowLength, stride = 1;
  ingest->add_option("--csv", csv_path, "Input CSV (timestamp,open,high,low,close)")->required();
  ingest->add_option("--out", ingest_out, "Output dataset file")->required();
  ingest->add_option("--window", window_len, "Bars per window")->capture_default_str();
  ingest->add_option("--stride", stride, "Window stride")->capture_default_str();
  ingest->add_option("--from", from, "Keep rows at or after this instant");
  ingest->add_option("--to", to, "Keep rows before this instant");
  ingest->callback([&] {
    action = [&] {
      IngestOptions opts;
      if (!from.empty()) opts.from = require_timestamp(from, "--from");
      if (!to.empty()) opts.to = require_timestamp(to, "--to");
      const auto rows = ingest_csv(std::filesystem::path(csv_path), opts);
      const auto windows = slide_windows(rows, window_len, stride);
      std::vector<LabeledWindow> records;
      records.reserve(windows.size());
      for (std::size_t k = 0; k < windows.size(); ++k) {
        records.push_back({windows[k], PatternLabel::None, SampleSource::Real,
                           json{{"row", k * stride}, {"timestamp", format_timestamp(rows[k * stride].timestamp)}}});
      }
      save_dataset(records, window_len, std::filesystem::path(ingest_out));
      if (!g.quiet) out << "rows " << rows.size() << "\nwindows " << records.size() << '\n';
      return 0;
    };
  });

  // synth
  auto* synth = app.add_subcommand("synth", "Write a balanced corpus of synthetic pattern windows");
  std::size_t synth_per_class = 100;
  std::string synth_out;
  synth->add_option("--per-class", synth_per_class, "Windows per pattern")->capture_default_str();
  synth->add_option("--out", synth_out, "Output dataset file")->required();
  synth->add_option("--window", window_len, "Bars per window")->capture_default_str();
  synth->callback([&] {
    action = [&] {
      const auto records = synthetic_corpus(synth_per_class, g.seed, window_len);
      save_dataset(records, window_len, std::filesystem::path(synth_out));
      if (!g.quiet) out << "records " << records.size() << '\n';
      return 0;
    };
  });

  // label
  auto* label = app.add_subcommand("label", "Label windows with the rule engine and balance classes");
  std::string label_in, label_out;
  std::size_t per_class = 1500;
  bool allow_fewer = false;
  label->add_option("--in", label_in, "Input dataset file")->required();
  label->add_option("--out", label_out, "Output dataset file")->required();
  label->add_option("--per-class", per_class, "Windows kept per pattern")->capture_default_str();
  label->add_flag("--allow-fewer", allow_fewer, "Do not fail when a class is short");
  label->callback([&] {
    action = [&] {
      const Dataset ds = load_dataset(std::filesystem::path(label_in));
      const BalanceResult r = label_and_balance(ds.records, RuleParams{}, per_class, allow_fewer);
      save_dataset(r.windows, ds.length, std::filesystem::path(label_out));
      if (!g.quiet) {
        for (std::size_t k = 0; k < kNumClasses; ++k) {
          out << label_name(label_from_class(k)) << ' ' << r.kept[k] << '/' << r.found[k] << '\n';
        }
        out << "records " << r.windows.size() << '\n';
      }
      return 0;
    };
  });

  // train
  auto* train_cmd = app.add_subcommand("train", "Train the GAF convolutional classifier");
  std::string train_data, model_out, history_out;
  TrainConfig tcfg;
  train_cmd->add_option("--data", train_data, "Labeled dataset file")->required();
  train_cmd->add_option("--out", model_out, "Output model file")->required();
  train_cmd->add_option("--epochs", tcfg.epochs, "Epochs")->capture_default_str();
  train_cmd->add_option("--lr", tcfg.learning_rate, "Learning rate")->capture_default_str();
  train_cmd->add_option("--batch", tcfg.batch_size, "Mini-batch size")->capture_default_str();
  train_cmd->add_option("--l2", tcfg.l2, "Weight decay")->capture_default_str();
  train_cmd->add_option("--history", history_out, "Per-epoch loss CSV");
  train_cmd->callback([&] {
    action = [&] {
      const Dataset ds = load_dataset(std::filesystem::path(train_data));
      const auto data = to_tensors(ds.records, err, g.quiet);
      tcfg.seed = g.seed;
      const TrainResult r = train(data, tcfg);
      save_model(r.model, std::filesystem::path(model_out));
      if (!history_out.empty()) {
        std::ofstream h(history_out);
        if (!h) throw Error(ErrorCode::IoError, "cannot write " + history_out);
        h << std::setprecision(std::numeric_limits<double>::max_digits10) << "epoch,loss\n";
        for (std::size_t e = 0; e < r.loss_history.size(); ++e) h << e + 1 << ',' << r.loss_history[e] << '\n';
      }
      if (!g.quiet) {
        out << "final_loss " << r.loss_history.back() << "\ntrain_accuracy " << accuracy(r.model, data) << '\n';
      }
      return 0;
    };
  });

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Compare analytic gradients with central differences");
  std::string gc_model, gc_data;
  double eps = 1e-5, tolerance = 1e-4;
  std::size_t points = 10;
  gc->add_option("--model", gc_model, "Model file (default: random models)");
  gc->add_option("--data", gc_data, "Dataset to draw samples from (default: synthetic)");
  gc->add_option("--eps", eps, "Finite-difference step")->capture_default_str();
  gc->add_option("--points", points, "Parameter points to check")->capture_default_str();
  gc->add_option("--tolerance", tolerance, "Maximum accepted relative error")->capture_default_str();
  gc->callback([&] {
    action = [&] {
      std::vector<LabeledWindow> records;
      if (gc_data.empty()) {
        records = synthetic_corpus(1, g.seed);
      } else {
        records = load_dataset(std::filesystem::path(gc_data)).records;
      }
      const auto samples = to_tensors(records, err, true);
      if (samples.empty()) throw Error(ErrorCode::EmptyDataset, "no usable samples for gradcheck");
      double worst = 0.0;
      for (std::size_t p = 0; p < points; ++p) {
        const LabeledTensor& s = samples[p % samples.size()];
        const ClassifierModel m = gc_model.empty() ? ClassifierModel::initialize(s.tensor.length(), g.seed + p)
                                                   : load_model(std::filesystem::path(gc_model));
        const double e = grad_check(m, s, eps);
        worst = std::max(worst, e);
        if (!g.quiet) out << "point " << p << " max_rel_error " << e << '\n';
      }
      out << "max_rel_error " << worst << (worst < tolerance ? " PASS" : " FAIL") << '\n';
      return worst < tolerance ? 0 : 1;
    };
  });

  // generate
  auto* gen = app.add_subcommand("generate", "Generate label-preserving samples by local search attack sampling");
  std::string seeds_path, gen_out, classifier_kind = "rule", gen_model;
  GenerationOptions gopts;
  SamplerConfig scfg;
  gen->add_option("--seeds", seeds_path, "Labeled seed dataset")->required();
  gen->add_option("--out", gen_out, "Output dataset file")->required();
  gen->add_option("--target", gopts.target, "Samples to generate")->capture_default_str();
  gen->add_option("--episodes", scfg.episodes, "Episodes per seed run")->capture_default_str();
  gen->add_option("--budget", gopts.episode_budget, "Total episode budget (0 = 100 x target)");
  gen->add_option("--scale-low", scfg.scale_low, "Lower perturbation scale")->capture_default_str();
  gen->add_option("--scale-high", scfg.scale_high, "Upper perturbation scale")->capture_default_str();
  gen->add_option("--reset-period", scfg.reset_period, "Episodes between resets")->capture_default_str();
  gen->add_option("--classifier", classifier_kind, "rule or model")
      ->check(CLI::IsMember({"rule", "model"}))
      ->capture_default_str();
  gen->add_option("--model", gen_model, "Model file for --classifier model");
  gen->callback([&] {
    action = [&] {
      const auto clf = make_classifier(classifier_kind, gen_model);
      const Dataset ds = load_dataset(std::filesystem::path(seeds_path));
      std::vector<CandleWindow> seeds;
      for (const auto& r : ds.records) seeds.push_back(r.window);
      scfg.seed = g.seed;
      const GenerationResult r = generate_dataset(seeds, *clf, scfg, gopts);
      save_dataset(to_records(r.samples, scfg), ds.length, std::filesystem::path(gen_out));
      if (!g.quiet) {
        std::size_t rejected = 0;
        for (const auto& s : r.seeds) rejected += s.error.empty() ? 0 : 1;
        out << "samples " << r.samples.size() << "\nepisodes " << r.episodes_used << "\nrejected_seeds " << rejected
            << '\n';
      }
      if (r.budget_exhausted) {
        err << r.diagnostic << '\n';
        return 1;
      }
      return 0;
    };
  });

  // serve
  auto* serve = app.add_subcommand("serve", "Run the questionnaire HTTP service");
  int port = 8080;
  std::string host = "0.0.0.0", real_path, log_path = "responses.log", static_dir;
  std::vector<std::string> generated_specs;
  std::size_t questions = kQuestionsPerSession;
  serve->add_option("--port", port, "Listen port")->capture_default_str();
  serve->add_option("--host", host, "Listen address")->capture_default_str();
  serve->add_option("--real", real_path, "Real-sample dataset")->required();
  serve->add_option("--generated", generated_specs, "Generated corpora as name=path")->required();
  serve->add_option("--log", log_path, "Append-only response log")->capture_default_str();
  serve->add_option("--static", static_dir, "Directory with the web client");
  serve->add_option("--questions", questions, "Questions per session")->capture_default_str();
  serve->callback([&] {
    action = [&] {
      std::vector<CandleWindow> real;
      for (const auto& r : load_dataset(std::filesystem::path(real_path)).records) real.push_back(r.window);
      std::vector<GeneratedCorpus> corpora;
      for (const auto& spec : generated_specs) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0) throw CLI::ValidationError("--generated", "expected name=path");
        GeneratedCorpus c{spec.substr(0, eq), {}};
        for (const auto& r : load_dataset(std::filesystem::path(spec.substr(eq + 1))).records) {
          c.windows.push_back(r.window);
        }
        corpora.push_back(std::move(c));
      }
      ResponseLogWriter log{std::filesystem::path(log_path)};
      ServiceOptions sopts;
      sopts.seed = g.seed;
      sopts.questions = questions;
      Questionnaire q(std::move(real), std::move(corpora), sopts, &log);
      std::optional<std::filesystem::path> dir;
      if (!static_dir.empty()) dir = static_dir;
      HttpService service(q, dir);
      g_service = &service;
      std::signal(SIGINT, handle_stop_signal);
      std::signal(SIGTERM, handle_stop_signal);
      if (!g.quiet) out << "listening on " << host << ':' << port << std::endl;
      const bool ok = service.listen(host, port);
      g_service = nullptr;
      if (!ok && g_stop_requested == 0) throw Error(ErrorCode::IoError, "cannot listen on port " + std::to_string(port));
      return 0;
    };
  });

  // stats
  auto* stats_cmd = app.add_subcommand("stats", "Filter a response log and run the paired t-test");
  std::string responses_path, histogram_out, x_model = "cvae", y_model = "adversarial";
  std::size_t bins = 10;
  double min_seconds = kMinSessionSeconds;
  stats_cmd->add_option("--responses", responses_path, "Service response log")->required();
  stats_cmd->add_option("--histogram", histogram_out, "Score histogram CSV (default: stdout section)");
  stats_cmd->add_option("--bins", bins, "Histogram bins")->capture_default_str();
  stats_cmd->add_option("--x-model", x_model, "First model of the pair")->capture_default_str();
  stats_cmd->add_option("--y-model", y_model, "Second model of the pair")->capture_default_str();
  stats_cmd->add_option("--min-seconds", min_seconds, "Minimum session duration")->capture_default_str();
  stats_cmd->callback([&] {
    action = [&] {
      const ResponseLog log = read_response_log(std::filesystem::path(responses_path));
      const FilterReport f = filter_sessions(log.sessions, log.responses, min_seconds);
      const RatioReport rx = correct_ratio_per_capita(f.responses, x_model);
      const RatioReport ry = correct_ratio_per_capita(f.responses, y_model);

      std::vector<double> scores;
      for (const auto& s : f.kept) {
        std::size_t total = 0, correct = 0;
        for (const auto& r : f.responses) {
          if (r.session_id != s.session_id) continue;
          ++total;
          correct += r.chose_real ? 1 : 0;
        }
        if (total > 0) scores.push_back(static_cast<double>(correct) / static_cast<double>(total));
      }
      const Histogram h = score_histogram(scores, bins);

      json report = {{"sessions_total", log.sessions.size()},
                     {"sessions_kept", f.kept.size()},
                     {"dropped_incomplete", f.dropped_incomplete},
                     {"dropped_too_fast", f.dropped_too_fast}};
      report["models"] = {
          {x_model, {{"answers", rx.pooled_total}, {"correct", rx.pooled_correct}, {"correct_ratio", rx.pooled_ratio()}}},
          {y_model, {{"answers", ry.pooled_total}, {"correct", ry.pooled_correct}, {"correct_ratio", ry.pooled_ratio()}}}};
      report["mean_score"] = h.mean ? json(*h.mean) : json(nullptr);
      const auto [xs, ys] = pair_by_session(rx.per_session, ry.per_session);
      try {
        const TTestResult t = paired_t_test(xs, ys);
        report["t_test"] = {{"n", t.n},          {"mean_diff", t.mean_diff}, {"std_diff", t.std_diff},
                            {"t_value", t.t_value}, {"p_value", t.p_value},     {"df", t.df()}};
      } catch (const Error& e) {
        report["t_test"] = {{"error", e.name()}, {"detail", e.what()}};
      }

      std::ostringstream csv;
      csv << "bin_low,bin_high,count\n";
      for (std::size_t b = 0; b < bins; ++b) {
        csv << static_cast<double>(b) / static_cast<double>(bins) << ','
            << static_cast<double>(b + 1) / static_cast<double>(bins) << ',' << h.counts[b] << '\n';
      }
      out << report.dump(2) << '\n';
      if (histogram_out.empty()) {
        out << csv.str();
      } else {
        std::ofstream hf(histogram_out);
        if (!hf) throw Error(ErrorCode::IoError, "cannot write " + histogram_out);
        hf << csv.str();
      }
      return 0;
    };
  });

  // roundtrip
  auto* rt = app.add_subcommand("roundtrip", "GAF encode/decode self-test on random windows");
  std::size_t rt_windows = 1000;
  rt->add_option("--windows", rt_windows, "Random windows to test")->capture_default_str();
  rt->add_option("--window", window_len, "Bars per window")->capture_default_str();
  rt->callback([&] {
    action = [&] {
      std::mt19937_64 rng(g.seed);
      std::uniform_real_distribution<double> price(1.0, 100.0);
      double decode_err = 0.0, dual_err = 0.0, price_err = 0.0;
      for (std::size_t i = 0; i < rt_windows; ++i) {
        std::vector<Candle> bars;
        for (std::size_t b = 0; b < window_len; ++b) {
          const double o = price(rng), c = price(rng);
          bars.push_back({o, std::max(o, c) + price(rng) * 0.01, std::min(o, c) * 0.99, c});
        }
        const CandleWindow w(std::move(bars));
        for (std::size_t ch = 0; ch < kNumChannels; ++ch) {
          const auto n = normalize(w.channel(ch));
          const auto m = gaf_encode(n.values);
          const auto back = gaf_decode(m);
          const auto alt = gaf_encode_products(n.values);
          for (std::size_t k = 0; k < back.size(); ++k) decode_err = std::max(decode_err, std::abs(back[k] - n.values[k]));
          for (std::size_t k = 0; k < m.data().size(); ++k) {
            dual_err = std::max(dual_err, std::abs(m.data()[k] - alt.data()[k]));
          }
        }
        const CandleWindow back = decode_tensor(encode_window(w));
        for (std::size_t b = 0; b < w.size(); ++b) {
          for (std::size_t ch = 0; ch < kNumChannels; ++ch) {
            const double a = w.channel(ch)[b], d = back.channel(ch)[b];
            price_err = std::max(price_err, std::abs(a - d) / std::abs(a));
          }
        }
      }
      const bool ok = decode_err < 1e-9 && dual_err < 1e-12 && price_err < 1e-6;
      out << "windows " << rt_windows << "\nmax_decode_error " << decode_err << "\nmax_dual_form_error " << dual_err
          << "\nmax_price_rel_error " << price_err << '\n'
          << (ok ? "PASS" : "FAIL") << '\n';
      return ok ? 0 : 1;
    };
  });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    err << "UsageError: " << e.what() << '\n';
    return 2;
  }
  try {
    return action ? action() : 2;
  } catch (const CLI::ValidationError& e) {
    err << "UsageError: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace candleaug
