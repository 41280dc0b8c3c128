#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "candleaug/classifier.hpp"
#include "candleaug/dataset.hpp"
#include "candleaug/error.hpp"
#include "candleaug/gaf.hpp"
#include "candleaug/ohlc.hpp"
#include "candleaug/sampler.hpp"
#include "candleaug/stats.hpp"

namespace py = pybind11;
using namespace candleaug;

namespace {

using Bars = std::vector<std::array<double, 4>>;

CandleWindow to_window(const Bars& bars) {
  std::vector<Candle> out;
  out.reserve(bars.size());
  for (const auto& b : bars) out.push_back({b[0], b[1], b[2], b[3]});
  return CandleWindow(std::move(out));
}

Bars from_window(const CandleWindow& w) {
  Bars out;
  for (const auto& c : w) out.push_back({c.open, c.high, c.low, c.close});
  return out;
}

std::vector<std::vector<double>> matrix_rows(const GafMatrix& m) {
  std::vector<std::vector<double>> rows(m.size(), std::vector<double>(m.size()));
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = 0; j < m.size(); ++j) rows[i][j] = m(i, j);
  }
  return rows;
}

}  // namespace

PYBIND11_MODULE(_candleaug, m) {
  m.doc() = "Candlestick GAF encoding, pattern rules, attack sampling and study statistics";

  static py::exception<Error> error_type(m, "CandleaugError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error_type, e.what());
    }
  });

  py::enum_<PatternLabel>(m, "PatternLabel")
      .value("None_", PatternLabel::None)
      .value("MorningStar", PatternLabel::MorningStar)
      .value("EveningStar", PatternLabel::EveningStar)
      .value("BullishEngulfing", PatternLabel::BullishEngulfing)
      .value("BearishEngulfing", PatternLabel::BearishEngulfing)
      .value("ShootingStar", PatternLabel::ShootingStar)
      .value("InvertedHammer", PatternLabel::InvertedHammer)
      .value("BullishHarami", PatternLabel::BullishHarami)
      .value("BearishHarami", PatternLabel::BearishHarami);

  py::class_<Candle>(m, "Candle")
      .def(py::init([](double o, double h, double l, double c) { return Candle{o, h, l, c}; }), py::arg("open"),
           py::arg("high"), py::arg("low"), py::arg("close"))
      .def_readwrite("open", &Candle::open)
      .def_readwrite("high", &Candle::high)
      .def_readwrite("low", &Candle::low)
      .def_readwrite("close", &Candle::close)
      .def("valid", &Candle::valid)
      .def("__repr__", [](const Candle& c) {
        return "Candle(" + std::to_string(c.open) + ", " + std::to_string(c.high) + ", " + std::to_string(c.low) +
               ", " + std::to_string(c.close) + ")";
      });

  m.def("anatomy", [](const Candle& c) {
    const auto a = anatomy(c);
    const char* dir = a.direction == Direction::White ? "white" : (a.direction == Direction::Black ? "black" : "doji");
    return py::dict(py::arg("body") = a.body, py::arg("upper_shadow") = a.upper_shadow,
                    py::arg("lower_shadow") = a.lower_shadow, py::arg("direction") = dir);
  });
  m.def("repair", &repair);
  m.def("match_pattern", [](const Bars& bars) { return match_pattern(to_window(bars)); }, py::arg("window"));

  m.def("normalize", [](const std::vector<double>& xs) {
    auto n = normalize(xs);
    return py::make_tuple(n.values, n.scale.min, n.scale.max);
  });
  m.def("gaf_encode", [](const std::vector<double>& x) { return matrix_rows(gaf_encode(x)); });
  m.def("gaf_decode", [](const std::vector<std::vector<double>>& rows) {
    GafMatrix g(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows.size()) throw Error(ErrorCode::ShapeMismatch, "matrix must be square");
      for (std::size_t j = 0; j < rows.size(); ++j) g(i, j) = rows[i][j];
    }
    return gaf_decode(g);
  });
  m.def("roundtrip_window", [](const Bars& bars) { return from_window(decode_tensor(encode_window(to_window(bars)))); },
        "Encode a window to per-channel GAFs and decode it back.");
  m.def("rule_predict", [](const Bars& bars) { return rule_classifier_predict(encode_window(to_window(bars))); });

  m.def(
      "sample",
      [](const Bars& seed, std::size_t episodes, std::uint64_t rng_seed, double scale_low, double scale_high,
         std::size_t reset_period) {
        SamplerConfig cfg{scale_low, scale_high, reset_period, episodes, rng_seed};
        RuleClassifier clf;
        py::list out;
        for (const auto& s : run(to_window(seed), clf, cfg)) {
          out.append(py::make_tuple(from_window(s.window), s.label, s.episode));
        }
        return out;
      },
      py::arg("seed_window"), py::arg("episodes") = 30, py::arg("seed") = 0, py::arg("scale_low") = 0.99,
      py::arg("scale_high") = 1.01, py::arg("reset_period") = 3,
      "Local search attack sampling with the rule classifier; returns (window, label, episode) tuples.");

  m.def(
      "synthesize",
      [](PatternLabel label, std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        return from_window(synthesize_pattern(label, rng));
      },
      py::arg("label"), py::arg("seed") = 0);

  py::class_<TTestResult>(m, "TTestResult")
      .def_readonly("n", &TTestResult::n)
      .def_readonly("mean_diff", &TTestResult::mean_diff)
      .def_readonly("std_diff", &TTestResult::std_diff)
      .def_readonly("t_value", &TTestResult::t_value)
      .def_readonly("p_value", &TTestResult::p_value)
      .def_property_readonly("df", &TTestResult::df);
  m.def("paired_t_test", [](const std::vector<double>& xs, const std::vector<double>& ys) {
    return paired_t_test(xs, ys);
  });
  m.def("student_t_two_sided_p", &student_t_two_sided_p);
  m.def("score_histogram", [](const std::vector<double>& scores, std::size_t bins) {
    const auto h = score_histogram(scores, bins);
    return py::make_tuple(h.counts, h.mean ? py::cast(*h.mean) : py::none());
  });
}
