"""Python bindings for the candleaug C++ core."""

from ._candleaug import (  # noqa: F401
    Candle,
    CandleaugError,
    PatternLabel,
    TTestResult,
    anatomy,
    gaf_decode,
    gaf_encode,
    match_pattern,
    normalize,
    paired_t_test,
    repair,
    roundtrip_window,
    rule_predict,
    sample,
    score_histogram,
    student_t_two_sided_p,
    synthesize,
)

__all__ = [
    "Candle",
    "CandleaugError",
    "PatternLabel",
    "TTestResult",
    "anatomy",
    "gaf_decode",
    "gaf_encode",
    "match_pattern",
    "normalize",
    "paired_t_test",
    "repair",
    "roundtrip_window",
    "rule_predict",
    "sample",
    "score_histogram",
    "student_t_two_sided_p",
    "synthesize",
]
