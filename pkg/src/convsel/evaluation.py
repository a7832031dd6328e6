"""Accuracy accounting: per-language addressee / response / pair
accuracies and the macro averages used for multi-language scoring."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .corpus import Sample

METRICS = ("adr_res", "adr", "res")


@dataclass
class LanguageResult:
    lang: str
    n: int
    correct_adr: int
    correct_res: int
    correct_both: int
    r_size: int

    @property
    def adr(self) -> float:
        return 100.0 * self.correct_adr / self.n

    @property
    def res(self) -> float:
        return 100.0 * self.correct_res / self.n

    @property
    def adr_res(self) -> float:
        return 100.0 * self.correct_both / self.n

    def metrics(self) -> dict[str, float]:
        return {"adr_res": self.adr_res, "adr": self.adr, "res": self.res}


@dataclass
class EvalReport:
    method: str
    per_language: dict[str, LanguageResult]
    macro: dict[str, float]
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "per_language": {
                lang: {
                    "n": r.n,
                    "r_size": r.r_size,
                    "counts": {"adr": r.correct_adr, "res": r.correct_res,
                               "adr_res": r.correct_both},
                    "accuracy": {m: round(v, 2) for m, v in r.metrics().items()},
                }
                for lang, r in sorted(self.per_language.items())
            },
            "macro": {m: round(v, 2) for m, v in self.macro.items()},
            "meta": self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=True, indent=2)


def evaluate(predictor, samples: list[Sample]) -> LanguageResult:
    """Score a predictor on samples of a single language.

    ``predictor`` maps a sample to (addressee, response index); a pair
    counts for adr_res only when both parts are correct.
    """
    if not samples:
        raise ValueError("cannot evaluate on an empty sample set")
    langs = {s.lang for s in samples}
    if len(langs) > 1:
        raise ValueError(f"evaluate expects a single language, got {sorted(langs)}")
    r_sizes = {len(s.candidates) for s in samples}
    correct_adr = correct_res = correct_both = 0
    for s in samples:
        addressee, response = predictor(s)
        ok_a = addressee == s.truth_addressee
        ok_r = response == s.truth_index
        correct_adr += ok_a
        correct_res += ok_r
        correct_both += ok_a and ok_r
    return LanguageResult(
        lang=langs.pop(), n=len(samples),
        correct_adr=correct_adr, correct_res=correct_res, correct_both=correct_both,
        r_size=r_sizes.pop() if len(r_sizes) == 1 else -1,
    )


def macro_average(per_language: dict[str, LanguageResult] | list[LanguageResult]) -> dict[str, float]:
    """Unweighted mean of each metric over languages."""
    results = list(per_language.values()) if isinstance(per_language, dict) else list(per_language)
    if not results:
        raise ValueError("macro average of zero languages")
    return {m: sum(r.metrics()[m] for r in results) / len(results) for m in METRICS}


def build_report(method: str, per_language: dict[str, LanguageResult],
                 meta: dict | None = None) -> EvalReport:
    return EvalReport(method=method, per_language=per_language,
                      macro=macro_average(per_language), meta=meta or {})


def render_table(reports: list[EvalReport]) -> str:
    """Rows of methods against ADR-RES / ADR / RES, grouped by |R|."""
    by_rsize: dict[int, list[EvalReport]] = {}
    for rep in reports:
        sizes = {r.r_size for r in rep.per_language.values()}
        r_size = sizes.pop() if len(sizes) == 1 else 0
        by_rsize.setdefault(r_size, []).append(rep)

    lines = []
    header = f"{'Method':<12} {'ADR-RES':>8} {'ADR':>8} {'RES':>8}"
    for r_size in sorted(by_rsize):
        label = f"|R| = {r_size}" if r_size else "|R| mixed"
        lines.append(label)
        lines.append(header)
        lines.append("-" * len(header))
        for rep in by_rsize[r_size]:
            m = rep.macro
            lines.append(f"{rep.method:<12} {m['adr_res']:>8.2f} {m['adr']:>8.2f} {m['res']:>8.2f}")
            for lang, r in sorted(rep.per_language.items()):
                lines.append(f"  {lang:<10} {r.adr_res:>8.2f} {r.adr:>8.2f} {r.res:>8.2f}")
        lines.append("")
    return "\n".join(lines).rstrip() + "\n"
