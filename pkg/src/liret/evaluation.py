"""Graded-relevance retrieval metrics, TREC-format I/O, and paired t-tests.

Metric conventions follow trec_eval: linear gain with a log2(rank+1)
discount for nDCG, binarization at ``grade >= min_grade`` for MRR, MAP and
recall, and unjudged documents counting as grade 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np


@dataclass(frozen=True)
class SigResult:
    t_statistic: float
    p_value: float
    adjusted_alpha: float
    significant: bool


class Judgments:
    """(query id, doc id) -> relevance grade; unjudged pairs are grade 0."""

    def __init__(self, grades: Mapping[tuple[str, str], int] | None = None):
        self._by_query: dict[str, dict[str, int]] = {}
        if grades:
            for (qid, docid), g in grades.items():
                self.add(qid, docid, g)

    def add(self, qid: str, docid: str, grade: int) -> None:
        grade = int(grade)
        if grade < 0:
            raise ValueError("grades must be >= 0")
        self._by_query.setdefault(str(qid), {})[str(docid)] = grade

    def grade(self, qid: str, docid: str) -> int:
        return self._by_query.get(qid, {}).get(docid, 0)

    def judged(self, qid: str) -> Mapping[str, int]:
        return self._by_query.get(qid, {})

    def qualifying(self, qid: str, min_grade: int) -> int:
        return sum(1 for g in self._by_query.get(qid, {}).values() if g >= min_grade)

    def __len__(self) -> int:
        return sum(len(d) for d in self._by_query.values())

    @classmethod
    def from_trec(cls, path) -> "Judgments":
        judg = cls()
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 'qid 0 docid grade'")
            judg.add(parts[0], parts[2], int(parts[3]))
        return judg

    def to_trec(self, path) -> None:
        lines = []
        for qid in self._by_query:
            for docid, grade in self._by_query[qid].items():
                lines.append(f"{qid} 0 {docid} {grade}")
        Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


class RunList:
    """Per-query rankings, each ordered by descending score."""

    def __init__(self):
        self._entries: dict[str, list[tuple[str, float]]] = {}

    def set_query(self, qid: str, entries: Sequence[tuple[str, float]]) -> None:
        qid = str(qid)
        seen = set()
        prev = math.inf
        cleaned = []
        for docid, score in entries:
            docid = str(docid)
            score = float(score)
            if not math.isfinite(score):
                raise ValueError(f"non-finite score for query {qid}, doc {docid}")
            if docid in seen:
                raise ValueError(f"duplicate doc {docid} in query {qid}")
            if score > prev:
                raise ValueError(f"scores for query {qid} are not descending")
            seen.add(docid)
            prev = score
            cleaned.append((docid, score))
        self._entries[qid] = cleaned

    def queries(self) -> list[str]:
        return list(self._entries)

    def ranking(self, qid: str) -> list[tuple[str, float]]:
        return self._entries[str(qid)]

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other) -> bool:
        return isinstance(other, RunList) and self._entries == other._entries

    @classmethod
    def from_trec(cls, path) -> "RunList":
        grouped: dict[str, list[tuple[int, str, float]]] = {}
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 6:
                raise ValueError(f"{path}:{lineno}: expected 'qid Q0 docid rank score tag'")
            qid, _, docid, rank, score, _ = parts
            grouped.setdefault(qid, []).append((int(rank), docid, float(score)))
        run = cls()
        for qid, rows in grouped.items():
            rows.sort(key=lambda r: r[0])
            run.set_query(qid, [(docid, score) for _, docid, score in rows])
        return run

    def to_trec(self, path, tag: str = "liret") -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for qid in self._entries:
                for rank, (docid, score) in enumerate(self._entries[qid], start=1):
                    fh.write(f"{qid} Q0 {docid} {rank} {score:.6f} {tag}\n")


def ndcg_at_k(run: RunList, judgments: Judgments, k: int) -> dict[str, float]:
    """nDCG@k with linear gain; the ideal ranking uses all judged docs."""
    if k < 1:
        raise ValueError("k must be >= 1")
    out = {}
    for qid in run.queries():
        dcg = 0.0
        for rank, (docid, _) in enumerate(run.ranking(qid)[:k], start=1):
            g = judgments.grade(qid, docid)
            if g:
                dcg += g / math.log2(rank + 1)
        ideal = sorted(judgments.judged(qid).values(), reverse=True)[:k]
        idcg = sum(g / math.log2(r + 1) for r, g in enumerate(ideal, start=1) if g)
        out[qid] = dcg / idcg if idcg > 0 else 0.0
    return out


def mrr_at_k(run: RunList, judgments: Judgments, k: int, min_grade: int) -> dict[str, float]:
    """Reciprocal rank of the first doc with grade >= min_grade in the top k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if min_grade < 1:
        raise ValueError("min_grade must be >= 1")
    out = {}
    for qid in run.queries():
        value = 0.0
        for rank, (docid, _) in enumerate(run.ranking(qid)[:k], start=1):
            if judgments.grade(qid, docid) >= min_grade:
                value = 1.0 / rank
                break
        out[qid] = value
    return out


def map_metric(run: RunList, judgments: Judgments, min_grade: int) -> dict[str, float]:
    """Average precision over the full run, binarized at min_grade.

    The denominator is the number of qualifying docs in the judgments, so
    unretrieved relevant docs count against the score.
    """
    if min_grade < 1:
        raise ValueError("min_grade must be >= 1")
    out = {}
    for qid in run.queries():
        total = judgments.qualifying(qid, min_grade)
        if total == 0:
            out[qid] = 0.0
            continue
        hits = 0
        precision_sum = 0.0
        for rank, (docid, _) in enumerate(run.ranking(qid), start=1):
            if judgments.grade(qid, docid) >= min_grade:
                hits += 1
                precision_sum += hits / rank
        out[qid] = precision_sum / total
    return out


def recall_at_k(run: RunList, judgments: Judgments, k: int, min_grade: int) -> dict[str, float]:
    """Fraction of qualifying docs retrieved in the top k."""
    if k < 0:
        raise ValueError("k must be >= 0")
    if min_grade < 1:
        raise ValueError("min_grade must be >= 1")
    out = {}
    for qid in run.queries():
        total = judgments.qualifying(qid, min_grade)
        if total == 0 or k == 0:
            out[qid] = 0.0
            continue
        hits = sum(
            1
            for docid, _ in run.ranking(qid)[:k]
            if judgments.grade(qid, docid) >= min_grade
        )
        out[qid] = hits / total
    return out


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    """Modified Lentz continued fraction for the incomplete beta integral."""
    max_iter = 500
    eps = 1e-15
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b), accurate to roughly 1e-10 over the t-test range."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b


def student_t_two_sided_p(t: float, df: int) -> float:
    """P(|T| >= |t|) for a Student t variable with ``df`` degrees of freedom."""
    if df < 1:
        raise ValueError("df must be >= 1")
    if math.isinf(t):
        return 0.0
    return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))


def paired_t_test(a: Sequence[float], b: Sequence[float], alpha: float = 0.05) -> SigResult:
    """Two-sided paired t-test on per-query differences.

    All-zero differences are a degenerate tie and report p = 1 by
    convention; identical nonzero differences give p = 0.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or a.shape != b.shape:
        raise ValueError("inputs must be 1-d and paired")
    n = a.size
    if n < 2:
        raise ValueError("need at least two paired observations")
    d = a - b
    if not np.any(d != 0.0):
        return SigResult(0.0, 1.0, alpha, False)
    sd = float(d.std(ddof=1))
    mean = float(d.mean())
    if sd == 0.0:
        t = math.inf if mean > 0 else -math.inf
    else:
        t = mean / (sd / math.sqrt(n))
    p = student_t_two_sided_p(t, n - 1)
    return SigResult(float(t), p, alpha, p < alpha)


def bonferroni(p_values: Iterable[float], alpha: float = 0.05) -> list[SigResult]:
    """Divide alpha by the family size; significant iff p < alpha/m."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    ps = [float(p) for p in p_values]
    if not ps:
        raise ValueError("empty p-value family")
    adjusted = alpha / len(ps)
    return [SigResult(math.nan, p, adjusted, p < adjusted) for p in ps]
