"""Transcription error metrics, from plain WER down to phonetic distance.

One Levenshtein engine drives everything; what varies is the cost model:

* WER / PER          — unit substitution/insertion/deletion costs
* weighted feature edit distance (WFED) — substitution costs the weighted L1
  distance between articulatory feature vectors, so pa->ba is a tiny error and
  pa->ka a large one
* Dolgopolsky error rate (DER) — substitution is free within a Dolgopolsky
  sound class and unit across classes, a coarse "could a human mishear this?"
  measure; the normalized form is the hallucination detector's core signal

Single-pair ``per``/``wfed``/``der`` return the raw accumulated distance;
corpus reports divide by total reference phones. Backtraces prefer
diagonal > deletion > insertion on ties so error attribution is deterministic.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class MetricsConfig:
    rare_threshold: int = 20

    def __post_init__(self):
        if self.rare_threshold < 1:
            raise ValueError(f"rare_threshold must be >= 1, got {self.rare_threshold}")


# -- cost models -------------------------------------------------------------

@dataclass(frozen=True)
class CostModel:
    """Pluggable edit costs; all must be non-negative."""
    sub: Callable[[str, str], float]
    ins: Callable[[str], float]
    delete: Callable[[str], float]

    @staticmethod
    def unit() -> "CostModel":
        return CostModel(
            sub=lambda a, b: 0.0 if a == b else 1.0,
            ins=lambda b: 1.0,
            delete=lambda a: 1.0,
        )


class FeatureTable:
    """Articulatory feature vectors with per-feature weights."""

    def __init__(self, feature_names, weights, vectors):
        self.feature_names = list(feature_names)
        self.weights = np.asarray(weights, dtype=np.float64)
        if np.any(self.weights < 0):
            raise ValueError("feature weights must be non-negative")
        self.vectors = {p: np.asarray(v, dtype=np.float64) for p, v in vectors.items()}
        for phone, vec in self.vectors.items():
            if vec.shape != self.weights.shape:
                raise ValueError(f"phone {phone!r} has {vec.shape[0]} features, "
                                 f"expected {self.weights.shape[0]}")

    def __contains__(self, phone: str) -> bool:
        return phone in self.vectors

    def vector(self, phone: str) -> np.ndarray:
        try:
            return self.vectors[phone]
        except KeyError:
            raise KeyError(f"phone not covered by feature table: {phone!r}") from None

    def sub_cost(self, a: str, b: str) -> float:
        return float(np.sum(self.weights * np.abs(self.vector(a) - self.vector(b))))

    def indel_cost(self) -> float:
        """Cost of inserting or deleting one phone: the largest possible
        substitution cost (all features differing).  Priced this way, aligning
        a phone to any other phone is never more expensive than dropping it,
        so feature-level near-misses always surface as cheap substitutions."""
        return float(np.sum(self.weights))

    @classmethod
    def load(cls, path) -> "FeatureTable":
        with open(path, encoding="utf-8") as f:
            rows = [line.rstrip("\n").split("\t") for line in f if line.strip()]
        if len(rows) < 3 or rows[0][0] != "phone" or rows[1][0] != "WEIGHT":
            raise ValueError(f"{path}: expected header row, WEIGHT row, phone rows")
        names = rows[0][1:]
        weights = [float(x) for x in rows[1][1:]]
        vectors = {}
        for row in rows[2:]:
            if len(row) != len(names) + 1:
                raise ValueError(f"{path}: row for {row[0]!r} has {len(row) - 1} values, "
                                 f"expected {len(names)}")
            if row[0] in vectors:
                raise ValueError(f"{path}: duplicate phone {row[0]!r}")
            vectors[row[0]] = [float(x) for x in row[1:]]
        return cls(names, weights, vectors)

    @classmethod
    def bundled(cls) -> "FeatureTable":
        path = resources.files("lookahead_rnnt") / "data" / "articulatory_features.tsv"
        return cls.load(str(path))


class ClusterMap:
    """Phone -> Dolgopolsky-style sound class."""

    def __init__(self, mapping: dict[str, str]):
        self.mapping = dict(mapping)

    def __contains__(self, phone: str) -> bool:
        return phone in self.mapping

    def cluster(self, phone: str) -> str:
        try:
            return self.mapping[phone]
        except KeyError:
            raise KeyError(f"phone not covered by cluster map: {phone!r}") from None

    def sub_cost(self, a: str, b: str) -> float:
        return 0.0 if self.cluster(a) == self.cluster(b) else 1.0

    @classmethod
    def load(cls, path) -> "ClusterMap":
        mapping = {}
        with open(path, encoding="utf-8") as f:
            for line in f:
                line = line.rstrip("\n")
                if not line.strip():
                    continue
                phone, _, cluster = line.partition("\t")
                if not cluster:
                    raise ValueError(f"{path}: expected 'phone<TAB>class', got {line!r}")
                if phone in mapping:
                    raise ValueError(f"{path}: duplicate phone {phone!r}")
                mapping[phone] = cluster
        return cls(mapping)

    @classmethod
    def bundled(cls) -> "ClusterMap":
        path = resources.files("lookahead_rnnt") / "data" / "dolgopolsky_classes.tsv"
        return cls.load(str(path))


# -- the one Levenshtein engine -----------------------------------------------

@dataclass(frozen=True)
class AlignStep:
    op: str                 # "match" | "sub" | "del" | "ins"
    ref_idx: int | None     # index into ref (None for ins)
    hyp_idx: int | None     # index into hyp (None for del)


def edit_distance(ref, hyp, costs: CostModel | None = None):
    """Minimum-cost alignment of two symbol sequences.

    Returns (distance, steps). Ties prefer diagonal over deletion over
    insertion, making the backtrace — and thus error attribution — a pure
    function of the inputs.
    """
    if costs is None:
        costs = CostModel.unit()
    ref, hyp = list(ref), list(hyp)
    n, m = len(ref), len(hyp)
    dist = np.zeros((n + 1, m + 1))
    for i in range(1, n + 1):
        dist[i, 0] = dist[i - 1, 0] + costs.delete(ref[i - 1])
    for j in range(1, m + 1):
        dist[0, j] = dist[0, j - 1] + costs.ins(hyp[j - 1])
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            dist[i, j] = min(
                dist[i - 1, j - 1] + costs.sub(ref[i - 1], hyp[j - 1]),
                dist[i - 1, j] + costs.delete(ref[i - 1]),
                dist[i, j - 1] + costs.ins(hyp[j - 1]),
            )
    steps: list[AlignStep] = []
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and dist[i, j] == dist[i - 1, j - 1] + costs.sub(ref[i - 1], hyp[j - 1]):
            op = "match" if ref[i - 1] == hyp[j - 1] else "sub"
            steps.append(AlignStep(op, i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and dist[i, j] == dist[i - 1, j] + costs.delete(ref[i - 1]):
            steps.append(AlignStep("del", i - 1, None))
            i -= 1
        else:
            steps.append(AlignStep("ins", None, j - 1))
            j -= 1
    steps.reverse()
    return float(dist[n, m]), steps


# -- word-level metrics ----------------------------------------------------------

@dataclass
class WerReport:
    rate: float
    errors: float
    ref_count: int
    subs: int = 0
    dels: int = 0
    ins: int = 0


def wer(refs, hyps) -> WerReport:
    """Corpus word error rate: total edits over total reference words.

    ``refs``/``hyps`` are parallel lists of word sequences (a single pair may
    be passed as one-element lists).
    """
    if len(refs) != len(hyps):
        raise ValueError(f"{len(refs)} references vs {len(hyps)} hypotheses")
    report = WerReport(0.0, 0.0, 0)
    for ref, hyp in zip(refs, hyps):
        dist, steps = edit_distance(ref, hyp)
        report.errors += dist
        report.ref_count += len(ref)
        for s in steps:
            if s.op == "sub":
                report.subs += 1
            elif s.op == "del":
                report.dels += 1
            elif s.op == "ins":
                report.ins += 1
    report.rate = report.errors / report.ref_count if report.ref_count else 0.0
    return report


@dataclass
class RareWerReport:
    rate: float
    errors: int
    rare_refs: int
    defined: bool   # False when the split contains no rare reference words


def rare_wer(refs, hyps, train_counts: dict[str, int],
             cfg: MetricsConfig = MetricsConfig()) -> RareWerReport:
    """WER restricted to rare reference positions.

    A reference word is rare when its training-corpus count is below
    ``cfg.rare_threshold`` (unseen words count as zero). Each rare reference
    position contributes one error if its aligned hypothesis word differs
    (substitution) or is missing (deletion); insertions have no reference
    position and are not counted here. 0/0 reports rate 0 with defined=False.
    """
    if len(refs) != len(hyps):
        raise ValueError(f"{len(refs)} references vs {len(hyps)} hypotheses")
    errors = 0
    rare_refs = 0
    for ref, hyp in zip(refs, hyps):
        is_rare = [train_counts.get(wd, 0) < cfg.rare_threshold for wd in ref]
        rare_refs += sum(is_rare)
        _, steps = edit_distance(ref, hyp)
        for s in steps:
            if s.op in ("sub", "del") and is_rare[s.ref_idx]:
                errors += 1
    if rare_refs == 0:
        return RareWerReport(0.0, 0, 0, defined=False)
    return RareWerReport(errors / rare_refs, errors, rare_refs, defined=True)


# -- phone-level metrics -----------------------------------------------------------

def per(ref_phones, hyp_phones) -> float:
    """Raw phone edit distance (unit costs)."""
    dist, _ = edit_distance(ref_phones, hyp_phones)
    return dist


def wfed(ref_phones, hyp_phones, table: FeatureTable, indel_cost: float | None = None) -> float:
    """Raw weighted feature edit distance.

    Substituting phones costs the weighted L1 distance between their feature
    vectors (an L1 metric, so substitution costs obey the triangle
    inequality).  Insertions and deletions default to the table's maximum
    substitution cost so the DP never converts a substitution into a cheaper
    delete+insert pair, which would erase the feature-level distinctions this
    metric exists to measure.
    """
    if indel_cost is None:
        indel_cost = table.indel_cost()
    costs = CostModel(
        sub=table.sub_cost,
        ins=lambda b: indel_cost,
        delete=lambda a: indel_cost,
    )
    dist, _ = edit_distance(ref_phones, hyp_phones, costs)
    return dist


def der(ref_phones, hyp_phones, clusters: ClusterMap) -> float:
    """Raw Dolgopolsky class edit distance (free subs within a class)."""
    costs = CostModel(
        sub=clusters.sub_cost,
        ins=lambda b: 1.0,
        delete=lambda a: 1.0,
    )
    dist, _ = edit_distance(ref_phones, hyp_phones, costs)
    return dist


def normalized_der(ref_phones, hyp_phones, clusters: ClusterMap) -> float:
    """DER scaled to [0, 1] by the longer sequence; 0 means 'sounds the same'."""
    return der(ref_phones, hyp_phones, clusters) / max(len(ref_phones), len(hyp_phones), 1)


# -- grapheme-to-phoneme --------------------------------------------------------------

def g2p(words, lexicon: dict[str, list[str]]):
    """Phone sequences for a word sequence, concatenated across words.

    Words missing from the lexicon fall back to one phone per character;
    the number of fallback words is returned so callers can surface it.
    """
    phones: list[str] = []
    fallbacks = 0
    for word in words:
        pron = lexicon.get(word)
        if pron is None:
            pron = list(word)
            fallbacks += 1
        phones.extend(pron)
    return phones, fallbacks


def load_lexicon(path) -> dict[str, list[str]]:
    lexicon: dict[str, list[str]] = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line.strip():
                continue
            word, _, pron = line.partition("\t")
            if not pron:
                raise ValueError(f"{path}: expected 'word<TAB>phones', got {line!r}")
            if word in lexicon:
                raise ValueError(f"{path}: duplicate word {word!r}")
            lexicon[word] = pron.split()
    return lexicon


def load_train_counts(path) -> dict[str, int]:
    counts: dict[str, int] = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line.strip():
                continue
            word, _, n = line.partition("\t")
            counts[word] = int(n)
    return counts


# -- corpus-level report ----------------------------------------------------------------

def score_corpus(refs, hyps, lexicon, train_counts,
                 cfg: MetricsConfig = MetricsConfig(),
                 table: FeatureTable | None = None,
                 clusters: ClusterMap | None = None):
    """All metrics over parallel word-sequence lists.

    Returns ordered (metric, value, count) rows; phone-level values are
    normalized per reference phone (raw totals are value * count).
    """
    if table is None:
        table = FeatureTable.bundled()
    if clusters is None:
        clusters = ClusterMap.bundled()
    w = wer(refs, hyps)
    rw = rare_wer(refs, hyps, train_counts, cfg)
    per_total = wfed_total = der_total = 0.0
    ref_phone_count = 0
    for ref, hyp in zip(refs, hyps):
        rp, _ = g2p(ref, lexicon)
        hp, _ = g2p(hyp, lexicon)
        per_total += per(rp, hp)
        wfed_total += wfed(rp, hp, table)
        der_total += der(rp, hp, clusters)
        ref_phone_count += len(rp)
    denom = ref_phone_count if ref_phone_count else 1
    return [
        ("wer", w.rate, w.ref_count),
        ("rare_wer", rw.rate, rw.rare_refs),
        ("per", per_total / denom, ref_phone_count),
        ("wfed", wfed_total / denom, ref_phone_count),
        ("der", der_total / denom, ref_phone_count),
    ]


def write_score_csv(path, rows) -> None:
    """rows: iterable of (metric, split, value, count)."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["metric", "split", "value", "count"])
        for metric, split, value, count in rows:
            writer.writerow([metric, split, f"{value:.8f}", count])
