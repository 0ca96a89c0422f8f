"""Extractive evaluation: relation generation, content selection, content
ordering, corpus BLEU, duplicate-relation statistics, and a PCA projection
for embedding inspection.

Relations are (entity, attribute, value) triples recovered from text with
the same resolution rules the annotator uses for supervision; name-anchor
attributes (first/last name, city, team name) ground entities and are not
themselves counted as relations.  Content selection compares relation sets
(duplicates collapsed); content ordering compares the full extracted
sequences with an optimal-string-alignment edit distance, normalized by the
longer length.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Hashable, Optional, Sequence

import numpy as np

from .annotator import annotate
from .records import GameData, NAME_ATTRIBUTES

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Relation:
    entity_id: str
    attribute_id: str
    value: str


RelationSeq = tuple[Relation, ...]


def extract_relations(tokens: Sequence[str], game: GameData) -> RelationSeq:
    """Relations mentioned by a token sequence, in textual order."""
    labels = annotate(game, tuple(tokens))
    out = []
    for t in range(len(labels.tokens)):
        if labels.z[t] == 1 and labels.a[t] not in NAME_ATTRIBUTES:
            value = game.value(labels.e[t], labels.a[t])
            out.append(Relation(labels.e[t], labels.a[t], value))
    return tuple(out)


def rg(cand: RelationSeq, game: GameData) -> tuple[int, float]:
    """Relation generation: count of extracted relations and the percentage
    of them that exist in the game's records.  An empty sequence reports
    precision 100 with count 0 (flagged in the log)."""
    if not cand:
        logger.info("rg: empty candidate relation sequence for %s", game.game_id)
        return 0, 100.0
    good = sum(1 for r in cand if game.has_record(r.entity_id, r.attribute_id, r.value))
    return len(cand), 100.0 * good / len(cand)


def cs(cand: RelationSeq, ref: RelationSeq) -> tuple[float, float, float]:
    """Content selection precision/recall/F1 over relation sets (percent)."""
    cand_set, ref_set = set(cand), set(ref)
    if not ref_set:
        logger.info("cs: empty reference relation set")
        return 0.0, 0.0, 0.0
    if not cand_set:
        return 0.0, 0.0, 0.0
    hit = len(cand_set & ref_set)
    p = 100.0 * hit / len(cand_set)
    r = 100.0 * hit / len(ref_set)
    f1 = 0.0 if p + r == 0 else 2 * p * r / (p + r)
    return p, r, f1


def dld(a: Sequence[Hashable], b: Sequence[Hashable], variant: str = "osa") -> int:
    """Damerau-Levenshtein distance between two sequences.

    variant="osa" (default) is optimal string alignment: substitution,
    insertion, deletion, and adjacent transposition, with no substring
    edited twice.  variant="full" allows unrestricted transpositions.
    """
    if variant == "osa":
        return _dld_osa(a, b)
    if variant == "full":
        return _dld_unrestricted(a, b)
    raise ValueError(f"unknown dld variant {variant!r}")


def _dld_osa(a: Sequence[Hashable], b: Sequence[Hashable]) -> int:
    la, lb = len(a), len(b)
    d = np.zeros((la + 1, lb + 1), dtype=np.int64)
    d[:, 0] = np.arange(la + 1)
    d[0, :] = np.arange(lb + 1)
    for i in range(1, la + 1):
        for j in range(1, lb + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            best = min(d[i - 1, j] + 1, d[i, j - 1] + 1, d[i - 1, j - 1] + cost)
            if i > 1 and j > 1 and a[i - 1] == b[j - 2] and a[i - 2] == b[j - 1]:
                best = min(best, d[i - 2, j - 2] + 1)
            d[i, j] = best
    return int(d[la, lb])


def _dld_unrestricted(a: Sequence[Hashable], b: Sequence[Hashable]) -> int:
    la, lb = len(a), len(b)
    max_dist = la + lb
    alphabet: dict[Hashable, int] = {}
    d = np.zeros((la + 2, lb + 2), dtype=np.int64)
    d[0, :] = max_dist
    d[:, 0] = max_dist
    d[1, 1:] = np.arange(lb + 1)
    d[1:, 1] = np.arange(la + 1)
    last_row = {}
    for i in range(1, la + 1):
        last_col = 0
        for j in range(1, lb + 1):
            i_prev = last_row.get(b[j - 1], 0)
            j_prev = last_col
            cost = 0 if a[i - 1] == b[j - 1] else 1
            if cost == 0:
                last_col = j
            d[i + 1, j + 1] = min(
                d[i, j] + cost,
                d[i + 1, j] + 1,
                d[i, j + 1] + 1,
                d[i_prev, j_prev] + (i - i_prev - 1) + 1 + (j - j_prev - 1),
            )
        last_row[a[i - 1]] = i
    return int(d[la + 1, lb + 1])


def co(cand: RelationSeq, ref: RelationSeq, variant: str = "osa") -> float:
    """Content ordering: 100 * (1 - dld / max(len)); two empty sequences
    count as identical (100)."""
    longer = max(len(cand), len(ref))
    if longer == 0:
        return 100.0
    return 100.0 * (1.0 - dld(cand, ref, variant) / longer)


# --------------------------------------------------------------------------
# Corpus BLEU


@dataclass
class BleuResult:
    score: float
    precisions: tuple[float, float, float, float]
    brevity_penalty: float
    candidate_length: int
    reference_length: int
    flags: list[str] = field(default_factory=list)


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def corpus_bleu(
    candidates: Sequence[Sequence[str]],
    references: Sequence[Sequence[str]],
    max_order: int = 4,
) -> BleuResult:
    """Corpus-level BLEU on 0..100: uniform-weight geometric mean of the
    clipped n-gram precisions up to 4-grams, times the brevity penalty.
    No smoothing: any empty precision bucket scores 0."""
    if len(candidates) != len(references):
        raise ValueError("candidate and reference corpora differ in size")
    matched = [0] * max_order
    total = [0] * max_order
    cand_len = 0
    ref_len = 0
    for cand, ref in zip(candidates, references):
        cand, ref = list(cand), list(ref)
        cand_len += len(cand)
        ref_len += len(ref)
        for n in range(1, max_order + 1):
            cand_counts = _ngrams(cand, n)
            ref_counts = _ngrams(ref, n)
            total[n - 1] += max(0, len(cand) - n + 1)
            matched[n - 1] += sum(
                min(count, ref_counts[gram]) for gram, count in cand_counts.items()
            )
    flags = []
    if cand_len == 0:
        flags.append("empty-candidate-corpus")
        return BleuResult(0.0, (0.0,) * max_order, 0.0, 0, ref_len, flags)
    precisions = tuple(
        (matched[i] / total[i]) if total[i] > 0 else 0.0 for i in range(max_order)
    )
    bp = 1.0 if cand_len > ref_len else math.exp(1.0 - ref_len / cand_len)
    if any(p == 0.0 for p in precisions):
        score = 0.0
        flags.append("zero-precision-bucket")
    else:
        score = 100.0 * bp * math.exp(sum(math.log(p) for p in precisions) / max_order)
    return BleuResult(score, precisions, bp, cand_len, ref_len, flags)


# --------------------------------------------------------------------------
# Duplicate-relation statistics


@dataclass
class DuplicateStats:
    histogram: dict[int, int]  # duplicated-relation count -> number of summaries
    ratio: float  # share of summaries with at least one duplicate

    def as_dict(self) -> dict:
        return {"histogram": {str(k): v for k, v in sorted(self.histogram.items())},
                "ratio": self.ratio}


def duplicate_stats(relation_seqs: Sequence[RelationSeq]) -> DuplicateStats:
    """Per-summary count of relations mentioned more than once."""
    histogram: dict[int, int] = {}
    with_dups = 0
    for seq in relation_seqs:
        dups = sum(1 for _, cnt in Counter(seq).items() if cnt > 1)
        histogram[dups] = histogram.get(dups, 0) + 1
        with_dups += dups > 0
    ratio = 100.0 * with_dups / len(relation_seqs) if relation_seqs else 0.0
    return DuplicateStats(histogram=histogram, ratio=ratio)


# --------------------------------------------------------------------------
# PCA projection


def pca_project(vectors: np.ndarray, k: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Top-k principal-component coordinates of row vectors.

    Eigen-decomposition of the centered covariance; components are ordered
    by decreasing eigenvalue and signed so that each component's
    largest-magnitude coordinate is positive.  Returns (coordinates (n, k),
    explained variance ratio (k,))."""
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-d array of row vectors, got shape {x.shape}")
    n, d = x.shape
    if not 1 <= k <= d:
        raise ValueError(f"k must be in [1, {d}]")
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / max(1, n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.maximum(eigvals[order], 0.0)
    components = eigvecs[:, order[:k]]
    for j in range(k):
        peak = np.argmax(np.abs(components[:, j]))
        if components[peak, j] < 0:
            components[:, j] = -components[:, j]
    coords = centered @ components
    total = eigvals.sum()
    explained = eigvals[:k] / total if total > 0 else np.zeros(k)
    return coords, explained


# --------------------------------------------------------------------------
# Corpus-level report


@dataclass
class MetricReport:
    rg_count: float
    rg_precision: float
    cs_precision: float
    cs_recall: float
    cs_f1: float
    co_score: float
    bleu: float
    duplicates: DuplicateStats
    n_games: int
    flags: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "n_games": self.n_games,
            "rg_count": round(self.rg_count, 4),
            "rg_precision": round(self.rg_precision, 4),
            "cs_precision": round(self.cs_precision, 4),
            "cs_recall": round(self.cs_recall, 4),
            "cs_f1": round(self.cs_f1, 4),
            "co_score": round(self.co_score, 4),
            "bleu": round(self.bleu, 4),
            "duplicates": self.duplicates.as_dict(),
            "flags": self.flags,
        }


def evaluate_corpus(
    generated: Sequence[Sequence[str]],
    references: Sequence[Sequence[str]],
    games: Sequence[GameData],
    dld_variant: str = "osa",
) -> MetricReport:
    """Full extractive report for aligned generated/reference corpora.

    RG precision pools correct relations over the corpus; RG count, CS, and
    CO average per game; BLEU is corpus-level.  F1 is the harmonic mean of
    the reported precision and recall."""
    if not (len(generated) == len(references) == len(games)):
        raise ValueError("generated, references, and games must align")
    if not games:
        raise ValueError("nothing to evaluate")
    flags: list[str] = []
    cand_seqs = [extract_relations(toks, g) for toks, g in zip(generated, games)]
    ref_seqs = [extract_relations(toks, g) for toks, g in zip(references, games)]
    rg_correct = rg_total = 0
    cs_p_sum = cs_r_sum = co_sum = 0.0
    for cand, ref, game in zip(cand_seqs, ref_seqs, games):
        count, _ = rg(cand, game)
        rg_total += count
        rg_correct += sum(
            1 for r in cand if game.has_record(r.entity_id, r.attribute_id, r.value)
        )
        if not ref:
            flags.append(f"empty-reference-relations:{game.game_id}")
        p, r, _ = cs(cand, ref)
        cs_p_sum += p
        cs_r_sum += r
        co_sum += co(cand, ref, dld_variant)
    n = len(games)
    rg_precision = 100.0 * rg_correct / rg_total if rg_total else 100.0
    if not rg_total:
        flags.append("no-candidate-relations")
    cs_p, cs_r = cs_p_sum / n, cs_r_sum / n
    cs_f1 = 0.0 if cs_p + cs_r == 0 else 2 * cs_p * cs_r / (cs_p + cs_r)
    bleu = corpus_bleu(generated, references)
    flags.extend(bleu.flags)
    return MetricReport(
        rg_count=rg_total / n,
        rg_precision=rg_precision,
        cs_precision=cs_p,
        cs_recall=cs_r,
        cs_f1=cs_f1,
        co_score=co_sum / n,
        bleu=bleu.score,
        duplicates=duplicate_stats(cand_seqs),
        n_games=n,
        flags=flags,
    )
