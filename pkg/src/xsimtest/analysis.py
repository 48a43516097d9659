"""Scenario classification, front quality, statistics and failure diagnosis."""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .scene import GENES, TestInput

NEAR_MISS_DISTANCE = 1.0
NEAR_MISS_TTC = 0.5

CATEGORIES = ("1a", "1b", "1c", "2a", "2b", "2c")


class InsufficientDataError(ValueError):
    pass


class NotCriticalError(ValueError):
    pass


# -- classification -----------------------------------------------------------


@dataclass(frozen=True)
class ClassifiedScenario:
    outcome: Any
    critical: bool
    violation: bool


def classify(outcome) -> ClassifiedScenario:
    """Critical: collision or near miss. Violation: critical and never warned."""
    critical = bool(
        outcome.collision or outcome.ff1 <= NEAR_MISS_DISTANCE or outcome.ff3 <= NEAR_MISS_TTC
    )
    return ClassifiedScenario(outcome, critical, critical and not outcome.detected)


# -- hypervolume --------------------------------------------------------------


def _hv(points: np.ndarray, ref: np.ndarray) -> float:
    # slice along the last objective, recurse on the remaining ones
    if len(points) == 0:
        return 0.0
    if points.shape[1] == 1:
        return float(ref[0] - points[:, 0].min())
    order = np.argsort(points[:, -1], kind="stable")
    pts = points[order]
    volume = 0.0
    for i in range(len(pts)):
        top = pts[i + 1, -1] if i + 1 < len(pts) else ref[-1]
        depth = top - pts[i, -1]
        if depth > 0:
            volume += depth * _hv(pts[: i + 1, :-1], ref[:-1])
    return volume


def hypervolume(front, reference=(1.0, 1.0, 1.0)) -> float:
    """Exact volume dominated by ``front`` and bounded by ``reference``.

    Points that do not strictly dominate the reference point contribute
    nothing.
    """
    ref = np.asarray(reference, dtype=float)
    pts = np.asarray(front, dtype=float)
    if pts.size == 0:
        return 0.0
    if pts.ndim != 2 or pts.shape[1] != ref.shape[0]:
        raise ValueError(
            f"front of shape {pts.shape} does not match a {ref.shape[0]}-D reference point"
        )
    pts = pts[np.all(pts < ref, axis=1)]
    return _hv(pts, ref)


@dataclass(frozen=True)
class Bounds:
    lower: np.ndarray
    upper: np.ndarray

    def scale(self, values) -> np.ndarray:
        v = np.asarray(values, dtype=float)
        span = self.upper - self.lower
        safe = np.where(span > 0, span, 1.0)
        return np.where(span > 0, (v - self.lower) / safe, 0.0)

    def unscale(self, values) -> np.ndarray:
        return self.lower + np.asarray(values, dtype=float) * (self.upper - self.lower)


def normalize_objectives(objectives) -> tuple[np.ndarray, Bounds]:
    """Min-max scale each objective column over every supplied point."""
    arr = np.asarray(objectives, dtype=float)
    if arr.size == 0:
        raise ValueError("nothing to normalize")
    bounds = Bounds(arr.min(axis=0), arr.max(axis=0))
    return bounds.scale(arr), bounds


def run_hypervolumes(fronts: Sequence[Sequence[Sequence[float]]], reference=(1.0, 1.0, 1.0)) -> list[float]:
    """Hypervolume of each front after joint normalisation over all of them."""
    union = [p for f in fronts for p in f]
    _, bounds = normalize_objectives(union)
    return [hypervolume(bounds.scale(f) if len(f) else [], reference) for f in fronts]


# -- Mann-Whitney U -----------------------------------------------------------


@dataclass(frozen=True)
class MannWhitneyResult:
    u: float
    p: float
    exact: bool


def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    sv = values[order]
    i = 0
    while i < len(sv):
        j = i
        while j + 1 < len(sv) and sv[j + 1] == sv[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


EXACT_LIMIT = 12


def mann_whitney_u(a, b) -> MannWhitneyResult:
    """Two-sided Mann-Whitney U test; ``u`` is the statistic of sample ``a``.

    Small problems (``len(a) + len(b) <= 12``) get an exact p-value by
    enumerating every assignment of the pooled midranks to ``a``; larger
    ones use the tie-corrected normal approximation with continuity
    correction.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = len(a), len(b)
    if na == 0 or nb == 0:
        raise ValueError("both samples must be non-empty")
    ranks = _midranks(np.concatenate([a, b]))
    offset = na * (na + 1) / 2
    u = float(ranks[:na].sum() - offset)
    mean = na * nb / 2
    n = na + nb

    if n <= EXACT_LIMIT:
        observed = abs(u - mean)
        hits = total = 0
        for combo in itertools.combinations(range(n), na):
            total += 1
            if abs(ranks[list(combo)].sum() - offset - mean) >= observed - 1e-9:
                hits += 1
        return MannWhitneyResult(u, min(1.0, hits / total), True)

    ties = Counter(ranks.tolist()).values()
    tie_term = sum(t**3 - t for t in ties) / (n * (n - 1))
    var = na * nb / 12 * ((n + 1) - tie_term)
    if var <= 0:
        return MannWhitneyResult(u, 1.0, False)
    z = max(abs(u - mean) - 0.5, 0.0) / math.sqrt(var)
    return MannWhitneyResult(u, min(1.0, math.erfc(z / math.sqrt(2))), False)


# -- decision trees -----------------------------------------------------------


@dataclass
class TreeNode:
    n_samples: int
    counts: tuple[int, int]  # (safe, violation)
    label: bool
    gene: int | None = None
    threshold: float | None = None
    left: TreeNode | None = None  # gene < threshold
    right: TreeNode | None = None  # gene >= threshold

    @property
    def is_leaf(self) -> bool:
        return self.gene is None

    def predict_one(self, x) -> bool:
        node = self
        while not node.is_leaf:
            node = node.left if x[node.gene] < node.threshold else node.right
        return node.label

    def predict(self, X) -> np.ndarray:
        return np.array([self.predict_one(x) for x in _as_matrix(X)], dtype=bool)

    def leaves(self) -> list[TreeNode]:
        if self.is_leaf:
            return [self]
        return self.left.leaves() + self.right.leaves()

    def to_dict(self) -> dict:
        d: dict = {
            "n_samples": self.n_samples,
            "counts": {"False": self.counts[0], "True": self.counts[1]},
            "label": self.label,
        }
        if not self.is_leaf:
            d["gene"] = GENES[self.gene]
            d["threshold"] = self.threshold
            d["left"] = self.left.to_dict()
            d["right"] = self.right.to_dict()
        return d

    def render(self, names: Sequence[str] = GENES) -> str:
        lines: list[str] = []
        self._render(lines, 0, names)
        return "\n".join(lines) + "\n"

    def _render(self, lines, depth, names):
        pad = "    " * depth
        if self.is_leaf:
            lines.append(
                f"{pad}-> {self.label} (n={self.n_samples}; "
                f"False={self.counts[0]}, True={self.counts[1]})"
            )
            return
        name = names[self.gene]
        lines.append(f"{pad}{name} < {self.threshold:.4g}:")
        self.left._render(lines, depth + 1, names)
        lines.append(f"{pad}{name} >= {self.threshold:.4g}:")
        self.right._render(lines, depth + 1, names)


def _as_matrix(X) -> np.ndarray:
    rows = [x.as_array() if isinstance(x, TestInput) else np.asarray(x, dtype=float) for x in X]
    return np.asarray(rows, dtype=float).reshape(len(rows), -1)


def _gini(pos: float, n: float) -> float:
    if n == 0:
        return 0.0
    p = pos / n
    return 2.0 * p * (1.0 - p)


def _best_split(X: np.ndarray, y: np.ndarray, min_leaf: int):
    n = len(y)
    best = None  # (impurity, gene, threshold)
    total_pos = y.sum()
    for g in range(X.shape[1]):
        order = np.argsort(X[:, g], kind="stable")
        xs, ys = X[order, g], y[order]
        left_pos = np.cumsum(ys)
        for i in range(min_leaf, n - min_leaf + 1):
            # split between sorted positions i-1 and i
            if xs[i - 1] == xs[i]:
                continue
            lp = left_pos[i - 1]
            imp = (i * _gini(lp, i) + (n - i) * _gini(total_pos - lp, n - i)) / n
            if best is None or imp < best[0] - 1e-12:
                best = (imp, g, 0.5 * (xs[i - 1] + xs[i]))
    return best


def _grow(X, y, depth, max_depth, min_leaf) -> TreeNode:
    n = len(y)
    pos = int(y.sum())
    node = TreeNode(n, (n - pos, pos), label=pos >= n - pos)
    impurity = _gini(pos, n)
    if depth >= max_depth or impurity == 0.0 or n < 2 * min_leaf:
        return node
    split = _best_split(X, y, min_leaf)
    if split is None or split[0] >= impurity - 1e-12:
        return node
    _, g, thr = split
    mask = X[:, g] < thr
    node.gene, node.threshold = g, float(thr)
    node.left = _grow(X[mask], y[mask], depth + 1, max_depth, min_leaf)
    node.right = _grow(X[~mask], y[~mask], depth + 1, max_depth, min_leaf)
    return node


def tree_fit(inputs, labels, max_depth: int = 3, min_leaf: int = 10) -> TreeNode:
    """Fit a binary CART tree (Gini impurity) predicting violations from genes.

    Thresholds sit halfway between adjacent observed values. Leaves are
    labelled by majority with ties going to ``True`` (violation).
    """
    X = _as_matrix(inputs)
    y = np.asarray(labels, dtype=bool)
    if len(y) != len(X):
        raise ValueError("inputs and labels differ in length")
    if len(y) == 0 or len(y) < min_leaf:
        raise InsufficientDataError(f"need at least {max(min_leaf, 1)} samples, got {len(y)}")
    return _grow(X, y, 0, max_depth, min_leaf)


# -- cross-simulator reproduction ---------------------------------------------


def _classified(x) -> ClassifiedScenario:
    return x if isinstance(x, ClassifiedScenario) else classify(x)


def xsim_categorize(source, reproduced) -> str:
    source, reproduced = _classified(source), _classified(reproduced)
    if not source.critical:
        raise NotCriticalError("source scenario is not critical")
    prefix = "1" if source.violation else "2"
    if reproduced.violation:
        return prefix + "a"
    if reproduced.critical:
        return prefix + "b"
    return prefix + "c"


FF3_BIN_EDGES = np.arange(0.0, 4.0 + 0.5, 0.5)


def _histogram(values: Sequence[float], edges: np.ndarray) -> list[dict]:
    counts, edges = np.histogram(np.asarray(values, dtype=float), bins=edges)
    return [
        {"lo": float(lo), "hi": float(hi), "count": int(c)}
        for lo, hi, c in zip(edges[:-1], edges[1:], counts)
    ]


def _distance_edges(values) -> np.ndarray:
    top = max(1.0, math.ceil(max(values, default=0.0) + 1e-12))
    return np.arange(0.0, top + 1.0, 1.0)


@dataclass
class XSimReport:
    direction: str
    categories: list[str]
    counts: dict[str, int]
    differences: dict[str, list[float]]
    histograms: dict[str, list[dict]] = field(default_factory=dict)

    @property
    def source_unsafe(self) -> int:
        return self.counts["1a"] + self.counts["1b"] + self.counts["1c"]

    @property
    def source_safe(self) -> int:
        return self.counts["2a"] + self.counts["2b"] + self.counts["2c"]

    def to_dict(self) -> dict:
        return {
            "direction": self.direction,
            "total": len(self.categories),
            "source_unsafe": self.source_unsafe,
            "source_safe": self.source_safe,
            "counts": dict(self.counts),
            "categories": list(self.categories),
            "differences": {k: list(v) for k, v in self.differences.items()},
            "histograms": self.histograms,
        }


def count_categories(categories: Sequence[str]) -> dict[str, int]:
    c = Counter(categories)
    unknown = set(c) - set(CATEGORIES)
    if unknown:
        raise ValueError(f"unknown categories {sorted(unknown)}")
    return {k: c.get(k, 0) for k in CATEGORIES}


def xsim_report(pairs, direction: str = "A->B") -> XSimReport:
    """Categorise (source, reproduced) pairs and collect per-FF |differences|."""
    pairs = [(_classified(s), _classified(r)) for s, r in pairs]
    categories = [xsim_categorize(s, r) for s, r in pairs]
    diffs = {
        name: [abs(getattr(s.outcome, name) - getattr(r.outcome, name)) for s, r in pairs]
        for name in ("ff1", "ff2", "ff3")
    }
    hists = {
        "ff1": _histogram(diffs["ff1"], _distance_edges(diffs["ff1"])),
        "ff2": _histogram(diffs["ff2"], _distance_edges(diffs["ff2"])),
        "ff3": _histogram(diffs["ff3"], FF3_BIN_EDGES),
    }
    return XSimReport(direction, categories, count_categories(categories), diffs, hists)
