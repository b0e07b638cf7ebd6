"""Maximum-weight bipartite assignment with one-sided capacities.

Rows are matched at most once; column c may be matched up to
``col_multiplicity[c]`` times (a destination with m transceivers is m
interchangeable vertices). Matching is always optional: pairs with
nonpositive weight are never matched, since leaving them out is at least
as good. Among equal-weight optima the solver returns the
lexicographically smallest matching by (row, col), which keeps every
caller deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ConfigError, OracleSizeError

Matching = list[tuple[int, int]]


@dataclass(frozen=True)
class AssignmentProblem:
    """weights[r, c] is the gain of matching row r to column c;
    col_multiplicity[c] is how many rows column c can absorb."""

    weights: np.ndarray
    col_multiplicity: tuple[int, ...]

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 2:
            raise ConfigError("weights must be a 2-D matrix")
        if not np.all(np.isfinite(w)):
            raise ConfigError("weights must be finite")
        object.__setattr__(self, "weights", w)
        mult = tuple(int(m) for m in self.col_multiplicity)
        if len(mult) != w.shape[1]:
            raise ConfigError("col_multiplicity must have one entry per column")
        if any(m < 1 for m in mult):
            raise ConfigError("column multiplicities must be positive")
        object.__setattr__(self, "col_multiplicity", mult)


def _best_completion(
    weights: np.ndarray, rows: list[int], caps: list[int]
) -> tuple[list[float], dict[int, int]]:
    """Optimal partial matching of `rows` into columns with remaining
    capacities `caps`, using only positive weights.

    Returns the matched weight list and a row -> column map. Columns are
    replicated per remaining capacity and negative weights clamped out, so
    a plain rectangular solve yields the optional-matching optimum.
    """
    if not rows:
        return [], {}
    col_ids = [c for c, cap in enumerate(caps) for _ in range(cap)]
    if not col_ids:
        return [], {}
    sub = np.maximum(weights[np.ix_(rows, col_ids)], 0.0)
    rr, cc = linear_sum_assignment(sub, maximize=True)
    picked_w: list[float] = []
    picked: dict[int, int] = {}
    for a, b in zip(rr, cc):
        w = weights[rows[a], col_ids[b]]
        if w > 0.0:
            picked_w.append(float(w))
            picked[rows[a]] = col_ids[b]
    return picked_w, picked


def max_weight_assignment(p: AssignmentProblem) -> tuple[Matching, float]:
    """Globally optimal partial matching, lexicographically smallest
    among ties.

    A first solve fixes the optimal total. Rows are then committed in
    index order: a row keeps the smallest column that still completes to
    the optimal total, verified by re-solving the remainder; columns
    already agreeing with the incumbent optimum are committed without a
    solve. Totals are compared as correctly-rounded sums (math.fsum), so
    the equality test is exact for any weight multiset.
    """
    weights = p.weights
    R, C = weights.shape
    caps = list(p.col_multiplicity)
    all_rows = list(range(R))

    base_w, incumbent = _best_completion(weights, all_rows, caps)
    best_total = math.fsum(base_w)
    if not incumbent:
        return [], 0.0

    matching: Matching = []
    fixed_w: list[float] = []
    for r in range(R):
        options = [c for c in range(C) if caps[c] > 0 and weights[r, c] > 0.0]
        if not options:
            incumbent.pop(r, None)
            continue
        kept = incumbent.get(r)
        if kept is not None:
            options = [c for c in options if c < kept]

        chosen = None
        rest = [r2 for r2 in range(r + 1, R)]
        for c in options:
            caps[c] -= 1
            tail_w, tail_map = _best_completion(weights, rest, caps)
            trial = math.fsum(fixed_w + [weights[r, c]] + tail_w)
            if trial == best_total:
                chosen = c
                incumbent = tail_map
                break
            caps[c] += 1
        if chosen is None and kept is not None:
            # No smaller column works; the incumbent's choice is lex-minimal.
            chosen = kept
            caps[chosen] -= 1
            incumbent.pop(r, None)
        if chosen is not None:
            matching.append((r, int(chosen)))
            fixed_w.append(float(weights[r, chosen]))

    return matching, math.fsum(fixed_w)


def brute_force_assignment(p: AssignmentProblem) -> tuple[Matching, float]:
    """Exact optimum by depth-first enumeration of all partial assignments.

    Test oracle only: refuses problems with more than 8 rows or more than
    8 column slots (multiplicities included). Rows are explored in index
    order and columns in ascending order before "unmatched", so the first
    optimum encountered is the lexicographically smallest; subtrees that
    cannot strictly beat the incumbent are pruned.
    """
    weights = p.weights
    R, C = weights.shape
    expanded = sum(p.col_multiplicity)
    if R > 8 or expanded > 8:
        raise OracleSizeError(
            f"oracle capped at 8 rows / 8 column slots, got {R} rows and "
            f"{expanded} slots"
        )

    # Upper bound on what rows r.. can still add, ignoring capacities.
    row_best = [max(0.0, float(weights[r].max())) if C else 0.0 for r in range(R)]
    suffix = [0.0] * (R + 1)
    for r in range(R - 1, -1, -1):
        suffix[r] = suffix[r + 1] + row_best[r]

    caps = list(p.col_multiplicity)
    best: Matching = []
    best_total = 0.0
    current: Matching = []

    def descend(r: int, total: float):
        nonlocal best, best_total
        # DFS visits candidates in lex order, so a subtree that can at most
        # tie the incumbent cannot improve on it and is skipped.
        if total + suffix[r] <= best_total:
            return
        if r == R:
            best = list(current)
            best_total = total
            return
        for c in range(C):
            if caps[c] > 0 and weights[r, c] > 0.0:
                caps[c] -= 1
                current.append((r, c))
                descend(r + 1, total + float(weights[r, c]))
                current.pop()
                caps[c] += 1
        descend(r + 1, total)

    descend(0, 0.0)
    return best, math.fsum(weights[r, c] for r, c in best)
