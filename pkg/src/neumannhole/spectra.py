"""Hausdorff distances between spectra and multiplicity-aware eigenvalue matching."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DistanceError, InvalidSpecError


@dataclass(frozen=True)
class SpectrumSet:
    """Lowest ``m`` eigenvalues plus the ``(m+1)``-th, which fixes the tail bound.

    Everything above the computed window is represented by the interval
    ``[0, tail]`` after the map ``lambda -> 1 / (lambda + 1)``.
    """

    eigenvalues: tuple[float, ...]
    tail: float

    @classmethod
    def from_eigenvalues(cls, values, next_value: float | None = None) -> SpectrumSet:
        """``next_value`` defaults to the last entry of ``values`` (which is then dropped)."""
        vals = np.sort(np.maximum(np.asarray(values, dtype=float), 0.0))
        if next_value is None:
            if len(vals) < 2:
                raise DistanceError("need at least two eigenvalues to estimate the tail")
            vals, next_value = vals[:-1], vals[-1]
        tail = 1.0 / (max(float(next_value), 0.0) + 1.0)
        return cls(tuple(float(v) for v in vals), tail)

    def transformed(self) -> np.ndarray:
        return 1.0 / (np.asarray(self.eigenvalues) + 1.0)


def _as_points(a) -> np.ndarray:
    arr = np.asarray(list(a), dtype=float).ravel()
    if arr.size == 0:
        raise DistanceError("Hausdorff distance of an empty set is undefined")
    return arr


def hausdorff(a, b) -> float:
    """Hausdorff distance between two finite subsets of the real line."""
    a = _as_points(a)
    b = _as_points(b)
    d = np.abs(a[:, None] - b[None, :])
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def _dist_to_intervals(x: np.ndarray, iv: np.ndarray) -> np.ndarray:
    lo, hi = iv[:, 0][None, :], iv[:, 1][None, :]
    x = x[:, None]
    d = np.where(x < lo, lo - x, np.where(x > hi, x - hi, 0.0))
    return d.min(axis=1)


def _directed(a_iv: np.ndarray, b_iv: np.ndarray) -> float:
    """``sup_{x in A} dist(x, B)`` for finite unions of closed intervals."""
    cand = [a_iv.ravel()]
    order = np.argsort(b_iv[:, 0])
    b_sorted = b_iv[order]
    # the distance to B peaks at the middle of each gap between B pieces
    mids = 0.5 * (b_sorted[:-1, 1] + b_sorted[1:, 0])
    for lo, hi in a_iv:
        inside = mids[(mids >= lo) & (mids <= hi)]
        cand.append(inside)
    x = np.concatenate(cand)
    return float(_dist_to_intervals(x, b_iv).max())


def hausdorff_intervals(a_iv, b_iv) -> float:
    a_iv = np.asarray(a_iv, dtype=float).reshape(-1, 2)
    b_iv = np.asarray(b_iv, dtype=float).reshape(-1, 2)
    if len(a_iv) == 0 or len(b_iv) == 0:
        raise DistanceError("Hausdorff distance of an empty set is undefined")
    return max(_directed(a_iv, b_iv), _directed(b_iv, a_iv))


def _points(s: SpectrumSet) -> np.ndarray:
    return np.concatenate([s.transformed(), [0.0, s.tail]])


def _targets(s: SpectrumSet) -> np.ndarray:
    t = s.transformed()
    return np.vstack([np.stack([t, t], axis=1), [[0.0, s.tail]]])


def dbar(a: SpectrumSet, b: SpectrumSet) -> tuple[float, float]:
    """Resolvent Hausdorff distance and the truncation error bound ``max(tails)``.

    Each side is the set of ``1 / (lambda + 1)`` plus the tail endpoints
    ``{0, tail}``; distances are measured to the other side's points and its
    whole tail interval ``[0, tail]``.
    """
    if not a.eigenvalues or not b.eigenvalues:
        raise DistanceError("dbar of an empty spectrum is undefined")
    d_ab = float(_dist_to_intervals(_points(a), _targets(b)).max())
    d_ba = float(_dist_to_intervals(_points(b), _targets(a)).max())
    return max(d_ab, d_ba), max(a.tail, b.tail)


@dataclass
class MatchReport:
    pairs: list[tuple[int, int, float]]
    unpaired_a: list[int]
    unpaired_b: list[int]
    eta: float
    cutoff: float | None = None
    gaps: list[float] = field(default_factory=list)

    @property
    def pollution_count(self) -> int:
        """Eigenvalues of the second spectrum with no partner in the first."""
        return len(self.unpaired_b)


def match_eigenvalues(a, b, eta: float, cutoff: float | None = None) -> MatchReport:
    """Greedy nearest-neighbour pairing of two sorted eigenvalue lists.

    Walking up ``a``, each value takes the closest still-free value of ``b``
    within ``eta`` (lower index on ties), so the pairing is injective and
    every reported gap is at most ``eta``.  With ``cutoff`` only values
    ``<= cutoff`` take part, which keeps truncation of the computed window
    from showing up as unpaired eigenvalues.
    """
    if not eta > 0:
        raise InvalidSpecError("match: eta must be positive", field="eta")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ia = [i for i in np.argsort(a, kind="stable") if cutoff is None or a[i] <= cutoff]
    ib = [j for j in np.argsort(b, kind="stable") if cutoff is None or b[j] <= cutoff]
    free = list(ib)
    pairs = []
    unpaired_a = []
    for i in ia:
        best, best_gap = None, None
        for j in free:
            g = abs(a[i] - b[j])
            if g <= eta and (best_gap is None or g < best_gap):
                best, best_gap = j, g
        if best is None:
            unpaired_a.append(int(i))
        else:
            free.remove(best)
            pairs.append((int(i), int(best), float(best_gap)))
    return MatchReport(pairs=pairs, unpaired_a=unpaired_a, unpaired_b=[int(j) for j in free],
                       eta=float(eta), cutoff=cutoff, gaps=[p[2] for p in pairs])
