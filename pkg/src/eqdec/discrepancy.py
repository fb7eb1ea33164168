"""Uniformity audits: sliding binary-cube discrepancy, density deviations,
boundary-normalized discrepancy sampling, and growth-exponent profiles.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from eqdec.errors import ArgumentError
from eqdec.lattice import CellSet, Rect, perimeter

__all__ = [
    "UniformityBudget",
    "DiscrepancyProfile",
    "block_sums",
    "cube_discrepancy",
    "rect_discrepancy_pair",
    "density_discrepancy",
    "laczkovich_bound_audit",
    "profile",
    "summability_report",
]


@dataclass(frozen=True)
class UniformityBudget:
    """Tabulated per-scale deviation budget of density delta.

    ``psi[i]`` budgets scale 2^i; ``phi[i] = 2^i * psi[i]`` always.
    """

    delta: float
    psi: tuple

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ArgumentError("delta must be in (0,1)")
        object.__setattr__(self, "psi", tuple(float(p) for p in self.psi))

    @property
    def phi(self) -> tuple:
        return tuple(2**i * p for i, p in enumerate(self.psi))

    @property
    def i_max(self) -> int:
        return len(self.psi) - 1


@dataclass(frozen=True)
class DiscrepancyProfile:
    scales: tuple  # 2^i
    max_dev: tuple
    fitted_exponent: float
    fit_range: tuple  # indices of i used in the fit
    delta: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scale", "max_dev"])
        for s, m in zip(self.scales, self.max_dev):
            w.writerow([s, repr(m)])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(
            {
                "delta": self.delta,
                "scales": list(self.scales),
                "max_dev": list(self.max_dev),
                "fitted_exponent": self.fitted_exponent,
                "fit_range": list(self.fit_range),
            },
            indent=2,
            sort_keys=True,
        )


def block_sums(arr: np.ndarray, size: int) -> np.ndarray:
    """Sums over every axis-aligned size^d window (stride 1), via running sums."""
    out = np.ascontiguousarray(arr, dtype=np.int64)
    for ax in range(arr.ndim):
        pad_shape = list(out.shape)
        pad_shape[ax] = 1
        c = np.concatenate([np.zeros(pad_shape, dtype=np.int64), np.cumsum(out, axis=ax)], axis=ax)
        hi = [slice(None)] * arr.ndim
        lo = [slice(None)] * arr.ndim
        hi[ax] = slice(size, None)
        lo[ax] = slice(None, -size)
        out = c[tuple(hi)] - c[tuple(lo)]
    return out


def _window_bits(X: CellSet, window: Rect) -> np.ndarray:
    if not X.rect.contains_rect(window):
        raise ArgumentError("window must lie inside the cell set's bounding rect")
    return X.bits[window.slices_in(X.rect)]


def cube_discrepancy(X: CellSet, delta: float, i: int, window: Rect) -> float:
    """Max over all 2^i-cubes inside the window of | |X ∩ Q| - delta |Q| |."""
    size = 1 << i
    if size > min(window.sides):
        raise ArgumentError(f"scale 2^{i} exceeds window side {min(window.sides)}")
    bits = _window_bits(X, window)
    counts = block_sums(bits, size)
    target = delta * float(size ** window.d)
    return float(np.abs(counts - target).max())


def rect_discrepancy_pair(A: CellSet, B: CellSet, Y: CellSet) -> int:
    """| |A ∩ Y| - |B ∩ Y| | for a finite probe set Y."""
    if A.rect == Y.rect and B.rect == Y.rect:
        a = int((A.bits & Y.bits).sum())
        b = int((B.bits & Y.bits).sum())
    else:
        cells = Y.cells()
        a = sum(1 for c in cells if A.contains(c))
        b = sum(1 for c in cells if B.contains(c))
    return abs(a - b)


def density_discrepancy(X: CellSet, delta: float, R: Rect) -> float:
    """| |X ∩ R| - delta |R| |."""
    if X.rect.contains_rect(R):
        count = int(_window_bits(X, R).sum())
    else:
        count = sum(1 for c in R.cells() if X.contains(c))
    return float(abs(count - delta * R.volume()))


def _random_probe(rng, window: Rect) -> CellSet:
    """A random finite probe: union of rectangles or a random-walk blob."""
    d = window.d
    bits = np.zeros(window.sides, dtype=bool)
    if rng.random() < 0.5:
        for _ in range(rng.integers(1, 4)):
            lo, sl = [], []
            for s in window.sides:
                a = int(rng.integers(0, s))
                b = int(rng.integers(a + 1, min(s, a + max(2, s // 2)) + 1))
                lo.append(a)
                sl.append(slice(a, b))
            bits[tuple(sl)] = True
    else:
        pos = np.array([rng.integers(0, s) for s in window.sides])
        steps = int(rng.integers(20, 200))
        for _ in range(steps):
            bits[tuple(pos)] = True
            ax = int(rng.integers(0, d))
            pos[ax] = np.clip(pos[ax] + rng.choice([-1, 1]), 0, window.sides[ax] - 1)
        bits[tuple(pos)] = True
    return CellSet(window, bits)


def laczkovich_bound_audit(X: CellSet, delta: float, samples: int, seed: int):
    """Max sampled ratio of density discrepancy to perimeter over random probes.

    Estimates the constant relating D_delta(X; Y) to p(Y) over finite probes Y.
    """
    if samples < 1:
        raise ArgumentError("samples must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    worst = 0.0
    window = X.rect
    for _ in range(samples):
        Y = _random_probe(rng, window)
        if Y.size() == 0:
            continue
        count = int((X.bits & Y.bits).sum())
        dev = abs(count - delta * Y.size())
        worst = max(worst, dev / perimeter(Y))
    return worst


def profile(X: CellSet, delta: float, window: Rect, i_max: int) -> DiscrepancyProfile:
    """Cube discrepancies for scales 2^0..2^i_max plus a fitted growth exponent.

    The fit is least squares on log2(max_dev) against i over i in [2, i_max];
    scales with zero deviation are left out of the fit.
    """
    if (1 << i_max) > min(window.sides):
        raise ArgumentError("window too small for the requested i_max")
    devs = [cube_discrepancy(X, delta, i, window) for i in range(i_max + 1)]
    lo = min(2, i_max)
    idx = [i for i in range(lo, i_max + 1) if devs[i] > 0]
    if len(idx) >= 2:
        xs = np.array(idx, dtype=np.float64)
        ys = np.log2([devs[i] for i in idx])
        slope = float(np.polyfit(xs, ys, 1)[0])
    else:
        slope = float("nan")
    return DiscrepancyProfile(
        scales=tuple(1 << i for i in range(i_max + 1)),
        max_dev=tuple(devs),
        fitted_exponent=slope,
        fit_range=tuple(idx),
        delta=delta,
    )


def summability_report(budget: UniformityBudget, d: int, horizon: int):
    """Partial sums of psi(2^i)/2^((d-2)i) and phi(2^i)/2^((d-1)i).

    Returns (psi_partials, phi_partials, tail_flag); the flag reports whether
    the last three increments of both series are decreasing.
    """
    if horizon > budget.i_max:
        raise ArgumentError("horizon exceeds tabulated scales")
    psi_terms = [budget.psi[i] / 2 ** ((d - 2) * i) for i in range(horizon + 1)]
    phi_terms = [budget.phi[i] / 2 ** ((d - 1) * i) for i in range(horizon + 1)]
    psi_partials = tuple(np.cumsum(psi_terms).tolist())
    phi_partials = tuple(np.cumsum(phi_terms).tolist())

    def tail_ok(terms):
        if len(terms) < 4:
            return False
        t = terms[-3:]
        return t[0] > t[1] > t[2]

    return psi_partials, phi_partials, tail_ok(psi_terms) and tail_ok(phi_terms)
