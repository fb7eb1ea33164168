"""Bipartite translation matchings on lattice windows.

Edges join A-cells to B-cells at sup-norm distance at most M. Matchings are
stored as per-cell offset indices (row-major index into the offset box), with
a consistently maintained inverse map. The canonical maximum matching is the
offset-greedy pass followed by shortest-augmenting-path phases with row-major
tie-breaks; it is a pure function of the window content, so translating the
content translates the matching.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from eqdec.errors import ArgumentError
from eqdec.lattice import CellSet, Rect, dilate
from eqdec.torus import offsets_row_major
from eqdec.window import CosetWindow

__all__ = [
    "TranslationGraph",
    "Matching",
    "HallCertificate",
    "canonical_max_matching",
    "bounded_augmenting_path",
    "flip",
    "hall_deficiency",
    "expansion_audit",
]

DEBUG_VALIDATE = bool(os.environ.get("EQDEC_DEBUG"))


@dataclass(frozen=True)
class TranslationGraph:
    """The implicit bipartite graph on a window: (a, b) with ||a-b||_inf <= M."""

    win: CosetWindow
    m_cap: int = 0

    def __post_init__(self):
        if self.m_cap == 0:
            object.__setattr__(self, "m_cap", self.win.sys.m_cap)
        if self.m_cap < 0:
            raise ArgumentError("m_cap must be >= 0")

    @property
    def degree_bound(self) -> int:
        return (2 * self.m_cap + 1) ** self.win.d


class Matching:
    """Partial injection from A-cells to B-cells with bounded displacement.

    ``a_match[cell]`` is the row-major index of the displacement to the
    partner (or -1); ``b_match`` holds the same index at the partner cell.
    """

    def __init__(self, rect: Rect, m_cap: int, a_match=None, b_match=None):
        self.rect = rect
        self.m_cap = m_cap
        self.d = rect.d
        self.offsets = offsets_row_major(m_cap, rect.d)
        self.a_match = (
            np.full(rect.sides, -1, dtype=np.int32) if a_match is None else a_match
        )
        self.b_match = (
            np.full(rect.sides, -1, dtype=np.int32) if b_match is None else b_match
        )

    def copy(self) -> "Matching":
        return Matching(self.rect, self.m_cap, self.a_match.copy(), self.b_match.copy())

    def size(self) -> int:
        return int((self.a_match >= 0).sum())

    def matched_a(self) -> np.ndarray:
        return self.a_match >= 0

    def matched_b(self) -> np.ndarray:
        return self.b_match >= 0

    def pairs(self) -> np.ndarray:
        """(n, 2, d) array of matched (a, b) cells in absolute coordinates."""
        a_idx = np.argwhere(self.a_match >= 0)
        ks = self.a_match[tuple(a_idx.T)]
        b_idx = a_idx + self.offsets[ks]
        low = np.array(self.rect.low)
        return np.stack([a_idx + low, b_idx + low], axis=1)

    def partner_of(self, cell) -> tuple | None:
        idx = tuple(c - l for c, l in zip(cell, self.rect.low))
        k = int(self.a_match[idx])
        if k < 0:
            return None
        return tuple(int(c + o) for c, o in zip(cell, self.offsets[k]))

    def validate(self, a_bits: np.ndarray | None = None, b_bits: np.ndarray | None = None):
        """Raise unless the stored maps form a consistent partial injection."""
        a_idx = np.argwhere(self.a_match >= 0)
        ks = self.a_match[tuple(a_idx.T)]
        b_idx = a_idx + self.offsets[ks]
        if len(b_idx):
            if b_idx.min() < 0 or np.any(b_idx >= np.array(self.rect.sides)):
                raise ArgumentError("matched partner outside the window")
            if np.any(self.b_match[tuple(b_idx.T)] != ks):
                raise ArgumentError("inverse map inconsistent")
        if int((self.b_match >= 0).sum()) != len(a_idx):
            raise ArgumentError("matched counts differ between sides (injectivity broken)")
        if a_bits is not None and len(a_idx) and not np.all(a_bits[tuple(a_idx.T)]):
            raise ArgumentError("matched source is not an A-cell")
        if b_bits is not None and len(b_idx) and not np.all(b_bits[tuple(b_idx.T)]):
            raise ArgumentError("matched target is not a B-cell")


# ---------------------------------------------------------------------------
# Core routines operating on local (sliced) arrays


def _offset_slices(sides, off):
    src, dst = [], []
    for s, o in zip(sides, off):
        o = int(o)
        a0, b0 = max(0, -o), max(0, o)
        src.append(slice(a0, max(a0, s - max(0, o))))
        dst.append(slice(b0, max(b0, s - max(0, -o))))
    return tuple(src), tuple(dst)


def greedy_offset_pass(
    a_bits, b_bits, a_match, b_match, m_cap, region_id=None, reverse=False
):
    """Match every free (a, a+v) pair, offsets in row-major order.

    Pairs within one offset never conflict. With ``region_id`` given, pairs
    must share a non-negative region label.
    """
    offsets = offsets_row_major(m_cap, a_bits.ndim)
    order = range(len(offsets) - 1, -1, -1) if reverse else range(len(offsets))
    sides = a_bits.shape
    for k in order:
        src, dst = _offset_slices(sides, offsets[k])
        cand = (a_bits[src] & (a_match[src] < 0)) & (b_bits[dst] & (b_match[dst] < 0))
        if region_id is not None:
            rs = region_id[src]
            cand &= (rs >= 0) & (rs == region_id[dst])
        if not cand.any():
            continue
        a_match[src][cand] = k
        b_match[dst][cand] = k


def _layered_bfs(a_bits, b_bits, a_match, b_match, offsets, m_cap, cap_len, start_mask=None):
    """Layered alternating BFS from unmatched A-cells.

    Returns (layer_a, layer_b, endpoint mask or None, endpoint depth).
    Layers hold edge-distances: even on the A side, odd on the B side. Work
    per layer is confined to the frontier's bounding box, which keeps long
    single-source searches cheap.
    """
    sides = np.array(a_bits.shape)
    layer_a = np.full(a_bits.shape, -1, dtype=np.int32)
    layer_b = np.full(a_bits.shape, -1, dtype=np.int32)
    front_full = a_bits & (a_match < 0)
    if start_mask is not None:
        front_full = front_full & start_mask
    if not front_full.any():
        return layer_a, layer_b, None, -1
    layer_a[front_full] = 0
    pts = np.argwhere(front_full)
    flo, fhi = pts.min(axis=0), pts.max(axis=0) + 1
    fr = front_full[tuple(slice(int(a), int(b)) for a, b in zip(flo, fhi))].copy()
    depth = 0
    while True:
        depth += 1  # step A -> B over any edge
        if depth > cap_len:
            return layer_a, layer_b, None, -1
        nlo = np.maximum(flo - m_cap, 0)
        nhi = np.minimum(fhi + m_cap, sides)
        sl = tuple(slice(int(a), int(b)) for a, b in zip(nlo, nhi))
        box = np.zeros(tuple(nhi - nlo), dtype=bool)
        box[tuple(slice(int(a - c), int(b - c)) for a, b, c in zip(flo, fhi, nlo))] = fr
        reach = dilate(box, m_cap) & b_bits[sl] & (layer_b[sl] < 0)
        if not reach.any():
            return layer_a, layer_b, None, -1
        lb = layer_b[sl]
        lb[reach] = depth
        ends = reach & (b_match[sl] < 0)
        if ends.any():
            full = np.zeros(a_bits.shape, dtype=bool)
            full[sl] = ends
            return layer_a, layer_b, full, depth
        depth += 1  # step B -> A over matched edges
        if depth > cap_len:
            return layer_a, layer_b, None, -1
        bs = np.argwhere(reach) + nlo
        ks = b_match[tuple(bs.T)]
        As = bs - offsets[ks]
        # partners outside the array (edges crossing the region boundary)
        # cannot be rematched from here, so the path stops at them
        inb = np.all(As >= 0, axis=1) & np.all(As < sides, axis=1)
        As = As[inb]
        if len(As) == 0:
            return layer_a, layer_b, None, -1
        alo, ahi = As.min(axis=0), As.max(axis=0) + 1
        frA = np.zeros(tuple(ahi - alo), dtype=bool)
        frA[tuple((As - alo).T)] = True
        slA = tuple(slice(int(a), int(b)) for a, b in zip(alo, ahi))
        frA &= layer_a[slA] < 0
        if not frA.any():
            return layer_a, layer_b, None, -1
        la = layer_a[slA]
        la[frA] = depth
        fr, flo, fhi = frA, alo, ahi


def _first_true(mask) -> tuple | None:
    flat = np.flatnonzero(mask.ravel())
    if len(flat) == 0:
        return None
    return tuple(int(x) for x in np.unravel_index(flat[0], mask.shape))


def _walk_back(end, depth, layer_a, layer_b, a_match, offsets, m_cap, used_a=None, used_b=None):
    """Reconstruct one shortest path from an unmatched B endpoint.

    Row-major smallest predecessor at each step; returns the node list
    (B endpoint first) or None when disjointness masks block the walk.
    """
    sides = layer_a.shape
    nodes = [end]
    cur = end
    lev = depth
    while lev > 0:
        lo = tuple(max(0, c - m_cap) for c in cur)
        hi = tuple(min(s, c + m_cap + 1) for c, s in zip(cur, sides))
        patch = tuple(slice(a, b) for a, b in zip(lo, hi))
        cand = layer_a[patch] == lev - 1
        if used_a is not None:
            cand &= ~used_a[patch]
        pos = _first_true(cand)
        if pos is None:
            return None
        a = tuple(p + l for p, l in zip(pos, lo))
        nodes.append(a)
        lev -= 1
        if lev == 0:
            break
        k = a_match[a]
        b = tuple(int(c + o) for c, o in zip(a, offsets[k]))
        if used_b is not None and used_b[b]:
            return None
        nodes.append(b)
        cur = b
        lev -= 1
    return nodes


def _apply_flip(nodes, a_match, b_match, offsets, m_cap):
    """Flip the alternating path given as nodes [b_end, a, b, ..., a_start]."""
    box = 2 * m_cap + 1
    for i in range(1, len(nodes), 2):
        a = nodes[i]
        b = nodes[i - 1]
        off = tuple(bb - aa for aa, bb in zip(a, b))
        k = 0
        for o in off:
            k = k * box + (o + m_cap)
        a_match[a] = k
        b_match[b] = k


def augment_phase(a_bits, b_bits, a_match, b_match, m_cap, cap_len, start_mask=None):
    """One BFS plus a peel of vertex-disjoint shortest augmenting paths.

    Returns the number of paths flipped (0 when no path of length <= cap_len
    exists from the chosen start cells).
    """
    offsets = offsets_row_major(m_cap, a_bits.ndim)
    layer_a, layer_b, ends, depth = _layered_bfs(
        a_bits, b_bits, a_match, b_match, offsets, m_cap, cap_len, start_mask
    )
    if ends is None:
        return 0
    used_a = np.zeros_like(a_bits)
    used_b = np.zeros_like(a_bits)
    flips = 0
    for flat in np.flatnonzero(ends.ravel()):
        end = tuple(int(x) for x in np.unravel_index(flat, ends.shape))
        if used_b[end]:
            continue
        nodes = _walk_back(
            end, depth, layer_a, layer_b, a_match, offsets, m_cap, used_a, used_b
        )
        if nodes is None:
            continue
        _apply_flip(nodes, a_match, b_match, offsets, m_cap)
        for i, n in enumerate(nodes):
            (used_b if i % 2 == 0 else used_a)[n] = True
        flips += 1
    return flips


def augment_to_max(a_bits, b_bits, a_match, b_match, m_cap, cap_len=None):
    """Flip shortest augmenting paths (length <= cap_len) until none remain."""
    if cap_len is None:
        cap_len = 2 * int(np.prod(a_bits.shape)) + 1
    total = 0
    while True:
        flips = augment_phase(a_bits, b_bits, a_match, b_match, m_cap, cap_len)
        if flips == 0:
            return total
        total += flips


def aligned_cube_ids(shape, s: int) -> np.ndarray:
    """Row-major ids of the corner-aligned s-cube tiling of an array."""
    ids = None
    counts = [-(-n // s) for n in shape]
    for ax, n in enumerate(shape):
        line = (np.arange(n) // s).astype(np.int32)
        sh = [1] * len(shape)
        sh[ax] = n
        line = line.reshape(sh)
        ids = line if ids is None else ids * counts[ax] + line
    return ids


def ladder_max_matching(a_bits, b_bits, a_match, b_match, m_cap, base: int = 16):
    """Fill empty match grids with a maximum matching, built bottom-up.

    Greedy matching confined to base-size cubes, then augmentation over
    doubling cube tilings: imbalances cancel at the smallest scale where they
    meet, so only the array-wide surplus needs long paths.
    """
    base = 1 << max(base - 1, 2 * m_cap).bit_length()
    greedy_offset_pass(
        a_bits, b_bits, a_match, b_match, m_cap, region_id=aligned_cube_ids(a_bits.shape, base)
    )
    return hierarchy_augment(a_bits, b_bits, a_match, b_match, m_cap, base=base)


def hierarchy_augment(a_bits, b_bits, a_match, b_match, m_cap, base: int | None = None):
    """Drive a matching to maximum by augmenting inside doubling cube tilings.

    Local imbalances cancel at small scales through short paths, so the final
    whole-array sweep (which certifies maximality) has few augmenting paths
    left to find. Far cheaper than whole-array phases on large windows, with
    the same end state guarantee: no augmenting path remains.
    """
    sides = a_bits.shape
    s = base if base is not None else 1 << max(4, 2 * m_cap - 1).bit_length()
    total = 0
    while True:
        ua = a_bits & (a_match < 0)
        ub = b_bits & (b_match < 0)
        if not ua.any() or not ub.any():
            return total
        full = s >= max(sides)
        counts = [max(1, -(-n // s)) for n in sides]
        for corner in np.ndindex(*counts):
            sl = tuple(
                slice(c * s, min((c + 1) * s, n)) for c, n in zip(corner, sides)
            )
            if not (ua[sl].any() and ub[sl].any()):
                continue
            total += augment_to_max(
                a_bits[sl], b_bits[sl], a_match[sl], b_match[sl], m_cap
            )
        if full:
            return total
        s <<= 1


# ---------------------------------------------------------------------------
# Public operations


def _local_bits(g: TranslationGraph, R: Rect):
    sl = R.slices_in(g.win.window)
    return g.win.a_bits.bits[sl], g.win.b_bits.bits[sl]


def canonical_max_matching(g: TranslationGraph, R: Rect, reverse_offsets=False) -> Matching:
    """The canonical maximum matching of the subgraph induced by R.

    Offset-greedy initialization followed by shortest-path augmentation; the
    result depends only on the induced content, not on where R sits.
    """
    a_bits, b_bits = _local_bits(g, R)
    m = Matching(R, g.m_cap)
    greedy_offset_pass(a_bits, b_bits, m.a_match, m.b_match, g.m_cap, reverse=reverse_offsets)
    augment_to_max(a_bits, b_bits, m.a_match, m.b_match, g.m_cap)
    if DEBUG_VALIDATE:
        m.validate(a_bits, b_bits)
    return m


def bounded_augmenting_path(g: TranslationGraph, R: Rect, m: Matching, max_len: int):
    """Shortest augmenting path of length <= max_len inside R, or None.

    Deterministic: the row-major first endpoint and predecessors are taken.
    Nodes are returned in path order (unmatched A-cell first), in coordinates
    relative to R.
    """
    if m.rect != R:
        raise ArgumentError("matching must be defined on R")
    a_bits, b_bits = _local_bits(g, R)
    offsets = m.offsets
    layer_a, layer_b, ends, depth = _layered_bfs(
        a_bits, b_bits, m.a_match, m.b_match, offsets, g.m_cap, max_len
    )
    if ends is None:
        return None
    end = _first_true(ends)
    nodes = _walk_back(end, depth, layer_a, layer_b, m.a_match, offsets, g.m_cap)
    return list(reversed(nodes))


def flip(m: Matching, path) -> Matching:
    """Flip an augmenting path (as returned by bounded_augmenting_path)."""
    if not path or len(path) % 2 != 0:
        raise ArgumentError("augmenting path must alternate A,B,...,B")
    first, last = path[0], path[-1]
    if m.a_match[tuple(first)] >= 0 or m.b_match[tuple(last)] >= 0:
        raise ArgumentError("path endpoints must be unmatched")
    for prev, cur in zip(path, path[1:]):
        if max(abs(int(p) - int(c)) for p, c in zip(prev, cur)) > m.m_cap:
            raise ArgumentError("consecutive path cells are not graph neighbours")
    for i in range(1, len(path) - 1, 2):
        b, a = path[i], path[i + 1]
        k = m.a_match[tuple(a)]
        if k < 0 or m.b_match[tuple(b)] != k:
            raise ArgumentError("interior path edges must alternate with matched edges")
        off = m.offsets[k]
        if tuple(aa + oo for aa, oo in zip(a, off)) != tuple(b):
            raise ArgumentError("interior pair is not a matched edge")
    out = m.copy()
    _apply_flip(list(reversed(path)), out.a_match, out.b_match, out.offsets, m.m_cap)
    if DEBUG_VALIDATE:
        out.validate()
    return out


@dataclass(frozen=True)
class HallCertificate:
    """A deficient set: |neighborhood| < |cells| on the stated side."""

    side: str
    cells: np.ndarray
    neighborhood_size: int


def cover_side(a_in, b_in, m_cap, warm=None):
    """Can every true cell of ``a_in`` be matched into ``b_in``?

    Returns (ok, a_match, b_match, deficient_mask_or_None). Only the cover
    side carries vertices on A, so a maximum matching covering them exists
    exactly when augmentation succeeds from each. ``warm`` optionally seeds
    the search with a consistent partial covering (pair of match grids, edges
    at a_in cells only); the verdict does not depend on the seed.
    """
    if warm is None:
        a_match = np.full(a_in.shape, -1, dtype=np.int32)
        b_match = np.full(a_in.shape, -1, dtype=np.int32)
        ladder_max_matching(a_in, b_in, a_match, b_match, m_cap)
    else:
        a_match, b_match = warm
        hierarchy_augment(a_in, b_in, a_match, b_match, m_cap)
    unmatched = a_in & (a_match < 0)
    if not unmatched.any():
        return True, a_match, b_match, None
    big = 2 * a_in.size + 1
    offsets = offsets_row_major(m_cap, a_in.ndim)
    layer_a, layer_b, ends, _ = _layered_bfs(
        a_in, b_in, a_match, b_match, offsets, m_cap, big, start_mask=unmatched
    )
    # no augmenting path exists, so reached cells form a deficient witness
    return False, a_match, b_match, layer_a >= 0


def hall_deficiency(
    g: TranslationGraph, R: Rect, required_a: CellSet, required_b: CellSet
):
    """Certificate that no matching covers both required sets, or None.

    Coverage is checked per side (a matching saturating each required side
    separately can always be combined into one saturating both). A covering
    matching only uses partners within M of a required cell, so the search is
    confined to that neighbourhood of the required set.
    """
    req_cells = []
    for cs in (required_a, required_b):
        if cs.size():
            req_cells.append(cs.cells())
    if not req_cells:
        return None
    allc = np.concatenate(req_cells)
    lo = np.maximum(allc.min(axis=0) - g.m_cap, R.low)
    hi = np.minimum(allc.max(axis=0) + g.m_cap + 1, np.array(R.high))
    R_eff = Rect(tuple(int(x) for x in lo), tuple(int(b - a) for a, b in zip(lo, hi)))
    a_bits, b_bits = _local_bits(g, R_eff)
    low = np.array(R_eff.low)

    def local_mask(cs: CellSet):
        mask = np.zeros(R_eff.sides, dtype=bool)
        if cs.size():
            idx = cs.cells() - low
            if np.any(idx < 0) or np.any(idx >= np.array(R_eff.sides)):
                raise ArgumentError("required cells must lie in R")
            mask[tuple(idx.T)] = True
        return mask

    req_a = local_mask(required_a)
    req_b = local_mask(required_b)
    if np.any(req_a & ~a_bits) or np.any(req_b & ~b_bits):
        raise ArgumentError("required cells must belong to their part")
    ok_a, _, _, witness = cover_side(req_a, b_bits, g.m_cap)
    if not ok_a:
        cells = np.argwhere(witness) + low
        nb = int((dilate(witness, g.m_cap) & b_bits).sum())
        return HallCertificate(side="A", cells=cells, neighborhood_size=nb)
    ok_b, _, _, witness = cover_side(req_b, a_bits, g.m_cap)
    if not ok_b:
        cells = np.argwhere(witness) + low
        nb = int((dilate(witness, g.m_cap) & a_bits).sum())
        return HallCertificate(side="B", cells=cells, neighborhood_size=nb)
    return None


def expansion_audit(g: TranslationGraph, R: Rect, sample_sets: int, seed: int):
    """Worst sampled neighbourhood margin against the two-sided expansion floor.

    Diagnostic only: samples connected subsets of A inside R (grown by jumps
    of at most M) and reports |Γ(X)| - min(|X| + 10 d |X|^((d-1)/d), |B∩R|/2).
    """
    if R.balance() > 3 + 1e-9:
        raise ArgumentError("R must be 3-balanced")
    a_bits, b_bits = _local_bits(g, R)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    d = R.d
    total_b = int(b_bits.sum())
    margins = []
    a_cells = np.argwhere(a_bits)
    if len(a_cells) == 0:
        return None, []
    for _ in range(sample_sets):
        start = a_cells[rng.integers(0, len(a_cells))]
        X = np.zeros_like(a_bits)
        X[tuple(start)] = True
        target = int(rng.integers(1, max(2, len(a_cells) // 4)))
        while int(X.sum()) < target:
            grown = dilate(X, g.m_cap) & a_bits & ~X
            idx = np.argwhere(grown)
            if len(idx) == 0:
                break
            take = idx[rng.integers(0, len(idx), size=min(len(idx), 8))]
            X[tuple(take.T)] = True
        size = int(X.sum())
        gamma = int((dilate(X, g.m_cap) & b_bits).sum())
        floor = min(size + 10 * d * size ** ((d - 1) / d), total_b / 2)
        margins.append(gamma - floor)
    return (min(margins) if margins else None), margins
