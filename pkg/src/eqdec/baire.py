"""Greedy sparse-net matching pipeline with horizon-bounded extendability
checks and hole diagnostics for the failure case.

Levels alternate parts: odd levels pick B-net cells, even levels A-net cells.
Each net cell is matched to the first candidate partner (by coloring class,
then row-major) whose addition keeps the matching extendable out to the
configured horizon.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from eqdec.errors import ArgumentError, ExtendabilityError, PrecisionError
from eqdec.lattice import CellSet, Rect, boundary, dilate, ell_components, perimeter
from eqdec.matching import (
    Matching,
    TranslationGraph,
    augment_phase,
    cover_side,
    hall_deficiency,
)
from eqdec.torus import offsets_row_major, torus_delta
from eqdec.window import CosetWindow, SparseColoring, _min_translation_distance

__all__ = [
    "SparseNetLadder",
    "HoleReport",
    "build_nets",
    "extendable_oracle",
    "greedy_step",
    "hole_analysis",
    "fill_hole",
    "private_set_audit",
    "run_baire",
    "BaireResult",
    "BaireLevelReport",
]


@dataclass(frozen=True)
class SparseNetLadder:
    """Per-level sparse nets: level i (1-based) holds a B-net when i is odd,
    an A-net when i is even; the union at level i is (r_i + 4M)-sparse."""

    radii: tuple
    m_cap: int
    sides: tuple  # "A" or "B" per level
    nets: tuple  # CellSet per level
    ball_radii: tuple  # torus ball radius used per level
    condition_partials: tuple  # partial sums of (M/r_j)^((d-1)/d)
    condition_bound: float

    def condition_ok(self, level: int) -> bool:
        return self.condition_partials[level - 1] <= self.condition_bound


def net_side(level: int) -> str:
    return "B" if level % 2 == 1 else "A"


def build_nets(
    win: CosetWindow,
    radii,
    seed: int,
    placement_margins,
    candidate_cap: int = 64,
    net_cap: int = 16,
) -> SparseNetLadder:
    """Sparse nets from balls around a seeded low-discrepancy center sequence.

    Each level keeps at most ``net_cap`` part-cells, mutually more than
    r_i + 4M apart, all at least ``placement_margins[i]`` from the window
    edge. The ball radius is the largest that makes any single ball
    automatically sparse.
    """
    radii = tuple(int(r) for r in radii)
    if any(a > b for a, b in zip(radii, radii[1:])):
        raise ArgumentError("radii must be non-decreasing")
    m_cap = win.sys.m_cap
    d = win.d
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x6E657473]))
    alpha = rng.random(win.sys.k)
    y0 = rng.random(win.sys.k)
    coords = win.torus_coords()
    sides_arr = np.array(win.window.sides)
    nets, sides, ball_radii = [], [], []
    for level, r in enumerate(radii, start=1):
        side = net_side(level)
        part = win.a_bits.bits if side == "A" else win.b_bits.bits
        sparsity = r + 4 * m_cap
        min_dist = _min_translation_distance(win.sys, sparsity)
        if min_dist < 2.0**-40:
            raise PrecisionError("vectors too dependent for the requested net sparsity")
        eps = min_dist / 2 * (1 - 1e-9)
        margin = int(placement_margins[level - 1])
        interior = np.zeros(win.window.sides, dtype=bool)
        if all(s > 2 * margin for s in win.window.sides):
            interior[tuple(slice(margin, s - margin) for s in win.window.sides)] = True
        part_idx = np.argwhere(part & interior)
        part_coords = coords[tuple(part_idx.T)]
        kept: list[np.ndarray] = []
        for t in range(candidate_cap):
            if len(kept) >= net_cap or len(part_idx) == 0:
                break
            y = (y0 + t * alpha) % 1.0
            near = torus_delta(part_coords, y).max(axis=-1) <= eps
            for c in part_idx[near]:
                if len(kept) >= net_cap:
                    break
                if all(np.abs(c - k).max() > sparsity for k in kept):
                    kept.append(c)
        cells = (
            CellSet.from_cells(np.array(kept) + np.array(win.window.low), win.window)
            if kept
            else CellSet.empty(win.window)
        )
        nets.append(cells)
        sides.append(side)
        ball_radii.append(eps)
    terms = [(m_cap / r) ** ((d - 1) / d) for r in radii]
    return SparseNetLadder(
        radii=radii,
        m_cap=m_cap,
        sides=tuple(sides),
        nets=tuple(nets),
        ball_radii=tuple(ball_radii),
        condition_partials=tuple(np.cumsum(terms).tolist()),
        condition_bound=4.0 ** (1 - d),
    )


# ---------------------------------------------------------------------------
# Extendability oracle


class _Covering:
    """One-sided coverage state: required left cells matched into right cells."""

    def __init__(self, left_req, right_avail, m_cap, warm=None):
        self.left_req = left_req
        self.right_avail = right_avail
        self.m_cap = m_cap
        self.ok, self.lmatch, self.rmatch, _ = cover_side(
            left_req, right_avail, m_cap, warm=warm
        )

    def feasible_without_right(self, cell, offsets, cap) -> bool:
        """Feasibility after removing one right-side cell."""
        if not self.ok:
            return False  # shrinking availability cannot help
        k = int(self.rmatch[cell])
        if k < 0:
            return True
        left = tuple(int(c - o) for c, o in zip(cell, offsets[k]))
        lm, rm = self.lmatch.copy(), self.rmatch.copy()
        lm[left] = -1
        rm[cell] = -1
        avail = self.right_avail.copy()
        avail[cell] = False
        start = np.zeros_like(self.left_req)
        start[left] = True
        return augment_phase(self.left_req, avail, lm, rm, self.m_cap, cap, start_mask=start) > 0

    def feasible_without_left(self, cell, offsets, cap) -> bool:
        """Feasibility after dropping one cell from the required left set."""
        if self.ok:
            return True  # dropping a requirement only frees capacity
        lm, rm = self.lmatch.copy(), self.rmatch.copy()
        k = int(self.lmatch[cell])
        if k >= 0:
            partner = tuple(int(c + o) for c, o in zip(cell, offsets[k]))
            lm[cell] = -1
            rm[partner] = -1
        req = self.left_req.copy()
        req[cell] = False
        uncovered = req & (lm < 0)
        while uncovered.any():
            if augment_phase(req, self.right_avail, lm, rm, self.m_cap, cap, start_mask=uncovered) == 0:
                return False
            uncovered = req & (lm < 0)
        return True


class _OracleContext:
    """Feasibility state shared across candidate partners of one net cell.

    Each candidate check then costs at most one augmenting-path search per
    side instead of two full coverage matchings. ``warm_global`` optionally
    seeds both coverings from a window-wide matching of the free cells.
    """

    def __init__(
        self,
        m: Matching,
        win: CosetWindow,
        anchor,
        anchor_side: str,
        horizon: int,
        warm_global=None,
    ):
        m_cap = win.sys.m_cap
        self.m_cap = m_cap
        self.anchor_side = anchor_side
        reach = horizon + m_cap
        low = tuple(int(c) - reach for c in anchor)
        region = Rect(low, (2 * reach + 1,) * win.d)
        if not win.window.contains_rect(region):
            raise ArgumentError("horizon ball exceeds the window")
        self.region = region
        sl = region.slices_in(win.window)
        a_in = (win.a_bits.bits[sl] & (m.a_match[sl] < 0)).copy()
        b_in = (win.b_bits.bits[sl] & (m.b_match[sl] < 0)).copy()
        centre = tuple(int(c) - l for c, l in zip(anchor, low))
        own = a_in if anchor_side == "A" else b_in
        if not own[centre]:
            raise ArgumentError("anchor must be an unmatched cell of its part")
        own[centre] = False  # covered by the candidate edge itself
        ball = np.zeros(region.sides, dtype=bool)
        ball[tuple(slice(reach - horizon, reach + horizon + 1) for _ in range(win.d))] = True
        self.a_in, self.b_in = a_in, b_in
        self.offsets = offsets_row_major(m_cap, win.d)
        self.cap = 2 * region.volume() + 1
        req_a, req_b = a_in & ball, b_in & ball
        warm_a = warm_b = None
        if warm_global is not None:
            warm_a = self._warm(warm_global, sl, req_a, b_in, flip=False)
            warm_b = self._warm(warm_global, sl, req_b, a_in, flip=True)
        self.cover_a = _Covering(req_a, b_in, m_cap, warm=warm_a)  # required A into B
        self.cover_b = _Covering(req_b, a_in, m_cap, warm=warm_b)  # required B into A

    def _warm(self, warm_global, sl, left_req, right_avail, flip: bool):
        """Local covering seeded from the window-wide free matching.

        Keeps only edges at required left cells whose partner is available in
        the region; ``flip`` reads the global matching from the B side (left
        vertices are then B-cells and stored offsets reverse sign).
        """
        gam, gbm = warm_global
        src = (gbm if flip else gam)[sl]
        lm = np.full(src.shape, -1, dtype=np.int32)
        rm = np.full(src.shape, -1, dtype=np.int32)
        lcells = np.argwhere(left_req & (src >= 0))
        if len(lcells) == 0:
            return lm, rm
        ks = src[tuple(lcells.T)]
        k_count = len(self.offsets)
        ks_local = (k_count - 1 - ks) if flip else ks
        partners = lcells + self.offsets[ks_local]
        inside = np.all(partners >= 0, axis=1) & np.all(
            partners < np.array(src.shape), axis=1
        )
        lcells, partners, ks_local = lcells[inside], partners[inside], ks_local[inside]
        avail = right_avail[tuple(partners.T)]
        lcells, partners, ks_local = lcells[avail], partners[avail], ks_local[avail]
        lm[tuple(lcells.T)] = ks_local
        rm[tuple(partners.T)] = ks_local
        return lm, rm

    def check(self, partner) -> bool:
        """Partner is a B-cell for an A anchor and vice versa."""
        p = tuple(int(c) - l for c, l in zip(partner, self.region.low))
        if self.anchor_side == "A":
            if not self.b_in[p]:
                return False
            return self.cover_a.feasible_without_right(
                p, self.offsets, self.cap
            ) and self.cover_b.feasible_without_left(p, self.offsets, self.cap)
        if not self.a_in[p]:
            return False
        return self.cover_b.feasible_without_right(
            p, self.offsets, self.cap
        ) and self.cover_a.feasible_without_left(p, self.offsets, self.cap)


class _GlobalCover:
    """Window-wide maximum matching of the cells still free under the current
    sparse matching; shared warm start for every oracle context of a level."""

    def __init__(self, win: CosetWindow):
        self.win = win
        self.gam = np.full(win.window.sides, -1, dtype=np.int32)
        self.gbm = np.full(win.window.sides, -1, dtype=np.int32)
        self.offsets = offsets_row_major(win.sys.m_cap, win.d)
        self.built = False

    def refresh(self, m: Matching):
        from eqdec.matching import hierarchy_augment, ladder_max_matching

        m_cap = self.win.sys.m_cap
        free_a = self.win.a_bits.bits & (m.a_match < 0)
        free_b = self.win.b_bits.bits & (m.b_match < 0)
        # drop stored edges touching cells no longer free
        stale_a = np.argwhere((self.gam >= 0) & ~free_a)
        if len(stale_a):
            ks = self.gam[tuple(stale_a.T)]
            partners = stale_a + self.offsets[ks]
            self.gbm[tuple(partners.T)] = -1
            self.gam[tuple(stale_a.T)] = -1
        stale_b = np.argwhere((self.gbm >= 0) & ~free_b)
        if len(stale_b):
            ks = self.gbm[tuple(stale_b.T)]
            sources = stale_b - self.offsets[ks]
            self.gam[tuple(sources.T)] = -1
            self.gbm[tuple(stale_b.T)] = -1
        if not self.built:
            ladder_max_matching(free_a, free_b, self.gam, self.gbm, m_cap)
            self.built = True
        else:
            hierarchy_augment(free_a, free_b, self.gam, self.gbm, m_cap)
        return self.gam, self.gbm


def _orient(win: CosetWindow, x, y):
    """Normalize an (x, y) pair to (a_cell, b_cell)."""
    x = tuple(int(c) for c in x)
    y = tuple(int(c) for c in y)
    if max(abs(a - b) for a, b in zip(x, y)) > win.sys.m_cap:
        raise ArgumentError("(x, y) is not an edge of the translation graph")
    if win.a_bits.contains(x) and win.b_bits.contains(y):
        return x, y
    if win.b_bits.contains(x) and win.a_bits.contains(y):
        return y, x
    raise ArgumentError("(x, y) must pair an A-cell with a B-cell")


def extendable_oracle(m: Matching, win: CosetWindow, x, y, horizon: int) -> bool:
    """True when m plus the edge (x, y) still covers the horizon ball around x.

    Feasibility means some matching extending m ∪ {(x,y)} covers every A-cell
    and B-cell within ``horizon`` of x; partners may live up to M further out.
    Monotone in the horizon: success at j implies success at any j' <= j.
    The ball is centred on x, so x must be at least horizon + M from the
    window edge.
    """
    x = tuple(int(c) for c in x)
    a_cell, b_cell = _orient(win, x, y)
    anchor_side = "A" if x == a_cell else "B"
    anchor = a_cell if anchor_side == "A" else b_cell
    partner = b_cell if anchor_side == "A" else a_cell
    grid = m.a_match if anchor_side == "A" else m.b_match
    if grid[tuple(c - l for c, l in zip(anchor, win.window.low))] >= 0:
        raise ArgumentError("anchor already matched")
    ctx = _OracleContext(m, win, anchor, anchor_side, horizon)
    return ctx.check(partner)


# ---------------------------------------------------------------------------
# Greedy level


@dataclass
class BaireLevelReport:
    level: int
    side: str
    radius: int
    net_size: int
    added: int
    horizon: int
    sparsity_ok: bool
    condition_value: float
    condition_ok: bool
    post_oracle_ok: bool
    hall_ok: bool | None = None


def _edge_set_distance(e1, e2) -> int:
    best = None
    for p in e1:
        for q in e2:
            dd = max(abs(a - b) for a, b in zip(p, q))
            best = dd if best is None else min(best, dd)
    return best


def greedy_step(
    m_prev: Matching,
    level: int,
    ladder: SparseNetLadder,
    coloring: SparseColoring,
    horizon: int,
    win: CosetWindow,
    post_check: bool = True,
    warm_global=None,
):
    """Match every unmatched net cell of the level, minimizing the partner's
    (coloring class, row-major) key among oracle-approved candidates.

    Raises ExtendabilityError with a hole report when a net cell has no
    approved partner. Returns (new matching, level report).
    """
    net = ladder.nets[level - 1]
    side = ladder.sides[level - 1]
    r_i = ladder.radii[level - 1]
    m_cap = win.sys.m_cap
    out = m_prev.copy()
    coords = win.torus_coords()
    low = np.array(win.window.low)
    part_bits = win.b_bits.bits if side == "B" else win.a_bits.bits
    other_bits = win.a_bits.bits if side == "B" else win.b_bits.bits
    net_cells = [tuple(int(x) for x in c) for c in net.cells()]

    def color_key(cell):
        rel = tuple(c - l for c, l in zip(cell, low))
        return int(coloring.color_of(coords[rel][None, :])[0])

    net_cells.sort(key=lambda c: (color_key(c), c))
    added = []
    contexts = {}
    offs = offsets_row_major(m_cap, win.d)
    for cell in net_cells:
        rel = tuple(c - l for c, l in zip(cell, low))
        own_matched = out.b_match if side == "B" else out.a_match
        if own_matched[rel] >= 0:
            continue
        cands = []
        for off in offs:
            partner = tuple(c + int(o) for c, o in zip(cell, off))
            prel = tuple(p - l for p, l in zip(partner, low))
            if any(p < 0 or p >= s for p, s in zip(prel, win.window.sides)):
                continue
            if not other_bits[prel]:
                continue
            other_matched = out.a_match if side == "B" else out.b_match
            if other_matched[prel] >= 0:
                continue
            cands.append(partner)
        cands.sort(key=lambda c: (color_key(c), c))
        if cell not in contexts:
            contexts[cell] = _OracleContext(
                m_prev, win, cell, side, horizon, warm_global=warm_global
            )
        ctx = contexts[cell]
        matched = False
        for partner in cands:
            if ctx.check(partner):
                a_c = cell if side == "A" else partner
                b_c = partner if side == "A" else cell
                k = _offset_index(a_c, b_c, m_cap, win.d)
                arel = tuple(c - l for c, l in zip(a_c, low))
                brel = tuple(c - l for c, l in zip(b_c, low))
                out.a_match[arel] = k
                out.b_match[brel] = k
                added.append((a_c, b_c))
                matched = True
                break
        if not matched:
            report = _failure_diagnostics(win, out, cell, side, horizon, m_cap, r_i)
            raise ExtendabilityError(
                f"level {level}: net cell {cell} has no extendable partner", report
            )
    # added edges must be (r_i + 2M)-sparse
    sparsity_ok = True
    bound = r_i + 2 * m_cap
    for i in range(len(added)):
        for j in range(i + 1, len(added)):
            if _edge_set_distance(added[i], added[j]) <= bound:
                sparsity_ok = False
    post_ok = True
    if post_check:
        for a_c, b_c in added:
            anchor = a_c if side == "A" else b_c
            partner = b_c if side == "A" else a_c
            post_ok = post_ok and contexts[anchor].check(partner) is True
    report = BaireLevelReport(
        level=level,
        side=side,
        radius=r_i,
        net_size=len(net_cells),
        added=len(added),
        horizon=horizon,
        sparsity_ok=sparsity_ok,
        condition_value=ladder.condition_partials[level - 1],
        condition_ok=ladder.condition_ok(level),
        post_oracle_ok=post_ok,
    )
    return out, report


def _offset_index(a_c, b_c, m_cap, d) -> int:
    box = 2 * m_cap + 1
    k = 0
    for aa, bb in zip(a_c, b_c):
        k = k * box + (bb - aa + m_cap)
    return k


def _failure_diagnostics(win, m, cell, side, horizon, m_cap, r_i):
    """Hole analysis of the unmatched component around a failed net cell."""
    reach = horizon + m_cap
    low = tuple(int(c) - reach for c in cell)
    region = Rect(low, (2 * reach + 1,) * win.d)
    sl = region.slices_in(win.window)
    part = win.a_bits.bits if side == "A" else win.b_bits.bits
    matched = m.a_match if side == "A" else m.b_match
    free = part[sl] & (matched[sl] < 0)
    comps = ell_components(CellSet(region, free), 2 * m_cap)
    centre = tuple(int(c) - l for c, l in zip(cell, low))
    target = None
    for comp in comps:
        if comp.bits[centre]:
            target = comp
            break
    if target is None:
        return None
    try:
        return hole_analysis(target, m_cap, r_i)
    except ArgumentError:
        return None


# ---------------------------------------------------------------------------
# Hole diagnostics


@dataclass
class Hole:
    cells: CellSet
    perimeter: int
    rich: bool
    infinite: bool
    boundary_into_hull: int


@dataclass
class HoleReport:
    reference_point: tuple
    grid: int
    x1: CellSet
    x2: CellSet
    holes: list
    hull_perimeter: int
    decomposition_ok: bool

    @property
    def finite_holes(self):
        return [h for h in self.holes if not h.infinite]


def hole_analysis(X: CellSet, m_cap: int, r_i: int) -> HoleReport:
    """Grid hulls, holes and richness flags of a 2M-connected cell set.

    The half-M grid is anchored at the per-axis minima of X. Holes are the
    2M-components of the hull's complement inside a padded analysis region;
    the component touching the region frame is the infinite one.
    """
    if X.size() == 0:
        raise ArgumentError("X must be non-empty")
    comps = ell_components(X, 2 * m_cap)
    if len(comps) != 1:
        raise ArgumentError("X must be 2M-connected")
    g = max(1, m_cap // 2)
    cells = X.cells()
    o = tuple(int(v) for v in cells.min(axis=0))
    d = cells.shape[1]
    cube_idx = (cells - o) // g  # o is the min, so indices are >= 0
    pad = (2 * m_cap) // g + 2
    imax = cube_idx.max(axis=0)
    ilo = np.full(d, -pad)
    ihi = imax + pad + 1
    occ_shape = tuple(int(b - a) for a, b in zip(ilo, ihi))
    occ = np.zeros(occ_shape, dtype=bool)
    occ[tuple((cube_idx - ilo).T)] = True
    x2_occ = occ.copy()
    for ax in range(d):
        for sign in (1, -1):
            x2_occ |= np.roll(occ, sign, axis=ax) & _roll_valid(occ.shape, ax, sign)
    region = Rect(
        tuple(int(o[j] + ilo[j] * g) for j in range(d)),
        tuple(int(s * g) for s in occ_shape),
    )
    x1_bits = _expand_cubes(occ, g)
    x2_bits = _expand_cubes(x2_occ, g)
    x1 = CellSet(region, x1_bits)
    x2 = CellSet(region, x2_bits)
    hull_perimeter = perimeter(x1)
    comp_sets = ell_components(CellSet(region, ~x1_bits), 2 * m_cap)
    frame = np.zeros(region.sides, dtype=bool)
    for ax in range(d):
        sl0 = [slice(None)] * d
        sl0[ax] = 0
        frame[tuple(sl0)] = True
        sl1 = [slice(None)] * d
        sl1[ax] = region.sides[ax] - 1
        frame[tuple(sl1)] = True
    rich_floor = (r_i / m_cap) ** ((d - 1) / d)
    holes = []
    infinite_bits = np.zeros(region.sides, dtype=bool)
    finite_comps = []
    for comp in comp_sets:
        if (comp.bits & frame).any():
            infinite_bits |= comp.bits
        else:
            finite_comps.append(comp)
    into_total = 0
    if infinite_bits.any():
        h_inf = CellSet(region, infinite_bits)
        into = _edges_into(infinite_bits, x1_bits)
        into_total += into
        holes.append(
            Hole(
                cells=h_inf,
                perimeter=into,
                rich=True,
                infinite=True,
                boundary_into_hull=into,
            )
        )
    for comp in finite_comps:
        p = perimeter(comp)
        into = _edges_into(comp.bits, x1_bits)
        into_total += into
        holes.append(
            Hole(
                cells=comp,
                perimeter=p,
                rich=p >= rich_floor,
                infinite=False,
                boundary_into_hull=into,
            )
        )
    return HoleReport(
        reference_point=o,
        grid=g,
        x1=x1,
        x2=x2,
        holes=holes,
        hull_perimeter=hull_perimeter,
        decomposition_ok=(into_total == hull_perimeter),
    )


def _roll_valid(shape, ax, sign):
    mask = np.ones(shape, dtype=bool)
    sl = [slice(None)] * len(shape)
    sl[ax] = 0 if sign == 1 else shape[ax] - 1
    mask[tuple(sl)] = False
    return mask


def _expand_cubes(occ: np.ndarray, g: int) -> np.ndarray:
    out = occ
    for ax in range(occ.ndim):
        out = np.repeat(out, g, axis=ax)
    return out


def _edges_into(hole_bits: np.ndarray, hull_bits: np.ndarray) -> int:
    count = 0
    d = hole_bits.ndim
    for ax in range(d):
        for sign in (1, -1):
            shifted = np.roll(hull_bits, -sign, axis=ax) & _roll_valid(hull_bits.shape, ax, -sign)
            count += int((hole_bits & shifted).sum())
    return count


def fill_hole(X: CellSet, report: HoleReport, hole: Hole, win: CosetWindow):
    """Absorb a finite non-rich hole: X' = X ∪ (A ∩ M-ball(hole)).

    Returns (X', claims) where claims verifies the invariants: unchanged
    reference point, hull growing by exactly the hole, the hole disappearing,
    and X' staying 2M-connected.
    """
    if hole.infinite:
        raise ArgumentError("cannot fill the infinite hole")
    if hole.rich:
        raise ArgumentError("cannot fill a rich hole")
    m_cap = win.sys.m_cap
    region = hole.cells.rect
    grown = dilate(hole.cells.bits, m_cap)
    a_local = np.zeros(region.sides, dtype=bool)
    inter = _intersect_rect(region, win.window)
    if inter is not None:
        a_local[inter.slices_in(region)] = win.a_bits.bits[inter.slices_in(win.window)]
    addition = CellSet(region, grown & a_local)
    x_cells = X.cells()
    add_cells = addition.cells()
    all_cells = np.concatenate([x_cells, add_cells]) if len(add_cells) else x_cells
    x_new = CellSet.from_cells(all_cells)
    rep2 = hole_analysis(x_new, m_cap, 1)  # richness floor irrelevant to the claims
    old_holes = {_key(h.cells) for h in report.holes if not h.infinite}
    new_holes = {_key(h.cells) for h in rep2.holes if not h.infinite}
    x1_old = _restrict(report.x1, region)
    x1_new = _restrict(rep2.x1, region)
    claims = {
        "same_reference": rep2.reference_point == report.reference_point,
        "hull_is_union": bool(np.array_equal(x1_new, x1_old | hole.cells.bits))
        and rep2.x1.size() == report.x1.size() + hole.cells.size(),
        "hole_gone": _key(hole.cells) not in new_holes,
        "other_holes_kept": old_holes - {_key(hole.cells)} <= new_holes,
        "connected": len(ell_components(x_new, 2 * m_cap)) == 1,
    }
    return x_new, claims


def _key(cs: CellSet):
    return tuple(map(tuple, cs.cells()))


def _restrict(cs: CellSet, rect: Rect) -> np.ndarray:
    out = np.zeros(rect.sides, dtype=bool)
    inter = _intersect_rect(rect, cs.rect)
    if inter is not None:
        out[inter.slices_in(rect)] = cs.bits[inter.slices_in(cs.rect)]
    return out


def _intersect_rect(a: Rect, b: Rect):
    lo = np.maximum(a.low, b.low)
    hi = np.minimum(a.high, b.high)
    if np.any(hi - lo < 1):
        return None
    return Rect(tuple(int(x) for x in lo), tuple(int(y - x) for x, y in zip(lo, hi)))


def private_set_audit(x1_boundary: np.ndarray, net_edges, r_j: int, m_cap: int):
    """Private boundary shares of sparse net edges, with annulus shell counts.

    ``x1_boundary`` is the (p, 2, d) boundary-pair array of a hull;
    ``net_edges`` a list of ((a), (b)) edges assumed (r_j + 2M)-sparse.
    """
    reach = r_j / 2 + m_cap
    results = []
    for e in net_edges:
        e_arr = np.array(e)  # (2, d)
        dmat = np.abs(x1_boundary[:, :, None, :] - e_arr[None, None, :, :]).max(axis=-1)
        dist = dmat.min(axis=(1, 2))
        members = np.flatnonzero(dist <= reach)
        shells = []
        m = 0
        while (2 * m - 1) * m_cap < r_j / 2:
            lo, hi = (2 * m - 1) * m_cap, (2 * m + 1) * m_cap
            shells.append(int(((dist > lo) & (dist <= hi)).sum()))
            m += 1
        results.append({"edge": e, "private": members, "size": len(members), "shells": shells})
    disjoint = True
    for i in range(len(results)):
        for j in range(i + 1, len(results)):
            if set(results[i]["private"]) & set(results[j]["private"]):
                disjoint = False
    return {"edges": results, "disjoint": disjoint}


# ---------------------------------------------------------------------------
# Full run


@dataclass
class BaireResult:
    matching: Matching
    reports: list
    ladder: SparseNetLadder
    margin: int
    horizon_factor: int


def run_baire(
    win: CosetWindow,
    radii,
    seed: int,
    horizon_factor: int = 2,
    coloring: SparseColoring | None = None,
    candidate_cap: int = 64,
    net_cap: int = 16,
    hall_check: bool = True,
) -> BaireResult:
    """Build nets, run the greedy levels, and audit feasibility on the core."""
    from eqdec.window import build_sparse_coloring

    m_cap = win.sys.m_cap
    horizons = [horizon_factor * int(r) for r in radii]
    margins = [h + m_cap + 1 for h in horizons]
    ladder = build_nets(
        win, radii, seed, margins, candidate_cap=candidate_cap, net_cap=net_cap
    )
    if coloring is None:
        coloring = build_sparse_coloring(win.sys, 2 * m_cap)
    m = Matching(win.window, m_cap)
    graph = TranslationGraph(win, m_cap)
    margin = max(margins)
    win.buffer = margin
    reports = []
    global_cover = _GlobalCover(win)
    for level in range(1, len(radii) + 1):
        warm = global_cover.refresh(m)
        m, rep = greedy_step(
            m, level, ladder, coloring, horizons[level - 1], win, warm_global=warm
        )
        if hall_check:
            core = win.core_rect(margin)
            csl = core.slices_in(win.window)
            req_a = (m.a_match >= 0) & win.a_bits.bits
            req_b = (m.b_match >= 0) & win.b_bits.bits
            for lv in range(level):
                nb = ladder.nets[lv].bits
                if ladder.sides[lv] == "A":
                    req_a |= nb & win.a_bits.bits
                else:
                    req_b |= nb & win.b_bits.bits
            mask = np.zeros(win.window.sides, dtype=bool)
            mask[csl] = True
            cert = hall_deficiency(
                graph,
                core,
                CellSet(win.window, req_a & mask),
                CellSet(win.window, req_b & mask),
            )
            rep.hall_ok = cert is None
        reports.append(rep)
    return BaireResult(
        matching=m, reports=reports, ladder=ladder, margin=margin, horizon_factor=horizon_factor
    )
