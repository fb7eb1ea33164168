"""Multi-scale matching pipeline: seed nets, integer Voronoi grid domains,
and the per-level prune / rematch / refine matching sequence with
convergence reporting.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from eqdec.errors import ArgumentError
from eqdec.lattice import CellSet, Rect, build_rect_tree
from eqdec.matching import (
    Matching,
    augment_phase,
    augment_to_max,
    greedy_offset_pass,
)
from eqdec.window import CosetWindow, build_sparse_coloring, greedy_sparse_net

__all__ = [
    "GridSchedule",
    "GridDomain",
    "IterationReport",
    "PipelineResult",
    "build_schedule",
    "integer_voronoi",
    "grid_domain",
    "init_m0",
    "prune_cross_cube",
    "rematch_dirty_cubes",
    "refine_cube",
    "run_pipeline",
]


@dataclass(frozen=True)
class GridSchedule:
    """Cube-size ladder plus per-level seed nets.

    ``seed_radii[i]`` is the sparsity radius used for level i's net; None means
    the single-center fallback (the required radius is undefined or does not
    fit the window).
    """

    ladder: tuple
    seed_radii: tuple
    seeds: tuple  # CellSet per executed level
    summability: dict

    def n_cube(self, level: int) -> int:
        return self.ladder[level]


@dataclass(frozen=True)
class GridDomain:
    """Disjoint aligned cubes inside integer Voronoi cells at one level."""

    level: int
    n_cube: int
    rect: Rect
    seeds: np.ndarray  # (n, d) absolute seed cells, row-major order
    owner: np.ndarray = field(repr=False)  # int32 grid; -1 = tie / no seed
    cube_id: np.ndarray = field(repr=False)  # int32 grid; -1 = uncovered
    cube_lows: np.ndarray = field(repr=False)  # (n_cubes, d) absolute corners
    cube_seed: np.ndarray = field(repr=False)  # (n_cubes,) owning seed index

    @property
    def uncovered(self) -> CellSet:
        return CellSet(self.rect, self.cube_id < 0)

    def cube_rect(self, ci: int) -> Rect:
        return Rect(tuple(int(x) for x in self.cube_lows[ci]), (self.n_cube,) * self.rect.d)


@dataclass(frozen=True)
class IterationReport:
    level: int
    n_cube: int
    dirty_cubes: int
    total_cubes: int
    changed_prune: int
    changed_rematch: int
    changed_refine: int
    window_volume: int
    unmatched_fraction: float
    cube_discrepancy_max: int
    cube_discrepancy_mean: float
    unmatched_exceeds_discrepancy: int  # cubes where unmatched > D(Q)
    two_sided_cubes: int  # cubes with unmatched cells in both parts

    def changed_fractions(self):
        v = self.window_volume
        return (
            self.changed_prune / v,
            self.changed_rematch / v,
            self.changed_refine / v,
        )


@dataclass
class PipelineResult:
    matching: Matching
    reports: list
    stable_map: np.ndarray
    margin_formula: int
    margin_core: int
    schedule: GridSchedule
    aborted: str | None = None


# ---------------------------------------------------------------------------
# Schedule and domains


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def build_schedule(win: CosetWindow, ladder, levels: int | None = None) -> GridSchedule:
    """Seed nets for every executed level of the ladder.

    Level i wants a net of sparsity ladder[i+2]; when that entry is missing or
    does not fit the window, the net degenerates to the cell nearest the
    window center (one Voronoi cell covering the whole window).
    """
    ladder = tuple(int(n) for n in ladder)
    if not ladder or any(not _is_pow2(n) for n in ladder):
        raise ArgumentError("ladder entries must be powers of two")
    if any(a >= b for a, b in zip(ladder, ladder[1:])):
        raise ArgumentError("ladder must be strictly increasing")
    if levels is None:
        levels = len(ladder) - 1
    if levels >= len(ladder):
        raise ArgumentError("levels exceeds ladder length")
    min_side = min(win.window.sides)
    if ladder[levels] > min_side:
        raise ArgumentError("top cube size exceeds the window")
    radii, seeds = [], []
    colorings = {}
    for i in range(levels + 1):
        want = ladder[i + 2] if i + 2 < len(ladder) else None
        if want is not None and want < min_side:
            if want not in colorings:
                colorings[want] = build_sparse_coloring(win.sys, want)
            radii.append(want)
            seeds.append(greedy_sparse_net(win, colorings[want], want))
        else:
            radii.append(None)
            center = tuple(l + s // 2 for l, s in zip(win.window.low, win.window.sides))
            seeds.append(CellSet.from_cells([center], win.window))
    terms = [ladder[i] ** 2 / ladder[i + 1] for i in range(len(ladder) - 1)]
    summability = {
        "terms": terms,
        "partials": np.cumsum(terms).tolist(),
        "tail_decreasing": len(terms) >= 3 and terms[-3] > terms[-2] > terms[-1],
    }
    return GridSchedule(
        ladder=ladder, seed_radii=tuple(radii), seeds=tuple(seeds), summability=summability
    )


def integer_voronoi(S: CellSet, window: Rect, cover_radius: int | None = None):
    """Per-cell nearest seed under sup-norm; ties owned by nobody.

    Returns (owner, seeds): owner is an int32 grid of seed indices (-1 for a
    tie or when no seed is within reach), seeds the row-major seed list.
    ``cover_radius`` limits each seed's influence patch; it must be at least
    the true covering radius of S (checked).
    """
    seeds = S.cells()
    if len(seeds) == 0:
        raise ArgumentError("seed set must be non-empty")
    sides = window.sides
    low = np.array(window.low)
    best = np.full(sides, np.iinfo(np.int32).max, dtype=np.int32)
    owner = np.full(sides, -1, dtype=np.int32)
    tie = np.zeros(sides, dtype=bool)
    for si, s in enumerate(seeds):
        rel = s - low
        if cover_radius is None:
            sl = tuple(slice(0, n) for n in sides)
        else:
            sl = tuple(
                slice(max(0, c - cover_radius), min(n, c + cover_radius + 1))
                for c, n in zip(rel, sides)
            )
        axes = []
        for j, spec in enumerate(sl):
            ax = np.abs(np.arange(spec.start, spec.stop) - rel[j]).astype(np.int32)
            shape = [1] * window.d
            shape[j] = len(ax)
            axes.append(ax.reshape(shape))
        dist = axes[0]
        for ax in axes[1:]:
            dist = np.maximum(dist, ax)
        cur_best = best[sl]
        lt = dist < cur_best
        eq = dist == cur_best
        best[sl] = np.where(lt, dist, cur_best)
        ow = owner[sl]
        owner[sl] = np.where(lt, np.int32(si), ow)
        t = tie[sl]
        tie[sl] = (t & ~lt) | eq
    if cover_radius is not None and int(best.max()) > cover_radius:
        raise ArgumentError("cover_radius smaller than the true covering radius")
    owner = owner.copy()
    owner[tie] = -1
    return owner, seeds


def grid_domain(S: CellSet, n_cube: int, voronoi, window: Rect, level: int = 0) -> GridDomain:
    """All n_cube-cubes aligned to their seed's grid and fully inside its cell."""
    if not _is_pow2(n_cube):
        raise ArgumentError("cube size must be a power of two")
    owner, seeds = voronoi
    low = np.array(window.low)
    sides = np.array(window.sides)
    cube_id = np.full(window.sides, -1, dtype=np.int32)
    lows, seed_of = [], []
    next_id = 0
    for si, s in enumerate(seeds):
        rel = s - low
        start = rel % n_cube
        count = (sides - start) // n_cube
        if np.any(count <= 0):
            continue
        region = tuple(slice(int(a), int(a + c * n_cube)) for a, c in zip(start, count))
        sub = owner[region] == si
        shape = []
        for c in count:
            shape.extend([int(c), n_cube])
        blocks = sub.reshape(shape)
        # reduce the per-cube axes: all cells of the cube must belong to si
        for ax in range(window.d - 1, -1, -1):
            blocks = blocks.all(axis=2 * ax + 1)
        accepted = np.argwhere(blocks)
        if len(accepted) == 0:
            continue
        ids = np.full(blocks.shape, -1, dtype=np.int32)
        ids[tuple(accepted.T)] = np.arange(next_id, next_id + len(accepted), dtype=np.int32)
        expanded = ids
        for ax in range(window.d):
            expanded = np.repeat(expanded, n_cube, axis=ax)
        target = cube_id[region]
        cube_id[region] = np.where(expanded >= 0, expanded, target)
        cube_lo = accepted * n_cube + start + low
        lows.append(cube_lo)
        seed_of.append(np.full(len(accepted), si, dtype=np.int32))
        next_id += len(accepted)
    cube_lows = np.concatenate(lows) if lows else np.zeros((0, window.d), dtype=np.int64)
    cube_seed = np.concatenate(seed_of) if seed_of else np.zeros(0, dtype=np.int32)
    return GridDomain(
        level=level,
        n_cube=n_cube,
        rect=window,
        seeds=seeds,
        owner=owner,
        cube_id=cube_id,
        cube_lows=cube_lows,
        cube_seed=cube_seed,
    )


def uncovered_ball_density(dom: GridDomain, m: int) -> float:
    """Density of the m-ball around the cells missed by the domain's cubes."""
    from eqdec.lattice import dilate

    return float(dilate(dom.cube_id < 0, m).mean())


# ---------------------------------------------------------------------------
# Matching phases


def _cube_slices(dom: GridDomain, ci: int, win_rect: Rect):
    return dom.cube_rect(ci).slices_in(win_rect)


def _parity_split(region: np.ndarray, lows: np.ndarray):
    """Split a region-id grid by the parity of each region's absolute corner.

    Used by the deliberately non-equivariant mutant pipelines: regions whose
    corner-coordinate sum is odd get the reversed greedy offset order.
    """
    odd = (lows.sum(axis=1) % 2).astype(bool)
    even_ids = region.copy()
    odd_ids = region.copy()
    valid = region >= 0
    is_odd = np.zeros_like(valid)
    is_odd[valid] = odd[region[valid]]
    even_ids[valid & is_odd] = -1
    odd_ids[valid & ~is_odd] = -1
    return even_ids, odd_ids


def _region_greedy(win, m, region, lows=None, mutant=False):
    a_bits, b_bits = win.a_bits.bits, win.b_bits.bits
    if not mutant:
        greedy_offset_pass(a_bits, b_bits, m.a_match, m.b_match, m.m_cap, region_id=region)
    else:
        even_ids, odd_ids = _parity_split(region, lows)
        greedy_offset_pass(a_bits, b_bits, m.a_match, m.b_match, m.m_cap, region_id=even_ids)
        greedy_offset_pass(
            a_bits, b_bits, m.a_match, m.b_match, m.m_cap, region_id=odd_ids, reverse=True
        )


def init_m0(win: CosetWindow, dom: GridDomain, mutant: bool = False) -> Matching:
    """Canonical maximum matching inside every level-0 cube."""
    m = Matching(win.window, win.sys.m_cap)
    _region_greedy(win, m, dom.cube_id, dom.cube_lows, mutant)
    _complete_cubes(win, dom, m, range(len(dom.cube_lows)))
    return m


def _complete_cubes(win: CosetWindow, dom: GridDomain, m: Matching, cube_range):
    """Finish per-cube maximum matchings where both parts still have free cells."""
    a_bits, b_bits = win.a_bits.bits, win.b_bits.bits
    ids = dom.cube_id.ravel()
    valid = ids >= 0
    n = len(dom.cube_lows)
    free_a = (a_bits.ravel() & (m.a_match.ravel() < 0)) & valid
    free_b = (b_bits.ravel() & (m.b_match.ravel() < 0)) & valid
    ua = np.bincount(ids[free_a], minlength=n)
    ub = np.bincount(ids[free_b], minlength=n)
    todo = set(np.flatnonzero((ua > 0) & (ub > 0)).tolist())
    for ci in cube_range:
        if ci not in todo:
            continue
        sl = _cube_slices(dom, ci, win.window)
        augment_to_max(a_bits[sl], b_bits[sl], m.a_match[sl], m.b_match[sl], m.m_cap)


def prune_cross_cube(m: Matching, dom: GridDomain) -> Matching:
    """Keep only edges with both endpoints inside one domain cube."""
    out = m.copy()
    a_idx = np.argwhere(out.a_match >= 0)
    if len(a_idx) == 0:
        return out
    ks = out.a_match[tuple(a_idx.T)]
    b_idx = a_idx + out.offsets[ks]
    ca = dom.cube_id[tuple(a_idx.T)]
    cb = dom.cube_id[tuple(b_idx.T)]
    drop = (ca < 0) | (ca != cb)
    if drop.any():
        out.a_match[tuple(a_idx[drop].T)] = -1
        out.b_match[tuple(b_idx[drop].T)] = -1
    return out


def _dirty_cubes(dom: GridDomain, prev: GridDomain) -> np.ndarray:
    """Cube indices with a cell outside the previous domain or spanning
    several previous Voronoi cells."""
    n = len(dom.cube_lows)
    ids = dom.cube_id.ravel()
    valid = ids >= 0
    uncovered = (prev.cube_id.ravel() < 0) & valid
    c_uncov = np.bincount(ids[uncovered], minlength=n)
    own = prev.owner.ravel().astype(np.int64)
    omin = np.full(n, np.iinfo(np.int64).max)
    omax = np.full(n, -2, dtype=np.int64)
    np.minimum.at(omin, ids[valid], own[valid])
    np.maximum.at(omax, ids[valid], own[valid])
    return np.flatnonzero((c_uncov > 0) | (omin != omax))


def rematch_dirty_cubes(
    m2: Matching, dom: GridDomain, prev: GridDomain, win: CosetWindow, mutant: bool = False
):
    """Rebuild the matching from scratch inside every dirty cube."""
    out = m2.copy()
    dirty = _dirty_cubes(dom, prev)
    if len(dirty) == 0:
        return out, dirty
    for ci in dirty:
        sl = _cube_slices(dom, int(ci), win.window)
        out.a_match[sl] = -1
        out.b_match[sl] = -1
    lookup = np.zeros(len(dom.cube_lows), dtype=bool)
    lookup[dirty] = True
    region = np.full(dom.cube_id.shape, -1, dtype=np.int32)
    valid = dom.cube_id >= 0
    region[valid] = np.where(lookup[dom.cube_id[valid]], dom.cube_id[valid], -1)
    _region_greedy(win, out, region, dom.cube_lows, mutant)
    _complete_cubes(win, dom, out, dirty.tolist())
    return out, dirty


def _cube_tree(dom: GridDomain, ci: int, prev: GridDomain, win: CosetWindow):
    """The inherited-grid tree of a clean cube (raises on dirty cubes)."""
    cube = dom.cube_rect(ci)
    sl = cube.slices_in(win.window)
    prev_ids = prev.cube_id[sl]
    owners = prev.owner[sl]
    if (prev_ids < 0).any() or int(owners.min()) != int(owners.max()):
        raise ArgumentError("refine requires a clean cube")
    seed = prev.seeds[int(owners.flat[0])]
    return cube, build_rect_tree(cube, tuple(int(x) for x in seed), prev.n_cube)


def _refine_augment(m3: Matching, win: CosetWindow, cube: Rect, tree) -> None:
    """Bounded-length augmentation sweeps, tree levels from fine to coarse."""
    sl = cube.slices_in(win.window)
    a_bits, b_bits = win.a_bits.bits[sl], win.b_bits.bits[sl]
    am, bm = m3.a_match[sl], m3.b_match[sl]
    for level in range(tree.h, 0, -1):
        cap = (1 << (tree.h - level + 1)) * _tree_n_prev(tree) + _tree_n_prev(tree) // 2
        for node in tree.level_nodes(level - 1):
            rsl = node.rect.slices_in(cube)
            while augment_phase(a_bits[rsl], b_bits[rsl], am[rsl], bm[rsl], m3.m_cap, cap):
                pass


def _tree_n_prev(tree) -> int:
    return tree.root.sides[0] >> tree.h


def refine_cube(
    m3: Matching,
    dom: GridDomain,
    ci: int,
    prev: GridDomain,
    win: CosetWindow,
    mutant: bool = False,
) -> None:
    """Align a clean cube's matching with the inherited finer grid, then make
    it maximum by bounded-length augmentation, level by level.

    Mutates ``m3`` in place (the cube's slice only). Basic rectangles that are
    not cubes of the previous domain get fresh canonical matchings first.
    """
    cube, tree = _cube_tree(dom, ci, prev, win)
    n_prev = prev.n_cube
    sl = cube.slices_in(win.window)
    a_bits, b_bits = win.a_bits.bits[sl], win.b_bits.bits[sl]
    am, bm = m3.a_match[sl], m3.b_match[sl]
    for node in tree.level_nodes(tree.h):
        if all(s == n_prev for s in node.rect.sides):
            continue
        bsl = node.rect.slices_in(cube)
        am[bsl] = -1
        bm[bsl] = -1
        rev = mutant and bool(sum(node.rect.low) % 2)
        greedy_offset_pass(a_bits[bsl], b_bits[bsl], am[bsl], bm[bsl], m3.m_cap, reverse=rev)
        augment_to_max(a_bits[bsl], b_bits[bsl], am[bsl], bm[bsl], m3.m_cap)
    _refine_augment(m3, win, cube, tree)


def _refine_all(
    m3: Matching,
    dom: GridDomain,
    prev: GridDomain,
    win: CosetWindow,
    clean_ids,
    mutant: bool = False,
) -> None:
    """Refine every clean cube; the fresh-basic matchings run as one batched
    greedy pass (identical outcome to per-cube refine_cube)."""
    n_prev = prev.n_cube
    trees = {}
    fresh = []  # window-level slice tuples
    fresh_lows = []
    for ci in clean_ids:
        cube, tree = _cube_tree(dom, ci, prev, win)
        trees[ci] = (cube, tree)
        for node in tree.level_nodes(tree.h):
            if all(s == n_prev for s in node.rect.sides):
                continue
            wsl = node.rect.slices_in(win.window)
            fresh.append(wsl)
            fresh_lows.append(node.rect.low)
            m3.a_match[wsl] = -1
            m3.b_match[wsl] = -1
    if fresh:
        region = np.full(win.window.sides, -1, dtype=np.int32)
        for rid, wsl in enumerate(fresh):
            region[wsl] = rid
        a_bits, b_bits = win.a_bits.bits, win.b_bits.bits
        _region_greedy(win, m3, region, np.array(fresh_lows), mutant)
        ids = region.ravel()
        valid = ids >= 0
        fa = (win.a_bits.bits.ravel() & (m3.a_match.ravel() < 0)) & valid
        fb = (win.b_bits.bits.ravel() & (m3.b_match.ravel() < 0)) & valid
        ua = np.bincount(ids[fa], minlength=len(fresh))
        ub = np.bincount(ids[fb], minlength=len(fresh))
        for rid in np.flatnonzero((ua > 0) & (ub > 0)):
            wsl = fresh[rid]
            augment_to_max(
                a_bits[wsl], b_bits[wsl], m3.a_match[wsl], m3.b_match[wsl], m3.m_cap
            )
    for ci in clean_ids:
        cube, tree = trees[ci]
        _refine_augment(m3, win, cube, tree)


# ---------------------------------------------------------------------------
# Full pipeline


def _per_cube_stats(win: CosetWindow, dom: GridDomain, m: Matching):
    """Per-cube (A,B)-discrepancies and unmatched structure."""
    ids = dom.cube_id.ravel()
    valid = ids >= 0
    n = len(dom.cube_lows)
    a = win.a_bits.bits.ravel() & valid
    b = win.b_bits.bits.ravel() & valid
    ca = np.bincount(ids[a], minlength=n)
    cb = np.bincount(ids[b], minlength=n)
    ua = np.bincount(ids[a & (m.a_match.ravel() < 0)], minlength=n)
    ub = np.bincount(ids[b & (m.b_match.ravel() < 0)], minlength=n)
    disc = np.abs(ca - cb)
    return {
        "discrepancy": disc,
        "unmatched_a": ua,
        "unmatched_b": ub,
        "two_sided": int(((ua > 0) & (ub > 0)).sum()),
        "exceeds": int(((ua + ub) > disc).sum()),
    }


def margin_formula(schedule: GridSchedule, levels: int, m_cap: int) -> int:
    """Accumulated nominal rule radii: each level adds 2 (r_seed + N_i + M)."""
    total = 0
    for i in range(levels + 1):
        r = schedule.seed_radii[i] or 0
        total += 2 * (r + schedule.ladder[i] + m_cap)
    return total


def margin_core(schedule: GridSchedule, levels: int, m_cap: int) -> int:
    """Margin used for convergence metrics: twice the largest structural
    radius plus the matching radius."""
    radii = [r for r in schedule.seed_radii[: levels + 1] if r is not None]
    biggest = max(radii + [schedule.ladder[levels]])
    return 2 * biggest + m_cap


def _edges_in_cubes(m: Matching, dom: GridDomain) -> bool:
    a_idx = np.argwhere(m.a_match >= 0)
    if len(a_idx) == 0:
        return True
    ks = m.a_match[tuple(a_idx.T)]
    b_idx = a_idx + m.offsets[ks]
    ca = dom.cube_id[tuple(a_idx.T)]
    cb = dom.cube_id[tuple(b_idx.T)]
    return bool(np.all((ca >= 0) & (ca == cb)))


def _no_short_augmenting_path(win: CosetWindow, dom: GridDomain, m: Matching) -> bool:
    from eqdec.matching import _layered_bfs  # internal reuse

    a_bits, b_bits = win.a_bits.bits, win.b_bits.bits
    for ci in range(len(dom.cube_lows)):
        sl = _cube_slices(dom, ci, win.window)
        *_, ends, _d = _layered_bfs(
            a_bits[sl],
            b_bits[sl],
            m.a_match[sl],
            m.b_match[sl],
            m.offsets,
            m.m_cap,
            max(dom.cube_rect(ci).sides),
        )
        if ends is not None:
            return False
    return True


def run_pipeline(
    win: CosetWindow,
    schedule: GridSchedule,
    levels: int,
    mutant: bool = False,
    check_invariants: bool = False,
) -> PipelineResult:
    """Run init plus ``levels`` rounds of prune / rematch / refine.

    Deterministic for fixed inputs. Reports carry per-phase changed-cell
    counts, per-cube discrepancy statistics and the unmatched fraction on the
    untainted core.
    """
    if levels + 1 > len(schedule.seeds):
        raise ArgumentError("schedule does not cover the requested levels")
    m_cap = win.sys.m_cap
    mcore = margin_core(schedule, levels, m_cap)
    core = win.core_rect(mcore)  # raises when the window is too small
    win.buffer = mcore
    a_flat = win.a_bits.bits
    total_a_core = int(a_flat[core.slices_in(win.window)].sum())
    volume = win.window.volume()

    doms = []
    reports: list[IterationReport] = []
    vor = integer_voronoi(schedule.seeds[0], win.window, cover_radius=_cover(schedule, 0, win))
    dom = grid_domain(schedule.seeds[0], schedule.ladder[0], vor, win.window, level=0)
    doms.append(dom)
    m = init_m0(win, dom, mutant=mutant)
    last_mod = np.zeros(win.window.sides, dtype=np.int32)
    reports.append(_report(win, dom, m, 0, 0, 0, 0, 0, core, total_a_core, volume))
    if check_invariants:
        m.validate(win.a_bits.bits, win.b_bits.bits)
        if not _edges_in_cubes(m, dom):
            raise AssertionError("matching edge escapes a level-0 cube")

    for i in range(1, levels + 1):
        prev_dom = doms[-1]
        vor = integer_voronoi(schedule.seeds[i], win.window, cover_radius=_cover(schedule, i, win))
        dom = grid_domain(schedule.seeds[i], schedule.ladder[i], vor, win.window, level=i)
        doms.append(dom)

        snap = m.a_match.copy()
        m2 = prune_cross_cube(m, dom)
        changed_prune = int((snap != m2.a_match).sum())

        m3, dirty = rematch_dirty_cubes(m2, dom, prev_dom, win, mutant=mutant)
        changed_rematch = int((m2.a_match != m3.a_match).sum())

        snap3 = m3.a_match.copy()
        dirty_set = set(dirty.tolist())
        clean_ids = [ci for ci in range(len(dom.cube_lows)) if ci not in dirty_set]
        _refine_all(m3, dom, prev_dom, win, clean_ids, mutant=mutant)
        changed_refine = int((snap3 != m3.a_match).sum())

        level_changed = snap != m3.a_match
        last_mod[level_changed] = i
        m = m3
        reports.append(
            _report(
                win,
                dom,
                m,
                i,
                len(dirty),
                changed_prune,
                changed_rematch,
                changed_refine,
                core,
                total_a_core,
                volume,
            )
        )
        if check_invariants:
            m.validate(win.a_bits.bits, win.b_bits.bits)
            if not _edges_in_cubes(m, dom):
                raise AssertionError(f"matching edge escapes a level-{i} cube")
            if not _no_short_augmenting_path(win, dom, m):
                raise AssertionError(f"augmenting path of length <= cube side at level {i}")

    return PipelineResult(
        matching=m,
        reports=reports,
        stable_map=last_mod,
        margin_formula=margin_formula(schedule, levels, m_cap),
        margin_core=mcore,
        schedule=schedule,
    )


def _cover(schedule: GridSchedule, level: int, win: CosetWindow) -> int | None:
    r = schedule.seed_radii[level]
    return r if r is not None else None


def _report(win, dom, m, level, dirty, cp, cr, cf, core, total_a_core, volume):
    stats = _per_cube_stats(win, dom, m)
    csl = core.slices_in(win.window)
    unmatched_core = int((win.a_bits.bits[csl] & (m.a_match[csl] < 0)).sum())
    disc = stats["discrepancy"]
    return IterationReport(
        level=level,
        n_cube=dom.n_cube,
        dirty_cubes=dirty,
        total_cubes=len(dom.cube_lows),
        changed_prune=cp,
        changed_rematch=cr,
        changed_refine=cf,
        window_volume=volume,
        unmatched_fraction=unmatched_core / max(total_a_core, 1),
        cube_discrepancy_max=int(disc.max()) if len(disc) else 0,
        cube_discrepancy_mean=float(disc.mean()) if len(disc) else 0.0,
        unmatched_exceeds_discrepancy=stats["exceeds"],
        two_sided_cubes=stats["two_sided"],
    )
