import numpy as np
import pytest

from eqdec.errors import ArgumentError
from eqdec.lattice import CellSet, Rect
from eqdec.lebesgue import (
    build_schedule,
    grid_domain,
    init_m0,
    integer_voronoi,
    prune_cross_cube,
    refine_cube,
    rematch_dirty_cubes,
    run_pipeline,
    uncovered_ball_density,
)
from eqdec.matching import TranslationGraph, canonical_max_matching
from eqdec.torus import AxisSquare, Bitmap, Disk, TorusPoint, sample_free_system
from eqdec.window import CosetWindow, extract_window


def _shapes(area=0.15):
    disk = Disk(TorusPoint([0.5, 0.5]), float(np.sqrt(area / np.pi)))
    square = AxisSquare(TorusPoint([0.1, 0.55]), float(np.sqrt(area)))
    return disk, square


def _window(side=128, seed=7, u=(0.3, 0.7), m_cap=8):
    sys = sample_free_system(seed, 2, 2, m_cap)
    disk, square = _shapes()
    return extract_window(disk, square, sys, TorusPoint(list(u)), Rect((-side // 2,) * 2, (side,) * 2))


def test_integer_voronoi_single_seed():
    R = Rect((0, 0), (10, 10))
    S = CellSet.from_cells([(4, 4)], R)
    owner, seeds = integer_voronoi(S, R)
    assert (owner == 0).all()


def test_integer_voronoi_tie_cells_unowned():
    R = Rect((0, 0), (11, 11))
    S = CellSet.from_cells([(0, 0), (10, 0)], R)
    owner, seeds = integer_voronoi(S, R)
    assert (owner[5, :] == -1).all()  # first coordinate 5: equidistant, unowned
    assert (owner[:5, 0] == 0).all()
    assert (owner[6:, 0] == 1).all()


def test_integer_voronoi_matches_naive():
    rng = np.random.default_rng(3)
    R = Rect((-10, 5), (40, 40))
    for _ in range(20):
        count = int(rng.integers(2, 8))
        cells = set()
        while len(cells) < count:
            cells.add(tuple(rng.integers(0, 40, 2)))
        abs_cells = [(c[0] - 10, c[1] + 5) for c in cells]
        S = CellSet.from_cells(abs_cells, R)
        owner, seeds = integer_voronoi(S, R)
        for p in [(int(x), int(y)) for x in range(0, 40, 7) for y in range(0, 40, 7)]:
            cell = np.array([p[0] - 10, p[1] + 5])
            dists = [max(abs(cell[0] - s[0]), abs(cell[1] - s[1])) for s in seeds]
            best = min(dists)
            expect = dists.index(best) if dists.count(best) == 1 else -1
            assert owner[p] == expect


def test_grid_domain_single_seed_tiles_window():
    R = Rect((-32, -32), (64, 64))
    S = CellSet.from_cells([(0, 0)], R)
    owner, seeds = integer_voronoi(S, R)
    dom = grid_domain(S, 4, (owner, seeds), R)
    # seed-aligned 4-grid fits the 64-window exactly
    assert dom.uncovered.size() == 0
    assert len(dom.cube_lows) == 256
    dom8 = grid_domain(CellSet.from_cells([(1, 1)], R), 8, integer_voronoi(CellSet.from_cells([(1, 1)], R), R), R)
    # misaligned grid leaves a frame near the window edge
    unc = dom8.uncovered.cells()
    assert len(unc) > 0
    border = 8
    hi = np.array(R.high)
    lo = np.array(R.low)
    assert all(
        (c < lo + border).any() or (c >= hi - border).any() for c in unc
    )


def test_grid_domain_bisector_gap_and_density():
    R = Rect((0, 0), (64, 64))
    S = CellSet.from_cells([(10, 32), (34, 32)], R)
    vor = integer_voronoi(S, R)
    dom = grid_domain(S, 16, vor, R)
    for ci in range(len(dom.cube_lows)):
        sl = dom.cube_rect(ci).slices_in(R)
        assert (dom.owner[sl] == dom.cube_seed[ci]).all()
    assert dom.uncovered.size() > 0
    d0 = uncovered_ball_density(dom, 0)
    d4 = uncovered_ball_density(dom, 4)
    assert 0 < d0 <= d4 <= 1


def test_init_m0_edges_inside_cubes_and_oracle_size():
    win = _window(64)
    sched = build_schedule(win, (8, 32), levels=0)
    vor = integer_voronoi(sched.seeds[0], win.window, cover_radius=None)
    dom = grid_domain(sched.seeds[0], 8, vor, win.window)
    m = init_m0(win, dom)
    m.validate(win.a_bits.bits, win.b_bits.bits)
    pairs = m.pairs()
    low = np.array(win.window.low)
    for a, b in pairs[:200]:
        ca = dom.cube_id[tuple(a - low)]
        cb = dom.cube_id[tuple(b - low)]
        assert ca == cb and ca >= 0
    # per-cube size equals the canonical per-rect matching
    g = TranslationGraph(win, win.sys.m_cap)
    ids = dom.cube_id
    for ci in (0, len(dom.cube_lows) // 2, len(dom.cube_lows) - 1):
        rect = dom.cube_rect(ci)
        standalone = canonical_max_matching(g, rect)
        sl = rect.slices_in(win.window)
        assert (m.a_match[sl] >= 0).sum() == standalone.size()
        assert np.array_equal(m.a_match[sl], standalone.a_match)


def test_prune_cross_cube():
    win = _window(64)
    sched = build_schedule(win, (8, 32), levels=1)
    vor0 = integer_voronoi(sched.seeds[0], win.window)
    dom0 = grid_domain(sched.seeds[0], 8, vor0, win.window, 0)
    m = init_m0(win, dom0)
    # prune against the same domain leaves everything in place
    same = prune_cross_cube(m, dom0)
    assert same.size() == m.size()
    vor1 = integer_voronoi(sched.seeds[1], win.window)
    dom1 = grid_domain(sched.seeds[1], 32, vor1, win.window, 1)
    pruned = prune_cross_cube(m, dom1)
    pruned.validate(win.a_bits.bits, win.b_bits.bits)
    assert pruned.size() <= m.size()
    pairs = pruned.pairs()
    low = np.array(win.window.low)
    for a, b in pairs[:300]:
        assert dom1.cube_id[tuple(a - low)] == dom1.cube_id[tuple(b - low)] >= 0


def test_rematch_and_refine_reach_per_cube_maximum():
    win = _window(128)
    sched = build_schedule(win, (8, 32), levels=1)
    vor0 = integer_voronoi(sched.seeds[0], win.window)
    dom0 = grid_domain(sched.seeds[0], 8, vor0, win.window, 0)
    m = init_m0(win, dom0)
    vor1 = integer_voronoi(sched.seeds[1], win.window)
    dom1 = grid_domain(sched.seeds[1], 32, vor1, win.window, 1)
    m2 = prune_cross_cube(m, dom1)
    m3, dirty = rematch_dirty_cubes(m2, dom1, dom0, win)
    m3.validate(win.a_bits.bits, win.b_bits.bits)
    dirty_set = set(dirty.tolist())
    g = TranslationGraph(win, win.sys.m_cap)
    for ci in range(len(dom1.cube_lows)):
        if ci in dirty_set:
            continue
        refine_cube(m3, dom1, ci, dom0, win)
    m3.validate(win.a_bits.bits, win.b_bits.bits)
    from eqdec.matching import bounded_augmenting_path, Matching

    for ci in range(len(dom1.cube_lows)):
        rect = dom1.cube_rect(ci)
        sl = rect.slices_in(win.window)
        local = Matching(rect, win.sys.m_cap, m3.a_match[sl].copy(), m3.b_match[sl].copy())
        assert bounded_augmenting_path(g, rect, local, max(rect.sides)) is None


def test_refine_single_flip_instance():
    # two adjacent basic rectangles, one unmatched A left, one unmatched B right
    m_cap = 2
    sys = sample_free_system(0, 2, 2, m_cap)
    R = Rect((0, 0), (8, 8))
    a = np.zeros((8, 8), dtype=bool)
    b = np.zeros((8, 8), dtype=bool)
    a[1, 3] = True
    b[1, 5] = True
    win = CosetWindow(TorusPoint([0, 0]), sys, R, CellSet(R, a), CellSet(R, b))
    S = CellSet.from_cells([(0, 0)], R)
    vor0 = integer_voronoi(S, R)
    dom0 = grid_domain(S, 4, vor0, R, 0)
    m = init_m0(win, dom0)
    assert m.size() == 0  # the pair straddles the 4-grid
    dom1 = grid_domain(S, 8, integer_voronoi(S, R), R, 1)
    m2 = prune_cross_cube(m, dom1)
    m3, dirty = rematch_dirty_cubes(m2, dom1, dom0, win)
    assert len(dirty) == 0
    refine_cube(m3, dom1, 0, dom0, win)
    assert m3.size() == 1
    assert m3.partner_of((1, 3)) == (1, 5)


def test_refine_requires_clean_cube():
    win = _window(64)
    sched = build_schedule(win, (8, 32), levels=1)
    vor0 = integer_voronoi(sched.seeds[0], win.window)
    dom0 = grid_domain(sched.seeds[0], 8, vor0, win.window, 0)
    m = init_m0(win, dom0)
    vor1 = integer_voronoi(sched.seeds[1], win.window)
    dom1 = grid_domain(sched.seeds[1], 32, vor1, win.window, 1)
    m2 = prune_cross_cube(m, dom1)
    _, dirty = rematch_dirty_cubes(m2, dom1, dom0, win)
    if len(dirty):
        with pytest.raises(ArgumentError):
            refine_cube(m2, dom1, int(dirty[0]), dom0, win)


def test_run_pipeline_identity_instance():
    sys = sample_free_system(7, 2, 2, 8)
    rng = np.random.default_rng(1)
    bits = rng.random((16, 16)) < 0.4
    shape = Bitmap(resolution=16, bits=bits)
    R = Rect((-32, -32), (64, 64))
    win = extract_window(shape, shape, sys, TorusPoint([0.25, 0.75]), R)
    sched = build_schedule(win, (8,), levels=0)
    res = run_pipeline(win, sched, 0)
    rep = res.reports[0]
    assert rep.unmatched_fraction == 0.0
    assert rep.two_sided_cubes == 0
    # identical parts saturate every covered cube
    ids = np.zeros(res.matching.a_match.shape, dtype=bool)
    csl = win.core_rect().slices_in(win.window)
    assert ((res.matching.a_match[csl] >= 0) == win.a_bits.bits[csl]).all()


def test_run_pipeline_levels_zero_bound():
    win = _window(64)
    sched = build_schedule(win, (8, 32), levels=0)
    res = run_pipeline(win, sched, 0)
    assert res.reports[0].unmatched_exceeds_discrepancy == 0


def test_run_pipeline_decreasing_unmatched_small():
    win = _window(448)
    sched = build_schedule(win, (4, 16, 64), levels=2)
    res = run_pipeline(win, sched, 2, check_invariants=True)
    fr = [r.unmatched_fraction for r in res.reports]
    assert fr[0] > fr[1] > fr[2]


def test_build_schedule_validation():
    win = _window(64)
    with pytest.raises(ArgumentError):
        build_schedule(win, (8, 24), levels=1)  # not a power of two
    with pytest.raises(ArgumentError):
        build_schedule(win, (32, 8), levels=1)  # not increasing
    with pytest.raises(ArgumentError):
        build_schedule(win, (8, 128), levels=1)  # top cube exceeds window
    sched = build_schedule(win, (4, 8, 32, 128), levels=1)
    assert sched.seed_radii == (32, None)
    assert sched.summability["partials"]
