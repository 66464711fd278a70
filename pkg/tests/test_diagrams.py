import itertools

import mpmath as mp
import numpy as np
import pytest

from magnon import diagrams, dispersion, lattice, wick
from magnon._errors import CapacityError, ValidationError


def flat_label(l1, l2, l3, ell):
    return (l1 * ell + l2) * ell + l3


def test_grid_validation():
    with pytest.raises(ValidationError):
        diagrams.PeriodicGrid(2)
    with pytest.raises(ValidationError):
        diagrams.PeriodicGrid(4.0)
    with pytest.raises(CapacityError):
        diagrams.PeriodicGrid(12)
    grid = diagrams.PeriodicGrid(11, allow_large=True)
    assert grid.n_modes == 11**3


def test_grid_geometry():
    grid = diagrams.PeriodicGrid(4)
    assert grid.zero_index == 0
    assert np.all(grid.kvecs > -np.pi) and np.all(grid.kvecs <= np.pi)
    assert np.allclose(grid.kvecs[0], 0.0)
    # epsilon agrees with the dispersion evaluated on the mapped vectors
    assert np.allclose(grid.eps, dispersion.epsilon(grid.kvecs), atol=1e-14)


def test_sum_diff_tables():
    ell = 5
    grid = diagrams.PeriodicGrid(ell)
    rng = np.random.default_rng(3)
    for _ in range(200):
        a, b = rng.integers(0, grid.n_modes, size=2)
        la, lb = grid.labels[a], grid.labels[b]
        want_sum = flat_label(*((la + lb) % ell), ell)
        want_diff = flat_label(*((la - lb) % ell), ell)
        assert grid.sum_idx[a, b] == want_sum
        assert grid.diff_idx[a, b] == want_diff
    # epsilon through the tables equals epsilon of the vector arithmetic
    ks = grid.kvecs
    idx = rng.integers(0, grid.n_modes, size=(50, 2))
    via_table = grid.eps[grid.diff_idx[idx[:, 0], idx[:, 1]]]
    direct = dispersion.epsilon(ks[idx[:, 0]] - ks[idx[:, 1]])
    assert np.allclose(via_table, direct, atol=1e-12)


def test_occupations():
    grid = diagrams.PeriodicGrid(4)
    f = diagrams.occupations(grid, 2.0)
    assert f[grid.zero_index] == 0.0
    nz = grid.nonzero()
    want = 1.0 / np.expm1(2.0 * grid.eps[nz])
    assert np.allclose(f[nz], want, rtol=1e-14)
    with pytest.raises(ValidationError):
        diagrams.occupations(grid, 0.0)


def test_vertex_symmetries_on_shell():
    ell = 5
    grid = diagrams.PeriodicGrid(ell)
    rng = np.random.default_rng(11)
    for _ in range(100):
        i1, i2, i3 = rng.integers(1, grid.n_modes, size=3)
        i4 = grid.diff_idx[grid.sum_idx[i1, i2], i3]
        k1, k2, k3, k4 = (grid.kvecs[i] for i in (i1, i2, i3, i4))
        nu = diagrams.vertex_nu(k1, k2, k3, k4)
        assert diagrams.vertex_nu(k2, k1, k3, k4) == pytest.approx(nu, abs=1e-11)
        assert diagrams.vertex_nu(k1, k2, k4, k3) == pytest.approx(nu, abs=1e-11)
        assert diagrams.vertex_nu(k3, k4, k1, k2) == pytest.approx(nu, abs=1e-11)
        # equivalent 6-term shape used inside the double sum
        e = dispersion.epsilon
        alt = (
            2.0 * e(k1 - k3)
            + 2.0 * e(k2 - k3)
            - e(k1)
            - e(k2)
            - e(k3)
            - e(k4)
        )
        assert nu == pytest.approx(alt, abs=1e-11)


def test_expectation_j_matches_position_wick():
    # the factorized mode sum against a position-space pairing evaluation of
    # the same five normal-ordered monomials, on the full 3-torus
    ell, bt, two_s = 3, 1.5, 2
    grid = diagrams.PeriodicGrid(ell)
    f = diagrams.occupations(grid, bt)
    spec = lattice.LatticeSpec(3, ell, boundary=lattice.Boundary.PERIODIC)
    xs = lattice.sites(spec)
    phases = xs @ grid.kvecs.T
    table = (np.cos(phases) * f) @ np.cos(phases.T) + (np.sin(phases) * f) @ np.sin(
        phases.T
    )
    table /= grid.n_modes
    s = two_s / 2.0
    total = 0.0
    for i, j in lattice.nn_pairs(spec):
        for x, y in ((i, j), (j, i)):
            c, a = True, False
            t1 = wick.wick_expectation(
                [(x, c), (y, c), (y, c), (y, a), (y, a), (y, a)], table
            )
            t2 = wick.wick_expectation([(x, c), (y, c), (y, a), (y, a)], table)
            t3 = wick.wick_expectation(
                [(x, c), (x, c), (y, c), (x, a), (y, a), (y, a)], table
            )
            t4 = wick.wick_expectation(
                [(x, c), (x, c), (x, c), (x, a), (x, a), (y, a)], table
            )
            t5 = wick.wick_expectation([(x, c), (x, c), (x, a), (y, a)], table)
            total += t1 + t2 - 2.0 * t3 + t4 + t5
    want = total / (32.0 * s * s) / spec.n_sites
    got = diagrams.expectation_J(grid, bt, two_s)
    assert got.value == pytest.approx(want, rel=1e-10)
    assert got.zero_mode_policy == "exclude"


def test_biggest_error_dual_forms():
    grid = diagrams.PeriodicGrid(4)
    bt, two_s = 1.3, 2
    val = diagrams.biggest_error_term(grid, bt, two_s)
    assert val.value == pytest.approx(val.extras["double_sum_form"], rel=1e-12)
    # brute double momentum sum
    f = diagrams.occupations(grid, bt)
    s = two_s / 2.0
    acc = 0.0
    for i1 in grid.nonzero():
        for i2 in grid.nonzero():
            acc += f[i1] * f[i2] * (12.0 - grid.eps[i1] - grid.eps[i2])
    want = acc / (16.0 * s * s * grid.ell**6)
    assert val.value == pytest.approx(want, rel=1e-11)


def mp_duhamel(delta, beta_tilde, p12):
    x = mp.mpf(beta_tilde) * mp.mpf(delta)
    if x == 0:
        return mp.mpf(p12) * mp.mpf(beta_tilde) ** 2 / 2
    return mp.mpf(p12) * (mp.e**x - 1 - x) / mp.mpf(delta) ** 2


def test_duhamel_kernel_branches():
    mp.mp.dps = 50
    bt = 2.0
    rng = np.random.default_rng(5)
    # deltas straddling both branch seams, plus sign flips
    mags = np.array([1e-6, 4.9e-5, 5.1e-5, 1e-3, 1.0, 14.9, 15.1, 40.0])
    deltas = np.concatenate([mags, -mags])
    p12 = rng.uniform(0.1, 2.0, size=deltas.size)
    q = np.exp(bt * deltas) * p12  # exact product identity
    got = diagrams.duhamel_kernel(deltas, bt, p12, q)
    for d, p, g in zip(deltas, p12, got):
        want = float(mp_duhamel(d, bt, p))
        assert g == pytest.approx(want, rel=1e-10)


def brute_left(grid, beta_tilde, two_s):
    """Triple label loop with independent modular arithmetic and mp kernel."""
    mp.mp.dps = 40
    ell = grid.ell
    f = diagrams.occupations(grid, beta_tilde)
    eps = grid.eps
    labels = [tuple(l) for l in grid.labels]
    full = mp.mpf(0)
    red_f1f2 = 0.0
    nzl = list(range(1, ell**3))
    for i1 in nzl:
        l1 = labels[i1]
        for i2 in nzl:
            l2 = labels[i2]
            l12 = tuple((l1[m] + l2[m]) % ell for m in range(3))
            for i3 in nzl:
                l3 = labels[i3]
                l4 = tuple((l12[m] - l3[m]) % ell for m in range(3))
                i4 = flat_label(*l4, ell)
                if i4 == 0:
                    continue
                l13 = flat_label(*(((l1[m] - l3[m]) % ell) for m in range(3)), ell)
                l23 = flat_label(*(((l2[m] - l3[m]) % ell) for m in range(3)), ell)
                nu = (
                    2.0 * eps[l13]
                    + 2.0 * eps[l23]
                    - eps[i1]
                    - eps[i2]
                    - eps[i3]
                    - eps[i4]
                )
                delta = eps[i1] + eps[i2] - eps[i3] - eps[i4]
                p12 = f[i1] * f[i2] * (1.0 + f[i3]) * (1.0 + f[i4])
                full += mp.mpf(nu) ** 2 * mp_duhamel(delta, beta_tilde, p12)
                if abs(delta) > 1e-12:
                    red_f1f2 += nu * nu / delta * f[i1] * f[i2]
    s = two_s / 2.0
    norm = 16.0 * s * s * ell**9
    return -float(full) / (beta_tilde * norm), red_f1f2 / norm


def test_left_diagram_matches_brute():
    grid = diagrams.PeriodicGrid(3)
    bt, two_s = 2.0, 2
    got = diagrams.left_diagram(grid, bt, two_s)
    want_full, want_red = brute_left(grid, bt, two_s)
    assert got.value == pytest.approx(want_full, rel=1e-11)
    assert got.extras["reduced_f1f2"] == pytest.approx(want_red, rel=1e-11)
    assert got.value < 0.0


def test_right_diagram_matches_brute():
    grid = diagrams.PeriodicGrid(3)
    bt, two_s = 2.0, 2
    f = diagrams.occupations(grid, bt)
    eps = grid.eps
    nz = grid.nonzero()
    acc = 0.0
    for i2 in nz:
        g = 0.0
        for ik in nz:
            g += (eps[grid.diff_idx[i2, ik]] - eps[ik] - eps[i2]) * f[ik]
        acc += f[i2] * (1.0 + f[i2]) * g * g
    s = two_s / 2.0
    want = -bt * acc / (2.0 * s * s * grid.ell**9)
    got = diagrams.right_diagram(grid, bt, two_s)
    assert got.value == pytest.approx(want, rel=1e-11)
    assert got.value < 0.0


@pytest.mark.parametrize("ell", [3, 4])
def test_k3_identity_all_pairs(ell):
    grid = diagrams.PeriodicGrid(ell)
    worst = 0.0
    for i1 in grid.nonzero():
        for i2 in grid.nonzero():
            worst = max(worst, diagrams.k3_identity_residual(grid, int(i1), int(i2)))
    assert worst < 1e-12


def test_k3_identity_rejects_zero_mode():
    grid = diagrams.PeriodicGrid(3)
    with pytest.raises(ValidationError):
        diagrams.k3_identity_residual(grid, 0, 5)


def test_fit_loglog_slope():
    xs = np.array([1.0, 2.0, 4.0, 8.0])
    ys = 3.0 * xs**-2.5
    slope, r2 = diagrams.fit_loglog_slope(xs, ys)
    assert slope == pytest.approx(-2.5, abs=1e-12)
    assert r2 == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValidationError):
        diagrams.fit_loglog_slope([1.0], [2.0])
    with pytest.raises(ValidationError):
        diagrams.fit_loglog_slope([-1.0, 2.0], [1.0, 1.0])
    with pytest.raises(ValidationError):
        diagrams.fit_loglog_slope([1.0, 2.0], [0.0, 1.0])


def test_cancellation_scan_structure():
    bts = [0.8, 1.0, 1.25, 1.6]
    res = diagrams.cancellation_scan(4, 2, bts, k3_samples=20, seed=1)
    assert res.ell == 4 and res.two_s == 2
    assert len(res.rows) == 4
    keys = {
        "beta_tilde",
        "biggest_error",
        "left_f1f2",
        "combined",
        "right_diagram",
        "j_remainder",
        "left_full",
    }
    for row in res.rows:
        assert keys <= set(row)
    assert set(res.slopes) == {
        "biggest_error",
        "combined",
        "right_diagram",
        "j_remainder",
    }
    for fit in res.slopes.values():
        assert set(fit) == {"slope", "r_squared"}
    assert res.k3_residual_max < 1e-12
    assert res.zero_mode_policy == "exclude"
    # deterministic for a fixed seed
    res2 = diagrams.cancellation_scan(4, 2, bts, k3_samples=20, seed=1)
    assert res2.rows == res.rows
    assert res2.k3_residual_max == res.k3_residual_max


def test_cancellation_scan_few_points_no_slopes():
    res = diagrams.cancellation_scan(3, 2, [1.0, 2.0], k3_samples=5)
    assert res.slopes == {}


def test_cancellation_scan_validation():
    with pytest.raises(ValidationError):
        diagrams.cancellation_scan(4, 2, [1.0, 1.0])
    with pytest.raises(ValidationError):
        diagrams.cancellation_scan(4, 2, [1.0, -2.0])
    with pytest.raises(CapacityError):
        diagrams.cancellation_scan(12, 2, [1.0, 2.0])
