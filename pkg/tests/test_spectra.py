import math

import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from clampedplate import geometry as G
from clampedplate import spectra as S
from clampedplate.specfun import clamped_disk_roots

GAMMA1_DISK = 3.1962206165822913**4  # about 104.363
GAMMA1_SQUARE = 1294.93  # Richardson over h = 1/32, 1/64, 1/128


@pytest.fixture(scope="module")
def disk_exact():
    return S.disk_spectrum(1.0, 10).values


@pytest.fixture(scope="module")
def disk_fd64():
    return S.fd_spectrum(G.Disk(1.0), 1 / 64, 10)


# ---------------------------------------------------------------- analytic disk


def test_disk_first_eigenvalue(disk_exact):
    assert disk_exact[0] == pytest.approx(GAMMA1_DISK, rel=1e-12)
    assert disk_exact[0] == pytest.approx(104.363, abs=5e-4)


def test_disk_double_eigenvalue(disk_exact):
    k1 = clamped_disk_roots(1, 1)[0]
    assert disk_exact[1] == disk_exact[2] == pytest.approx(k1**4, rel=1e-14)
    assert disk_exact[1] == pytest.approx(452.0, abs=0.01)


@settings(max_examples=15, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(radius=st.floats(0.2, 5.0))
def test_disk_radius_scaling(disk_exact, radius):
    base = disk_exact[:6]
    scaled = S.disk_spectrum(radius, 6).values
    np.testing.assert_allclose(scaled, base / radius**4, rtol=1e-13)


def test_disk_multiplicity_against_brute_force():
    count = 150
    modes = S.disk_modes(1.0, count)
    brute = []
    for m in range(0, 40):
        for k in clamped_disk_roots(m, 8):
            brute += [k**4] * (1 if m == 0 else 2)
    brute = np.sort(brute)[:count]
    np.testing.assert_allclose([g for g, _, _ in modes], brute, rtol=1e-13)
    counts = {}
    for g, m, k in modes:
        counts[(m, k)] = counts.get((m, k), 0) + 1
    last = (modes[-1][1], modes[-1][2])
    for key, c in counts.items():
        # only the top mode of the list may lose its partner to the cutoff
        assert c == (1 if key[0] == 0 else 2) or key == last


def test_disk_spectrum_provenance():
    s = S.disk_spectrum(2.0, 3, center=(1.0, -1.0))
    assert s.method == "analytic-disk"
    assert s.residuals is None and s.resolution is None
    assert s.eigenvalues[0] == pytest.approx(GAMMA1_DISK / 16, rel=1e-13)
    assert "radius" in s.domain_id


def test_disk_count_limits():
    with pytest.raises(ValueError):
        S.disk_spectrum(1.0, 0)
    with pytest.raises(ValueError):
        S.disk_spectrum(1.0, 2001)


# ---------------------------------------------------------------- Spectrum type


def test_spectrum_roundtrip():
    s = S.Spectrum((1.0, 2.0, 2.0), "finite-difference", "{}", 0.25, (1e-9, 2e-9, 3e-9))
    t = S.Spectrum.from_dict(s.to_dict())
    assert t == s


@pytest.mark.parametrize("vals", [(0.0, 1.0), (2.0, 1.0), (-1.0,)])
def test_spectrum_invariants(vals):
    with pytest.raises(ValueError):
        S.Spectrum(vals, "analytic-disk", "{}")


# ---------------------------------------------------------------- assembly


@pytest.fixture(scope="module")
def square_op():
    return S.assemble_biharmonic(G.Rectangle(1.0, 1.0), 1 / 32)


def _index(op, i, j):
    gi = op.grid_index
    return int(np.nonzero((gi[:, 0] == i) & (gi[:, 1] == j))[0][0])


def test_thirteen_point_stencil(square_op):
    h = 1 / 32
    A = square_op.matrix
    row = A[_index(square_op, 16, 16)].toarray().ravel() * h**4
    assert sorted(row[row != 0]) == pytest.approx([-8] * 4 + [1] * 4 + [2] * 4 + [20])
    assert row[_index(square_op, 16, 16)] == pytest.approx(20.0, rel=1e-12)


def test_mirror_ghost_adds_to_diagonal(square_op):
    h = 1 / 32
    A = square_op.matrix
    assert A[_index(square_op, 1, 16), _index(square_op, 1, 16)] * h**4 == pytest.approx(21.0)
    assert A[_index(square_op, 1, 1), _index(square_op, 1, 1)] * h**4 == pytest.approx(22.0)
    assert A[_index(square_op, 2, 16), _index(square_op, 2, 16)] * h**4 == pytest.approx(20.0)


@pytest.mark.parametrize("dom", [G.Rectangle(1.0, 1.0), G.Disk(1.0), G.Polygon(((0, 0), (1, 0), (0.3, 0.8)))])
def test_operator_symmetric(dom):
    A = S.assemble_biharmonic(dom, 1 / 32).matrix
    assert abs(A - A.T).max() == 0.0


def _deep_rows(op, depth):
    d = op.domain.signed_distance(op.nodes)
    return np.nonzero(d >= depth * op.h)[0]


@pytest.mark.parametrize("dom", [G.Rectangle(1.0, 1.0), G.Disk(1.0)])
def test_interior_rows_annihilate_constants_and_reproduce_x4(dom):
    op = S.assemble_biharmonic(dom, 1 / 32)
    rows = _deep_rows(op, 3)
    x, y = op.nodes[:, 0], op.nodes[:, 1]
    one = op.matrix @ np.ones(op.dimension)
    np.testing.assert_allclose(one[rows], 0.0, atol=1e-6 * 20 * 32**4)
    quartic = op.matrix @ (x**4)
    np.testing.assert_allclose(quartic[rows], 24.0, rtol=1e-7)
    mixed = op.matrix @ (x**2 * y**2)
    np.testing.assert_allclose(mixed[rows], 8.0, rtol=1e-6)


def test_factored_apply_matches_matrix(square_op):
    v = np.random.default_rng(0).standard_normal(square_op.dimension)
    np.testing.assert_allclose(square_op.apply(v), square_op.matrix @ v, rtol=1e-9, atol=1e-6)


def test_positive_definite(square_op):
    vals, _, _ = S.smallest_eigenvalues(square_op, 1)
    assert vals[0] > 0


def test_assembly_errors():
    with pytest.raises(G.GeometryError):
        S.assemble_biharmonic(G.Disk(1.0), 0.5)
    with pytest.raises(G.GeometryError):
        S.assemble_biharmonic(G.Polygon(((0, 0), (2, 0), (2, 2), (1, 0.5), (0, 2))), 1 / 16)
    with pytest.raises(ValueError):
        S.assemble_biharmonic(G.Disk(1.0), -0.1)


# ---------------------------------------------------------------- eigen engine


def test_diagonal_and_identity():
    vals, res, _ = S.smallest_eigenvalues(sp.diags(np.arange(1.0, 6.0)), 2)
    assert vals == pytest.approx([1.0, 2.0])
    vals, _, _ = S.smallest_eigenvalues(sp.identity(8), 1)
    assert vals == pytest.approx([1.0])


def _squared_laplacian_1d(n):
    L = sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]) * (n + 1) ** 2
    return (L @ L).tocsc()


def test_sparse_against_scipy():
    A = _squared_laplacian_1d(400)
    vals, res, vecs = S.smallest_eigenvalues(A, 6)
    ref = np.sort(spla.eigsh(A, k=6, sigma=0, which="LM")[0])
    # double-precision shift-invert carries about cond * eps ~ 1e-9 relative error
    np.testing.assert_allclose(vals, ref, rtol=1e-8)
    assert np.all(res <= S.RESIDUAL_TOL)
    exact = (2 * (n := 401) ** 2 * (1 - np.cos(np.pi * np.arange(1, 7) / n))) ** 2
    np.testing.assert_allclose(vals, exact, rtol=1e-10)


def test_nonconvergence_reports_best_residuals():
    with pytest.raises(S.ConvergenceError) as info:
        S.smallest_eigenvalues(_squared_laplacian_1d(400), 4, max_iter=1)
    assert len(info.value.residuals) == 4
    assert np.all(np.isfinite(info.value.residuals))


def test_count_precondition():
    with pytest.raises(ValueError):
        S.smallest_eigenvalues(_squared_laplacian_1d(200), 50)
    with pytest.raises(ValueError):
        S.smallest_eigenvalues(sp.identity(5), 0)


def test_residuals_reverified_by_one_application():
    op = S.assemble_biharmonic(G.Disk(1.0), 1 / 48)
    vals, res, vecs = S.smallest_eigenvalues(op, 6)
    for lam, r, v in zip(vals, res, vecs.T):
        again = np.linalg.norm(op.apply(v) - lam * v) / (lam * np.linalg.norm(v))
        assert float(again) <= S.RESIDUAL_TOL
        assert float(again) == pytest.approx(r, rel=1e-3)


# ---------------------------------------------------------------- finite-difference spectra


def test_disk_fd_within_two_percent(disk_fd64):
    assert disk_fd64.eigenvalues[0] == pytest.approx(GAMMA1_DISK, rel=0.02)


def test_disk_fd_first_ten(disk_fd64, disk_exact):
    err = np.abs(disk_fd64.values - disk_exact) / disk_exact
    assert err.max() <= 0.03
    assert max(disk_fd64.residuals) <= 1e-8
    assert disk_fd64.method == "finite-difference" and disk_fd64.resolution == 1 / 64


def test_disk_fd_degenerate_pairs(disk_fd64, disk_exact):
    v = disk_fd64.values
    for i in range(1, 10):
        for j in range(i + 1, 10):
            if disk_exact[i] == disk_exact[j]:
                disc = max(abs(v[i] - disk_exact[i]), abs(v[j] - disk_exact[j]))
                assert abs(v[i] - v[j]) <= 2 * disc


def test_scaling_law(disk_fd64):
    big = S.fd_spectrum(G.Disk(2.0), 1 / 32, 10)
    np.testing.assert_allclose(big.values, disk_fd64.values / 16, rtol=0.01)


def test_square_fd():
    s = S.fd_spectrum(G.Rectangle(1.0, 1.0), 1 / 64, 1)
    assert s.eigenvalues[0] == pytest.approx(1295.0, rel=0.02)
    assert s.eigenvalues[0] == pytest.approx(GAMMA1_SQUARE, rel=0.005)


def test_translation_invariance():
    a = S.fd_spectrum(G.Rectangle(1.0, 0.5), 1 / 32, 3).values
    b = S.fd_spectrum(G.Rectangle(1.0, 0.5, (3.25, -1.75)), 1 / 32, 3).values
    np.testing.assert_allclose(a, b, rtol=1e-10)


def test_square_and_rotated_square_polygon_agree():
    rect = S.fd_spectrum(G.Rectangle(1.0, 1.0), 1 / 32, 1).values[0]
    poly = S.fd_spectrum(G.Rectangle(1.0, 1.0).as_polygon(), 1 / 32, 1).values[0]
    assert poly == pytest.approx(rect, rel=1e-10)


# ---------------------------------------------------------------- extrapolation


def test_richardson_examples():
    assert S.richardson(3.0, 3.0, 2) == 3.0
    assert S.richardson(1.0, 0.85, 2) == pytest.approx(0.8)
    with pytest.raises(ValueError):
        S.richardson(1.0, 1.0, 0)


@given(st.floats(0.5, 2.0), st.floats(-5, 5), st.integers(1, 4))
def test_richardson_cancels_leading_term(v, c, p):
    h = 0.1
    assert S.richardson(v + c * h**p, v + c * (h / 2) ** p, p) == pytest.approx(v, abs=1e-12)


def test_observed_order():
    vals = [1 + 0.1**2, 1 + 0.05**2, 1 + 0.025**2]
    np.testing.assert_allclose(S.observed_order(vals), [2.0], rtol=1e-9)
    np.testing.assert_allclose(S.observed_order(vals, reference=1.0), [2.0, 2.0], rtol=1e-9)
