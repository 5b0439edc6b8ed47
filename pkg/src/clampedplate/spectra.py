"""Clamped plate eigenvalues: exact on disks, finite differences elsewhere.

The finite-difference operator is assembled in energy form
``A = L^T W L / h^2``: ``L`` evaluates the 5-point Laplacian at every grid
node whose cell meets the domain, ``W`` holds the area of that cell inside
the domain, and values at nodes outside (or within one spacing of) the
boundary are eliminated through the clamped extrapolation
``u(t) ~ c t^2`` along a grid line, ``t`` being the distance past the
boundary crossing. On grid-aligned rectangles this is exactly the 13-point
stencil with mirror ghosts.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import Disk, Domain, GeometryError
from .specfun import MAX_ORDER, clamped_disk_roots_below

__all__ = [
    "Spectrum",
    "DiscreteOperator",
    "ConvergenceError",
    "EnumerationError",
    "disk_spectrum",
    "disk_modes",
    "assemble_biharmonic",
    "smallest_eigenvalues",
    "richardson",
    "observed_order",
    "fd_spectrum",
]

RESIDUAL_TOL = 1e-8
MAX_OUTER = 500
DENSE_LIMIT = 64
# residual level at which inverse iteration moves to extended precision
EXTENDED_SWITCH = 1e-6
REFINE_STEPS = 2
# nodes closer than SLAVE_DEPTH * h to the boundary are interpolated, not solved for
SLAVE_DEPTH = 1.0


class ConvergenceError(RuntimeError):
    def __init__(self, message, residuals):
        super().__init__(f"{message}; best residuals {np.array2string(np.asarray(residuals), precision=3)}")
        self.residuals = residuals


class EnumerationError(RuntimeError):
    pass


def domain_id(domain: Domain) -> str:
    return json.dumps(domain.canonical(), sort_keys=True)


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: tuple
    method: str
    domain_id: str
    resolution: float | None = None
    residuals: tuple | None = None

    def __post_init__(self):
        vals = np.asarray(self.eigenvalues, dtype=float)
        if vals.size and (np.any(vals <= 0) or np.any(np.diff(vals) < 0)):
            raise ValueError("eigenvalues must be positive and non-decreasing")

    def __len__(self):
        return len(self.eigenvalues)

    @property
    def values(self) -> np.ndarray:
        return np.asarray(self.eigenvalues, dtype=float)

    def to_dict(self) -> dict:
        return {
            "domain_id": self.domain_id,
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "method": self.method,
            "residuals": None if self.residuals is None else [float(r) for r in self.residuals],
            "resolution": self.resolution,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Spectrum":
        res = data.get("residuals")
        return cls(
            eigenvalues=tuple(data["eigenvalues"]),
            method=data["method"],
            domain_id=data["domain_id"],
            resolution=data.get("resolution"),
            residuals=None if res is None else tuple(res),
        )


def disk_modes(radius: float, count: int):
    """The ``count`` lowest clamped-disk modes as ``(Gamma, m, k)`` triples.

    Orders ``m >= 1`` appear twice (cosine and sine modes).
    """
    if not radius > 0:
        raise ValueError("radius must be positive")
    if not 1 <= count <= 2000:
        raise ValueError("count must lie in [1, 2000]")
    # n = 2 Weyl asymptotics: k_count ~ 2 sqrt(count)
    kmax = 2.3 * math.sqrt(count) + 4.0
    while True:
        if kmax > MAX_ORDER + 1:
            raise EnumerationError(f"order enumeration cap {MAX_ORDER} reached")
        # first root of order m exceeds its first J_m zero, which exceeds m
        roots = clamped_disk_roots_below(kmax, range(0, int(math.ceil(kmax)) + 1))
        modes = []
        for m, ks in roots.items():
            for k in ks:
                modes.extend([(k, m)] * (1 if m == 0 else 2))
        if len(modes) >= count:
            break
        kmax *= 1.25
    modes.sort()
    return [((k / radius) ** 4, m, k) for k, m in modes[:count]]


def disk_spectrum(radius: float, count: int, center=(0.0, 0.0)) -> Spectrum:
    """Exact clamped plate eigenvalues of a disk, with multiplicity."""
    modes = disk_modes(radius, count)
    return Spectrum(
        eigenvalues=tuple(float(g) for g, _, _ in modes),
        method="analytic-disk",
        domain_id=domain_id(Disk(radius, center)),
    )


@dataclass
class DiscreteOperator:
    """Clamped biharmonic operator on the free grid unknowns.

    ``matrix`` is the assembled symmetric coefficient table; ``laplacian``
    and ``weights`` are its factors (``matrix = L^T diag(weights) L``),
    used for accurate residuals.
    """

    matrix: sp.csr_matrix
    laplacian: sp.csr_matrix
    weights: np.ndarray
    h: float
    nodes: np.ndarray
    grid_index: np.ndarray
    domain: Domain = field(repr=False)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def apply(self, x):
        lx = self.laplacian @ x
        if lx.ndim == 2:
            return self.laplacian.T @ (self.weights[:, None] * lx)
        return self.laplacian.T @ (self.weights * lx)


def assemble_biharmonic(domain: Domain, h: float) -> DiscreteOperator:
    """Assemble the clamped biharmonic operator on a Cartesian grid of spacing ``h``.

    The grid passes through ``domain.grid_anchor()``. Nodes with
    ``d(x) >= h`` are unknowns; every other node needed by a Laplacian
    evaluation takes the value ``u_free * (t_g / t_free)^2`` from the first
    unknown along the grid line that crosses the boundary soonest. Domains
    must be convex.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    if not domain.is_convex():
        raise GeometryError("finite differences support convex domains only")
    ax, ay = domain.grid_anchor()
    x0, x1, y0, y1 = domain.bbox()
    pad = 4
    i0 = int(math.floor((x0 - ax) / h)) - pad
    i1 = int(math.ceil((x1 - ax) / h)) + pad
    j0 = int(math.floor((y0 - ay) / h)) - pad
    j1 = int(math.ceil((y1 - ay) / h)) + pad
    xs = ax + h * np.arange(i0, i1 + 1)
    ys = ay + h * np.arange(j0, j1 + 1)
    nx, ny = xs.size, ys.size
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([X, Y], axis=-1)
    sd = domain.signed_distance(pts)
    tol = 1e-9 * h

    free = sd >= SLAVE_DEPTH * h - tol
    per_row = free.sum(axis=1).max(initial=0)
    per_col = free.sum(axis=0).max(initial=0)
    if per_row < 10 or per_col < 10:
        raise GeometryError(
            f"degenerate grid: h={h} leaves fewer than 10 interior nodes per dimension"
        )
    nfree = int(free.sum())
    number = -np.ones((nx, ny), dtype=np.int64)
    number[free] = np.arange(nfree)
    flat = np.arange(nx * ny).reshape(nx, ny)

    # quadrature weights: cell area inside the domain
    half = h / 2
    weight = np.zeros((nx, ny))
    full = sd >= half * math.sqrt(2) - tol
    weight[full] = h * h
    cut = (sd > -half * math.sqrt(2) - tol) & ~full
    if np.any(cut):
        cx, cy = X[cut], Y[cut]
        weight[cut] = domain.cell_area(cx - half, cx + half, cy - half, cy + half)
    evaluated = weight > 1e-14 * h * h

    needed = evaluated.copy()
    needed[1:, :] |= evaluated[:-1, :]
    needed[:-1, :] |= evaluated[1:, :]
    needed[:, 1:] |= evaluated[:, :-1]
    needed[:, :-1] |= evaluated[:, 1:]

    rows = [flat[free]]
    cols = [number[free]]
    vals = [np.ones(nfree)]
    ghost = needed & ~free & (np.abs(sd) > tol)
    gi, gj = np.nonzero(ghost)
    if gi.size:
        gp = pts[gi, gj]
        dirs = np.array([[1, 0], [-1, 0], [0, 1], [0, -1]])
        params = np.stack(
            [domain.entry_parameter(gp, np.broadcast_to(d, gp.shape).astype(float)) for d in dirs],
            axis=1,
        )
        inside = sd[gi, gj] > 0
        # outside: the line must enter ahead; inside: the boundary lies behind
        valid = np.isfinite(params) & (inside[:, None] | (params > 0))
        reach = max(nx, ny)
        first = np.full((gi.size, 4), -1, dtype=np.int64)
        grazing = np.ones((gi.size, 4), dtype=bool)
        for d, (di, dj) in enumerate(dirs):
            todo = np.ones(gi.size, dtype=bool)
            for k in range(1, reach):
                ii = gi + k * di
                jj = gj + k * dj
                ok = todo & (ii >= 0) & (ii < nx) & (jj >= 0) & (jj < ny)
                if not ok.any():
                    break
                grazing[ok, d] &= sd[ii[ok], jj[ok]] <= tol
                hit = ok.copy()
                hit[ok] = free[ii[ok], jj[ok]]
                first[hit, d] = k
                todo &= ~hit
        usable = valid & (first > 0)
        score = np.where(usable, np.abs(params), np.inf)
        best = np.argmin(score, axis=1)
        rr = np.arange(gi.size)
        found = np.isfinite(score[rr, best])
        # a grid line running along a straight edge only meets zeros: the ghost is zero
        if not np.all(found | grazing.any(axis=1)):
            raise GeometryError("degenerate grid: no unknown along a ghost's grid line")
        k = first[rr, best]
        t_g = -params[rr, best]
        step = dirs[best]
        coef = np.zeros(gi.size)
        coef[found] = (t_g[found] / (k[found] * h + t_g[found])) ** 2
        target = np.full(gi.size, -1, dtype=np.int64)
        target[found] = number[gi[found] + k[found] * step[found, 0], gj[found] + k[found] * step[found, 1]]
        rows.append(flat[gi[found], gj[found]])
        cols.append(target[found])
        vals.append(coef[found])
    extension = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nx * ny, nfree),
    )

    ei, ej = np.nonzero(evaluated)
    ne = ei.size
    r_idx, c_idx, d_val = [np.arange(ne)], [flat[ei, ej]], [np.full(ne, -4.0)]
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        r_idx.append(np.arange(ne))
        c_idx.append(flat[ei + di, ej + dj])
        d_val.append(np.ones(ne))
    stencil = sp.csr_matrix(
        (np.concatenate(d_val) / h**2, (np.concatenate(r_idx), np.concatenate(c_idx))),
        shape=(ne, nx * ny),
    )
    lap = (stencil @ extension).tocsr()
    lap.eliminate_zeros()
    w = weight[ei, ej] / h**2
    matrix = (lap.T @ sp.diags(w) @ lap).tocsr()
    # exact symmetry: average out rounding from the triple product
    matrix = ((matrix + matrix.T) * 0.5).tocsr()
    matrix.sort_indices()
    fi, fj = np.nonzero(free)
    return DiscreteOperator(
        matrix=matrix,
        laplacian=lap,
        weights=w,
        h=h,
        nodes=pts[fi, fj],
        grid_index=np.column_stack([fi + i0, fj + j0]),
        domain=domain,
    )


def _apply(op, x):
    if isinstance(op, DiscreteOperator):
        return op.apply(x)
    return op @ x


def _matrix(op):
    return op.matrix if isinstance(op, DiscreteOperator) else sp.csc_matrix(op)


def _solve_refined(lu, op, X, steps=REFINE_STEPS):
    """``A^{-1} X`` in extended precision via iterative refinement on the double LU."""
    Y = lu.solve(np.asarray(X, dtype=float)).astype(np.longdouble)
    for _ in range(steps):
        R = X - _apply(op, Y)
        Y += lu.solve(np.asarray(R, dtype=float))
    return Y


def _ritz(op, Y, locked):
    """Rayleigh-Ritz on span(Y) in extended precision; returns Ritz pairs and residuals."""
    if locked.shape[1]:
        for _ in range(2):
            Y = Y - locked @ (locked.T @ Y)
    AY = _apply(op, Y)
    H = np.asarray(Y.T @ AY, dtype=float)
    G = np.asarray(Y.T @ Y, dtype=float)
    theta, V = la.eigh(0.5 * (H + H.T), 0.5 * (G + G.T))
    X = Y @ V.astype(np.longdouble)
    AX = AY @ V.astype(np.longdouble)
    R = AX - X * theta.astype(np.longdouble)
    res = np.asarray(
        np.sqrt(np.sum(R * R, axis=0) / np.sum(X * X, axis=0)), dtype=float
    ) / np.abs(theta)
    return theta, X, res


def smallest_eigenvalues(
    op, count: int, tol: float = RESIDUAL_TOL, max_iter: int = MAX_OUTER, seed: int = 0
):
    """Smallest ``count`` eigenvalues of a symmetric positive-definite operator.

    Block inverse iteration with a sparse LU factorisation for the inner
    solves and Rayleigh-Ritz on every iterate. The first sweeps run in
    double precision; once the residuals reach ``EXTENDED_SWITCH`` the
    iteration continues in extended precision (refined solves, residuals
    through the factors), because for fine grids ``eps * |A| / Gamma_1``
    is already close to ``tol``. Converged leading pairs are locked and
    deflated. Returns ``(values, residuals, vectors)`` with the residual
    ``||A x - theta x|| / (theta ||x||)``; vectors are ``np.longdouble``.
    """
    A = _matrix(op)
    n = A.shape[0]
    if count < 1:
        raise ValueError("count must be >= 1")
    if n <= DENSE_LIMIT:
        if count > n:
            raise ValueError("count exceeds the operator dimension")
        theta, vecs = la.eigh(A.toarray())
        theta, vecs = theta[:count], vecs[:, :count]
        res = np.linalg.norm(_apply(op, vecs) - vecs * theta, axis=0) / np.abs(theta)
        return theta, res, vecs
    if count >= n / 4:
        raise ValueError("count must be below dimension / 4")
    block = min(count + max(6, count // 2), max(count + 1, n // 2))
    lu = spla.splu(sp.csc_matrix(A), permc_spec="MMD_AT_PLUS_A")
    rng = np.random.default_rng(seed)
    X = la.qr(rng.standard_normal((n, block)), mode="economic")[0]
    best = np.full(count, np.inf)
    history = []
    it = 0
    while it < max_iter:
        it += 1
        Q = la.qr(lu.solve(X), mode="economic")[0]
        AQ = np.asarray(_apply(op, Q), dtype=float)
        theta, V = la.eigh(0.5 * (Q.T @ AQ + AQ.T @ Q))
        X = Q @ V
        res = np.linalg.norm(AQ @ V - X * theta, axis=0) / np.abs(theta)
        best = np.minimum(best, res[:count])
        worst = res[:count].max()
        history.append(worst)
        # switch once converged enough, or once double precision stops helping
        if worst <= max(tol, EXTENDED_SWITCH):
            break
        if len(history) > 3 and worst > 0.9 * history[-4]:
            break
    X = X.astype(np.longdouble)
    locked_vec = np.empty((n, 0), dtype=np.longdouble)
    locked_val: list = []
    locked_res: list = []
    while it < max_iter:
        it += 1
        theta, X, res = _ritz(op, _solve_refined(lu, op, X), locked_vec)
        need = count - len(locked_val)
        best = np.minimum(best, np.concatenate([locked_res, res[:need]]))
        nlock = 0
        while nlock < need and res[nlock] <= tol:
            nlock += 1
        if nlock:
            locked_vec = np.hstack([locked_vec, X[:, :nlock]])
            locked_val.extend(theta[:nlock])
            locked_res.extend(res[:nlock])
            X = X[:, nlock:]
        if len(locked_val) >= count:
            break
    else:
        raise ConvergenceError(f"inverse iteration did not converge in {max_iter} steps", best)
    order = np.argsort(locked_val)[:count]
    return (
        np.asarray(locked_val)[order],
        np.asarray(locked_res)[order],
        locked_vec[:, order],
    )


def richardson(value_h: float, value_h2: float, order: int) -> float:
    """Richardson extrapolation from spacings ``h`` and ``h/2``."""
    if order < 1:
        raise ValueError("order must be >= 1")
    f = 2.0**order
    return (f * value_h2 - value_h) / (f - 1.0)


def observed_order(values, reference=None):
    """Observed convergence orders from values at ``h, h/2, h/4, ...``.

    With a reference value the errors are ``|v - reference|``; without one,
    successive differences are used (needs three or more values).
    """
    v = np.asarray(values, dtype=float)
    if reference is not None:
        err = np.abs(v - reference)
    else:
        err = np.abs(np.diff(v))
    return np.log2(err[:-1] / err[1:])


def fd_spectrum(domain: Domain, h: float, count: int, seed: int = 0) -> Spectrum:
    """Assemble, solve and package the finite-difference spectrum."""
    op = assemble_biharmonic(domain, h)
    values, residuals, _ = smallest_eigenvalues(op, count, seed=seed)
    return Spectrum(
        eigenvalues=tuple(float(v) for v in values),
        method="finite-difference",
        domain_id=domain_id(domain),
        resolution=h,
        residuals=tuple(float(r) for r in residuals),
    )
