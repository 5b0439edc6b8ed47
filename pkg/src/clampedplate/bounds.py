"""Eigenvalue inequalities for the clamped plate and their checkers.

Lower bounds on the running mean ``(1/k) sum_{j<=k} Gamma_j`` (leading
Weyl term, a two-term correction and a sharper two-term correction), upper
bounds built from the boundary-layer volume, universal inequalities
between consecutive eigenvalues, and the one-dimensional moment
inequality for decreasing functions that drives the sharper lower bound.

The lower-bound correction coefficients are rationals in ``n``; they are
kept as :class:`fractions.Fraction` and rounded once, so the floating
comparison between the two lower bounds inherits the exact one.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .geometry import GeomSummary
from .specfun import unit_ball_volume

__all__ = [
    "BoundsError",
    "AdmissibilityError",
    "ValidityRangeError",
    "MissingInputError",
    "LemmaDomainError",
    "BoundInputs",
    "PsiFunction",
    "LemmaReport",
    "BoundRow",
    "BoundReport",
    "lower_bound_coefficients",
    "agmon_pleijel_mean",
    "levine_protter_lower",
    "cw2011_lower",
    "thm12_lower",
    "thm11_prefactor",
    "thm11_upper",
    "corollary_constant",
    "corollary11_upper",
    "decay_constant",
    "scan_r0",
    "lemma_q",
    "lemma31_rhs",
    "lemma31_check",
    "segment_moment",
    "random_psi",
    "universal_checks",
    "sandwich_report",
]

LOG_DOMAIN_K = 1e6


class BoundsError(ValueError):
    pass


class AdmissibilityError(BoundsError):
    """Layer parameter does not satisfy ``r0 > n * kappa``."""


class ValidityRangeError(BoundsError):
    """``k`` lies outside the range where an upper bound is asserted."""


class MissingInputError(BoundsError):
    pass


class LemmaDomainError(BoundsError):
    pass


@dataclass(frozen=True)
class BoundInputs:
    n: int
    vol: float
    inertia: float | None = None
    ball_vol: float | None = None
    layer_vol: float | None = None
    r0: float | None = None
    kappa: float | None = None
    c0: float | None = None

    def __post_init__(self):
        if self.n < 1:
            raise BoundsError("n must be >= 1")
        if self.ball_vol is None:
            object.__setattr__(self, "ball_vol", unit_ball_volume(self.n))
        if not self.vol > 0 or not self.ball_vol > 0:
            raise BoundsError("vol and ball_vol must be positive")
        if self.inertia is not None and not self.inertia > 0:
            raise BoundsError("inertia must be positive")
        if self.layer_vol is not None and not 0 <= self.layer_vol < self.vol:
            raise BoundsError("layer_vol must lie in [0, vol)")
        if self.c0 is not None and self.c0 < 0:
            raise BoundsError("c0 must be non-negative")

    @classmethod
    def from_summary(cls, summary: GeomSummary, **extra) -> "BoundInputs":
        return cls(
            n=summary.n,
            vol=summary.vol,
            inertia=summary.inertia,
            ball_vol=summary.ball_vol,
            kappa=summary.kappa,
            **extra,
        )

    def replace(self, **changes) -> "BoundInputs":
        data = asdict(self)
        data.update(changes)
        return BoundInputs(**data)


# ---------------------------------------------------------------- lower bounds


def lower_bound_coefficients(n: int, which: str) -> tuple[Fraction, Fraction]:
    """Exact second- and third-term coefficients of a two-term lower bound.

    ``which`` is ``"cw2011"`` or ``"thm12"``. The terms multiply
    ``(vol/I) * n/(n+2) * 4 pi^2 / (B_n vol)^{2/n} * k^{2/n}`` and
    ``(vol/I)^2`` respectively.
    """
    n = Fraction(n)
    if which == "cw2011":
        c2 = (n + 2) / (12 * n * (n + 4)) - 1 / (1152 * n**2 * (n + 4))
        c3 = 1 / (576 * n * (n + 4)) - 1 / (27648 * n**2 * (n + 2) * (n + 4))
    elif which == "thm12":
        c2 = (n + 2) / (12 * n * (n + 4))
        c3 = (n + 2) ** 2 / (1152 * n * (n + 4) ** 2)
    else:
        raise ValueError(f"unknown bound {which!r}")
    return c2, c3


def _check_k(k):
    if k < 1:
        raise BoundsError("k must be >= 1")


def _power(base: float, expo: float, k: float) -> float:
    """``base * k**expo``, through logarithms for very large ``k``."""
    if k > LOG_DOMAIN_K:
        logv = math.log(base) + expo * math.log(k)
        return math.exp(logv) if logv < 709.0 else math.inf
    return base * k**expo


def agmon_pleijel_mean(inputs: BoundInputs, k) -> float:
    """Leading Weyl term ``n/(n+4) 16 pi^4 / (B_n vol)^{4/n} k^{4/n}``."""
    _check_k(k)
    n = inputs.n
    base = (n / (n + 4)) * 16 * math.pi**4 / (inputs.ball_vol * inputs.vol) ** (4 / n)
    return _power(base, 4 / n, k)


def levine_protter_lower(inputs: BoundInputs, k) -> float:
    # the classical lower bound on the mean is exactly the leading term
    return agmon_pleijel_mean(inputs, k)


def _correction_bases(inputs: BoundInputs, k):
    if inputs.inertia is None:
        raise MissingInputError("inertia is required for the two-term lower bounds")
    n = inputs.n
    ratio = inputs.vol / inputs.inertia
    base2 = ratio * (n / (n + 2)) * 4 * math.pi**2 / (inputs.ball_vol * inputs.vol) ** (2 / n)
    return _power(base2, 2 / n, k), ratio * ratio


def _two_term(inputs: BoundInputs, k, which: str) -> float:
    lead = agmon_pleijel_mean(inputs, k)
    x2, x3 = _correction_bases(inputs, k)
    c2, c3 = lower_bound_coefficients(inputs.n, which)
    return lead + float(c2) * x2 + float(c3) * x3


def cw2011_lower(inputs: BoundInputs, k) -> float:
    """Earlier two-term lower bound on the eigenvalue mean."""
    return _two_term(inputs, k, "cw2011")


def thm12_lower(inputs: BoundInputs, k) -> float:
    """Sharper two-term lower bound; dominates :func:`cw2011_lower` termwise."""
    return _two_term(inputs, k, "thm12")


# ---------------------------------------------------------------- upper bounds


def _admissible(inputs: BoundInputs):
    if inputs.layer_vol is None or inputs.r0 is None:
        raise MissingInputError("layer_vol and r0 are required for the upper bound")
    if inputs.kappa is None:
        raise AdmissibilityError("curvature bound absent: boundary is not smooth")
    if not inputs.r0 > inputs.n * inputs.kappa:
        raise AdmissibilityError(
            f"r0 = {inputs.r0} must exceed n * kappa = {inputs.n * inputs.kappa}"
        )


def thm11_prefactor(n: int, v: float) -> float:
    """``[1 + 4(n+4)(n^2+2n+6)/(n+2) v] / (1 - v)^{(n+4)/n}`` for ``v = layer/vol``."""
    if not 0 <= v < 1:
        raise BoundsError("layer fraction must lie in [0, 1)")
    c = 4 * (n + 4) * (n * n + 2 * n + 6) / (n + 2)
    return (1 + c * v) / (1 - v) ** ((n + 4) / n)


def thm11_min_k(inputs: BoundInputs) -> float:
    return inputs.vol * inputs.r0**inputs.n


def thm11_upper(inputs: BoundInputs, k) -> float:
    """Upper bound on the mean from the layer ``{d < 1/r0}``, valid for ``k >= vol r0^n``."""
    _check_k(k)
    _admissible(inputs)
    if k < thm11_min_k(inputs):
        raise ValidityRangeError(f"k = {k} below vol * r0^n = {thm11_min_k(inputs):.6g}")
    return thm11_prefactor(inputs.n, inputs.layer_vol / inputs.vol) * agmon_pleijel_mean(inputs, k)


def corollary_constant(n: int, c0: float, alpha: float, ball_vol: float | None = None) -> float:
    """The constant ``c(n)`` multiplying ``c0 k^{3/n}`` in the layer-decay upper bound.

    ``c1 = 4 (6/(n+2) + n)(n+4) B_n^{1/n} c0 / (2 pi)`` and
    ``c(n) = c1/c0 + (1 + 4/n + c1 (1 + 3/n)) / (1 - alpha)^{(2n+4)/n}``.
    """
    if not 0 <= alpha < 1:
        raise BoundsError("alpha must lie in [0, 1)")
    if ball_vol is None:
        ball_vol = unit_ball_volume(n)
    unit = 4 * (6 / (n + 2) + n) * (n + 4) * ball_vol ** (1 / n) / (2 * math.pi)
    c1 = unit * c0
    return unit + (1 + 4 / n + c1 * (1 + 3 / n)) / (1 - alpha) ** ((2 * n + 4) / n)


def corollary11_upper(inputs: BoundInputs, k, alpha: float | None = None, k_min=None) -> float:
    """Upper bound ``LP(k) (1 + c0 c(n) k^{-1/n})`` under the layer-decay hypothesis.

    ``alpha`` defaults to ``c0 / (1 + k_min)^{1/n}`` with ``k_min = k``;
    it must dominate ``c0 / (1 + k)^{1/n}`` and stay below 1.
    """
    _check_k(k)
    if inputs.c0 is None:
        raise MissingInputError("c0 is required for the layer-decay upper bound")
    n, c0 = inputs.n, inputs.c0
    if c0 > 0 and not k > c0**n:
        raise ValidityRangeError(f"k = {k} must exceed c0^n = {c0**n:.6g}")
    floor = c0 / (1 + k) ** (1 / n)
    if alpha is None:
        alpha = c0 / (1 + (k if k_min is None else k_min)) ** (1 / n)
    if alpha < floor * (1 - 1e-15):
        raise BoundsError(f"alpha = {alpha} below c0/(1+k)^(1/n) = {floor}")
    if not alpha < 1:
        raise ValidityRangeError(f"alpha = {alpha} must be < 1; increase k")
    lead = agmon_pleijel_mean(inputs, k)
    if c0 == 0:
        return lead
    cn = corollary_constant(n, c0, alpha, inputs.ball_vol)
    return lead * (1 + c0 * cn * math.exp(-math.log(k) / n))


def decay_constant(domain, n: int = 2, samples: int = 400) -> float:
    """Smallest ``c0`` with ``vol(Omega_r) r <= c0 vol^{(n-1)/n}`` for ``r > vol^{-1/n}``.

    Scans ``r`` on a log grid and adds the ``r -> infinity`` limit
    ``perimeter / vol^{(n-1)/n}``, where the supremum sits for convex shapes.
    """
    from .geometry import boundary_layer_volume

    vol = domain.area()
    scale = vol ** ((n - 1) / n)
    r_lo = vol ** (-1 / n)
    rs = r_lo * np.logspace(1e-9, 4, samples)
    scan = max(boundary_layer_volume(domain, float(r)) * r for r in rs)
    return max(scan, domain.perimeter()) / scale


def scan_r0(inputs: BoundInputs, k, domain, grid: int = 200, r_max: float | None = None):
    """Layer parameter in ``(n kappa, (k/vol)^{1/n}]`` minimising :func:`thm11_upper` at ``k``.

    Returns ``(r0, value)``; ``None`` when the admissible interval is empty.
    """
    from .geometry import boundary_layer_volume

    if inputs.kappa is None:
        raise AdmissibilityError("curvature bound absent: boundary is not smooth")
    lo = inputs.n * inputs.kappa
    hi = (k / inputs.vol) ** (1 / inputs.n)
    if r_max is not None:
        hi = min(hi, r_max)
    if not hi > lo:
        return None
    best = None
    for r0 in np.linspace(lo, hi, grid + 1)[1:]:
        layer = boundary_layer_volume(domain, float(r0))
        if layer >= inputs.vol:
            continue
        value = thm11_upper(inputs.replace(r0=float(r0), layer_vol=layer), k)
        if best is None or value < best[1]:
            best = (float(r0), value)
    return best


# ---------------------------------------------------------------- the moment lemma


def lemma_q(b: float, reading: str = "statement") -> float:
    """Coefficient ``q(b)`` of the fourth term.

    For ``2 < b < 4`` the closed form can be read two ways: as displayed
    with the closing denominator ``3 * 12^3 b^3 (b+4)^3`` (``"statement"``),
    or as produced by the derivation, which carries the extra factor
    ``1 / (b (b+4))`` (``"derivation"``). Both agree in shape and differ
    only in size; the first is the larger.
    """
    if b < 2:
        raise LemmaDomainError("b must be >= 2")
    if b >= 4 or b == 2:
        return (13 * b**3 + 56 * b**2 - 52 * b - 32) * (b + 2) ** 3 / (12**4 * b**4 * (b + 4) ** 4)
    poly = (4 * b**3 + 11 * b**2 - 16 * b + 4) * (b + 2) ** 3
    if reading == "statement":
        return poly / (3 * 12**3 * b**3 * (b + 4) ** 3)
    if reading == "derivation":
        return poly / (3 * 12**3 * b**4 * (b + 4) ** 4)
    raise ValueError(f"unknown reading {reading!r}")


def lemma31_rhs(
    A: float,
    b: float,
    eta: float,
    psi0: float,
    form: str = "four-term",
    reading: str = "statement",
) -> float:
    """Lower bound for ``int s^{b+3} psi`` in terms of ``A = int s^{b-1} psi``."""
    if b < 2:
        raise LemmaDomainError("b must be >= 2")
    if not (A > 0 and eta > 0 and psi0 > 0):
        raise LemmaDomainError("A, eta and psi0 must be positive")
    bA = b * A
    total = (
        bA ** ((b + 4) / b) * psi0 ** (-4 / b) / (b + 4)
        + bA ** ((b + 2) / b) * psi0 ** ((2 * b - 2) / b) / (3 * b * (b + 4) * eta**2)
        + (b + 2) ** 2 / (72 * b * (b + 4) ** 2 * eta**4) * A * psi0**4
    )
    if form == "three-term":
        return total
    if form != "four-term":
        raise ValueError(f"unknown form {form!r}")
    return total + lemma_q(b, reading) / eta**6 * bA ** ((b - 2) / b) * psi0 ** ((6 * b + 2) / b)


@dataclass(frozen=True)
class PsiFunction:
    """Non-increasing piecewise-linear ``psi`` on ``[0, inf)``, zero past the last breakpoint."""

    breakpoints: tuple
    values: tuple
    eta: float

    def __post_init__(self):
        s = np.asarray(self.breakpoints, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if s.ndim != 1 or s.size < 2 or s.size != v.size:
            raise BoundsError("need matching breakpoint and value lists of length >= 2")
        if s[0] != 0 or np.any(np.diff(s) <= 0):
            raise BoundsError("breakpoints must start at 0 and increase")
        if v[-1] != 0 or np.any(v < 0):
            raise BoundsError("psi must be non-negative and end at 0")
        if not self.eta > 0:
            raise BoundsError("eta must be positive")
        slopes = np.diff(v) / np.diff(s)
        if np.any(slopes > 0) or np.any(slopes < -self.eta * (1 + 1e-12)):
            raise BoundsError("slopes must lie in [-eta, 0]")
        object.__setattr__(self, "breakpoints", tuple(float(x) for x in s))
        object.__setattr__(self, "values", tuple(float(x) for x in v))

    @property
    def psi0(self) -> float:
        return self.values[0]

    def __call__(self, s):
        return np.interp(s, self.breakpoints, self.values, right=0.0)

    def moment(self, p: float) -> float:
        return segment_moment(self.breakpoints, self.values, p)

    def normalized(self) -> "PsiFunction":
        """``phi(t) = psi(psi0 t / eta) / psi0``: starts at 1 with slopes in ``[-1, 0]``."""
        scale = self.eta / self.psi0
        return PsiFunction(
            tuple(s * scale for s in self.breakpoints),
            tuple(v / self.psi0 for v in self.values),
            1.0,
        )


def segment_moment(breakpoints, values, p: float) -> float:
    """Exact ``int s^p psi(s) ds`` for piecewise-linear ``psi``."""
    s = np.asarray(breakpoints, dtype=float)
    v = np.asarray(values, dtype=float)
    s0, s1, v0, v1 = s[:-1], s[1:], v[:-1], v[1:]
    slope = (v1 - v0) / (s1 - s0)
    icpt = v0 - slope * s0
    return float(
        np.sum(
            icpt * (s1 ** (p + 1) - s0 ** (p + 1)) / (p + 1)
            + slope * (s1 ** (p + 2) - s0 ** (p + 2)) / (p + 2)
        )
    )


@dataclass(frozen=True)
class LemmaReport:
    b: float
    A: float
    D: float
    rhs: float
    rhs_three: float
    rhs_derivation: float
    margin: float
    ratio: float
    passed: bool
    passed_derivation: bool

    def to_dict(self) -> dict:
        return asdict(self)


def lemma31_check(psi: PsiFunction, b: float) -> LemmaReport:
    """Compare ``D = int s^{b+3} psi`` with both right-hand sides.

    Passes when ``D >= four-term >= three-term``. The alternative reading
    of ``q(b)`` is evaluated alongside and reported separately.
    """
    if b < 2:
        raise LemmaDomainError("b must be >= 2")
    A = psi.moment(b - 1)
    if not A > 0:
        raise LemmaDomainError("A = int s^(b-1) psi must be positive")
    D = psi.moment(b + 3)
    four = lemma31_rhs(A, b, psi.eta, psi.psi0, "four-term")
    three = lemma31_rhs(A, b, psi.eta, psi.psi0, "three-term")
    alt = lemma31_rhs(A, b, psi.eta, psi.psi0, "four-term", reading="derivation")
    return LemmaReport(
        b=b,
        A=A,
        D=D,
        rhs=four,
        rhs_three=three,
        rhs_derivation=alt,
        margin=D - four,
        ratio=D / four,
        passed=bool(D >= four >= three),
        passed_derivation=bool(D >= alt >= three),
    )


def random_psi(rng: np.random.Generator, max_pieces: int = 6) -> PsiFunction:
    """Seeded random admissible ``psi``.

    ``eta`` is log-uniform on ``[0.1, 10]``, ``psi(0)`` log-uniform on
    ``[0.1, 10]``; pieces have lengths up to ``2 psi(0)/eta`` and slopes
    uniform on ``[-eta, 0]``, the last piece descending to zero.
    """
    eta = float(10 ** rng.uniform(-1, 1))
    psi0 = float(10 ** rng.uniform(-1, 1))
    unit = psi0 / eta
    s, v = [0.0], [psi0]
    for _ in range(int(rng.integers(0, max_pieces))):
        length = float(rng.uniform(0.05, 2.0)) * unit
        slope = -eta * float(rng.uniform(0.0, 1.0))
        drop = -slope * length
        if drop >= v[-1]:
            break
        s.append(s[-1] + length)
        v.append(v[-1] - drop)
    slope = eta * float(rng.uniform(0.05, 1.0))
    s.append(s[-1] + v[-1] / slope)
    v.append(0.0)
    return PsiFunction(tuple(s), tuple(v), eta)


# ---------------------------------------------------------------- universal inequalities


def _eigs(spectrum):
    vals = getattr(spectrum, "eigenvalues", spectrum)
    return np.asarray(vals, dtype=float)


def universal_checks(spectrum, n: int, k_max: int | None = None) -> list[dict]:
    """Per-``k`` evaluation of the gap inequalities and the conjectured sharpening.

    Each row holds ``lhs``/``rhs``/``pass`` for ``ppw``, ``cqh``, ``cy`` and
    ``wx``; ``cqh`` is ``None`` when ``Gamma_{k+1} = Gamma_k``. The
    conjectured form with constant ``8/n`` is ``conjecture`` and is
    informational only.
    """
    g = _eigs(spectrum)
    if k_max is None:
        k_max = g.size - 1
    if k_max < 1 or g.size < k_max + 1:
        raise BoundsError(f"need at least k_max + 1 = {k_max + 1} eigenvalues, got {g.size}")
    c = 8 * (n + 2) / n**2
    rows = []
    for k in range(1, k_max + 1):
        head, nxt = g[:k], g[k]
        gap = nxt - head
        row = {"k": k}
        lhs, rhs = nxt - g[k - 1], c / k * head.sum()
        row["ppw"] = (lhs, rhs, bool(lhs <= rhs))
        if nxt == g[k - 1]:
            row["cqh"] = None
        else:
            root = np.sqrt(head)
            lhs, rhs = n * n * k * k / (8 * (n + 2)), np.sum(root / gap) * root.sum()
            row["cqh"] = (lhs, rhs, bool(lhs <= rhs))
        lhs, rhs = gap.sum(), math.sqrt(c) * np.sqrt(head * gap).sum()
        row["cy"] = (lhs, rhs, bool(lhs <= rhs))
        sq, mixed = np.sum(gap * gap), np.sum(gap * head)
        row["wx"] = (sq, c * mixed, bool(sq <= c * mixed))
        row["conjecture"] = (sq, 8 / n * mixed, bool(sq <= 8 / n * mixed))
        rows.append(row)
    return rows


# ---------------------------------------------------------------- reports

LOWER = ("lp", "cw2011", "thm12")
UPPER = ("thm11_upper", "cor11_upper")


@dataclass
class BoundRow:
    k: int
    mean: float
    values: dict = field(default_factory=dict)

    def margin(self, name: str) -> float:
        v = self.values[name]
        return self.mean - v if name in LOWER else v - self.mean

    def passed(self, name: str, slack: float = 0.0) -> bool:
        v = self.values[name]
        if name in LOWER:
            return self.mean >= v * (1 - slack)
        return self.mean <= v * (1 + slack)


@dataclass
class BoundReport:
    rows: list
    columns: tuple
    slack: float = 0.0
    notes: list = field(default_factory=list)

    def all_pass(self) -> bool:
        return all(r.passed(c, self.slack) for r in self.rows for c in r.values)

    def ordered(self) -> bool:
        """``thm12 >= cw2011 >= lp`` on every row."""
        return all(
            r.values["thm12"] >= r.values["cw2011"] >= r.values["lp"]
            for r in self.rows
            if "thm12" in r.values and "cw2011" in r.values
        )


def sandwich_report(
    spectrum,
    inputs: BoundInputs,
    k_max: int,
    slack: float = 0.0,
    alpha: float | None = None,
) -> BoundReport:
    """Evaluate every applicable bound against the running eigenvalue mean.

    Upper bounds appear only for ``k`` inside their validity range; an
    inadmissible layer parameter drops the column and records a note.
    """
    g = _eigs(spectrum)
    if g.size < k_max:
        raise BoundsError(f"spectrum has {g.size} values, need {k_max}")
    means = np.cumsum(g[:k_max]) / np.arange(1, k_max + 1)
    notes = []
    thm11_ok = False
    if inputs.layer_vol is not None and inputs.r0 is not None:
        try:
            _admissible(inputs)
            thm11_ok = True
        except AdmissibilityError as exc:
            notes.append(f"thm11_upper omitted: {exc}")
    cor_k_min = None
    if inputs.c0 is not None:
        n = inputs.n
        valid = [k for k in range(1, k_max + 1) if k > inputs.c0**n]
        cor_k_min = valid[0] if valid else None
        if cor_k_min is None:
            notes.append("cor11_upper omitted: no k in range")
    rows = []
    columns = ["lp"]
    if inputs.inertia is not None:
        columns += ["cw2011", "thm12"]
    for k in range(1, k_max + 1):
        row = BoundRow(k=k, mean=float(means[k - 1]))
        row.values["lp"] = levine_protter_lower(inputs, k)
        if inputs.inertia is not None:
            row.values["cw2011"] = cw2011_lower(inputs, k)
            row.values["thm12"] = thm12_lower(inputs, k)
        if thm11_ok and k >= thm11_min_k(inputs):
            row.values["thm11_upper"] = thm11_upper(inputs, k)
        if cor_k_min is not None and k >= cor_k_min:
            row.values["cor11_upper"] = corollary11_upper(inputs, k, alpha=alpha, k_min=cor_k_min)
        rows.append(row)
    for name in UPPER:
        if any(name in r.values for r in rows):
            columns.append(name)
        elif name == "thm11_upper" and thm11_ok:
            notes.append("thm11_upper omitted: k_max below vol * r0^n")
    return BoundReport(rows=rows, columns=tuple(columns), slack=slack, notes=notes)
