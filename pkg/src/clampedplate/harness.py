"""Experiment configuration, spectrum cache and report emission.

A run reads a JSON configuration, obtains the spectrum (from the cache
when possible), evaluates every bound and inequality, and writes CSV
tables plus a Markdown summary. Outputs depend only on the configuration,
so repeated runs are byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bounds as B
from .geometry import Disk, Domain, Polygon, Rectangle, boundary_layer_volume, geom_summary
from .spectra import Spectrum, disk_spectrum, fd_spectrum, observed_order, richardson

__all__ = [
    "ConfigError",
    "SolverConfig",
    "BoundConfig",
    "LemmaConfig",
    "ExperimentConfig",
    "parse_config",
    "build_domain",
    "SpectrumCache",
    "cache_key",
    "get_spectrum",
    "RunResult",
    "run",
    "ConvergenceTable",
    "converge",
    "LemmaSweep",
    "lemma_sweep",
    "format_float",
    "write_csv",
]

DEFAULT_H = 1 / 64
DEFAULT_COUNT = 50
DEFAULT_SEED = 0
DEFAULT_B = (2.0, 2.5, 3.0, 4.0, 6.0)
DEFAULT_TRIALS = 1000
FD_SLACK = 0.01
CONVERGE_MODES = 5


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    method: str
    h: float = DEFAULT_H
    count: int = DEFAULT_COUNT


@dataclass(frozen=True)
class BoundConfig:
    r0: float | None = None
    c0: float | str | None = None
    k_max: int | None = None
    slack: float | None = None


@dataclass(frozen=True)
class LemmaConfig:
    b: tuple = DEFAULT_B
    trials: int = DEFAULT_TRIALS
    seed: int = DEFAULT_SEED


@dataclass(frozen=True)
class ExperimentConfig:
    domain: Domain
    solver: SolverConfig
    bounds: BoundConfig = field(default_factory=BoundConfig)
    lemma: LemmaConfig = field(default_factory=LemmaConfig)
    seed: int = DEFAULT_SEED
    out: str | None = None

    def with_seed(self, seed: int) -> "ExperimentConfig":
        from dataclasses import replace

        return replace(self, seed=seed, lemma=replace(self.lemma, seed=seed))


def _require(obj: dict, key: str, where: str):
    if not isinstance(obj, dict) or key not in obj:
        raise ConfigError(f"missing required field: {where}{key}")
    return obj[key]


def _number(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"field {name} must be a number")
    return float(value)


def _point(value, name: str) -> tuple:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"field {name} must be a pair of numbers")
    return (_number(value[0], name), _number(value[1], name))


def build_domain(doc) -> Domain:
    """Domain from ``{"disk": {...}}``, ``{"rect": {...}}`` or ``{"polygon": {...}}``."""
    if not isinstance(doc, dict) or len(doc) != 1:
        raise ConfigError("domain must be an object with exactly one shape key")
    (shape, params), = doc.items()
    where = f"domain.{shape}."
    try:
        if shape == "disk":
            radius = _number(_require(params, "radius", where), where + "radius")
            center = _point(params.get("center", (0.0, 0.0)), where + "center")
            return Disk(radius, center)
        if shape in ("rect", "rectangle"):
            w = _number(_require(params, "w", where), where + "w")
            h = _number(_require(params, "h", where), where + "h")
            origin = _point(params.get("origin", (0.0, 0.0)), where + "origin")
            return Rectangle(w, h, origin)
        if shape == "polygon":
            verts = _require(params, "vertices", where)
            if not isinstance(verts, list):
                raise ConfigError(f"field {where}vertices must be a list")
            return Polygon(tuple(_point(v, where + "vertices") for v in verts))
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid {shape} parameters: {exc}") from exc
    raise ConfigError(f"unknown domain {shape!r}")


def parse_config(text: str) -> ExperimentConfig:
    """Validate a JSON configuration document and apply defaults."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"configuration is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    domain = build_domain(_require(doc, "domain", ""))

    solver = doc.get("solver", {}) or {}
    method = solver.get("method", "analytic" if isinstance(domain, Disk) else "fd")
    if method not in ("analytic", "fd"):
        raise ConfigError(f"unknown solver method {method!r}")
    if method == "analytic" and not isinstance(domain, Disk):
        raise ConfigError("the analytic solver needs a disk")
    h = _number(solver.get("h", DEFAULT_H), "solver.h")
    count = solver.get("count", DEFAULT_COUNT)
    if not isinstance(count, int) or count < 1:
        raise ConfigError("field solver.count must be a positive integer")
    if not h > 0:
        raise ConfigError("field solver.h must be positive")

    bd = doc.get("bounds", {}) or {}
    r0 = bd.get("r0")
    c0 = bd.get("c0")
    k_max = bd.get("k_max")
    slack = bd.get("slack")
    if r0 is not None:
        r0 = _number(r0, "bounds.r0")
    if c0 is not None and c0 != "auto":
        c0 = _number(c0, "bounds.c0")
    if k_max is not None and (not isinstance(k_max, int) or not 1 <= k_max <= count):
        raise ConfigError("field bounds.k_max must be an integer in [1, solver.count]")
    if slack is not None:
        slack = _number(slack, "bounds.slack")

    seed = doc.get("seed", DEFAULT_SEED)
    if not isinstance(seed, int):
        raise ConfigError("field seed must be an integer")
    lm = doc.get("lemma", {}) or {}
    b_list = tuple(_number(b, "lemma.b") for b in lm.get("b", DEFAULT_B))
    if not b_list or min(b_list) < 2:
        raise ConfigError("field lemma.b must be a non-empty list of values >= 2")
    trials = lm.get("trials", DEFAULT_TRIALS)
    if not isinstance(trials, int) or trials < 1:
        raise ConfigError("field lemma.trials must be a positive integer")
    lseed = lm.get("seed", seed)
    out = (doc.get("output") or {}).get("dir")
    return ExperimentConfig(
        domain=domain,
        solver=SolverConfig(method=method, h=h, count=count),
        bounds=BoundConfig(r0=r0, c0=c0, k_max=k_max, slack=slack),
        lemma=LemmaConfig(b=b_list, trials=trials, seed=lseed),
        seed=seed,
        out=out,
    )


# ---------------------------------------------------------------- cache


def _canon(obj):
    if isinstance(obj, dict):
        return {k: _canon(v) for k, v in sorted(obj.items())}
    if isinstance(obj, (list, tuple)):
        return [_canon(v) for v in obj]
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    return repr(float(obj))


def cache_key(domain: Domain, method: str, h: float | None, count: int) -> dict:
    return {
        "domain": _canon(domain.canonical()),
        "method": method,
        "h": None if method == "analytic" else repr(float(h)),
        "count": int(count),
    }


def _digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()


class SpectrumCache:
    """JSON files under ``<root>/cache``; writes go through a temp file and ``os.replace``."""

    def __init__(self, root):
        self.dir = Path(root) / "cache"

    def path(self, key: dict) -> Path:
        return self.dir / f"{_digest(key)[:32]}.json"

    def load(self, key: dict) -> Spectrum | None:
        p = self.path(key)
        try:
            entry = json.loads(p.read_text())
            payload = entry["payload"]
            if entry["key"] != key or entry["checksum"] != _digest(payload):
                return None
            return Spectrum.from_dict(payload)
        except (OSError, ValueError, KeyError, TypeError):
            return None

    def store(self, key: dict, spectrum: Spectrum) -> Path:
        self.dir.mkdir(parents=True, exist_ok=True)
        payload = spectrum.to_dict()
        entry = {"key": key, "payload": payload, "checksum": _digest(payload)}
        p = self.path(key)
        fd, tmp = tempfile.mkstemp(dir=self.dir, prefix=".tmp-", suffix=".json")
        try:
            with os.fdopen(fd, "w") as fh:
                json.dump(entry, fh, sort_keys=True)
            os.replace(tmp, p)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        return p


def _compute(domain, method, h, count, seed):
    if method == "analytic":
        return disk_spectrum(domain.radius, count, domain.center)
    return fd_spectrum(domain, h, count, seed=seed)


def get_spectrum(domain, method, h, count, seed=0, cache: SpectrumCache | None = None) -> Spectrum:
    key = cache_key(domain, method, h, count)
    if cache is not None:
        hit = cache.load(key)
        if hit is not None:
            return hit
    spectrum = _compute(domain, method, h, count, seed)
    if cache is not None:
        cache.store(key, spectrum)
    return spectrum


# ---------------------------------------------------------------- tables


def format_float(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.12g}"


def write_csv(path, header, rows) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_float(v) for v in row])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue())
    return path


UNIVERSAL = ("ppw", "cqh", "cy", "wx")


def _bound_inputs(config: ExperimentConfig):
    dom = config.domain
    summary = geom_summary(dom)
    extra = {}
    notes = []
    bc = config.bounds
    if bc.r0 is not None:
        if summary.kappa is None or not bc.r0 > summary.n * summary.kappa:
            notes.append(
                f"r0 = {bc.r0:g} is inadmissible (needs a smooth boundary and r0 > n kappa); "
                "thm11_upper omitted"
            )
        else:
            layer = boundary_layer_volume(dom, bc.r0)
            if layer < summary.vol:
                extra.update(r0=bc.r0, layer_vol=layer)
            else:
                notes.append(f"layer at r0 = {bc.r0:g} fills the domain; thm11_upper omitted")
    if bc.c0 == "auto":
        extra["c0"] = B.decay_constant(dom, summary.n)
    elif bc.c0 is not None:
        extra["c0"] = bc.c0
    return B.BoundInputs.from_summary(summary, **extra), notes


def _bounds_table(report: B.BoundReport):
    cols = list(report.columns)
    header = ["k", "mean"] + cols + [f"margin_{c}" for c in cols] + [f"pass_{c}" for c in cols]
    rows = []
    for r in report.rows:
        vals = [r.values.get(c) for c in cols]
        margins = [r.margin(c) if c in r.values else None for c in cols]
        flags = [r.passed(c, report.slack) if c in r.values else None for c in cols]
        rows.append([r.k, r.mean] + vals + margins + flags)
    return header, rows


def _universal_table(rows):
    header = ["k"]
    for name in UNIVERSAL + ("conjecture",):
        header += [f"{name}_lhs", f"{name}_rhs", f"{name}_pass"]
    out = []
    for row in rows:
        line = [row["k"]]
        for name in UNIVERSAL + ("conjecture",):
            line += list(row[name]) if row[name] is not None else [None, None, None]
        out.append(line)
    return header, out


@dataclass
class LemmaSweep:
    rows: list
    min_ratio: float
    min_ratio_derivation: float
    passed: bool

    def table(self):
        header = ["trial", "b", "eta", "psi0", "A", "D", "rhs", "rhs_three", "rhs_derivation", "ratio", "pass"]
        return header, self.rows


def lemma_sweep(config: ExperimentConfig) -> LemmaSweep:
    """Seeded randomised check of the moment inequality over the configured ``b`` values."""
    lc = config.lemma
    if lc.trials < 1:
        raise ConfigError("trial count must be >= 1")
    rng = np.random.default_rng(lc.seed)
    rows = []
    lo = lo_alt = math.inf
    ok = True
    for t in range(lc.trials):
        b = lc.b[t % len(lc.b)]
        psi = B.random_psi(rng)
        rep = B.lemma31_check(psi, b)
        lo = min(lo, rep.ratio)
        lo_alt = min(lo_alt, rep.D / rep.rhs_derivation)
        ok &= rep.passed
        rows.append([t, b, psi.eta, psi.psi0, rep.A, rep.D, rep.rhs, rep.rhs_three,
                     rep.rhs_derivation, rep.ratio, rep.passed])
    return LemmaSweep(rows=rows, min_ratio=lo, min_ratio_derivation=lo_alt, passed=bool(ok and lo >= 1))


@dataclass
class ConvergenceTable:
    spacings: list
    values: np.ndarray
    orders: np.ndarray
    richardson: np.ndarray
    reference: np.ndarray | None = None

    def table(self):
        m = self.values.shape[1]
        header = ["h"] + [f"gamma_{j + 1}" for j in range(m)] + [f"order_{j + 1}" for j in range(m)]
        rows = []
        for i, h in enumerate(self.spacings):
            orders = [None] * m
            if i >= 2:
                orders = list(self.orders[i - 2])
            rows.append([h] + list(self.values[i]) + orders)
        rows.append(["richardson"] + list(self.richardson) + [None] * m)
        if self.reference is not None:
            rows.append(["analytic"] + list(self.reference) + [None] * m)
        return header, rows


def converge(config: ExperimentConfig, levels: int, cache: SpectrumCache | None = None) -> ConvergenceTable:
    """FD eigenvalues at ``h, h/2, ...``; orders from successive differences; order-2 Richardson."""
    if levels < 2:
        raise ConfigError("levels must be >= 2")
    dom = config.domain
    count = min(CONVERGE_MODES, config.solver.count)
    hs = [config.solver.h / 2**i for i in range(levels)]
    vals = np.array(
        [get_spectrum(dom, "fd", h, count, config.seed, cache).values for h in hs]
    )
    if levels >= 3:
        orders = np.array([observed_order(vals[i : i + 3, j]) for i in range(levels - 2) for j in range(count)])
        orders = orders.reshape(levels - 2, count)
    else:
        orders = np.empty((0, count))
    rich = np.array([richardson(vals[-2, j], vals[-1, j], 2) for j in range(count)])
    ref = None
    if isinstance(dom, Disk):
        ref = get_spectrum(dom, "analytic", None, count, config.seed, cache).values
    return ConvergenceTable(spacings=hs, values=vals, orders=orders, richardson=rich, reference=ref)


# ---------------------------------------------------------------- full run


@dataclass
class RunResult:
    exit_code: int
    files: dict
    failures: list
    notes: list


def _spectrum_for(config, cache):
    s = config.solver
    return get_spectrum(config.domain, s.method, s.h, s.count, config.seed, cache)


def write_spectrum(spectrum: Spectrum, out: Path) -> Path:
    res = spectrum.residuals or [None] * len(spectrum)
    return write_csv(out / "spectrum.csv", ["j", "gamma", "residual"],
                     [[j + 1, g, r] for j, (g, r) in enumerate(zip(spectrum.eigenvalues, res))])


def evaluate_bounds(config: ExperimentConfig, spectrum: Spectrum, out: Path):
    """Write the bound and universal-inequality tables; return ``(files, failures, notes, extra)``."""
    inputs, notes = _bound_inputs(config)
    fd = spectrum.method == "finite-difference"
    slack = config.bounds.slack if config.bounds.slack is not None else (FD_SLACK if fd else 0.0)
    k_max = config.bounds.k_max or len(spectrum)
    report = B.sandwich_report(spectrum, inputs, k_max, slack=slack)
    notes += report.notes
    failures = []
    for r in report.rows:
        for c in r.values:
            if not r.passed(c, slack):
                failures.append(f"{c} fails at k = {r.k}")
    if not report.ordered():
        failures.append("lower bounds out of order")
    files = {"bounds": write_csv(out / "bounds.csv", *_bounds_table(report))}
    uni = B.universal_checks(spectrum, inputs.n, min(k_max, len(spectrum) - 1)) if len(spectrum) > 1 else []
    for row in uni:
        for name in UNIVERSAL:
            if row[name] is not None and not row[name][2]:
                failures.append(f"{name} fails at k = {row['k']}")
    files["universal"] = write_csv(out / "universal.csv", *_universal_table(uni))
    conj = all(row["conjecture"][2] for row in uni)
    return files, failures, notes, {"report": report, "universal": uni, "conjecture": conj,
                                    "inputs": inputs, "slack": slack}


def _summary(config, spectrum, extra, sweep, failures, notes) -> str:
    inp = extra["inputs"]
    lines = [
        "# Clamped plate bound check",
        "",
        f"- domain: `{json.dumps(config.domain.canonical(), sort_keys=True)}`",
        f"- method: {spectrum.method}" + (f", h = {spectrum.resolution:.12g}" if spectrum.resolution else ""),
        f"- eigenvalues: {len(spectrum)} (Gamma_1 = {spectrum.eigenvalues[0]:.12g})",
        f"- vol = {inp.vol:.12g}, I = {inp.inertia:.12g}, B_n = {inp.ball_vol:.12g}",
        f"- slack on bound comparisons: {extra['slack']:g}",
        "",
        "| check | status |",
        "|---|---|",
    ]
    rep = extra["report"]
    for c in rep.columns:
        rows = [r for r in rep.rows if c in r.values]
        ok = all(r.passed(c, rep.slack) for r in rows)
        lines.append(f"| {c} (k = {rows[0].k}..{rows[-1].k}) | {'pass' if ok else 'FAIL'} |")
    for name in UNIVERSAL:
        rows = [r for r in extra["universal"] if r[name] is not None]
        ok = all(r[name][2] for r in rows)
        lines.append(f"| {name} ({len(rows)} k values) | {'pass' if ok else 'FAIL'} |")
    lines.append(f"| conjecture (informational) | {'holds' if extra['conjecture'] else 'violated'} |")
    if sweep is not None:
        lines.append(
            f"| moment inequality ({len(sweep.rows)} trials, min ratio {sweep.min_ratio:.6g}) | "
            f"{'pass' if sweep.passed else 'FAIL'} |"
        )
    lines.append("")
    if notes:
        lines += ["## Notes", ""] + [f"- {n}" for n in notes] + [""]
    lines += ["## Result", "", "all hard checks pass" if not failures else f"{len(failures)} failures:", ""]
    lines += [f"- {f}" for f in failures[:50]]
    return "\n".join(lines).rstrip() + "\n"


def run(config: ExperimentConfig, out, use_cache: bool = True, lemma: bool = True) -> RunResult:
    """Spectrum, bounds, universal inequalities, moment sweep and summary."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    cache = SpectrumCache(out) if use_cache else None
    spectrum = _spectrum_for(config, cache)
    files = {"spectrum": write_spectrum(spectrum, out)}
    more, failures, notes, extra = evaluate_bounds(config, spectrum, out)
    files.update(more)
    sweep = None
    if lemma:
        sweep = lemma_sweep(config)
        files["lemma"] = write_csv(out / "lemma.csv", *sweep.table())
        if not sweep.passed:
            failures.append(f"moment inequality min ratio {sweep.min_ratio:.6g} < 1")
    summary = out / "summary.md"
    summary.write_text(_summary(config, spectrum, extra, sweep, failures, notes))
    files["summary"] = summary
    return RunResult(exit_code=0 if not failures else 1, files=files, failures=failures, notes=notes)
