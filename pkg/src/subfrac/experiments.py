"""Experiment registry, configuration and result persistence.

A configuration is a flat ``key = value`` text file (``#`` starts a comment)
whose keys mirror the CLI flags; flags override the file. Everything is
validated before any output is written. Each experiment returns result rows
(one per check) that are written to ``<out>/results.csv``, appended as JSON
lines to the ledger, and summarized in ``<out>/summary.txt``.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .errors import InvalidInputError
from .groups import check_compatible, parse_group, parse_norm
from .nonlocal_ops import FracParams, QuadratureConfig

__all__ = ["ExperimentConfig", "ConfigError", "load_config", "config_hash", "run",
           "EXPERIMENTS", "ROW_FIELDS"]

EXPERIMENTS = ("sobolev-scan", "hardy-mu", "picone", "levelset", "lemma-lem1", "eigen", "lyapunov")

ROW_FIELDS = ("experiment", "check_id", "group", "norm", "s", "p", "param", "lhs", "rhs",
              "margin", "tolerance", "pass", "config_hash", "version")


class ConfigError(InvalidInputError):
    """Invalid experiment configuration (CLI exit status 2)."""


def _floats(v):
    if v is None or v == "":
        return None
    if isinstance(v, (int, float)):
        return [float(v)]
    if isinstance(v, (list, tuple)):
        return [float(x) for x in v]
    return [float(x) for x in str(v).replace(";", ",").split(",") if x.strip()]


def _ints(v):
    f = _floats(v)
    if f is None:
        return None
    if any(x != int(x) for x in f):
        raise ConfigError(f"expected integers, got {v!r}")
    return [int(x) for x in f]


@dataclass
class ExperimentConfig:
    experiment: str
    group: str = "abelian:1"
    norm: str | None = None
    s: float = 0.25
    p: float = 2.0
    gamma: list | None = None
    theta: list | None = None
    n: list | None = None
    R: list | None = None
    box: float | None = None
    resolution: int = 512
    count: int | None = None
    seed: int = 0
    near_mode: str = "local_correction"
    min_resolution: float | None = None
    deterministic: bool = False
    out: str = "subfrac-out"
    ledger: str | None = None

    # keys that do not change what is computed
    _NON_SEMANTIC = ("out", "ledger", "deterministic")

    def canonical(self) -> dict:
        d = asdict(self)
        return {k: d[k] for k in sorted(d) if k not in self._NON_SEMANTIC}


def config_hash(cfg: ExperimentConfig) -> str:
    """sha256 of the canonical (sorted-key) JSON of the semantic fields."""
    blob = json.dumps(cfg.canonical(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _coerce(key: str, value):
    kinds = {
        "s": float, "p": float, "box": float, "min_resolution": float,
        "resolution": int, "count": int, "seed": int,
        "gamma": _floats, "theta": _floats, "R": _floats, "n": _ints,
    }
    if key == "deterministic":
        if isinstance(value, bool):
            return value
        v = str(value).strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"deterministic must be a boolean, got {value!r}")
    if value is None:
        return None
    conv = kinds.get(key)
    if conv is None:
        return str(value).strip()
    try:
        return conv(value)
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {key}: {value!r}") from None


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            key, sep, val = line.partition(":")
        if not sep:
            raise ConfigError(f"line {lineno}: expected key = value")
        out[key.strip().replace("-", "_")] = val.strip()
    return out


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Merge a config file with CLI overrides (overrides win) and validate."""
    raw = {}
    if path is not None:
        try:
            raw.update(parse_config_text(Path(path).read_text()))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    for k, v in (overrides or {}).items():
        if v is not None:
            raw[k.replace("-", "_")] = v
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    if "experiment" not in raw:
        raise ConfigError("no experiment given")
    vals = {k: _coerce(k, v) for k, v in raw.items()}
    cfg = ExperimentConfig(**vals)
    validate(cfg)
    return cfg


def _theta_range(params):
    return params.Q / params.sp


def validate(cfg: ExperimentConfig):
    """Admissibility checks; raises ConfigError with a one-line reason."""
    if cfg.experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {cfg.experiment!r}")
    try:
        g = parse_group(cfg.group)
        if cfg.norm is None:
            cfg.norm = "koranyi" if g.law == "heisenberg" else "euclidean"
        spec = parse_norm(cfg.norm)
        cfg.norm = spec.kind
        check_compatible(g, spec)
        params = FracParams.for_group(g, cfg.s, cfg.p)
        QuadratureConfig(near_mode=cfg.near_mode)
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from None
    cfg.group = g.name
    needs_sub = cfg.experiment in ("sobolev-scan", "hardy-mu", "levelset", "eigen", "lyapunov")
    if needs_sub and not params.subcritical:
        raise ConfigError(f"{cfg.experiment} requires Q > sp (Q={params.Q:g}, sp={params.sp:g})")
    if cfg.gamma is not None:
        gmax = (params.Q - params.sp) / (params.p - 1.0)
        bad = [x for x in cfg.gamma if not 0 < x < gmax]
        if bad:
            raise ConfigError(f"gamma {bad} outside the admissible interval (0, {gmax:g})")
    if cfg.theta is not None:
        lo = _theta_range(params)
        bad = [x for x in cfg.theta if not x > lo]
        if bad:
            raise ConfigError(f"theta {bad} outside (Q/sp, inf) = ({lo:g}, inf)")
    if cfg.R is not None and any(r <= 0 for r in cfg.R):
        raise ConfigError("radii must be positive")
    if cfg.n is not None and (any(m < 4 for m in cfg.n) or len(cfg.n) not in (1, g.N)):
        raise ConfigError(f"n must be one integer >= 4 or {g.N} of them")
    if cfg.count is not None and cfg.count < 1:
        raise ConfigError("count must be >= 1")
    if cfg.resolution < 8:
        raise ConfigError("resolution must be >= 8")
    if cfg.box is not None and cfg.box <= 0:
        raise ConfigError("box must be positive")
    return cfg


# ---------------------------------------------------------------------------
# experiments


@dataclass
class Outcome:
    rows: list = field(default_factory=list)
    summary: list = field(default_factory=list)
    plots: dict = field(default_factory=dict)


def _ctx(cfg):
    g = parse_group(cfg.group)
    spec = parse_norm(cfg.norm)
    params = FracParams.for_group(g, cfg.s, cfg.p)
    qcfg = QuadratureConfig(near_mode=cfg.near_mode)
    return g, spec, params, qcfg


def _n(cfg, g, default_1d, default_nd):
    if cfg.n is None:
        m = default_1d if g.N == 1 else default_nd
        return tuple(np.broadcast_to(np.asarray(m), (g.N,)).tolist())
    return tuple(np.broadcast_to(np.asarray(cfg.n), (g.N,)).tolist())


def _report_row(rep, experiment):
    r = rep.row()
    r["experiment"] = experiment
    return r


def _exp_hardy_mu(cfg) -> Outcome:
    from .hardy import admissible_gamma_max, hardy_mu

    g, spec, params, _ = _ctx(cfg)
    gmax = admissible_gamma_max(params)
    count = cfg.count or 20
    gam = cfg.gamma or list(np.linspace(0.0, gmax, count + 2)[1:-1])
    tab = hardy_mu(g, spec, params, gam, resolution=cfg.resolution)
    out = Outcome()
    for row in tab.rows():
        ok = row["mu"] > 0 and np.isfinite(row["mu"])
        out.rows.append({"experiment": "hardy-mu", "check_id": "mu-positive", "group": g.name,
                         "norm": spec.kind, "s": params.s, "p": params.p, "param": row["gamma"],
                         "lhs": 0.0, "rhs": row["mu"], "margin": row["mu"], "tolerance": 0.0,
                         "pass": bool(ok), "mu_min": row["mu_min"], "mu_max": row["mu_max"],
                         "anisotropy": row["anisotropy"], "method": row["method"]})
    out.summary.append(f"mu(gamma) on {g.name}/{spec.kind}, s={params.s:g}, p={params.p:g}: "
                       f"{len(tab.mu)} values, min {tab.mu.min():.6g}, max {tab.mu.max():.6g}, "
                       f"anisotropy {tab.anisotropy:.3g} ({'scalar' if tab.scalar_path else 'per base point'})")
    out.plots[f"mu_curve_{g.name}_{spec.kind}.csv"] = (
        ("gamma", "mu"), [(float(a), float(b)) for a, b in zip(tab.gamma_grid, tab.mu)])
    return out


def _family(cfg, g, spec):
    from .families import annulus_family
    return annulus_family(g, spec, cfg.count or 12, seed=cfg.seed)


def _exp_sobolev(cfg) -> Outcome:
    from .families import sample, support_box
    from .inequalities import sobolev_invariance, sobolev_ratio

    g, spec, params, qcfg = _ctx(cfg)
    n = _n(cfg, g, 256, 24)
    out = Outcome()
    ratios = []
    resolution = "fixed" if g.N == 1 else "matched"
    shift = np.full(g.N, 0.25) if g.law == "abelian" else np.array([0.2, -0.2, 0.05])
    for i, f in enumerate(_family(cfg, g, spec)):
        lo, hi, nn = support_box(g, spec, f.outer, n)
        rho = sobolev_ratio(g, spec, params, sample(g, f, lo, hi, nn), qcfg)
        ratios.append(rho)
        out.rows.append({"experiment": "sobolev-scan", "check_id": "sobolev-ratio",
                         "group": g.name, "norm": spec.kind, "s": params.s, "p": params.p,
                         "param": float(i), "lhs": 0.0, "rhs": rho, "margin": rho,
                         "tolerance": 0.0, "pass": bool(rho > 0)})
        inv = sobolev_invariance(g, spec, params, f, n, shift=shift, cfg=qcfg,
                                 resolution=resolution)
        r = _report_row(inv, "sobolev-scan")
        r["param"] = float(i)
        out.rows.append(r)
    out.summary.append(f"Sobolev ratio [u]^p/||u||_p*^p over {len(ratios)} functions: "
                       f"min {min(ratios):.6g} (empirical 1/C), max {max(ratios):.6g}")
    out.plots[f"sobolev_ratios_{g.name}_{spec.kind}.csv"] = (
        ("index", "ratio"), [(i, float(r)) for i, r in enumerate(ratios)])
    return out


def _exp_picone(cfg) -> Outcome:
    from .grid import SampledFunction
    from .inequalities import picone_check

    g, spec, params, qcfg = _ctx(cfg)
    n = _n(cfg, g, 32, 16)
    half = cfg.box or 1.0
    rng = np.random.default_rng(cfg.seed)
    out = Outcome()
    for trial in range(cfg.count or 3):
        om = SampledFunction(g.name, -half * np.ones(g.N), half * np.ones(g.N), n,
                             rng.uniform(0.1, 2.0, n), 0)
        u = SampledFunction(g.name, -half * np.ones(g.N), half * np.ones(g.N), n,
                            rng.normal(size=n), 0)
        rep = picone_check(g, spec, params, om, u, cfg=qcfg)
        r = _report_row(rep, "picone")
        r["param"] = float(trial)
        r["min_R"] = rep.extra["min_R"]
        r["pass"] = bool(rep.passed and rep.extra["pointwise_ok"])
        out.rows.append(r)
    out.summary.append(f"Picone on {np.prod(n)} grid points, p={params.p:g}: min R = "
                       f"{min(r['min_R'] for r in out.rows):.3g}")
    return out


def _exp_levelset(cfg) -> Outcome:
    from .families import sample, support_box
    from .inequalities import levelset_lower_bound, sequence_lemma_check

    g, spec, params, qcfg = _ctx(cfg)
    n = _n(cfg, g, 256, 20)
    out = Outcome()
    for i, f in enumerate(_family(cfg, g, spec)):
        lo, hi, nn = support_box(g, spec, f.outer, n)
        rep = levelset_lower_bound(g, spec, params, sample(g, f, lo, hi, nn), qcfg)
        r = _report_row(rep, "levelset")
        r["param"] = float(i)
        r["ratio"] = rep.extra["ratio"]
        r["pass"] = bool(rep.extra["identities"] and rep.extra["ratio"] > 0)
        out.rows.append(r)
    rng = np.random.default_rng(cfg.seed)
    for i in range(cfg.count or 12):
        a = np.sort(rng.random(int(rng.integers(2, 12))))[::-1]
        a[-1] = 0.0
        rep = sequence_lemma_check(a, 2.0 ** params.p, params, k0=-5)
        r = _report_row(rep, "levelset")
        r.update(group=g.name, norm=spec.kind, param=float(i), ratio=rep.extra["ratio"])
        r["pass"] = bool(np.isfinite(rep.extra["ratio"]) or rep.extra["degenerate"])
        out.rows.append(r)
    lv = [r["ratio"] for r in out.rows if r["check_id"] == "levelset"]
    sq = [r["ratio"] for r in out.rows if r["check_id"] == "sequence" and np.isfinite(r["ratio"])]
    out.summary.append(f"level-set ratio [u]^p/S*: min {min(lv):.6g}; sequence-lemma ratio: "
                       f"max {max(sq) if sq else float('nan'):.6g}")
    return out


def _exp_lem1(cfg) -> Outcome:
    from .grid import SampledFunction
    from .groups import _norm_unchecked
    from .inequalities import complement_integral_check

    g, spec, params, _ = _ctx(cfg)
    n = _n(cfg, g, 400, 48 if g.N == 2 else 32)
    half = np.array([2.0, 2.0, 1.0]) if g.law == "heisenberg" else np.full(g.N, 2.0)
    half = half * (cfg.box or 1.0)
    out = Outcome()
    ball = SampledFunction.from_function(
        g, lambda P: (_norm_unchecked(g, spec, P) < 1.0).astype(float), -half, half, n)
    x = np.full(g.N, 1e-9)
    rep = complement_integral_check(g, spec, params, ball, x, tol=0.01)
    r = _report_row(rep, "lemma-lem1")
    r["check_id"] = "lem1-equality"
    rel = rep.extra["relative_margin"]
    r["pass"] = bool(abs(rel) <= 0.01)
    r["relative_margin"] = rel
    out.rows.append(r)
    rng = np.random.default_rng(cfg.seed)
    for i in range(cfg.count or 20):
        k = int(rng.integers(1, 4))
        c = rng.uniform(-0.5, 0.5, (k, g.N)) * half
        w = rng.uniform(0.1, 0.35, (k, g.N)) * half

        def ind(P, c=c, w=w):
            return np.any(np.all(np.abs(P[:, None, :] - c[None]) < w[None], axis=-1), axis=1)

        K = SampledFunction.from_function(g, lambda P: ind(P).astype(float), -half, half, n)
        rep = complement_integral_check(g, spec, params, K, c[0] + 1e-9, tol=0.02)
        r = _report_row(rep, "lemma-lem1")
        r["check_id"] = "lem1-random"
        r["param"] = float(i)
        r["relative_margin"] = rep.extra["relative_margin"]
        out.rows.append(r)
    rels = [r["relative_margin"] for r in out.rows[1:]]
    out.summary.append(f"complement integral vs C|K|^(-sp/Q): ball relative gap {rel:.3g}; "
                       f"random sets min relative margin {min(rels):.3g}")
    return out


def _eigen_defaults(cfg, g):
    n = _n(cfg, g, 40, 20)
    if cfg.n is None and g.law == "heisenberg":
        n = (20, 20, 12)
    minres = cfg.min_resolution
    if minres is None:
        minres = 16.0 if g.law == "abelian" else 8.0
    return n, minres


def _solve_balls(cfg, radii):
    from .eigen import assemble, minimize_rayleigh, quasi_ball

    g, spec, params, _ = _ctx(cfg)
    n, minres = _eigen_defaults(cfg, g)
    qcfg = QuadratureConfig(sphere_resolution=min(cfg.resolution, 128))
    runs = []
    for R in radii:
        dom = quasi_ball(g, spec, R, n)
        form = assemble(dom, params, qcfg, min_resolution=minres)
        runs.append((dom, minimize_rayleigh(form)))
    return g, spec, params, runs


def _eigen_row(experiment, g, spec, params, dom, res):
    from .eigen import run_id

    rec = {"group": g.name, "norm": spec.kind, "s": params.s, "p": params.p, "R": dom.R,
           "h": [float(v) for v in dom.h], "lambda1": res.lambda1, "residual": res.residual,
           "iters": res.iters}
    ok = res.lambda1 > 0 and res.sign_constant and res.residual <= 1e-4
    row = {"experiment": experiment, "check_id": "eigen-lambda1", "group": g.name,
           "norm": spec.kind, "s": params.s, "p": params.p, "param": dom.R, "lhs": 0.0,
           "rhs": res.lambda1, "margin": res.lambda1, "tolerance": 0.0, "pass": bool(ok)}
    row.update({"run_id": run_id(rec), "R": dom.R, "h": rec["h"], "lambda1": res.lambda1,
                "residual": res.residual, "iters": res.iters})
    return row


def _exp_eigen(cfg) -> Outcome:
    radii = cfg.R or [0.5, 1.0, 2.0]
    g, spec, params, runs = _solve_balls(cfg, radii)
    out = Outcome()
    for dom, res in runs:
        out.rows.append(_eigen_row("eigen", g, spec, params, dom, res))
    lam = np.array([r.lambda1 for _, r in runs])
    R = np.array(radii)
    if len(R) >= 2:
        slope = float(np.polyfit(np.log(R), np.log(lam), 1)[0])
        dev = abs(slope + params.sp) / params.sp
        out.rows.append({"experiment": "eigen", "check_id": "eigen-scaling", "group": g.name,
                         "norm": spec.kind, "s": params.s, "p": params.p, "param": None,
                         "lhs": dev, "rhs": 0.03, "margin": 0.03 - dev, "tolerance": 0.0,
                         "pass": bool(dev <= 0.03), "slope": slope})
        out.summary.append(f"lambda_1 vs R on {g.name}/{spec.kind}, p={params.p:g}: log-log slope "
                           f"{slope:.6g} (expected {-params.sp:g})")
    out.plots[f"lambda_vs_R_{g.name}_{spec.kind}_p{params.p:g}.csv"] = (
        ("R", "lambda1"), [(float(a), float(b)) for a, b in zip(R, lam)])
    return out


def _exp_lyapunov(cfg) -> Outcome:
    from .eigen import lyapunov_check

    radii = cfg.R or [0.5, 1.0, 2.0]
    g, spec, params, runs = _solve_balls(cfg, radii)
    thetas = cfg.theta or [2 * params.Q / params.sp, 4 * params.Q / params.sp]
    out = Outcome()
    for dom, res in runs:
        out.rows.append(_eigen_row("lyapunov", g, spec, params, dom, res))
    doms = [d for d, _ in runs]
    results = [r for _, r in runs]
    for th in thetas:
        rep = lyapunov_check(doms, params, th, results, tol=0.05)
        out.rows.append({"experiment": "lyapunov", "check_id": "lyapunov-P", "group": g.name,
                         "norm": spec.kind, "s": params.s, "p": params.p, "param": float(th),
                         "lhs": rep["spread"], "rhs": 0.05, "margin": 0.05 - rep["spread"],
                         "tolerance": 0.0, "pass": rep["pass"], "P": rep["P"]})
        out.summary.append(f"theta={th:g}: P(theta, R) = " + ", ".join(f"{v:.6g}" for v in rep["P"])
                           + f" over R = {radii}; spread {rep['spread']:.3g}")
    return out


_DISPATCH = {
    "hardy-mu": _exp_hardy_mu,
    "sobolev-scan": _exp_sobolev,
    "picone": _exp_picone,
    "levelset": _exp_levelset,
    "lemma-lem1": _exp_lem1,
    "eigen": _exp_eigen,
    "lyapunov": _exp_lyapunov,
}


# ---------------------------------------------------------------------------
# persistence


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return json.dumps(v)
    return "" if v is None else str(v)


def _clean(v):
    """JSON-safe values: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if np.isfinite(v) else str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    return v


def run(cfg: ExperimentConfig) -> tuple[int, list]:
    """Run one experiment and write its files. Returns (status, rows).

    Status 0 when every row passes, 4 when some invariant row fails. Solver
    non-convergence propagates as ConvergenceError (status 3 in the CLI).
    """
    validate(cfg)
    h = config_hash(cfg)
    t0 = time.perf_counter()
    outcome = _DISPATCH[cfg.experiment](cfg)
    elapsed = time.perf_counter() - t0
    rows = []
    for r in outcome.rows:
        r = dict(r)
        r["config_hash"] = h
        r["version"] = __version__
        rows.append(_clean(r))
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ROW_FIELDS)
    for r in rows:
        w.writerow([_fmt(r.get(k)) for k in ROW_FIELDS])
    (out / "results.csv").write_text(buf.getvalue())
    lines = "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows)
    (out / "results.jsonl").write_text(lines)
    ledger = Path(cfg.ledger) if cfg.ledger else out / "ledger.jsonl"
    ledger.parent.mkdir(parents=True, exist_ok=True)
    with ledger.open("a") as fh:
        fh.write(lines)
    for name, (header, data) in outcome.plots.items():
        pbuf = io.StringIO()
        pw = csv.writer(pbuf, lineterminator="\n")
        pw.writerow(header)
        for row in data:
            pw.writerow([_fmt(v) for v in row])
        (out / name).write_text(pbuf.getvalue())
    npass = sum(1 for r in rows if r["pass"])
    summary = [f"experiment: {cfg.experiment}", f"config_hash: {h}", f"version: {__version__}",
               f"checks: {npass}/{len(rows)} passed"] + outcome.summary
    if not cfg.deterministic:
        summary.append(f"elapsed: {elapsed:.2f} s")
    (out / "summary.txt").write_text("\n".join(summary) + "\n")
    status = 0 if npass == len(rows) else 4
    return status, rows
