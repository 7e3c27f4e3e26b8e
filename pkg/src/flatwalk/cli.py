"""Command-line harness: ``flatwalk <command> [options]``.

Every command reads a complex (``--complex PATH`` or ``--generate SPEC``),
derives all randomness from ``--seed`` and writes its report to ``--out``
(stdout by default). Reports carry ``{seed, version, config}``; CSV files
carry the same echo in leading ``#`` comment lines.

Exit status: 0 success, 1 validation failure, 2 I/O error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import __version__
from .complex_core import Complex, ComplexError, check_boundaryless, check_cat0, load_complex
from .dual_graph import build_dual, classify_transience, dual_to_text, estimate_return, resistance_csv, shell_resistance
from .generate import generate, home_point, parse_spec
from .scaling import ScaledProcessSpec, convergence_sweep, estimate_fdd, fdd_to_csv, tightness_samples
from .stats import stream
from .transport import BallIndicator, Constant, events_to_csv, resolvent_series_check, simulate_path

COMMANDS = ("validate", "cat0", "simulate", "fdd", "sweep", "tightness", "resolvent", "dual", "walk", "resistance", "classify")


class ValidationFailure(Exception):
    pass


@dataclass
class RunConfig:
    command: str = "validate"
    complex: str | None = None
    generate: str | None = None
    seed: int = 0
    threads: int = 1
    out: str | None = None
    format: str | None = None
    eta: float = 1.0
    etas: list = field(default_factory=lambda: [0.4, 0.2, 0.1])
    t: float = 1.0
    times: list = field(default_factory=lambda: [0.5, 1.0])
    paths: int = 1000
    alpha: float = 0.01
    window: float = 0.1
    eps: float = 0.5
    lam: float = 1.0
    n_terms: int = 12
    field: str = "ball"
    ball_radius: float = 0.25
    start: str | None = None
    origin: int | None = None
    horizon: int = 10_000
    walks: int = 10_000
    radius: int = 12

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ValidationFailure(f"unknown command {self.command!r}")
        if (self.complex is None) == (self.generate is None):
            raise ValidationFailure("give exactly one of --complex and --generate")
        for name in ("threads", "paths", "walks", "radius", "n_terms"):
            if getattr(self, name) < 1:
                raise ValidationFailure(f"{name} must be positive")
        for name in ("eta", "lam", "window", "eps", "ball_radius", "alpha"):
            if not getattr(self, name) > 0:
                raise ValidationFailure(f"{name} must be positive")
        if self.t < 0 or self.horizon < 0:
            raise ValidationFailure("times must be nonnegative")
        if any(b >= a for a, b in zip(self.etas, self.etas[1:])) or min(self.etas) <= 0:
            raise ValidationFailure("etas must be positive and strictly decreasing")
        if any(b <= a for a, b in zip(self.times, self.times[1:])) or min(self.times) < 0:
            raise ValidationFailure("times must be nonnegative and strictly increasing")
        if self.format not in (None, "csv", "json"):
            raise ValidationFailure("format must be csv or json")
        if not 0 <= self.seed < 2**64:
            raise ValidationFailure("seed must be a 64-bit unsigned integer")


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flatwalk", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS
    for name in COMMANDS:
        q = sub.add_parser(name)
        src = q.add_mutually_exclusive_group()
        src.add_argument("--complex", default=S, help="complex-definition JSON file")
        src.add_argument("--generate", default=S, help="generator spec, e.g. plane:auto, fan:3, book:3, tree:3:12")
        q.add_argument("path", nargs="?", default=S, help="complex file (same as --complex)")
        q.add_argument("--config", default=None, help="JSON file with RunConfig fields")
        q.add_argument("--seed", type=int, default=S)
        q.add_argument("--threads", type=int, default=S)
        q.add_argument("--out", default=S)
        q.add_argument("--format", choices=("csv", "json"), default=S)
        q.add_argument("--eta", type=float, default=S)
        q.add_argument("--etas", type=_floats, default=S, help="comma-separated, strictly decreasing")
        q.add_argument("--t", type=float, default=S)
        q.add_argument("--times", type=_floats, default=S)
        q.add_argument("--paths", type=int, default=S)
        q.add_argument("--alpha", type=float, default=S)
        q.add_argument("--window", type=float, default=S)
        q.add_argument("--eps", type=float, default=S)
        q.add_argument("--lam", type=float, default=S)
        q.add_argument("--n-terms", dest="n_terms", type=int, default=S)
        q.add_argument("--field", choices=("ball", "one"), default=S)
        q.add_argument("--ball-radius", dest="ball_radius", type=float, default=S)
        q.add_argument("--start", default=S, help="vertex ids 'a,b[:wa,wb]' of the start point")
        q.add_argument("--origin", type=int, default=S, help="codim-1 face index for walks")
        q.add_argument("--horizon", type=int, default=S)
        q.add_argument("--walks", type=int, default=S)
        q.add_argument("--radius", type=int, default=S)
    return p


def make_config(argv: list[str]) -> RunConfig:
    """Defaults, overridden by the config file, overridden by flags."""
    ns = vars(build_parser().parse_args(argv))
    values = {}
    cfg_path = ns.pop("config", None)
    if cfg_path is not None:
        with open(cfg_path) as fh:
            values.update(json.load(fh))
    if "path" in ns:
        ns["complex"] = ns.pop("path")
    values.update(ns)
    known = {f.name for f in fields(RunConfig)}
    unknown = set(values) - known
    if unknown:
        raise ValidationFailure(f"unknown config keys: {sorted(unknown)}")
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


# -- helpers ----------------------------------------------------------------

def _reach(cfg: RunConfig) -> float | None:
    if cfg.command in ("simulate", "fdd"):
        t = cfg.t if cfg.command == "simulate" else max(cfg.times)
        return ScaledProcessSpec(cfg.eta).lipschitz * t
    if cfg.command == "sweep":
        return cfg.t / min(cfg.etas)
    if cfg.command == "tightness":
        return cfg.t / cfg.eta
    if cfg.command in ("walk",):
        return float(cfg.horizon)
    if cfg.command == "resistance":
        return float(cfg.radius)
    return None


def load(cfg: RunConfig) -> Complex:
    if cfg.complex is not None:
        with open(cfg.complex) as fh:
            return load_complex(fh.read())
    spec = parse_spec(cfg.generate)
    return generate(spec.kind, *spec.params, reach=_reach(cfg))


def start_point(c: Complex, cfg: RunConfig):
    if cfg.start is None:
        return home_point(c)
    verts, _, w = cfg.start.partition(":")
    vs = [int(v) for v in verts.split(",")]
    ws = _floats(w) if w else [1.0 / len(vs)] * len(vs)
    return c.point_on(vs, ws)


def default_origin(c: Complex, cfg: RunConfig) -> int:
    if cfg.origin is not None:
        return cfg.origin
    root = c.meta.get("root", 0)
    n = c.dimension
    if n == 1:
        return c.index[0][(root,)]
    for f, key in enumerate(c.simplices[n - 1]):
        if root in key:
            return f
    return 0


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return None if not math.isfinite(x) else float(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if hasattr(x, "to_dict"):
        return _jsonable(x.to_dict())
    return x


def config_echo(cfg: RunConfig) -> dict:
    """Config fields that determine the output (the destination does not)."""
    d = asdict(cfg)
    d.pop("out")
    return d


def envelope(cfg: RunConfig, report) -> str:
    doc = {"report": _jsonable(report), "seed": cfg.seed, "version": __version__, "config": config_echo(cfg)}
    return json.dumps(doc, indent=1) + "\n"


def csv_header(cfg: RunConfig) -> str:
    return f"# flatwalk {__version__} seed={cfg.seed}\n# config={json.dumps(config_echo(cfg), sort_keys=True)}\n"


# -- commands ---------------------------------------------------------------

def cmd_validate(c: Complex, cfg: RunConfig):
    bl = check_boundaryless(c)
    rep = {
        "dimension": c.dimension,
        "counts": c.counts(),
        "admissible": bool(c.flags["admissible"]),
        "boundaryless": bl["boundaryless"],
        "n_boundary_simplices": len(bl["boundary_simplices"]),
    }
    if not rep["admissible"]:
        raise ValidationFailure("complex is not admissible")
    return "json", rep, f"admissible={rep['admissible']} boundaryless={rep['boundaryless']}"


def cmd_cat0(c: Complex, cfg: RunConfig):
    r = check_cat0(c)
    girth = {c.labels[v]: g for v, g in r["girth"].items()}
    rep = {"cat0": r["cat0"], "violations": [{"vertex": v, "girth": g} for v, g in r["violations"]], "girth": girth}
    return "json", rep, f"cat0={r['cat0']}"


def cmd_simulate(c: Complex, cfg: RunConfig):
    spec = ScaledProcessSpec(cfg.eta)
    x0 = start_point(c, cfg)
    paths = [
        simulate_path(c, x0, cfg.t, stream(cfg.seed, "path", i), speed=spec.speed, seed=cfg.seed, time_scale=spec.time_scale)
        for i in range(cfg.paths)
    ]
    absorbed = sum(p.cemetery for p in paths)
    if (cfg.format or "csv") == "csv":
        return "csv", events_to_csv(paths, c.dimension), f"{cfg.paths} paths, {absorbed} absorbed"
    rep = []
    for i, p in enumerate(paths):
        z = p.at(c, cfg.t)
        rep.append(
            {
                "path_id": i,
                "n_renewals": p.n_renewals,
                "absorbed": p.cemetery,
                "carrier_simplex": None if z is None else z.carrier,
                "bary": None if z is None else [float(b) for b in z.bary],
            }
        )
    return "json", rep, f"{cfg.paths} paths, {absorbed} absorbed"


def cmd_fdd(c: Complex, cfg: RunConfig):
    fdd = estimate_fdd(c, start_point(c, cfg), cfg.eta, cfg.times, cfg.paths, cfg.seed, cfg.threads)
    if (cfg.format or "csv") == "csv":
        return "csv", fdd_to_csv(c, fdd), f"{fdd.n_paths} paths at {len(cfg.times)} times"
    d = fdd.distance_from_start(c)
    rep = {
        "times": fdd.times.tolist(),
        "alive_fraction": fdd.alive.mean(axis=0).tolist(),
        "mean_distance": [float(np.mean(col[np.isfinite(col)])) if np.isfinite(col).any() else None for col in d.T],
    }
    return "json", rep, "fdd summary"


def cmd_sweep(c: Complex, cfg: RunConfig):
    r = convergence_sweep(c, start_point(c, cfg), cfg.etas, cfg.t, cfg.paths, cfg.seed, cfg.alpha, cfg.threads)
    rep = {k: r[k] for k in ("etas", "t", "ks_pairs", "threshold", "n_paths", "seed")}
    ks = ", ".join(f"{p['ks']:.4f}" for p in r["ks_pairs"])
    return "json", rep, f"KS distances {ks} (threshold {r['threshold']:.4f})"


def cmd_tightness(c: Complex, cfg: RunConfig):
    s = tightness_samples(c, start_point(c, cfg), cfg.eta, cfg.t, cfg.window, cfg.paths, cfg.seed, threads=cfg.threads)
    finite = s[np.isfinite(s)]
    rep = {
        "eta": cfg.eta,
        "window": cfg.window,
        "eps": cfg.eps,
        "horizon": cfg.t,
        "probability": float(np.mean(s > cfg.eps)),
        "max_statistic": float(finite.max()) if finite.size else None,
        "absorbed": int(np.sum(~np.isfinite(s))),
        "n_paths": cfg.paths,
    }
    return "json", rep, f"P(stat > {cfg.eps}) = {rep['probability']}"


def cmd_resolvent(c: Complex, cfg: RunConfig):
    x = start_point(c, cfg)
    f = Constant(1.0) if cfg.field == "one" else BallIndicator(c, c.centroid(0), cfg.ball_radius)
    r = resolvent_series_check(c, f, x, cfg.lam, cfg.n_terms, cfg.paths, cfg.seed, cfg.threads)
    return "json", r, f"diff={r['diff']:.3g} tail={r['tail_bound']:.3g} pass={r['pass']}"


def cmd_dual(c: Complex, cfg: RunConfig):
    g = build_dual(c)
    if cfg.format == "json":
        deg = np.bincount(g.deg)
        rep = {"n": g.n, "v_top": g.n_top, "v_codim1": g.n_codim1, "edges": g.n_top * (g.n + 1), "degree_histogram": deg.tolist()}
        return "json", rep, "dual graph summary"
    return "text", dual_to_text(g), f"T={g.n_top} F={g.n_codim1}"


def cmd_walk(c: Complex, cfg: RunConfig):
    g = build_dual(c)
    w = estimate_return(g, default_origin(c, cfg), cfg.horizon, cfg.walks, cfg.seed)
    rep = {
        "origin": w.origin,
        "horizon": w.horizon,
        "n_walks": w.n_walks,
        "returned": w.returned,
        "absorbed": w.absorbed,
        "return_probability": w.return_probability,
    }
    return "json", rep, f"return probability {w.return_probability.value:.4f} ± {w.return_probability.std_error:.4f}"


def cmd_resistance(c: Complex, cfg: RunConfig):
    rows = shell_resistance(build_dual(c), default_origin(c, cfg), cfg.radius)
    if any(b["R_eff"] < a["R_eff"] - 1e-12 for a, b in zip(rows, rows[1:])):
        raise ValidationFailure("Rayleigh monotonicity violated")
    if (cfg.format or "csv") == "csv":
        return "csv", resistance_csv(rows), f"R_eff({cfg.radius}) = {rows[-1]['R_eff']:.6f}"
    return "json", rows, f"R_eff({cfg.radius}) = {rows[-1]['R_eff']:.6f}"


def cmd_classify(c: Complex, cfg: RunConfig):
    r = classify_transience(c)
    line = "transient (Theorem 5.4)" if r["verdict"] == "transient" else f"not_covered: {r['reasons'][-1]}"
    return "json", r, line


HANDLERS = {name: globals()[f"cmd_{name}"] for name in COMMANDS}


def run(cfg: RunConfig, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        c = load(cfg)
        kind, payload, summary = HANDLERS[cfg.command](c, cfg)
    except OSError as exc:
        print(f"error: {exc}", file=stderr)
        return 2
    except (ValidationFailure, ComplexError, ValueError) as exc:
        print(f"invalid: {exc}", file=stderr)
        return 1
    if kind == "json":
        text = envelope(cfg, payload)
    elif kind == "csv":
        text = csv_header(cfg) + payload
    else:
        text = payload
    try:
        if cfg.out:
            with open(cfg.out, "w") as fh:
                fh.write(text)
        else:
            stdout.write(text)
    except OSError as exc:
        print(f"error: {exc}", file=stderr)
        return 2
    print(summary, file=stderr if not cfg.out else stdout)
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = make_config(argv)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValidationFailure, TypeError, ValueError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return 1
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
