"""Command-line front end.

Exit status: 0 when the operation succeeds or the verdict is a pass, 2 when a
check fails (rule failure, infeasible, not certified, not converged), 1 for
usage, input or IO errors.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .energy import PointCloud, energy, find_energetic
from .geometry import GeometryError
from .sigma import SigmaGraph

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2
SUBCOMMANDS = ("steiner", "energy", "criterion", "trim", "horseshoe", "optimize", "validate", "render", "suite")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Everything a run needs; unknown keys in a config file are rejected."""

    subcommand: str
    out_dir: str = "."
    m: str | None = None
    sigma: str | None = None
    terminals: str | None = None
    points: str | None = None
    circle: str | None = None
    segment: str | None = None
    r: float | None = None
    R: float | None = None
    samples: int = 5000
    tol_angle: float | None = None
    rho_iso: float | None = None
    radii: list | None = None
    eta: float | None = None
    fixture: str | None = None
    optimizer: dict = field(default_factory=dict)
    seed: int = 0
    svg: bool = True

    def __post_init__(self):
        if self.subcommand not in SUBCOMMANDS:
            raise UsageError(f"unknown subcommand {self.subcommand!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        extra = set(d) - names
        if extra:
            raise UsageError(f"unknown config fields: {sorted(extra)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


# --------------------------------------------------------------------------
# inputs
# --------------------------------------------------------------------------


def _read_json(path: str):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise UsageError(f"missing file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"malformed JSON in {path}: {exc}") from exc


def _floats(text: str, n: int | None = None, what: str = "value") -> list[float]:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"cannot parse {what} {text!r}") from exc
    if n is not None and len(vals) not in (n if isinstance(n, tuple) else (n,)):
        raise UsageError(f"{what} needs {n} comma-separated numbers")
    return vals


def parse_points(text: str) -> np.ndarray:
    pts = [_floats(p, 2, "point") for p in text.split(";") if p.strip()]
    if not pts:
        raise UsageError("no points given")
    return np.array(pts)


def load_cloud(cfg: RunConfig, required: bool = True) -> PointCloud | None:
    given = [k for k in ("m", "points", "circle", "segment") if getattr(cfg, k)]
    if len(given) > 1:
        raise UsageError(f"give M only once (got {given})")
    if cfg.m:
        d = _read_json(cfg.m)
        return PointCloud(np.array(d, dtype=float)) if isinstance(d, list) else PointCloud.from_dict(d)
    if cfg.points:
        return PointCloud.finite(parse_points(cfg.points))
    if cfg.circle:
        v = _floats(cfg.circle, (2, 4), "--circle R,N[,cx,cy]")
        center = (v[2], v[3]) if len(v) == 4 else (0.0, 0.0)
        return PointCloud.circle(v[0], int(v[1]), center)
    if cfg.segment:
        v = _floats(cfg.segment, 5, "--segment x0,y0,x1,y1,N")
        return PointCloud.segment(v[:2], v[2:4], int(v[4]))
    if required:
        raise UsageError("M is required (--m, --points, --circle or --segment)")
    return None


def load_sigma(cfg: RunConfig) -> SigmaGraph:
    if not cfg.sigma:
        raise UsageError("--sigma is required")
    return SigmaGraph.from_dict(_read_json(cfg.sigma))


def need_r(cfg: RunConfig) -> float:
    if cfg.r is None:
        raise UsageError("--r is required")
    return float(cfg.r)


class Writer:
    def __init__(self, out_dir: str):
        self.out = Path(out_dir)
        try:
            self.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise UsageError(f"cannot create output dir {out_dir}: {exc}") from exc
        self.written: list[str] = []

    def json(self, name: str, obj) -> None:
        self._write(name, json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")

    def text(self, name: str, text: str) -> None:
        self._write(name, text)

    def _write(self, name, text):
        path = self.out / name
        try:
            path.write_text(text)
        except OSError as exc:
            raise UsageError(f"cannot write {path}: {exc}") from exc
        self.written.append(str(path))


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, float) and not math.isfinite(o):
        return None
    raise TypeError(f"not JSON serialisable: {type(o)}")


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_steiner(cfg: RunConfig, w: Writer) -> int:
    from .steiner import steiner_exact

    if cfg.terminals:
        d = _read_json(cfg.terminals)
        pts = np.array(d["points"] if isinstance(d, dict) else d, dtype=float)
    else:
        pts = load_cloud(cfg).points
    tree = steiner_exact(pts)
    w.json("steiner.json", tree.to_dict())
    if cfg.svg:
        from .svg import render_svg

        w.text("steiner.svg", render_svg(PointCloud.finite(pts), tree.to_sigma()))
    print(json.dumps({"length": tree.length, "topology_id": tree.topology_id}))
    return EXIT_OK


def cmd_energy(cfg: RunConfig, w: Writer) -> int:
    m, g = load_cloud(cfg), load_sigma(cfg)
    res = energy(m, g)
    out = {"value": res.value, "argmax": list(res.argmax), "argmax_index": res.argmax_index,
           "delta": m.delta}
    status = EXIT_OK
    if cfg.r is not None:
        eta = 1e-9 if cfg.eta is None else cfg.eta
        out.update(r=cfg.r, eta=eta, feasible=res.value <= cfg.r + eta)
        status = EXIT_OK if out["feasible"] else EXIT_FAIL
    w.json("energy.json", out)
    print(json.dumps(out, default=_jsonable))
    return status


def cmd_criterion(cfg: RunConfig, w: Writer) -> int:
    from .minlab import CERTIFIED, criterion_check

    rep = criterion_check(load_cloud(cfg), load_sigma(cfg), need_r(cfg))
    w.json("criterion.json", rep.to_dict())
    print(json.dumps(rep.to_dict(), default=_jsonable))
    return EXIT_OK if rep.verdict == CERTIFIED else EXIT_FAIL


def cmd_trim(cfg: RunConfig, w: Writer) -> int:
    from .minlab import trimmed_tree

    m, r = load_cloud(cfg), need_r(cfg)
    g = trimmed_tree(m, r)
    w.json("sigma.json", g.to_dict())
    if cfg.svg:
        from .svg import render_svg

        w.text("sigma.svg", render_svg(m, g, balls=m.points, r=r))
    return EXIT_OK


def cmd_horseshoe(cfg: RunConfig, w: Writer) -> int:
    from .minlab import horseshoe

    if cfg.R is None:
        raise UsageError("--R is required")
    m, g, params = horseshoe(float(cfg.R), need_r(cfg), int(cfg.samples))
    w.json("m.json", m.to_dict())
    w.json("sigma.json", g.to_dict())
    w.json("horseshoe.json", params.to_dict())
    if cfg.svg:
        from .svg import render_svg

        w.text("horseshoe.svg", render_svg(m, g))
    print(json.dumps({"length": params.length, "energy": params.energy, **params.resolved}))
    return EXIT_OK


def cmd_optimize(cfg: RunConfig, w: Writer) -> int:
    from .optimizer import OptimizerConfig, optimize

    m = load_cloud(cfg)
    opts = dict(cfg.optimizer)
    if cfg.r is not None:
        opts.setdefault("r", cfg.r)
    opts.setdefault("seed", cfg.seed)
    if cfg.sigma:
        opts.setdefault("init", "user")
        opts["init_graph"] = _read_json(cfg.sigma)
    try:
        ocfg = OptimizerConfig.from_dict(opts)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad optimizer config: {exc}") from exc
    if cfg.svg and not ocfg.snapshot_every:
        ocfg = OptimizerConfig.from_dict({**ocfg.to_dict(), "snapshot_every": 50})
    trace = optimize(m, ocfg)
    w.json("trace.json", trace.to_dict())
    w.json("sigma.json", trace.final.to_dict())
    if cfg.svg:
        from .svg import render_svg

        for it, g in trace.snapshots:
            w.text(f"frame_{it:05d}.svg", render_svg(m, g, title=f"iteration {it}"))
        w.text("final.svg", render_svg(m, trace.final, title="final"))
    print(json.dumps({"length": trace.final_length, "violation": trace.final_violation,
                      "converged": trace.converged, "iterations": len(trace)}))
    return EXIT_OK if trace.converged else EXIT_FAIL


def _validate_kwargs(cfg: RunConfig) -> dict:
    kw = {}
    if cfg.tol_angle is not None:
        kw["tol_angle"] = float(cfg.tol_angle)
    if cfg.rho_iso is not None:
        kw["rho_iso"] = float(cfg.rho_iso)
    if cfg.radii is not None:
        kw["radii"] = [float(x) for x in cfg.radii]
    if cfg.eta is not None:
        kw["eta"] = float(cfg.eta)
    return kw


def _find_fixture(name: str):
    from .minlab import negative_fixtures, positive_fixtures

    for fx in positive_fixtures() + negative_fixtures():
        if fx.name == name:
            return fx
    raise UsageError(f"unknown fixture {name!r}")


def cmd_validate(cfg: RunConfig, w: Writer) -> int:
    from .validator import validate

    kw = _validate_kwargs(cfg)
    if cfg.fixture:
        fx = _find_fixture(cfg.fixture)
        m, g, r = fx.m, fx.g, fx.r
        kw.setdefault("tol_angle", fx.tol_angle)
        rep = validate(m, g, r, classification=fx.classification, **kw)
    else:
        m, g, r = load_cloud(cfg), load_sigma(cfg), need_r(cfg)
        rep = validate(m, g, r, **kw)
    w.json("report.json", rep.to_dict())
    if cfg.svg:
        from .svg import render_svg

        wit = find_energetic(m, g, r) if cfg.fixture is None or not cfg.fixture.startswith("osc") else ()
        w.text("report.svg", render_svg(m, g, witnesses=_thin(wit), r=r))
    print(json.dumps({"verdict": rep.verdict, "failed": rep.failed()}))
    return EXIT_OK if rep.verdict == "pass" else EXIT_FAIL


def _thin(witnesses, limit: int = 200):
    wit = list(witnesses)
    step = max(1, len(wit) // limit)
    return wit[::step]


def cmd_render(cfg: RunConfig, w: Writer) -> int:
    from .svg import render_svg

    m = load_cloud(cfg, required=False)
    g = load_sigma(cfg) if cfg.sigma else None
    wit = ()
    if cfg.r is not None and m is not None and g is not None:
        wit = _thin(find_energetic(m, g, cfg.r))
    w.text("render.svg", render_svg(m, g, witnesses=wit, r=cfg.r))
    return EXIT_OK


def cmd_suite(cfg: RunConfig, w: Writer) -> int:
    from .minlab import negative_fixtures, positive_fixtures

    rows = []
    ok = True
    for fx in positive_fixtures(int(cfg.samples)) + negative_fixtures():
        rep = fx.run()
        if fx.expected_failure is None:
            good = rep.verdict == "pass"
        else:
            good = rep.failed() == [fx.expected_failure]
        ok &= good
        rows.append({"name": fx.name, "expected_failure": fx.expected_failure, "verdict": rep.verdict,
                     "failed": rep.failed(), "as_expected": good, "report": rep.to_dict()})
        print(f"{'ok  ' if good else 'FAIL'} {fx.name}: {rep.verdict} {rep.failed()}")
    w.json("suite.json", rows)
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {
    "steiner": cmd_steiner, "energy": cmd_energy, "criterion": cmd_criterion, "trim": cmd_trim,
    "horseshoe": cmd_horseshoe, "optimize": cmd_optimize, "validate": cmd_validate,
    "render": cmd_render, "suite": cmd_suite,
}


def run(cfg: RunConfig) -> int:
    """Dispatch ``cfg`` and return the exit status."""
    try:
        w = Writer(cfg.out_dir)
        return COMMANDS[cfg.subcommand](cfg, w)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GeometryError, ValueError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


# --------------------------------------------------------------------------
# argv
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="maxdist", description="Maximal-distance minimizer toolkit.")
    sub = p.add_subparsers(dest="subcommand", required=True)

    def common(sp, m=True, sigma=False, r=False):
        sp.add_argument("--config", help="JSON file with RunConfig fields")
        sp.add_argument("--out", dest="out_dir", help="output directory")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--no-svg", dest="svg", action="store_false", default=None)
        if m:
            sp.add_argument("--m", help="PointCloud JSON file")
            sp.add_argument("--points", help="finite M as 'x,y;x,y;...'")
            sp.add_argument("--circle", help="circle M as 'R,N[,cx,cy]'")
            sp.add_argument("--segment", help="segment M as 'x0,y0,x1,y1,N'")
        if sigma:
            sp.add_argument("--sigma", help="SigmaGraph JSON file")
        if r:
            sp.add_argument("--r", type=float)

    sp = sub.add_parser("steiner", help="exact Steiner tree of at most 6 terminals")
    common(sp)
    sp.add_argument("--terminals", help="JSON list of [x, y] pairs")
    common(sub.add_parser("energy", help="largest distance from M to a candidate"), sigma=True, r=True)
    sub.choices["energy"].add_argument("--eta", type=float)
    common(sub.add_parser("criterion", help="finite-M minimizer certificate"), sigma=True, r=True)
    common(sub.add_parser("trim", help="trimmed Steiner tree"), r=True)
    sp = sub.add_parser("horseshoe", help="horseshoe construction for a circle")
    common(sp, m=False, r=True)
    sp.add_argument("--R", type=float)
    sp.add_argument("--samples", type=int)
    sp = sub.add_parser("optimize", help="penalised length descent")
    common(sp, sigma=True, r=True)
    sp.add_argument("--optimizer", help="OptimizerConfig JSON file")
    sp = sub.add_parser("validate", help="necessary-condition rule check")
    common(sp, sigma=True, r=True)
    sp.add_argument("--tol-angle", type=float)
    sp.add_argument("--rho-iso", type=float)
    sp.add_argument("--radii", help="comma-separated Ahlfors radii")
    sp.add_argument("--eta", type=float)
    sp.add_argument("--fixture", help="built-in fixture name")
    common(sub.add_parser("render", help="SVG of M, Sigma and witness balls"), sigma=True, r=True)
    sp = sub.add_parser("suite", help="all positive and negative fixtures")
    common(sp, m=False)
    sp.add_argument("--samples", type=int)
    return p


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    d = {}
    if getattr(ns, "config", None):
        loaded = _read_json(ns.config)
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        if loaded.get("subcommand", ns.subcommand) != ns.subcommand:
            raise UsageError("config subcommand does not match the command line")
        d.update(loaded)
    for k, v in vars(ns).items():
        if k == "config" or v is None:
            continue
        d[k] = v
    if isinstance(d.get("radii"), str):
        d["radii"] = _floats(d["radii"], what="--radii")
    if isinstance(d.get("optimizer"), str):
        d["optimizer"] = _read_json(d["optimizer"])
    return RunConfig.from_dict(d)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = config_from_args(ns)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
