"""Command line driver: ``glminmax run|verify|mesh|vortex-law``.

Exit codes: 0 success, 1 invalid input, 2 computation failed, 3 verification
failed.
"""

from __future__ import annotations

import argparse
import configparser
import io
import logging
import math
import os
import sys
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import concentration as cc
from . import glenergy as gl
from .errors import ConfigError, GLError
from .manifold import MODELS, MeshManifold, build_model
from .minmax import FlowConfig, MinMaxResult, check_eps_list, minmax
from .sweepfamily import DiskFamily, build_family, build_sweep_map, vortex_law
from .tables import read_table, write_table

log = logging.getLogger("glminmax")

EXIT_OK, EXIT_INVALID, EXIT_COMPUTE, EXIT_VERIFY = 0, 1, 2, 3
OUTPUT_ENV = "GLMINMAX_OUTPUT_DIR"
FAILED = "FAILED"
DEFAULT_RESOLUTION = {"unit_sphere": 3, "flat_torus_2d": 32, "flat_torus_3d": 16}


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.replace(",", " ").split()]


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


@dataclass
class RunConfig:
    model: str = "flat_torus_2d"
    resolution: int = 32
    eps: list = field(default_factory=lambda: [0.2])
    grid: tuple = (8, 24)
    seed: int = 0
    flow: FlowConfig = field(default_factory=FlowConfig)
    tol: float = 1e-8
    refine_max_iter: int = 60
    morse_k: int = 20
    hodge: bool = True
    density: bool = True
    ellipticity: bool = True
    bochner: bool = True
    stress: bool = True
    eta0: float = cc.ETA0
    delta0: float = cc.DELTA0
    output: str = "glminmax-out"
    workers: int = 1

    def validate(self) -> None:
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; expected one of {MODELS}")
        if self.resolution < 0:
            raise ConfigError("resolution must be non-negative")
        if not self.eps or any(not (e > 0 and math.isfinite(e)) for e in self.eps):
            raise ConfigError(f"eps values must be positive, got {self.eps}")
        if any(b >= a for a, b in zip(self.eps, self.eps[1:])):
            raise ConfigError("eps list must be strictly decreasing")
        n_r, n_t = self.grid
        if n_r < 1 or n_t < 3:
            raise ConfigError(f"family grid {self.grid} too small")
        if not self.tol > 0:
            raise ConfigError("refinement tolerance must be positive")
        if not (self.eta0 > 0 and self.delta0 > 0):
            raise ConfigError("eta0 and delta0 must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")

    # INI form
    def to_text(self) -> str:
        cp = configparser.ConfigParser()
        cp["geometry"] = {"model": self.model, "resolution": str(self.resolution)}
        cp["sweep"] = {
            "eps": ", ".join(repr(e) for e in self.eps),
            "grid": f"{self.grid[0]}, {self.grid[1]}",
            "seed": str(self.seed),
        }
        cp["flow"] = {k: repr(v) if isinstance(v, float) else str(v).lower()
                      for k, v in asdict(self.flow).items()}
        cp["refine"] = {"tol": repr(self.tol), "max_iter": str(self.refine_max_iter),
                        "morse_k": str(self.morse_k)}
        cp["diagnostics"] = {
            "hodge": str(self.hodge).lower(),
            "density": str(self.density).lower(),
            "ellipticity": str(self.ellipticity).lower(),
            "bochner": str(self.bochner).lower(),
            "stress": str(self.stress).lower(),
            "eta0": repr(self.eta0),
            "delta0": repr(self.delta0),
        }
        cp["output"] = {"directory": self.output, "workers": str(self.workers)}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> RunConfig:
        cp = configparser.ConfigParser()
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from None
        known = {"geometry", "sweep", "flow", "refine", "diagnostics", "output"}
        extra = set(cp.sections()) - known
        if extra:
            raise ConfigError(f"unknown config sections {sorted(extra)}")
        cfg = cls()
        try:
            g = cp["geometry"] if cp.has_section("geometry") else {}
            cfg.model = g.get("model", cfg.model)
            cfg.resolution = int(g.get("resolution", DEFAULT_RESOLUTION.get(cfg.model, 0)))
            s = cp["sweep"] if cp.has_section("sweep") else {}
            if "eps" in s:
                cfg.eps = _floats(s["eps"])
            if "grid" in s:
                n_r, n_t = (int(x) for x in _floats(s["grid"]))
                cfg.grid = (n_r, n_t)
            cfg.seed = int(s.get("seed", cfg.seed))
            if cp.has_section("flow"):
                f = cp["flow"]
                kw = {}
                for fl in fields(FlowConfig):
                    if fl.name in f:
                        raw = f[fl.name]
                        kw[fl.name] = (_bool(raw) if fl.type in ("bool", bool)
                                       else int(raw) if fl.type in ("int", int) else float(raw))
                unknown = set(f) - {fl.name for fl in fields(FlowConfig)}
                if unknown:
                    raise ConfigError(f"unknown flow keys {sorted(unknown)}")
                cfg.flow = FlowConfig(**kw)
            r = cp["refine"] if cp.has_section("refine") else {}
            cfg.tol = float(r.get("tol", cfg.tol))
            cfg.refine_max_iter = int(r.get("max_iter", cfg.refine_max_iter))
            cfg.morse_k = int(r.get("morse_k", cfg.morse_k))
            d = cp["diagnostics"] if cp.has_section("diagnostics") else {}
            for key in ("hodge", "density", "ellipticity", "bochner", "stress"):
                if key in d:
                    setattr(cfg, key, _bool(d[key]))
            cfg.eta0 = float(d.get("eta0", cfg.eta0))
            cfg.delta0 = float(d.get("delta0", cfg.delta0))
            o = cp["output"] if cp.has_section("output") else {}
            cfg.output = o.get("directory", cfg.output)
            cfg.workers = int(o.get("workers", cfg.workers))
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"bad config value: {exc}") from None
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> RunConfig:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        return cls.from_text(text)


# ---------------------------------------------------------------------------
# run


def _eps_tag(eps: float) -> str:
    return f"eps_{eps:.6g}"


class _Stage:
    """Tracks the pipeline stage for failure reports."""

    name = "setup"


def _write_failed(out: Path, stage: str, exc: BaseException) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / FAILED).write_text(f"stage: {stage}\nerror: {type(exc).__name__}: {exc}\n")


def _result_rows(r: MinMaxResult):
    return [
        ("eps", r.eps), ("c_estimate", r.c_estimate), ("max_node", r.max_node),
        ("energy_slice", r.energy_slice), ("energy_refined", r.energy_refined),
        ("residual", r.residual), ("min_modulus", r.min_modulus),
        ("morse_index", r.morse_index), ("refine_iterations", r.refine_iterations),
        ("flow_iterations", r.flow.iterations), ("flow_converged", r.flow.converged),
        ("flow_stagnated", r.flow.stagnated), ("nontrivial", r.nontrivial),
    ]


def _one_eps(cfg: RunConfig, mesh: MeshManifold, sweep, eps: float, out: Path, stage: _Stage):
    d = out / _eps_tag(eps)
    d.mkdir(parents=True, exist_ok=True)
    stage.name = "sweepfamily"
    family = build_family(mesh, sweep, eps, cfg.grid)
    stage.name = "minmax"
    res = minmax(family, cfg.flow, cfg.tol, cfg.refine_max_iter, cfg.morse_k)
    log.info("eps=%g: c=%.6g refined=%.6g residual=%.2e", eps, res.c_estimate,
             res.energy_refined, res.residual)
    res.refined.save(d / "refined.txt")
    write_table(d / "history.tsv", "flow-history", ["iteration", "max_energy"],
                list(enumerate(res.history)))
    items = _result_rows(res)
    write_table(d / "result.tsv", "minmax-result", [k for k, _ in items], [[v for _, v in items]])
    if len(res.eigenvalues):
        write_table(d / "eigenvalues.tsv", "second-variation", ["k", "eigenvalue"],
                    list(enumerate(res.eigenvalues)))
    # the flowed family: fields of the boundary ring and the max node
    flowed = res.family
    flowed.save(d / "family", nodes=list(np.flatnonzero(flowed.boundary)) + [res.max_node])
    report = None
    if any((cfg.hodge, cfg.density, cfg.ellipticity, cfg.bochner, cfg.stress)):
        stage.name = "concentration"
        report = cc.analyze(res.refined, hodge=cfg.hodge, density=cfg.density,
                            ellipticity=cfg.ellipticity, bochner=cfg.bochner,
                            stress=cfg.stress, eta0=cfg.eta0, delta0=cfg.delta0)
        report.save(d / "concentration")
    return res, report


def run(cfg: RunConfig, out: Path | None = None) -> int:
    out = Path(out or os.environ.get(OUTPUT_ENV) or cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    if (out / FAILED).exists():
        (out / FAILED).unlink()
    stage = _Stage()
    try:
        stage.name = "manifold"
        mesh = build_model(cfg.model, cfg.resolution)
        check_eps_list(mesh, cfg.eps)
        (out / "config.ini").write_text(cfg.to_text())
        mesh.save(out / "mesh.txt")
        stage.name = "sweepfamily"
        sweep = build_sweep_map(mesh, cfg.seed)

        if cfg.workers > 1 and len(cfg.eps) > 1:
            stages = [_Stage() for _ in cfg.eps]
            with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                futs = [pool.submit(_one_eps, cfg, mesh, sweep, e, out, s)
                        for e, s in zip(cfg.eps, stages)]
                results = []
                for fut, s in zip(futs, stages):
                    stage.name = s.name
                    results.append(fut.result())
        else:
            results = [_one_eps(cfg, mesh, sweep, e, out, stage) for e in cfg.eps]

        stage.name = "summary"
        _write_summary(out, cfg, results)
    except GLError as exc:
        where = stage.name if stage.name != "setup" else exc.stage
        log.error("%s failed: %s", where, exc)
        _write_failed(out, where, exc)
        return EXIT_INVALID if isinstance(exc, ConfigError) else EXIT_COMPUTE
    except Exception as exc:  # numerical library failures
        log.error("%s failed: %s", stage.name, exc)
        log.debug("%s", traceback.format_exc())
        _write_failed(out, stage.name, exc)
        return EXIT_COMPUTE
    return EXIT_OK


SUMMARY_COLUMNS = ["eps", "abs_log_eps", "c_estimate", "refined_energy", "normalized",
                   "residual", "min_modulus", "morse_index"]


def _write_summary(out: Path, cfg: RunConfig, results) -> None:
    res = [r for r, _ in results]
    rows = [[r.eps, r.log_eps, r.c_estimate, r.energy_refined, r.normalized, r.residual,
             r.min_modulus, r.morse_index] for r in res]
    comments = [f"model {cfg.model} resolution {cfg.resolution} seed {cfg.seed}"]
    if len(res) >= 2:
        C1, C2 = np.polyfit([r.log_eps for r in res], [r.c_estimate for r in res], 1)
        comments.append(f"fit c_eps = {C1:.12g} * |log eps| + {C2:.12g}")
    write_table(out / "summary.tsv", "minmax-summary", SUMMARY_COLUMNS, rows, comments)
    write_table(out / "timing.tsv", "wall-time", ["eps", "seconds"],
                [(r.eps, r.wall_time) for r in res])

    reports = [(r.eps, rep) for r, rep in results if rep is not None]
    if cfg.hodge and len(reports) >= 3:
        rows = []
        for eps, rep in sorted(reports, key=lambda x: -x[0]):
            L = abs(math.log(eps))
            d = rep.scalars["dtheta_energy"]
            rows.append([eps, L, d, d / math.sqrt(L), d / L]
                        + [rep.scalars[f"dstar_xi_L{p}"] for p in cc.LP_EXPONENTS])
        write_table(out / "hodge_sweep.tsv", "hodge-sweep",
                    ["eps", "abs_log_eps", "dtheta_energy", "per_sqrt_log", "per_log"]
                    + [f"dstar_xi_L{p}" for p in cc.LP_EXPONENTS], rows)
        # boundedness of ||d* xi||_p is only expected up to an unknown constant: warn, do not fail
        lp = np.array(rows)[:, 5:]
        growth = lp[1:] / np.maximum(lp[:-1], 1e-300)
        if np.any(growth > cc.XI_GROWTH_WARN):
            log.warning("||d* xi||_p grew by %.2fx between consecutive eps", growth.max())


# ---------------------------------------------------------------------------
# verify


@dataclass
class Check:
    name: str
    ok: bool
    detail: str = ""


def _result_dict(path: Path) -> dict:
    _, cols, rows, _ = read_table(path)
    if len(rows) != 1:
        raise ValueError(f"{path}: expected one row")
    return dict(zip(cols, rows[0]))


def verify(directory) -> list[Check]:
    """Re-check persisted invariants of a run directory from its files."""
    d = Path(directory)
    checks: list[Check] = []
    if (d / FAILED).exists():
        text = (d / FAILED).read_text()
        stage = text.splitlines()[0].split(":", 1)[-1].strip() if text else "unknown"
        return [Check("run-completed", False, f"FAILED marker at stage {stage}")]
    try:
        cfg = RunConfig.load(d / "config.ini")
        mesh = MeshManifold.load(d / "mesh.txt")
        _, cols, summary, _ = read_table(d / "summary.tsv")
    except (GLError, OSError, ValueError) as exc:
        return [Check("artifacts-readable", False, str(exc))]
    checks.append(Check("artifacts-readable", True))
    col = {c: i for i, c in enumerate(cols)}
    if len(summary) != len(cfg.eps):
        checks.append(Check("summary-complete", False,
                            f"{len(summary)} rows for {len(cfg.eps)} eps values"))

    for row in summary:
        eps = row[col["eps"]]
        tag = _eps_tag(eps)
        sub = d / tag
        try:
            result = _result_dict(sub / "result.tsv")
            _, _, hist, _ = read_table(sub / "history.tsv")
            u = gl.ComplexField.load(sub / "refined.txt", mesh)
        except (GLError, OSError, ValueError) as exc:
            checks.append(Check(f"{tag}:files", False, str(exc)))
            continue
        # summary entries trace back to the per-eps result
        for key, sk in (("c_estimate", "c_estimate"), ("energy_refined", "refined_energy"),
                        ("residual", "residual")):
            same = math.isclose(result[key], row[col[sk]], rel_tol=1e-9, abs_tol=1e-300)
            if not same:
                checks.append(Check(f"{tag}:summary-trace", False,
                                    f"{sk} differs from {tag}/result.tsv"))
        resid = gl.gl_residual(u)
        checks.append(Check(f"{tag}:residual", result["residual"] <= cfg.tol and resid <= cfg.tol
                            and row[col["residual"]] <= cfg.tol,
                            f"recorded {result['residual']:.3e}, field {resid:.3e}, tol {cfg.tol:.1e}"))
        e = gl.energy_value(u)
        checks.append(Check(f"{tag}:refined-energy",
                            math.isclose(e, result["energy_refined"], rel_tol=1e-9),
                            f"field energy {e:.12g}"))
        checks.append(Check(f"{tag}:modulus", float(u.modulus.max()) <= 1 + 1e-12))
        h = np.array([r[1] for r in hist])
        mono = bool(np.all(np.diff(h) <= 0)) if cfg.flow.line_search else True
        checks.append(Check(f"{tag}:flow-monotone", mono and
                            math.isclose(h[-1], result["c_estimate"], rel_tol=1e-9)))
        try:
            idx = DiskFamily.read_index(sub / "family")
            ok = idx["mesh"] == mesh.checksum
            energies = np.array(idx["energies"])
            params = np.array(idx["params"])
            for k in idx["boundary"]:
                name = idx["fields"].get(str(k))
                if name is None:
                    ok = False
                    break
                vals = gl.ComplexField.load(sub / "family" / name, mesh).values
                ok &= bool(np.all(vals == params[k])) and abs(energies[k]) <= 1e-12
            checks.append(Check(f"{tag}:boundary-pinned", bool(ok)))
        except (GLError, OSError, ValueError, KeyError) as exc:
            checks.append(Check(f"{tag}:boundary-pinned", False, str(exc)))
        if cfg.hodge:
            try:
                rep = cc.ConcentrationReport.load(sub / "concentration")
                dec = mesh.dec
                f = rep.forms
                rem = f["gamma"] - f["dtheta"] - f["dstar_xi"] - f["h"]
                scale = max(dec.norm1(f["gamma"]), 1e-300)
                exact = dec.norm1(rem) <= 1e-10 * scale and rep.scalars["hodge_residual"] <= 1e-8 * scale
                if mesh.betti1_hint == 0:
                    exact &= rep.scalars["hodge_h"] <= 1e-8 * scale
                checks.append(Check(f"{tag}:hodge-exact", bool(exact),
                                    f"residual {rep.scalars['hodge_residual']:.2e}"))
                checks.append(Check(f"{tag}:div-ju", rep.scalars["div_ju"] <= 10 * cfg.tol,
                                    f"{rep.scalars['div_ju']:.2e}"))
            except (OSError, ValueError, KeyError) as exc:
                checks.append(Check(f"{tag}:hodge-exact", False, str(exc)))
    return checks


# ---------------------------------------------------------------------------
# entry point


def _cmd_run(args) -> int:
    try:
        cfg = RunConfig.load(args.config)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if args.workers:
        cfg.workers = args.workers
    code = run(cfg, Path(args.out) if args.out else None)
    print("run " + ("completed" if code == EXIT_OK else "FAILED"))
    return code


def _cmd_verify(args) -> int:
    checks = verify(args.directory)
    for c in checks:
        print(f"{'PASS' if c.ok else 'FAIL'} {c.name}" + (f"  ({c.detail})" if c.detail else ""))
    return EXIT_OK if checks and all(c.ok for c in checks) else EXIT_VERIFY


def _cmd_mesh(args) -> int:
    res = args.resolution if args.resolution is not None else DEFAULT_RESOLUTION.get(args.model)
    try:
        mesh = build_model(args.model, res)
    except GLError as exc:
        print(f"mesh: {exc}", file=sys.stderr)
        return EXIT_INVALID
    mesh.save(args.out)
    print(f"{mesh.kind}: {mesh.n_vertices} vertices, {mesh.n_cells} cells, h={mesh.h:.6g}, "
          f"checksum {mesh.checksum}")
    return EXIT_OK


def _cmd_vortex_law(args) -> int:
    try:
        law = vortex_law(args.eps, args.radius, args.quadrature)
    except (GLError, ValueError) as exc:
        print(f"vortex-law: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print("eps\tlog(R/eps)\tenergy")
    for e, E in zip(law["eps"], law["energy"]):
        print(f"{e:.6g}\t{math.log(args.radius / e):.6f}\t{E:.10f}")
    rel = abs(law["slope"] - math.pi) / math.pi
    print(f"slope {law['slope']:.8f}  pi {math.pi:.8f}  relative deviation {rel:.2e}")
    return EXIT_OK if rel <= 0.02 else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="glminmax", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run the min-max pipeline from an INI config")
    r.add_argument("config")
    r.add_argument("--out", help=f"output directory (overrides config and ${OUTPUT_ENV})")
    r.add_argument("--workers", type=int, default=0)
    r.set_defaults(func=_cmd_run)

    v = sub.add_parser("verify", help="re-check the invariants of a run directory")
    v.add_argument("directory")
    v.set_defaults(func=_cmd_verify)

    m = sub.add_parser("mesh", help="build and save a model mesh")
    m.add_argument("model", choices=MODELS)
    m.add_argument("out")
    m.add_argument("--resolution", type=int)
    m.set_defaults(func=_cmd_mesh)

    w = sub.add_parser("vortex-law", help="planar vortex energy against log(1/eps)")
    w.add_argument("eps", type=float, nargs="+")
    w.add_argument("--radius", type=float, default=1.0)
    w.add_argument("--quadrature", type=int, default=64)
    w.set_defaults(func=_cmd_vortex_law)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
