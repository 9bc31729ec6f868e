"""Experiment driver.

Subcommands:

* ``solve <config.json>``        -- run one cell problem, write artifacts
* ``sweep-alpha <config.json>``  -- optimise de la Vallee Poussin slopes
* ``pattern-info --matrix M``    -- pattern/transform summary for a matrix
* ``errors --field A --reference B`` -- metrics between two PFLD fields

Configs are single JSON documents; all paths inside a config (inputs and
outputs) resolve relative to the config file.  Exit codes: 0 converged,
2 not converged (partial artifacts are still written), 1 configuration or
I/O error.  Reports are deterministic: repeated runs produce byte-identical
JSON except for the "timing" block.  SPECTRALHOM_THREADS > 1 lets
independent sweep evaluations run concurrently.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import geometry, solver
from .elasticity import iso_stiffness, mandel_dim, periodized_green
from .errors import ConfigError, SpectralHomError
from .lattice import PatternMatrix, frequency_set, pattern, smith_normal_form
from .translates import GeneratorSpec, make_rule, orthonormalize

__all__ = ["main", "run_solve", "sweep_alpha", "pattern_info"]

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


# -- config plumbing ----------------------------------------------------------


def _load_config(path: Path) -> dict:
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    return doc


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except SpectralHomError as exc:
        raise ConfigError(f"{name}: {exc}") from exc


class _Problem:
    """Resolved ingredients of one solve, reusable across sweep evaluations."""

    def __init__(self, config: dict, base_dir: Path):
        self.config = config
        self.base_dir = base_dir
        if "pattern_matrix" not in config:
            raise ConfigError("config needs a 'pattern_matrix'")
        self.matrix = _stage("pattern matrix", PatternMatrix.from_any, config["pattern_matrix"])
        self.generator = _stage(
            "generator", GeneratorSpec.from_json, config.get("generator", {"kind": "dirichlet"})
        )
        if "microstructure" not in config:
            raise ConfigError("config needs a 'microstructure'")
        self.micro = _stage("microstructure", geometry.microstructure_from_json, config["microstructure"])
        d = self.matrix.d
        D = mandel_dim(d)
        loading = config.get("loading")
        if loading is None:
            raise ConfigError("config needs a 'loading' Mandel vector")
        self.eps0 = np.asarray(loading, dtype=np.float64)
        if self.eps0.shape != (D,):
            raise ConfigError(f"loading must have {D} Mandel components, got {self.eps0.shape}")
        sampling = config.get("sampling", {"mode": "node"})
        self.stiffness = _stage(
            "stiffness sampling",
            geometry.sample_stiffness,
            self.micro,
            self.matrix,
            sampling.get("mode", "node"),
            int(sampling.get("subsamples", 3)),
        )
        self.reference_stiffness = _stage("reference stiffness", self._resolve_reference, d)
        sc = config.get("solver", {})
        self.solver_config = _stage(
            "solver config",
            solver.SolverConfig,
            tolerance=float(sc.get("tolerance", 1e-8)),
            max_iterations=int(sc.get("max_iterations", 10000)),
            scheme=sc.get("scheme", "ls_fixed_point"),
        )
        self.green_periods = config.get("green_periods")
        self.reference = None
        if config.get("reference_values"):
            self.reference = _stage(
                "reference ingestion",
                geometry.load_reference_values,
                base_dir / config["reference_values"],
                self.matrix,
            )
        self.log_form = config.get("log_error_form", "difference")

    def _resolve_reference(self, d: int) -> np.ndarray:
        doc = self.config.get("reference_stiffness", {"rule": "phase_mean"})
        if "lambda" in doc and "mu" in doc:
            return iso_stiffness(float(doc["lambda"]), float(doc["mu"]), d)
        rule = doc.get("rule", "phase_mean")
        if rule != "phase_mean":
            raise ConfigError(f"unknown reference stiffness rule {rule!r}")
        phases = self.micro.phases
        lam = float(np.mean([p.lam for p in phases]))
        mu = float(np.mean([p.mu for p in phases]))
        return iso_stiffness(lam, mu, d)

    def solve(self, generator: GeneratorSpec | None = None) -> solver.SolveReport:
        spec = generator or self.generator
        rule = _stage("generator orthonormalisation", lambda: orthonormalize(make_rule(spec, self.matrix)))
        green = _stage(
            "green table",
            periodized_green,
            self.reference_stiffness,
            rule,
            periods=self.green_periods,
        )
        run = solver.ls_fixed_point if self.solver_config.scheme == "ls_fixed_point" else solver.ve_krylov
        return _stage("solve", run, self.stiffness, self.reference_stiffness, self.eps0, green, self.solver_config)

    def metrics(self, report: solver.SolveReport):
        if self.reference is None:
            return None
        return solver.error_metrics(
            report.strain,
            ref_strain=self.reference.strain,
            effective_action=report.effective_action,
            ref_effective_action=self.reference.effective_action,
            log_form=self.log_form,
        )


# -- artifacts ----------------------------------------------------------------


def write_gray_image(path, values: np.ndarray) -> None:
    """Binary NetPBM graymap (P5), normalised to the field maximum."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ConfigError("image export needs a 2-D raster")
    peak = float(arr.max())
    scaled = np.zeros(arr.shape, dtype=np.uint8)
    if peak > 0.0:
        scaled = np.round(255.0 * np.clip(arr, 0.0, None) / peak).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5 {arr.shape[1]} {arr.shape[0]} 255\n".encode("ascii"))
        fh.write(scaled.tobytes())


def read_gray_image(path):
    """Read back a P5 graymap written by :func:`write_gray_image`."""
    raw = Path(path).read_bytes()
    header, _, rest = raw.partition(b"\n")
    magic, w, h, maxval = header.split()
    if magic != b"P5" or maxval != b"255":
        raise ConfigError(f"{path}: unsupported graymap header")
    w, h = int(w), int(h)
    img = np.frombuffer(rest, dtype=np.uint8, count=w * h).reshape(h, w)
    return img


def _report_dict(problem: _Problem, report: solver.SolveReport, metrics, generator: GeneratorSpec):
    snf = smith_normal_form(problem.matrix)
    doc = {
        "schema": "spectralhom.report.v1",
        "pattern": {
            "matrix": [list(r) for r in problem.matrix.rows],
            "m": problem.matrix.m,
            "smith_factors": list(snf.diag),
        },
        "generator": generator.to_json(),
        "scheme": report.scheme,
        "tolerance": problem.solver_config.tolerance,
        "converged": bool(report.converged),
        "iterations": report.iterations,
        "final_residual": report.residuals[-1] if report.residuals else None,
        "residuals": list(report.residuals),
        "nyquist_imbalance": report.imbalance,
        "effective_action": report.effective_action.tolist(),
        "loading": problem.eps0.tolist(),
        "metrics": None,
        "timing": {"wall_s": report.wall_time},
    }
    if metrics is not None:
        doc["metrics"] = {"e_l2": metrics.e_l2, "e_eff": metrics.e_eff, "log_form": metrics.log_form}
    return doc


def _write_artifacts(problem: _Problem, report: solver.SolveReport, metrics, doc: dict) -> None:
    out = problem.config.get("output", {})
    base = problem.base_dir
    artifacts = {}
    if out.get("strain_field"):
        path = base / out["strain_field"]
        path.parent.mkdir(parents=True, exist_ok=True)
        # PFLD stores the real nodal coefficients; any Nyquist imaginary part
        # is recorded in the report as nyquist_imbalance
        geometry.write_field(path, problem.matrix, report.strain.real, geometry.DOMAIN_SPACE)
        artifacts["strain_field"] = out["strain_field"]
    if out.get("residuals"):
        path = base / out["residuals"]
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = ["iteration,residual"]
        lines += [f"{i + 1},{r!r}" for i, r in enumerate(report.residuals)]
        path.write_text("\n".join(lines) + "\n")
        artifacts["residuals"] = out["residuals"]
    if out.get("elog_image"):
        if metrics is not None and metrics.e_log is not None and problem.matrix.d == 2:
            path = base / out["elog_image"]
            path.parent.mkdir(parents=True, exist_ok=True)
            diag = smith_normal_form(problem.matrix).diag
            write_gray_image(path, metrics.e_log.reshape(diag))
            artifacts["elog_image"] = out["elog_image"]
        else:
            artifacts["elog_image"] = None  # needs a planar pattern and a strain reference
    doc["artifacts"] = artifacts
    if out.get("report"):
        path = base / out["report"]
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def run_solve(config_path) -> tuple[int, dict]:
    """Execute a solve config; returns (exit code, report document)."""
    config_path = Path(config_path)
    config = _load_config(config_path)
    problem = _Problem(config, config_path.parent)
    report = problem.solve()
    metrics = problem.metrics(report)
    doc = _report_dict(problem, report, metrics, problem.generator)
    _write_artifacts(problem, report, metrics, doc)
    return (0 if report.converged else 2), doc


# -- slope sweep ----------------------------------------------------------------


def golden_section(fn, lo: float, hi: float, budget: int):
    """Golden-section minimisation with a fixed evaluation budget.

    Returns (x_best, f_best, trace, constant) where trace lists the (x, f)
    evaluations in order; ``constant`` flags an objective with no measurable
    variation, in which case x_best is the interval midpoint.
    """
    if budget < 2:
        raise ConfigError("sweep budget must allow at least two evaluations per axis")
    trace = []

    def probe(x):
        y = float(fn(x))
        trace.append((x, y))
        return y

    a, b = float(lo), float(hi)
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = probe(c), probe(d)
    while len(trace) < budget:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = probe(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = probe(d)
    ys = [y for _, y in trace]
    spread = max(ys) - min(ys)
    if spread <= 1e-12 * max(1.0, abs(ys[0])):
        return 0.5 * (lo + hi), ys[0], trace, True
    best = min(range(len(trace)), key=lambda i: trace[i][1])
    return trace[best][0], trace[best][1], trace, False


def sweep_alpha(config_path) -> tuple[int, dict]:
    """Coordinate-descent golden-section optimisation of the dlvp slopes."""
    config_path = Path(config_path)
    config = _load_config(config_path)
    problem = _Problem(config, config_path.parent)
    if problem.reference is None or problem.reference.effective_action is None:
        raise ConfigError("sweep-alpha needs reference values with an effective action")
    sweep = config.get("sweep", {})
    d = problem.matrix.d
    axes = sweep.get("axes", list(range(1, d + 1)))
    if any(a < 1 or a > d for a in axes):
        raise ConfigError(f"sweep axes must lie in 1..{d}, got {axes}")
    lo, hi = sweep.get("interval", (0.0, 1.0))
    if not (0.0 <= lo < hi <= 1.0):
        raise ConfigError(f"sweep interval must be inside [0, 1], got {(lo, hi)}")
    budget = int(sweep.get("budget", 16))
    threads = max(1, int(os.environ.get("SPECTRALHOM_THREADS", "1")))

    start = problem.generator
    alpha = list(start.alpha) if start.kind == "dlvp" and start.alpha else [0.0] * d
    ref_action = problem.reference.effective_action

    def objective(alpha_vec) -> float:
        report = problem.solve(GeneratorSpec(kind="dlvp", alpha=tuple(alpha_vec)))
        m = solver.error_metrics(
            report.strain,
            effective_action=report.effective_action,
            ref_effective_action=ref_action,
        )
        return m.e_eff

    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    trace_doc = []
    improved = False
    t0 = time.perf_counter()
    try:
        if pool is not None:
            dirichlet_future = pool.submit(_dirichlet_e_eff, problem, ref_action)
        for axis in axes:
            def fn(v, _axis=axis - 1):
                probe = list(alpha)
                probe[_axis] = v
                return objective(probe)

            best_x, best_f, trace, constant = golden_section(fn, lo, hi, budget)
            alpha[axis - 1] = float(best_x)
            improved = improved or not constant
            trace_doc.append(
                {
                    "axis": axis,
                    "constant": constant,
                    "evaluations": [{"alpha": float(x), "e_eff": float(y)} for x, y in trace],
                    "selected": float(best_x),
                }
            )
        best_e_eff = float(objective(alpha))
        dirichlet_e_eff = float(
            dirichlet_future.result() if pool is not None else _dirichlet_e_eff(problem, ref_action)
        )
    finally:
        if pool is not None:
            pool.shutdown()
    doc = {
        "schema": "spectralhom.sweep.v1",
        "axes": list(axes),
        "interval": [lo, hi],
        "budget_per_axis": budget,
        "best_alpha": alpha,
        "best_e_eff": best_e_eff,
        "dirichlet_e_eff": dirichlet_e_eff,
        "reduction_vs_dirichlet": 1.0 - best_e_eff / dirichlet_e_eff if dirichlet_e_eff else None,
        "improved": improved,
        "trace": trace_doc,
        "timing": {"wall_s": time.perf_counter() - t0},
    }
    out = config.get("output", {})
    if out.get("sweep_report"):
        path = config_path.parent / out["sweep_report"]
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return 0, doc


def _dirichlet_e_eff(problem: _Problem, ref_action) -> float:
    report = problem.solve(GeneratorSpec(kind="dirichlet"))
    m = solver.error_metrics(
        report.strain, effective_action=report.effective_action, ref_effective_action=ref_action
    )
    return m.e_eff


# -- summaries ------------------------------------------------------------------


def _factorise(n: int) -> list:
    out = []
    f = 2
    while f * f <= n:
        while n % f == 0:
            out.append(f)
            n //= f
        f += 1
    if n > 1:
        out.append(n)
    return out


def pattern_info(M: PatternMatrix) -> dict:
    snf = smith_normal_form(M)
    pat = pattern(M)
    freqs = frequency_set(M)
    return {
        "matrix": [list(r) for r in M.rows],
        "d": M.d,
        "m": M.m,
        "smith_factors": list(snf.diag),
        "pattern_extent": float(np.abs(pat.points).max()),
        "frequency_extent": int(np.abs(freqs.freqs).max()),
        "fft_shape": list(snf.diag),
        "fft_axis_factors": {str(di): _factorise(di) for di in snf.diag},
    }


def errors_command(field_path, reference_path) -> dict:
    M, values, domain = geometry.read_field(field_path)
    if domain != geometry.DOMAIN_SPACE:
        raise ConfigError("error metrics expect space-domain fields")
    _, ref_values, ref_domain = geometry.read_field(reference_path, expected=M)
    if ref_domain != geometry.DOMAIN_SPACE:
        raise ConfigError("error metrics expect space-domain fields")
    m = solver.error_metrics(values, ref_strain=ref_values)
    return {
        "pattern_matrix": [list(r) for r in M.rows],
        "e_l2": m.e_l2,
        "e_log_max": float(m.e_log.max()),
        "e_log_mean": float(m.e_log.mean()),
    }


# -- entry point -----------------------------------------------------------------


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="spectralhom", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p_solve = sub.add_parser("solve", help="run one cell problem from a JSON config")
    p_solve.add_argument("config", type=Path)
    p_sweep = sub.add_parser("sweep-alpha", help="optimise dlvp slopes against a reference")
    p_sweep.add_argument("config", type=Path)
    p_info = sub.add_parser("pattern-info", help="summarise a pattern matrix")
    p_info.add_argument("--matrix", required=True, help='row-major JSON, e.g. "[[2,1],[0,2]]"')
    p_err = sub.add_parser("errors", help="metrics between two PFLD strain fields")
    p_err.add_argument("--field", required=True, type=Path)
    p_err.add_argument("--reference", required=True, type=Path)
    args = parser.parse_args(argv)

    try:
        if args.command == "solve":
            code, doc = run_solve(args.config)
            print(json.dumps(doc, indent=2, sort_keys=True))
            return code
        if args.command == "sweep-alpha":
            code, doc = sweep_alpha(args.config)
            print(json.dumps(doc, indent=2, sort_keys=True))
            return code
        if args.command == "pattern-info":
            print(json.dumps(pattern_info(PatternMatrix.from_any(args.matrix)), indent=2, sort_keys=True))
            return 0
        doc = errors_command(args.field, args.reference)
        print(json.dumps(doc, indent=2, sort_keys=True))
        return 0
    except SpectralHomError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
