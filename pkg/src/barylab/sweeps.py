"""Batch sweep runners and artifact emission (CSV/JSON tables).

Every task maps a parameter grid to a list of flat records with a fixed,
documented column order; `run` executes the tasks of a SweepSpec, verifies
internal consistency (unique phase switch per s, flow convergence flags),
and writes the artifact atomically so a failed run never leaves a partial
file.  All floats are emitted with 17 significant digits, making CSV output
byte-identical across runs with the same spec and seed; rows are assembled
in grid order regardless of worker completion order.

Worker count comes from the BARYLAB_WORKERS environment variable (default
1, i.e. serial); grid points are independent, so the pool parallelizes
freely without affecting output order.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from scipy.optimize import brentq
from scipy.special import erf

from . import energy, gaussian, profiles, solver1d, stability
from ._version import __version__
from .candidates import HalfSpace, ProblemContext, SymmetricStrip, a_of_s
from .energy import threshold_eps0
from .errors import ConsistencyError, DomainError

__all__ = [
    "SweepSpec",
    "TASKS",
    "TASK_COLUMNS",
    "run",
    "run_task",
    "parse_values",
    "rows_to_csv",
    "atomic_write_text",
    "solve1d_report",
    "stability_report",
    "flow_report",
    "threshold_rows",
    "compare_ball_rows",
    "format_float",
]

TASKS = ("phase", "asymptotics", "stability", "flow", "compare-ball")

TASK_COLUMNS = {
    "phase": (
        "s",
        "eps0",
        "winner",
        "F_hat_H",
        "F_hat_D",
        "threshold_eps0",
        "c_s",
        "eps0_stab",
        "min_eig",
    ),
    "asymptotics": ("s", "strip_gap_scaled", "strip_perimeter_scaled", "threshold_eps0"),
    "stability": (
        "s",
        "eps0",
        "min_eig",
        "rotation_eig",
        "eps0_stab",
        "converged",
    ),
    "flow": (
        "s",
        "eps0",
        "topology",
        "seed",
        "converged",
        "steps",
        "flatness",
        "F_hat",
        "reference_F_hat",
        "abs_err",
    ),
    "compare-ball": (
        "volume",
        "dimension",
        "ball_radius",
        "ball_p_hat",
        "strip_p_hat",
        "ball_smaller",
        "crossover_s",
    ),
    "threshold": ("s", "threshold_eps0", "in_window", "gap_to_limit"),
}


def parse_values(text: str) -> tuple[float, ...]:
    """Parse `lo:hi:step` (inclusive ends) or a comma list into floats."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise DomainError(f"range syntax is lo:hi:step, got {text!r}")
        lo, hi, step = (float(p) for p in parts)
        if step <= 0.0 or hi < lo:
            raise DomainError(f"need step > 0 and hi >= lo, got {text!r}")
        count = int(math.floor((hi - lo) / step + 1e-9)) + 1
        return tuple(lo + k * step for k in range(count))
    values = tuple(float(p) for p in text.split(",") if p.strip())
    if not values:
        raise DomainError(f"empty value list: {text!r}")
    return values


@dataclass(frozen=True)
class SweepSpec:
    """One batch request: parameter grids, tasks, output target, seed."""

    s_values: tuple[float, ...]
    eps0_values: tuple[float, ...] = (1.3,)
    tasks: tuple[str, ...] = ("phase",)
    output: str | None = None
    fmt: str = "csv"
    seed: int = 0
    volume: float = 0.5  # compare-ball only

    def __post_init__(self):
        object.__setattr__(self, "s_values", tuple(float(s) for s in self.s_values))
        object.__setattr__(self, "eps0_values", tuple(float(e) for e in self.eps0_values))
        object.__setattr__(self, "tasks", tuple(self.tasks))
        if not self.s_values:
            raise DomainError("s_values must be nonempty")
        if any(not (math.isfinite(s) and s > 0.0) for s in self.s_values):
            raise DomainError("s_values must be positive and finite")
        if not self.eps0_values:
            raise DomainError("eps0_values must be nonempty")
        if not self.tasks:
            raise DomainError("tasks must be nonempty")
        for task in self.tasks:
            if task not in TASKS:
                raise DomainError(f"unknown task {task!r}; choose from {TASKS}")
        if self.fmt not in ("csv", "json"):
            raise DomainError(f"format must be csv or json, got {self.fmt!r}")
        if not (0.0 < self.volume < 1.0):
            raise DomainError(f"volume must be in (0, 1), got {self.volume}")

    def metadata(self) -> dict:
        return {
            "s_values": list(self.s_values),
            "eps0_values": list(self.eps0_values),
            "tasks": list(self.tasks),
            "output": self.output,
            "format": self.fmt,
            "seed": self.seed,
            "volume": self.volume,
        }


# ---------------------------------------------------------------------------
# row producers (module level so they pickle into worker processes)


def _phase_row(args: tuple[float, float]) -> dict:
    s, eps0 = args
    ctx = ProblemContext(s, eps0)
    res = solver1d.minimize1d(ctx)
    strip = SymmetricStrip(a_of_s(s))
    spec = stability.min_eigenvalue(strip, ctx, locate_critical=False)
    return {
        "s": s,
        "eps0": eps0,
        "winner": res.winner,
        "F_hat_H": res.energies["half_line"],
        "F_hat_D": res.energies["symmetric_interval"],
        "threshold_eps0": res.threshold,
        "c_s": energy.quantitative_constant(s),
        "eps0_stab": stability.strip_stability_threshold(s),
        "min_eig": spec.min_eigenvalue,
    }


def _asymptotics_row(s: float) -> dict:
    a = a_of_s(s)
    return {
        "s": s,
        "strip_gap_scaled": s * (a - s),
        "strip_perimeter_scaled": s * s * energy.strip_p_hat_minus_1(s),
        "threshold_eps0": threshold_eps0(s),
    }


def _threshold_row(s: float) -> dict:
    thr = threshold_eps0(s)
    return {
        "s": s,
        "threshold_eps0": thr,
        "in_window": 1.2 < thr < 1.4,
        "gap_to_limit": abs(thr - 2.0 * math.log(2.0)),
    }


def _stability_row(args: tuple[float, float]) -> dict:
    s, eps0 = args
    ctx = ProblemContext(s, eps0)
    spec = stability.min_eigenvalue(SymmetricStrip(a_of_s(s)), ctx, locate_critical=False)
    return {
        "s": s,
        "eps0": eps0,
        "min_eig": spec.min_eigenvalue,
        "rotation_eig": spec.rotation_eigenvalue,
        "eps0_stab": stability.strip_stability_threshold(s),
        "converged": spec.converged,
    }


def _flow_row(args: tuple[float, float, str, int]) -> dict:
    s, eps0, topology, seed = args
    ctx = ProblemContext(s, eps0)
    p0 = profiles.perturbed_profile(ctx, topology, seed)
    result = profiles.descend(p0, ctx)
    reference = (
        energy.half_space_f_hat(ctx) if topology == "single" else energy.strip_p_hat(s)
    )
    return {
        "s": s,
        "eps0": eps0,
        "topology": topology,
        "seed": seed,
        "converged": result.converged and not result.line_search_failed,
        "steps": result.steps,
        "flatness": result.flatness,
        "F_hat": result.energy.total,
        "reference_F_hat": reference,
        "abs_err": abs(result.energy.total - reference),
    }


def _ball_radius(volume: float, dimension: int) -> float:
    if dimension == 2:
        return math.sqrt(-2.0 * math.log1p(-volume))
    def measure(r: float) -> float:
        return float(erf(r / math.sqrt(2.0))) - math.sqrt(2.0 / math.pi) * r * math.exp(
            -0.5 * r * r
        )
    return float(brentq(lambda r: measure(r) - volume, 1e-9, 40.0, xtol=1e-14))


def compare_ball_rows(volume: float = 0.5) -> list[dict]:
    """Ball-versus-strip reduced perimeters at equal volume (s = 0 units)."""
    if not (0.0 < volume < 1.0):
        raise DomainError(f"volume must be in (0, 1), got {volume}")
    half_width = gaussian.phi_inv(0.5 * (1.0 + volume))
    strip_p = 2.0 * math.exp(-0.5 * half_width * half_width)
    crossover = energy.ball_strip_crossover()
    rows = []
    for dimension in (2, 3):
        r = _ball_radius(volume, dimension)
        ball_p = (
            gaussian.SQRT_2PI * r * math.exp(-0.5 * r * r)
            if dimension == 2
            else 2.0 * r * r * math.exp(-0.5 * r * r)
        )
        rows.append(
            {
                "volume": volume,
                "dimension": dimension,
                "ball_radius": r,
                "ball_p_hat": ball_p,
                "strip_p_hat": strip_p,
                "ball_smaller": ball_p < strip_p,
                # the crossover is a planar statement; null for R^3
                "crossover_s": crossover if dimension == 2 else None,
            }
        )
    return rows


def threshold_rows(s_values) -> list[dict]:
    return [_threshold_row(float(s)) for s in s_values]


# ---------------------------------------------------------------------------
# execution


def _pool_map(fn, items: list) -> list:
    workers = int(os.environ.get("BARYLAB_WORKERS", "1"))
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        chunk = max(1, len(items) // (4 * workers))
        return list(pool.map(fn, items, chunksize=chunk))


def _check_phase_consistency(spec: SweepSpec, rows: list[dict]) -> None:
    """Unique half-line -> symmetric-interval switch along increasing eps0."""
    eps = spec.eps0_values
    increasing = all(b > a for a, b in zip(eps, eps[1:]))
    per_s = {s: [] for s in spec.s_values}
    for row in rows:
        per_s[row["s"]].append(row["winner"])
    for s, winners in per_s.items():
        if any(w == "interval" for w in winners):
            raise ConsistencyError(
                f"phase sweep at s={s}: interior interval won; "
                "phase tables assume the half-line/strip dichotomy (s >= 10)"
            )
        if not increasing or len(winners) < 2:
            continue
        seq = [w for w in winners if w != "tie"]
        switches = sum(1 for a, b in zip(seq, seq[1:]) if a != b)
        ordered = switches <= 1 and (
            switches == 0 or (seq[0] == "half_line" and seq[-1] == "symmetric_interval")
        )
        if not ordered:
            raise ConsistencyError(
                f"phase sweep at s={s}: winner sequence crosses the threshold "
                f"more than once or in the wrong direction"
            )


def _check_flow_consistency(rows: list[dict]) -> None:
    for row in rows:
        if not row["converged"]:
            raise ConsistencyError(
                f"flow run (s={row['s']}, eps0={row['eps0']}, "
                f"topology={row['topology']}, seed={row['seed']}) did not converge"
            )


def _check_compare_ball(rows: list[dict]) -> None:
    for row in rows:
        if abs(row["volume"] - 0.5) < 1e-12 and not row["ball_smaller"]:
            raise ConsistencyError(
                f"ball should beat the strip at volume 1/2 in R^{row['dimension']}"
            )


def run_task(task: str, spec: SweepSpec) -> list[dict]:
    """Compute one task's rows (deterministic order) and verify consistency."""
    if task == "phase":
        items = [(s, e) for s in spec.s_values for e in spec.eps0_values]
        rows = _pool_map(_phase_row, items)
        _check_phase_consistency(spec, rows)
    elif task == "asymptotics":
        rows = _pool_map(_asymptotics_row, list(spec.s_values))
    elif task == "stability":
        items = [(s, e) for s in spec.s_values for e in spec.eps0_values]
        rows = _pool_map(_stability_row, items)
    elif task == "flow":
        items = []
        index = 0
        for s in spec.s_values:
            for e in spec.eps0_values:
                for topology in ("single", "double"):
                    items.append((s, e, topology, spec.seed * 100003 + index))
                    index += 1
        rows = _pool_map(_flow_row, items)
        _check_flow_consistency(rows)
    elif task == "compare-ball":
        rows = compare_ball_rows(spec.volume)
        _check_compare_ball(rows)
    else:
        raise DomainError(f"unknown task {task!r}")
    return rows


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def _format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int,)):
        return str(v)
    if isinstance(v, float):
        return format_float(v)
    return str(v)


def rows_to_csv(columns: tuple[str, ...], rows: list[dict]) -> str:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_format_value(row[c]) for c in columns))
    return "\n".join(lines) + "\n"


def atomic_write_text(path: str, text: str) -> None:
    """Write via a temp file + rename; a failed run never leaves a partial file."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".sweep-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_artifacts(payload: dict, output: str, fmt: str) -> list[str]:
    """Write a result tree to disk; returns the paths written.

    JSON keeps all tasks in one file.  CSV uses the output path as given for
    a single task and `<stem>.<task><ext>` per task otherwise.
    """
    if fmt == "json":
        atomic_write_text(output, json.dumps(payload, indent=2, sort_keys=True) + "\n")
        return [output]
    tasks = payload["tasks"]
    paths = []
    for task, table in tasks.items():
        path = output
        if len(tasks) > 1:
            stem, ext = os.path.splitext(output)
            path = f"{stem}.{task}{ext or '.csv'}"
        atomic_write_text(path, rows_to_csv(tuple(table["columns"]), table["rows"]))
        paths.append(path)
    return paths


def run(spec: SweepSpec) -> dict:
    """Execute all requested tasks; write artifacts; return the result tree.

    Returns {"version": ..., "spec": {...}, "tasks": {name: {"columns": [...],
    "rows": [...]}}}.  All rows are computed (and consistency-checked) before
    anything is written.
    """
    results = {}
    for task in spec.tasks:
        rows = run_task(task, spec)
        results[task] = {"columns": list(TASK_COLUMNS[task]), "rows": rows}
    payload = {"version": __version__, "spec": spec.metadata(), "tasks": results}
    if spec.output:
        write_artifacts(payload, spec.output, spec.fmt)
    return payload


# ---------------------------------------------------------------------------
# one-shot reports (JSON-oriented; used by the service endpoints)


def solve1d_report(
    s: float,
    eps0: float,
    n_grid: int = 10_000,
    brute_force_k: int | None = None,
    brute_grid: int = 9,
) -> dict:
    ctx = ProblemContext(s, eps0)
    res = solver1d.minimize1d(ctx, n_grid=n_grid)
    census = solver1d.g_census(ctx, n_grid=n_grid)
    report = {
        "s": s,
        "eps0": eps0,
        "winner": res.winner,
        "t_star": res.t_star,
        "energies": {k: float(v) for k, v in res.energies.items()},
        "family_min_t": res.family_min_t,
        "family_min_f": res.family_min_f,
        "family_min_at_boundary": res.family_min_at_boundary,
        "threshold_eps0": res.threshold,
        "warning": res.warning,
        "census": {
            "window": list(census.window),
            "g_at_a": census.g_at_a,
            "decreasing": census.decreasing,
            "sign_changes": census.sign_changes,
            "interior_minima": list(census.interior_minima),
            "warning": census.warning,
        },
    }
    if brute_force_k is not None:
        brute = solver1d.brute_force_unions(ctx, brute_force_k, grid_resolution=brute_grid)
        report["brute_force"] = {
            # infinite endpoints serialize as null (JSON has no Infinity)
            "intervals": [
                [None if math.isinf(v) else float(v) for v in iv] for iv in brute.intervals
            ],
            "energy": brute.energy,
            "p_hat": brute.p_hat,
            "b_hat": brute.b_hat,
            "n_intervals": brute.n_intervals,
            "is_single_interval": brute.is_single_interval,
            "is_half_line": brute.is_half_line,
        }
    return report


def stability_report(
    s: float,
    eps0: float,
    candidate: str = "strip",
    basis_size: int = 16,
    locate_critical: bool = True,
) -> dict:
    ctx = ProblemContext(s, eps0)
    if candidate == "strip":
        cand = SymmetricStrip(a_of_s(s))
    elif candidate == "half_space":
        cand = HalfSpace(s)
    else:
        raise DomainError(f"candidate must be 'strip' or 'half_space', got {candidate!r}")
    spec = stability.min_eigenvalue(cand, ctx, basis_size=basis_size, locate_critical=locate_critical)
    return {
        "s": s,
        "eps0": eps0,
        "candidate": candidate,
        "basis_size": spec.basis_size,
        "eigenvalues": [float(v) for v in spec.eigenvalues],
        "min_eigenvalue": spec.min_eigenvalue,
        "rotation_eigenvalue": spec.rotation_eigenvalue,
        "critical_eps0": spec.critical_eps0,
        "converged": spec.converged,
        "doubling_change": spec.doubling_change,
        "eps0_stab": stability.strip_stability_threshold(s),
    }


def flow_report(
    s: float,
    eps0: float,
    topology: str = "single",
    seed: int = 0,
    amplitude: float = 0.1,
    n_nodes: int = 257,
    half_width: float = 8.0,
    max_steps: int = 5000,
    grad_tol: float = 1e-8,
    include_profile: bool = False,
) -> dict:
    ctx = ProblemContext(s, eps0)
    p0 = profiles.perturbed_profile(
        ctx, topology, seed, amplitude=amplitude, half_width=half_width, n_nodes=n_nodes
    )
    result = profiles.descend(p0, ctx, max_steps=max_steps, grad_tol=grad_tol)
    euler = profiles.euler_residual(result.profile, ctx)
    reference = (
        energy.half_space_f_hat(ctx) if topology == "single" else energy.strip_p_hat(s)
    )
    report = {
        "s": s,
        "eps0": eps0,
        "topology": topology,
        "seed": seed,
        "converged": result.converged,
        "line_search_failed": result.line_search_failed,
        "steps": result.steps,
        "grad_norm": result.grad_norm,
        "flatness": result.flatness,
        "F_hat": result.energy.total,
        "p_hat": result.energy.p_hat,
        "barycenter_term": result.energy.barycenter_term,
        "volume_deficit": result.energy.volume_deficit,
        "reference_F_hat": reference,
        "abs_err": abs(result.energy.total - reference),
        "euler_lambda": euler.lam,
        "euler_residual_norm": euler.weighted_norm,
        "energy_initial": result.history[0],
        "energy_final": result.history[-1],
        "history_length": len(result.history),
    }
    if include_profile:
        report["profile"] = {
            "topology": result.profile.topology,
            "grid": [float(t) for t in result.profile.grid],
            "values": [[float(v) for v in row] for row in result.profile.values],
        }
    return report
