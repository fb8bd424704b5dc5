"""Named benchmark experiments: registry, problem builders, and the runner.

Each experiment runs a set of solvers on a seeded instance, writes one
trace CSV per (solver, instance) in the standard schema, and renders the
figure families as standalone SVGs.  Seeds fully determine runs, and the
emitted CSVs omit wall-clock values so that re-running an experiment with
the same seed reproduces them byte for byte; time-axis figures are drawn
from the in-memory traces of the same run.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..core import Atom, ConfigurationError, RunTrace
from ..herding import (
    CandidatePool,
    get_embedding_cache,
    mmd_squared,
    run_bpcg_herding,
    run_lazy_bpcg_herding,
    run_monte_carlo,
    run_sbq,
    run_vanilla_herding,
)
from ..kernels import GaussianMixture, TruncatedGaussian, UniformBox, kernel_by_name
from ..lmo import BirkhoffLMO, LpBallLMO, SimplexLMO, SpectrahedronLMO
from ..objectives import MatrixCompletionLoss, QuadraticDistance, load_ratings_csv
from ..oracles import simplex_projection_oracle
from ..solvers import (
    SolverConfig,
    run_afw,
    run_bpcg,
    run_lazy_bpcg,
    run_pcg,
    run_vanilla_fw,
)
from .svgplot import LinePlot

FINITE_SOLVERS = ("fw", "afw", "pcg", "bpcg", "lazy-bpcg")
HERDING_SOLVERS = ("equal-weight", "linesearch", "bpcg", "lazy-bpcg", "sbq", "mc")

MC_NODE_GRID = (10, 14, 20, 28, 40, 56, 80, 100)
MC_SEED_REPEATS = 5


@dataclass
class ExperimentSpec:
    """A fully resolved experiment: instance parameters plus run knobs."""

    name: str
    problem: dict
    solvers: tuple
    config: SolverConfig
    seed: int
    output_dir: str
    figures: tuple = ()
    extras: dict = field(default_factory=dict)


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    traces: dict = field(default_factory=dict)
    measures: dict = field(default_factory=dict)
    mmd_curves: dict = field(default_factory=dict)
    csv_paths: list = field(default_factory=list)
    svg_paths: list = field(default_factory=list)
    f_star: Optional[float] = None


@dataclass
class ExperimentDef:
    name: str
    summary: str
    problem: dict
    figures: tuple
    solvers: tuple = FINITE_SOLVERS
    iters: int = 1000
    tol: float = 1e-7
    seed: int = 7


REGISTRY: dict = {}


def _register(defn: ExperimentDef) -> None:
    REGISTRY[defn.name] = defn


_register(ExperimentDef(
    name="simplex-200",
    summary="distance to an interior point over the probability simplex (n=200)",
    problem={"kind": "simplex", "n": 200},
    figures=("convergence",),
))
_register(ExperimentDef(
    name="simplex-500-sparsity",
    summary="support size against primal gap on the simplex (n=500)",
    problem={"kind": "simplex", "n": 500},
    figures=("sparsity",),
    iters=800,
))
_register(ExperimentDef(
    name="birkhoff-200",
    summary="distance to an interior point over the Birkhoff polytope (n=200)",
    problem={"kind": "birkhoff", "n": 200},
    figures=("convergence",),
    iters=300,
))
_register(ExperimentDef(
    name="birkhoff-200-sparsity",
    summary="support size against primal gap on the Birkhoff polytope (n=200)",
    problem={"kind": "birkhoff", "n": 200},
    figures=("sparsity",),
    iters=300,
))
_register(ExperimentDef(
    name="birkhoff-50-sparsity",
    summary="desk-scale sparsity comparison on the Birkhoff polytope (n=50)",
    problem={"kind": "birkhoff", "n": 50},
    figures=("sparsity",),
    iters=600,
    tol=1e-9,
))
_register(ExperimentDef(
    name="lp-ball-1000",
    summary="distance to an interior point over the l5-norm ball (n=1000)",
    problem={"kind": "lp-ball", "n": 1000, "p": 5.0},
    figures=("convergence", "sparsity"),
    iters=500,
))
_register(ExperimentDef(
    name="matrix-completion-synthetic",
    summary="synthetic low-rank completion over the trace-one PSD cone",
    problem={"kind": "completion-synthetic", "n": 40, "rank": 3, "noise": 0.02},
    figures=("convergence", "sparsity"),
    iters=250,
))
_register(ExperimentDef(
    name="matrix-completion-movielens",
    summary="ratings-matrix completion (requires --data ratings.csv)",
    problem={"kind": "completion-ratings"},
    figures=("convergence", "sparsity"),
    iters=100,
))
_register(ExperimentDef(
    name="matern32-d2",
    summary="kernel quadrature, Matern 3/2 kernel, uniform measure on the square",
    problem={"kind": "herding", "kernel": "matern32", "measure": "uniform", "d": 2},
    figures=("mmd",),
    solvers=HERDING_SOLVERS,
    iters=400,
    tol=0.0,
))
_register(ExperimentDef(
    name="matern52-d2",
    summary="kernel quadrature, Matern 5/2 kernel, uniform measure on the square",
    problem={"kind": "herding", "kernel": "matern52", "measure": "uniform", "d": 2},
    figures=("mmd",),
    solvers=HERDING_SOLVERS,
    iters=400,
    tol=0.0,
))
_register(ExperimentDef(
    name="gaussian-d2",
    summary="kernel quadrature, Gaussian kernel, truncated Gaussian measure",
    problem={
        "kind": "herding",
        "kernel": "gaussian",
        "measure": "truncated-gaussian",
        "d": 2,
    },
    figures=("mmd",),
    solvers=HERDING_SOLVERS,
    iters=400,
    tol=0.0,
))
_register(ExperimentDef(
    name="mixture-gaussian-d2",
    summary="kernel quadrature, Gaussian kernel, mixture measure on the square",
    problem={
        "kind": "herding",
        "kernel": "gaussian",
        "measure": "gaussian-mixture",
        "d": 2,
    },
    figures=("mmd",),
    solvers=HERDING_SOLVERS,
    iters=400,
    tol=0.0,
))


def list_experiments() -> list:
    """(name, summary) pairs for every registered experiment."""
    return [(d.name, d.summary) for d in REGISTRY.values()]


def make_spec(name: str, seed: Optional[int] = None, iters: Optional[int] = None,
              tol: Optional[float] = None, k_sc: Optional[float] = None,
              lazy_accuracy: Optional[float] = None, step: Optional[str] = None,
              output_dir: str = "bench-out", data: Optional[str] = None,
              solvers: Optional[tuple] = None) -> ExperimentSpec:
    """Resolve a registered experiment into a runnable spec."""
    if name not in REGISTRY:
        raise ConfigurationError(f"unknown experiment {name!r}")
    defn = REGISTRY[name]
    config = SolverConfig(
        max_iterations=iters if iters is not None else defn.iters,
        dual_gap_tolerance=tol if tol is not None else defn.tol,
        step_size=step if step is not None else "linesearch",
        k_sc=k_sc if k_sc is not None else 1.0,
        lazy_accuracy=lazy_accuracy if lazy_accuracy is not None else 1.0,
        seed=seed if seed is not None else defn.seed,
    )
    extras = {}
    if data is not None:
        extras["data"] = data
    return ExperimentSpec(
        name=name,
        problem=dict(defn.problem),
        solvers=tuple(solvers) if solvers is not None else defn.solvers,
        config=config,
        seed=config.seed,
        output_dir=output_dir,
        figures=defn.figures,
        extras=extras,
    )


def synthetic_lowrank(n: int, rank: int, noise: float, seed: int,
                      observed_fraction: float = 0.3):
    """Observed entries of a random trace-one PSD matrix of the given rank.

    Samples a symmetric set of entry positions (fraction of the upper
    triangle incl. diagonal), adds Gaussian noise to the targets, and
    mirrors them so gradients stay symmetric.  Returns the loss and the
    ground-truth matrix.
    """
    if not 0.0 < observed_fraction <= 1.0:
        raise ConfigurationError("observed_fraction must be in (0, 1]")
    rng = np.random.default_rng(seed)
    factors = rng.normal(size=(n, rank))
    truth = factors @ factors.T
    truth /= np.trace(truth)
    iu, ju = np.triu_indices(n)
    m = iu.shape[0]
    count = max(1, int(round(observed_fraction * m)))
    chosen = rng.choice(m, size=count, replace=False)
    entries = []
    for idx in chosen:
        i, j = int(iu[idx]), int(ju[idx])
        target = truth[i, j] + (noise * rng.normal() if noise else 0.0)
        entries.append((i, j, target))
        if i != j:
            entries.append((j, i, target))
    return MatrixCompletionLoss((n, n), entries), truth


def ingest_movielens(path, max_users: int = 300, max_items: int = 300):
    """Parse a ratings CSV and return the symmetric-block completion loss."""
    data = load_ratings_csv(path, max_users=max_users, max_items=max_items)
    return data.completion_loss(), data


def _interior_simplex_center(n: int, rng) -> np.ndarray:
    c = rng.random(n) + 0.1
    return c / c.sum()


def _interior_birkhoff_center(n: int, rng) -> np.ndarray:
    k = max(2, n // 2)
    weights = rng.random(k) + 0.1
    weights /= weights.sum()
    center = np.zeros((n, n))
    rows = np.arange(n)
    for w in weights:
        center[rows, rng.permutation(n)] += w
    return center


def build_finite_problem(problem: dict, seed: int, extras: dict):
    """Instance builder: returns (objective, lmo, start atom, f_star)."""
    rng = np.random.default_rng(seed)
    kind = problem["kind"]
    if kind == "simplex":
        n = int(problem["n"])
        center = _interior_simplex_center(n, rng)
        obj = QuadraticDistance(center)
        start = np.zeros(n)
        start[0] = 1.0
        proj = simplex_projection_oracle(center)
        return obj, SimplexLMO(n), Atom(start), float(np.sum((proj - center) ** 2))
    if kind == "birkhoff":
        n = int(problem["n"])
        center = _interior_birkhoff_center(n, rng)
        obj = QuadraticDistance(center)
        x0 = Atom(np.arange(n, dtype=np.int64), kind="permutation")
        return obj, BirkhoffLMO(n), x0, 0.0
    if kind == "lp-ball":
        n = int(problem["n"])
        p = float(problem["p"])
        # The center sits well inside the ball; in this regime the away
        # step is never competitive and the away-step baseline reduces to
        # vanilla FW, matching the reported behavior of this instance.
        center = rng.uniform(-1.0, 1.0, size=n)
        center *= 0.5 / float(np.sum(np.abs(center) ** p) ** (1.0 / p))
        obj = QuadraticDistance(center)
        lmo = LpBallLMO(n, p)
        x0 = lmo.minimize(np.ones(n))
        return obj, lmo, x0, 0.0
    if kind == "completion-synthetic":
        n = int(problem["n"])
        loss, _ = synthetic_lowrank(
            n, int(problem["rank"]), float(problem["noise"]), seed
        )
        u0 = np.zeros(n)
        u0[0] = 1.0
        return loss, SpectrahedronLMO(n), Atom(u0, kind="psd_factor"), None
    if kind == "completion-ratings":
        path = extras.get("data")
        if not path:
            raise ConfigurationError(
                "matrix-completion-movielens needs --data pointing to a ratings CSV"
            )
        loss, _ = ingest_movielens(path)
        n = loss.shape[0]
        u0 = np.zeros(n)
        u0[0] = 1.0
        return loss, SpectrahedronLMO(n), Atom(u0, kind="psd_factor"), None
    raise ConfigurationError(f"unknown problem kind {kind!r}")


_FINITE_RUNNERS: dict = {
    "fw": lambda obj, lmo, x0, cfg: run_vanilla_fw(obj, lmo, x0, cfg),
    "afw": run_afw,
    "pcg": run_pcg,
    "bpcg": run_bpcg,
    "lazy-bpcg": run_lazy_bpcg,
}


def build_herding_problem(problem: dict, seed: int):
    kernel = kernel_by_name(problem["kernel"])
    d = int(problem.get("d", 2))
    measure_name = problem["measure"]
    if measure_name == "uniform":
        measure = UniformBox(d)
    elif measure_name == "truncated-gaussian":
        measure = TruncatedGaussian(d)
    elif measure_name == "gaussian-mixture":
        measure = GaussianMixture(d)
    else:
        raise ConfigurationError(f"unknown measure {measure_name!r}")
    rng = np.random.default_rng(seed)
    x0 = rng.uniform(-1.0, 1.0, size=d)
    return kernel, measure, x0


def _makedirs(path):
    try:
        os.makedirs(path, exist_ok=True)
        probe = os.path.join(path, ".write-probe")
        with open(probe, "w") as fh:
            fh.write("")
        os.remove(probe)
    except OSError as exc:
        raise ConfigurationError(f"output directory not writable: {exc}") from exc


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    """Run every solver of the spec and write CSV traces and SVG figures."""
    _makedirs(spec.output_dir)
    if spec.problem["kind"] == "herding":
        return _run_herding_experiment(spec)
    return _run_finite_experiment(spec)


def _csv_path(spec, solver, suffix="") -> str:
    return os.path.join(spec.output_dir, f"{spec.name}__{solver}{suffix}.csv")


def _run_finite_experiment(spec: ExperimentSpec) -> ExperimentResult:
    obj, lmo, x0, f_star = build_finite_problem(
        spec.problem, spec.seed, spec.extras
    )
    result = ExperimentResult(spec=spec, f_star=f_star)
    for solver in spec.solvers:
        runner = _FINITE_RUNNERS.get(solver)
        if runner is None:
            raise ConfigurationError(f"unknown solver {solver!r}")
        _, trace = runner(obj, lmo, x0, spec.config)
        result.traces[solver] = trace
        path = _csv_path(spec, solver)
        trace.to_csv(path, include_timing=False)
        result.csv_paths.append(path)
    reference = f_star
    if reference is None:
        reference = min(
            min((r.primal for r in t.records), default=math.inf)
            for t in result.traces.values()
        )
    if "convergence" in spec.figures:
        result.svg_paths.extend(_convergence_figures(spec, result.traces, reference))
    if "sparsity" in spec.figures:
        result.svg_paths.append(_sparsity_figure(spec, result.traces, reference))
    return result


def _gap_series(trace: RunTrace, reference: float):
    return [max(r.primal - reference, 0.0) for r in trace.records]


def _convergence_figures(spec, traces, reference) -> list:
    paths = []
    for axis in ("iterations", "time"):
        plot = LinePlot(
            title=f"{spec.name}: primal gap (solid) and FW gap (dashed)",
            xlabel="iteration" if axis == "iterations" else "seconds",
            ylabel="gap",
            xlog=False,
            ylog=True,
        )
        for solver, trace in traces.items():
            if axis == "iterations":
                xs = list(range(1, len(trace.records) + 1))
            else:
                xs = [ns * 1e-9 for ns in trace.wall_times]
            plot.add_series(solver, xs, _gap_series(trace, reference))
            gaps = [r.fw_gap for r in trace.records]
            plot.add_series(f"{solver} (dual)", xs, gaps, dashed=True)
        path = os.path.join(spec.output_dir, f"{spec.name}_convergence_{axis}.svg")
        plot.write(path)
        paths.append(path)
    return paths


def _sparsity_figure(spec, traces, reference) -> str:
    plot = LinePlot(
        title=f"{spec.name}: support size against primal gap",
        xlabel="primal gap",
        ylabel="support size",
        xlog=True,
        ylog=False,
    )
    for solver, trace in traces.items():
        gaps = _gap_series(trace, reference)
        sizes = [r.support_size for r in trace.records]
        plot.add_series(solver, gaps, sizes)
    path = os.path.join(spec.output_dir, f"{spec.name}_sparsity.svg")
    plot.write(path)
    return path


def mmd_by_node_count(trace: RunTrace) -> list:
    """Best (lowest) MMD seen at each support size, as (size, mmd) pairs."""
    best: dict = {}
    for rec in trace.records:
        mmd = math.sqrt(max(rec.primal, 0.0))
        size = rec.support_size
        if size not in best or mmd < best[size]:
            best[size] = mmd
    return sorted(best.items())


def monte_carlo_curve(kernel, measure, seed: int,
                      node_grid=MC_NODE_GRID, repeats: int = MC_SEED_REPEATS):
    """Median-over-seeds MMD per node count for the Monte-Carlo baseline."""
    cache = get_embedding_cache(kernel, measure)
    curve = []
    for n in node_grid:
        vals = []
        for r in range(repeats):
            xi = run_monte_carlo(measure, n, seed + 1000 * r + n)
            vals.append(math.sqrt(mmd_squared(kernel, measure, xi, cache=cache)))
        curve.append((n, float(np.median(vals))))
    return curve


def _write_curve_csv(path, rows, header=("nodes", "mmd")) -> None:
    import csv as _csv

    with open(path, "w", newline="") as fh:
        writer = _csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for n, v in rows:
            writer.writerow([str(int(n)), repr(float(v))])


def _run_herding_experiment(spec: ExperimentSpec) -> ExperimentResult:
    kernel, measure, x0 = build_herding_problem(spec.problem, spec.seed)
    cache = get_embedding_cache(kernel, measure)
    pool = CandidatePool(cache)
    result = ExperimentResult(spec=spec)
    cfg = spec.config

    runs = {}
    if "bpcg" in spec.solvers:
        runs["bpcg"] = run_bpcg_herding(kernel, measure, x0, cfg,
                                        cache=cache, pool=pool)
    if "lazy-bpcg" in spec.solvers:
        runs["lazy-bpcg"] = run_lazy_bpcg_herding(kernel, measure, x0, cfg,
                                                  cache=cache, pool=pool)
    for rule in ("linesearch", "equal-weight"):
        if rule in spec.solvers:
            runs[rule] = run_vanilla_herding(
                kernel, measure, x0, rule=rule.replace("-", "_"),
                max_iterations=cfg.max_iterations,
                dual_gap_tolerance=cfg.dual_gap_tolerance,
                cache=cache, pool=pool,
            )
    for solver, (xi, trace) in runs.items():
        result.traces[solver] = trace
        result.measures[solver] = xi
        path = _csv_path(spec, solver)
        trace.to_csv(path, include_timing=False)
        result.csv_paths.append(path)
        nodes_path = _csv_path(spec, solver, "_nodes")
        xi.to_csv(nodes_path)
        result.csv_paths.append(nodes_path)
        result.mmd_curves[solver] = mmd_by_node_count(trace)

    if "sbq" in spec.solvers:
        n_nodes = min(100, cfg.max_iterations)
        sbq = run_sbq(kernel, measure, pool.points, n_nodes, cache=cache)
        result.measures["sbq"] = sbq.measure
        result.mmd_curves["sbq"] = [
            (n, math.sqrt(max(v, 0.0))) for n, v in sbq.history
        ]
        nodes_path = _csv_path(spec, "sbq", "_nodes")
        sbq.measure.to_csv(nodes_path)
        curve_path = _csv_path(spec, "sbq", "_mmd")
        _write_curve_csv(curve_path, result.mmd_curves["sbq"])
        result.csv_paths.extend([nodes_path, curve_path])
    if "mc" in spec.solvers:
        curve = monte_carlo_curve(kernel, measure, spec.seed)
        result.mmd_curves["mc"] = curve
        biggest = run_monte_carlo(measure, MC_NODE_GRID[-1], spec.seed)
        result.measures["mc"] = biggest
        nodes_path = _csv_path(spec, "mc", "_nodes")
        biggest.to_csv(nodes_path)
        curve_path = _csv_path(spec, "mc", "_mmd")
        _write_curve_csv(curve_path, curve)
        result.csv_paths.extend([nodes_path, curve_path])

    if "mmd" in spec.figures:
        result.svg_paths.append(_mmd_figure(spec, result))
        result.svg_paths.extend(_herding_convergence_figures(spec, result.traces))
    return result


def _reference_rate(kernel_name: str, ns: np.ndarray) -> tuple:
    if kernel_name == "matern32":
        return "n^(-5/4)", ns ** (-1.25)
    if kernel_name == "matern52":
        return "n^(-7/4)", ns ** (-1.75)
    return "exp(-sqrt(n))", np.exp(-np.sqrt(ns))


def _mmd_figure(spec, result: ExperimentResult) -> str:
    plot = LinePlot(
        title=f"{spec.name}: MMD against number of nodes",
        xlabel="nodes",
        ylabel="MMD",
        xlog=True,
        ylog=True,
    )
    anchor = None
    for solver, curve in result.mmd_curves.items():
        xs = [n for n, _ in curve]
        ys = [v for _, v in curve]
        plot.add_series(solver, xs, ys)
        if solver == "bpcg" and curve:
            anchor = curve[0]
    ns = np.array(MC_NODE_GRID, dtype=float)
    label, rate = _reference_rate(spec.problem["kernel"], ns)
    if anchor is not None and rate[0] > 0:
        n0, v0 = anchor
        label_rate = rate * (v0 / (_reference_rate(spec.problem["kernel"],
                                                   np.array([float(n0)]))[1][0]))
    else:
        label_rate = rate
    plot.add_series(label, ns.tolist(), label_rate.tolist(), dashed=True)
    path = os.path.join(spec.output_dir, f"{spec.name}_mmd_vs_nodes.svg")
    plot.write(path)
    return path


def _herding_convergence_figures(spec, traces) -> list:
    paths = []
    for axis in ("iterations", "time"):
        plot = LinePlot(
            title=f"{spec.name}: MMD against {axis}",
            xlabel="iteration" if axis == "iterations" else "seconds",
            ylabel="MMD",
            xlog=False,
            ylog=True,
        )
        for solver, trace in traces.items():
            if axis == "iterations":
                xs = list(range(1, len(trace.records) + 1))
            else:
                xs = [ns * 1e-9 for ns in trace.wall_times]
            ys = [math.sqrt(max(r.primal, 0.0)) for r in trace.records]
            plot.add_series(solver, xs, ys)
        path = os.path.join(spec.output_dir, f"{spec.name}_mmd_{axis}.svg")
        plot.write(path)
        paths.append(path)
    return paths
