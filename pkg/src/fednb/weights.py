"""Node weight strategies: learned (Nelder-Mead + coherence prior) and baselines.

The learned strategy minimizes

    J(w) = ANLL_val(w) + lambda * ||w - prior||^2

over the floor-constrained simplex. Optimization runs in an unconstrained
space of K-1 reals mapped through softmax and the weight floor, so the
simplex search never sees an infeasible point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import InversionError, OptimizerError
from .governance import IccPrior
from .mog import MoGEnsemble, anll_from_stacked, stack_scores


@dataclass(frozen=True)
class OptimizerConfig:
    lam: float = 0.10
    floor_delta: float = 0.05
    max_iters: int = 500
    n_starts: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if not 0.0 <= self.floor_delta < 1.0:
            raise ValueError("floor_delta outside [0, 1)")
        if self.max_iters < 1 or self.n_starts < 1:
            raise ValueError("max_iters and n_starts must be positive")


def to_floored_simplex(theta, k: int, delta: float) -> np.ndarray:
    """w = delta + (1 - K*delta) * softmax([theta, 0]); every entry >= delta."""
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (k - 1,):
        raise ValueError(f"theta must have {k - 1} coordinates")
    if k * delta >= 1.0:
        raise ValueError(f"K*delta = {k * delta} >= 1: floor infeasible")
    z = np.append(theta, 0.0)
    z -= z.max()
    p = np.exp(z)
    p /= p.sum()
    return delta + (1.0 - k * delta) * p


def from_simplex(w, delta: float) -> np.ndarray:
    """Gauge-fixed inverse of to_floored_simplex (last coordinate pinned to 0)."""
    w = np.asarray(w, dtype=np.float64)
    k = len(w)
    w = np.maximum(w, delta + 1e-6)
    if (w <= delta).any():
        raise InversionError("weight at or below the floor after clipping")
    p = (w - delta) / (1.0 - k * delta)
    logp = np.log(p)
    return logp[:-1] - logp[-1]


def objective(w, ensemble: MoGEnsemble, val: Dataset, prior, lam: float) -> float:
    """Composite validation objective: normalized ANLL plus prior penalty."""
    stacked = stack_scores(ensemble.models, val)
    prior = np.asarray(prior, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    return anll_from_stacked(w, stacked, val.labels) + lam * float(((w - prior) ** 2).sum())


def nelder_mead(f, start, max_iters: int = 500, spread_tol: float = 1e-10):
    """Simplex minimization: reflect 1, expand 2, contract 0.5, shrink 0.5.

    Initial simplex perturbs each coordinate by 5% (0.00025 absolute for
    zero coordinates). Stops at max_iters or when the vertex function
    spread falls below spread_tol. Returns (best x, best f, n_evals).
    """
    x0 = np.asarray(start, dtype=np.float64)
    n = len(x0)
    f0 = f(x0)
    if not np.isfinite(f0):
        raise OptimizerError(f"objective not finite at start: {f0}")
    evals = 1
    simplex = [x0]
    for i in range(n):
        x = x0.copy()
        x[i] = x[i] * 1.05 if x[i] != 0.0 else 0.00025
        simplex.append(x)
    fvals = [f0] + [f(x) for x in simplex[1:]]
    evals += n

    for _ in range(max_iters):
        order = np.argsort(fvals, kind="stable")
        simplex = [simplex[i] for i in order]
        fvals = [fvals[i] for i in order]
        # function spread alone can hit zero on a symmetric stall, so also
        # require the simplex itself to have collapsed
        xspread = max(np.max(np.abs(x - simplex[0])) for x in simplex[1:])
        if fvals[-1] - fvals[0] < spread_tol and xspread < 1e-8:
            break
        centroid = np.mean(simplex[:-1], axis=0)
        worst = simplex[-1]

        xr = centroid + (centroid - worst)
        fr = f(xr)
        evals += 1
        if fr < fvals[0]:
            xe = centroid + 2.0 * (centroid - worst)
            fe = f(xe)
            evals += 1
            if fe < fr:
                simplex[-1], fvals[-1] = xe, fe
            else:
                simplex[-1], fvals[-1] = xr, fr
        elif fr < fvals[-2]:
            simplex[-1], fvals[-1] = xr, fr
        else:
            if fr < fvals[-1]:
                xc = centroid + 0.5 * (xr - centroid)
            else:
                xc = centroid + 0.5 * (worst - centroid)
            fc = f(xc)
            evals += 1
            if fc < min(fr, fvals[-1]):
                simplex[-1], fvals[-1] = xc, fc
            else:
                best = simplex[0]
                simplex = [best] + [best + 0.5 * (x - best) for x in simplex[1:]]
                fvals = [fvals[0]] + [f(x) for x in simplex[1:]]
                evals += n

    i = int(np.argmin(fvals))
    return simplex[i], float(fvals[i]), evals


@dataclass
class StartResult:
    initial_theta: np.ndarray
    final_theta: np.ndarray
    final_objective: float
    evaluations: int


@dataclass
class OptimizationTrace:
    starts: list[StartResult] = field(default_factory=list)
    chosen: int = -1
    evaluations: int = 0

    def to_dict(self) -> dict:
        return {
            "starts": [
                {
                    "initial_theta": s.initial_theta.tolist(),
                    "final_theta": s.final_theta.tolist(),
                    "final_objective": s.final_objective,
                    "evaluations": s.evaluations,
                }
                for s in self.starts
            ],
            "chosen": self.chosen,
            "evaluations": self.evaluations,
        }

    @staticmethod
    def from_dict(d: dict) -> "OptimizationTrace":
        t = OptimizationTrace(chosen=int(d["chosen"]), evaluations=int(d["evaluations"]))
        for s in d["starts"]:
            t.starts.append(
                StartResult(
                    np.array(s["initial_theta"]),
                    np.array(s["final_theta"]),
                    float(s["final_objective"]),
                    int(s["evaluations"]),
                )
            )
        return t


def learn_weights_icc(
    ensemble: MoGEnsemble,
    val: Dataset,
    prior: IccPrior,
    config: OptimizerConfig,
):
    """Multi-start Nelder-Mead over the floored simplex; returns (weights, trace).

    Starts: the coherence prior, the uniform vector, two Dirichlet(1) draws
    and their elementwise midpoint — all mapped to unconstrained space.
    """
    k = ensemble.k
    if k < 2:
        raise ValueError("weight learning needs K >= 2 nodes")
    if k * config.floor_delta >= 1.0:
        raise ValueError("K * floor_delta must be < 1")

    stacked = stack_scores(ensemble.models, val)
    labels = val.labels
    target = np.asarray(prior.normalized, dtype=np.float64)
    lam = config.lam
    delta = config.floor_delta

    def f(theta):
        w = to_floored_simplex(theta, k, delta)
        return anll_from_stacked(w, stacked, labels) + lam * float(((w - target) ** 2).sum())

    rng = np.random.default_rng(config.seed)
    d1 = rng.dirichlet(np.ones(k))
    d2 = rng.dirichlet(np.ones(k))
    start_points = [
        target,
        np.full(k, 1.0 / k),
        d1,
        d2,
        (d1 + d2) / 2.0,
    ][: config.n_starts]

    trace = OptimizationTrace()
    best_theta, best_f = None, np.inf
    for w0 in start_points:
        theta0 = from_simplex(w0, delta)
        theta, fv, ev = nelder_mead(f, theta0, max_iters=config.max_iters)
        trace.starts.append(StartResult(theta0, theta, fv, ev))
        trace.evaluations += ev
        if fv < best_f:
            best_theta, best_f = theta, fv
    trace.chosen = int(np.argmin([s.final_objective for s in trace.starts]))
    return to_floored_simplex(best_theta, k, delta), trace


def weights_fedavg(node_sizes) -> np.ndarray:
    """Size-proportional weighting (baseline B)."""
    sizes = np.asarray(node_sizes, dtype=np.float64)
    if (sizes <= 0).any():
        raise ValueError("node sizes must be positive")
    return sizes / sizes.sum()


def weights_entropy(per_node_class_counts, eps: float = 1e-6) -> np.ndarray:
    """Inverse label-entropy weighting (baseline E), base-2 entropy."""
    counts = np.asarray(per_node_class_counts, dtype=np.float64)
    totals = counts.sum(axis=1)
    if (totals <= 0).any():
        raise ValueError("empty node")
    dists = counts / totals[:, None]
    h = np.zeros(len(counts))
    for i, d in enumerate(dists):
        nz = d[d > 0]
        h[i] = float(-(nz * np.log2(nz)).sum())
    w = 1.0 / (h + eps)
    return w / w.sum()
