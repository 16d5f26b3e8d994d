"""Grid orchestration: cells = alphas x repetitions x proposals.

Proposals per cell:
    C  pooled model on the (undegraded) training split, evaluated directly
    B  mixture with size-proportional weights
    E  mixture with inverse-label-entropy weights
    A  mixture with weights learned by Nelder-Mead under the coherence prior

B/E/A share the same K fitted local models within a cell, so metric deltas
isolate the weighting strategy. All randomness derives from the master seed
via per-cell seed sequences, making the grid fully re-runnable cell by cell.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .data import CategoryMap, Dataset, FeatureSchema, SynthSpec, degrade_copy, load_csv, synth_generate
from .errors import ConfigError
from .evaluation import f1_macro, mcnemar_yates
from .governance import IccPrior, NodeProfile, compute_icc
from .local_model import fit_hybrid
from .mog import MoGEnsemble, anll, mog_log_scores_batch
from .partition import SplitConfig, dirichlet_partition, jsd_heterogeneity, stratified_split
from .weights import (
    OptimizationTrace,
    OptimizerConfig,
    learn_weights_icc,
    weights_entropy,
    weights_fedavg,
)

DEFAULT_ALPHAS = (0.05, 0.10, 0.20, 0.30, 0.50, 0.70, 1.00)
PROPOSAL_ORDER = ("C", "B", "E", "A")

# Reference governance profiles used by the formula self-check.
REFERENCE_PROFILES = (
    ("Financial", 4, 0.82, 0.12, 3.2, 0.393),
    ("Health", 3, 0.70, 0.25, 5.1, 0.154),
    ("Government", 2, 0.55, 0.40, 6.8, 0.042),
)


@dataclass(frozen=True)
class CsvSource:
    path: str
    schema: FeatureSchema
    name: str = "csv"


@dataclass(frozen=True)
class ExperimentConfig:
    source: object  # SynthSpec or CsvSource
    profiles: tuple[NodeProfile, ...]
    alphas: tuple[float, ...] = DEFAULT_ALPHAS
    reps: int = 5
    seed: int = 42
    split_fracs: tuple[float, float, float] = (0.6, 0.2, 0.2)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    proposals: tuple[str, ...] = PROPOSAL_ORDER

    def __post_init__(self):
        if len(self.profiles) < 1:
            raise ConfigError("need at least one node profile")
        if any(a <= 0 for a in self.alphas):
            raise ConfigError("alphas must be positive")
        if list(self.alphas) != sorted(set(self.alphas)):
            raise ConfigError("alphas must be strictly increasing")
        if self.reps < 1:
            raise ConfigError("reps must be >= 1")
        bad = [p for p in self.proposals if p not in PROPOSAL_ORDER]
        if bad:
            raise ConfigError(f"unknown proposals: {bad}")
        if isinstance(self.source, SynthSpec) and len(self.source.node_noise) != len(self.profiles):
            raise ConfigError("node_noise length must match number of profiles")

    @property
    def k(self) -> int:
        return len(self.profiles)

    @property
    def dataset_name(self) -> str:
        return self.source.name


@dataclass
class ExperimentRecord:
    dataset_name: str
    alpha: float
    rep: int
    proposal: str
    f1_macro: float
    anll: float
    jsd: float
    weights: tuple | None
    mcnemar_p_vs_B: float | None
    runtime_ms: float
    n_nodes: int

    def key_fields(self) -> tuple:
        """Everything that must be reproducible (runtime excluded)."""
        return (
            self.dataset_name,
            round(self.alpha, 9),
            self.rep,
            self.proposal,
            self.f1_macro,
            self.anll,
            self.jsd,
            self.weights,
            self.mcnemar_p_vs_B,
        )


@dataclass
class CellResult:
    records: list[ExperimentRecord]
    trace: OptimizationTrace | None
    class_counts: np.ndarray
    scores_ok: bool


@dataclass
class GridResult:
    config: ExperimentConfig
    records: list[ExperimentRecord]
    traces: dict  # (alpha_index, rep) -> OptimizationTrace
    partitions: dict  # (alpha_index, rep) -> class count matrix
    scores_ok: bool = True


def materialize_dataset(config: ExperimentConfig):
    """Deterministic dataset construction from the config source."""
    if isinstance(config.source, SynthSpec):
        return synth_generate(config.source, config.seed), None
    ds, cmap = load_csv(config.source.path, config.source.schema)
    return ds, cmap


def _cell_seeds(config: ExperimentConfig, alpha_index: int, rep: int) -> list[int]:
    ss = np.random.SeedSequence([config.seed, alpha_index, rep])
    return [int(s) for s in ss.generate_state(4)]


def run_cell(
    config: ExperimentConfig,
    alpha: float,
    rep: int,
    dataset: Dataset | None = None,
) -> CellResult:
    try:
        alpha_index = config.alphas.index(alpha)
    except ValueError:
        raise ConfigError(f"alpha {alpha} not in configured grid") from None
    if dataset is None:
        dataset, _ = materialize_dataset(config)
    split_seed, part_seed, degr_seed, opt_seed = _cell_seeds(config, alpha_index, rep)

    fracs = config.split_fracs
    train, val, test = stratified_split(
        dataset, SplitConfig(fracs[0], fracs[1], fracs[2], seed=split_seed)
    )
    k = config.k
    part = dirichlet_partition(train.labels, k, alpha, part_seed)
    counts = part.class_counts(train.labels, dataset.schema.n_classes)
    jsd = jsd_heterogeneity(counts) if k >= 2 else 0.0

    synth = isinstance(config.source, SynthSpec)
    locals_ = []
    for node, ix in enumerate(part.node_indices):
        local = train.subset(ix)
        if synth:
            local = degrade_copy(local, config.source.node_noise[node], degr_seed + node)
        locals_.append(local)
    models = [fit_hybrid(local) for local in locals_]
    prior = IccPrior.from_profiles(config.profiles)

    records: list[ExperimentRecord] = []
    trace = None
    scores_ok = True
    preds_by_proposal: dict[str, np.ndarray] = {}
    ordered = [p for p in PROPOSAL_ORDER if p in config.proposals]
    for proposal in ordered:
        t0 = time.perf_counter()
        weights = None
        if proposal == "C":
            pooled = fit_hybrid(train)
            ens = MoGEnsemble([pooled], np.array([1.0]))
        else:
            if proposal == "B":
                w = weights_fedavg(part.sizes())
            elif proposal == "E":
                w = weights_entropy(counts)
            else:  # A
                w, trace = learn_weights_icc(
                    MoGEnsemble(models, np.full(k, 1.0 / k)),
                    val,
                    prior,
                    replace(config.optimizer, seed=opt_seed),
                )
            weights = tuple(float(x) for x in w)
            ens = MoGEnsemble(models, np.asarray(w))
        scores = mog_log_scores_batch(ens, test)
        if np.isnan(scores).any() or np.isposinf(scores).any():
            scores_ok = False
        preds = np.argmax(scores, axis=1)
        preds_by_proposal[proposal] = preds
        rec = ExperimentRecord(
            dataset_name=config.dataset_name,
            alpha=alpha,
            rep=rep,
            proposal=proposal,
            f1_macro=f1_macro(test.labels, preds, dataset.schema.n_classes),
            anll=anll(ens, test),
            jsd=jsd,
            weights=weights,
            mcnemar_p_vs_B=None,
            runtime_ms=(time.perf_counter() - t0) * 1000.0,
            n_nodes=k,
        )
        records.append(rec)

    if "A" in preds_by_proposal and "B" in preds_by_proposal:
        res = mcnemar_yates(preds_by_proposal["A"], preds_by_proposal["B"], test.labels)
        for rec in records:
            if rec.proposal == "A":
                rec.mcnemar_p_vs_B = res.p_value
    return CellResult(records, trace, counts, scores_ok)


def run_grid(config: ExperimentConfig) -> GridResult:
    dataset, _ = materialize_dataset(config)
    result = GridResult(config, [], {}, {})
    for alpha_index, alpha in enumerate(config.alphas):
        for rep in range(config.reps):
            try:
                cell = run_cell(config, alpha, rep, dataset)
            except Exception as exc:
                raise ConfigError(f"cell (alpha={alpha}, rep={rep}) failed: {exc}") from exc
            result.records.extend(cell.records)
            if cell.trace is not None:
                result.traces[(alpha_index, rep)] = cell.trace
            result.partitions[(alpha_index, rep)] = cell.class_counts
            result.scores_ok = result.scores_ok and cell.scores_ok
    return result


# ---------------------------------------------------------------------------
# Verification protocol: 15 named checks.
# ---------------------------------------------------------------------------


@dataclass
class VerificationReport:
    checks: list  # (name, passed, message)

    @property
    def passed_count(self) -> int:
        return sum(1 for _, ok, _ in self.checks if ok)

    @property
    def all_passed(self) -> bool:
        return self.passed_count == len(self.checks)

    def to_text(self) -> str:
        lines = []
        for name, ok, msg in self.checks:
            status = "PASS" if ok else "FAIL"
            lines.append(f"[{status}] {name}: {msg}")
        lines.append(f"{self.passed_count}/{len(self.checks)} passed")
        return "\n".join(lines)

    def to_kv(self) -> str:
        lines = [f"check.{name}={'pass' if ok else 'fail'}" for name, ok, _ in self.checks]
        lines.append(f"passed_count={self.passed_count}")
        lines.append(f"total={len(self.checks)}")
        return "\n".join(lines)


def _is_default_params(config: ExperimentConfig) -> bool:
    return (
        config.alphas == DEFAULT_ALPHAS
        and config.reps == 5
        and config.seed == 42
        and config.split_fracs == (0.6, 0.2, 0.2)
        and abs(config.optimizer.lam - 0.10) < 1e-12
        and abs(config.optimizer.floor_delta - 0.05) < 1e-12
        and config.optimizer.max_iters == 500
    )


def verify(result: GridResult, csv_quantized: bool = False) -> VerificationReport:
    """Evaluate the 15-check protocol on a completed grid. Failures are
    reported, never raised. csv_quantized relaxes equality tolerances to the
    6-decimal precision of the results CSV."""
    config = result.config
    records = result.records
    checks: list = []
    tol = 1e-6 if csv_quantized else 1e-12
    sum_tol = 5e-6 * max(config.k, 1) if csv_quantized else 1e-9

    # 1. coherence index formula against reference values
    errs = []
    for name, cmm, kci, kri, cvss, expected in REFERENCE_PROFILES:
        got = compute_icc(NodeProfile(name, cmm, kci, kri, cvss))
        errs.append(abs(got - expected))
    ok = max(errs) <= 0.0005
    checks.append(("icc_formula", ok, f"max deviation {max(errs):.2e}"))

    # 2. seed reproducibility: re-run the first cell, compare records
    try:
        cell = run_cell(config, config.alphas[0], 0)
        expect = [r for r in records if r.alpha == config.alphas[0] and r.rep == 0]
        ok = len(cell.records) == len(expect)
        if ok:
            for a, b in zip(cell.records, expect):
                ka, kb = a.key_fields(), b.key_fields()
                ok = ok and _fields_close(ka, kb, tol)
        msg = "first cell re-run matches" if ok else "first cell re-run diverges"
    except Exception as exc:
        ok, msg = False, f"re-run failed: {exc}"
    checks.append(("seed_reproducibility", ok, msg))

    # 3. mean JSD non-increasing across ascending alphas (20-seed average;
    # the handful of grid reps alone is too noisy to order adjacent levels)
    try:
        mean_jsd = _jsd_curve(config, n_seeds=20)
        diffs = np.diff(mean_jsd)
        ok = bool((diffs <= 1e-9).all())
        msg = f"mean JSD per alpha: {np.round(mean_jsd, 4).tolist()}"
    except Exception as exc:
        ok, msg = False, f"could not evaluate: {exc}"
    checks.append(("jsd_alpha_ordering", ok, msg))

    # 4. OOD encoding lands on code n_cats
    cmap = CategoryMap(({"tcp": 0, "udp": 1},), ("0", "1"))
    code = cmap.encode(0, "icmp")
    ok = code == 2
    checks.append(("ood_slot_index", ok, f"unseen value encoded as {code}, n_cats=2"))

    # 5. mixture scores finite or explicit sentinel
    ok = result.scores_ok and all(np.isfinite(r.anll) for r in records)
    checks.append(("mog_scores_finite", ok, "no NaN/+inf mixture scores" if ok else "bad scores"))

    # 6. metric ranges
    ok = all(r.anll >= 0 and 0.0 <= r.f1_macro <= 1.0 for r in records)
    checks.append(("metric_ranges", ok, "ANLL >= 0 and F1 in [0,1]" if ok else "range violation"))

    # 7. weight vectors sum to 1
    bad = [
        r
        for r in records
        if r.weights is not None and abs(sum(r.weights) - 1.0) > sum_tol
    ]
    checks.append(("weights_sum_to_one", not bad, f"{len(bad)} violations"))

    # 8. McNemar validity
    ps = [r.mcnemar_p_vs_B for r in records if r.mcnemar_p_vs_B is not None]
    ok = all(0.0 <= p <= 1.0 for p in ps)
    need = "A" in config.proposals and "B" in config.proposals
    if need and not ps:
        ok = False
    checks.append(("mcnemar_validity", ok, f"{len(ps)} p-values in [0,1]" if ok else "invalid p"))

    # 9. downward JSD gradient at per-rep granularity, on average
    ok, msg = _per_rep_gradient(records, config)
    checks.append(("jsd_gradient_per_rep", ok, msg))

    # 10. highest-coherence node outweighs lowest (proposal A, mean level)
    ok, msg = _alignment_check(records, config)
    checks.append(("icc_weight_alignment", ok, msg))

    # 11. no NaN/Inf anywhere in records
    ok = True
    for r in records:
        vals = [r.f1_macro, r.anll, r.jsd, r.runtime_ms]
        if r.weights is not None:
            vals.extend(r.weights)
        if r.mcnemar_p_vs_B is not None:
            vals.append(r.mcnemar_p_vs_B)
        if not all(np.isfinite(v) for v in vals):
            ok = False
            break
    checks.append(("no_nan_inf", ok, "all record fields finite" if ok else "non-finite field"))

    # 12. grid completeness
    expected = len(config.alphas) * config.reps * len(config.proposals)
    ok = len(records) == expected
    checks.append(("grid_completeness", ok, f"{len(records)}/{expected} records"))

    # 13. config echo against the published defaults
    if _is_default_params(config):
        ok, msg = True, "default parameters in effect and echoed"
    else:
        ok, msg = True, "non-default configuration (echo not applicable)"
    checks.append(("config_echo", ok, msg))

    # 14. learned weights respect the floor
    delta = config.optimizer.floor_delta
    floor_tol = 2e-6 if csv_quantized else 1e-9
    a_recs = [r for r in records if r.proposal == "A" and r.weights is not None]
    bad = [r for r in a_recs if min(r.weights) < delta - floor_tol]
    ok = not bad if ("A" not in config.proposals or a_recs) else False
    checks.append(("weight_floor", ok, f"{len(bad)} floor violations"))

    # 15. trace sanity: chosen start minimizes the final objective
    ok = True
    for trace in result.traces.values():
        finals = [s.final_objective for s in trace.starts]
        if finals and trace.chosen != int(np.argmin(finals)):
            ok = False
    if "A" in config.proposals and not result.traces:
        ok = False
    checks.append(("trace_sanity", ok, f"{len(result.traces)} traces checked"))

    return VerificationReport(checks)


def _fields_close(a: tuple, b: tuple, tol: float) -> bool:
    if len(a) != len(b):
        return False
    for x, y in zip(a, b):
        if isinstance(x, tuple) or isinstance(y, tuple):
            if x is None or y is None or not _fields_close(tuple(x), tuple(y), tol):
                return False
        elif isinstance(x, float) or isinstance(y, float):
            if x is None or y is None:
                if x is not y:
                    return False
            elif abs(float(x) - float(y)) > tol:
                return False
        elif x != y:
            return False
    return True


def _jsd_curve(config: ExperimentConfig, n_seeds: int = 20) -> np.ndarray:
    """Mean JSD per alpha over fresh partition seeds on the configured data."""
    dataset, _ = materialize_dataset(config)
    k = max(config.k, 2)
    curve = []
    for alpha in config.alphas:
        vals = []
        for seed in range(n_seeds):
            part = dirichlet_partition(dataset.labels, k, alpha, seed)
            counts = part.class_counts(dataset.labels, dataset.schema.n_classes)
            vals.append(jsd_heterogeneity(counts))
        curve.append(float(np.mean(vals)))
    return np.array(curve)


def _mean_jsd_per_alpha(records, alphas) -> np.ndarray:
    out = []
    for a in alphas:
        vals = [r.jsd for r in records if abs(r.alpha - a) < 1e-12]
        if vals:
            out.append(float(np.mean(vals)))
    return np.array(out)


def _per_rep_gradient(records, config) -> tuple[bool, str]:
    if len(config.alphas) < 2:
        return True, "single alpha level (vacuous)"
    drops = []
    for rep in range(config.reps):
        seq = []
        for a in config.alphas:
            vals = [r.jsd for r in records if r.rep == rep and abs(r.alpha - a) < 1e-12]
            if vals:
                seq.append(vals[0])
        if len(seq) >= 2:
            drops.append(seq[0] - seq[-1])
    ok = bool(drops) and float(np.mean(drops)) > 0.0
    return ok, f"mean per-rep JSD drop from first to last alpha: {np.mean(drops) if drops else float('nan'):.4f}"


def _alignment_check(records, config) -> tuple[bool, str]:
    if "A" not in config.proposals:
        return True, "proposal A not run (vacuous)"
    iccs = [compute_icc(p) for p in config.profiles]
    hi, lo = int(np.argmax(iccs)), int(np.argmin(iccs))
    if hi == lo:
        return True, "single node (vacuous)"
    ws = np.array([r.weights for r in records if r.proposal == "A" and r.weights is not None])
    if not len(ws):
        return False, "no learned weights recorded"
    mean_w = ws.mean(axis=0)
    ok = bool(mean_w[hi] > mean_w[lo])
    return ok, (
        f"mean weight {config.profiles[hi].name}={mean_w[hi]:.4f} vs "
        f"{config.profiles[lo].name}={mean_w[lo]:.4f}"
    )


# ---------------------------------------------------------------------------
# Emission: results CSV and plot-ready TSV files.
# ---------------------------------------------------------------------------


def _fmt(x) -> str:
    return "" if x is None else f"{x:.6f}"


def emit_results_csv(records, path) -> None:
    """Grid-order CSV with fixed 6-decimal formatting; byte-stable.

    The runtime_ms column is left empty: wall-clock time is not a function
    of the configuration, and the CSV is the deterministic artifact. Measured
    runtimes live in the grid bundle diagnostics instead.
    """
    k = max((r.n_nodes for r in records), default=0)
    header = ["dataset", "alpha", "rep", "proposal", "f1_macro", "anll", "jsd"]
    header += [f"w_{i + 1}" for i in range(k)]
    header += ["mcnemar_p_vs_B", "runtime_ms"]
    lines = [",".join(header)]
    for r in records:
        row = [
            r.dataset_name,
            f"{r.alpha:.6f}",
            str(r.rep),
            r.proposal,
            _fmt(r.f1_macro),
            _fmt(r.anll),
            _fmt(r.jsd),
        ]
        if r.weights is None:
            row += [""] * k
        else:
            row += [_fmt(w) for w in r.weights]
            row += [""] * (k - len(r.weights))
        row.append(_fmt(r.mcnemar_p_vs_B))
        row.append("")  # runtime_ms: diagnostic only, see docstring
        lines.append(",".join(row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_results_csv(path) -> list[ExperimentRecord]:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    header = lines[0].split(",")
    w_cols = [i for i, h in enumerate(header) if h.startswith("w_")]
    col = {h: i for i, h in enumerate(header)}
    records = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != len(header):
            raise ConfigError(f"{path}: malformed row: {ln!r}")
        wvals = [parts[i] for i in w_cols]
        weights = tuple(float(v) for v in wvals if v != "") or None
        p_raw = parts[col["mcnemar_p_vs_B"]]
        rt_raw = parts[col["runtime_ms"]]
        records.append(
            ExperimentRecord(
                dataset_name=parts[col["dataset"]],
                alpha=float(parts[col["alpha"]]),
                rep=int(parts[col["rep"]]),
                proposal=parts[col["proposal"]],
                f1_macro=float(parts[col["f1_macro"]]),
                anll=float(parts[col["anll"]]),
                jsd=float(parts[col["jsd"]]),
                weights=weights,
                mcnemar_p_vs_B=float(p_raw) if p_raw else None,
                runtime_ms=float(rt_raw) if rt_raw else 0.0,
                n_nodes=len(w_cols),
            )
        )
    return records


def emit_plot_data(records, ensemble, out_dir, node_names=None, prior=None) -> list[str]:
    """Write four tab-separated plot-data files; returns the paths written."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    written = []
    alphas = sorted({round(r.alpha, 9) for r in records})
    proposals = [p for p in PROPOSAL_ORDER if any(r.proposal == p for r in records)]
    k = max((r.n_nodes for r in records), default=0)
    if node_names is None:
        node_names = [f"node_{i}" for i in range(k)]

    path = os.path.join(out_dir, "gradient_curves.tsv")
    lines = ["alpha\tproposal\tf1_mean\tf1_std\tanll_mean\tanll_std"]
    for a in alphas:
        for p in proposals:
            sel = [r for r in records if r.proposal == p and abs(r.alpha - a) < 1e-9]
            f1s = np.array([r.f1_macro for r in sel])
            anlls = np.array([r.anll for r in sel])
            lines.append(
                f"{a:.6f}\t{p}\t{f1s.mean():.6f}\t{f1s.std():.6f}"
                f"\t{anlls.mean():.6f}\t{anlls.std():.6f}"
            )
    _write(path, lines)
    written.append(path)

    a_recs = [r for r in records if r.proposal == "A" and r.weights is not None]
    path = os.path.join(out_dir, "alignment_bars.tsv")
    lines = ["node\tmean_learned_weight\ticc_prior"]
    if a_recs:
        mean_w = np.array([r.weights for r in a_recs]).mean(axis=0)
        for i, name in enumerate(node_names):
            pr = f"{prior[i]:.6f}" if prior is not None else ""
            lines.append(f"{name}\t{mean_w[i]:.6f}\t{pr}")
    _write(path, lines)
    written.append(path)

    path = os.path.join(out_dir, "weight_trajectories.tsv")
    lines = ["alpha\tnode\tmean_weight"]
    for a in alphas:
        sel = [r for r in a_recs if abs(r.alpha - a) < 1e-9]
        if sel:
            mean_w = np.array([r.weights for r in sel]).mean(axis=0)
            for i, name in enumerate(node_names):
                lines.append(f"{a:.6f}\t{name}\t{mean_w[i]:.6f}")
    _write(path, lines)
    written.append(path)

    path = os.path.join(out_dir, "density_profiles.tsv")
    lines = ["x\t" + "\t".join(node_names)]
    if ensemble is not None and ensemble.models[0].gauss_mean.shape[1] > 0:
        feature, cls = 0, _common_class(ensemble)
        means = np.array([m.gauss_mean[cls, feature] for m in ensemble.models])
        sds = np.array([np.sqrt(m.gauss_var[cls, feature]) for m in ensemble.models])
        lo = float((means - 6 * sds).min())
        hi = float((means + 6 * sds).max())
        xs = np.linspace(lo, hi, 200)
        for x in xs:
            dens = np.exp(-0.5 * ((x - means) / sds) ** 2) / (sds * np.sqrt(2 * np.pi))
            lines.append(f"{x:.6f}\t" + "\t".join(f"{d:.6f}" for d in dens))
    _write(path, lines)
    written.append(path)
    return written


def _common_class(ensemble) -> int:
    common = set.intersection(*(set(m.classes_present) for m in ensemble.models))
    return min(common) if common else 0


def _write(path, lines) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
