"""Experiment drivers, configuration handling and CSV/JSON emission.

Experiments are described by a flat key-value config (INI sections, see
:class:`ExperimentConfig`) that every CLI flag can override. Each run
writes one CSV per trajectory with the fixed header
``comm_rounds,samples,grad_norm,consensus_err,descent_dev,objective`` plus
a JSON summary that echoes the full configuration, so any output
regenerates bit-identically from its own echo.
"""

from __future__ import annotations

import configparser
import json
import math
import os
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import config as defaults
from . import gossip, optim, problems, spectral, topology
from .errors import ConfigError, InvalidMatrixError, ProbeError, RowGossipError, RunAborted

EXPERIMENT_KINDS = ("consensus", "speedup", "mg-compare", "metrics", "invariants")
TOPOLOGY_KINDS = ("exp", "ring", "grid", "geometric", "nearest", "complete", "file")

CSV_HEADER = "comm_rounds,samples,grad_norm,consensus_err,descent_dev,objective"

# Step sizes for multi-gossip comparison runs, keyed by the per-iteration
# round count; more gossip tolerates a larger step.
MG_ALPHA_BY_ROUNDS = ((1, 0.005), (2, 0.01), (10, 0.02))


@dataclass
class ExperimentConfig:
    """Everything an experiment needs, with CLI-friendly flat fields.

    Config files use INI sections ``[experiment]``, ``[topology]``,
    ``[algorithm]``, ``[problem]`` and ``[run]``; the key names below are
    the section keys (section membership is fixed per key, see
    ``_SECTIONS``). Unknown keys raise :class:`ConfigError`.
    """

    kind: str = "metrics"
    # topology
    topo_kind: str = "exp"
    n: int = 8
    rows: int = 4
    cols: int = 4
    radius: float = 0.4
    knn: int = 3
    topo_path: str = ""
    topo_seed: int = 7
    # algorithm
    alpha: float = 0.0  # 0 means "not set"
    n_alpha: float = 0.0
    rounds: str = "1"
    total_rounds: int = 3000
    record_every: int = 10
    # problem
    problem: str = "logistic"
    total_rows: int = 12800
    dim: int = 10
    rho: float = 0.01
    batch: int = 50
    spread: float = 1.0
    sigma: float = 1.0
    local_spread: float = 10.0
    scale: float = 1.0
    smoothness: float = 152.0
    # run
    repetitions: int = 20
    seed: int = defaults.DEFAULT_SEED
    nodes: str = "1,4,16"
    out: str = ""

    def node_list(self):
        try:
            return [int(tok) for tok in str(self.nodes).split(",") if tok.strip()]
        except ValueError:
            raise ConfigError(f"bad node list {self.nodes!r}") from None

    def rounds_list(self):
        out = []
        for tok in str(self.rounds).split(","):
            tok = tok.strip()
            if not tok:
                continue
            if tok == "auto":
                out.append("auto")
            else:
                try:
                    out.append(int(tok))
                except ValueError:
                    raise ConfigError(f"bad rounds entry {tok!r}") from None
        return out

    def validate(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.topo_kind not in TOPOLOGY_KINDS:
            raise ConfigError(f"unknown topology kind {self.topo_kind!r}")
        if self.repetitions < 1:
            raise ConfigError(f"repetitions must be >= 1, got {self.repetitions}")
        if self.alpha < 0 or self.n_alpha < 0:
            raise ConfigError("step sizes must be positive when set")
        if self.total_rounds < 0:
            raise ConfigError(f"total_rounds must be >= 0, got {self.total_rounds}")
        if self.record_every < 1:
            raise ConfigError(f"record_every must be >= 1, got {self.record_every}")
        if not self.rounds_list():
            raise ConfigError("rounds list is empty")
        return self

    def as_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, mapping):
        known = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, value in mapping.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            kwargs[key] = _coerce(cls, key, value)
        return cls(**kwargs).validate()


_SECTIONS = {
    "experiment": ("kind",),
    "topology": ("topo_kind", "n", "rows", "cols", "radius", "knn", "topo_path", "topo_seed"),
    "algorithm": ("alpha", "n_alpha", "rounds", "total_rounds", "record_every"),
    "problem": (
        "problem",
        "total_rows",
        "dim",
        "rho",
        "batch",
        "spread",
        "sigma",
        "local_spread",
        "scale",
        "smoothness",
    ),
    "run": ("repetitions", "seed", "nodes", "out"),
}
_KEY_TO_SECTION = {key: sec for sec, keys in _SECTIONS.items() for key in keys}


def _coerce(cls, key, value):
    ftype = {f.name: f.type for f in fields(cls)}[key]
    if isinstance(value, str):
        try:
            if ftype in ("int", int):
                return int(value)
            if ftype in ("float", float):
                return float(value)
        except ValueError:
            raise ConfigError(f"bad value {value!r} for config key {key!r}") from None
        return value
    return value


def read_config_mapping(path):
    """Parse an INI config file into a flat key -> string mapping."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path!r}")
    mapping = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        for key, value in parser.items(section):
            if key not in _SECTIONS[section]:
                raise ConfigError(f"key {key!r} does not belong in section [{section}]")
            mapping[key] = value
    return mapping


def load_config(path, overrides=None):
    """Parse an INI config file and apply flat overrides on top."""
    mapping = read_config_mapping(path)
    if overrides:
        mapping.update(overrides)
    return ExperimentConfig.from_dict(mapping)


def save_config(cfg, path):
    """Write a config back out in the same INI grammar."""
    parser = configparser.ConfigParser()
    values = cfg.as_dict()
    for section, keys in _SECTIONS.items():
        parser[section] = {k: str(values[k]) for k in keys}
    with open(path, "w") as fh:
        parser.write(fh)


def build_mixing(cfg, n=None):
    """Construct the configured mixing matrix (n overridable per call)."""
    n = cfg.n if n is None else n
    kind = cfg.topo_kind
    if kind == "exp":
        g = topology.build_exponential(n)
    elif kind == "ring":
        g = topology.build_directed_ring(n)
    elif kind == "grid":
        g = topology.build_grid(cfg.rows, cfg.cols)
    elif kind == "geometric":
        g = topology.build_geometric(n, cfg.radius, cfg.topo_seed)
    elif kind == "nearest":
        g = topology.build_nearest_neighbor(n, cfg.knn, cfg.topo_seed)
    elif kind == "complete":
        g = topology.build_complete(n)
    elif kind == "file":
        if not cfg.topo_path:
            raise ConfigError("topology kind 'file' needs topo_path")
        return topology.load_matrix_csv(cfg.topo_path)
    else:
        raise ConfigError(f"unknown topology kind {kind!r}")
    return topology.weights_from_indegree(g)


def build_oracle(cfg, n):
    """Construct the configured problem oracle, noise-wrapped per cfg.sigma."""
    if cfg.problem == "quadratic":
        base = problems.make_quadratic(n, cfg.dim, cfg.spread, cfg.seed)
    elif cfg.problem == "logistic":
        if cfg.total_rows % n != 0:
            raise ConfigError(f"total_rows={cfg.total_rows} is not divisible by n={n}")
        base = problems.make_synthetic_logistic(
            n, cfg.total_rows, cfg.dim, cfg.rho, cfg.batch, cfg.local_spread, cfg.seed
        )
    elif cfg.problem == "hard":
        base = problems.make_hard_instance(n, cfg.dim, cfg.smoothness, cfg.scale)
    else:
        raise ConfigError(f"unknown problem kind {cfg.problem!r}")
    return problems.noisy(base, cfg.sigma)


def resolve_alpha(cfg, n):
    if cfg.alpha > 0:
        return cfg.alpha
    if cfg.n_alpha > 0:
        return cfg.n_alpha / n
    raise ConfigError("set either alpha or n_alpha")


def mg_alpha_for_rounds(rounds):
    """Comparison-run step size for a given per-iteration round count."""
    alpha = MG_ALPHA_BY_ROUNDS[0][1]
    for threshold, value in MG_ALPHA_BY_ROUNDS:
        if rounds >= threshold:
            alpha = value
    return alpha


@dataclass
class RunRecord:
    """One trajectory (or averaged family) plus its provenance."""

    config: dict
    name: str
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def write(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        csv_path = os.path.join(out_dir, f"{self.name}.csv")
        write_rows_csv(csv_path, self.rows)
        json_path = os.path.join(out_dir, f"{self.name}.json")
        write_json(json_path, {"config": self.config, "summary": self.summary})
        return csv_path


def reports_to_rows(reports):
    return [
        {
            "comm_rounds": r.comm_rounds,
            "samples": r.samples,
            "grad_norm": r.grad_norm,
            "consensus_err": r.consensus_error,
            "descent_dev": r.descent_deviation,
            "objective": r.objective,
        }
        for r in reports
    ]


def write_rows_csv(path, rows):
    with open(path, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for row in rows:
            fh.write(
                f"{row['comm_rounds']},{row['samples']},{row['grad_norm']:.17g},"
                f"{row['consensus_err']:.17g},{row['descent_dev']:.17g},"
                f"{row['objective']:.17g}\n"
            )


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj)}")


# ---------------------------------------------------------------------------
# drivers


def run_metrics(cfg):
    """Spectral diagnostics of the configured topology, as a plain dict."""
    matrix = build_mixing(cfg)
    metrics = spectral.compute_metrics(matrix)
    return metrics.as_dict()


def _beta_sweep(n, blend_levels):
    """Blends of the exponential matrix with the identity: kappa stays 1,
    the contraction factor beta rises with the identity share."""
    base = topology.weights_from_indegree(topology.build_exponential(n)).weights
    eye = np.eye(n)
    out = []
    for level in blend_levels:
        out.append((f"beta_blend_{level:g}", topology.MixingMatrix((1 - level) * base + level * eye)))
    return out


def _kappa_sweep(n, ramp_levels):
    """Self-weight ramps on the exponential support: node i keeps weight
    0.5 +/- ramp/2 (linear in i) for itself, spreading the rest over its
    in-neighbors. Breaking the node symmetry skews the equilibrium vector."""
    g = topology.build_exponential(n)
    out = []
    for ramp in ramp_levels:
        a = np.zeros((n, n))
        for i in range(n):
            nbrs = g.in_neighbors(i)
            self_w = 0.5 + ramp * (i / max(n - 1, 1) - 0.5)
            a[i, i] = self_w
            for j in nbrs:
                a[i, j] = (1.0 - self_w) / len(nbrs)
        out.append((f"kappa_ramp_{ramp:g}", topology.MixingMatrix(a)))
    return out


def run_consensus_experiment(cfg):
    """Diagonal-corrected consensus curves over two matrix families.

    One family varies the contraction factor at fixed (unit) skewness, the
    other varies the skewness; achieved metrics are reported, not targeted.
    The initial stack depends only on the topology seed, so the emitted CSV
    is independent of the base run seed.
    """
    n = cfg.n
    rounds = cfg.total_rounds if cfg.total_rounds > 0 else 40
    rng = np.random.default_rng(cfg.topo_seed)
    z = rng.standard_normal((n, max(cfg.dim, 1)))
    mean = z.mean(axis=0)
    records = []
    for name, matrix in _beta_sweep(n, (0.0, 0.3, 0.6, 0.8)) + _kappa_sweep(n, (0.0, 0.4, 0.8)):
        metrics = spectral.compute_metrics(matrix)
        trace = gossip.pull_diag_trace(matrix, z, rounds)
        rows = [
            {
                "comm_rounds": k + 1,
                "samples": 0,
                "grad_norm": float("nan"),
                "consensus_err": gossip.consensus_error(trace[k], mean),
                "descent_dev": float("nan"),
                "objective": float("nan"),
            }
            for k in range(rounds)
        ]
        records.append(
            RunRecord(
                config=cfg.as_dict(),
                name=f"consensus_{name}",
                rows=rows,
                summary={
                    "achieved_beta": metrics.beta,
                    "achieved_kappa": metrics.kappa,
                    "final_error": rows[-1]["consensus_err"],
                },
            )
        )
    return records


def _plateau(values, fraction=0.1):
    """Mean of the trailing fraction of a metric series (the noise floor)."""
    tail = max(1, math.ceil(len(values) * fraction))
    return float(np.mean(values[-tail:]))


def run_speedup_experiment(cfg):
    """Vanilla gradient tracking across network sizes at a fixed n * alpha.

    Every node count shares the same global dataset (partitioned more
    finely as n grows), the same round budget and the same effective step
    n * alpha, so plateau differences isolate the gradient-noise averaging.
    Returns one record per n with rep-averaged curves; the summary carries
    per-seed plateaus and their standard errors.
    """
    node_list = cfg.node_list()
    n_alpha = cfg.n_alpha if cfg.n_alpha > 0 else (cfg.alpha * 1.0 if cfg.alpha > 0 else 0.512)
    records = []
    for n in node_list:
        if cfg.total_rows % n != 0:
            raise ConfigError(f"total_rows={cfg.total_rows} is not divisible by n={n}")
        matrix = build_mixing(cfg, n=n)
        metrics = spectral.compute_metrics(matrix)
        oracle = build_oracle(cfg, n)
        alpha = n_alpha / n
        per_rep = []
        for rep in range(cfg.repetitions):
            reports = optim.run(
                "gt",
                matrix,
                oracle,
                alpha,
                cfg.total_rounds,
                seed=cfg.seed + 1 + rep,
                record_every=cfg.record_every,
                metrics=metrics,
            )
            per_rep.append(reports)
        plateaus = [_plateau([r.grad_norm for r in reports]) for reports in per_rep]
        rows = _average_rows(per_rep)
        records.append(
            RunRecord(
                config=cfg.as_dict(),
                name=f"speedup_n{n}",
                rows=rows,
                summary={
                    "n": n,
                    "alpha": alpha,
                    "plateaus": plateaus,
                    "plateau_mean": float(np.mean(plateaus)),
                    "plateau_se": float(np.std(plateaus, ddof=1) / np.sqrt(len(plateaus)))
                    if len(plateaus) > 1
                    else 0.0,
                },
            )
        )
    _attach_speedup_ordering(records)
    return records


def _average_rows(per_rep):
    rows = []
    length = min(len(reports) for reports in per_rep)
    for idx in range(length):
        rows.append(
            {
                "comm_rounds": per_rep[0][idx].comm_rounds,
                "samples": per_rep[0][idx].samples,
                "grad_norm": float(np.mean([rep[idx].grad_norm for rep in per_rep])),
                "consensus_err": float(np.mean([rep[idx].consensus_error for rep in per_rep])),
                "descent_dev": float(np.mean([rep[idx].descent_deviation for rep in per_rep])),
                "objective": float(np.mean([rep[idx].objective for rep in per_rep])),
            }
        )
    return rows


def _attach_speedup_ordering(records):
    ordered = sorted(records, key=lambda r: r.summary["n"])
    gaps = []
    for small, big in zip(ordered, ordered[1:]):
        gap = small.summary["plateau_mean"] - big.summary["plateau_mean"]
        se = math.hypot(small.summary["plateau_se"], big.summary["plateau_se"])
        gaps.append(
            {
                "smaller_n": small.summary["n"],
                "larger_n": big.summary["n"],
                "gap": gap,
                "gap_se": se,
                "significant_3se": bool(gap > 3.0 * se),
            }
        )
    for record in records:
        record.summary["ordering"] = gaps


def run_mg_compare(cfg):
    """Vanilla vs multi-gossip tracking at an equal round-and-sample budget.

    The rounds list must contain 1 (the vanilla baseline) and "auto" (the
    certified round count). Unless an explicit alpha is configured, each
    entry uses the comparison step size for its round count. Aborted runs
    (small-diagonal failures) are recorded, not raised.
    """
    rounds_list = cfg.rounds_list()
    if 1 not in rounds_list or "auto" not in rounds_list:
        raise ConfigError("mg-compare needs a rounds list containing both 1 and auto")
    matrix = build_mixing(cfg)
    metrics = spectral.compute_metrics(matrix)
    resolved = []
    for entry in rounds_list:
        r = optim.recommended_rounds(metrics, cfg.n) if entry == "auto" else entry
        resolved.append((str(entry), r))
    max_rounds = max(r for _, r in resolved)
    if cfg.total_rounds < max_rounds:
        raise ConfigError(
            f"total_rounds={cfg.total_rounds} is below the largest per-iteration "
            f"round count {max_rounds}"
        )
    oracle = build_oracle(cfg, cfg.n)
    records = []
    for label, r_per_iter in resolved:
        alpha = cfg.alpha if cfg.alpha > 0 else mg_alpha_for_rounds(r_per_iter)
        finals, aborted, per_rep = [], 0, []
        for rep in range(cfg.repetitions):
            try:
                reports = optim.run(
                    "mg",
                    matrix,
                    oracle,
                    alpha,
                    cfg.total_rounds,
                    rounds=r_per_iter,
                    seed=cfg.seed + 1 + rep,
                    record_every=cfg.record_every,
                    metrics=metrics,
                )
            except RunAborted as exc:
                reports = exc.partial
                aborted += 1
            per_rep.append(reports)
            finals.append(reports[-1].objective if reports else float("inf"))
        rows = _average_rows([r for r in per_rep if r]) if any(per_rep) else []
        records.append(
            RunRecord(
                config=cfg.as_dict(),
                name=f"mgcompare_R{label}",
                rows=rows,
                summary={
                    "rounds_label": label,
                    "rounds_per_iter": r_per_iter,
                    "alpha": alpha,
                    "final_objectives": finals,
                    "final_mean": float(np.mean(finals)),
                    "aborted": aborted,
                },
            )
        )
    _attach_win_counts(records)
    return records


def _attach_win_counts(records):
    baseline = next((r for r in records if r.summary["rounds_label"] == "1"), None)
    if baseline is None:
        return
    base_finals = baseline.summary["final_objectives"]
    for record in records:
        finals = record.summary["final_objectives"]
        record.summary["wins_vs_vanilla"] = int(
            sum(1 for a, b in zip(finals, base_finals) if a <= b)
        )


# ---------------------------------------------------------------------------
# invariant suite


def _builtin_suite_topologies():
    make = topology.weights_from_indegree
    return [
        ("single", make(topology.build_exponential(1))),
        ("exp8", make(topology.build_exponential(8))),
        ("exp16", make(topology.build_exponential(16))),
        ("ring5", make(topology.build_directed_ring(5))),
        ("ring16", make(topology.build_directed_ring(16))),
        ("grid4x4", make(topology.build_grid(4, 4))),
        ("geometric16", make(topology.build_geometric(16, 0.4, seed=7))),
        ("nearest16", make(topology.build_nearest_neighbor(16, 3, seed=7))),
    ]


def _check(results, name, topo, passed, **info):
    entry = {"topology": topo, "check": name, "pass": bool(passed)}
    entry.update(info)
    results.append(entry)
    return passed


def run_invariant_suite(cfg=None):
    """Exercise every verifier and probe on the built-in topology set.

    Returns ``(ok, report)``; the report lists one entry per check with its
    measured margins. With a config whose topology kind is ``file``, checks
    that single matrix instead of the built-ins (this is how corrupted
    inputs are surfaced: validation fails and the suite fails).
    """
    results = []
    ok = True
    if cfg is not None and cfg.topo_kind == "file":
        try:
            matrices = [("file", build_mixing(cfg))]
        except (InvalidMatrixError, RowGossipError) as exc:
            results.append({"topology": "file", "check": "validate", "pass": False, "error": str(exc)})
            return False, {"ok": False, "checks": results}
    else:
        matrices = _builtin_suite_topologies()

    for name, matrix in matrices:
        n = matrix.n
        metrics = spectral.compute_metrics(matrix)
        try:
            metrics.check(matrix)
            ok &= _check(results, "metrics_invariants", name, True, beta=metrics.beta, kappa=metrics.kappa)
        except AssertionError as exc:
            ok &= _check(results, "metrics_invariants", name, False, error=str(exc))

        # geometric envelope of the power deviations
        a = matrix.weights
        a_inf = np.outer(np.ones(n), metrics.pi)
        power = a.copy()
        margin = np.inf
        envelope_ok = True
        for k in range(1, 31):
            dev = spectral.spectral_norm(power - a_inf)
            bound = math.sqrt(metrics.kappa) * metrics.beta**k
            envelope_ok &= dev <= bound * (1 + defaults.INEQ_SLACK) + 1e-15
            margin = min(margin, bound - dev)
            power = power @ a
        ok &= _check(results, "power_decay_envelope", name, envelope_ok, min_margin=margin)

        rng = np.random.default_rng(10_000 + n)
        deltas = [rng.standard_normal((n, 3)) for _ in range(20)]
        rolling = spectral.verify_rolling_sum(matrix, deltas, metrics=metrics)
        ok &= _check(
            results, "rolling_sum", name, rolling["holds"], lhs=rolling["lhs"], rhs=rolling["rhs"]
        )

        diag_report = spectral.verify_diag_convergence(matrix, 20, metrics=metrics)
        ok &= _check(results, "diag_convergence", name, diag_report["holds"])

        threshold = spectral.diag_floor_threshold(metrics.beta, metrics.kappa, n)
        floor = spectral.check_diag_floor(matrix, max(threshold, 1), metrics=metrics)
        ok &= _check(
            results, "diag_floor", name, floor["holds"], min_diag=floor["min_diag"], bound=floor["bound"]
        )

        if n > 1:
            mix_rounds = min(5000, max(60, math.ceil(math.log(1e-10) / math.log(max(metrics.beta, 1e-6)))))
            z = np.random.default_rng(20_000 + n).standard_normal((n, 3))
            averaged = gossip.pull_diag_average(matrix, z, mix_rounds)
            err = np.linalg.norm(averaged - z.mean(axis=0)[None, :]) / np.linalg.norm(z)
            ok &= _check(results, "pull_diag_average", name, err <= 1e-8, rel_error=err, rounds=mix_rounds)

        oracle = problems.noisy(problems.make_quadratic(n, 4, 1.0, seed=30_000 + n), 0.5)
        try:
            reports = optim.run(
                "gt",
                matrix,
                oracle,
                alpha=0.01 / n,
                total_rounds=60,
                seed=40_000 + n,
                probes=True,
                record_every=1,
                metrics=metrics,
            )
            worst_centroid = max(r.centroid_residual for r in reports)
            worst_tracker = max(r.tracker_residual for r in reports)
            ok &= _check(
                results,
                "optimizer_probes",
                name,
                True,
                centroid_residual=worst_centroid,
                tracker_residual=worst_tracker,
            )
        except (ProbeError, RunAborted) as exc:
            ok &= _check(results, "optimizer_probes", name, False, error=str(exc))

    # the validator itself must reject a corrupted matrix
    bad = topology.weights_from_indegree(topology.build_exponential(8)).weights.copy()
    bad[0, 0] += 0.1
    try:
        topology.MixingMatrix(bad)
        ok &= _check(results, "validator_rejects_corruption", "exp8", False)
    except InvalidMatrixError:
        ok &= _check(results, "validator_rejects_corruption", "exp8", True)

    return bool(ok), {"ok": bool(ok), "checks": results}
