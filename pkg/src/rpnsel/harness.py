"""Seeded experiment sweeps and their CSV/JSON output.

Every random draw in a sweep is derived from ``(seed, n_users, ...)`` with
:class:`numpy.random.SeedSequence`, so a record does not depend on which
other grid points were run or in which order. Selection algorithms see the
(possibly degraded) CSI; reported rates are always computed on the true,
normalised channel.

Config files are JSON objects whose keys are the :class:`ExperimentConfig`
field names; ``scene`` is an object of :class:`~rpnsel.channel.SceneConfig`
fields.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._validation import ContractError, db_to_linear
from .baselines import (
    EXHAUSTIVE_LIMIT,
    exhaustive_select,
    greedy_select,
    nearest_neighbours,
    nn_select,
    random_select,
)
from .channel import (
    SceneConfig,
    generate_channel,
    normalize_channel,
    perturb_csi,
    subsample_subcarriers,
)
from .flops import COST_BASES, FlopLedger
from .metrics import compare_flops, measure_scaling
from .numerics import subset_capacity, subset_zf_rate
from .rpn import GUARD_MODES, race
from .topology import build_toroid, load_topology

OUTPUT_DIR_ENV = "RPNSEL_OUTPUT_DIR"

ALGORITHMS = ("rpn", "greedy", "random", "nn", "exhaustive")

RECORD_FIELDS = (
    "algorithm",
    "seed",
    "n_users",
    "n_selected",
    "n_active",
    "capacity",
    "zf_rate",
    "zf_feasible",
    "passes",
    "flops",
    "converged",
    "csi_error",
    "subcarrier_fraction",
)


class ConfigError(ContractError):
    """Raised for malformed or infeasible experiment configurations."""


@dataclass
class ExperimentConfig:
    scene: SceneConfig = field(default_factory=SceneConfig)
    rho_db: float = -5.0
    users: list = field(default_factory=lambda: [4, 8, 12, 16])
    tokens: object = "auto"
    algorithms: list = field(default_factory=lambda: ["rpn", "greedy", "random"])
    k_race: int | None = None
    max_passes: int = 20
    guard_mode: str = "shared"
    guard_scaling: str = "local"
    nn_iterations: int = 50
    nn_neighbours: int | None = None
    topology_shape: tuple = (4, 16)
    topology_file: str | None = None
    csi_errors: list = field(default_factory=lambda: [0.0, 0.1, 0.2, 0.3, 0.4, 0.5])
    subcarrier_fractions: list = field(
        default_factory=lambda: [1 / 64, 1 / 8, 1 / 4, 1 / 2, 1.0]
    )
    seeds: list = field(default_factory=lambda: list(range(20)))
    flops_sizes: list = field(default_factory=lambda: [16, 64, 256])
    flops_counts: list = field(default_factory=lambda: list(range(4, 65, 4)))
    flops_users: int = 16
    flops_scaling_users: int = 4
    flops_basis: str = "occupied"
    flops_scaling_basis: str = "neighbourhood"
    flops_seeds: list = field(default_factory=lambda: [0, 1])
    output: str | None = None

    @property
    def rho(self):
        return db_to_linear(self.rho_db)

    def tokens_for(self, n_users):
        """Selected-antenna counts for ``n_users`` users."""
        if self.tokens == "auto":
            n_tx = self.scene.n_tx
            grid = [n_users] + [m for m in range(16, n_tx, 16) if m > n_users]
            return [m for m in grid if m <= n_tx]
        return list(self.tokens)

    def k_for(self, n_users):
        if self.k_race is not None:
            return self.k_race
        return 5 if n_users <= math.sqrt(self.scene.n_tx) else 1

    def topology(self):
        if self.topology_file:
            return load_topology(self.topology_file)
        rows, cols = self.topology_shape
        return build_toroid(rows, cols)

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        scene = data.pop("scene", {})
        scene_known = {f.name for f in dataclasses.fields(SceneConfig)}
        bad = sorted(set(scene) - scene_known)
        if bad:
            raise ConfigError(f"unknown scene keys: {', '.join(bad)}")
        for key in ("area", "tx_positions", "user_positions"):
            if scene.get(key) is not None:
                scene[key] = tuple(map(tuple, scene[key])) if key != "area" else tuple(scene[key])
        if "topology_shape" in data:
            data["topology_shape"] = tuple(data["topology_shape"])
        try:
            return cls(scene=SceneConfig(**scene), **data)
        except (TypeError, ContractError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc

    def to_dict(self):
        out = dataclasses.asdict(self)
        out["scene"] = dataclasses.asdict(self.scene)
        return out


def load_config(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return ExperimentConfig.from_dict(data)


def validate_config(cfg, perturbations=((0.0, 1.0),)):
    """Raise :class:`ConfigError` listing every problem with ``cfg``."""
    problems = []
    if not cfg.users or not cfg.seeds:
        problems.append("users and seeds grids must be non-empty")
    if len(set(cfg.seeds)) != len(cfg.seeds):
        problems.append("seeds must be distinct")
    if any(int(s) < 0 for s in cfg.seeds):
        problems.append("seeds must be non-negative")
    if not math.isfinite(cfg.rho_db):
        problems.append("rho_db must be finite")
    unknown = [a for a in cfg.algorithms if a not in ALGORITHMS]
    if unknown or not cfg.algorithms:
        problems.append(f"algorithms must be a non-empty subset of {ALGORITHMS}")
    if cfg.k_race is not None and cfg.k_race < 1:
        problems.append("k_race must be >= 1")
    if cfg.max_passes < 1 or cfg.nn_iterations < 1:
        problems.append("max_passes and nn_iterations must be >= 1")
    if cfg.guard_mode not in GUARD_MODES:
        problems.append(f"guard_mode must be one of {GUARD_MODES}")
    if cfg.guard_scaling not in ("local", "global"):
        problems.append("guard_scaling must be 'local' or 'global'")
    if cfg.flops_basis not in COST_BASES or cfg.flops_scaling_basis not in COST_BASES:
        problems.append(f"flops bases must be one of {COST_BASES}")
    if cfg.tokens != "auto" and (isinstance(cfg.tokens, str) or not cfg.tokens):
        problems.append("tokens must be 'auto' or a non-empty list")
    n_tx = cfg.scene.n_tx
    for u in cfg.users:
        if u < 1:
            problems.append(f"users entry {u} must be >= 1")
            continue
        try:
            dataclasses.replace(cfg.scene, n_users=u)
        except ContractError as exc:
            problems.append(f"scene with {u} users: {exc}")
        grid = cfg.tokens_for(u)
        if not grid:
            problems.append(f"no token counts for {u} users")
        for n in grid:
            if not 1 <= n <= n_tx:
                problems.append(f"token count {n} outside 1..{n_tx}")
            elif "exhaustive" in cfg.algorithms and math.comb(n_tx, n) > EXHAUSTIVE_LIMIT:
                problems.append(
                    f"exhaustive search over C({n_tx}, {n}) exceeds {EXHAUSTIVE_LIMIT} subsets"
                )
    for eps, frac in perturbations:
        if not 0 <= eps <= 1 or not 0 < frac <= 1:
            problems.append(f"bad perturbation (csi_error={eps}, fraction={frac})")
    try:
        top = cfg.topology()
        if top.n_places != n_tx:
            problems.append(f"topology has {top.n_places} places but scene has {n_tx} antennas")
    except (ValueError, OSError) as exc:
        problems.append(f"topology: {exc}")
    if problems:
        raise ConfigError("; ".join(dict.fromkeys(problems)))


@dataclass(frozen=True)
class ResultRecord:
    algorithm: str
    seed: int
    n_users: int
    n_selected: int
    n_active: int
    capacity: float
    zf_rate: float
    zf_feasible: bool
    passes: int
    flops: int
    converged: bool
    csi_error: float
    subcarrier_fraction: float

    def sort_key(self):
        return (
            self.algorithm,
            self.n_users,
            self.n_selected,
            self.csi_error,
            self.subcarrier_fraction,
            self.seed,
        )


def _derive(*keys):
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


def _evaluate(H_true, antennas, rho):
    coeffs = H_true.coeffs
    cap = subset_capacity(coeffs, antennas, rho)
    rate, feasible = subset_zf_rate(coeffs, antennas, rho)
    return cap, rate, feasible


def _perturbations_for_csi(cfg):
    grid = [(float(e), 1.0) for e in cfg.csi_errors]
    grid += [(0.0, float(f)) for f in cfg.subcarrier_fractions]
    return list(dict.fromkeys(grid))


def _run_point(cfg, topology, seed, n_users, perturbations):
    """All records for one (seed, n_users) channel realisation."""
    rho = cfg.rho
    scene = dataclasses.replace(cfg.scene, n_users=n_users, seed=_derive(seed, n_users, 0))
    H_true = normalize_channel(generate_channel(scene))
    records = []
    for eps, frac in perturbations:
        H_sel = perturb_csi(H_true, eps, _derive(seed, n_users, 4))
        H_sel = subsample_subcarriers(H_sel, frac, _derive(seed, n_users, 5))
        common = dict(seed=seed, n_users=n_users, csi_error=eps, subcarrier_fraction=frac)
        nn_result = None
        for n in cfg.tokens_for(n_users):
            for alg in cfg.algorithms:
                if alg == "rpn":
                    ledger = FlopLedger()
                    res = race(
                        topology, H_sel, rho, n, k=cfg.k_for(n_users),
                        seed=_derive(seed, n_users, n, 1), max_passes=cfg.max_passes,
                        guard_mode=cfg.guard_mode, guard_scaling=cfg.guard_scaling,
                        ledger=ledger,
                    )
                    flops = ledger.total()
                    passes = max(st.passes for st in res.stats)
                    converged = all(st.converged for st in res.stats)
                    cap, rate, ok = _evaluate(H_true, res.best.selected_antennas(), rho)
                    records.append(ResultRecord("rpn_best", n_selected=n, n_active=n,
                                                capacity=cap, zf_rate=rate, zf_feasible=ok,
                                                passes=passes, flops=flops,
                                                converged=converged, **common))
                    evals = [_evaluate(H_true, s.selected_antennas(), rho) for s in res.states]
                    records.append(ResultRecord(
                        "rpn_mean", n_selected=n, n_active=n,
                        capacity=float(np.mean([e[0] for e in evals])),
                        zf_rate=float(np.mean([e[1] for e in evals])),
                        zf_feasible=all(e[2] for e in evals),
                        passes=passes, flops=flops, converged=converged, **common,
                    ))
                    continue
                ledger = FlopLedger()
                passes = 0
                if alg == "greedy":
                    sel = greedy_select(H_sel, n, rho, ledger=ledger)
                    passes = n
                elif alg == "random":
                    sel = random_select(H_sel.n_tx, n, _derive(seed, n_users, n, 2))
                elif alg == "exhaustive":
                    sel = exhaustive_select(H_sel, n, rho)
                elif alg == "nn":
                    if nn_result is None:
                        neighbours = None
                        if H_true.tx_positions is not None:
                            neighbours = nearest_neighbours(H_true.tx_positions, cfg.nn_neighbours)
                        nn_result = nn_select(
                            H_sel, neighbours, cfg.nn_iterations, rho,
                            seed=_derive(seed, n_users, 3), ledger=ledger,
                        )
                    sel, stats = nn_result
                    passes = stats.iterations
                    ledger = None
                cap, rate, ok = _evaluate(H_true, sel, rho)
                flops = nn_result[1].flops if alg == "nn" else ledger.total()
                records.append(ResultRecord(alg, n_selected=n, n_active=len(sel), capacity=cap,
                                            zf_rate=rate, zf_feasible=ok, passes=passes,
                                            flops=flops, converged=True, **common))
    return records


def _run_grid(cfg, perturbations):
    validate_config(cfg, perturbations)
    topology = cfg.topology()
    records = []
    for seed in cfg.seeds:
        for n_users in cfg.users:
            records += _run_point(cfg, topology, int(seed), int(n_users), perturbations)
    return sorted(records, key=ResultRecord.sort_key)


def run_sumrate_experiment(cfg):
    """Sum-rate sweep over seeds x users x token counts on perfect CSI."""
    return _run_grid(cfg, [(0.0, 1.0)])


def run_csi_experiment(cfg):
    """Selections on degraded CSI, rates on the true channel.

    Sweeps ``csi_errors`` at full subcarrier use, then
    ``subcarrier_fractions`` at zero CSI error.
    """
    perturbations = _perturbations_for_csi(cfg)
    if perturbations == [(0.0, 1.0)]:
        raise ConfigError("csi experiment needs a non-trivial csi_errors or fraction grid")
    return _run_grid(cfg, perturbations)


@dataclass
class FlopsReport:
    table: list
    scaling: dict

    def metadata(self):
        return {
            alg: {"slope": rep.slope, "per_node_slope": rep.per_node_slope}
            for alg, rep in sorted(self.scaling.items())
        }


def run_flops_experiment(cfg, algorithms=("rpn", "nn")):
    """Fixed-size flop table plus scaling fits."""
    template = dataclasses.replace(cfg.scene, n_users=cfg.flops_users)
    table = compare_flops(
        template, counts=cfg.flops_counts, seeds=cfg.flops_seeds, rho_db=cfg.rho_db,
        k_race=cfg.k_race or 5, nn_iterations=cfg.nn_iterations,
        nn_neighbours=cfg.nn_neighbours, max_passes=cfg.max_passes, basis=cfg.flops_basis,
    )
    scaling_template = dataclasses.replace(cfg.scene, n_subcarriers=min(cfg.scene.n_subcarriers, 8))
    scaling = {}
    for alg in algorithms:
        opts = {"iterations": cfg.nn_iterations} if alg == "nn" else {}
        scaling[alg] = measure_scaling(
            alg, cfg.flops_sizes, scaling_template, seeds=cfg.flops_seeds,
            rho_db=cfg.rho_db, n_users=cfg.flops_scaling_users,
            basis=cfg.flops_scaling_basis, **opts,
        )
    return FlopsReport(table, scaling)


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    return str(value)


def rows_to_csv(rows, fields):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(fields)
    for row in rows:
        writer.writerow([_fmt(row[f]) for f in fields])
    return buf.getvalue()


def records_to_text(records, fmt="csv", metadata=None):
    rows = [dataclasses.asdict(r) for r in records]
    if fmt == "csv":
        return rows_to_csv(rows, RECORD_FIELDS)
    if fmt == "json":
        doc = {"metadata": metadata or {}, "records": rows}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    raise ConfigError(f"unknown output format {fmt!r}")


def flops_to_text(report, fmt="csv"):
    """Render a :class:`FlopsReport`; CSV returns ``(table_csv, scaling_csv)``."""
    scaling_rows = [row for alg in sorted(report.scaling) for row in report.scaling[alg].rows()]
    if fmt == "csv":
        return (
            rows_to_csv(report.table, ("n_selected", "rpn", "nn", "greedy")),
            rows_to_csv(scaling_rows, ("algorithm", "n_tx", "flops", "flops_per_node")),
        )
    if fmt == "json":
        doc = {"table": report.table, "scaling": scaling_rows, "slopes": report.metadata()}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    raise ConfigError(f"unknown output format {fmt!r}")


def resolve_output(path, default_name):
    """Apply the output-directory environment variable to ``path``."""
    base = os.environ.get(OUTPUT_DIR_ENV)
    if path is None:
        return Path(base) / default_name if base else None
    path = Path(path)
    if base and not path.is_absolute():
        return Path(base) / path
    return path
