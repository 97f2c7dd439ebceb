"""Experiment orchestration: seeded runs, ensembles, sweeps and CSV/JSON
persistence.

Outputs are deterministic: per-trajectory seeds are derived from the
master seed by stream index, trajectory results are reduced in stream
order regardless of scheduling, and files are written atomically.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import __version__
from .circuits import CircuitConfig, evolve
from .observables import (
    TwoPhaseFit,
    numerical_rank,
    otoc,
    purity,
    purity_p,
    reduced_spectrum,
    stationary_purities,
    two_phase_fit,
)
from .statevec import Seed, random_product_state

SCHEMA_VERSION = 1

DEFAULT_EIGENSOLVE_CAP = 4096
DEFAULT_MEMORY_BUDGET = 4 << 30  # bytes of statevector storage in flight
MAX_N_PURITY = 24
MAX_N_SPECTRUM = 20


class ValidationError(ValueError):
    """Bad configuration or arguments; CLI exit code 1."""


class ResourceRefusal(RuntimeError):
    """Run would exceed the configured memory/size budget; exit code 2."""


class NumericalFailure(RuntimeError):
    """Solver or fit failure; exit code 3."""


@dataclass
class ExperimentConfig:
    circuit: CircuitConfig
    t_max: int
    observables: dict
    num_states: int = 1
    master_seed: int = 0
    out_path: Optional[str] = None
    out_format: str = "csv"
    threads: int = 1
    spectrum_k: int = 8
    spectrum_per_state: bool = False
    eigensolve_cap: int = DEFAULT_EIGENSOLVE_CAP
    memory_budget: int = DEFAULT_MEMORY_BUDGET

    KNOWN_OBSERVABLES = ("purity", "purity_orders", "spectrum", "rank", "otoc", "fit")

    def __post_init__(self):
        if self.t_max < 0:
            raise ValidationError("t_max must be non-negative")
        if self.num_states < 1:
            raise ValidationError("num_states must be >= 1")
        if self.out_format not in ("csv", "json"):
            raise ValidationError(f"unknown output format {self.out_format!r}")
        if not self.observables:
            raise ValidationError("at least one observable must be requested")
        unknown = set(self.observables) - set(self.KNOWN_OBSERVABLES)
        if unknown:
            raise ValidationError(f"unknown observables: {sorted(unknown)}")
        orders = self.observables.get("purity_orders", [])
        if any(p < 2 for p in orders):
            raise ValidationError("purity orders must be >= 2")
        n = self.circuit.n
        if self._needs_spectrum():
            if 1 << (n // 2) > self.eigensolve_cap:
                raise ValidationError(
                    f"spectrum requested but 2^(n/2) exceeds the eigensolve "
                    f"cap {self.eigensolve_cap}"
                )
            if n > MAX_N_SPECTRUM:
                raise ValidationError(
                    f"n={n} above the desk-scale limit {MAX_N_SPECTRUM} for "
                    "spectrum runs"
                )
        elif n > MAX_N_PURITY:
            raise ValidationError(
                f"n={n} above the desk-scale limit {MAX_N_PURITY}"
            )

    def _needs_spectrum(self) -> bool:
        obs = self.observables
        return bool(
            obs.get("spectrum")
            or obs.get("rank")
            or [p for p in obs.get("purity_orders", []) if p > 2]
        )

    def check_memory(self) -> None:
        in_flight = max(1, min(self.threads, self.num_states))
        per_state = (1 << self.circuit.n) * 16
        if "otoc" in self.observables:
            per_state *= 4  # forward/backward working vectors
        need = per_state * in_flight
        if need > self.memory_budget:
            raise ResourceRefusal(
                f"run needs ~{need >> 20} MiB of statevectors, budget is "
                f"{self.memory_budget >> 20} MiB; lower n, threads or raise "
                "the budget"
            )

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "circuit": self.circuit.to_dict(),
            "t_max": self.t_max,
            "observables": self.observables,
            "ensemble": {"num_states": self.num_states,
                         "master_seed": self.master_seed},
            "output": {"path": self.out_path, "format": self.out_format},
            "spectrum_k": self.spectrum_k,
            "spectrum_per_state": self.spectrum_per_state,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        try:
            version = d.get("schema_version", SCHEMA_VERSION)
            if version != SCHEMA_VERSION:
                raise ValidationError(f"unsupported schema version {version}")
            ens = d.get("ensemble", {})
            out = d.get("output", {})
            return cls(
                circuit=CircuitConfig.from_dict(d["circuit"]),
                t_max=int(d["t_max"]),
                observables=dict(d.get("observables", {})),
                num_states=int(ens.get("num_states", 1)),
                master_seed=int(ens.get("master_seed", 0)),
                out_path=out.get("path"),
                out_format=out.get("format", "csv"),
                threads=int(d.get("threads", 1)),
                spectrum_k=int(d.get("spectrum_k", 8)),
                spectrum_per_state=bool(d.get("spectrum_per_state", False)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"bad experiment config: {exc}") from exc

    @classmethod
    def from_yaml(cls, path: str | Path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(yaml.safe_load(fh))

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class RunRecord:
    config: ExperimentConfig
    columns: list
    rows: np.ndarray  # shape (num_times, num_columns)
    spectra_rows: Optional[np.ndarray] = None  # (state, t, lambda_1..K)
    fit: Optional[TwoPhaseFit] = None
    wall_clock: float = 0.0
    version: str = __version__

    @property
    def config_hash(self) -> str:
        return self.config.config_hash()

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.columns.index(name)]


def _trajectory(config: ExperimentConfig, stream_id: int) -> dict:
    """Evolve one trajectory and collect per-time observable arrays."""
    obs = config.observables
    want_purity = "purity" in obs or "fit" in obs
    orders = [p for p in obs.get("purity_orders", []) if p != 2]
    want_orders2 = 2 in obs.get("purity_orders", [])
    want_purity = want_purity or want_orders2
    want_spec = bool(obs.get("spectrum"))
    want_rank = bool(obs.get("rank"))
    nt = config.t_max + 1

    out = {}
    if want_purity:
        out["I2"] = np.empty(nt)
    for p in orders:
        out[f"I{p}"] = np.empty(nt)
    if want_rank:
        out["rank"] = np.empty(nt)
    if want_spec:
        out["lambda"] = np.empty((nt, config.spectrum_k))

    seed = Seed(config.master_seed, stream_id)
    state = random_product_state(config.circuit.n, seed)
    rng = seed.rng(1)  # kicks, RandomKicked family only

    def record(t, st):
        if want_purity:
            out["I2"][t] = purity(st)
        if orders or want_rank or want_spec:
            spec = reduced_spectrum(st, t)
            for p in orders:
                out[f"I{p}"][t] = purity_p(spec, p)
            if want_rank:
                out["rank"][t] = numerical_rank(spec)
            if want_spec:
                out["lambda"][t] = spec.eigenvalues[: config.spectrum_k]

    record(0, state)
    evolve(state, config.circuit, config.t_max, rng=rng, callback=record)
    return out


def run(config: ExperimentConfig) -> RunRecord:
    """Execute one experiment and (optionally) persist it."""
    config.check_memory()
    start = time.perf_counter()
    obs = config.observables

    workers = max(1, min(config.threads, config.num_states))
    if workers == 1:
        per_traj = [_trajectory(config, s) for s in range(config.num_states)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_traj = list(
                pool.map(lambda s: _trajectory(config, s), range(config.num_states))
            )

    times = np.arange(config.t_max + 1)
    columns = ["t"]
    cols = [times.astype(float)]
    want_std = config.num_states > 1 and ("purity" in obs or "fit" in obs
                                          or obs.get("purity_orders"))
    i2_std = None
    for key in ("I2", "I3", "I4", "I5", "I6", "I7", "I8"):
        if per_traj and key in per_traj[0]:
            stack = np.stack([tr[key] for tr in per_traj])
            columns.append(key)
            cols.append(stack.mean(axis=0))
            if key == "I2" and want_std:
                i2_std = stack.std(axis=0, ddof=1)
    if i2_std is not None:
        columns.append("I2_std")
        cols.append(i2_std)
    if per_traj and "rank" in per_traj[0]:
        stack = np.stack([tr["rank"] for tr in per_traj])
        columns.append("rank")
        cols.append(stack.mean(axis=0))
    spectra_rows = None
    if per_traj and "lambda" in per_traj[0]:
        stack = np.stack([tr["lambda"] for tr in per_traj])
        for k in range(config.spectrum_k):
            columns.append(f"lambda_{k + 1}")
            cols.append(stack[:, :, k].mean(axis=0))
        if config.spectrum_per_state:
            rows = []
            for s, tr in enumerate(per_traj):
                for t in range(config.t_max + 1):
                    rows.append([s, t, *tr["lambda"][t]])
            spectra_rows = np.asarray(rows)

    if "otoc" in obs:
        spec = obs["otoc"]
        series = otoc(
            config.circuit,
            j=int(spec["j"]),
            alpha=str(spec.get("alpha", "x")),
            t_max=config.t_max,
            num_states=config.num_states,
            seed=Seed(config.master_seed, 0),
            perturb_site=int(spec.get("perturb_site", 1)),
        )
        columns.append(f"otoc_{series.j}_{series.alpha}")
        cols.append(series.values)

    record = RunRecord(
        config=config,
        columns=columns,
        rows=np.column_stack(cols),
        spectra_rows=spectra_rows,
    )

    if "fit" in obs:
        record.fit = _fit_from_record(record, **_fit_options(obs))

    record.wall_clock = time.perf_counter() - start
    if config.out_path:
        write_record(record)
    return record


def _fit_options(obs: dict) -> dict:
    fit = obs.get("fit")
    return dict(fit) if isinstance(fit, dict) else {}


def _fit_from_record(record: RunRecord, **kwargs) -> TwoPhaseFit:
    config = record.config
    n_a = 1 << (config.circuit.n // 2)
    y_inf = stationary_purities(n_a)[0]
    try:
        return two_phase_fit(
            record.column("t").astype(int), record.column("I2"), y_inf, **kwargs
        )
    except ValueError as exc:
        raise NumericalFailure(f"two-phase fit failed: {exc}") from exc


def fit_report(record: RunRecord, **fit_kwargs) -> dict:
    """Two-phase fit summary with reference comparisons."""
    fit = record.fit if record.fit is not None and not fit_kwargs else None
    if fit is None:
        fit = _fit_from_record(record, **fit_kwargs)
    config = record.config
    n_a = 1 << (config.circuit.n // 2)
    report = {
        "t_c": fit.t_c,
        "r_I": fit.r_one,
        "r_II": fit.r_two,
        "decay_factor_I": float(np.exp(-fit.r_one)),
        "decay_factor_II": float(np.exp(-fit.r_two)),
        "fit_window": [fit.t_min, fit.t_max],
        "rss": fit.rss,
        "degenerate": fit.degenerate,
        "I_inf": stationary_purities(n_a)[0],
    }
    if config.circuit.kind in ("S", "BW"):
        # fastest possible decay factor = 1/(rank growth per step),
        # from the pre-saturation rank law
        growth = {"S": {"OBC": 2, "PBC": 4}, "BW": {"OBC": 4, "PBC": 16}}
        report["max_rate_decay_factor"] = (
            1.0 / growth[config.circuit.kind][config.circuit.boundary]
        )
    return report


def format_fit_report(report: dict) -> str:
    lines = [
        f"breakpoint t_c        : {report['t_c']:g}",
        f"phase I  rate r_I     : {report['r_I']:.6f}  "
        f"(decay factor {report['decay_factor_I']:.4f})",
        f"phase II rate r_II    : {report['r_II']:.6f}  "
        f"(decay factor {report['decay_factor_II']:.4f})",
        f"fit window            : t in {report['fit_window']}",
        f"residual sum of sq.   : {report['rss']:.3e}",
        f"stationary purity I_inf: {report['I_inf']:.6e}",
    ]
    if "max_rate_decay_factor" in report:
        lines.append(
            f"max-rate decay factor : {report['max_rate_decay_factor']:.4f}"
        )
    if report["degenerate"]:
        lines.append("note: single-phase (degenerate) fit")
    return "\n".join(lines)


def _format_value(v: float) -> str:
    if float(v).is_integer() and abs(v) < 1e16:
        return str(int(v))
    return f"{v:.17g}"


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(columns: list, rows: np.ndarray) -> str:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_format_value(v) for v in row))
    return "\n".join(lines) + "\n"


def write_record(record: RunRecord) -> Path:
    path = Path(record.config.out_path)
    if record.config.out_format == "json":
        payload = {
            "config_hash": record.config_hash,
            "version": record.version,
            "columns": record.columns,
            "rows": [[float(v) for v in row] for row in record.rows],
        }
        _atomic_write(path, json.dumps(payload, indent=1, sort_keys=True) + "\n")
    else:
        _atomic_write(path, _csv_text(record.columns, record.rows))
    if record.spectra_rows is not None:
        k = record.spectra_rows.shape[1] - 2
        cols = ["state", "t"] + [f"lambda_{i + 1}" for i in range(k)]
        _atomic_write(
            path.with_name(path.stem + "_spectra.csv"),
            _csv_text(cols, record.spectra_rows),
        )
    if record.fit is not None:
        _atomic_write(
            path.with_name(path.stem + "_fit.json"),
            json.dumps(fit_report(record), indent=1, sort_keys=True) + "\n",
        )
    return path


def read_csv(path: str | Path) -> tuple[list, np.ndarray]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = np.loadtxt(fh, delimiter=",", ndmin=2)
    return header, rows


def sweep(configs: list[ExperimentConfig], parallelism: int = 1) -> list:
    """Run a list of experiments; failures are isolated per entry.

    Returns a list of RunRecord or Exception, positionally matching the
    input. Outputs are independent of scheduling order because every
    experiment derives its randomness from its own config.
    """
    if not configs:
        raise ValidationError("sweep needs at least one experiment")

    def safe_run(cfg):
        try:
            return run(cfg)
        except Exception as exc:  # isolate individual failures
            return exc

    if parallelism <= 1:
        return [safe_run(c) for c in configs]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(safe_run, configs))


def expand_sweep(doc: dict) -> list[ExperimentConfig]:
    """Expand a sweep document into experiment configs.

    Either an explicit `experiments:` list (each entry merged over an
    optional `base:`), or `base:` plus `grid:` mapping dotted config
    paths to value lists (cross product, keys in sorted order). Output
    paths may contain {placeholders} named after the grid keys' last
    path component.
    """
    base = doc.get("base", {})
    if "experiments" in doc:
        merged = [_deep_merge(base, e) for e in doc["experiments"]]
        return [ExperimentConfig.from_dict(m) for m in merged]
    grid = doc.get("grid")
    if not grid:
        raise ValidationError("sweep document needs 'experiments' or 'grid'")
    keys = sorted(grid)
    combos = [{}]
    for key in keys:
        combos = [dict(c, **{key: v}) for c in combos for v in grid[key]]
    configs = []
    for combo in combos:
        d = _deep_merge(base, {})
        for dotted, value in combo.items():
            _set_dotted(d, dotted, value)
        subs = {k.rsplit(".", 1)[-1]: v for k, v in combo.items()}
        out = d.get("output", {}).get("path")
        if out:
            d["output"]["path"] = out.format(**subs)
        configs.append(ExperimentConfig.from_dict(d))
    return configs


def _deep_merge(base: dict, override: dict) -> dict:
    out = {k: copy.deepcopy(v) for k, v in base.items()}
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _set_dotted(d: dict, dotted: str, value) -> None:
    parts = dotted.split(".")
    for p in parts[:-1]:
        d = d.setdefault(p, {})
    d[parts[-1]] = value
