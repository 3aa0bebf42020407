"""Simulation study driver: repeated simulate/estimate cycles, RMSE
accumulation against canonicalized truth, and trace autocorrelations.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .cutpoints import estimate_cuts
from .io import InputError
from .model import CutPointSet, ModelParams, canonicalize, simulate
from .reconstruction import fit_frobenius, reconstruct
from .stem import StemConfig, run_stem

__all__ = ["StudyConfig", "RmseReport", "run_study", "autocorrelation", "load_study_config"]

_METHODS = ("cr", "stem")


@dataclass(frozen=True)
class StudyConfig:
    """Design of a simulation study: truth, panel shape, replication, and
    estimator settings."""

    params: ModelParams
    cuts: CutPointSet
    n: int
    T: int
    replicates: int
    methods: tuple[str, ...] = ("cr",)
    stem_iterations: int = 300
    stem_burn_in: int | None = None
    stem_gibbs_sweeps: int = 10
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.params.num_items != self.cuts.num_items:
            raise ValueError("params and cuts cover different item counts")
        if self.n < 1 or self.T < 2:
            raise ValueError("need n >= 1 and T >= 2")
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        methods = tuple(self.methods)
        if not methods or any(m not in _METHODS for m in methods):
            raise ValueError(f"methods must be a nonempty subset of {_METHODS}")
        object.__setattr__(self, "methods", methods)
        if self.threads < 1:
            raise ValueError("threads must be at least 1")

    @property
    def num_items(self) -> int:
        return self.params.num_items

    @property
    def num_categories(self) -> int:
        return self.cuts.num_categories


@dataclass(frozen=True)
class RmseReport:
    """Per-estimator RMSEs from a study, on the loading scale.

    sigma_rmse / tau_rmse map method name to a length-J vector; cut_rmse
    maps "mm" or "stem" to a (J, C) matrix. failures counts replicates
    excluded because estimation raised.
    """

    sigma_rmse: dict
    tau_rmse: dict
    cut_rmse: dict
    replicates: int
    failures: int
    wall_time: float
    failure_messages: tuple[str, ...] = field(default_factory=tuple)

    def rows(self):
        """Yield (method, parameter, rmse) rows for CSV export."""
        for method, vec in self.sigma_rmse.items():
            for j, value in enumerate(vec):
                yield method, f"sigma_{j + 1}", value
        for method, vec in self.tau_rmse.items():
            for j, value in enumerate(vec):
                yield method, f"tau_{j + 1}", value
        for method, mat in self.cut_rmse.items():
            for j in range(mat.shape[0]):
                for k in range(mat.shape[1]):
                    yield method, f"cut_{j + 1}_{k + 1}", mat[j, k]

    def format_table(self) -> str:
        used = int(self.replicates) - int(self.failures)
        lines = [
            f"RMSE over {used} replicates"
            f" ({self.failures} failures, {self.wall_time:.1f} s)"
        ]
        loading_methods = sorted(self.sigma_rmse)
        if loading_methods:
            header = "parameter  " + "  ".join(f"{m:>10}" for m in loading_methods)
            lines.append(header)
            J = len(next(iter(self.sigma_rmse.values())))
            for j in range(J):
                cells = "  ".join(f"{self.sigma_rmse[m][j]:>10.4f}" for m in loading_methods)
                lines.append(f"sigma_{j + 1:<4}  {cells}")
            for j in range(J):
                cells = "  ".join(f"{self.tau_rmse[m][j]:>10.4f}" for m in loading_methods)
                lines.append(f"tau_{j + 1:<6}  {cells}")
        cut_methods = sorted(self.cut_rmse)
        if cut_methods:
            header = "parameter  " + "  ".join(f"{m:>10}" for m in cut_methods)
            lines.append(header)
            J, C = next(iter(self.cut_rmse.values())).shape
            for j in range(J):
                for k in range(C):
                    cells = "  ".join(f"{self.cut_rmse[m][j, k]:>10.4f}" for m in cut_methods)
                    lines.append(f"cut_{j + 1}_{k + 1:<4}  {cells}")
        return "\n".join(lines)


def _replicate_errors(config: StudyConfig, index: int) -> dict[str, np.ndarray]:
    seed = config.seed + index
    truth = canonicalize(config.params)
    _, data = simulate(config.params, config.cuts, config.n, config.T, seed)
    est = estimate_cuts(data)
    out = {"mm_cut": est.pooled - config.cuts.cuts}
    fit = fit_frobenius(
        reconstruct(data, est), config.num_items, config.T
    )
    if "cr" in config.methods:
        cr = canonicalize(fit.params)
        out["cr_sigma"] = cr.sigma - truth.sigma
        out["cr_tau"] = cr.tau - truth.tau
    if "stem" in config.methods:
        stem_cfg = StemConfig(
            iterations=config.stem_iterations,
            seed=seed,
            burn_in=config.stem_burn_in,
            gibbs_sweeps=config.stem_gibbs_sweeps,
            init_params=fit.params,
            init_cuts=est.as_cutpoints(),
        )
        chain = run_stem(data, stem_cfg)
        stem = canonicalize(chain.final_params)
        out["stem_sigma"] = stem.sigma - truth.sigma
        out["stem_tau"] = stem.tau - truth.tau
        out["stem_cut"] = chain.final_cuts.cuts - config.cuts.cuts
    return out


def run_study(config: StudyConfig) -> RmseReport:
    """Run the full simulation study.

    Parameters
    ----------
    config : StudyConfig

    Returns
    -------
    RmseReport
        RMSEs pool the replicates that completed; failed replicates are
        excluded and counted. Replicate r draws its data from seed
        `config.seed + r`, so studies are reproducible and partitionable
        regardless of thread count.
    """
    start = time.perf_counter()
    errors: list[dict[str, np.ndarray] | None] = [None] * config.replicates
    messages = []

    def worker(m: int):
        try:
            return _replicate_errors(config, m)
        except Exception as exc:  # record and exclude the replicate
            return f"replicate {m}: {exc}"

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(worker, range(config.replicates)))
    else:
        results = [worker(m) for m in range(config.replicates)]
    for m, res in enumerate(results):
        if isinstance(res, str):
            messages.append(res)
        else:
            errors[m] = res

    completed = [e for e in errors if e is not None]
    failures = config.replicates - len(completed)

    def rmse(key: str) -> np.ndarray:
        stacked = np.stack([e[key] for e in completed])
        return np.sqrt(np.mean(stacked**2, axis=0))

    sigma_rmse = {}
    tau_rmse = {}
    cut_rmse = {}
    if completed:
        cut_rmse["mm"] = rmse("mm_cut")
        if "cr" in config.methods:
            sigma_rmse["cr"] = rmse("cr_sigma")
            tau_rmse["cr"] = rmse("cr_tau")
        if "stem" in config.methods:
            sigma_rmse["stem"] = rmse("stem_sigma")
            tau_rmse["stem"] = rmse("stem_tau")
            cut_rmse["stem"] = rmse("stem_cut")
    return RmseReport(
        sigma_rmse,
        tau_rmse,
        cut_rmse,
        config.replicates,
        failures,
        time.perf_counter() - start,
        tuple(messages),
    )


def autocorrelation(series, max_lag: int) -> np.ndarray:
    """Sample autocorrelations of a series for lags 0..max_lag.

    Lag 0 is 1 by definition; a constant series has undefined
    autocorrelation and yields NaN beyond lag 0.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise ValueError("series must be 1-D")
    if not 0 <= max_lag < x.shape[0]:
        raise ValueError("need 0 <= max_lag < len(series)")
    out = np.empty(max_lag + 1)
    out[0] = 1.0
    centered = x - x.mean()
    denom = float(centered @ centered)
    if denom == 0.0:
        out[1:] = np.nan
        return out
    for k in range(1, max_lag + 1):
        out[k] = float(centered[:-k] @ centered[k:]) / denom
    return out


def load_study_config(path, **overrides) -> StudyConfig:
    """Read a study configuration document.

    The JSON object carries `sigma`, `tau`, `cuts`, `n`, `T`,
    `replicates`, and optionally `methods`, `seed`, `num_categories`, and
    a `stem` object with `iterations`, `burn_in`, `gibbs_sweeps`.
    Keyword overrides (values not None) replace the file's settings.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read study config {path}: {exc}") from None
    try:
        params = ModelParams(
            np.asarray(doc["sigma"], dtype=float), np.asarray(doc["tau"], dtype=float)
        )
        cuts = CutPointSet(np.asarray(doc["cuts"], dtype=float))
        stem_doc = doc.get("stem", {})
        config = StudyConfig(
            params=params,
            cuts=cuts,
            n=int(doc["n"]),
            T=int(doc["T"]),
            replicates=int(doc.get("replicates", 1)),
            methods=tuple(doc.get("methods", ["cr"])),
            stem_iterations=int(stem_doc.get("iterations", 300)),
            stem_burn_in=(
                int(stem_doc["burn_in"]) if "burn_in" in stem_doc else None
            ),
            stem_gibbs_sweeps=int(stem_doc.get("gibbs_sweeps", 10)),
            seed=int(doc.get("seed", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"invalid study config: {exc}") from None
    declared = doc.get("num_categories")
    if declared is not None and declared != cuts.num_categories:
        raise InputError(
            f"num_categories={declared} disagrees with {cuts.cuts.shape[1]} cut points"
        )
    declared_j = doc.get("J")
    if declared_j is not None and declared_j != params.num_items:
        raise InputError(f"J={declared_j} disagrees with {params.num_items} loadings")
    applied = {k: v for k, v in overrides.items() if v is not None}
    if applied:
        try:
            config = replace(config, **applied)
        except (TypeError, ValueError) as exc:
            raise InputError(f"invalid study config override: {exc}") from None
    return config
