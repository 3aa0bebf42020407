"""File formats: long CSV datasets, JSON parameter documents, trace and
report CSVs.

All CSV files are UTF-8 with LF line endings; dataset indices are
1-based. Malformed inputs raise InputError so the CLI can distinguish
bad input (exit 2) from estimation failure (exit 1).
"""

from __future__ import annotations

import csv
import json
import math

import numpy as np

from .model import CutPointSet, LikertDataset, ModelParams

__all__ = [
    "InputError",
    "write_dataset_csv",
    "read_dataset_csv",
    "write_params_json",
    "read_params_json",
    "write_fit_json",
    "write_traces_csv",
    "read_traces_csv",
    "write_acf_csv",
    "write_rmse_csv",
]

_DATA_HEADER = ["subject", "item", "time", "response"]


class InputError(ValueError):
    """Malformed or incomplete input file."""


def write_dataset_csv(data: LikertDataset, path) -> None:
    """Write responses as long-format CSV with 1-based indices."""
    resp = data.responses
    n, J, T = resp.shape
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_DATA_HEADER)
        for i in range(n):
            for j in range(J):
                for t in range(T):
                    writer.writerow([i + 1, j + 1, t + 1, resp[i, j, t]])


def read_dataset_csv(path) -> LikertDataset:
    """Read a long-format CSV into a complete panel.

    Raises
    ------
    InputError
        On a bad header, non-integer fields, out-of-range indices,
        duplicate cells, or an incomplete panel (the message lists the
        missing cells, up to ten).
    """
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise InputError(f"cannot open {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != _DATA_HEADER:
            raise InputError(
                f"expected header {','.join(_DATA_HEADER)!r}, got {header!r}"
            )
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise InputError(f"line {lineno}: expected 4 fields, got {len(row)}")
            try:
                values = [int(v) for v in row]
            except ValueError:
                raise InputError(f"line {lineno}: non-integer field in {row!r}") from None
            if any(v < 1 for v in values):
                raise InputError(f"line {lineno}: indices and responses are 1-based")
            rows.append(values)
    if not rows:
        raise InputError("dataset has no rows")
    arr = np.asarray(rows, dtype=np.int64)
    n = int(arr[:, 0].max())
    J = int(arr[:, 1].max())
    T = int(arr[:, 2].max())
    K = int(arr[:, 3].max())
    flat_idx = (arr[:, 0] - 1) * J * T + (arr[:, 1] - 1) * T + (arr[:, 2] - 1)
    uniq, counts = np.unique(flat_idx, return_counts=True)
    if np.any(counts > 1):
        first = int(uniq[counts > 1][0])
        a, rem = divmod(first, J * T)
        b, c = divmod(rem, T)
        raise InputError(f"duplicate cell subject={a + 1} item={b + 1} time={c + 1}")
    if uniq.size != n * J * T:
        missing = np.setdiff1d(np.arange(n * J * T), uniq, assume_unique=True)
        cells = [divmod(m, J * T) for m in missing[:10]]
        shown = ", ".join(
            f"(subject={a + 1}, item={rem // T + 1}, time={rem % T + 1})"
            for a, rem in cells
        )
        more = "" if missing.size <= 10 else f" and {missing.size - 10} more"
        raise InputError(f"incomplete panel; missing cells: {shown}{more}")
    resp = np.zeros(n * J * T, dtype=np.int64)
    resp[flat_idx] = arr[:, 3]
    try:
        return LikertDataset(resp.reshape(n, J, T), K)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def write_params_json(path, params: ModelParams, cuts: CutPointSet) -> None:
    doc = {
        "sigma": params.sigma.tolist(),
        "tau": params.tau.tolist(),
        "cuts": cuts.cuts.tolist(),
        "num_categories": cuts.num_categories,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def read_params_json(path) -> tuple[ModelParams, CutPointSet]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read parameter document {path}: {exc}") from None
    try:
        params = ModelParams(np.asarray(doc["sigma"], dtype=float), np.asarray(doc["tau"], dtype=float))
        cuts = CutPointSet(np.asarray(doc["cuts"], dtype=float))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"invalid parameter document: {exc}") from None
    declared = doc.get("num_categories")
    if declared is not None and declared != cuts.num_categories:
        raise InputError(
            f"num_categories={declared} disagrees with {cuts.cuts.shape[1]} cut points"
        )
    if cuts.num_items != params.num_items:
        raise InputError("sigma/tau and cuts cover different item counts")
    return params, cuts


def write_fit_json(path, sigma, tau, gamma_sq, objective, cuts=None) -> None:
    """Write estimates on the squared reporting scale; tau squares keep
    tau's sign."""
    sigma = np.asarray(sigma, dtype=float)
    tau = np.asarray(tau, dtype=float)
    doc = {
        "sigma_sq": (sigma**2).tolist(),
        "tau_sq_signed": (np.sign(tau) * tau**2).tolist(),
        "gamma_sq": np.asarray(gamma_sq, dtype=float).tolist(),
        "objective": float(objective),
    }
    if cuts is not None:
        doc["cuts"] = np.asarray(cuts, dtype=float).tolist()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _trace_names(J: int, C: int) -> list[str]:
    names = [f"sigma_{j + 1}" for j in range(J)]
    names += [f"tau_{j + 1}" for j in range(J)]
    names += [f"cut_{j + 1}_{k + 1}" for j in range(J) for k in range(C)]
    return names


def write_traces_csv(path, sigma_trace, tau_trace, cut_trace) -> None:
    """Write per-iteration parameter traces as (iteration, parameter,
    value) rows; iterations are 1-based."""
    sigma_trace = np.asarray(sigma_trace, dtype=float)
    tau_trace = np.asarray(tau_trace, dtype=float)
    cut_trace = np.asarray(cut_trace, dtype=float)
    R, J = sigma_trace.shape
    C = cut_trace.shape[2]
    names = _trace_names(J, C)
    flat = np.concatenate(
        [sigma_trace, tau_trace, cut_trace.reshape(R, J * C)], axis=1
    )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iteration", "parameter", "value"])
        for r in range(R):
            for name, value in zip(names, flat[r]):
                writer.writerow([r + 1, name, repr(float(value))])


def read_traces_csv(path) -> dict[str, np.ndarray]:
    """Read a trace CSV back into per-parameter series ordered by
    iteration."""
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise InputError(f"cannot open {path}: {exc}") from None
    series: dict[str, list[tuple[int, float]]] = {}
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["iteration", "parameter", "value"]:
            raise InputError(f"expected trace header, got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise InputError(f"line {lineno}: expected 3 fields")
            try:
                it = int(row[0])
                value = float(row[2])
            except ValueError:
                raise InputError(f"line {lineno}: bad numeric field") from None
            series.setdefault(row[1], []).append((it, value))
    if not series:
        raise InputError("trace file has no rows")
    out = {}
    for name, pairs in series.items():
        pairs.sort(key=lambda p: p[0])
        out[name] = np.asarray([v for _, v in pairs])
    return out


def write_acf_csv(path, acf_by_param: dict[str, np.ndarray]) -> None:
    """Write autocorrelations as (parameter, lag, acf); undefined values
    appear as NA."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["parameter", "lag", "acf"])
        for name in sorted(acf_by_param):
            for lag, value in enumerate(acf_by_param[name]):
                text = "NA" if math.isnan(value) else repr(float(value))
                writer.writerow([name, lag, text])


def write_rmse_csv(path, rows) -> None:
    """Write (method, parameter, rmse) rows."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["method", "parameter", "rmse"])
        for method, parameter, rmse in rows:
            writer.writerow([method, parameter, repr(float(rmse))])
