"""File formats: coefficient documents, custom system intake, CSV export.

All documents are JSON-shaped text and self-describing; every array
records the fixed ``column-major-mode1-slowest`` layout.  Numeric output
uses 17 significant digits so values round-trip exactly.  Writes are
atomic (write to a temporary file, then rename).
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .albrekht import FeedbackLaw, PolynomialSystem, QuadraticCost, ValueFunction
from .errors import ConfigError
from .kron import unvec
from .models import BenchmarkInstance
from .sim import Trajectory

LAYOUT = "column-major-mode1-slowest"


def _atomic_write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_coefficients(path: str, vf: ValueFunction, law: FeedbackLaw) -> None:
    """Write value-function and feedback coefficients as one JSON document."""
    doc = {
        "n": vf.n,
        "m": law.m,
        "max_degree": law.max_degree,
        "layout": LAYOUT,
        "value_coefficients": {
            str(k): vf.coefficients[k].tolist() for k in sorted(vf.coefficients)
        },
        "feedback_coefficients": {
            str(j): law.coefficients[j].reshape(-1).tolist()
            for j in sorted(law.coefficients)
        },
    }
    _atomic_write_text(path, json.dumps(doc))


def load_coefficients(path: str):
    """Read a coefficient document back into (ValueFunction, FeedbackLaw)."""
    with open(path) as handle:
        doc = json.load(handle)
    try:
        n = int(doc["n"])
        m = int(doc["m"])
        if doc.get("layout") != LAYOUT:
            raise ConfigError(f"unsupported layout {doc.get('layout')!r}")
        v_coeffs = {
            int(k): np.asarray(vals, dtype=float)
            for k, vals in doc["value_coefficients"].items()
        }
        k_coeffs = {
            int(j): np.asarray(vals, dtype=float).reshape(m, n ** int(j))
            for j, vals in doc["feedback_coefficients"].items()
        }
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed coefficient document: {exc}") from exc
    return (
        ValueFunction(n=n, coefficients=v_coeffs),
        FeedbackLaw(n=n, m=m, coefficients=k_coeffs),
    )


def load_custom_system(path: str) -> BenchmarkInstance:
    """Read a user-supplied regulator problem.

    The document carries ``n``, ``m``, ``p`` and flat column-major arrays
    ``A`` (n x n), ``B`` (n x m), ``N2 ... Np`` (n x n**k), ``Q``, ``R``,
    plus ``x0`` and the horizon ``T``.
    """
    with open(path) as handle:
        try:
            doc = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"custom system file is not valid JSON: {exc}") from exc

    def grab(key):
        if key not in doc:
            raise ConfigError(f"custom system file missing field {key!r}")
        return doc[key]

    try:
        n = int(grab("n"))
        m = int(grab("m"))
        p = int(grab("p"))
        if n < 1 or m < 1 or p < 1:
            raise ConfigError("n, m, p must be positive")
        A = unvec(np.asarray(grab("A"), dtype=float), n, n)
        B = unvec(np.asarray(grab("B"), dtype=float), n, m)
        N = {}
        for k in range(2, p + 1):
            key = f"N{k}"
            if key in doc:
                N[k] = unvec(np.asarray(doc[key], dtype=float), n, n**k)
        Q = unvec(np.asarray(grab("Q"), dtype=float), n, n)
        R = unvec(np.asarray(grab("R"), dtype=float), m, m)
        x0 = np.asarray(grab("x0"), dtype=float)
        T = float(grab("T"))
        system = PolynomialSystem(A=A, B=B, N=N)
        cost = QuadraticCost(Q=Q, R=R)
        return BenchmarkInstance(system=system, cost=cost, x0=x0, horizon=T,
                                 label=os.path.basename(path))
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"invalid custom system file: {exc}") from exc


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_trajectory_csv(path: str, traj: Trajectory) -> None:
    """Write ``t,x1..xn,u1..um,cost`` rows, one per sample time."""
    n = traj.states.shape[1]
    m = traj.controls.shape[1]
    header = ",".join(
        ["t"] + [f"x{i + 1}" for i in range(n)] + [f"u{i + 1}" for i in range(m)]
        + ["cost"]
    )
    lines = [header]
    for idx in range(traj.times.size):
        fields = [_fmt(traj.times[idx])]
        fields += [_fmt(v) for v in traj.states[idx]]
        fields += [_fmt(v) for v in traj.controls[idx]]
        fields.append(_fmt(traj.running_cost[idx]))
        lines.append(",".join(fields))
    _atomic_write_text(path, "\n".join(lines) + "\n")


def write_table_csv(path: str, rows) -> None:
    """Write ``degree,value_series,integrated_cost,status`` rows."""
    lines = ["degree,value_series,integrated_cost,status"]
    for row in rows:
        cost = "" if row["status"] != "completed" else _fmt(row["integrated_cost"])
        lines.append(
            f"{row['degree']},{_fmt(row['value_series'])},{cost},{row['status']}"
        )
    _atomic_write_text(path, "\n".join(lines) + "\n")
