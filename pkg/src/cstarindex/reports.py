"""Report files: deterministic JSON, eigenvalue-path CSV and optional figures."""
from __future__ import annotations

import csv
import datetime as _dt
import io
import json
import math
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1


def _clean(x):
    """Make a report JSON-safe with a stable layout."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        v = float(x)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def render_json(payload: dict, timestamp: bool = True) -> str:
    doc = {"schema_version": SCHEMA_VERSION, **payload}
    if timestamp:
        doc["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return json.dumps(_clean(doc), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_json(payload: dict, path: str | Path, timestamp: bool = True) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_json(payload, timestamp), encoding="utf-8")
    return path


def eigenpath_csv(ts: np.ndarray, path: np.ndarray) -> str:
    """Columns ``t, lambda_1, ..., lambda_n`` with each row sorted ascending."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    n = path.shape[1] if path.ndim == 2 else 0
    w.writerow(["t"] + [f"lambda_{i + 1}" for i in range(n)])
    for t, row in zip(ts, path):
        w.writerow([f"{t:.10g}"] + [f"{x:.12g}" for x in row])
    return buf.getvalue()


def write_eigenpath_csv(ts, path, out: str | Path) -> Path:
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(eigenpath_csv(np.asarray(ts), np.asarray(path)), encoding="utf-8")
    return out


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_eigenpath(ts, path, out: str | Path, title: str = "") -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    path = np.asarray(path)
    for j in range(path.shape[1] if path.ndim == 2 else 0):
        ax.plot(ts, path[:, j], lw=1)
    ax.axhline(0.0, color="k", lw=0.6, ls="--")
    ax.set_xlabel("t")
    ax.set_ylabel("eigenvalue")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return Path(out)


def plot_partial_sums(N_list, sums, out: str | Path, title: str = "") -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogx(N_list, [abs(s) for s in sums], "o-")
    ax.set_xlabel("N")
    ax.set_ylabel("partial sum")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return Path(out)


def plot_singular_values(values, out: str | Path, title: str = "") -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    v = np.asarray(values, dtype=float)
    ax.semilogy(np.arange(1, v.size + 1), np.maximum(v, 1e-300), ".")
    ax.set_xlabel("index")
    ax.set_ylabel("singular value")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return Path(out)
