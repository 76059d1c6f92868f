"""Deterministic rendering of experiment artifacts.

Inputs are the CSV/JSON files written by the experiment runner. CSVs must
carry their ``<name>.meta.json`` sidecar with a tool version; JSON reports
embed the version directly. Unversioned inputs are refused. Rendering is a
pure function of the inputs: fixed style, fixed canvas, no timestamps.
"""

import csv
import json
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

STYLE = {
    "figure.figsize": (6.4, 4.2),
    "figure.dpi": 120,
    "savefig.dpi": 120,
    "font.family": "DejaVu Sans",
    "font.size": 9.0,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "figures",
}

KINDS = ("drift", "scaling", "badvol", "jacobian")


class SchemaError(ValueError):
    """Input file failed validation; the message names the offending field."""


class FigureSpec:
    """What to render: input artifact paths, plot kind, scales, output path."""

    def __init__(self, kind, inputs, output, logx=None, logy=None):
        if kind not in KINDS:
            raise SchemaError(f"unknown figure kind {kind!r}; known: {KINDS}")
        self.kind = kind
        self.inputs = [Path(p) for p in (inputs if isinstance(inputs, (list, tuple)) else [inputs])]
        if not self.inputs:
            raise SchemaError("at least one input file is required")
        self.output = Path(output)
        self.logx = logx
        self.logy = logy


def _require_version(meta, path):
    if not isinstance(meta, dict) or not meta.get("version"):
        raise SchemaError(f"{path}: missing tool version; refusing unversioned input")


def load_csv(path):
    """CSV rows plus its validated sidecar metadata."""
    path = Path(path)
    sidecar = Path(str(path) + ".meta.json")
    if not sidecar.exists():
        raise SchemaError(f"{path}: missing config sidecar {sidecar.name}")
    meta = json.loads(sidecar.read_text())
    _require_version(meta, sidecar)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, no header") from None
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return header, rows, meta


def load_json(path):
    doc = json.loads(Path(path).read_text())
    _require_version(doc, path)
    return doc


def _column(header, rows, name, path, convert=float):
    try:
        idx = header.index(name)
    except ValueError:
        raise SchemaError(f"{path}: missing column {name!r}") from None
    out = []
    for i, row in enumerate(rows):
        try:
            out.append(convert(row[idx]))
        except (ValueError, IndexError):
            raise SchemaError(
                f"{path}: bad value in column {name!r} at data row {i}"
            ) from None
    return np.array(out) if convert is float else out


def _finish(fig, spec):
    spec.output.parent.mkdir(parents=True, exist_ok=True)
    metadata = {"Date": None} if spec.output.suffix == ".svg" else {"Software": "figures"}
    fig.savefig(spec.output, metadata=metadata)
    plt.close(fig)
    return spec.output


def _render_drift(spec):
    header, rows, _ = load_csv(spec.inputs[0])
    t = _column(header, rows, "t", spec.inputs[0])
    n = sum(1 for name in header if name.startswith("I"))
    if n == 0:
        raise SchemaError(f"{spec.inputs[0]}: missing column 'I1'")
    actions = np.column_stack(
        [_column(header, rows, f"I{j + 1}", spec.inputs[0]) for j in range(n)]
    )
    drift = np.linalg.norm(actions - actions[0], axis=1)
    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True)
    for j in range(n):
        ax1.plot(t, actions[:, j], lw=0.8, label=f"I{j + 1}")
    ax1.set_ylabel("actions")
    ax1.legend(loc="upper right")
    ax2.plot(t, drift, lw=0.8, color="tab:red")
    ax2.set_xlabel("t")
    ax2.set_ylabel("|I(t) - I(0)|")
    if spec.logy:
        ax2.set_yscale("log")
    return _finish(fig, spec)


def _render_scaling(spec):
    header, rows, _ = load_csv(spec.inputs[0])
    path = spec.inputs[0]
    rho = _column(header, rows, "rho", path)
    censored = np.array(
        [v not in ("0", "", "False", "false") for v in
         _column(header, rows, "censored", path, convert=str)]
    )
    raw_time = _column(header, rows, "exit_time", path, convert=str)
    fit_doc = None
    for extra in spec.inputs[1:]:
        doc = load_json(extra)
        fit_doc = doc.get("result", doc)
    t_max = None
    if fit_doc is not None:
        t_max = fit_doc.get("t_max")
    times = np.array(
        [float(v) if v not in ("",) else math.nan for v in raw_time]
    )
    if t_max is None:
        finite = times[~np.isnan(times)]
        t_max = float(finite.max()) * 2 if finite.size else 1.0
    fig, ax = plt.subplots()
    un = ~censored & ~np.isnan(times)
    if np.any(un):
        ax.plot(rho[un], times[un], "o", ms=4, color="tab:blue", label="exit times")
    if np.any(censored):
        # censored rows are lower bounds: draw upward arrows at the horizon
        ax.plot(
            rho[censored],
            np.full(int(np.sum(censored)), t_max),
            marker=r"$\uparrow$",
            ls="none",
            ms=9,
            color="tab:gray",
            label=f"censored (T >= {t_max:g})",
        )
    if fit_doc is not None and "fit" in fit_doc:
        fit = fit_doc["fit"]
        grid = np.geomspace(rho.min(), rho.max(), 200)
        if "poly" in fit:
            p, c = fit["poly"]["p"], fit["poly"]["c"]
            ax.plot(grid, np.exp(c) * grid ** (-p), "-", lw=1.0,
                    color="tab:orange", label=f"poly fit p={p:.2f}")
        if "exp" in fit:
            a, cc, b = fit["exp"]["a"], fit["exp"]["c"], fit["exp"]["b"]
            ax.plot(grid, np.exp(b + cc * grid ** (-a)), "--", lw=1.0,
                    color="tab:green", label=f"exp fit a={a:.2f}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("rho")
    ax.set_ylabel("T(rho)")
    ax.legend(loc="best")
    return _finish(fig, spec)


def badvol_slope(csv_path):
    """Fitted log-log slope of bad_fraction against eps (positive rows)."""
    header, rows, _ = load_csv(csv_path)
    eps = _column(header, rows, "eps", csv_path)
    frac = _column(header, rows, "bad_fraction", csv_path)
    positive = frac > 0
    if not np.any(positive):
        raise SchemaError(
            f"{csv_path}: column 'bad_fraction' has no positive entries"
        )
    return float(np.polyfit(np.log(eps[positive]), np.log(frac[positive]), 1)[0])


def _render_badvol(spec):
    header, rows, _ = load_csv(spec.inputs[0])
    path = spec.inputs[0]
    eps = _column(header, rows, "eps", path)
    frac = _column(header, rows, "bad_fraction", path)
    lo = _column(header, rows, "ci_low", path)
    hi = _column(header, rows, "ci_high", path)
    slope = badvol_slope(path)
    fig, ax = plt.subplots()
    yerr = np.vstack([np.clip(frac - lo, 0, None), np.clip(hi - frac, 0, None)])
    ax.errorbar(eps, frac, yerr=yerr, fmt="o-", ms=4, lw=0.9, capsize=2)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("eps")
    ax.set_ylabel("bad fraction")
    ax.set_title(f"log-log slope = {slope:.2f}")
    return _finish(fig, spec)


def _render_jacobian(spec):
    dets = []
    for path in spec.inputs:
        doc = load_json(path)
        result = doc.get("result", doc)
        if "jacobian_det" not in result:
            raise SchemaError(f"{path}: missing field 'jacobian_det'")
        dets.append(float(result["jacobian_det"]))
        if "jacobian_det_half_step" in result:
            dets.append(float(result["jacobian_det_half_step"]))
    fig, ax = plt.subplots()
    ax.hist(dets, bins=min(20, max(3, len(dets))), color="tab:blue", alpha=0.8)
    ax.axvline(1.0, color="tab:red", lw=1.0)
    ax.set_xlabel("det of the invariant-map Jacobian")
    ax.set_ylabel("count")
    ax.set_title(f"n = {len(dets)}, max |det - 1| = {max(abs(d - 1) for d in dets):.2e}")
    return _finish(fig, spec)


_RENDERERS = {
    "drift": _render_drift,
    "scaling": _render_scaling,
    "badvol": _render_badvol,
    "jacobian": _render_jacobian,
}


def render(spec):
    """Render one figure; returns the output path."""
    with plt.rc_context(STYLE):
        return _RENDERERS[spec.kind](spec)
