"""Figures for stability-sweep CSVs and polynomial-lemma JSON reports.

The input contracts are the producing tool's external interfaces: the sweep
CSV schema (exact header below) and the lemma report records with optional
"histogram" payloads.  Rendering is read-only and deterministic: fits are
plain least squares on log-log points and every annotation is formatted to
three decimals, so re-running on the same inputs reproduces the same text.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

SWEEP_COLUMNS = [
    "case_id", "n", "p", "eps", "family", "ric0_lp", "weyl_lp",
    "r_minus_avg_lp", "r_avg", "a_inf_norm", "volume", "diameter_est",
    "convex", "c0_norm", "phi_residual", "f_c0_w2p", "psi_minus_id_w2p",
    "pullback_w1p", "ratio_main", "ratio_cor", "newton_iters", "status",
]

KINDS = ("scaling", "ratio-plateau", "quotient-hist")


class SchemaError(ValueError):
    """The input file does not match the producing tool's schema."""


@dataclass
class PlotSpec:
    input_path: str
    kind: str
    output_path: str
    group_keys: tuple[str, ...] = ("n", "p", "family")

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}; "
                              f"expected one of {KINDS}")


@dataclass
class RenderResult:
    """What was drawn: the annotation strings, for callers and tests."""

    output_path: str
    annotations: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


def read_sweep_csv(path: str) -> list[dict]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration as exc:
            raise SchemaError(
                f"missing columns: {', '.join(SWEEP_COLUMNS)}") from exc
        missing = [c for c in SWEEP_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"missing columns: {', '.join(missing)}")
        idx = {c: header.index(c) for c in header}
        rows = []
        for raw in reader:
            if not raw:
                continue
            rows.append({c: raw[idx[c]] for c in header})
    return rows


def _float(row: dict, key: str) -> float:
    return float(row[key])


def _group(rows, keys):
    groups: dict[tuple, list] = {}
    for row in rows:
        groups.setdefault(tuple(row[k] for k in keys), []).append(row)
    return dict(sorted(groups.items()))


def fit_slope(x, y) -> float:
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    lx = lx - lx.mean()
    return float(np.dot(lx, ly - ly.mean()) / np.dot(lx, lx))


def _empty_figure(spec: PlotSpec, message: str) -> RenderResult:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.text(0.5, 0.5, message, ha="center", va="center")
    ax.set_axis_off()
    fig.savefig(spec.output_path, dpi=120)
    plt.close(fig)
    return RenderResult(spec.output_path, warnings=[message])


def render_scaling(spec: PlotSpec) -> RenderResult:
    rows = [r for r in read_sweep_csv(spec.input_path) if r["status"] == "ok"]
    if not rows:
        return _empty_figure(spec, "no sweep rows to plot")
    result = RenderResult(spec.output_path)
    fig, ax = plt.subplots(figsize=(7, 5))
    for key, group in _group(rows, spec.group_keys).items():
        group = sorted(group, key=lambda r: _float(r, "eps"))
        eps = [_float(r, "eps") for r in group]
        label = "/".join(f"{k}={v}" for k, v in zip(spec.group_keys, key))
        for column, marker in (("ric0_lp", "o"), ("r_minus_avg_lp", "s"),
                               ("f_c0_w2p", "^")):
            vals = [_float(r, column) for r in group]
            if len(eps) >= 2 and all(v > 0 for v in vals):
                slope = fit_slope(eps, vals)
                text = f"{label} {column} slope={slope:.3f}"
            else:
                text = f"{label} {column} slope=n/a"
            result.annotations.append(text)
            ax.loglog(eps, vals, marker=marker, label=text)
    ax.set_xlabel("eps")
    ax.set_ylabel("norm")
    ax.set_title("deficit and closeness scaling")
    ax.legend(fontsize=7)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(spec.output_path, dpi=120)
    plt.close(fig)
    return result


def render_ratio_plateau(spec: PlotSpec) -> RenderResult:
    rows = [r for r in read_sweep_csv(spec.input_path) if r["status"] == "ok"]
    if not rows:
        return _empty_figure(spec, "no sweep rows to plot")
    result = RenderResult(spec.output_path)
    fig, ax = plt.subplots(figsize=(7, 5))
    for key, group in _group(rows, spec.group_keys).items():
        group = sorted(group, key=lambda r: _float(r, "eps"))
        eps = [_float(r, "eps") for r in group]
        ratios = [_float(r, "ratio_main") for r in group]
        finite = [v for v in ratios if math.isfinite(v)]
        label = "/".join(f"{k}={v}" for k, v in zip(spec.group_keys, key))
        if finite:
            text = f"{label} max={max(finite):.3f} min={min(finite):.3f}"
        else:
            text = f"{label} max=n/a min=n/a"
        result.annotations.append(text)
        ax.semilogx(eps, ratios, marker="o", label=text)
    ax.set_xlabel("eps")
    ax.set_ylabel("ratio_main")
    ax.set_title("stability-constant plateau")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(spec.output_path, dpi=120)
    plt.close(fig)
    return result


def render_quotient_hist(spec: PlotSpec) -> RenderResult:
    with open(spec.input_path, "r", encoding="utf-8") as fh:
        try:
            records = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"malformed report JSON: {exc}") from exc
    if isinstance(records, dict):
        records = [records]
    with_hist = [r for r in records
                 if isinstance(r, dict) and "histogram" in r]
    if not with_hist:
        raise SchemaError("missing columns: histogram (no quotient records)")
    result = RenderResult(spec.output_path)
    fig, axes = plt.subplots(1, len(with_hist),
                             figsize=(5 * len(with_hist), 4), squeeze=False)
    for ax, rec in zip(axes[0], with_hist):
        hist = rec["histogram"]
        edges = np.asarray(hist["edges"], dtype=float)
        counts = np.asarray(hist["counts"], dtype=float)
        ax.bar(edges[:-1], counts, width=np.diff(edges), align="edge",
               alpha=0.7)
        vmin = float(rec["witness_min"])
        ax.axvline(vmin, color="crimson", linestyle="--")
        text = f"{rec['lemma']} min={vmin:.3f}"
        result.annotations.append(text)
        ax.set_title(text)
        ax.set_xlabel("quotient value")
        ax.set_ylabel("samples")
    fig.tight_layout()
    fig.savefig(spec.output_path, dpi=120)
    plt.close(fig)
    return result


_RENDERERS = {
    "scaling": render_scaling,
    "ratio-plateau": render_ratio_plateau,
    "quotient-hist": render_quotient_hist,
}


def render(spec: PlotSpec) -> RenderResult:
    """Render the requested figure kind to spec.output_path."""
    return _RENDERERS[spec.kind](spec)
