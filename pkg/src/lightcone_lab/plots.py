"""Standalone SVG figures with the plotted data embedded as JSON metadata."""
from __future__ import annotations

import io
import json
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams["svg.hashsalt"] = "lightcone-lab"
plt.rcParams["svg.fonttype"] = "none"


class PlotError(KeyError):
    pass


def _need(series: dict, *keys):
    for k in keys:
        if k not in series or series[k] is None:
            raise PlotError(f"missing series {k!r}")


def _save(fig, path, data: dict) -> Path:
    """Write fig as SVG and embed ``data`` in a metadata element."""
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    svg = buf.getvalue()
    blob = json.dumps(data, sort_keys=True, default=_jsonable)
    block = f'<metadata id="lightcone-data"><![CDATA[{blob}]]></metadata>\n'
    i = svg.index(">", svg.index("<svg")) + 1
    svg = svg[:i] + "\n" + block + svg[i:]
    path = Path(path)
    path.write_text(svg)
    return path


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    return str(x)


def embedded_data(path) -> dict:
    """Read back the data block of a figure written here."""
    svg = Path(path).read_text()
    a = svg.index("<![CDATA[") + 9
    return json.loads(svg[a:svg.index("]]>", a)])


def loglog_fit(series: dict, path, title: str = "", xlabel: str = "eps", ylabel: str = "norm") -> Path:
    """Log-log points with the fitted line, annotated with the fitted slope."""
    _need(series, "x", "y", "slope")
    x, y = np.asarray(series["x"], float), np.asarray(series["y"], float)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(x, y, "o", label="measured")
    ok = (x > 0) & (y > 0)
    if ok.sum() >= 2:
        c = np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)
        xx = np.geomspace(x[ok].min(), x[ok].max(), 50)
        ax.loglog(xx, np.exp(np.polyval(c, np.log(xx))), "-", label="fit")
    ax.annotate(f"slope ≈ {series['slope']:.2f}", xy=(0.05, 0.9), xycoords="axes fraction")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend(loc="lower right")
    return _save(fig, path, {"kind": "loglog", **series})


def remainder_plot(fit, path) -> Path:
    d = fit.to_dict() if hasattr(fit, "to_dict") else dict(fit)
    _need(d, "eps", "norms", "slope")
    return loglog_fit({"x": d["eps"], "y": d["norms"], "slope": d["slope"]}, path,
                      "remainder after the fourth-order expansion", "eps", "L2 remainder")


def heat_strip(series: dict, path, title: str = "cone contrast") -> Path:
    """Detector score along a line through the interaction point, as a one-row image."""
    _need(series, "x", "score", "cone")
    x, s = np.asarray(series["x"], float), np.asarray(series["score"], float)
    fig, ax = plt.subplots(figsize=(7, 1.8))
    img = np.log10(np.maximum(s, 1e-30))[None, :]
    im = ax.imshow(img, aspect="auto", extent=(x[0], x[-1], 0, 1), cmap="magma")
    for c in series["cone"]:
        ax.axvline(c, color="cyan", lw=0.8, ls="--")
    ax.set_yticks([])
    ax.set_xlabel("x")
    ax.set_title(f"{title} (ratio {series.get('ratio', float('nan')):.3g})")
    fig.colorbar(im, ax=ax, label="log10 score")
    fig.tight_layout()
    return _save(fig, path, {"kind": "heat_strip", **series})


def observation_diagram(series: dict, path, title: str = "earliest light observations") -> Path:
    """Observer worldlines in (x1, t) with the detected points and the source point.

    An empty observation set gives a placeholder diagram with its legend.
    """
    _need(series, "observers", "entries")
    fig, ax = plt.subplots(figsize=(5, 5))
    for k, (z, eta) in enumerate(series["observers"]):
        s = np.linspace(-1, 1, 2)
        ax.plot(z[1] + s * eta[1], z[0] + s * eta[0], color="0.6", lw=0.8, label="observers" if k == 0 else None)
    hits = [(series["observers"][i], s) for i, s in series["entries"] if s is not None]
    if hits:
        px = [z[1] + s * eta[1] for (z, eta), s in hits]
        pt = [z[0] + s * eta[0] for (z, eta), s in hits]
        ax.plot(px, pt, "o", color="C3", ms=4, label="earliest arrivals")
    else:
        ax.text(0.5, 0.5, "empty observation set", ha="center", va="center", transform=ax.transAxes)
        ax.plot([], [], "o", color="C3", label="earliest arrivals (none)")
    if series.get("q") is not None:
        q = series["q"]
        ax.plot([q[1]], [q[0]], "*", color="k", ms=10, label="source point")
    ax.set_xlabel("x1")
    ax.set_ylabel("t")
    ax.set_title(title)
    ax.legend(loc="upper left", fontsize=8)
    return _save(fig, path, {"kind": "observation_diagram", **series})


def dominance_table(series: dict, path, title: str = "dominant terms") -> Path:
    """Table of term labels, exponent vectors and coefficient classes."""
    _need(series, "rows")
    rows = series["rows"]
    fig, ax = plt.subplots(figsize=(8, 0.4 + 0.3 * max(len(rows), 1)))
    ax.axis("off")
    cells = [[r["label"], str(r["exps"]), r["class"], "yes" if r["dominant"] else ""] for r in rows] or [["", "", "", ""]]
    tab = ax.table(cellText=cells, colLabels=["term", "exponents", "coefficient", "dominant"], loc="center")
    tab.auto_set_font_size(False)
    tab.set_fontsize(7)
    ax.set_title(title)
    return _save(fig, path, {"kind": "dominance_table", **series})


def decay_plot(series: dict, path, title: str = "probe decay") -> Path:
    """|Theta_tau| against tau on log-log axes."""
    _need(series, "taus", "values")
    t = np.asarray(series["taus"], float)
    v = np.maximum(np.asarray(series["values"], float), 1e-300)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(t, v, "o-")
    ax.set_xlabel("tau")
    ax.set_ylabel("|Theta|")
    ax.set_title(f"{title}: {series.get('verdict', '')}")
    return _save(fig, path, {"kind": "decay", **series})


def emit(report: dict, out_dir) -> list:
    """All figures a run report carries series for; returns written paths."""
    out_dir = Path(out_dir)
    made = []
    for name, spec in sorted(report.get("series", {}).items()):
        kind = spec["plot"]
        fn = {"loglog": loglog_fit, "heat_strip": heat_strip, "observation_diagram": observation_diagram,
              "dominance_table": dominance_table, "decay": decay_plot}.get(kind)
        if fn is None:
            raise PlotError(f"unknown plot kind {kind!r}")
        data = {k: v for k, v in spec.items() if k not in ("plot", "title")}
        made.append(fn(data, out_dir / f"{name}.svg", spec.get("title", name)))
    return made


def finite(x) -> float | None:
    return None if x is None or not math.isfinite(x) else float(x)
