"""Static SVG figures for experiment summaries.

Output is byte-stable: the SVG id salt is fixed and no date is embedded.
"""

from __future__ import annotations

from collections import OrderedDict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {"PN": "-", "P": "--"}
COMBOS = (("PN", "active"), ("P", "active"), ("PN", "passive"), ("P", "passive"))


def _save(fig, path):
    with matplotlib.rc_context({"svg.hashsalt": "hapticid", "svg.fonttype": "none"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def _series(summaries, method, policy, field):
    out = OrderedDict()
    for s in summaries:
        if s.method == method and s.policy == policy:
            out.setdefault(s.object, []).append((s.beta, getattr(s, field)))
    return out


def grasps_vs_beta(summaries, policy, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    for i, method in enumerate(("PN", "P")):
        for j, (obj, pts) in enumerate(_series(summaries, method, policy, "avg").items()):
            b, v = zip(*pts)
            ax.plot(b, v, STYLE[method], color=f"C{j}", marker="o", ms=3,
                    label=f"{obj} ({method})")
    ax.set_xlabel("confidence threshold")
    ax.set_ylabel("average grasps")
    ax.set_title(f"Average grasps, {policy} exploration")
    ax.legend(fontsize=7, ncol=2)
    return _save(fig, path)


def errors_vs_beta(summaries, policy, path):
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.6), sharey=True)
    for ax, method in zip(axes, ("PN", "P")):
        for j, (obj, pts) in enumerate(_series(summaries, method, policy, "error_pct").items()):
            b, v = zip(*pts)
            ax.plot(b, v, color=f"C{j}", marker="o", ms=3, label=obj)
        ax.set_title(f"{method} method")
        ax.set_xlabel("confidence threshold")
    axes[0].set_ylabel("perception error (%)")
    axes[0].legend(fontsize=7)
    fig.suptitle(f"Perception error, {policy} exploration")
    return _save(fig, path)


def errors_all(overall, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    for j, (method, policy) in enumerate(COMBOS):
        pts = [(s.beta, s.error_pct) for s in overall if s.method == method and s.policy == policy]
        if pts:
            b, v = zip(*pts)
            ax.plot(b, v, STYLE[method], color=f"C{j}", marker="o", ms=3, label=f"{method}+{policy}")
    ax.set_xlabel("confidence threshold")
    ax.set_ylabel("perception error (%)")
    ax.legend(fontsize=8)
    return _save(fig, path)


def _kde(values, grid):
    v = np.asarray(values, float)
    bw = max(1.06 * v.std() * len(v) ** (-0.2), 0.5)
    z = (grid[:, None] - v[None, :]) / bw
    return np.exp(-0.5 * z * z).sum(axis=1) / (len(v) * bw * np.sqrt(2 * np.pi))


def violin(records, path):
    """Grasp-count distributions for every method/policy at every threshold."""
    betas = sorted({r.beta for r in records})
    combos = [c for c in COMBOS if any((r.method, r.policy) == c for r in records)]
    fig, ax = plt.subplots(figsize=(max(6, 1.4 * len(betas)), 4))
    width = 0.8 / max(len(combos), 1)
    for bi, beta in enumerate(betas):
        for ci, (method, policy) in enumerate(combos):
            g = [r.grasps for r in records if r.beta == beta and r.method == method and r.policy == policy]
            if not g:
                continue
            x = bi - 0.4 + width * (ci + 0.5)
            grid = np.linspace(min(g) - 1, max(g) + 1, 200)
            dens = _kde(g, grid)
            dens = dens / dens.max() * width * 0.45
            ax.fill_betweenx(grid, x - dens, x + dens, color=f"C{ci}", alpha=0.5,
                             label=f"{method}+{policy}" if bi == 0 else None, lw=0)
            ax.plot([x - width * 0.3, x + width * 0.3], [np.median(g)] * 2, color="k", lw=1)
    ax.set_xticks(range(len(betas)))
    ax.set_xticklabels([f"{b:g}" for b in betas])
    ax.set_xlabel("confidence threshold")
    ax.set_ylabel("grasps")
    ax.set_yscale("symlog", linthresh=10)
    ax.legend(fontsize=8)
    return _save(fig, path)


def write_all(summaries, records, outdir: Path):
    from hapticid.harness import summarize_overall

    outdir.mkdir(parents=True, exist_ok=True)
    policies = {s.policy for s in summaries}
    written = []
    for policy in ("passive", "active"):
        if policy in policies:
            written.append(grasps_vs_beta(summaries, policy, outdir / f"grasps_{policy}.svg"))
            written.append(errors_vs_beta(summaries, policy, outdir / f"errors_{policy}.svg"))
    written.append(errors_all(summarize_overall(records), outdir / "errors_all.svg"))
    written.append(violin(records, outdir / "violin.svg"))
    return written
