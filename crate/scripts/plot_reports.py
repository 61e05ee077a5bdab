#!/usr/bin/env python3
"""Plot the CSV/JSON reports written by the `stationkeep` CLI.

Everything here reads the report files only; no simulation state is touched.

    python3 scripts/plot_reports.py curve   out/train/learning_curve.csv
    python3 scripts/plot_reports.py heatmap out/eval/heatmap_all.csv
    python3 scripts/plot_reports.py scores  out/score/score_samples.csv
    python3 scripts/plot_reports.py traj    out/eval/trajectories/aug_0000.csv
    python3 scripts/plot_reports.py modeldiff out/compare/model_diff.csv

Each command writes a PNG next to the input file.
"""

import argparse
import csv
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def read_csv(path):
    with open(path, encoding="utf-8") as fh:
        rows = [r for r in csv.reader(l for l in fh if not l.startswith("#"))]
    return rows[0], rows[1:]


def plot_curve(path: Path) -> Path:
    header, rows = read_csv(path)
    idx = {name: i for i, name in enumerate(header)}
    steps = [float(r[idx["step"]]) for r in rows]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(8, 7), sharex=True)
    ax1.plot(steps, [float(r[idx["mean_reward"]]) for r in rows], label="mean reward")
    ax1.set_ylabel("mean episode reward")
    ax1.legend()
    for key in ("twr25", "twr50", "twr75"):
        ax2.plot(steps, [float(r[idx[key]]) for r in rows], label=key.upper())
    ax2.plot(steps, [float(r[idx["epsilon"]]) for r in rows], "--", color="gray", label="epsilon")
    ax2.set_xlabel("environment steps")
    ax2.set_ylabel("fraction")
    ax2.set_ylim(0, 1.05)
    ax2.legend()
    out = path.with_suffix(".png")
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    return out


def plot_heatmap(path: Path) -> Path:
    header, rows = read_csv(path)
    fs_edges = [float(h.split("_")[1]) for h in header[1:]]
    twr_edges = [float(r[0]) for r in rows]
    counts = np.array([[float(x) for x in r[1:]] for r in rows])
    fig, ax = plt.subplots(figsize=(7, 6))
    im = ax.imshow(
        counts,
        origin="lower",
        aspect="auto",
        extent=[fs_edges[0], fs_edges[-1] + (fs_edges[1] - fs_edges[0]), twr_edges[0], twr_edges[-1] + (twr_edges[1] - twr_edges[0])],
        cmap="viridis",
    )
    ax.set_xlabel("Forecast Score")
    ax.set_ylabel("TWR50")
    fig.colorbar(im, ax=ax, label="episodes")
    out = path.with_suffix(".png")
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    return out


def plot_scores(path: Path) -> Path:
    header, rows = read_csv(path)
    n_grids = len(header) - 2
    fig, ax = plt.subplots(figsize=(7, 5))
    for g in range(n_grids):
        scores = [float(r[2 + g]) for r in rows]
        ax.hist(scores, bins=20, range=(0, 1), alpha=0.6, label=header[2 + g])
    ax.set_xlabel("Forecast Score")
    ax.set_ylabel("samples")
    ax.legend()
    out = path.with_suffix(".png")
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    return out


def plot_traj(path: Path) -> Path:
    header, rows = read_csv(path)
    idx = {name: i for i, name in enumerate(header)}
    lat = [float(r[idx["lat"]]) for r in rows]
    lon = [float(r[idx["lon"]]) for r in rows]
    alt = [float(r[idx["alt_m"]]) / 1000.0 for r in rows]
    dist = [float(r[idx["distance_km"]]) for r in rows]
    hours = np.arange(len(rows)) / 60.0
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 5))
    sc = ax1.scatter(lon, lat, c=alt, s=4, cmap="plasma")
    ax1.plot(lon[0], lat[0], "k^", label="start")
    ax1.set_xlabel("longitude")
    ax1.set_ylabel("latitude")
    ax1.legend()
    fig.colorbar(sc, ax=ax1, label="altitude (km)")
    ax2.plot(hours, alt, label="altitude (km)")
    ax2.set_xlabel("hours")
    ax2.set_ylabel("altitude (km)")
    ax3 = ax2.twinx()
    ax3.plot(hours, dist, color="tab:red", alpha=0.7, label="distance (km)")
    ax3.axhline(50.0, color="tab:red", linestyle=":", alpha=0.5)
    ax3.set_ylabel("distance to station (km)")
    out = path.with_suffix(".png")
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    return out


def plot_modeldiff(path: Path) -> Path:
    header, rows = read_csv(path)
    idx = {name: i for i, name in enumerate(header)}
    rows = [r for r in rows if r[0] != "overall"]
    labels = [r[idx["level"]] for r in rows]
    mean = [float(r[idx["mean_angular_deg"]]) for r in rows]
    std = [float(r[idx["std_angular_deg"]]) for r in rows]
    fig, ax = plt.subplots(figsize=(8, 5))
    x = np.arange(len(labels))
    ax.bar(x, mean, yerr=std, capsize=4)
    ax.set_xticks(x, labels, rotation=45)
    ax.set_ylabel("angular difference (deg)")
    out = path.with_suffix(".png")
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    return out


PLOTTERS = {
    "curve": plot_curve,
    "heatmap": plot_heatmap,
    "scores": plot_scores,
    "traj": plot_traj,
    "modeldiff": plot_modeldiff,
}


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("kind", choices=sorted(PLOTTERS))
    ap.add_argument("path", type=Path)
    args = ap.parse_args()
    out = PLOTTERS[args.kind](args.path)
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
