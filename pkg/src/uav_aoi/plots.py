"""Hand-rendered SVG figures and plot-data CSVs.

Everything is generated from logged trajectory files plus the scenario, via
the independent recompute path in metrics, so a plot can never disagree
with the logs. SVG text is assembled with fixed numeric formatting and
sorted iteration orders, making byte-identical re-renders a property rather
than an accident.
"""

from __future__ import annotations

import csv
import io
import os
from glob import glob

from .config import ExperimentConfig
from .environment import GridSpec
from .errors import ConfigError
from .fileio import write_text_atomic
from .metrics import read_trajectory, records_by_episode, recompute_summary
from .scenario import Scenario, load_scenario

CLUSTER_PALETTE = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
]
POLICY_COLORS = {"dqn": "#1f77b4", "ga": "#d62728", "nn": "#2ca02c", "rw": "#9467bd"}
UAV_DASHES = ["none", "6,3", "2,2", "8,2,2,2"]


def weight_tag(weight: float) -> str:
    """Filename-safe rendering of a trade-off weight: 0 -> '0', 1e9 -> '1e09'."""
    return f"{weight:g}".replace("+", "")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


# --------------------------------------------------------- trajectory svg


def trajectory_svg(scenario: Scenario, grid: GridSpec, ep_records,
                   caption: str) -> str:
    """One episode over the world map: devices, centroids, depots, UAV paths."""
    size, margin = 640.0, 46.0
    world = grid.area_half_width
    scale = (size - 2 * margin) / (2 * world)

    def px(x: float) -> str:
        return _fmt(margin + (x + world) * scale)

    def py(y: float) -> str:
        return _fmt(margin + (world - y) * scale)  # svg y grows downward

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size:.0f}" '
        f'height="{size:.0f}" viewBox="0 0 {size:.0f} {size:.0f}">',
        f'<rect width="{size:.0f}" height="{size:.0f}" fill="#ffffff"/>',
    ]
    # cell boundaries
    half = grid.cells_per_side / 2.0
    for k in range(grid.cells_per_side + 1):
        coord = (k - half) * grid.cell_size
        parts.append(
            f'<line x1="{px(coord)}" y1="{py(-world)}" x2="{px(coord)}" '
            f'y2="{py(world)}" stroke="#e0e0e0" stroke-width="1"/>'
        )
        parts.append(
            f'<line x1="{px(-world)}" y1="{py(coord)}" x2="{px(world)}" '
            f'y2="{py(coord)}" stroke="#e0e0e0" stroke-width="1"/>'
        )
    # devices, colored by cluster
    labels = scenario.assignment.labels(scenario.n_devices)
    for d in scenario.devices:
        color = CLUSTER_PALETTE[int(labels[d.id]) % len(CLUSTER_PALETTE)]
        parts.append(
            f'<circle cx="{px(d.xy[0])}" cy="{py(d.xy[1])}" r="3.5" '
            f'fill="{color}" fill-opacity="0.75"/>'
        )
    # centroids as X marks
    for l, (cx, cy) in enumerate(scenario.assignment.centroids):
        color = CLUSTER_PALETTE[l % len(CLUSTER_PALETTE)]
        for dx1, dy1, dx2, dy2 in ((-6, -6, 6, 6), (-6, 6, 6, -6)):
            parts.append(
                f'<line x1="{_fmt(float(px(cx)) + dx1)}" y1="{_fmt(float(py(cy)) + dy1)}" '
                f'x2="{_fmt(float(px(cx)) + dx2)}" y2="{_fmt(float(py(cy)) + dy2)}" '
                f'stroke="{color}" stroke-width="2.5"/>'
            )
    # depots
    for dx, dy in grid.depots():
        x, y = grid.cell_xy((dx, dy))
        parts.append(
            f'<rect x="{_fmt(float(px(x)) - 5)}" y="{_fmt(float(py(y)) - 5)}" '
            f'width="10" height="10" fill="none" stroke="#555555" stroke-width="1.5"/>'
        )
    # base station
    parts.append(
        f'<rect x="{_fmt(float(px(0)) - 6)}" y="{_fmt(float(py(0)) - 6)}" '
        f'width="12" height="12" fill="#000000"/>'
    )
    # per-UAV paths through cell centers
    if ep_records:
        n_uavs = len(ep_records[0]["moves"])
        for u in range(n_uavs):
            cells = [ep_records[0]["cells_start"][u]]
            cells += [r["cells"][u] for r in ep_records]
            pts = " ".join(
                f"{px(i * grid.cell_size)},{py(j * grid.cell_size)}" for i, j in cells
            )
            dash = UAV_DASHES[u % len(UAV_DASHES)]
            dash_attr = "" if dash == "none" else f' stroke-dasharray="{dash}"'
            parts.append(
                f'<polyline points="{pts}" fill="none" stroke="#111111" '
                f'stroke-width="2"{dash_attr}/>'
            )
            sx, sy = cells[0]
            parts.append(
                f'<circle cx="{px(sx * grid.cell_size)}" cy="{py(sy * grid.cell_size)}" '
                f'r="5" fill="#111111"/>'
            )
    parts.append(
        f'<text x="{margin:.0f}" y="24" font-family="monospace" font-size="13" '
        f'fill="#333333">{caption}</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# -------------------------------------------------------------- line chart


def curve_svg(title: str, xlabel: str, ylabel: str, series, baselines) -> str:
    """Metric-vs-weight chart: one polyline per swept policy, horizontal
    dashed reference lines for weight-independent baselines."""
    width, height = 640.0, 420.0
    left, right, top, bottom = 84.0, 24.0, 48.0, 56.0
    plot_w, plot_h = width - left - right, height - top - bottom

    xs = sorted({x for s in series for x, _, _ in s["points"]})
    ys = [y for s in series for _, y, _ in s["points"]]
    ys += [y + c for s in series for _, y, c in s["points"]]
    ys += [y - c for s in series for _, y, c in s["points"]]
    ys += [b["value"] for b in baselines]
    if not ys:
        raise ConfigError("no data points to chart")
    x_lo, x_hi = (min(xs), max(xs)) if xs else (0.0, 1.0)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    y_lo, y_hi = min(ys), max(ys)
    pad = max((y_hi - y_lo) * 0.08, abs(y_hi) * 1e-3, 1e-12)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    def sx(x: float) -> str:
        return _fmt(left + (x - x_lo) / (x_hi - x_lo) * plot_w)

    def sy(y: float) -> str:
        return _fmt(top + (y_hi - y) / (y_hi - y_lo) * plot_h)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" '
        f'height="{height:.0f}" viewBox="0 0 {width:.0f} {height:.0f}">',
        f'<rect width="{width:.0f}" height="{height:.0f}" fill="#ffffff"/>',
        f'<text x="{left:.0f}" y="26" font-family="monospace" font-size="14" '
        f'fill="#222222">{title}</text>',
    ]
    # axes box and ticks
    parts.append(
        f'<rect x="{left:.0f}" y="{top:.0f}" width="{plot_w:.0f}" '
        f'height="{plot_h:.0f}" fill="none" stroke="#444444" stroke-width="1"/>'
    )
    for i in range(5):
        y_val = y_lo + (y_hi - y_lo) * i / 4
        parts.append(
            f'<line x1="{left - 4:.0f}" y1="{sy(y_val)}" x2="{left:.0f}" '
            f'y2="{sy(y_val)}" stroke="#444444" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{left - 8:.0f}" y="{_fmt(float(sy(y_val)) + 4)}" '
            f'font-family="monospace" font-size="11" fill="#333333" '
            f'text-anchor="end">{y_val:.4g}</text>'
        )
    for x in xs:
        parts.append(
            f'<line x1="{sx(x)}" y1="{top + plot_h:.0f}" x2="{sx(x)}" '
            f'y2="{top + plot_h + 4:.0f}" stroke="#444444" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{sx(x)}" y="{top + plot_h + 18:.0f}" font-family="monospace" '
            f'font-size="11" fill="#333333" text-anchor="middle">{x:.6g}</text>'
        )
    parts.append(
        f'<text x="{left + plot_w / 2:.0f}" y="{height - 12:.0f}" '
        f'font-family="monospace" font-size="12" fill="#222222" '
        f'text-anchor="middle">{xlabel}</text>'
    )
    parts.append(
        f'<text x="18" y="{top + plot_h / 2:.0f}" font-family="monospace" '
        f'font-size="12" fill="#222222" text-anchor="middle" '
        f'transform="rotate(-90 18 {top + plot_h / 2:.0f})">{ylabel}</text>'
    )
    # baseline reference lines
    for b in baselines:
        color = POLICY_COLORS.get(b["policy"], "#666666")
        parts.append(
            f'<line x1="{left:.0f}" y1="{sy(b["value"])}" x2="{left + plot_w:.0f}" '
            f'y2="{sy(b["value"])}" stroke="{color}" stroke-width="1.5" '
            f'stroke-dasharray="5,4"/>'
        )
    # swept series with error bars
    for s in series:
        color = POLICY_COLORS.get(s["policy"], "#666666")
        pts = sorted(s["points"])
        parts.append(
            '<polyline points="'
            + " ".join(f"{sx(x)},{sy(y)}" for x, y, _ in pts)
            + f'" fill="none" stroke="{color}" stroke-width="2"/>'
        )
        for x, y, ci in pts:
            parts.append(f'<circle cx="{sx(x)}" cy="{sy(y)}" r="3.5" fill="{color}"/>')
            if ci > 0:
                parts.append(
                    f'<line x1="{sx(x)}" y1="{sy(y - ci)}" x2="{sx(x)}" '
                    f'y2="{sy(y + ci)}" stroke="{color}" stroke-width="1.5"/>'
                )
    # legend
    entries = [(s["policy"], POLICY_COLORS.get(s["policy"], "#666666"), "solid")
               for s in series]
    entries += [(b["policy"], POLICY_COLORS.get(b["policy"], "#666666"), "dashed")
                for b in baselines]
    for i, (label, color, style) in enumerate(sorted(set(entries))):
        ly = top + 14 + 16 * i
        dash = ' stroke-dasharray="5,4"' if style == "dashed" else ""
        parts.append(
            f'<line x1="{left + plot_w - 96:.0f}" y1="{ly:.0f}" '
            f'x2="{left + plot_w - 68:.0f}" y2="{ly:.0f}" stroke="{color}" '
            f'stroke-width="2"{dash}/>'
        )
        parts.append(
            f'<text x="{left + plot_w - 62:.0f}" y="{ly + 4:.0f}" '
            f'font-family="monospace" font-size="12" fill="#222222">{label}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# ------------------------------------------------------------ emit_plots


def _curve_csv(points, provenance: dict) -> str:
    buf = io.StringIO()
    for key, value in provenance.items():
        buf.write(f"# {key}={value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["policy", "power_weight", "value", "ci_half_width"])
    for policy, weight, value, ci in points:
        writer.writerow([
            policy, "" if weight is None else repr(weight), repr(value), repr(ci),
        ])
    return buf.getvalue()


def emit_plots(config: ExperimentConfig, run_dir: str) -> list[str]:
    """Render every figure a run supports from its logs; returns paths written.

    Reads scenario.json and eval/*.jsonl under ``run_dir``; raises
    ConfigError when there is nothing to plot.
    """
    scenario = load_scenario(os.path.join(run_dir, "scenario.json"))
    grid = config.grid()
    log_paths = sorted(glob(os.path.join(run_dir, "eval", "*.jsonl")))
    if not log_paths:
        raise ConfigError(f"no evaluation logs under {run_dir}/eval")

    plots_dir = os.path.join(run_dir, "plots")
    written = []
    summaries = []
    for path in log_paths:
        header, records = read_trajectory(path)
        policy = header["policy"]
        weight = header["power_weight"]
        params = config.system_params(weight)
        summary = recompute_summary(records, scenario, params, grid, policy)
        summary["swept"] = bool(header.get("swept", True))
        summaries.append(summary)

        first_ep = records_by_episode(records)
        ep_records = first_ep[min(first_ep)]
        caption = (
            f"{policy} w={weight:g} hash={header['config_hash']} "
            f"seeds={header['seeds']['scenario']}/{header['seeds']['training']}"
            f"/{header['seeds']['evaluation']}"
        )
        name = f"trajectory_{policy}" + (f"_w{weight_tag(weight)}" if summary["swept"] else "")
        svg_path = os.path.join(plots_dir, name + ".svg")
        write_text_atomic(svg_path, trajectory_svg(scenario, grid, ep_records, caption))
        written.append(svg_path)

    provenance = {
        "config_hash": config.config_hash(),
        "seeds": f"scenario={config.seed_scenario} training={config.seed_training} "
                 f"evaluation={config.seed_evaluation}",
    }
    metric_specs = [
        ("age_vs_weight", "ergodic_age", "age_ci", "mean device age (slots)"),
        ("power_vs_weight", "ergodic_power", "power_ci", "mean device power (W)"),
        ("reward_vs_weight", "mean_reward", "reward_ci", "mean episode reward"),
    ]
    for stem, key, ci_key, ylabel in metric_specs:
        rows = []
        swept: dict[str, list] = {}
        baselines = []
        for s in sorted(summaries, key=lambda s: (s["policy"], s["power_weight"])):
            if s["swept"]:
                swept.setdefault(s["policy"], []).append(
                    (s["power_weight"], s[key], s[ci_key])
                )
                rows.append((s["policy"], s["power_weight"], s[key], s[ci_key]))
            else:
                baselines.append({"policy": s["policy"], "value": s[key]})
                rows.append((s["policy"], None, s[key], s[ci_key]))
        csv_path = os.path.join(plots_dir, stem + ".csv")
        write_text_atomic(csv_path, _curve_csv(rows, provenance))
        written.append(csv_path)
        series = [{"policy": p, "points": pts} for p, pts in sorted(swept.items())]
        svg = curve_svg(ylabel + " vs trade-off weight", "trade-off weight",
                        ylabel, series, baselines)
        svg_path = os.path.join(plots_dir, stem + ".svg")
        write_text_atomic(svg_path, svg)
        written.append(svg_path)
    return written
