"""Render run artifacts as delimiter-separated tables, standalone SVG charts,
and a markdown summary.

Charts are emitted as direct SVG markup (no plotting dependency) and carry a
numeric label on every bar and heatmap cell, so their values can be checked
textually against the tables.  All output is a pure function of the
artifacts: rows are sorted, floats use fixed formats, nothing embeds a
timestamp.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from recipro.errors import DataError
from recipro.evaluation import AgreementResult, MetricsReport, TransferMatrix, aggregate

_METRIC_COLUMNS = ("balanced_accuracy", "accuracy", "macro_precision", "macro_recall", "macro_f1")

_BAR_COLORS = ["#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#af7aa1"]


@dataclass
class RunArtifacts:
    """Everything the emitters need, keyed by (model, dataset, seed)."""

    metrics: dict[tuple[str, str, int], MetricsReport] = field(default_factory=dict)
    gaps: dict[tuple[str, str, int], dict] = field(default_factory=dict)
    transfer: dict[tuple[str, int], TransferMatrix] = field(default_factory=dict)
    agreements: list[tuple[str, int, AgreementResult]] = field(default_factory=list)
    dataset_stats: dict[str, list[tuple[str, str]]] = field(default_factory=dict)

    def model_ids(self) -> list[str]:
        return sorted({k[0] for k in self.metrics})

    def dataset_ids(self) -> list[str]:
        return sorted({k[1] for k in self.metrics})


def _fmt(x: float) -> str:
    return f"{x:.4f}"


def _mean_std(values: list[float]) -> tuple[str, str]:
    mean, std = aggregate(values)
    return _fmt(mean), _fmt(std)


def _metric_rows(artifacts: RunArtifacts) -> list[dict]:
    rows = []
    for model_id in artifacts.model_ids():
        for dataset_id in artifacts.dataset_ids():
            seeds = sorted(s for (m, d, s) in artifacts.metrics if m == model_id and d == dataset_id)
            if not seeds:
                continue
            reports = [artifacts.metrics[(model_id, dataset_id, s)] for s in seeds]
            row = {"model": model_id, "dataset": dataset_id, "seeds": str(len(seeds))}
            for metric in _METRIC_COLUMNS:
                mean, std = _mean_std([getattr(r, metric) for r in reports])
                row[f"{metric}_mean"] = mean
                row[f"{metric}_std"] = std
            gap_values = [
                artifacts.gaps[(model_id, dataset_id, s)]["gap"] * 100.0
                for s in seeds
                if (model_id, dataset_id, s) in artifacts.gaps
            ]
            if gap_values:
                mean, std = _mean_std(gap_values)
                row["per_class_gap_pp_mean"] = mean
                row["per_class_gap_pp_std"] = std
            else:
                row["per_class_gap_pp_mean"] = ""
                row["per_class_gap_pp_std"] = ""
            rows.append(row)
    return rows


def _write_csv(path: Path, header: list[str], rows: list[list[str]]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def emit_tables(artifacts: RunArtifacts, out_dir: str | Path) -> list[Path]:
    """Write metrics/transfer/agreement/dataset-stats tables; returns paths."""
    if not artifacts.metrics and not artifacts.dataset_stats:
        raise DataError("emit_tables: empty artifacts")
    out = Path(out_dir) / "tables"
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create output directory {out}: {exc}") from exc
    written = []

    header = ["model", "dataset", "seeds"]
    for metric in _METRIC_COLUMNS:
        header += [f"{metric}_mean", f"{metric}_std"]
    header += ["per_class_gap_pp_mean", "per_class_gap_pp_std"]
    rows = [[r[h] for h in header] for r in _metric_rows(artifacts)]
    path = out / "metrics.csv"
    _write_csv(path, header, rows)
    written.append(path)

    transfer_rows = []
    for model_id in sorted({m for (m, _) in artifacts.transfer}):
        seeds = sorted(s for (m, s) in artifacts.transfer if m == model_id)
        matrices = [artifacts.transfer[(model_id, s)] for s in seeds]
        cell_keys = sorted({k for mat in matrices for k in mat.cells})
        for train_ds, eval_ds in cell_keys:
            reports = [
                mat.cells[(train_ds, eval_ds)]
                for mat in matrices
                if mat.cells.get((train_ds, eval_ds)) is not None
            ]
            if reports:
                mean, std = _mean_std([r.balanced_accuracy for r in reports])
                transfer_rows.append(
                    [model_id, train_ds, eval_ds, str(len(reports)), mean, std, "ok"]
                )
            else:
                reason = matrices[0].unavailable.get((train_ds, eval_ds), "unavailable")
                transfer_rows.append([model_id, train_ds, eval_ds, "0", "", "", reason])
    path = out / "transfer.csv"
    _write_csv(
        path,
        ["model", "train_dataset", "eval_dataset", "seeds", "balanced_accuracy_mean", "balanced_accuracy_std", "status"],
        transfer_rows,
    )
    written.append(path)

    agreement_rows = []
    pair_keys = sorted(
        {(ds, res.model_pair[0], res.model_pair[1], res.mode) for ds, _, res in artifacts.agreements}
    )
    for ds, mi, mj, mode in pair_keys:
        results = [
            res
            for d, _, res in artifacts.agreements
            if d == ds and res.model_pair == (mi, mj) and res.mode == mode
        ]
        kappas = [r.kappa for r in results if r.kappa is not None]
        degenerate = sum(1 for r in results if r.kappa is None)
        p_mean, _ = _mean_std([r.p_observed for r in results])
        r_mean, _ = _mean_std([r.r_chance for r in results])
        if kappas:
            k_mean, k_std = _mean_std(kappas)
        else:
            k_mean = k_std = ""
        agreement_rows.append(
            [ds, mi, mj, mode, str(len(results)), p_mean, r_mean, k_mean, k_std, str(degenerate)]
        )
    path = out / "agreement.csv"
    _write_csv(
        path,
        ["dataset", "model_i", "model_j", "mode", "seeds", "p_mean", "r_mean", "kappa_mean", "kappa_std", "degenerate"],
        agreement_rows,
    )
    written.append(path)

    stats_rows = []
    for dataset_id in sorted(artifacts.dataset_stats):
        for key, value in artifacts.dataset_stats[dataset_id]:
            stats_rows.append([dataset_id, key, value])
    path = out / "dataset_stats.csv"
    _write_csv(path, ["dataset", "key", "value"], stats_rows)
    written.append(path)
    return written


# ---------------------------------------------------------------------------
# SVG helpers


def _escape(text: str) -> str:
    return (
        text.replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
    )


def _svg_doc(width: int, height: int, body: list[str]) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">'
    )
    return "\n".join([head, '<rect width="100%" height="100%" fill="#ffffff"/>'] + body + ["</svg>"])


def _text(x: float, y: float, s: str, size: int = 12, anchor: str = "middle", color: str = "#000") -> str:
    return (
        f'<text x="{x:.1f}" y="{y:.1f}" text-anchor="{anchor}" font-size="{size}" '
        f'font-family="Helvetica,Arial,sans-serif" fill="{color}">{_escape(s)}</text>'
    )


def grouped_bar_svg(
    title: str,
    groups: list[str],
    series: list[str],
    values: dict[tuple[str, str], tuple[float, float]],
    y_max: float = 1.0,
    label_fmt: str = "{:.4f}",
    baseline: float | None = None,
) -> str:
    """Grouped bar chart with error whiskers and a numeric label per bar.

    `values` maps (group, series) -> (mean, std); missing pairs are skipped.
    """
    bar_w = 46
    gap = 18
    group_w = len(series) * bar_w + gap * 2
    left, top, bottom = 70, 56, 70
    width = left + group_w * len(groups) + 30
    plot_h = 300
    height = top + plot_h + bottom

    def y_px(v: float) -> float:
        return top + plot_h - (v / y_max) * plot_h

    body = [_text(width / 2, 28, title, size=16)]
    for i in range(6):
        v = y_max * i / 5
        y = y_px(v)
        body.append(f'<line x1="{left}" y1="{y:.1f}" x2="{width - 20}" y2="{y:.1f}" stroke="#e0e0e0"/>')
        body.append(_text(left - 8, y + 4, f"{v:.1f}", size=11, anchor="end"))
    if baseline is not None:
        y = y_px(baseline)
        body.append(
            f'<line x1="{left}" y1="{y:.1f}" x2="{width - 20}" y2="{y:.1f}" '
            f'stroke="#888888" stroke-dasharray="6,4"/>'
        )
    for gi, group in enumerate(groups):
        gx = left + gi * group_w + gap
        for si, name in enumerate(series):
            if (group, name) not in values:
                continue
            mean, std = values[(group, name)]
            x = gx + si * bar_w
            y = y_px(mean)
            color = _BAR_COLORS[si % len(_BAR_COLORS)]
            body.append(
                f'<rect x="{x:.1f}" y="{y:.1f}" width="{bar_w - 8}" '
                f'height="{top + plot_h - y:.1f}" fill="{color}"/>'
            )
            cx = x + (bar_w - 8) / 2
            if std > 0:
                y_hi, y_lo = y_px(min(mean + std, y_max)), y_px(max(mean - std, 0.0))
                body.append(
                    f'<line x1="{cx:.1f}" y1="{y_hi:.1f}" x2="{cx:.1f}" y2="{y_lo:.1f}" '
                    f'stroke="#333333" stroke-width="1.5"/>'
                )
                for yy in (y_hi, y_lo):
                    body.append(
                        f'<line x1="{cx - 5:.1f}" y1="{yy:.1f}" x2="{cx + 5:.1f}" y2="{yy:.1f}" '
                        f'stroke="#333333" stroke-width="1.5"/>'
                    )
            body.append(_text(cx, y - 8, label_fmt.format(mean), size=10))
        body.append(_text(gx + len(series) * bar_w / 2, top + plot_h + 22, group, size=12))
    body.append(
        f'<line x1="{left}" y1="{top + plot_h}" x2="{width - 20}" y2="{top + plot_h}" stroke="#000"/>'
    )
    legend_y = height - 26
    lx = left
    for si, name in enumerate(series):
        color = _BAR_COLORS[si % len(_BAR_COLORS)]
        body.append(f'<rect x="{lx}" y="{legend_y - 10}" width="12" height="12" fill="{color}"/>')
        body.append(_text(lx + 18, legend_y, name, size=12, anchor="start"))
        lx += 18 + 8 * len(name) + 30
    return _svg_doc(width, height, body)


def signed_bar_svg(
    title: str, labels: list[str], values: list[float], unit: str, label_fmt: str = "{:+.2f}"
) -> str:
    """Horizontal bars around a zero axis (for per-class gaps)."""
    row_h = 34
    left = 230
    width = 760
    top = 56
    height = top + row_h * len(labels) + 40
    span = max(1e-9, max(abs(v) for v in values) * 1.25)
    mid = left + (width - left - 30) / 2
    scale = (width - left - 30) / 2 / span

    body = [_text(width / 2, 28, title, size=16)]
    body.append(f'<line x1="{mid:.1f}" y1="{top - 10}" x2="{mid:.1f}" y2="{height - 30}" stroke="#000"/>')
    for i, (label, value) in enumerate(zip(labels, values)):
        y = top + i * row_h
        w = abs(value) * scale
        x = mid if value >= 0 else mid - w
        color = "#4e79a7" if value >= 0 else "#e15759"
        body.append(f'<rect x="{x:.1f}" y="{y:.1f}" width="{w:.1f}" height="{row_h - 12}" fill="{color}"/>')
        body.append(_text(left - 10, y + row_h / 2, label, size=12, anchor="end"))
        tx = mid + w + 6 if value >= 0 else mid - w - 6
        anchor = "start" if value >= 0 else "end"
        body.append(_text(tx, y + row_h / 2, label_fmt.format(value) + unit, size=11, anchor=anchor))
    return _svg_doc(width, height, body)


def heatmap_svg(
    title: str,
    row_labels: list[str],
    col_labels: list[str],
    cells: dict[tuple[str, str], float | None],
    label_fmt: str = "{:.4f}",
    vmin: float = 0.0,
    vmax: float = 1.0,
) -> str:
    """Matrix heatmap; every available cell carries its numeric label."""
    cell = 86
    left, top = 150, 80
    width = left + cell * len(col_labels) + 30
    height = top + cell * len(row_labels) + 40

    def color(v: float) -> str:
        t = 0.0 if vmax == vmin else (v - vmin) / (vmax - vmin)
        t = min(1.0, max(0.0, t))
        r = int(247 - t * (247 - 33))
        g = int(251 - t * (251 - 102))
        b = int(255 - t * (255 - 172))
        return f"#{r:02x}{g:02x}{b:02x}"

    body = [_text(width / 2, 30, title, size=16)]
    for j, col in enumerate(col_labels):
        body.append(_text(left + j * cell + cell / 2, top - 12, col, size=12))
    for i, row in enumerate(row_labels):
        body.append(_text(left - 10, top + i * cell + cell / 2 + 4, row, size=12, anchor="end"))
        for j, col in enumerate(col_labels):
            x, y = left + j * cell, top + i * cell
            value = cells.get((row, col))
            if value is None:
                body.append(
                    f'<rect x="{x}" y="{y}" width="{cell - 4}" height="{cell - 4}" '
                    f'fill="#f2f2f2" stroke="#cccccc"/>'
                )
                body.append(_text(x + cell / 2 - 2, y + cell / 2 + 4, "n/a", size=11, color="#888"))
            else:
                fill = color(value)
                text_color = "#000" if (value - vmin) / max(1e-9, vmax - vmin) < 0.6 else "#fff"
                body.append(
                    f'<rect x="{x}" y="{y}" width="{cell - 4}" height="{cell - 4}" '
                    f'fill="{fill}" stroke="#ffffff"/>'
                )
                body.append(
                    _text(x + cell / 2 - 2, y + cell / 2 + 4, label_fmt.format(value), size=12, color=text_color)
                )
    return _svg_doc(width, height, body)


def emit_charts(artifacts: RunArtifacts, out_dir: str | Path) -> list[Path]:
    """Write the bar/gap/heatmap charts for a run; returns written paths."""
    if not artifacts.metrics and not artifacts.transfer and not artifacts.agreements:
        raise DataError("emit_charts: empty artifacts")
    out = Path(out_dir) / "charts"
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create output directory {out}: {exc}") from exc
    written = []

    if artifacts.metrics:
        values = {}
        for model_id in artifacts.model_ids():
            for dataset_id in artifacts.dataset_ids():
                seeds = [s for (m, d, s) in artifacts.metrics if m == model_id and d == dataset_id]
                if not seeds:
                    continue
                bals = [
                    artifacts.metrics[(model_id, dataset_id, s)].balanced_accuracy
                    for s in sorted(seeds)
                ]
                values[(dataset_id, model_id)] = aggregate(bals)
        svg = grouped_bar_svg(
            "Same-domain balanced accuracy (mean over seeds, whiskers = std)",
            artifacts.dataset_ids(),
            artifacts.model_ids(),
            values,
            baseline=0.5,
        )
        path = out / "same_domain_balanced_accuracy.svg"
        path.write_text(svg, encoding="utf-8")
        written.append(path)

    if artifacts.gaps:
        keys = sorted({(m, d) for (m, d, _) in artifacts.gaps})
        labels, means = [], []
        for model_id, dataset_id in keys:
            seeds = sorted(s for (m, d, s) in artifacts.gaps if (m, d) == (model_id, dataset_id))
            gaps_pp = [artifacts.gaps[(model_id, dataset_id, s)]["gap"] * 100.0 for s in seeds]
            sample = artifacts.gaps[(model_id, dataset_id, seeds[0])]
            labels.append(f"{model_id} / {dataset_id}")
            means.append(aggregate(gaps_pp)[0])
            classes = (sample["class_a"], sample["class_b"])
        svg = signed_bar_svg(
            f"Per-class recall gap: {classes[0]} minus {classes[1]} (percentage points)",
            labels,
            means,
            " pp",
        )
        path = out / "per_class_gap.svg"
        path.write_text(svg, encoding="utf-8")
        written.append(path)

    for model_id in sorted({m for (m, _) in artifacts.transfer}):
        seeds = sorted(s for (m, s) in artifacts.transfer if m == model_id)
        matrices = [artifacts.transfer[(model_id, s)] for s in seeds]
        train_sets = sorted({k[0] for mat in matrices for k in mat.cells})
        eval_sets = sorted({k[1] for mat in matrices for k in mat.cells})
        cells: dict[tuple[str, str], float | None] = {}
        for t in train_sets:
            for e in eval_sets:
                reports = [
                    mat.cells[(t, e)] for mat in matrices if mat.cells.get((t, e)) is not None
                ]
                cells[(t, e)] = aggregate([r.balanced_accuracy for r in reports])[0] if reports else None
        svg = heatmap_svg(
            f"Transfer balanced accuracy: {model_id} (rows = train set, columns = eval set)",
            train_sets,
            eval_sets,
            cells,
        )
        path = out / f"transfer_{model_id}.svg"
        path.write_text(svg, encoding="utf-8")
        written.append(path)

    agreement_datasets = sorted({ds for ds, _, _ in artifacts.agreements})
    for ds in agreement_datasets:
        results = [(s, r) for d, s, r in artifacts.agreements if d == ds]
        names = sorted({r.model_pair[0] for _, r in results} | {r.model_pair[1] for _, r in results})
        cells = {}
        for a in names:
            for b in names:
                pair_res = [
                    r.kappa
                    for _, r in results
                    if r.model_pair in ((a, b), (b, a)) and r.kappa is not None
                ]
                if a == b and not pair_res:
                    pair_res = [1.0]
                cells[(a, b)] = aggregate(pair_res)[0] if pair_res else None
        svg = heatmap_svg(
            f"Prediction agreement (kappa, correctness mode): {ds}",
            names,
            names,
            cells,
            label_fmt="{:.2f}",
            vmin=-1.0,
            vmax=1.0,
        )
        path = out / f"kappa_{ds}.svg"
        path.write_text(svg, encoding="utf-8")
        written.append(path)
    return written


def emit_summary(artifacts: RunArtifacts, out_dir: str | Path) -> Path:
    """Markdown digest generated from the same aggregates as the tables."""
    lines = ["# Run summary", ""]
    rows = _metric_rows(artifacts)
    if rows:
        lines += ["## Same-domain metrics (mean (std) over seeds)", ""]
        lines.append("| model | dataset | seeds | balanced acc. | accuracy | precision | recall | F1 |")
        lines.append("|---|---|---|---|---|---|---|---|")
        for r in rows:
            cells = [r["model"], r["dataset"], r["seeds"]]
            for metric in _METRIC_COLUMNS:
                cells.append(f"{r[f'{metric}_mean']} ({r[f'{metric}_std']})")
            lines.append("| " + " | ".join(cells) + " |")
        lines.append("")
        gap_rows = [r for r in rows if r["per_class_gap_pp_mean"]]
        if gap_rows:
            lines += ["## Per-class recall gap (percentage points)", ""]
            lines.append("| model | dataset | gap |")
            lines.append("|---|---|---|")
            for r in gap_rows:
                lines.append(
                    f"| {r['model']} | {r['dataset']} | "
                    f"{r['per_class_gap_pp_mean']} ({r['per_class_gap_pp_std']}) |"
                )
            lines.append("")

    if artifacts.transfer:
        lines += ["## Transfer balanced accuracy", ""]
        lines.append("| model | train | eval | balanced acc. |")
        lines.append("|---|---|---|---|")
        for model_id in sorted({m for (m, _) in artifacts.transfer}):
            seeds = sorted(s for (m, s) in artifacts.transfer if m == model_id)
            matrices = [artifacts.transfer[(model_id, s)] for s in seeds]
            for key in sorted({k for mat in matrices for k in mat.cells}):
                reports = [mat.cells[key] for mat in matrices if mat.cells.get(key) is not None]
                if reports:
                    mean, std = _mean_std([r.balanced_accuracy for r in reports])
                    lines.append(f"| {model_id} | {key[0]} | {key[1]} | {mean} ({std}) |")
                else:
                    lines.append(f"| {model_id} | {key[0]} | {key[1]} | n/a |")
        lines.append("")

    if artifacts.agreements:
        lines += ["## Model agreement (kappa)", ""]
        lines.append("| dataset | pair | mode | kappa |")
        lines.append("|---|---|---|---|")
        pair_keys = sorted(
            {(ds, r.model_pair[0], r.model_pair[1], r.mode) for ds, _, r in artifacts.agreements}
        )
        for ds, mi, mj, mode in pair_keys:
            kappas = [
                r.kappa
                for d, _, r in artifacts.agreements
                if d == ds and r.model_pair == (mi, mj) and r.mode == mode and r.kappa is not None
            ]
            if kappas:
                mean, std = _mean_std(kappas)
                lines.append(f"| {ds} | {mi} vs {mj} | {mode} | {mean} ({std}) |")
            else:
                lines.append(f"| {ds} | {mi} vs {mj} | {mode} | degenerate |")
        lines.append("")

    if artifacts.dataset_stats:
        lines += ["## Dataset statistics", ""]
        lines.append("| dataset | key | value |")
        lines.append("|---|---|---|")
        for dataset_id in sorted(artifacts.dataset_stats):
            for key, value in artifacts.dataset_stats[dataset_id]:
                lines.append(f"| {dataset_id} | {key} | {value} |")
        lines.append("")

    path = Path(out_dir) / "summary.md"
    path.write_text("\n".join(lines), encoding="utf-8")
    return path
