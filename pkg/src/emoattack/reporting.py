"""Run-directory artifacts: front CSV, archive dump, images, and plots."""
from __future__ import annotations

import csv
import json
from pathlib import Path

from .imaging import perturbation_to_visual, write_image

SVG_PANEL_W = 420
SVG_PANEL_H = 320
SVG_MARGIN = 56


def _fmt(value: float) -> str:
    # shortest round-trip representation keeps reruns byte-identical
    return repr(float(value))


def write_front_csv(path, archive, objective_names) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["index", *objective_names, "violation", "feasible", "genotype"]
        )
        for k, ind in enumerate(archive):
            writer.writerow([
                k,
                *[_fmt(v) for v in ind.objectives],
                _fmt(ind.violation),
                int(ind.feasible),
                f"genotypes/genotype_{k}.csv",
            ])


def write_archive_artifacts(run_dir: Path, problem, archive,
                            export_png=False) -> None:
    geno_dir = run_dir / "genotypes"
    img_dir = run_dir / "images"
    geno_dir.mkdir(exist_ok=True)
    img_dir.mkdir(exist_ok=True)
    ext = "png" if export_png else "ppm"
    for k, ind in enumerate(archive):
        (geno_dir / f"genotype_{k}.csv").write_text(
            ",".join(_fmt(v) for v in ind.genotype) + "\n"
        )
        rho = problem.decode(ind.genotype)
        write_image(problem.perturbed(ind.genotype), img_dir / f"ae_{k}.{ext}")
        write_image(perturbation_to_visual(rho), img_dir / f"rho_{k}.{ext}")


def write_individuals_jsonl(path, archive) -> None:
    with open(path, "w") as fh:
        for k, ind in enumerate(archive):
            fh.write(json.dumps({
                "index": k,
                "objectives": [float(v) for v in ind.objectives],
                "violation": float(ind.violation),
                "feasible": ind.feasible,
                "genotype": [float(v) for v in ind.genotype],
            }) + "\n")


def _scatter_panel(points, xi, yi, names, offset_x):
    xs = [p[xi] for p in points]
    ys = [p[yi] for p in points]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    x_span = (x_hi - x_lo) or 1.0
    y_span = (y_hi - y_lo) or 1.0
    inner_w = SVG_PANEL_W - 2 * SVG_MARGIN
    inner_h = SVG_PANEL_H - 2 * SVG_MARGIN
    parts = [
        f'<rect x="{offset_x + SVG_MARGIN}" y="{SVG_MARGIN}" '
        f'width="{inner_w}" height="{inner_h}" '
        'fill="none" stroke="#444"/>'
    ]
    for px, py in zip(xs, ys):
        cx = offset_x + SVG_MARGIN + (px - x_lo) / x_span * inner_w
        cy = SVG_MARGIN + inner_h - (py - y_lo) / y_span * inner_h
        parts.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="3" '
                     'fill="#1f77b4" fill-opacity="0.8"/>')
    mid_x = offset_x + SVG_PANEL_W / 2
    parts += [
        f'<text x="{mid_x}" y="{SVG_PANEL_H - 16}" text-anchor="middle" '
        f'font-size="12">{names[xi]}</text>',
        f'<text x="{offset_x + 14}" y="{SVG_PANEL_H / 2}" font-size="12" '
        f'transform="rotate(-90 {offset_x + 14} {SVG_PANEL_H / 2})" '
        f'text-anchor="middle">{names[yi]}</text>',
        f'<text x="{offset_x + SVG_MARGIN}" y="{SVG_PANEL_H - 36}" '
        f'font-size="10">{x_lo:.4g}</text>',
        f'<text x="{offset_x + SVG_MARGIN + inner_w}" y="{SVG_PANEL_H - 36}" '
        f'font-size="10" text-anchor="end">{x_hi:.4g}</text>',
        f'<text x="{offset_x + SVG_MARGIN - 4}" y="{SVG_MARGIN + inner_h}" '
        f'font-size="10" text-anchor="end">{y_lo:.4g}</text>',
        f'<text x="{offset_x + SVG_MARGIN - 4}" y="{SVG_MARGIN + 10}" '
        f'font-size="10" text-anchor="end">{y_hi:.4g}</text>',
    ]
    return parts


def render_front_svg(points, objective_names) -> str:
    """2-D scatter per objective pair; pure function of its inputs."""
    n_obj = len(objective_names)
    pairs = [(0, 1)] if n_obj == 2 else [(0, 1), (0, 2), (1, 2)]
    width = SVG_PANEL_W * len(pairs)
    body = []
    if points:
        for panel, (xi, yi) in enumerate(pairs):
            body += _scatter_panel(points, xi, yi, objective_names,
                                   panel * SVG_PANEL_W)
    else:
        body.append(f'<text x="{width / 2}" y="{SVG_PANEL_H / 2}" '
                    'text-anchor="middle">empty front</text>')
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{SVG_PANEL_H}">\n'
        '<rect width="100%" height="100%" fill="white"/>\n'
        + "\n".join(body) + "\n</svg>\n"
    )


def read_front_csv(path):
    """Objective rows and names back out of a front.csv file."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    names = header[1 : header.index("violation")]
    points = [[float(v) for v in row[1 : 1 + len(names)]] for row in rows[1:]]
    return points, names


def plot_front_file(front_csv, out_svg) -> None:
    points, names = read_front_csv(front_csv)
    Path(out_svg).write_text(render_front_svg(points, names))


def write_run_outputs(run_dir, attack, resolved_config, wall_time) -> dict:
    """Write all attack artifacts; returns the run.json payload."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    problem = attack.problem_
    archive = attack.archive_
    names = problem.objective_names()

    write_front_csv(run_dir / "front.csv", archive, names)
    write_individuals_jsonl(run_dir / "individuals.jsonl", archive)
    export_png = resolved_config.get("io", {}).get("export_png", False)
    write_archive_artifacts(run_dir, problem, archive, export_png=export_png)
    (run_dir / "front.svg").write_text(
        render_front_svg([list(map(float, ind.objectives)) for ind in archive],
                         names)
    )

    stats = problem.oracle.stats
    payload = {
        "config": resolved_config,
        "seed": attack.seed,
        "genotype_length": problem.genotype_length,
        "objectives": names,
        "correct_labels": problem.correct_labels,
        "oracle": {
            "model_id": getattr(problem.oracle, "model_id", "unknown"),
            "queries": stats.queries,
            "cache_hits": stats.cache_hits,
        },
        "evaluations": attack.result_.evaluations,
        "generations": attack.result_.generations,
        "stopped_early": attack.result_.stopped_early,
        "archive_size": len(archive),
        "feasible_count": sum(1 for ind in archive if ind.feasible),
        "wall_time_s": wall_time,
    }
    (run_dir / "run.json").write_text(json.dumps(payload, indent=2) + "\n")
    return payload
