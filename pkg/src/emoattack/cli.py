"""Command-line surface: attack runs, robustness tables, plots."""
from __future__ import annotations

import csv
import sys
import time
from pathlib import Path

import click
import requests

from . import conformance as conformance_mod
from .config import build_attack, build_oracle, load_config
from .encoding import ConfigurationError, dct_dims
from .imaging import read_image
from .oracle import OracleError, OracleTransportError, RemoteOracle, load_builtin
from .reporting import plot_front_file, write_run_outputs
from .scenarios import DEFAULT_ANGLES

EXIT_CONFIG = 2
EXIT_ORACLE = 3

ORACLE_ENV = "EMOATTACK_ORACLE"


def _oracle_from_spec(spec: str):
    if spec.startswith("builtin:"):
        return load_builtin(spec[len("builtin:"):])
    if spec.startswith("remote:"):
        return RemoteOracle(spec[len("remote:"):])
    raise ConfigurationError(
        f"oracle spec must be builtin:PATH or remote:URL, got {spec!r}"
    )


@click.group()
def main():
    """Black-box adversarial example generation via evolutionary
    multi-objective optimization."""


@main.command()
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
def attack(config_path):
    """Run an attack described by a JSON config file."""
    t0 = time.monotonic()
    try:
        cfg = load_config(config_path)
    except ConfigurationError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    try:
        oracle = build_oracle(cfg["oracle"])
    except (OracleTransportError, OracleError, requests.RequestException,
            OSError) as exc:
        click.echo(f"oracle error: {exc}", err=True)
        sys.exit(EXIT_ORACLE)
    try:
        runner = build_attack(cfg, oracle)
        image = read_image(cfg["io"]["image"])
        runner.fit(image)
    except ConfigurationError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except OracleTransportError as exc:
        click.echo(f"oracle error: {exc}", err=True)
        sys.exit(EXIT_ORACLE)
    run_dir = Path(cfg["io"]["output_dir"])
    payload = write_run_outputs(run_dir, runner, cfg, time.monotonic() - t0)
    click.echo(
        f"archive: {payload['archive_size']} members "
        f"({payload['feasible_count']} feasible), "
        f"{payload['oracle']['queries']} oracle queries, "
        f"outputs in {run_dir}"
    )
    sys.exit(0 if payload["feasible_count"] >= 1 else 1)


def eval_robustness(clean, ae, oracle, angles, correct_labels) -> list[dict]:
    """Per-angle recognition table for a clean/perturbed image pair."""
    from .imaging import rotate

    if clean.data.shape != ae.data.shape:
        raise ValueError("clean and perturbed image dimensions differ")
    rows = []
    for angle in angles:
        row = {"angle": angle}
        for tag, img in (("clean", clean), ("ae", ae)):
            res = oracle.classify(rotate(img, angle))
            top_label, top_conf = res.top1()
            row[f"{tag}_top1_label"] = top_label
            row[f"{tag}_top1_confidence"] = top_conf
            row[f"{tag}_correct_confidence"] = sum(
                res.confidence(lbl) for lbl in correct_labels
            )
        rows.append(row)
    return rows


@main.command("eval")
@click.argument("clean_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("ae_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--angles", default=",".join(str(a) for a in DEFAULT_ANGLES),
              show_default=True, help="Comma-separated rotation angles.")
@click.option("--oracle", "oracle_spec", envvar=ORACLE_ENV, required=True,
              help="builtin:PATH or remote:URL (env EMOATTACK_ORACLE).")
@click.option("--correct-label", "correct_labels", multiple=True,
              help="Correct label(s); defaults to the clean top-1.")
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False),
              help="Also write the table as CSV.")
def eval_cmd(clean_path, ae_path, angles, oracle_spec, correct_labels, csv_path):
    """Tabulate rotation robustness of a perturbed image."""
    try:
        oracle = _oracle_from_spec(oracle_spec)
    except ConfigurationError as exc:
        click.echo(str(exc), err=True)
        sys.exit(EXIT_CONFIG)
    except (OracleError, requests.RequestException, OSError) as exc:
        click.echo(f"oracle error: {exc}", err=True)
        sys.exit(EXIT_ORACLE)
    clean = read_image(clean_path)
    ae = read_image(ae_path)
    angle_list = [float(a) for a in angles.split(",") if a.strip()]
    labels = list(correct_labels) or [oracle.classify(clean).top1()[0]]
    rows = eval_robustness(clean, ae, oracle, angle_list, labels)

    header = (f"{'angle':>8} | {'clean top-1':>24} {'correct':>8} | "
              f"{'perturbed top-1':>24} {'correct':>8}")
    click.echo(f"correct labels: {', '.join(labels)}")
    click.echo(header)
    click.echo("-" * len(header))
    for row in rows:
        clean_top = f"{row['clean_top1_label']}: {row['clean_top1_confidence']:.1%}"
        ae_top = f"{row['ae_top1_label']}: {row['ae_top1_confidence']:.1%}"
        click.echo(
            f"{row['angle']:>7g}° | {clean_top:>24} "
            f"{row['clean_correct_confidence']:>8.1%} | {ae_top:>24} "
            f"{row['ae_correct_confidence']:>8.1%}"
        )
    if csv_path:
        with open(csv_path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)


@main.command("dct-dims")
@click.argument("width", type=click.IntRange(min=1))
@click.argument("height", type=click.IntRange(min=1))
@click.argument("n_patterns", type=click.IntRange(min=1))
@click.argument("dct_block", type=click.IntRange(min=2))
def dct_dims_cmd(width, height, n_patterns, dct_block):
    """Print the DCT-encoding design-variable count."""
    click.echo(dct_dims(width, height, n_patterns, dct_block))


@main.command()
@click.argument("front_csv", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_svg", type=click.Path(dir_okay=False))
def plot(front_csv, out_svg):
    """Render a front.csv file as an SVG scatter plot."""
    plot_front_file(front_csv, out_svg)
    click.echo(f"wrote {out_svg}")


@main.command("conformance")
@click.argument("endpoint")
@click.option("--reference", type=click.Path(exists=True, dir_okay=False),
              help="Built-in weight file to compare distributions against.")
@click.option("--images", default=20, show_default=True,
              help="Random images for the reference comparison.")
def conformance_cmd(endpoint, reference, images):
    """Check a remote classification endpoint for protocol conformance."""
    ref = load_builtin(reference) if reference else None
    results = conformance_mod.run_conformance(endpoint, reference=ref,
                                              n_random=images)
    click.echo(conformance_mod.format_report(results))
    sys.exit(0 if all(r.passed for r in results) else 1)


if __name__ == "__main__":
    main()
