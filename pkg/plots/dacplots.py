"""Render bribe-bound sweep CSVs as a multi-curve figure.

Input is the CSV produced by `dacsim sweep`: one row per (committee size,
risk parameter) pair with lower and upper bribe bounds in ETH.  Output is a
fixed-size 1200x800 PNG, log-log by default, one curve per risk parameter.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

EXPECTED_HEADER = [
    "n_nodes",
    "nu",
    "epsilon_target",
    "p0_lower_eth",
    "p0_upper_eth",
    "p0_lower_usd",
    "p0_upper_usd",
]

WIDTH_PX, HEIGHT_PX, DPI = 1200, 800, 100


class SweepFormatError(Exception):
    """Malformed sweep CSV; the message carries the offending line number."""


@dataclass(frozen=True)
class SweepRow:
    n_nodes: int
    nu: float
    epsilon_target: float
    p0_lower_eth: float
    p0_upper_eth: float
    p0_lower_usd: float
    p0_upper_usd: float


def read_sweep(path: str) -> list[SweepRow]:
    """Parse the sweep CSV, reporting the line number of any bad row."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise SweepFormatError(f"cannot open {path}: {exc}")
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SweepFormatError(f"{path}: line 1: empty file, expected header")
        if header != EXPECTED_HEADER:
            raise SweepFormatError(
                f"{path}: line 1: header {header} does not match {EXPECTED_HEADER}"
            )
        rows = []
        for lineno, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != len(EXPECTED_HEADER):
                raise SweepFormatError(
                    f"{path}: line {lineno}: expected {len(EXPECTED_HEADER)} fields,"
                    f" got {len(record)}"
                )
            try:
                rows.append(
                    SweepRow(
                        n_nodes=int(record[0]),
                        nu=float(record[1]),
                        epsilon_target=float(record[2]),
                        p0_lower_eth=float(record[3]),
                        p0_upper_eth=float(record[4]),
                        p0_lower_usd=float(record[5]),
                        p0_upper_usd=float(record[6]),
                    )
                )
            except ValueError as exc:
                raise SweepFormatError(f"{path}: line {lineno}: {exc}")
    if not rows:
        raise SweepFormatError(f"{path}: no data rows after the header")
    return rows


def build_figure(rows: list[SweepRow], log_x=True, log_y=True, curves="lower"):
    """One curve per risk parameter, legend in ascending order."""
    if curves not in ("lower", "upper", "both"):
        raise ValueError(f"curves must be lower, upper, or both, not {curves!r}")
    by_nu: dict[float, list[SweepRow]] = {}
    for row in rows:
        by_nu.setdefault(row.nu, []).append(row)

    fig, ax = plt.subplots(figsize=(WIDTH_PX / DPI, HEIGHT_PX / DPI), dpi=DPI)
    for nu in sorted(by_nu):
        series = sorted(by_nu[nu], key=lambda r: r.n_nodes)
        xs = [r.n_nodes for r in series]
        if curves in ("lower", "both"):
            ax.plot(xs, [r.p0_lower_eth for r in series], label=f"nu = {nu:g}")
        if curves in ("upper", "both"):
            label = f"nu = {nu:g} (upper)" if curves == "both" else f"nu = {nu:g}"
            ax.plot(
                xs,
                [r.p0_upper_eth for r in series],
                linestyle="--",
                label=label,
            )
    if log_x:
        ax.set_xscale("log")
    if log_y:
        ax.set_yscale("log")
    ax.set_xlabel("number of DAC nodes N")
    ax.set_ylabel("total bribe p0 (ETH)")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    return fig


def render(csv_path: str, out_path: str, log_x=True, log_y=True, curves="lower") -> str:
    """Read the CSV and write the PNG; nothing is written on a parse error."""
    rows = read_sweep(csv_path)
    fig = build_figure(rows, log_x=log_x, log_y=log_y, curves=curves)
    try:
        fig.savefig(out_path)
    finally:
        plt.close(fig)
    return out_path


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dacplots", description="plot bribe-bound sweep CSVs"
    )
    parser.add_argument("csv", help="sweep CSV produced by `dacsim sweep`")
    parser.add_argument("--out", help="output PNG path (default: <csv>.png)")
    parser.add_argument(
        "--curves", choices=("lower", "upper", "both"), default="lower"
    )
    parser.add_argument("--linear-x", action="store_true", help="linear N axis")
    parser.add_argument("--linear-y", action="store_true", help="linear bribe axis")
    args = parser.parse_args(argv)
    out = args.out or (args.csv.rsplit(".", 1)[0] + ".png")
    try:
        render(
            args.csv,
            out,
            log_x=not args.linear_x,
            log_y=not args.linear_y,
            curves=args.curves,
        )
    except (SweepFormatError, ValueError) as exc:
        print(f"dacplots: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
