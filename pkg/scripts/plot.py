"""Plot CSVs written by the other scripts (needs matplotlib).

    python3 scripts/plot.py results/bif_ricker3.5_ell0.2.csv
    python3 scripts/plot.py results/region_ricker_r3.5.csv
    python3 scripts/plot.py results/envelope_quail.csv
"""
import csv
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _read(path: Path) -> tuple[list[str], list[list[str]]]:
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def plot(path: Path) -> Path:
    head, rows = _read(path)
    fig, ax = plt.subplots(figsize=(6, 4))
    if head == ["alpha", "sample"]:
        a = np.array([float(r[0]) for r in rows])
        x = np.array([float(r[1]) for r in rows])
        ax.plot(a, x, ",k", alpha=0.4)
        ax.set_xlabel("alpha")
        ax.set_ylabel("x_n")
    elif head == ["alpha", "ell", "analytic", "rate"]:
        al = sorted({float(r[0]) for r in rows})
        el = sorted({float(r[1]) for r in rows})
        rate = np.full((len(el), len(al)), np.nan)
        holds = np.zeros_like(rate)
        for r in rows:
            i, j = el.index(float(r[1])), al.index(float(r[0]))
            rate[i, j] = float(r[3]) if r[3] else np.nan
            holds[i, j] = r[2] == "holds"
        ext = (al[0], al[-1], el[0], el[-1])
        ax.imshow(rate, origin="lower", extent=ext, aspect="auto", cmap="Greys", vmin=0, vmax=1)
        ax.contour(al, el, holds, levels=[0.5], colors="red")
        ax.set_xlabel("alpha")
        ax.set_ylabel("ell")
    elif head == ["x", "envel"]:
        x = np.array([float(r[0]) for r in rows])
        v = np.array([float(r[1]) for r in rows])
        ax.plot(x, v)
        ax.set_xlabel("x")
        ax.set_ylabel("envel")
    else:
        raise SystemExit(f"unrecognised columns {head}")
    dest = path.with_suffix(".png")
    fig.tight_layout()
    fig.savefig(dest, dpi=150)
    return dest


if __name__ == "__main__":
    for p in sys.argv[1:]:
        print(plot(Path(p)))
