"""(alpha, ell) stability rasters: analytic verdict next to the empirical rate.

    python3 scripts/region.py --map "ricker r=3.5" --out results/
    python3 scripts/region.py --map exswitch --ell-max 0.2 --out results/
"""
import argparse
import os
from pathlib import Path

from noisy_pbc.maps import parse_map, probe_map
from noisy_pbc.noise import NoiseSpec
from noisy_pbc.stability import estimate_sides, local_constants
from noisy_pbc.sweep import alpha_grid, analytic_boundary, region_raster, write_sidecar


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--map", default="ricker r=3.5")
    ap.add_argument("--noise", default="bernoulli")
    ap.add_argument("--alpha-min", type=float, default=0.2)
    ap.add_argument("--alpha-max", type=float, default=0.6)
    ap.add_argument("--ell-max", type=float, default=0.36)
    ap.add_argument("--step", type=float, default=0.01)
    ap.add_argument("--paths", type=int, default=200)
    ap.add_argument("--horizon", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=20240611)
    ap.add_argument("--workers", type=int, default=os.cpu_count())
    ap.add_argument("--out", default="results")
    args = ap.parse_args()
    spec = parse_map(args.map)
    probe = probe_map(spec)
    kw = {}
    if probe.L0 is None:
        kw = {"L_pair": local_constants(spec, probe), "sides": estimate_sides(spec, probe)}
    reg = region_raster(spec, NoiseSpec(args.noise),
                        alpha_grid(args.alpha_min, args.alpha_max, args.step),
                        alpha_grid(0.0, args.ell_max, args.step), paths=args.paths,
                        horizon=args.horizon, master_seed=args.seed, workers=args.workers, **kw)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = "region_" + spec.describe().replace(" ", "_").replace("=", "")
    reg.to_csv(out / f"{stem}.csv")
    dis = reg.disagreements()
    write_sidecar(out / f"{stem}.json", {**reg.meta, "disagreements": dis,
                                         "boundary": analytic_boundary(reg)})
    print(f"{stem}: {len(dis)} cells certified but not converging")


if __name__ == "__main__":
    main()
