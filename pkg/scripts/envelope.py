"""Derivative envelope for the quail map, plus the multi-interval certificates.

    python3 scripts/envelope.py --out results/
"""
import argparse
from pathlib import Path

from noisy_pbc.maps import get_map
from noisy_pbc.stability import PARTITIONS, multi_interval_certificate, refine_alpha
from noisy_pbc.sweep import envelope_curve, write_sidecar


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--n", type=int, default=1000)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    curve = envelope_curve(get_map("quail"), n=args.n)
    curve.to_csv(out / "envelope_quail.csv")
    print(f"quail: alpha0 = {curve.alpha:.7f}, max envel = {curve.max:.7f} at x = {curve.argmax:.4f}")

    certs = {}
    for name, (a, Lm, Lp) in PARTITIONS.items():
        cert = multi_interval_certificate(get_map(name), a, Lm, Lp)
        certs[name] = cert.to_dict()
        print(f"{name}: certified={cert.certified} alpha0={cert.alpha0:.6f} {cert.reason}")
    a, Lm, _ = PARTITIONS["exnotglob"]
    ref = refine_alpha(get_map("exnotglob"), a, Lm)
    print(f"exnotglob refined gain: {ref.alpha_bar:.6f}")
    write_sidecar(out / "envelope.json", {"quail_max": curve.max, "quail_alpha0": curve.alpha,
                                          "certificates": certs, "refined": ref.alpha_bar})


if __name__ == "__main__":
    main()
