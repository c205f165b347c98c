#!/usr/bin/env python3
"""Headline rate experiment: golden-rotated square vs axis-aligned control.

Writes CLI configs and artifacts under out/headline. The full grid matches
the acceptance suite (eps down to 1/64, eta = 10, ~minutes of runtime);
--quick uses a coarser grid for a fast look.
"""

import argparse
import json
import os

from polyhom import geometry, periodic
from polyhom.cli import main as cli_main


def write_inputs(base: str) -> dict:
    os.makedirs(base, exist_ok=True)
    paths = {}
    for name, poly in (("golden", geometry.golden_square()),
                       ("axis", geometry.unit_square())):
        p = os.path.join(base, f"{name}.json")
        with open(p, "w") as f:
            json.dump(geometry.polytope_to_dict(poly), f, indent=1)
        paths[name] = p
    g = periodic.from_coefficients(2, {(1, 0): 0.5, (-1, 0): 0.5,
                                       (1, 1): -0.5j, (-1, -1): 0.5j})
    paths["g"] = os.path.join(base, "g.json")
    with open(paths["g"], "w") as f:
        json.dump(periodic.periodic_to_dict(g), f, indent=1)
    return paths


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="out/headline")
    ap.add_argument("--quick", action="store_true", help="coarse grid, ~seconds")
    args = ap.parse_args()

    paths = write_inputs(args.out)
    if args.quick:
        epsilons = [1 / 4, 1 / 6, 1 / 8, 1 / 12, 1 / 16]
        eta = 6.0
    else:
        epsilons = [1 / 8, 1 / 12, 1 / 16, 1 / 24, 1 / 32, 1 / 48, 1 / 64]
        eta = 10.0

    for tag in ("golden", "axis"):
        cfg = {
            "schema": 1,
            "polytope": paths[tag],
            "periodic": paths["g"],
            "epsilons": epsilons,
            "p_values": [2.0, 5.0],
            "probe_distances": [0.15, 0.3] if tag == "golden" else [],
            "eta": eta,
            "delta": 0.01,
            "linear_tol": 1e-8,
        }
        cfg_path = os.path.join(args.out, f"sweep_{tag}.json")
        with open(cfg_path, "w") as f:
            json.dump(cfg, f, indent=1)
        print(f"== {tag} square ==")
        rc = cli_main(["sweep", "--config", cfg_path,
                       "--out", os.path.join(args.out, tag)])
        if rc != 0:
            raise SystemExit(rc)
    print(f"artifacts under {args.out}/golden and {args.out}/axis "
          "(sweep.csv, summary.json, loglog.dat, loglog.gp)")


if __name__ == "__main__":
    main()
