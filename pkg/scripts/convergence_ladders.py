#!/usr/bin/env python3
"""Export the finite-difference convergence ladders behind the field checks.

Two ladders, written as CSV and summarized with fitted orders:

* variation-oracle:  max |J_oracle - J_ode| against the variation step ds,
  where the oracle differences two actually-integrated neighbor geodesics
  and the ODE route propagates the same initial data.
* hamiltonian-intertwine:  residual of the index-lowering identity between
  the geodesic spray and the Hamiltonian field against the FD step delta.

Both should shrink at second order; the fitted slopes land near 2.
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from nullrays import checks as ck
from nullrays import contact as ct
from nullrays import geodesics as ge
from nullrays import jacobi as ja
from nullrays.rng import stream

ROOT = Path(__file__).resolve().parents[1]


def variation_ladder(seed: int):
    model = ck.curved_model(3)
    rng = stream(seed, "scripts.variation_ladder")
    x0 = ck.sample_point(model, rng, radius=1.0)
    dq = rng.uniform(-0.3, 0.3, size=3)
    d0 = ck.sample_direction(rng, 2)
    dd = rng.uniform(-0.2, 0.2, size=2)

    def lam(s):
        return x0 + s * dq

    def W(s):
        return ge.make_null(model, lam(s), d0 + s * dd).comps

    base = ge.integrate_geodesic(model, x0, W(0.0), (0.0, 1.0))
    ladder = [4e-2, 2e-2, 1e-2, 5e-3, 2.5e-3, 1.25e-3]
    rows = []
    for ds in ladder:
        oracle = ja.variation_jacobi_oracle(model, lam, W, ds, (0.0, 1.0))
        ode = ja.integrate_jacobi(base, ja.JacobiInit(oracle.J0, oracle.J0dot))
        rows.append((ds, float(np.max(np.abs(oracle.Js - ode.Js)))))
    return rows


def intertwine_ladder(seed: int):
    model = ck.curved_model(3)
    rng = stream(seed, "scripts.intertwine_ladder")
    x = ck.sample_point(model, rng, radius=0.5)
    v = ge.make_null(model, x, ck.sample_direction(rng, 2)).comps
    ladder = [1.6e-2, 8e-3, 4e-3, 2e-3, 1e-3, 5e-4]
    return [(d, ct.hamiltonian_intertwine_check(model, x, v, delta=d)["r_spray"])
            for d in ladder]


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=ROOT / "out" / "ladders")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    args.out.mkdir(parents=True, exist_ok=True)

    for name, rows in (("variation_oracle", variation_ladder(args.seed)),
                       ("hamiltonian_intertwine", intertwine_ladder(args.seed))):
        path = args.out / f"{name}_ladder.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "error"])
            w.writerows([(repr(s), repr(e)) for s, e in rows])
        steps, errs = zip(*rows)
        order = ck.fit_order(steps, errs)
        print(f"{name}: fitted order {order:.3f}")
        for s, e in rows:
            print(f"  step={s:9.2e}  error={e:10.3e}")
        print(f"  -> {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
