"""Residual of the discrete operator on u(x) = max(x, 0)^s at x = 0.5 under mesh refinement."""
import argparse

import numpy as np

from fracp import GridFunction, KernelSpec, Lattice, apply_operator
from fracp import farfield as ff


def residual(s: float, h: float, half_width: float = 4.0) -> float:
    lat = Lattice((-half_width,), (half_width,), h)
    x = lat.coords[:, 0]
    u = GridFunction(lat, np.maximum(x, 0.0) ** s, ff.RadialPowerFarField(1.0, -s, (0.0,), halfspace=True))
    return abs(apply_operator(KernelSpec(dim=1, s=s, p=2.0), u, int(lat.index_of([0.5])[0])))


def run():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--s", type=float, nargs="+", default=[0.25, 0.5, 0.75])
    ap.add_argument("--levels", type=int, default=5, help="h = 1/8, 1/16, ...")
    a = ap.parse_args()
    hs = [2.0 ** -(3 + j) for j in range(a.levels)]
    print("s      " + "".join(f"h=1/{round(1 / h):<8d}" for h in hs) + "monotone")
    for s in a.s:
        r = [residual(s, h) for h in hs]
        mono = all(b < c for c, b in zip(r, r[1:]))
        print(f"{s:<6g} " + "".join(f"{v:<11.3e}" for v in r) + ("yes" if mono else "no"))


if __name__ == "__main__":
    run()
