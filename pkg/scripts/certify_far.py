"""LP lower bounds on the TV distance from the built-in far instances to their classes."""
import numpy as np

from disttest.certify import siirv_far_certificate, tv_lower_bound
from disttest.dist_core import Pmf, SiirvSpec, convolve_exact


def main():
    rows = []
    rows.append(("uniform[0,400] vs PBD(100)", siirv_far_certificate(Pmf(0, np.full(401, 1 / 401)), 100, 2)))
    a = convolve_exact(SiirvSpec.binomial(100, 0.2)).on_window(0, 100)
    b = convolve_exact(SiirvSpec.binomial(100, 0.8)).on_window(0, 100)
    rows.append(("bimodal mixture vs PBD(100)", siirv_far_certificate(Pmf(0, (a + b) / 2), 100, 2)))
    for n in (40, 100):
        rows.append((f"composition-uniform vs PMD({n},2)", siirv_far_certificate(Pmf(0, np.full(n + 1, 1 / (n + 1))), n, 2)))
    w = np.zeros(41)
    w[0] = w[-1] = 0.5
    rows.append(("two-spike vs log-concave", tv_lower_bound(Pmf(0, w), 0, 40, unimodal=True, full_mass=False)))
    for name, v in rows:
        print(f"{name:36s} tv >= {v:.4f}")


if __name__ == "__main__":
    main()
