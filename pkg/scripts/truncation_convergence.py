"""How fast the reduced state settles as the hierarchy depth grows.

Prints, for each depth, the largest entrywise change of rho_S over the time
grid relative to the previous depth and the distance to a brute-force Fock
solution of the same damped-mode bath.
"""

import argparse

import numpy as np

from iohoem.correlations import single_mode_correlation
from iohoem.hierarchy import Hierarchy, HierarchySpec, SystemModel, bath_terms
from iohoem.operators import SIGMA_X, SIGMA_Z
from iohoem.oracles import DampedMode, fock_brute_force

EXCITED = np.array([[1, 0], [0, 0]], dtype=complex)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--coupling", type=float, default=0.5)
    ap.add_argument("--frequency", type=float, default=1.0)
    ap.add_argument("--decay", type=float, default=0.5)
    ap.add_argument("--max-depth", type=int, default=10)
    ap.add_argument("--representation", default="direct", choices=("direct", "causal", "real"))
    args = ap.parse_args()

    system = SystemModel(0.5 * SIGMA_Z, [SIGMA_X])
    corr = {(0, 0): single_mode_correlation(args.coupling, args.frequency, args.decay)}
    t = np.linspace(0, 5 / args.decay, 26)
    mode = DampedMode(args.frequency, args.coupling, args.decay)
    ref = fock_brute_force(system.hamiltonian, system.couplings, [mode], EXCITED, t, fock_cut=14)

    print(f"{'depth':>5} {'ADMs':>6} {'change':>10} {'vs Fock':>10}")
    prev = None
    for n in range(1, args.max_depth + 1):
        hier = Hierarchy(HierarchySpec(system, bath_terms(system, corr, args.representation), n))
        rho = hier.root(hier.integrate(EXCITED, t))
        change = np.nan if prev is None else np.max(np.abs(rho - prev))
        print(f"{n:5d} {len(hier.indices):6d} {change:10.2e} {np.max(np.abs(rho - ref)):10.2e}")
        prev = rho


if __name__ == "__main__":
    main()
