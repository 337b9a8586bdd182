"""Hierarchy against brute force for one damped mode, in all three bath forms."""

import argparse
import time

import numpy as np

from iohoem.correlations import single_mode_correlation
from iohoem.hierarchy import Hierarchy, HierarchySpec, SystemModel, bath_terms
from iohoem.operators import SIGMA_X, SIGMA_Z, trace_distance
from iohoem.oracles import DampedMode, fock_brute_force

EXCITED = np.array([[1, 0], [0, 0]], dtype=complex)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--coupling", type=float, default=0.3)
    ap.add_argument("--frequency", type=float, default=1.0)
    ap.add_argument("--decay", type=float, default=1.0)
    ap.add_argument("--depth", type=int, default=8)
    ap.add_argument("--fock-cut", type=int, default=8)
    args = ap.parse_args()

    system = SystemModel(0.5 * SIGMA_Z, [SIGMA_X])
    corr = {(0, 0): single_mode_correlation(args.coupling, args.frequency, args.decay)}
    t = np.linspace(0, 5 / args.decay, 51)

    start = time.perf_counter()
    ref = fock_brute_force(system.hamiltonian, system.couplings,
                           [DampedMode(args.frequency, args.coupling, args.decay)], EXCITED, t,
                           fock_cut=args.fock_cut)
    print(f"fock     {time.perf_counter() - start:6.2f} s")
    for rep in ("direct", "causal", "real"):
        start = time.perf_counter()
        hier = Hierarchy(HierarchySpec(system, bath_terms(system, corr, rep), args.depth))
        rho = hier.root(hier.integrate(EXCITED, t))
        worst = max(trace_distance(a, b) for a, b in zip(rho, ref))
        print(f"{rep:8s} {time.perf_counter() - start:6.2f} s  {len(hier.indices):4d} ADMs  "
              f"max trace distance {worst:.2e}")


if __name__ == "__main__":
    main()
