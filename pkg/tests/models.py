"""Benchmark models shared by the test modules."""

import numpy as np

from iohoem.correlations import ExponentialSeries, single_mode_correlation
from iohoem.hierarchy import DynamicField, StaticField, SystemModel
from iohoem.operators import SIGMA_X, SIGMA_Z
from iohoem.oracles import DephasingParams

EXCITED = np.array([[1, 0], [0, 0]], dtype=complex)
PLUS = 0.5 * np.ones((2, 2), dtype=complex)
MIXED = np.array([[0.4, 0.3 - 0.2j], [0.3 + 0.2j, 0.6]])


def rabi(coupling=0.3, frequency=1.0, decay=1.0, splitting=1.0):
    system = SystemModel(0.5 * splitting * SIGMA_Z, [SIGMA_X])
    return system, {(0, 0): single_mode_correlation(coupling, frequency, decay)}


def two_exponential():
    system = SystemModel(0.5 * SIGMA_Z, [SIGMA_X])
    corr = single_mode_correlation(0.4, 1.0, 0.6) + single_mode_correlation(0.3, -0.5, 1.2)
    return system, {(0, 0): corr}


DEPHASING = DephasingParams(coupling=0.6, frequency=1.3, decay=0.8)


def dephasing(params=DEPHASING, splitting=1.1):
    system = SystemModel(0.5 * splitting * SIGMA_Z, [SIGMA_Z])
    return system, {(0, 0): single_mode_correlation(params.coupling, params.frequency, params.decay)}


def input_photon_fields(params=DEPHASING):
    """Static fields creating one excitation of the damped mode at t = 0."""
    lam, z = params.coupling, params.rate

    def create(t):
        return lam * np.exp(-z * t)

    def annihilate(t):
        return lam * np.exp(-np.conj(z) * t)

    return [StaticField("in1", {0: create, 1: create}, 0.0),
            StaticField("in2", {0: annihilate, 1: annihilate}, 0.0)]


def mode_amplitude_field(coupling, frequency, decay, label="a"):
    """Running-time field for the mode annihilation operator acting from the left."""
    return DynamicField(label, {0: ExponentialSeries((coupling,), (decay + 1j * frequency,))})


def mode_amplitude_at(coupling, frequency, decay, t_j, label="a_fixed"):
    """The same field frozen at ``t_j``."""
    z = decay + 1j * frequency

    def kernel(tau):
        return coupling * np.exp(-z * (t_j - tau)) if tau < t_j else 0.0

    return StaticField(label, {0: kernel}, t_j)
