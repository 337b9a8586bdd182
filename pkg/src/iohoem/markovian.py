"""Single-photon scattering on a two-level emitter in the Markovian limit.

The emitter sits at ``x = 0`` in a waveguide with dispersion ``c|p|`` (plus
the negative-energy branch that makes the bath exactly Markovian). One input
photon is prepared as a Gaussian wave packet. The state is carried as 16
system blocks ``rho_{ab,ij}``: ``a, b`` flag contraction of the input
creation / annihilation fields with the environment, ``i, j`` the same for
the output fields at ``(x_out, t_out)``.

Input fields act as time-dependent drives between input flags. Output fields
are position eigenmodes; in the Markovian limit their coupling collapses to
a single impulse ("kick") at the time ``t* = t_out - |x_out|/c`` at which the
light reaching ``x_out`` left the emitter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .correlations import (WavePacket, free_field_overlap, omega_in,
                           omega_out_kick_times)
from .hierarchy import Kick, propagate
from .operators import (SIGMA_MINUS, SIGMA_PLUS, SIGMA_Z, commutator_super,
                        dissipator_super, left_mul_super, right_mul_super,
                        unvec, vec)
from .wick import FieldSet, assemble_series

N_BLOCKS = 16
BLK = 4
SIZE = N_BLOCKS * BLK
GROUND = np.array([[0, 0], [0, 1]], dtype=complex)
EXCITED = np.array([[1, 0], [0, 0]], dtype=complex)


@dataclass(frozen=True)
class ScatteringConfig:
    omega_s: float
    gamma: float
    wavepacket: WavePacket
    x_out: float = 0.0
    t_out: float = 0.0
    dx: float = 1e-3
    c: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "c", self.wavepacket.c)
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.t_out < 0:
            raise ValueError("t_out must be non-negative")
        if not self.dx > 0:
            raise ValueError("dx must be positive")
        if not math.isclose(self.wavepacket.gamma, self.gamma, rel_tol=1e-12, abs_tol=0.0):
            raise ValueError("wave packet and emitter must share the decay rate")
        for name in ("omega_s", "gamma", "x_out", "t_out", "dx"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def at(self, x_out: float, t_out: float) -> "ScatteringConfig":
        return replace(self, x_out=x_out, t_out=t_out)


def resonant_packet_config(x_in: float = -1.0, c: float = 1.0, dx: float = 1e-3) -> ScatteringConfig:
    """Emitter and packet with ``omega_S = 4.5 c/|x_in|``, ``Gamma = 0.4 omega_S``,
    ``p_in = omega_S / c`` and ``sigma_in = p_in / 2``."""
    omega_s = 4.5 * c / abs(x_in)
    gamma = 0.4 * omega_s
    p_in = omega_s / c
    wp = WavePacket(x_in=x_in, p_in=p_in, sigma_in=p_in / 2, c=c, gamma=gamma)
    return ScatteringConfig(omega_s=omega_s, gamma=gamma, wavepacket=wp, dx=dx)


def block_slot(a: int, b: int, i: int, j: int) -> int:
    """Position of ``rho_{ab,ij}``: input pair outer, output pair inner."""
    return 4 * (a + 2 * b) + (i + 2 * j)


def block(y, a: int, b: int, i: int, j: int) -> np.ndarray:
    s = block_slot(a, b, i, j)
    return unvec(np.asarray(y)[s * BLK:(s + 1) * BLK], 2)


def initial_vector(rho0) -> np.ndarray:
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (2, 2):
        raise ValueError("rho0 must be 2x2")
    if abs(np.trace(rho0) - 1) > 1e-10 or np.max(np.abs(rho0 - rho0.conj().T)) > 1e-12:
        raise ValueError("rho0 must be hermitian with unit trace")
    y = np.zeros(SIZE, dtype=complex)
    y[:BLK] = vec(rho0)
    return y


def lindblad_l0(cfg: ScatteringConfig) -> np.ndarray:
    h_s = 0.5 * cfg.omega_s * SIGMA_Z
    return -1j * commutator_super(h_s) + cfg.gamma * dissipator_super(SIGMA_MINUS)


def drive_in(cfg: ScatteringConfig, sign: int, t: float) -> np.ndarray:
    """``-i Omega_in_sign(t) [sigma_sign, .]`` in the system Schroedinger picture.

    In the interaction picture the drive carries ``exp(+-i omega_S t)``; moving
    to the Schroedinger picture cancels it exactly, so no phase remains.
    """
    op = SIGMA_PLUS if sign == 1 else SIGMA_MINUS
    return -1j * omega_in(cfg.wavepacket, sign, t) * commutator_super(op)


def _flag_lift(pairs, mat: np.ndarray) -> np.ndarray:
    out = np.zeros((SIZE, SIZE), dtype=complex)
    for dst, src in pairs:
        out[dst * BLK:(dst + 1) * BLK, src * BLK:(src + 1) * BLK] += mat
    return out


def _raise_pairs(which: str):
    pairs = []
    for a in (0, 1):
        for b in (0, 1):
            for i in (0, 1):
                for j in (0, 1):
                    flags = {"a": a, "b": b, "i": i, "j": j}
                    if flags[which] == 0:
                        continue
                    src = dict(flags)
                    src[which] = 0
                    pairs.append((block_slot(a, b, i, j),
                                  block_slot(src["a"], src["b"], src["i"], src["j"])))
    return pairs


class InOutGenerator:
    """Time-dependent generator ``I_16 (x) L0 + drives`` on the 16-block vector."""

    def __init__(self, cfg: ScatteringConfig):
        self.cfg = cfg
        self.l0 = np.kron(np.eye(N_BLOCKS), lindblad_l0(cfg))
        comm_p = -1j * commutator_super(SIGMA_PLUS)
        comm_m = -1j * commutator_super(SIGMA_MINUS)
        # input creation field raises a; input annihilation field raises b
        self.raise_a = _flag_lift(_raise_pairs("a"), comm_p)
        self.raise_b = _flag_lift(_raise_pairs("b"), comm_m)

    def matrix(self, t: float) -> np.ndarray:
        om_p = omega_in(self.cfg.wavepacket, 1, t)
        om_m = omega_in(self.cfg.wavepacket, -1, t)
        return self.l0 + om_p * self.raise_a + om_m * self.raise_b

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        om_p = omega_in(self.cfg.wavepacket, 1, t)
        # Omega_in_- = -conj(Omega_in_+) for a real packet centre and bias
        om_m = -om_p.conjugate()
        return self.l0 @ y + om_p * (self.raise_a @ y) + om_m * (self.raise_b @ y)


def build_in_out_generator(cfg: ScatteringConfig, t: float) -> np.ndarray:
    if t < 0:
        raise ValueError("t must be non-negative")
    return InOutGenerator(cfg).matrix(t)


def kick_generator(cfg: ScatteringConfig) -> np.ndarray:
    """Output-flag raising generator: ``-. sigma_+`` raises ``i``, ``sigma_- .`` raises ``j``."""
    amp = math.sqrt(cfg.gamma * cfg.dx / cfg.c)
    return amp * (_flag_lift(_raise_pairs("i"), -right_mul_super(SIGMA_PLUS))
                  + _flag_lift(_raise_pairs("j"), left_mul_super(SIGMA_MINUS)))


def kick_operator(cfg: ScatteringConfig, t_star: float, weight: float | None = None) -> np.ndarray:
    """Exact exponential of the kick generator.

    Each output flag can be raised once, so the generator cubed vanishes and
    ``exp(G) = 1 + G + G^2 / 2``. The exponent is halved at ``t* = 0``.
    """
    if weight is None:
        weight = 0.5 if t_star == 0 else 1.0
    g = weight * kick_generator(cfg)
    return np.eye(SIZE, dtype=complex) + g + 0.5 * (g @ g)


def solve_scattering(cfg: ScatteringConfig, rho0=GROUND, t_grid=None, rtol: float = 1e-9,
                     atol: float = 1e-12, method: str = "DOP853") -> np.ndarray:
    """Propagate the 16-block state from ``t = 0`` to the grid (default ``[t_out]``)."""
    t_grid = np.array([cfg.t_out] if t_grid is None else t_grid, dtype=float)
    kicks = [Kick(t, kick_operator(cfg, t, w)) for t, w in omega_out_kick_times(cfg.x_out, cfg.t_out, cfg.c)]
    gen = InOutGenerator(cfg)
    return propagate(gen.rhs, initial_vector(rho0), t_grid, kicks, rtol=rtol, atol=atol,
                     method=method, t0=0.0)


def output_fieldset(overlap: complex) -> FieldSet:
    """Free pairings of the four fields entering the occupation at ``x_out``.

    Only the output creation field with the input annihilation field (and the
    conjugate pair) and the two input fields correlate in the vacuum.
    """
    return FieldSet(("out1", "out2", "in1", "in2"),
                    {("out1", "in2"): overlap, ("out2", "in1"): np.conj(overlap),
                     ("in1", "in2"): 1.0})


def _complement_blocks(y) -> dict:
    out = {}
    labels = ("out1", "out2", "in1", "in2")
    for mask in range(16):
        comp = tuple(lab for bit, lab in enumerate(labels) if mask >> bit & 1)
        flags = {lab: int(lab in comp) for lab in labels}
        out[comp] = block(y, flags["in1"], flags["in2"], flags["out1"], flags["out2"])
    return out


def observable_expectation(cfg: ScatteringConfig, y, overlap: complex | None = None,
                           imag_tol: float = 1e-8) -> float:
    """Occupation ``dx <b_+^dagger b_+>`` at ``(x_out, t_out)`` from the final state."""
    if overlap is None:
        overlap = free_field_overlap(cfg.wavepacket, cfg.x_out, cfg.t_out, cfg.dx)
    mat = assemble_series(output_fieldset(overlap), _complement_blocks(y))
    val = np.trace(mat)
    scale = max(1.0, abs(val.real))
    if abs(val.imag) > imag_tol * scale:
        raise ArithmeticError(f"occupation has imaginary part {val.imag:.3e}")
    return float(val.real)


def system_state(y) -> np.ndarray:
    """Reduced emitter state with the input photon (output fields uncontracted)."""
    return block(y, 0, 0, 0, 0) - block(y, 1, 1, 0, 0)


def density(cfg: ScatteringConfig, rho0=GROUND, **kwargs) -> float:
    """Occupation density ``<O^x> / dx`` at ``(cfg.x_out, cfg.t_out)``."""
    y = solve_scattering(cfg, rho0, **kwargs)[-1]
    return observable_expectation(cfg, y) / cfg.dx


def density_grid(cfg: ScatteringConfig, xs, ts, rho0=GROUND, **kwargs) -> np.ndarray:
    """Densities on the grid ``ts x xs``, one solve per point."""
    out = np.empty((len(ts), len(xs)))
    for a, t in enumerate(ts):
        for b, x in enumerate(xs):
            out[a, b] = density(cfg.at(float(x), float(t)), rho0, **kwargs)
    return out


def pairing_defect(y) -> float:
    """Largest ``|rho_{ab,ij} - (-1)^(a+b+i+j) rho_{ba,ji}^dagger|`` over all blocks.

    Each drive or kick maps to its partner under the adjoint up to a sign.
    """
    worst = 0.0
    for a in (0, 1):
        for b in (0, 1):
            for i in (0, 1):
                for j in (0, 1):
                    sign = (-1) ** (a + b + i + j)
                    d = block(y, a, b, i, j) - sign * block(y, b, a, j, i).conj().T
                    worst = max(worst, float(np.max(np.abs(d))))
    return worst
