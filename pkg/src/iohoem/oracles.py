"""Independent reference solutions.

None of these go through the hierarchy or the input-output machinery:

* single-excitation scattering amplitudes of the emitter and waveguide,
  solved from the Schroedinger equation by quadrature;
* the exact reduced state under pure dephasing by a damped mode;
* brute-force propagation of system plus damped modes in a truncated Fock
  space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.linalg import expm
from scipy import sparse

from .correlations import WavePacket
from .operators import (destroy, is_hermitian, left_mul_super, right_mul_super,
                        unvec, vec)


class ConvergenceError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# single-excitation scattering


def _gl_panels(edges, order: int = 24):
    """Composite Gauss-Legendre nodes and weights over consecutive ``edges``."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.asarray(edges, dtype=float)
    lo, hi = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
    weights = 0.5 * (hi - lo) * w
    return nodes.ravel(), weights.ravel()


def _relax(u, t):
    """``(1 - exp(-u t)) / u`` with its removable singularity at ``u = 0``."""
    u = np.asarray(u, dtype=complex)
    ut = u * t
    small = np.abs(ut) < 1e-4
    safe = np.where(small, 1.0, u)
    exact = -np.expm1(-safe * t) / safe
    series = t * (1 - ut / 2 + ut * ut / 6 - ut ** 3 / 24)
    return np.where(small, series, exact)


@dataclass(frozen=True)
class EmitterWaveguide:
    """Two-level emitter at ``x = 0`` coupled with flat strength to a two-branch waveguide.

    Branch ``+`` has energy ``c|p|``, branch ``-`` has ``-c|p|``; the coupling
    ``sqrt(gamma c / 2 pi)`` gives an amplitude decay rate ``gamma``.
    """

    omega_s: float
    gamma: float
    packet: WavePacket | None = None
    excited_amplitude: complex = 0.0
    speed: float = 1.0

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.packet is not None:
            object.__setattr__(self, "speed", self.packet.c)
        if not self.speed > 0:
            raise ValueError("speed must be positive")

    @classmethod
    def from_config(cls, cfg, excited_amplitude: complex = 0.0) -> "EmitterWaveguide":
        """From any object with ``omega_s``, ``gamma`` and ``wavepacket`` attributes."""
        return cls(cfg.omega_s, cfg.gamma, cfg.wavepacket, excited_amplitude)

    @property
    def c(self) -> float:
        return self.speed

    def _amplitude(self, p):
        if self.packet is None:
            return np.zeros(np.shape(p), dtype=complex)
        return self.packet.amplitude(p)

    @property
    def coupling(self) -> float:
        return math.sqrt(self.gamma * self.c / (2 * math.pi))

    @property
    def pole(self) -> complex:
        return self.gamma + 1j * self.omega_s

    def packet_nodes(self, width: float = 10.0, panels: int = 40, order: int = 24):
        """Quadrature over the packet support, split at the kink ``p = 0``."""
        pk = self.packet
        if pk is None:
            return np.zeros(1), np.zeros(1)
        lo, hi = pk.p_in - width * pk.sigma_in, pk.p_in + width * pk.sigma_in
        if lo < 0 < hi:
            n_lo = max(2, int(round(panels * -lo / (hi - lo))))
            edges = np.concatenate([np.linspace(lo, 0, n_lo + 1), np.linspace(0, hi, panels - n_lo + 1)[1:]])
        else:
            edges = np.linspace(lo, hi, panels + 1)
        return _gl_panels(edges, order)

    def emitter_amplitude(self, t, nodes=None) -> np.ndarray:
        """Excited-state amplitude ``c_1(t)`` (Schroedinger picture)."""
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t_arr < 0):
            raise ValueError("t must be non-negative")
        p, wts = self.packet_nodes() if nodes is None else nodes
        amp = self._amplitude(p) * wts
        omega = self.c * np.abs(p)
        out = np.empty(t_arr.shape, dtype=complex)
        for k, tk in enumerate(t_arr):
            scattered = np.sum(amp * np.exp(-1j * omega * tk) * _relax(self.pole - 1j * omega, tk))
            out[k] = self.excited_amplitude * np.exp(-self.pole * tk) - 1j * self.coupling * scattered
        return out if np.ndim(t) else out[0]

    def free_wavefunction(self, x, t, nodes=None) -> np.ndarray:
        """Freely propagated packet in the positive branch, ``psi(x, t)``."""
        p, wts = self.packet_nodes() if nodes is None else nodes
        amp = self._amplitude(p) * wts * np.exp(-1j * self.c * np.abs(p) * t)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return (np.exp(1j * np.outer(x, p)) @ amp) / math.sqrt(2 * math.pi)

    def branch_amplitudes(self, p, t, nodes=None) -> tuple[np.ndarray, np.ndarray]:
        """Momentum amplitudes ``(c_+(p, t), c_-(p, t))`` in the Schroedinger picture."""
        if t < 0:
            raise ValueError("t must be non-negative")
        pq, wq = self.packet_nodes() if nodes is None else nodes
        amp_q = self._amplitude(pq) * wq
        om_q = self.c * np.abs(pq)
        p = np.asarray(p, dtype=float)
        g = self.coupling
        out = []
        for branch in (1, -1):
            om = branch * self.c * np.abs(p)
            relax_s = _relax(self.pole - 1j * om, t)
            # int_0^t exp(i om s) c_1(s) ds, term by term
            cross = _relax(1j * (om_q[None, :] - om[:, None]), t) - relax_s[:, None]
            inner = self.excited_amplitude * relax_s - 1j * g * (cross @ (amp_q / (self.pole - 1j * om_q)))
            initial = self._amplitude(p) if branch == 1 else np.zeros(p.shape, dtype=complex)
            out.append(np.exp(-1j * om * t) * (initial - 1j * g * inner))
        return out[0], out[1]

    def branch_populations(self, t, cutoff: float = 400.0, panel: float = 0.5,
                           order: int = 16) -> tuple[float, float, complex]:
        """``(N_+, N_-, <c_+, c_->)`` integrated over ``|p| < cutoff``."""
        n = int(math.ceil(cutoff / panel))
        p, w = _gl_panels(np.linspace(-n * panel, n * panel, 2 * n + 1), order)
        cp, cn = self.branch_amplitudes(p, t)
        return (float(np.sum(w * np.abs(cp) ** 2)), float(np.sum(w * np.abs(cn) ** 2)),
                complex(np.sum(w * np.conj(cp) * cn)))

    def norm(self, t, cutoff: float = 400.0, panel: float = 0.5, order: int = 16) -> float:
        """Total probability at ``t``; the tail beyond the cutoff is added in closed form."""
        n_plus, n_minus, _ = self.branch_populations(t, cutoff, panel, order)
        c1 = self.emitter_amplitude(t)
        tail = 2 * self.gamma * abs(c1) ** 2 / (math.pi * self.c * math.ceil(cutoff / panel) * panel)
        return n_plus + n_minus + tail + abs(c1) ** 2

    def right_moving(self, x, t) -> np.ndarray:
        """Position amplitude of the local field, both branches summed.

        The field is the free packet plus the light emitted at the retarded
        time ``t - |x|/c``. Each branch alone also carries a nonlocal tail;
        the tails of the two branches cancel in the sum.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        nodes = self.packet_nodes()
        psi = self.free_wavefunction(x, t, nodes)
        retarded = t - np.abs(x) / self.c
        live = retarded > 0
        if np.any(live):
            c1 = np.atleast_1d(self.emitter_amplitude(retarded[live], nodes))
            psi[live] -= 1j * math.sqrt(self.gamma / self.c) * c1
        return psi


def _as_system(model) -> EmitterWaveguide:
    return model if isinstance(model, EmitterWaveguide) else EmitterWaveguide.from_config(model)


def analytic_c1(model, t):
    """Emitter amplitude for an :class:`EmitterWaveguide` or a scattering config."""
    return _as_system(model).emitter_amplitude(t)


def analytic_density(model, x, t) -> np.ndarray:
    """Photon density of the local field at ``x`` (see ``right_moving``)."""
    return np.abs(_as_system(model).right_moving(x, t)) ** 2


def discretized_emitter_amplitude(system: EmitterWaveguide, t_grid, band: float = 200.0,
                                  dp: float = 0.02) -> np.ndarray:
    """``c_1(t)`` from a finite set of waveguide modes, by direct integration.

    The energy band is centred on ``omega_S`` so that the Lamb shift from the
    truncated continuum vanishes. Intended as a cross-check only.
    """
    c = system.c
    p_pos = np.arange(-(system.omega_s + band) / c, (system.omega_s + band) / c + dp / 2, dp)
    w_neg = band - system.omega_s
    if w_neg <= 0:
        raise ValueError("band must exceed omega_S")
    p_neg = np.arange(-w_neg / c, w_neg / c + dp / 2, dp)
    omega = np.concatenate([c * np.abs(p_pos), -c * np.abs(p_neg)])
    a0 = np.concatenate([system._amplitude(p_pos) * math.sqrt(dp),
                         np.zeros(p_neg.size, dtype=complex)])
    gk = system.coupling * math.sqrt(dp)

    def rhs(_, y):
        c1, a = y[0], y[1:]
        out = np.empty_like(y)
        out[0] = -1j * system.omega_s * c1 - 1j * gk * np.sum(a)
        out[1:] = -1j * omega * a - 1j * gk * c1
        return out

    y0 = np.concatenate([[system.excited_amplitude], a0]).astype(complex)
    sol = integrate.solve_ivp(rhs, (0.0, float(np.max(t_grid))), y0, t_eval=np.asarray(t_grid, float),
                              method="DOP853", rtol=1e-10, atol=1e-12)
    if not sol.success:
        raise RuntimeError(sol.message)
    return sol.y[0]


# ---------------------------------------------------------------------------
# pure dephasing


@dataclass(frozen=True)
class DephasingParams:
    """Single damped mode with correlation ``coupling^2 exp(-(i frequency + decay) t)``."""

    coupling: float
    frequency: float
    decay: float

    @property
    def rate(self) -> complex:
        return self.decay + 1j * self.frequency


def dephasing_f(params: DephasingParams, t: float) -> complex:
    """Double integral of the bath correlation, ``int_0^t ds int_0^s C(u) du``."""
    z = params.rate
    return params.coupling ** 2 * (np.exp(-z * t) - 1 + z * t) / z ** 2


def dephasing_input_kernel(params: DephasingParams, t: float) -> complex:
    """``int_0^t C_in(s) ds`` for a field that creates one mode excitation at ``t = 0``."""
    z = params.rate
    return params.coupling * (-np.expm1(-z * t)) / z


def dephasing_input_weight(params: DephasingParams, t: float) -> float:
    """Weight of ``2 s rho s - s^2 rho - rho s^2`` added by the initial mode excitation."""
    lam, om, gam = params.coupling, params.frequency, params.decay
    val = lam ** 2 * (1 - np.exp(-(1j * om + gam) * t)) * (1 - np.exp((1j * om - gam) * t)) / (om ** 2 + gam ** 2)
    return float(val.real)


def _dephasing_super(s, f) -> np.ndarray:
    s2 = s @ s
    sandwich = np.kron(s.T, s)
    return f * (sandwich - left_mul_super(s2)) + np.conj(f) * (sandwich - right_mul_super(s2))


def dephasing_rho(s, rho0, t: float, params: DephasingParams, h_s=None,
                  with_input: bool = False) -> np.ndarray:
    """Exact reduced state for a coupling that commutes with the system Hamiltonian.

    With ``with_input`` the mode starts with one excitation instead of the
    vacuum.
    """
    s = np.asarray(s, dtype=complex)
    rho0 = np.asarray(rho0, dtype=complex)
    d = s.shape[0]
    if not is_hermitian(s):
        raise ValueError("coupling operator must be hermitian")
    if h_s is not None:
        h_s = np.asarray(h_s, dtype=complex)
        if np.max(np.abs(h_s @ s - s @ h_s)) > 1e-12:
            raise ValueError("pure dephasing needs [H_S, s] = 0")
    if t < 0:
        raise ValueError("t must be non-negative")
    rho = unvec(expm(_dephasing_super(s, dephasing_f(params, t))) @ vec(rho0), d)
    if with_input:
        g = dephasing_input_weight(params, t)
        rho = rho + g * (2 * s @ rho @ s - s @ s @ rho - rho @ s @ s)
    if h_s is not None:
        evals, evecs = np.linalg.eigh(h_s)
        u = (evecs * np.exp(-1j * evals * t)) @ evecs.conj().T
        rho = u @ rho @ u.conj().T
    return rho


# ---------------------------------------------------------------------------
# brute force in a truncated Fock space


@dataclass(frozen=True)
class DampedMode:
    """Mode ``frequency a^+a`` coupled by ``coupling * s_q (a + a^+)``, damped at ``decay``."""

    frequency: float
    coupling: float
    decay: float
    coupling_index: int = 0


def _embed(op, k: int, dims) -> sparse.csr_matrix:
    out = sparse.identity(1, dtype=complex, format="csr")
    for j, dim in enumerate(dims):
        out = sparse.kron(out, op if j == k else sparse.identity(dim, dtype=complex), format="csr")
    return out


def _liouvillian_sparse(h, jumps) -> sparse.csr_matrix:
    n = h.shape[0]
    eye = sparse.identity(n, dtype=complex, format="csr")
    gen = -1j * (sparse.kron(eye, h) - sparse.kron(h.T, eye))
    for jump in jumps:
        ldl = jump.conj().T @ jump
        gen = gen + 2 * sparse.kron(jump.conj(), jump) - sparse.kron(eye, ldl) - sparse.kron(ldl.T, eye)
    return gen.tocsr()


MAX_MODES = 3


def _fock_solve(hamiltonian, couplings, modes, rho0, fock_cut, t_grid, initial_modes, rtol, atol):
    if fock_cut < 2:
        raise ValueError("fock_cut must be at least 2")
    if len(modes) > MAX_MODES:
        raise ValueError(f"at most {MAX_MODES} modes are supported")
    h_s = np.asarray(hamiltonian, dtype=complex)
    d = h_s.shape[0]
    dims = [d] + [fock_cut] * len(modes)
    a = sparse.csr_matrix(destroy(fock_cut))
    ham = _embed(sparse.csr_matrix(h_s), 0, dims)
    jumps, lowering = [], []
    for k, mode in enumerate(modes, start=1):
        ak = _embed(a, k, dims)
        lowering.append(ak)
        s = _embed(sparse.csr_matrix(np.asarray(couplings[mode.coupling_index], dtype=complex)), 0, dims)
        ham = ham + mode.frequency * (ak.conj().T @ ak) + mode.coupling * (s @ (ak + ak.conj().T))
        if mode.decay > 0:
            jumps.append(math.sqrt(mode.decay) * ak)
    gen = _liouvillian_sparse(ham.tocsr(), jumps)

    n_env = fock_cut ** len(modes)
    if initial_modes is None:
        env = np.zeros((n_env, n_env), dtype=complex)
        env[0, 0] = 1.0
    else:
        env = np.asarray(initial_modes, dtype=complex)
        if env.shape != (n_env, n_env):
            raise ValueError(f"initial_modes must have shape {(n_env, n_env)}")
    full0 = np.kron(np.asarray(rho0, dtype=complex), env)
    t_grid = np.asarray(t_grid, dtype=float)
    sol = integrate.solve_ivp(lambda _, y: gen @ y, (0.0, float(t_grid[-1])), vec(full0),
                              t_eval=t_grid, method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(sol.message)
    return sol.y.T, d, n_env, lowering


def fock_brute_force(hamiltonian, couplings, modes, rho0, t_grid, fock_cut: int = 6,
                     initial_modes=None, check_convergence: bool = False, tol: float = 1e-6,
                     rtol: float = 1e-11, atol: float = 1e-13) -> np.ndarray:
    """Reduced system states on ``t_grid`` from the full system-plus-modes master equation.

    ``initial_modes`` optionally gives the joint initial state of the modes
    (default: all in the vacuum). With ``check_convergence`` the run is
    repeated with two more Fock levels and ``ConvergenceError`` is raised if
    the reduced states differ by more than ``tol``.
    """
    ys, d, n_env, _ = _fock_solve(hamiltonian, couplings, modes, rho0, fock_cut, t_grid,
                                  initial_modes, rtol, atol)
    out = np.empty((ys.shape[0], d, d), dtype=complex)
    for k, y in enumerate(ys):
        full = unvec(y, d * n_env).reshape(d, n_env, d, n_env)
        out[k] = np.einsum("ajbj->ab", full)
    if check_convergence:
        if initial_modes is not None:
            raise ValueError("convergence check needs the default vacuum initial state")
        finer = fock_brute_force(hamiltonian, couplings, modes, rho0, t_grid, fock_cut + 2,
                                 rtol=rtol, atol=atol)
        err = float(np.max(np.abs(finer - out)))
        if err > tol:
            raise ConvergenceError(f"Fock cut {fock_cut} not converged: change {err:.3e} > {tol:.1e}")
    return out


def fock_mode_expectation(hamiltonian, couplings, modes, rho0, t_grid, fock_cut: int = 6,
                          mode: int = 0, rtol: float = 1e-11, atol: float = 1e-13) -> np.ndarray:
    """``<a_mode>(t)`` from the same brute-force propagation, modes starting in the vacuum."""
    ys, d, n_env, lowering = _fock_solve(hamiltonian, couplings, modes, rho0, fock_cut, t_grid,
                                         None, rtol, atol)
    op = lowering[mode]
    dim = d * n_env
    return np.array([(op @ unvec(y, dim)).trace() for y in ys])


# ---------------------------------------------------------------------------
# quadrature versions of closed-form wave-packet integrals


def omega_in_quadrature(w: WavePacket, sign: int, t: float) -> complex:
    """Input drive frequency by direct quadrature over the momentum profile."""
    pref = 1j * math.sqrt(w.gamma * w.c / (2 * math.pi))
    lo, hi = w.p_in - 12 * w.sigma_in, w.p_in + 12 * w.sigma_in

    def part(fn):
        re = integrate.quad(lambda p: fn(p).real, lo, hi, points=[0.0] if lo < 0 < hi else None,
                            limit=400, epsabs=1e-14, epsrel=1e-12)[0]
        im = integrate.quad(lambda p: fn(p).imag, lo, hi, points=[0.0] if lo < 0 < hi else None,
                            limit=400, epsabs=1e-14, epsrel=1e-12)[0]
        return re + 1j * im

    return pref * part(lambda p: np.sqrt(w.profile(p)) * np.exp(-sign * 1j * (p * w.x_in + w.c * abs(p) * t)))


def overlap_quadrature(w: WavePacket, x_out: float, t_out: float, dx: float) -> complex:
    """Free output/input field overlap by direct quadrature."""
    lo, hi = w.p_in - 12 * w.sigma_in, w.p_in + 12 * w.sigma_in

    def fn(p):
        return np.sqrt(w.profile(p)) * np.exp(1j * p * (w.x_in - x_out) + 1j * w.c * abs(p) * t_out)

    pts = [0.0] if lo < 0 < hi else None
    re = integrate.quad(lambda p: fn(p).real, lo, hi, points=pts, limit=400, epsabs=1e-14, epsrel=1e-12)[0]
    im = integrate.quad(lambda p: fn(p).imag, lo, hi, points=pts, limit=400, epsabs=1e-14, epsrel=1e-12)[0]
    return math.sqrt(dx / (2 * math.pi)) * (re + 1j * im)
