"""Hierarchy of auxiliary density matrices (ADMs) with environmental fields.

The bath enters through terms ``sigma`` that each carry a pair of
superoperators ``(A, B)`` and one exponential ``a exp(-b t)``. An ADM is
labelled by counts ``n`` over these terms, plus indices for fields that are
contracted with the environment:

* dynamic fields (evaluated at the running time) carry one unit on one of
  their exponential terms ``(alpha, k)``;
* static fields (evaluated at a fixed time) carry a binary flag.

The generator is written in the Schroedinger picture of the system, so the
interaction superoperators are constant and ``-i[H_S, .]`` acts on every ADM.
Field kernels are plain scalar functions and are unaffected by this choice.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from .correlations import CorrelationTable, ExponentialSeries, real_imag_split
from .operators import (anticommutator_super, commutator_super, is_hermitian,
                        left_mul_super, right_mul_super, unvec, vec)
from .wick import FieldSet, assemble_series


class SolverError(RuntimeError):
    """Raised when time propagation fails or produces non-finite values."""


# ---------------------------------------------------------------- model data

@dataclass
class SystemModel:
    """System Hamiltonian and the system operators ``s^q`` coupled to the bath.

    Each ``s^q`` yields two interaction labels: ``alpha = 2q`` acting from the
    left (``s^q .``) and ``alpha = 2q + 1`` acting from the right (``-. s^q``).
    """

    hamiltonian: np.ndarray
    couplings: list

    def __post_init__(self):
        self.hamiltonian = np.asarray(self.hamiltonian, dtype=complex)
        d = self.hamiltonian.shape[0]
        if self.hamiltonian.shape != (d, d):
            raise ValueError("Hamiltonian must be square")
        if not is_hermitian(self.hamiltonian):
            raise ValueError("Hamiltonian must be hermitian")
        self.couplings = [np.asarray(s, dtype=complex) for s in self.couplings]
        for s in self.couplings:
            if s.shape != (d, d):
                raise ValueError("coupling operators must match the Hamiltonian dimension")

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    @property
    def n_alpha(self) -> int:
        return 2 * len(self.couplings)

    @staticmethod
    def alpha(q: int, side: str) -> int:
        if side not in ("l", "r"):
            raise ValueError("side must be 'l' or 'r'")
        return 2 * q + (side == "r")

    def superoperator(self, alpha: int) -> np.ndarray:
        q, side = divmod(alpha, 2)
        if not 0 <= q < len(self.couplings):
            raise IndexError(f"interaction label {alpha} out of range")
        s = self.couplings[q]
        return left_mul_super(s) if side == 0 else -right_mul_super(s)


@dataclass(frozen=True)
class BathTerm:
    """One factorized bath term: ``A ... (a exp(-b (t2 - t1))) B``."""

    a_super: np.ndarray
    b_super: np.ndarray
    amplitude: complex
    rate: complex
    label: str = ""


def correlation_table(system: SystemModel, correlations: dict) -> CorrelationTable:
    """Label-resolved correlations from coupling-resolved ones.

    ``correlations[(q2, q1)]`` is ``<X^q2(t) X^q1(0)>`` for ``t >= 0``. For a
    left-acting second label the entry is that series; for a right-acting one
    it is the complex conjugate, valid for hermitian bath operators in a
    stationary state. The result does not depend on the first label's side.
    """
    table = CorrelationTable(system.n_alpha)
    for (q2, q1), series in correlations.items():
        for side2 in ("l", "r"):
            a2 = system.alpha(q2, side2)
            table[a2, system.alpha(q1, "l")] = series
            table[a2, system.alpha(q1, "r")] = series.conjugate()
    return table


def direct_bath_terms(system: SystemModel, table: CorrelationTable) -> list[BathTerm]:
    """Unfactorized form: ``A = -S^alpha2``, ``B = S^alpha1`` for every label pair."""
    terms = []
    for a2 in range(table.n_alpha):
        for a1 in range(table.n_alpha):
            for k, (amp, rate) in enumerate(table[a2, a1].terms):
                terms.append(BathTerm(-system.superoperator(a2), system.superoperator(a1),
                                      amp, rate, f"direct:{a2},{a1},{k}"))
    return terms


def causal_bath_terms(system: SystemModel, correlations: dict) -> list[BathTerm]:
    """Sum over the second label first: ``A = -[s^q2, .]``, ``B = S^alpha1``.

    The left-acting ``B`` carries the correlation and the right-acting one
    its conjugate, splitting positive- and negative-time contributions.
    """
    terms = []
    for (q2, q1), series in correlations.items():
        a_sup = -commutator_super(system.couplings[q2])
        for side, ser in (("l", series), ("r", series.conjugate())):
            b_sup = system.superoperator(system.alpha(q1, side))
            for k, (amp, rate) in enumerate(ser.terms):
                terms.append(BathTerm(a_sup, b_sup, amp, rate, f"causal:{q2},{q1},{side},{k}"))
    return terms


def real_structure_bath_terms(system: SystemModel, correlations: dict) -> list[BathTerm]:
    """Real and imaginary parts of each correlation as separate terms.

    ``B = [s^q1, .]`` with the real part and ``B = i{s^q1, .}`` with the
    imaginary part, both exponential series of their own.
    """
    terms = []
    for (q2, q1), series in correlations.items():
        a_sup = -commutator_super(system.couplings[q2])
        real, imag = real_imag_split(series)
        s1 = system.couplings[q1]
        for name, b_sup, ser in (("R", commutator_super(s1), real),
                                 ("I", 1j * anticommutator_super(s1), imag)):
            for k, (amp, rate) in enumerate(ser.terms):
                terms.append(BathTerm(a_sup, b_sup, amp, rate, f"real:{q2},{q1},{name},{k}"))
    return terms


def bath_terms(system: SystemModel, correlations: dict, representation: str = "direct") -> list[BathTerm]:
    if representation == "direct":
        return direct_bath_terms(system, correlation_table(system, correlations))
    if representation == "causal":
        return causal_bath_terms(system, correlations)
    if representation == "real":
        return real_structure_bath_terms(system, correlations)
    raise ValueError(f"unknown representation {representation!r}")


@dataclass
class DynamicField:
    """Field evaluated at the running time.

    ``kernels[alpha]`` is the exponential series of ``<phi(t) chi^alpha_tau>``
    in the lag ``t - tau``.
    """

    label: str
    kernels: dict

    def __post_init__(self):
        for alpha, ker in self.kernels.items():
            if not isinstance(ker, ExponentialSeries):
                raise TypeError(f"dynamic field {self.label!r}: kernel for label {alpha} "
                                "must be an ExponentialSeries")


@dataclass
class StaticField:
    """Field evaluated at the fixed time ``time``.

    ``kernels[alpha]`` is any callable ``tau -> <phi(time) chi^alpha_tau>``,
    optionally restricted to ``domain``.
    """

    label: str
    kernels: dict
    time: float = 0.0
    domain: tuple = (0.0, math.inf)


@dataclass
class HierarchySpec:
    system: SystemModel
    bath: list
    n_max: int
    dynamic_fields: list = field(default_factory=list)
    static_fields: list = field(default_factory=list)
    alpha0: complex = -1j
    scaled: bool = False
    max_adms: int = 500_000

    def __post_init__(self):
        if self.n_max < 0:
            raise ValueError("n_max must be non-negative")
        if self.alpha0 == 0:
            raise ValueError("alpha0 must be non-zero")
        labels = [f.label for f in self.dynamic_fields] + [f.label for f in self.static_fields]
        if len(set(labels)) != len(labels):
            raise ValueError("field labels must be distinct")
        n_alpha = self.system.n_alpha
        for f in list(self.dynamic_fields) + list(self.static_fields):
            for alpha in f.kernels:
                if not 0 <= alpha < n_alpha:
                    raise ValueError(f"field {f.label!r} refers to unknown label {alpha}")

    @property
    def field_labels(self) -> tuple:
        return tuple(f.label for f in self.dynamic_fields) + tuple(f.label for f in self.static_fields)


class AdmIndex(NamedTuple):
    n: tuple
    n_phi: tuple
    n_static: tuple

    @property
    def field_tier(self) -> int:
        return sum(self.n_phi) + sum(self.n_static)


@dataclass
class HierarchyState:
    time: float
    adms: dict


# ---------------------------------------------------------------- index space

def _compositions(n_terms: int, n_max: int) -> list[tuple]:
    out = []
    for tier in range(n_max + 1):
        level = []
        for cut in itertools.combinations(range(tier + n_terms - 1), n_terms - 1):
            bounds = (-1,) + cut + (tier + n_terms - 1,)
            level.append(tuple(bounds[i + 1] - bounds[i] - 1 for i in range(n_terms)))
        out.extend(sorted(level, reverse=True))
    return out


def _active_terms(spec: HierarchySpec) -> list[BathTerm]:
    return [t for t in spec.bath if t.amplitude != 0]


def _eta_terms(spec: HierarchySpec) -> list[tuple[int, int, complex, complex]]:
    """``(field position, alpha, c, gamma)`` for every dynamic-field exponential."""
    out = []
    for j, f in enumerate(spec.dynamic_fields):
        for alpha in sorted(f.kernels):
            for amp, rate in f.kernels[alpha].terms:
                if amp != 0:
                    out.append((j, alpha, amp, rate))
    return out


def build_index_space(spec: HierarchySpec) -> list[AdmIndex]:
    """All ADM indices, ordered by field tier, field pattern, then regular tier."""
    n_sigma = len(_active_terms(spec))
    if n_sigma == 0:
        regular = [()]
    else:
        regular = _compositions(n_sigma, spec.n_max)
    eta = _eta_terms(spec)
    per_field = [[None] + [e for e, (j2, *_r) in enumerate(eta) if j2 == j]
                 for j in range(len(spec.dynamic_fields))]
    field_parts = []
    for choice in itertools.product(*per_field):
        n_phi = [0] * len(eta)
        for e in choice:
            if e is not None:
                n_phi[e] = 1
        for flags in itertools.product((0, 1), repeat=len(spec.static_fields)):
            field_parts.append((tuple(n_phi), flags))
    field_parts.sort(key=lambda p: (sum(p[0]) + sum(p[1]), tuple(-x for x in p[0] + p[1])))
    count = len(field_parts) * len(regular)
    if count > spec.max_adms:
        raise MemoryError(f"{count} ADMs exceed the configured cap of {spec.max_adms}")
    return [AdmIndex(n, n_phi, flags) for n_phi, flags in field_parts for n in regular]


# ---------------------------------------------------------------- generator

class _Coo:
    def __init__(self, blk: int):
        self.blk = blk
        self.rows: list = []
        self.cols: list = []
        self.vals: list = []

    def add(self, row_slot: int, col_slot: int, mat: np.ndarray, factor: complex = 1.0):
        r, c = np.nonzero(mat)
        if r.size == 0 or factor == 0:
            return
        self.rows.append(r + row_slot * self.blk)
        self.cols.append(c + col_slot * self.blk)
        self.vals.append(factor * mat[r, c])

    def tocsr(self, size: int) -> sp.csr_matrix:
        if not self.rows:
            return sp.csr_matrix((size, size), dtype=complex)
        m = sp.coo_matrix((np.concatenate(self.vals),
                           (np.concatenate(self.rows), np.concatenate(self.cols))),
                          shape=(size, size), dtype=complex)
        return m.tocsr()


class Hierarchy:
    """Compiled hierarchy: index space, lookup table and sparse generators.

    ``regular`` holds the system and bath parts, ``field_part`` the dynamic
    field decays and couplings, and ``static_parts`` pairs each static
    kernel with its (time independent) coupling matrix.
    """

    def __init__(self, spec: HierarchySpec):
        self.spec = spec
        self.system = spec.system
        self.dim = spec.system.dim
        self.blk = self.dim ** 2
        self.terms = _active_terms(spec)
        self.eta = _eta_terms(spec)
        self.indices = build_index_space(spec)
        self.lookup = {idx: i for i, idx in enumerate(self.indices)}
        self.size = len(self.indices) * self.blk
        self._build()

    # assembly
    def _build(self):
        spec, blk = self.spec, self.blk
        alpha0 = complex(spec.alpha0)
        h_part = -1j * commutator_super(self.system.hamiltonian)
        eye = np.eye(blk)
        reg, fld = _Coo(blk), _Coo(blk)
        static = {}
        for j in range(len(spec.static_fields)):
            for alpha in spec.static_fields[j].kernels:
                static[(j, alpha)] = _Coo(blk)
        for slot, idx in enumerate(self.indices):
            n = idx.n
            decay = sum(n_s * t.rate for n_s, t in zip(n, self.terms))
            reg.add(slot, slot, h_part)
            reg.add(slot, slot, eye, -decay)
            for s, t in enumerate(self.terms):
                if n[s] > 0:
                    lower = idx._replace(n=n[:s] + (n[s] - 1,) + n[s + 1:])
                    if spec.scaled:
                        coeff = alpha0 * np.sqrt(complex(n[s])) * np.sqrt(complex(t.amplitude))
                    else:
                        coeff = alpha0 * n[s] * t.amplitude
                    reg.add(slot, self.lookup[lower], t.b_super, coeff)
                upper = idx._replace(n=n[:s] + (n[s] + 1,) + n[s + 1:])
                if upper in self.lookup:
                    if spec.scaled:
                        coeff = np.sqrt(complex(n[s] + 1)) * np.sqrt(complex(t.amplitude)) / alpha0
                    else:
                        coeff = 1.0 / alpha0
                    reg.add(slot, self.lookup[upper], t.a_super, coeff)
            for e, (_j, alpha, amp, rate) in enumerate(self.eta):
                if idx.n_phi[e]:
                    fld.add(slot, slot, eye, -idx.n_phi[e] * rate)
                    lower = idx._replace(n_phi=idx.n_phi[:e] + (idx.n_phi[e] - 1,) + idx.n_phi[e + 1:])
                    fld.add(slot, self.lookup[lower], self.system.superoperator(alpha),
                            idx.n_phi[e] * amp)
            for j, flag in enumerate(idx.n_static):
                if flag:
                    lower = idx._replace(n_static=idx.n_static[:j] + (0,) + idx.n_static[j + 1:])
                    for alpha in spec.static_fields[j].kernels:
                        static[(j, alpha)].add(slot, self.lookup[lower],
                                               self.system.superoperator(alpha))
        self.regular = reg.tocsr(self.size)
        self.field_part = fld.tocsr(self.size)
        self.constant = (self.regular + self.field_part).tocsr()
        self.static_parts = []
        for (j, alpha), coo in static.items():
            f = spec.static_fields[j]
            self.static_parts.append((f, f.kernels[alpha], coo.tocsr(self.size)))

    # state conversion
    def slot(self, idx: AdmIndex) -> int:
        return self.lookup[idx]

    def root_index(self) -> AdmIndex:
        return self.indices[0]

    def initial_vector(self, rho_s) -> np.ndarray:
        rho_s = np.asarray(rho_s, dtype=complex)
        if rho_s.shape != (self.dim, self.dim):
            raise ValueError("initial state has the wrong dimension")
        y = np.zeros(self.size, dtype=complex)
        y[:self.blk] = vec(rho_s)
        return y

    def to_state(self, t: float, y) -> HierarchyState:
        y = np.asarray(y)
        return HierarchyState(t, {idx: unvec(y[i * self.blk:(i + 1) * self.blk], self.dim)
                                  for i, idx in enumerate(self.indices)})

    def to_vector(self, state: HierarchyState) -> np.ndarray:
        y = np.zeros(self.size, dtype=complex)
        for idx, mat in state.adms.items():
            if idx not in self.lookup:
                raise KeyError(f"index {idx} is not in the hierarchy")
            i = self.lookup[idx]
            y[i * self.blk:(i + 1) * self.blk] = vec(mat)
        return y

    def adm(self, y, idx: AdmIndex) -> np.ndarray:
        """One ADM from a flat vector, or a stack of them from a trajectory array."""
        return self._block(y, self.lookup[idx])

    def root(self, y) -> np.ndarray:
        """Reduced density matrix (or a stack of them for a trajectory array)."""
        return self._block(y, 0)

    def _block(self, y, slot: int) -> np.ndarray:
        block = np.asarray(y)[..., slot * self.blk:(slot + 1) * self.blk]
        # column-stacked: undo by reshaping and swapping the last two axes
        return np.swapaxes(block.reshape(block.shape[:-1] + (self.dim, self.dim)), -1, -2)

    # right-hand sides
    def static_matrix(self, t: float) -> sp.csr_matrix:
        out = sp.csr_matrix((self.size, self.size), dtype=complex)
        for f, kernel, mat in self.static_parts:
            out = out + self._kernel_value(f, kernel, t) * mat
        return out

    @staticmethod
    def _kernel_value(f: StaticField, kernel, t: float) -> complex:
        lo, hi = f.domain
        if not lo <= t <= hi:
            raise ValueError(f"t = {t} outside the kernel domain of field {f.label!r}")
        return complex(kernel(t))

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        out = self.constant @ y
        for f, kernel, mat in self.static_parts:
            val = self._kernel_value(f, kernel, t)
            if val != 0:
                out = out + val * (mat @ y)
        return out

    # field reconstruction
    def field_pattern(self, complement) -> list[AdmIndex]:
        """ADM indices with ``n = 0`` whose contracted fields are exactly ``complement``."""
        labels = self.spec.field_labels
        unknown = set(complement) - set(labels)
        if unknown:
            raise KeyError(f"fields {sorted(unknown)} are not configured")
        zero_n = self.indices[0].n
        out = []
        for idx in self.indices:
            if idx.n != zero_n:
                continue
            ok = True
            for j, f in enumerate(self.spec.dynamic_fields):
                units = sum(u for u, eta in zip(idx.n_phi, self.eta) if eta[0] == j)
                if units != (f.label in complement):
                    ok = False
                    break
            if ok:
                for j, f in enumerate(self.spec.static_fields):
                    if idx.n_static[j] != (f.label in complement):
                        ok = False
                        break
            if ok:
                out.append(idx)
        return out

    def reconstruct(self, y, complements) -> dict:
        y = np.asarray(y)
        result = {}
        for comp in complements:
            comp = tuple(comp)
            mats = [self.adm(y, idx) for idx in self.field_pattern(comp)]
            result[comp] = sum(mats) if mats else np.zeros((self.dim, self.dim), dtype=complex)
        return result

    def field_series(self, y, pairings: dict | None = None, labels=None) -> np.ndarray:
        """Reduced matrix for the correlation of all configured fields (or ``labels``)."""
        labels = self.spec.field_labels if labels is None else tuple(labels)
        fs = FieldSet(labels, pairings or {})
        complements = [tuple(c) for r in range(len(labels) + 1)
                       for c in itertools.combinations(labels, r)]
        return assemble_series(fs, self.reconstruct(y, complements))

    def integrate(self, rho_s, t_grid, events=(), **kwargs) -> np.ndarray:
        return propagate(self.rhs, self.initial_vector(rho_s), t_grid, events, **kwargs)


def _compile(spec_or_hier) -> Hierarchy:
    return spec_or_hier if isinstance(spec_or_hier, Hierarchy) else Hierarchy(spec_or_hier)


def heom0_rhs(hier, state: HierarchyState) -> HierarchyState:
    """Derivative under the system and bath parts only (no field terms)."""
    h = _compile(hier)
    return h.to_state(state.time, h.regular @ h.to_vector(state))


def heom0_rhs_scaled(spec: HierarchySpec, state: HierarchyState) -> HierarchyState:
    """As :func:`heom0_rhs` for the dimensionally scaled ADMs."""
    scaled = HierarchySpec(spec.system, spec.bath, spec.n_max, spec.dynamic_fields,
                           spec.static_fields, spec.alpha0, True, spec.max_adms)
    return heom0_rhs(scaled, state)


def extended_rhs(hier, state: HierarchyState, t: float) -> HierarchyState:
    h = _compile(hier)
    return h.to_state(t, h.rhs(t, h.to_vector(state)))


def reconstruct(hier, state: HierarchyState, request) -> dict:
    h = _compile(hier)
    return h.reconstruct(h.to_vector(state), request)


def integrate(hier, rho_s, t_grid, events=(), **kwargs) -> np.ndarray:
    """Propagate the hierarchy from ``rho_s`` in the root ADM; rows of the
    returned array are flat hierarchy vectors at ``t_grid``."""
    return _compile(hier).integrate(rho_s, t_grid, events, **kwargs)


def scaling_weights(hier: Hierarchy) -> np.ndarray:
    """Per-ADM factor ``prod sqrt(n! a^n)`` linking scaled and plain ADMs."""
    w = np.ones(len(hier.indices), dtype=complex)
    for i, idx in enumerate(hier.indices):
        for n_s, t in zip(idx.n, hier.terms):
            w[i] *= np.sqrt(complex(math.factorial(n_s))) * np.sqrt(complex(t.amplitude)) ** n_s
    return w


def hermitian_partners(terms: Sequence[BathTerm], dim: int, tol: float = 1e-12) -> list[int]:
    """For each term the index of the term it maps to under ``rho -> rho^dagger``.

    Requires a purely imaginary ``alpha0``-compatible pairing: the partner has
    conjugate amplitude and rate and superoperators ``-P(A)``, ``-P(B)`` with
    ``P(M) rho = (M rho^dagger)^dagger``. Raises ``ValueError`` if a term has
    no partner.
    """
    perm = _transpose_permutation(dim)

    def p_map(m):
        return -np.conj(m)[np.ix_(perm, perm)]

    out = []
    for t in terms:
        pa, pb = p_map(t.a_super), p_map(t.b_super)
        for j, u in enumerate(terms):
            if (abs(u.amplitude - np.conj(t.amplitude)) <= tol * (1 + abs(t.amplitude))
                    and abs(u.rate - np.conj(t.rate)) <= tol * (1 + abs(t.rate))
                    and np.allclose(u.a_super, pa, atol=tol) and np.allclose(u.b_super, pb, atol=tol)):
                out.append(j)
                break
        else:
            raise ValueError(f"term {t.label!r} has no hermitian partner")
    return out


def _transpose_permutation(dim: int) -> np.ndarray:
    # vec(X^T)[i] = vec(X)[perm[i]]
    return np.arange(dim * dim).reshape(dim, dim).T.reshape(-1)


def hermiticity_defect(hier: Hierarchy, y) -> float:
    """Largest ``|rho_n^dagger - rho_pair(n)|`` over the regular ADMs.

    ADMs are first brought to plain normalisation with ``alpha0 = -i``.
    """
    partners = hermitian_partners(hier.terms, hier.dim)
    weights = scaling_weights(hier) if hier.spec.scaled else np.ones(len(hier.indices))
    worst = 0.0
    zero_fields = hier.indices[0][1:]
    for i, idx in enumerate(hier.indices):
        if idx[1:] != zero_fields:
            continue
        tier = sum(idx.n)
        norm = weights[i] * (-1j / hier.spec.alpha0) ** tier
        mapped = [0] * len(idx.n)
        for s, n_s in enumerate(idx.n):
            mapped[partners[s]] += n_s
        j = hier.lookup[idx._replace(n=tuple(mapped))]
        norm_j = weights[j] * (-1j / hier.spec.alpha0) ** tier
        a = norm * hier.adm(y, idx)
        b = norm_j * hier.adm(y, hier.indices[j])
        worst = max(worst, float(np.max(np.abs(a.conj().T - b))))
    return worst


def max_field_tier_increase(hier: Hierarchy) -> int:
    """Largest field-tier step from a target ADM to an ADM its derivative reads.

    For each nonzero generator entry this is the field tier of the column
    (source) minus that of the row (target). A positive value would mean an
    ADM depends on one with more contracted fields, so lower tiers would no
    longer form a closed set of equations.
    """
    tiers = np.array([idx.field_tier for idx in hier.indices])
    worst = -10 ** 9
    mats = [hier.constant] + [m for _f, _k, m in hier.static_parts]
    for m in mats:
        coo = m.tocoo()
        if coo.nnz == 0:
            continue
        rows = tiers[coo.row // hier.blk]
        cols = tiers[coo.col // hier.blk]
        worst = max(worst, int(np.max(cols - rows)))
    return worst


# ---------------------------------------------------------------- propagation

@dataclass(frozen=True)
class Kick:
    """Instantaneous linear map applied to the state at ``time``."""

    time: float
    operator: object

    def apply(self, y: np.ndarray) -> np.ndarray:
        if callable(self.operator):
            return np.asarray(self.operator(y))
        return np.asarray(self.operator @ y)


def propagate(rhs: Callable, y0, t_grid, kicks=(), rtol: float = 1e-10, atol: float = 1e-12,
              method: str = "RK45", t0: float | None = None) -> np.ndarray:
    """Integrate ``dy/dt = rhs(t, y)`` and sample at ``t_grid``.

    The integrator is stopped at every kick time, the kick is applied, and
    integration restarts from there. A grid point that coincides with a kick
    reports the state after the kick.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0:
        raise ValueError("t_grid must be a non-empty 1-D array")
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing")
    t = float(t_grid[0] if t0 is None else t0)
    if t > t_grid[0]:
        raise ValueError("t0 must not exceed the first grid time")
    kicks = sorted((k if isinstance(k, Kick) else Kick(*k) for k in kicks), key=lambda k: k.time)
    for k in kicks:
        if not t <= k.time <= t_grid[-1]:
            raise ValueError(f"kick at {k.time} outside the integration range")
    y = np.array(y0, dtype=complex)
    out = np.empty((t_grid.size, y.size), dtype=complex)
    gi = 0

    def checked(tt, yy):
        # step-size control never terminates on NaN derivatives
        dy = rhs(tt, yy)
        if not np.all(np.isfinite(dy)):
            raise SolverError(f"non-finite derivative at t = {tt}")
        return dy

    def emit(gi):
        while gi < t_grid.size and t_grid[gi] == t:
            out[gi] = y
            gi += 1
        return gi

    if not any(k.time == t for k in kicks):
        gi = emit(gi)
    stops = [(k.time, k) for k in kicks] + [(float(t_grid[-1]), None)]
    for stop, kick in stops:
        if stop > t:
            targets = [g for g in t_grid[gi:] if t < g < stop]
            sample = targets + [stop]
            sol = solve_ivp(checked, (t, stop), y, method=method, t_eval=sample, rtol=rtol, atol=atol)
            if sol.status != 0:
                raise SolverError(f"integration failed at t = {sol.t[-1] if sol.t.size else t}: "
                                  f"{sol.message}")
            ys = sol.y.T
            if ys.shape[0] != len(sample) or not np.all(np.isfinite(ys)):
                raise SolverError("non-finite values during integration")
            out[gi:gi + len(targets)] = ys[:len(targets)]
            gi += len(targets)
            y = ys[-1].copy()
            t = stop
        if kick is not None:
            y = kick.apply(y)
            if not np.all(np.isfinite(y)):
                raise SolverError("non-finite values after kick")
        gi = emit(gi)
    while gi < t_grid.size:
        out[gi] = y
        gi += 1
    return out
