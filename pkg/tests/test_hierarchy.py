import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from iohoem.correlations import ExponentialSeries
from iohoem.hierarchy import (BathTerm, Hierarchy, HierarchySpec, HierarchyState, Kick,
                              SolverError, StaticField, SystemModel, bath_terms, build_index_space,
                              correlation_table, extended_rhs, heom0_rhs, heom0_rhs_scaled,
                              hermiticity_defect, integrate, max_field_tier_increase, propagate,
                              reconstruct, scaling_weights)
from iohoem.operators import SIGMA_MINUS, SIGMA_X, SIGMA_Z, commutator_super, lindbladian, vec
from iohoem.oracles import (dephasing_input_kernel, dephasing_rho,
                            fock_brute_force, DampedMode)

from models import (DEPHASING, EXCITED, MIXED, PLUS, dephasing, input_photon_fields,
                    mode_amplitude_field, rabi, two_exponential)


def spec_for(system, corr, n_max, rep="causal", **kw):
    return HierarchySpec(system, bath_terms(system, corr, rep), n_max, **kw)


# ---------------------------------------------------------------- model data

def test_labels_and_superoperators():
    system = SystemModel(SIGMA_Z, [SIGMA_X])
    assert system.n_alpha == 2
    assert system.alpha(0, "l") == 0 and system.alpha(0, "r") == 1
    rho = MIXED
    assert np.allclose(system.superoperator(0) @ vec(rho), vec(SIGMA_X @ rho))
    assert np.allclose(system.superoperator(1) @ vec(rho), vec(-rho @ SIGMA_X))
    with pytest.raises(IndexError):
        system.superoperator(2)


def test_system_validation():
    with pytest.raises(ValueError):
        SystemModel(SIGMA_MINUS, [SIGMA_X])
    with pytest.raises(ValueError):
        SystemModel(SIGMA_Z, [np.eye(3)])


def test_correlation_table_conjugates_right_labels():
    system, corr = rabi()
    table = correlation_table(system, corr)
    assert table[0, 0] == corr[(0, 0)]
    assert table[1, 1] == corr[(0, 0)].conjugate()
    assert table[1, 0] == corr[(0, 0)]


def test_representation_term_counts():
    system, corr = two_exponential()
    assert len(bath_terms(system, corr, "direct")) == 8
    assert len(bath_terms(system, corr, "causal")) == 4
    assert len(bath_terms(system, corr, "real")) == 8
    with pytest.raises(ValueError):
        bath_terms(system, corr, "other")


def test_spec_validation():
    system, corr = rabi()
    with pytest.raises(ValueError):
        spec_for(system, corr, -1)
    with pytest.raises(ValueError):
        spec_for(system, corr, 2, alpha0=0)
    with pytest.raises(ValueError):
        spec_for(system, corr, 2, static_fields=[StaticField("x", {5: lambda t: 1.0})])
    with pytest.raises(ValueError):
        spec_for(system, corr, 2, static_fields=input_photon_fields() + input_photon_fields())


# ---------------------------------------------------------------- index space

def test_index_space_examples():
    system = SystemModel(SIGMA_Z, [SIGMA_Z])
    one = [BathTerm(np.eye(4), np.eye(4), 1.0, 1.0)]
    assert [i.n for i in build_index_space(HierarchySpec(system, one, 2))] == [(0,), (1,), (2,)]
    two = one * 2
    assert len(build_index_space(HierarchySpec(system, two, 2))) == 6
    statics = build_index_space(HierarchySpec(system, [], 0, static_fields=input_photon_fields()))
    assert sorted(i.n_static for i in statics) == [(0, 0), (0, 1), (1, 0), (1, 1)]


@given(st.integers(1, 4), st.integers(0, 5))
def test_index_space_count(n_terms, n_max):
    system = SystemModel(SIGMA_Z, [SIGMA_Z])
    terms = [BathTerm(np.eye(4), np.eye(4), 1.0, 1.0)] * n_terms
    idx = build_index_space(HierarchySpec(system, terms, n_max))
    assert len(idx) == math.comb(n_max + n_terms, n_terms)
    assert len(set(idx)) == len(idx)
    assert idx[0].n == (0,) * n_terms
    assert all(sum(i.n) <= n_max for i in idx)


def test_zero_amplitude_terms_pruned():
    system = SystemModel(SIGMA_Z, [SIGMA_Z])
    terms = [BathTerm(np.eye(4), np.eye(4), 0.0, 1.0), BathTerm(np.eye(4), np.eye(4), 1.0, 1.0)]
    assert len(build_index_space(HierarchySpec(system, terms, 3))) == 4


def test_memory_cap():
    system, corr = two_exponential()
    with pytest.raises(MemoryError):
        Hierarchy(spec_for(system, corr, 10, "direct", max_adms=1000))


# ---------------------------------------------------------------- generators

def test_zero_coupling_only_rotates():
    system = SystemModel(np.zeros((2, 2)), [SIGMA_X])
    hier = Hierarchy(HierarchySpec(system, [], 3))
    state = HierarchyState(0.0, {hier.root_index(): MIXED})
    deriv = heom0_rhs(hier, state)
    assert np.allclose(deriv.adms[hier.root_index()], 0)


def test_extended_rhs_without_fields_is_regular():
    system, corr = rabi()
    hier = Hierarchy(spec_for(system, corr, 3))
    rng = np.random.default_rng(1)
    y = rng.normal(size=hier.size) + 1j * rng.normal(size=hier.size)
    state = hier.to_state(0.3, y)
    a, b = heom0_rhs(hier, state), extended_rhs(hier, state, 0.3)
    assert all(np.array_equal(a.adms[k], b.adms[k]) for k in a.adms)


def test_scaled_tier_one_relation():
    system, corr = rabi(0.5, 1.0, 0.7)
    plain = Hierarchy(spec_for(system, corr, 4))
    scaled = Hierarchy(spec_for(system, corr, 4, scaled=True))
    t = np.linspace(0, 2, 5)
    yp, ys = plain.integrate(EXCITED, t), scaled.integrate(EXCITED, t)
    assert np.allclose(plain.root(yp), scaled.root(ys), atol=1e-9)
    for idx in plain.indices:
        if sum(idx.n) == 1:
            s = idx.n.index(1)
            amp = plain.terms[s].amplitude
            assert np.allclose(plain.adm(yp[-1], idx) / np.sqrt(complex(amp)), scaled.adm(ys[-1], idx),
                               atol=1e-9)
    w = scaling_weights(scaled)
    assert np.allclose(plain.adm(yp[-1], plain.indices[5]), w[5] * scaled.adm(ys[-1], scaled.indices[5]),
                       atol=1e-9)


def test_heom0_rhs_scaled_entry_point():
    system, corr = rabi()
    spec = spec_for(system, corr, 2)
    hier = Hierarchy(HierarchySpec(system, spec.bath, 2, scaled=True))
    state = hier.to_state(0.0, hier.initial_vector(EXCITED))
    a = heom0_rhs_scaled(spec, state)
    b = heom0_rhs(hier, state)
    assert all(np.allclose(a.adms[k], b.adms[k]) for k in a.adms)


def test_dephasing_without_input_matches_closed_form():
    system, corr = dephasing()
    t = np.linspace(0, 4, 21)
    for rep in ("direct", "causal", "real"):
        ys = Hierarchy(spec_for(system, corr, 10, rep)).integrate(MIXED, t)
        rho = Hierarchy(spec_for(system, corr, 10, rep)).root(ys)
        ref = np.array([dephasing_rho(SIGMA_Z, MIXED, tk, DEPHASING, system.hamiltonian) for tk in t])
        assert np.max(np.abs(rho - ref)) < 1e-8


def test_input_flag_adm_matches_dephasing_correction():
    system, corr = dephasing()
    hier = Hierarchy(spec_for(system, corr, 10, static_fields=input_photon_fields()))
    t = np.linspace(0, 3, 7)
    ys = hier.integrate(MIXED, t)
    flagged = hier.reconstruct(ys[-1], [("in1", "in2")])[("in1", "in2")]
    rho = dephasing_rho(SIGMA_Z, MIXED, t[-1], DEPHASING, system.hamiltonian)
    g = abs(dephasing_input_kernel(DEPHASING, t[-1])) ** 2
    d_s = 2 * SIGMA_Z @ rho @ SIGMA_Z - 2 * rho
    assert np.allclose(flagged, -g * d_s, atol=1e-9)


def test_dynamic_field_gives_mode_amplitude():
    # with s = sigma_z the mode is displaced by the conserved <s>: <a(t)> = -i fdot_t <s>
    system, corr = dephasing()
    p = DEPHASING
    field = mode_amplitude_field(p.coupling, p.frequency, p.decay)
    hier = Hierarchy(spec_for(system, corr, 8, dynamic_fields=[field]))
    t = np.linspace(0, 3, 13)
    ys = hier.integrate(MIXED, t)
    phi = np.array([np.trace(hier.field_series(y)) for y in ys])
    s_mean = np.trace(SIGMA_Z @ MIXED)
    ref = np.array([-1j * dephasing_input_kernel(p, tk) * s_mean for tk in t])
    assert np.max(np.abs(phi - ref)) < 1e-9


def test_dynamic_fields_give_mode_occupation():
    from iohoem.oracles import _fock_solve
    from iohoem.operators import unvec
    system, corr = rabi(0.5, 1.0, 0.7)
    lam, z = 0.5, 0.7 + 1.0j
    fields = [mode_amplitude_field(lam, 1.0, 0.7, "a"),
              mode_amplitude_field(lam, 1.0, 0.7, "adag")]
    fields[1].kernels = {1: ExponentialSeries((lam,), (np.conj(z),))}
    hier = Hierarchy(spec_for(system, corr, 8, dynamic_fields=[fields[1], fields[0]]))
    t = np.linspace(0, 4, 9)
    occ = np.array([np.trace(hier.field_series(y)) for y in hier.integrate(EXCITED, t)])
    ys, d, n_env, low = _fock_solve(system.hamiltonian, system.couplings, [DampedMode(1.0, lam, 0.7)],
                                    EXCITED, 10, t, None, 1e-11, 1e-13)
    num = low[0].conj().T @ low[0]
    ref = np.array([(num @ unvec(y, d * n_env)).trace() for y in ys])
    assert np.max(np.abs(occ - ref)) < 1e-7


def test_reconstruct_sums_over_kernel_terms():
    system, corr = dephasing()
    field = mode_amplitude_field(0.6, 1.3, 0.8)
    field.kernels = {0: ExponentialSeries((0.3, 0.3), (0.8 + 1.3j, 0.8 + 1.3j)),
                     1: ExponentialSeries((0.1, 0.2), (1.0, 2.0))}
    hier = Hierarchy(spec_for(system, corr, 2, dynamic_fields=[field]))
    assert len(hier.field_pattern(("a",))) == 4
    assert hier.field_pattern(()) == [hier.root_index()]
    with pytest.raises(KeyError):
        hier.field_pattern(("b",))


def test_static_kernel_domain_enforced():
    system, corr = rabi()
    f = StaticField("late", {0: lambda t: 1.0}, 1.0, domain=(0.0, 1.0))
    hier = Hierarchy(spec_for(system, corr, 1, static_fields=[f]))
    with pytest.raises(ValueError):
        hier.rhs(1.5, hier.initial_vector(EXCITED))


def test_module_level_wrappers():
    system, corr = rabi()
    spec = spec_for(system, corr, 2, static_fields=input_photon_fields())
    ys = integrate(spec, EXCITED, [0.0, 0.5])
    hier = Hierarchy(spec)
    out = reconstruct(hier, hier.to_state(0.5, ys[-1]), [(), ("in1",)])
    assert np.isclose(np.trace(out[()]), 1.0)
    assert np.allclose(hier.to_vector(hier.to_state(0.5, ys[-1])), ys[-1])


# ---------------------------------------------------------------- invariants

@settings(max_examples=8, deadline=None)
@given(st.floats(0.1, 0.6), st.floats(-2, 2), st.floats(0.3, 2.0),
       st.sampled_from([1.0, -1j, 2 + 1j, 0.5j]))
def test_alpha0_invariance_and_pairing(lam, om, gam, alpha0):
    system, corr = rabi(lam, om, gam)
    t = np.linspace(0, 2, 5)
    ref = Hierarchy(spec_for(system, corr, 5, "direct")).integrate(PLUS, t)
    hier = Hierarchy(spec_for(system, corr, 5, "direct", alpha0=alpha0))
    ys = hier.integrate(PLUS, t)
    assert np.max(np.abs(hier.root(ys) - hier.root(ref))) < 1e-9
    assert hermiticity_defect(hier, ys[-1]) < 1e-9


@settings(max_examples=6, deadline=None)
@given(st.floats(0.1, 0.5), st.floats(-2, 2), st.floats(0.3, 2.0))
def test_representations_agree(lam, om, gam):
    system, corr = rabi(lam, om, gam)
    t = np.linspace(0, 3, 4)
    roots = [Hierarchy(spec_for(system, corr, 6, rep)).integrate(PLUS, t) for rep in ("causal", "real")]
    h = Hierarchy(spec_for(system, corr, 6, "causal"))
    h2 = Hierarchy(spec_for(system, corr, 6, "real"))
    assert np.max(np.abs(h.root(roots[0]) - h2.root(roots[1]))) < 1e-8


def test_trace_preserved():
    system, corr = two_exponential()
    hier = Hierarchy(spec_for(system, corr, 5, "direct"))
    rho = hier.root(hier.integrate(PLUS, np.linspace(0, 5, 11)))
    assert np.max(np.abs(np.trace(rho, axis1=1, axis2=2) - 1)) < 1e-8


def test_tier_boundedness():
    system, corr = dephasing()
    fields = [mode_amplitude_field(0.6, 1.3, 0.8)]
    hier = Hierarchy(spec_for(system, corr, 3, dynamic_fields=fields,
                              static_fields=input_photon_fields()))
    assert max_field_tier_increase(hier) <= 0


def test_pseudomode_equivalence_small():
    system, corr = rabi()
    t = np.linspace(0, 3, 7)
    rho = Hierarchy(spec_for(system, corr, 6)).root(Hierarchy(spec_for(system, corr, 6)).integrate(EXCITED, t))
    ref = fock_brute_force(system.hamiltonian, system.couplings, [DampedMode(1.0, 0.3, 1.0)], EXCITED, t, 8)
    assert np.max(np.abs(rho - ref)) < 1e-8


def test_truncation_error_shrinks():
    system, corr = rabi(0.5, 1.0, 0.5)
    t = np.linspace(0, 5, 11)
    rhos = [Hierarchy(spec_for(system, corr, n)).root(Hierarchy(spec_for(system, corr, n)).integrate(EXCITED, t))
            for n in range(2, 9)]
    changes = [np.max(np.abs(b - a)) for a, b in zip(rhos, rhos[1:])]
    assert all(b < a for a, b in zip(changes, changes[1:]))


# ---------------------------------------------------------------- propagation

def test_propagate_pure_decay():
    gamma = 0.4
    gen = lindbladian(np.zeros((2, 2)), [SIGMA_MINUS], [gamma])
    t = np.linspace(0, 3, 7)
    ys = propagate(lambda _t, y: gen @ y, vec(EXCITED), t)
    assert np.allclose(ys[:, 0].real, np.exp(-2 * gamma * t), atol=1e-9)


def test_propagate_zero_generator_and_kicks():
    y0 = np.array([1.0, 2.0])
    t = np.array([0.0, 0.5, 1.0, 2.0])
    ys = propagate(lambda _t, y: 0 * y, y0, t, [Kick(1.0, 3 * np.eye(2)), Kick(0.0, 2 * np.eye(2))])
    assert np.allclose(ys[0], 2 * y0)
    assert np.allclose(ys[1], 2 * y0)
    assert np.allclose(ys[2], 6 * y0)
    assert np.allclose(ys[3], 6 * y0)


def test_propagate_kick_matches_split_solve():
    gen = -1j * commutator_super(0.5 * SIGMA_Z) + 0.3 * lindbladian(np.zeros((2, 2)), [SIGMA_MINUS])
    kick = np.kron(np.eye(2), SIGMA_X) @ np.kron(SIGMA_X.T, np.eye(2))
    t = np.array([0.0, 2.0])
    ys = propagate(lambda _t, y: gen @ y, vec(PLUS), t, [(0.7, kick)], rtol=1e-12, atol=1e-14)
    from scipy.linalg import expm
    expected = expm(gen * 1.3) @ kick @ expm(gen * 0.7) @ vec(PLUS)
    assert np.allclose(ys[-1], expected, atol=1e-10)


def test_propagate_errors():
    with pytest.raises(ValueError):
        propagate(lambda t, y: y, [1.0], [1.0, 0.5])
    with pytest.raises(ValueError):
        propagate(lambda t, y: y, [1.0], [0.0, 1.0], [(2.0, np.eye(1))])
    with pytest.raises(SolverError):
        propagate(lambda t, y: y * np.nan, [1.0], [0.0, 1.0])
