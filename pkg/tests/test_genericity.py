import math

import numpy as np
import pytest

from birkhoff.bnf import normalize
from birkhoff.brick import sample_brick
from birkhoff.errors import DomainError, ShapeError, SmallDivisorError
from birkhoff.genericity import (
    bad_parameter_volume,
    badvol_sweep,
    bnf_map,
    bnf_map_jacobian,
    coefficient_dimension,
    jacobian_unit_check,
    order_schedule,
    rescale,
    torsion_class,
)
from birkhoff.polyalg import ActionPolynomial, GradedPolynomial, bombieri_norm

from conftest import make_omega, random_hamiltonian, random_action_polynomial


def zeros(n, m):
    return [ActionPolynomial.zero(n) for _ in range(m)]


def brick_parts(n, m, seed):
    return list(sample_brick(n, m, seed).parts)


# -- bnf_map -------------------------------------------------------------------


def test_bnf_map_zero_perturbation(rng):
    w = make_omega(rng, 2, 6)
    H = random_hamiltonian(rng, 2, w)
    ref = normalize(H, 3, trunc=6).invariants
    Q = bnf_map(H, 3, zeros(2, 3))
    for q, r in zip(Q, ref):
        assert q.coeffs == pytest.approx(r.coeffs)


def test_bnf_map_integrable_translation(rng):
    # omega.I plus pure action polynomials is its own normal form
    w = make_omega(rng, 2, 8)
    base = GradedPolynomial.from_actions(ActionPolynomial.linear(w))
    P = brick_parts(2, 4, 5)
    Q = bnf_map(base, 4, P)
    q1_minus_p1 = Q[0] - P[0]
    np.testing.assert_allclose(
        [q1_minus_p1.coeffs.get((1, 0), 0.0), q1_minus_p1.coeffs.get((0, 1), 0.0)],
        w,
        rtol=1e-12,
    )
    for k in range(2, 5):
        assert Q[k - 1].coeffs == pytest.approx(P[k - 1].coeffs)


def test_bnf_map_triangularity_exact(rng):
    """Perturbing P_j never changes Q_i for i < j, coefficient-exactly."""
    for case in range(6):
        w = make_omega(rng, 2, 8)
        H = random_hamiltonian(rng, 2, w, n_terms=4)
        m = 4
        P = brick_parts(2, m, 100 + case)
        Q_ref = bnf_map(H, m, P)
        for j in range(2, m + 1):
            P_mod = list(P)
            P_mod[j - 1] = random_action_polynomial(rng, 2, j, scale=0.5)
            Q_mod = bnf_map(H, m, P_mod)
            for i in range(j - 1):
                assert Q_mod[i].coeffs == Q_ref[i].coeffs  # exact, not approx


def test_bnf_map_translation_constant(rng):
    # Q_1 - P_1 equals B1(base) independently of P
    w = make_omega(rng, 2, 8)
    H = random_hamiltonian(rng, 2, w, n_terms=4)
    for seed in (3, 4):
        P = brick_parts(2, 3, seed)
        Q = bnf_map(H, 3, P)
        diff = Q[0] - P[0]
        np.testing.assert_allclose(
            sorted(diff.coeffs.values()), sorted(w), rtol=1e-12
        )


def test_bnf_map_shape_checks(rng):
    w = make_omega(rng, 2, 4)
    base = GradedPolynomial.from_actions(ActionPolynomial.linear(w))
    with pytest.raises(ShapeError):
        bnf_map(base, 2, [ActionPolynomial(2, {(1, 0): 1.0})])  # wrong length
    bad = [ActionPolynomial(2, {(2, 0): 1.0}), ActionPolynomial.zero(2)]
    with pytest.raises(ShapeError):
        bnf_map(base, 2, bad)  # P_1 not degree 1


def test_bnf_map_resonance_propagates():
    base = GradedPolynomial.from_actions(ActionPolynomial.linear([1.0, 1.0]))
    base = base + GradedPolynomial.from_real_terms(2, {((1, 3), (0, 0)): 0.1})
    with pytest.raises(SmallDivisorError):
        bnf_map(base, 2, zeros(2, 2))


# -- Jacobian ------------------------------------------------------------------


def test_jacobian_translation_case(rng):
    w = make_omega(rng, 2, 6)
    base = GradedPolynomial.from_actions(ActionPolynomial.linear(w))
    det = jacobian_unit_check(base, 2, zeros(2, 2), 1e-4)
    assert det == pytest.approx(1.0, abs=1e-9)


def test_jacobian_unit_with_cubic(rng):
    w = make_omega(rng, 2, 6)
    H = random_hamiltonian(rng, 2, w, n_terms=3, degrees=(3,))
    det1, jac = bnf_map_jacobian(H, 2, zeros(2, 2), 1e-4)
    det2 = jacobian_unit_check(H, 2, zeros(2, 2), 5e-5)
    assert det1 == pytest.approx(1.0, abs=1e-6)
    assert det2 == pytest.approx(1.0, abs=1e-6)
    assert abs(det1 - det2) < 1e-6  # step-halving consistency


def test_jacobian_structurally_triangular(rng):
    w = make_omega(rng, 2, 6)
    H = random_hamiltonian(rng, 2, w, n_terms=3, degrees=(3,))
    _, jac = bnf_map_jacobian(H, 2, zeros(2, 2), 1e-4)
    dim = jac.shape[0]
    upper = np.triu(jac, k=1)
    assert np.max(np.abs(upper)) < 1e-8
    np.testing.assert_allclose(np.diag(jac), np.ones(dim), atol=1e-9)


def test_jacobian_at_nonzero_base_point(rng):
    w = make_omega(rng, 1, 6)
    H = random_hamiltonian(rng, 1, w, n_terms=2, degrees=(3, 4))
    P0 = brick_parts(1, 3, 11)
    det = jacobian_unit_check(H, 3, P0, 1e-4)
    assert det == pytest.approx(1.0, abs=1e-6)


def test_coefficient_dimension():
    assert coefficient_dimension(2, 3) == 2 + 3 + 4
    assert coefficient_dimension(1, 5) == 5


# -- rescale -------------------------------------------------------------------


def test_rescale_harmonic_invariant(rng):
    w = make_omega(rng, 2, 4)
    H = GradedPolynomial.from_actions(ActionPolynomial.linear(w))
    nf = normalize(H, 2)
    for s in (0.9, 0.5, 0.1):
        out = rescale(H, nf, s)
        np.testing.assert_allclose(
            sorted(out.parts[0].coeffs.values()), sorted(w), rtol=1e-14
        )
        assert out.parts[1].is_zero()


def test_rescale_coefficient_factors():
    H = GradedPolynomial.from_actions(ActionPolynomial(1, {(1,): 1.0}))
    nf = normalize(H, 2)
    nf.invariants[1] = ActionPolynomial(1, {(2,): 1.0})
    out = rescale(H, nf, 0.5)
    assert out.parts[1].coeffs[(2,)] == 1.0 * 0.5**2  # exact float factor


def test_rescale_norm_scaling_exact(rng):
    w = make_omega(rng, 2, 8)
    H = random_hamiltonian(rng, 2, w, n_terms=4)
    nf = normalize(H, 3, trunc=8)
    s = 0.7
    out = rescale(H, nf, s)
    for k, (before, after) in enumerate(zip(nf.invariants, out.parts), start=1):
        if before.is_zero():
            assert after.is_zero()
            continue
        ratio = bombieri_norm(after, k) / bombieri_norm(before, k)
        assert ratio == pytest.approx(s ** (2 * k - 2), rel=1e-12)


def test_rescale_brick_constraint(rng):
    """Unit-brick invariants stay inside the brick after rescale, s <= 1."""
    parts = brick_parts(2, 4, 21)
    H = GradedPolynomial.from_actions(ActionPolynomial.linear([1.0, math.sqrt(2)]))
    nf = normalize(H, 4, trunc=8)
    nf.invariants = [parts[0] + ActionPolynomial.linear([1.0, math.sqrt(2)])] + parts[1:]
    for s in (1.0, 0.8, 0.3):
        out = rescale(H, nf, s)
        for k, part in enumerate(out.parts[1:], start=2):
            assert bombieri_norm(part, k) <= bombieri_norm(
                nf.invariants[k - 1], k
            ) + 1e-12
            assert bombieri_norm(part, k) <= 1.0 + 1e-12


def test_rescale_remainder_degrees(rng):
    w = make_omega(rng, 1, 6)
    H = random_hamiltonian(rng, 1, w, n_terms=3, degrees=(3, 4))
    nf = normalize(H, 2, trunc=6)
    s = 0.5
    out = rescale(H, nf, s)
    for key, c in out.remainder.terms.items():
        d = sum(key[0]) + sum(key[1])
        assert c == pytest.approx(nf.remainder.terms[key] * s ** (d - 2), rel=1e-14)


def test_rescale_domain_error():
    H = GradedPolynomial.from_actions(ActionPolynomial(1, {(1,): 1.0}))
    nf = normalize(H, 2)
    with pytest.raises(DomainError):
        rescale(H, nf, 1.5)
    with pytest.raises(DomainError):
        rescale(H, nf, 0.9, s_max=0.5)


# -- order schedule --------------------------------------------------------------


def test_order_schedule_examples():
    assert order_schedule(math.exp(-1.0)) == 1
    assert order_schedule(math.exp(-5.0)) == 5
    assert order_schedule(0.9) == 1


def test_order_schedule_monotone():
    rs = np.linspace(0.05, 0.9, 40)
    ms = [order_schedule(r) for r in rs]
    assert all(a >= b for a, b in zip(ms, ms[1:]))


def test_order_schedule_configurable():
    assert order_schedule(math.exp(-2.0), c=2.0, a=2.0) == 8


def test_order_schedule_domain():
    with pytest.raises(DomainError):
        order_schedule(1.5)
    with pytest.raises(DomainError):
        order_schedule(0.5, c=-1.0)


# -- torsion -------------------------------------------------------------------


def test_torsion_definite():
    t = torsion_class(ActionPolynomial(2, {(2, 0): 1.0, (0, 2): 1.0}))
    assert t.kind == "definite"
    assert t.margin == pytest.approx(2.0)


def test_torsion_negative_definite():
    t = torsion_class(ActionPolynomial(2, {(2, 0): -1.0, (0, 2): -1.0}))
    assert t.kind == "definite"


def test_torsion_indefinite():
    t = torsion_class(ActionPolynomial(2, {(2, 0): 1.0, (0, 2): -1.0}))
    assert t.kind == "indefinite"


def test_torsion_cross_term():
    # Hessian [[0, 1], [1, 0]] has eigenvalues +-1
    t = torsion_class(ActionPolynomial(2, {(1, 1): 1.0}))
    assert t.kind == "indefinite"
    assert t.margin == pytest.approx(1.0)
    np.testing.assert_allclose(sorted(t.eigenvalues), [-1.0, 1.0], atol=1e-12)


def test_torsion_degenerate():
    t = torsion_class(ActionPolynomial(2, {(2, 0): 1.0}))
    assert t.kind == "degenerate"
    assert t.margin == pytest.approx(0.0, abs=1e-12)


def test_torsion_shape_check():
    with pytest.raises(ShapeError):
        torsion_class(ActionPolynomial(2, {(1, 0): 1.0}))


# -- bad-parameter volume ---------------------------------------------------------


def test_badvol_definite_is_zero():
    # sigma_min(hess) = 2 everywhere: criterion unsatisfiable below the margin
    h = ActionPolynomial(2, {(2, 0): 1.0, (0, 2): 1.0})
    est = bad_parameter_volume(h, 1.0, 0.25, samples=800, grid=31)
    assert est.bad_count == 0


def test_badvol_zero_hamiltonian_ball():
    # h = 0: bad set is {||omega|| <= sqrt(eps)}
    eps = 0.04
    est = bad_parameter_volume(ActionPolynomial.zero(2), 1.0, eps, samples=6000,
                               grid=11)
    expected = eps  # area ratio (sqrt(eps)/1)^2
    assert est.bad_fraction == pytest.approx(expected, abs=0.015)
    lo, hi = est.fraction_ci()
    assert lo <= expected <= hi + 0.01


def test_badvol_cubic_power_law():
    h = ActionPolynomial(1, {(3,): 1.0})
    eps_list = [1e-4, 1e-3, 1e-2, 1e-1]
    ests = badvol_sweep(h, 1.0, eps_list, samples=4000, grid=201, seed=3)
    fracs = [e.bad_fraction for e in ests]
    assert all(f > 0 for f in fracs)
    slope = np.polyfit(np.log(eps_list), np.log(fracs), 1)[0]
    assert slope > 0.2


def test_badvol_monotone_in_eps():
    h = ActionPolynomial(1, {(3,): 1.0})
    ests = badvol_sweep(h, 1.0, [1e-3, 3e-3, 1e-2, 3e-2], samples=2000, grid=101)
    counts = [e.bad_count for e in ests]
    assert all(a <= b for a, b in zip(counts, counts[1:]))


def test_badvol_seed_determinism():
    h = ActionPolynomial(1, {(3,): 1.0})
    a = bad_parameter_volume(h, 0.5, 1e-2, samples=500, grid=51, seed=9)
    b = bad_parameter_volume(h, 0.5, 1e-2, samples=500, grid=51, seed=9)
    assert a.bad_count == b.bad_count


def test_badvol_domain_checks():
    h = ActionPolynomial(1, {(1,): 1.0})
    with pytest.raises(DomainError):
        bad_parameter_volume(h, 1.0, 1e-2)  # only linear terms
    with pytest.raises(DomainError):
        bad_parameter_volume(ActionPolynomial.zero(1), -1.0, 1e-2)
