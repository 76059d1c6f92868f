"""Lie-series Birkhoff normalization to a chosen order.

Degree-by-degree scheme: at each homogeneous degree d in 3..2m the current
degree-d part R is split as R = kernel + {chi, omega.I}; the time-1 flow of
chi removes the non-resonant part and the loop proceeds to the next degree.
Monomials with a = b are resonant (normal-form) terms and are kept; for
a != b the generator coefficient is R's divided by i (a-b).omega.
"""

import math
from math import factorial

import numpy as np

from .errors import DomainError, ShapeError, SmallDivisorError
from .polyalg import (
    ActionPolynomial,
    Frequency,
    GradedPolynomial,
    poisson_bracket,
    sup_norm_bound,
)

# |k.omega| below GUARD_REL * max|omega_j| is treated as a resonance.
GUARD_REL = 1e-10


def _uses_mpmath(poly):
    for c in poly.terms.values():
        return not isinstance(c, (complex, float, int))
    return False


def homological_solve(R, omega, guard_rel=GUARD_REL):
    """Split a homogeneous R as kernel + {chi, omega.I}.

    Returns (kernel_part, generator). The kernel keeps exactly the a = b
    monomials; the generator's coefficient at (a, b) is R's divided by
    i (a-b).omega. Raises SmallDivisorError when a divisor falls below
    guard_rel * max|omega_j|.
    """
    kernel, chi, _ = _solve_order(R, omega, guard_rel)
    return kernel, chi


def _solve_order(R, omega, guard_rel):
    """homological_solve plus the minimum divisor magnitude encountered."""
    degrees = {R.degree_of(k) for k in R.terms}
    if len(degrees) > 1:
        raise ShapeError(f"R must be homogeneous, found degrees {sorted(degrees)}")
    w = omega.omega if isinstance(omega, Frequency) else np.asarray(omega, float)
    guard = guard_rel * max(np.max(np.abs(w)), 1e-300)
    degree = next(iter(degrees)) if degrees else None
    use_mp = _uses_mpmath(R)
    if use_mp:
        import mpmath

        w_mp = [mpmath.mpf(float(v)) for v in w]
        i_unit = mpmath.mpc(0, 1)
    kernel = {}
    chi = {}
    min_div = None
    for (a, b), c in R.terms.items():
        if a == b:
            kernel[(a, b)] = c
            continue
        k = tuple(ai - bi for ai, bi in zip(a, b))
        if use_mp:
            kw = mpmath.fsum(ki * wi for ki, wi in zip(k, w_mp))
        else:
            kw = float(np.dot(k, w))
        mag = abs(kw)
        if mag < guard:
            raise SmallDivisorError(k, mag, degree)
        if min_div is None or mag < min_div:
            min_div = float(mag)
        chi[(a, b)] = c / ((i_unit if use_mp else 1j) * kw)
    return (
        GradedPolynomial(R.n, kernel),
        GradedPolynomial(R.n, chi),
        min_div,
    )


def exp_ad(H, chi, max_degree):
    """exp(ad_chi) H truncated at max_degree, with ad f = {f, chi}.

    Realizes H o (time-1 flow of chi). Terminates because deg(chi) >= 3
    raises the minimum degree at every bracket.
    """
    if chi.is_zero():
        return H.truncate(max_degree)
    out = H.truncate(max_degree)
    term = out
    r = 1
    while True:
        term = poisson_bracket(term, chi, max_degree=max_degree)
        if term.is_zero():
            return out
        out = out + (1.0 / factorial(r)) * term
        r += 1
        if r > 4 * max_degree:
            raise RuntimeError("runaway Lie series; check generator degree")


def lie_transport(H, generators, max_degree):
    """Transport H through a generator chain; independent re-expansion path.

    Coded separately from the exp_ad route used inside normalize: works on
    per-degree buckets with an explicit bracket cascade, so a bookkeeping
    bug in one evaluator is caught by the other.
    """
    buckets = {
        d: dict(p.terms) for d, p in H.truncate(max_degree).parts_by_degree().items()
    }
    n = H.n
    for chi in generators:
        if chi.is_zero():
            continue
        dchi = chi.max_degree()
        step = dchi - 2
        new_buckets = {d: dict(t) for d, t in buckets.items()}
        # ad^r applied bucket-by-bucket; level[r] holds ad^r of each source degree
        level = {
            d: GradedPolynomial(n, t) for d, t in buckets.items()
        }
        r = 1
        while level:
            nxt = {}
            for d, poly in level.items():
                target = d + step
                if target > max_degree:
                    continue
                br = poisson_bracket(poly, chi, max_degree=max_degree)
                if br.is_zero():
                    continue
                nxt[target] = br
                dest = new_buckets.setdefault(target, {})
                scale = 1.0 / factorial(r)
                for key, c in br.terms.items():
                    dest[key] = dest.get(key, 0) + scale * c
            level = nxt
            r += 1
        buckets = new_buckets
    acc = {}
    for t in buckets.values():
        for key, c in t.items():
            acc[key] = acc.get(key, 0) + c
    return GradedPolynomial(n, acc)


def extract_diagonal_frequency(H):
    """Frequency of a diagonal quadratic part omega.I; ShapeError otherwise."""
    n = H.n
    low = [k for k in H.terms if H.degree_of(k) < 2]
    if low:
        raise ShapeError("H has terms of degree < 2; expand around the fixed point")
    omega = np.zeros(n)
    for (a, b), c in H.terms.items():
        if sum(a) + sum(b) != 2:
            continue
        if a != b:
            raise ShapeError(
                "quadratic part is not diagonal; apply diagonalize_quadratic first"
            )
        j = a.index(1)
        cc = complex(c)
        if abs(cc.imag) > 1e-10 * (1 + abs(cc)):
            raise ShapeError("quadratic part must be real")
        omega[j] = cc.real
    return Frequency(omega)


class NormalFormResult:
    """Output of :func:`normalize`.

    Attributes
    ----------
    omega : Frequency
    order_m : int
        Normal form complete through total degree 2 * order_m.
    invariants : list of ActionPolynomial
        (B1..Bm); B1 = omega.I exactly, Bk homogeneous of degree k in I.
    generators : list of GradedPolynomial
        (chi_3..chi_2m) generating the normalizing transformation.
    remainder : GradedPolynomial
        Terms of degree >= 2m+1 up to the working truncation degree.
    divisor_log : dict
        Per-degree minimum |(a-b).omega| among divided monomials.
    trunc : int
        Working truncation degree.
    """

    SCHEMA_VERSION = 1

    def __init__(self, omega, order_m, invariants, generators, remainder,
                 divisor_log, trunc):
        self.omega = omega
        self.order_m = order_m
        self.invariants = invariants
        self.generators = generators
        self.remainder = remainder
        self.divisor_log = divisor_log
        self.trunc = trunc

    def integrable_part(self):
        """h_m = sum_k B^(k) as one ActionPolynomial."""
        out = ActionPolynomial.zero(self.omega.n)
        for inv in self.invariants:
            out = out + inv
        return out

    def normal_form_hamiltonian(self):
        """sum_k B^(k)(I) + remainder, as a phase-space polynomial."""
        return self.integrable_part().to_graded() + self.remainder

    def transform_points(self, z, dt=0.01, fp_tol=1e-14):
        """Evaluate Phi_m at points z (rows) by flowing each generator.

        Phi_m = flow(chi_3) o ... o flow(chi_2m): the highest-degree
        generator acts on the input first.
        """
        from .dynamics import flow_time_one

        z = np.atleast_2d(np.asarray(z, dtype=float))
        for chi in reversed(self.generators):
            if chi.is_zero():
                continue
            z = flow_time_one(chi, z, dt=dt, fp_tol=fp_tol)
        return z

    def to_json_dict(self):
        return {
            "schema_version": self.SCHEMA_VERSION,
            "omega": [float(v) for v in self.omega.omega],
            "order_m": self.order_m,
            "trunc": self.trunc,
            "invariants": [
                {
                    "degree": k + 1,
                    "coeffs": {
                        " ".join(map(str, l)): c for l, c in inv.sorted_coeffs()
                    },
                }
                for k, inv in enumerate(self.invariants)
            ],
            "divisor_log": {str(d): v for d, v in sorted(self.divisor_log.items())},
            "remainder_terms": len(self.remainder.terms),
            "generator_terms": [len(g.terms) for g in self.generators],
        }

    def __repr__(self):
        return (
            f"NormalFormResult(m={self.order_m}, trunc={self.trunc}, "
            f"remainder_terms={len(self.remainder.terms)})"
        )


def normalize(H, m, trunc=None, guard_rel=GUARD_REL, precision=None):
    """Birkhoff-normalize H = omega.I + f to order m (total degree 2m).

    Parameters
    ----------
    H : GradedPolynomial
        Quadratic part must already be diagonal (omega.I); f = O(z^3).
    m : int
        Target order; requires omega non-resonant through order 2m.
    trunc : int, optional
        Working truncation degree, >= 2m; defaults to 2m + 2.
    guard_rel : float
        Small-divisor guard relative to max|omega_j|.
    precision : int, optional
        Decimal digits for an extended-precision run (mpmath coefficients);
        the result is converted back to double precision.

    Returns
    -------
    NormalFormResult
    """
    if m < 1:
        raise DomainError("order m must be >= 1")
    if trunc is None:
        trunc = 2 * m + 2
    if trunc < 2 * m:
        raise DomainError(f"trunc = {trunc} must be >= 2m = {2 * m}")
    omega = extract_diagonal_frequency(H)
    if precision is not None:
        import mpmath

        with mpmath.workdps(precision):
            res = _normalize_loop(
                H.with_precision(precision), omega, m, trunc, guard_rel
            )
            return _result_to_double(res)
    return _normalize_loop(H, omega, m, trunc, guard_rel)


def _normalize_loop(H, omega, m, trunc, guard_rel):
    n = H.n
    current = H.truncate(trunc)
    generators = []
    divisor_log = {}
    for d in range(3, 2 * m + 1):
        R = current.homogeneous_part(d)
        if R.is_zero():
            generators.append(GradedPolynomial.zero(n))
            continue
        _, chi, min_div = _solve_order(R, omega, guard_rel)
        if min_div is not None:
            divisor_log[d] = min_div
        generators.append(chi)
        if not chi.is_zero():
            current = exp_ad(current, chi, trunc)
    invariants = []
    for k in range(1, m + 1):
        part = current.homogeneous_part(2 * k)
        coeffs = {}
        scale = max((abs(c) for c in part.terms.values()), default=0.0)
        for (a, b), c in part.terms.items():
            if a != b:
                if abs(c) > 1e-9 * max(scale, 1.0):
                    raise RuntimeError(
                        f"normalization left a non-resonant term at degree {2 * k}"
                    )
                continue
            cc = complex(c)
            coeffs[a] = cc.real
        invariants.append(ActionPolynomial(n, coeffs))
    # odd degrees <= 2m carry no a = b monomials; anything surviving there is dust
    remainder = current.drop_below(2 * m + 1)
    return NormalFormResult(
        omega, m, invariants, generators, remainder, divisor_log, trunc
    )


def _result_to_double(res):
    return NormalFormResult(
        res.omega,
        res.order_m,
        res.invariants,
        [g.to_double() for g in res.generators],
        res.remainder.to_double(),
        res.divisor_log,
        res.trunc,
    )


def invariant_uniqueness_check(H, m, trunc1, trunc2, tol=1e-9):
    """True iff the invariants from two working truncations agree.

    Coefficient-wise relative comparison for every order k <= m.
    """
    r1 = normalize(H, m, trunc=trunc1)
    r2 = normalize(H, m, trunc=trunc2)
    for inv1, inv2 in zip(r1.invariants, r2.invariants):
        keys = set(inv1.coeffs) | set(inv2.coeffs)
        scale = max(
            [abs(c) for c in inv1.coeffs.values()]
            + [abs(c) for c in inv2.coeffs.values()]
            + [1e-300]
        )
        for l in keys:
            if abs(inv1.coeffs.get(l, 0.0) - inv2.coeffs.get(l, 0.0)) > tol * max(
                scale, 1.0
            ):
                return False
    return True


def remainder_norm(result, s_m):
    """Majorant bound for the remainder on the ball of radius s_m.

    O(s_m^{2m+1}) as s_m -> 0 because the remainder starts at degree 2m+1.
    """
    if s_m <= 0:
        raise DomainError("radius must be positive")
    return sup_norm_bound(result.remainder, s_m)


def radius_schedule(gamma, tau, m, domain_radius=1.0):
    """Normalization radius s_m = gamma / m^{1+tau}, clamped to the domain."""
    if gamma <= 0 or tau <= 0:
        raise DomainError("gamma and tau must be positive")
    if m < 1:
        raise DomainError("m must be >= 1")
    return min(gamma / m ** (1.0 + tau), domain_radius)


def transport_defect(H, result, rel_tol=1e-9):
    """Max relative coefficient error between the independently transported H
    and the normal form the engine reports; small values certify the run."""
    transported = lie_transport(H, result.generators, result.trunc)
    reference = result.normal_form_hamiltonian()
    diff = transported - reference
    scale = max((abs(c) for c in transported.terms.values()), default=0.0)
    if scale == 0.0:
        return 0.0
    return max((abs(c) for c in diff.terms.values()), default=0.0) / scale
