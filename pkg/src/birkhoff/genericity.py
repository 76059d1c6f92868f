"""Executable genericity machinery.

The Birkhoff-invariant coefficient map on action-polynomial perturbations and
its structure (triangular, unit Jacobian), the conformal rescaling that pulls
the integrable part back into the unit brick, torsion classification, and a
Monte-Carlo proxy for the bad-frequency volume.
"""

import math

import numpy as np

from .bnf import extract_diagonal_frequency, normalize
from .brick import degree_dimension, degree_exponents
from .errors import DomainError, ShapeError
from .polyalg import ActionPolynomial, GradedPolynomial


def coefficient_dimension(n, m):
    """D_m = sum_{k=1}^m dim P_k: coefficient-space dimension through degree m."""
    return sum(degree_dimension(n, k) for k in range(1, m + 1))


def bnf_map(base_H, m, P, trunc=None):
    """Map (P_1..P_m) to the order-1..m Birkhoff invariants of base_H + sum P_j.

    P entries are action polynomials, P_k homogeneous of degree k (zero
    polynomials allowed). Q_1 = P_1 + omega_base.I is a translation; for
    k >= 2 the output is Q_k = P_k + (terms built from P_1..P_{k-1} only).
    """
    if len(P) != m:
        raise ShapeError(f"need exactly m = {m} perturbation parts")
    n = base_H.n
    H = base_H
    for k, part in enumerate(P, start=1):
        if part.is_zero():
            continue
        if not part.is_homogeneous(k):
            raise ShapeError(f"P_{k} must be homogeneous of degree {k}")
        H = H + part.to_graded()
    result = normalize(H, m, trunc=trunc if trunc is not None else 2 * m)
    return result.invariants


def _flatten(P, n, m):
    vec = []
    for k in range(1, m + 1):
        part = P[k - 1]
        for l in degree_exponents(n, k):
            vec.append(part.coeffs.get(l, 0.0))
    return np.array(vec)


def _unflatten(vec, n, m):
    P = []
    pos = 0
    for k in range(1, m + 1):
        exps = degree_exponents(n, k)
        coeffs = {l: vec[pos + i] for i, l in enumerate(exps)}
        pos += len(exps)
        P.append(ActionPolynomial(n, coeffs))
    return P


def bnf_map_jacobian(base_H, m, P0, fd_step):
    """Central finite-difference Jacobian of the coefficient map at P0.

    Returns (det, matrix) in the graded coefficient basis (degree 1 block
    first). Expected: lower block-triangular with identity diagonal blocks.
    """
    if fd_step <= 0:
        raise DomainError("fd_step must be positive")
    n = base_H.n
    base = _flatten(P0, n, m)
    dim = base.size
    cols = []
    for i in range(dim):
        plus = base.copy()
        plus[i] += fd_step
        minus = base.copy()
        minus[i] -= fd_step
        q_plus = _flatten(bnf_map(base_H, m, _unflatten(plus, n, m)), n, m)
        q_minus = _flatten(bnf_map(base_H, m, _unflatten(minus, n, m)), n, m)
        cols.append((q_plus - q_minus) / (2 * fd_step))
    jac = np.column_stack(cols)
    return float(np.linalg.det(jac)), jac


def jacobian_unit_check(base_H, m, P0, fd_step):
    """Finite-difference determinant of the invariant map at P0; expected 1."""
    det, _ = bnf_map_jacobian(base_H, m, P0, fd_step)
    return det


class RescaleContext:
    """Bookkeeping for a conformal rescaling at order m."""

    def __init__(self, s_m, r_m, m, n):
        if not 0 < s_m:
            raise DomainError("s_m must be positive")
        if not 0 < r_m <= 1:
            raise DomainError("r_m must lie in (0, 1]")
        self.s_m = float(s_m)
        self.r_m = float(r_m)
        self.m = int(m)
        self.n = int(n)
        self.D_m = coefficient_dimension(n, m)

    def to_json_dict(self):
        return {
            "s_m": self.s_m,
            "r_m": self.r_m,
            "m": self.m,
            "n": self.n,
            "D_m": self.D_m,
        }


class RescaleResult:
    """Rescaled Hamiltonian K_m(z') = s_m^{-2} (H o Phi_m)(s_m z').

    ``parts`` holds the rescaled invariants (degree-k action coefficients
    multiplied by s_m^{2k-2}); ``remainder`` the rescaled remainder
    (phase-space degree-d coefficients multiplied by s_m^{d-2}).
    """

    def __init__(self, parts, remainder, context):
        self.parts = parts
        self.remainder = remainder
        self.context = context

    def integrable(self):
        out = ActionPolynomial.zero(self.context.n)
        for p in self.parts:
            out = out + p
        return out

    def hamiltonian(self):
        return self.integrable().to_graded() + self.remainder

    def __repr__(self):
        return f"RescaleResult(m={self.context.m}, s_m={self.context.s_m})"


def rescale(H, nf, s_m, r_m=1.0, s_max=1.0):
    """Rescale a normal form to the unit scale of the brick.

    The degree-k integrable coefficients pick up s_m^{2k-2}; for s_m <= 1 and
    invariants inside the unit brick the rescaled integrable part stays inside
    the brick. ``s_max`` is the normalization radius; s_m beyond it is a
    domain error.
    """
    if H.n != nf.omega.n:
        raise ShapeError("H and normal form disagree on n")
    if s_m <= 0 or s_m > s_max:
        raise DomainError(
            f"s_m = {s_m} outside the normalization domain (0, {s_max}]"
        )
    ctx = RescaleContext(s_m, r_m, nf.order_m, nf.omega.n)
    parts = []
    for k, inv in enumerate(nf.invariants, start=1):
        parts.append(s_m ** (2 * k - 2) * inv)
    rem_terms = {}
    for (a, b), c in nf.remainder.terms.items():
        d = sum(a) + sum(b)
        rem_terms[(a, b)] = c * s_m ** (d - 2)
    remainder = GradedPolynomial(nf.remainder.n, rem_terms)
    return RescaleResult(parts, remainder, ctx)


def order_schedule(r_m, c=1.0, a=1.0):
    """Normalization order m = ceil(c * |log r_m|^a) for experiment radius r_m."""
    if not 0 < r_m < 1:
        raise DomainError("r_m must lie in (0, 1)")
    if c <= 0 or a <= 0:
        raise DomainError("schedule constants must be positive")
    return max(1, math.ceil(c * abs(math.log(r_m)) ** a))


class TorsionClass:
    """Classification of the torsion form B2 by its Hessian spectrum."""

    def __init__(self, kind, margin, eigenvalues):
        self.kind = kind
        self.margin = margin
        self.eigenvalues = eigenvalues

    def __repr__(self):
        return f"TorsionClass({self.kind!r}, margin={self.margin:.6g})"


def torsion_class(B2, tol=1e-12):
    """Classify a degree-2 action form as definite / indefinite / degenerate.

    Uses the Hessian matrix of B2 (so B2 = I_1^2 + I_2^2 gives 2*Id and
    margin 2); margin is the smallest absolute eigenvalue.
    """
    if not B2.is_homogeneous(2):
        raise ShapeError("torsion form must be homogeneous of degree 2 in I")
    n = B2.n
    M = np.zeros((n, n))
    for l, c in B2.coeffs.items():
        idx = [j for j, e in enumerate(l) for _ in range(e)]
        i, j = idx
        if i == j:
            M[i, i] += 2 * c
        else:
            M[i, j] += c
            M[j, i] += c
    eig = np.linalg.eigvalsh(M)
    margin = float(np.min(np.abs(eig)))
    scale = max(float(np.max(np.abs(eig))), 1.0)
    if margin <= tol * scale:
        kind = "degenerate"
    elif np.all(eig > 0) or np.all(eig < 0):
        kind = "definite"
    else:
        kind = "indefinite"
    return TorsionClass(kind, margin, eig)


class BadVolumeEstimate:
    """Monte-Carlo estimate of the bad-frequency volume with a binomial CI."""

    def __init__(self, eps, rho, samples, grid, bad_count, seed):
        self.eps = float(eps)
        self.rho = float(rho)
        self.samples = int(samples)
        self.grid = int(grid)
        self.bad_count = int(bad_count)
        self.seed = int(seed)

    @property
    def bad_fraction(self):
        return self.bad_count / self.samples

    def ball_volume(self, n):
        return math.pi ** (n / 2) / math.gamma(n / 2 + 1) * self.rho**n

    def volume(self, n):
        return self.bad_fraction * self.ball_volume(n)

    def fraction_ci(self, z=1.959963984540054):
        """Wilson 95% interval for the bad fraction."""
        nS = self.samples
        p = self.bad_fraction
        denom = 1 + z * z / nS
        center = (p + z * z / (2 * nS)) / denom
        half = z * math.sqrt(p * (1 - p) / nS + z * z / (4 * nS * nS)) / denom
        return max(0.0, center - half), min(1.0, center + half)


def _action_grid(n, grid):
    axes = [np.linspace(0.0, 1.0, grid)] * n
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=1)
    return pts[np.linalg.norm(pts, axis=1) <= 1.0]


def _omega_ball_samples(n, rho, samples, seed):
    key = np.random.SeedSequence((int(seed), 0xBAD)).generate_state(2, dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(key=key))
    g = rng.standard_normal((samples, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = rng.random(samples) ** (1.0 / n)
    return rho * g * r[:, None]


def _near_critical_tables(h, grid):
    pts = _action_grid(h.n, grid)
    grads = h.gradient(pts)
    hess = h.hessian(pts)
    smin = np.min(np.abs(np.linalg.eigvalsh(hess)), axis=1)
    return grads, smin


def _count_bad(omegas, grads, smin, eps):
    thr = math.sqrt(eps)
    candidates = grads[smin <= thr]
    if candidates.size == 0:
        return 0
    bad = 0
    for chunk in np.array_split(omegas, max(1, len(omegas) // 256)):
        d2 = np.sum(
            (candidates[None, :, :] - chunk[:, None, :]) ** 2, axis=2
        )
        bad += int(np.sum(np.min(d2, axis=1) <= thr * thr))
    return bad


def bad_parameter_volume(h, rho, eps, samples=2000, grid=41, seed=0):
    """Monte-Carlo proxy for the volume of bad frequencies in the rho-ball.

    omega is bad iff some grid point I of the unit action ball has
    ||grad h(I) - omega|| <= sqrt(eps) and the smallest singular value of
    the Hessian of h at I is <= sqrt(eps): a near-critical point of
    h - omega.I that is quantitatively degenerate.
    """
    if rho <= 0 or eps <= 0:
        raise DomainError("rho and eps must be positive")
    if not (h.is_zero() or h.max_degree() >= 2):
        raise DomainError("h needs quadratic or higher terms (or be zero)")
    grads, smin = _near_critical_tables(h, grid)
    omegas = _omega_ball_samples(h.n, rho, samples, seed)
    bad = _count_bad(omegas, grads, smin, eps)
    return BadVolumeEstimate(eps, rho, samples, grid, bad, seed)


def badvol_sweep(h, rho, eps_list, samples=2000, grid=41, seed=0):
    """bad_parameter_volume across eps values on common random numbers.

    The omega sample and the near-critical tables are drawn once, so the
    estimates are monotone non-decreasing in eps by construction.
    """
    if rho <= 0:
        raise DomainError("rho must be positive")
    grads, smin = _near_critical_tables(h, grid)
    omegas = _omega_ball_samples(h.n, rho, samples, seed)
    out = []
    for eps in eps_list:
        if eps <= 0:
            raise DomainError("eps values must be positive")
        bad = _count_bad(omegas, grads, smin, eps)
        out.append(BadVolumeEstimate(eps, rho, samples, grid, bad, seed))
    return out
