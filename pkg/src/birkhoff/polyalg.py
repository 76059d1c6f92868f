"""Sparse graded polynomial algebra on phase space.

Polynomials on R^{2n} with coordinates z = (x_1..x_n, y_1..y_n) are stored in
complexified diagonal coordinates

    zeta_j = (x_j - i y_j) / sqrt(2),   zetabar_j = (x_j + i y_j) / sqrt(2),

so that the formal actions are I_j = zeta_j * zetabar_j and the bracket with
omega.I acts diagonally on monomials:

    {omega.I, zeta^a zetabar^b} = -i (a - b).omega * zeta^a zetabar^b.

A term is keyed by the exponent pair (a, b) in N^n x N^n.
"""

import cmath
import math
from math import factorial

import numpy as np

from .errors import (
    DegenerateFrequencyError,
    DimensionMismatchError,
    DomainError,
    NotEllipticError,
    ShapeError,
)

SQRT2 = math.sqrt(2.0)

# Relative per-degree threshold below which coefficients are dropped.
PRUNE_REL = 1e-14

# Hermitian-defect tolerance (relative) for the reality flag.
REALITY_REL = 1e-12


def _prune_threshold(coeff_sample):
    """Pruning threshold scale for the coefficient type in use."""
    if isinstance(coeff_sample, (complex, float, int)):
        return PRUNE_REL
    # mpmath coefficients: keep a margin of ~2 digits above working precision
    import mpmath

    return mpmath.mpf(10) ** (-(mpmath.mp.dps - 2))


def _prune(terms):
    """Drop zeros and per-degree relatively negligible coefficients (in place)."""
    if not terms:
        return terms
    rel = _prune_threshold(next(iter(terms.values())))
    deg_max = {}
    for (a, b), c in terms.items():
        d = sum(a) + sum(b)
        m = abs(c)
        if m > deg_max.get(d, 0.0):
            deg_max[d] = m
    dead = [
        key
        for key, c in terms.items()
        if abs(c) <= rel * deg_max[sum(key[0]) + sum(key[1])]
    ]
    for key in dead:
        del terms[key]
    return terms


def multinomial(k, l):
    """Multinomial coefficient k! / (l_1! ... l_n!) as an exact integer."""
    out = factorial(k)
    for li in l:
        out //= factorial(li)
    return out


class GradedPolynomial:
    """Sparse polynomial in the complexified phase-space variables.

    Parameters
    ----------
    n : int
        Degrees of freedom; the phase space is R^{2n}.
    terms : dict
        Map from ((a_1..a_n), (b_1..b_n)) to a complex coefficient.
        Zero and relatively negligible coefficients are pruned.

    Instances are immutable by convention: no method mutates ``self``.
    """

    __slots__ = ("n", "terms", "reality_flag")

    def __init__(self, n, terms=None):
        if n < 1:
            raise DomainError("need n >= 1 degrees of freedom")
        self.n = int(n)
        clean = {}
        for (a, b), c in (terms or {}).items():
            a = tuple(int(v) for v in a)
            b = tuple(int(v) for v in b)
            if len(a) != self.n or len(b) != self.n:
                raise ShapeError(f"exponent tuples must have length n={self.n}")
            if any(v < 0 for v in a) or any(v < 0 for v in b):
                raise ShapeError("negative exponent")
            if c != 0:
                clean[(a, b)] = clean.get((a, b), 0) + c
        _prune(clean)
        self.terms = clean
        self.reality_flag = self._detect_reality()

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, n):
        return cls(n, {})

    @classmethod
    def from_real_terms(cls, n, real_terms):
        """Build from coefficients on real monomials x^alpha y^beta.

        ``real_terms`` maps ((alpha_1..alpha_n), (beta_1..beta_n)) to a real
        (or complex) coefficient of the monomial prod x_j^alpha_j y_j^beta_j.
        """
        # x_j = (zeta_j + zetabar_j)/sqrt2, y_j = i(zeta_j - zetabar_j)/sqrt2
        acc = {}
        for (alpha, beta), c in real_terms.items():
            if len(alpha) != n or len(beta) != n:
                raise ShapeError(f"exponent tuples must have length n={n}")
            prod = {(((0,) * n), ((0,) * n)): complex(c)}
            for j in range(n):
                for _ in range(alpha[j]):
                    prod = _mul_linear(prod, n, j, 1 / SQRT2, 1 / SQRT2)
                for _ in range(beta[j]):
                    prod = _mul_linear(prod, n, j, 1j / SQRT2, -1j / SQRT2)
            for key, v in prod.items():
                acc[key] = acc.get(key, 0) + v
        return cls(n, acc)

    @classmethod
    def from_actions(cls, action_poly):
        """Lift an :class:`ActionPolynomial` to phase space via I^l -> (l, l)."""
        terms = {(l, l): complex(c) for l, c in action_poly.coeffs.items()}
        return cls(action_poly.n, terms)

    # -- basic queries -------------------------------------------------------

    def _detect_reality(self):
        if not self.terms:
            return True
        scale = max(abs(c) for c in self.terms.values())
        for (a, b), c in self.terms.items():
            mirror = self.terms.get((b, a), 0)
            if abs(c - mirror.conjugate()) > REALITY_REL * scale:
                return False
        return True

    def degree_of(self, key):
        a, b = key
        return sum(a) + sum(b)

    def max_degree(self):
        return max((sum(a) + sum(b) for a, b in self.terms), default=0)

    def min_degree(self):
        return min((sum(a) + sum(b) for a, b in self.terms), default=0)

    def is_zero(self):
        return not self.terms

    def coefficient(self, a, b):
        return self.terms.get((tuple(a), tuple(b)), 0)

    def homogeneous_part(self, d):
        return GradedPolynomial(
            self.n,
            {k: c for k, c in self.terms.items() if self.degree_of(k) == d},
        )

    def parts_by_degree(self):
        """Map degree -> homogeneous GradedPolynomial."""
        buckets = {}
        for key, c in self.terms.items():
            buckets.setdefault(self.degree_of(key), {})[key] = c
        return {
            d: GradedPolynomial(self.n, t) for d, t in sorted(buckets.items())
        }

    def truncate(self, max_degree):
        return GradedPolynomial(
            self.n,
            {k: c for k, c in self.terms.items() if self.degree_of(k) <= max_degree},
        )

    def drop_below(self, min_degree):
        return GradedPolynomial(
            self.n,
            {k: c for k, c in self.terms.items() if self.degree_of(k) >= min_degree},
        )

    # -- arithmetic ----------------------------------------------------------

    def _require_same_n(self, other):
        if self.n != other.n:
            raise DimensionMismatchError(
                f"mixed degree-of-freedom counts {self.n} and {other.n}"
            )

    def __add__(self, other):
        self._require_same_n(other)
        out = dict(self.terms)
        for key, c in other.terms.items():
            out[key] = out.get(key, 0) + c
        return GradedPolynomial(self.n, out)

    def __sub__(self, other):
        self._require_same_n(other)
        out = dict(self.terms)
        for key, c in other.terms.items():
            out[key] = out.get(key, 0) - c
        return GradedPolynomial(self.n, out)

    def __neg__(self):
        return GradedPolynomial(self.n, {k: -c for k, c in self.terms.items()})

    def __rmul__(self, scalar):
        return GradedPolynomial(
            self.n, {k: scalar * c for k, c in self.terms.items()}
        )

    __mul__ = __rmul__

    def mul(self, other, max_degree=None):
        """Polynomial product, optionally truncated at ``max_degree``."""
        self._require_same_n(other)
        out = {}
        for (a1, b1), c1 in self.terms.items():
            d1 = sum(a1) + sum(b1)
            for (a2, b2), c2 in other.terms.items():
                if max_degree is not None and d1 + sum(a2) + sum(b2) > max_degree:
                    continue
                key = (
                    tuple(u + v for u, v in zip(a1, a2)),
                    tuple(u + v for u, v in zip(b1, b2)),
                )
                out[key] = out.get(key, 0) + c1 * c2
        return GradedPolynomial(self.n, out)

    def conjugate_mirror_defect(self):
        """Max |c_{a,b} - conj(c_{b,a})|; zero for real-valued polynomials."""
        if not self.terms:
            return 0.0
        return max(
            abs(c - self.terms.get((b, a), 0).conjugate())
            for (a, b), c in self.terms.items()
        )

    # -- evaluation ----------------------------------------------------------

    def evaluate(self, z):
        """Evaluate at a phase point z = (x_1..x_n, y_1..y_n).

        Accepts real or complex entries (the polynomial extends
        holomorphically). Returns a float when the polynomial is real-valued
        and the point is real, else a complex number.
        """
        z = np.asarray(z)
        if z.shape != (2 * self.n,):
            raise ShapeError(f"phase point must have length {2 * self.n}")
        x, y = z[: self.n], z[self.n :]
        zeta = (x - 1j * y) / SQRT2
        zbar = (x + 1j * y) / SQRT2
        total = 0j
        for (a, b), c in self.terms.items():
            v = complex(c)
            for j in range(self.n):
                if a[j]:
                    v *= zeta[j] ** a[j]
                if b[j]:
                    v *= zbar[j] ** b[j]
            total += v
        if self.reality_flag and not np.iscomplexobj(z):
            return total.real
        return total

    def to_real_terms(self):
        """Coefficients on real monomials x^alpha y^beta.

        Returns a dict ((alpha), (beta)) -> complex; imaginary parts are at
        roundoff level when the polynomial is real-valued.
        """
        n = self.n
        acc = {}
        for (a, b), c in self.terms.items():
            # zeta_j = (x_j - i y_j)/sqrt2, zetabar_j = (x_j + i y_j)/sqrt2
            prod = {(((0,) * n), ((0,) * n)): complex(c)}
            for j in range(n):
                for _ in range(a[j]):
                    prod = _mul_linear(prod, n, j, 1 / SQRT2, -1j / SQRT2)
                for _ in range(b[j]):
                    prod = _mul_linear(prod, n, j, 1 / SQRT2, 1j / SQRT2)
            for key, v in prod.items():
                acc[key] = acc.get(key, 0) + v
        # prune roundoff dust against the per-degree scale
        out = {}
        deg_max = {}
        for key, v in acc.items():
            d = sum(key[0]) + sum(key[1])
            deg_max[d] = max(deg_max.get(d, 0.0), abs(v))
        for key, v in acc.items():
            d = sum(key[0]) + sum(key[1])
            if abs(v) > PRUNE_REL * deg_max[d]:
                out[key] = v
        return out

    def substitute_linear(self, matrix, max_degree=None):
        """Compose with a linear map of the complexified variables.

        ``matrix`` is 2n x 2n (complex): old variable i becomes
        sum_j matrix[i, j] * new variable j, with variables ordered
        (zeta_1..zeta_n, zetabar_1..zetabar_n).
        """
        n = self.n
        M = np.asarray(matrix, dtype=complex)
        if M.shape != (2 * n, 2 * n):
            raise ShapeError("substitution matrix must be 2n x 2n")
        # cache powers of each variable's image
        one = {(((0,) * n), ((0,) * n)): 1.0 + 0j}
        images = []
        for i in range(2 * n):
            lin = {}
            for j in range(2 * n):
                if M[i, j] == 0:
                    continue
                a = [0] * n
                b = [0] * n
                if j < n:
                    a[j] = 1
                else:
                    b[j - n] = 1
                lin[(tuple(a), tuple(b))] = M[i, j]
            images.append(lin)
        pow_cache = [{0: one} for _ in range(2 * n)]

        def var_power(i, e):
            cache = pow_cache[i]
            if e not in cache:
                cache[e] = _dict_mul(var_power(i, e - 1), images[i], max_degree)
            return cache[e]

        acc = {}
        for (a, b), c in self.terms.items():
            prod = one
            for j in range(n):
                if a[j]:
                    prod = _dict_mul(prod, var_power(j, a[j]), max_degree)
                if b[j]:
                    prod = _dict_mul(prod, var_power(n + j, b[j]), max_degree)
            for key, v in prod.items():
                acc[key] = acc.get(key, 0) + c * v
        return GradedPolynomial(n, acc)

    # -- canonical text form ---------------------------------------------------

    def sorted_terms(self):
        """Terms in graded-lex order on (a, b)."""
        return sorted(
            self.terms.items(), key=lambda kv: (self.degree_of(kv[0]),) + kv[0]
        )

    def to_text(self):
        """Canonical serialization: one term per line,
        ``a_1 ... a_n | b_1 ... b_n | re im``, graded-lex sorted."""
        lines = []
        for (a, b), c in self.sorted_terms():
            c = complex(c)
            lines.append(
                "{} | {} | {!r} {!r}".format(
                    " ".join(map(str, a)), " ".join(map(str, b)), c.real, c.imag
                )
            )
        return "\n".join(lines)

    @classmethod
    def from_text(cls, n, text):
        terms = {}
        for line in text.strip().splitlines():
            line = line.strip()
            if not line:
                continue
            a_part, b_part, c_part = (p.strip() for p in line.split("|"))
            a = tuple(int(v) for v in a_part.split())
            b = tuple(int(v) for v in b_part.split())
            re, im = (float(v) for v in c_part.split())
            terms[(a, b)] = terms.get((a, b), 0) + complex(re, im)
        return cls(n, terms)

    def with_precision(self, dps):
        """Copy with coefficients converted to mpmath complex at ``dps`` digits."""
        import mpmath

        with mpmath.workdps(dps):
            terms = {
                k: mpmath.mpc(complex(c)) for k, c in self.terms.items()
            }
            return GradedPolynomial(self.n, terms)

    def to_double(self):
        """Copy with coefficients converted back to machine complex."""
        return GradedPolynomial(
            self.n, {k: complex(c) for k, c in self.terms.items()}
        )

    def __repr__(self):
        return (
            f"GradedPolynomial(n={self.n}, terms={len(self.terms)}, "
            f"degrees {self.min_degree()}..{self.max_degree()}, "
            f"real={self.reality_flag})"
        )


def _mul_linear(prod, n, j, coeff_zeta, coeff_zbar):
    """Multiply an exponent-dict polynomial by coeff_zeta*zeta_j + coeff_zbar*zetabar_j."""
    out = {}
    for (a, b), c in prod.items():
        if coeff_zeta != 0:
            a2 = list(a)
            a2[j] += 1
            key = (tuple(a2), b)
            out[key] = out.get(key, 0) + c * coeff_zeta
        if coeff_zbar != 0:
            b2 = list(b)
            b2[j] += 1
            key = (a, tuple(b2))
            out[key] = out.get(key, 0) + c * coeff_zbar
    return out


def _dict_mul(t1, t2, max_degree=None):
    out = {}
    for (a1, b1), c1 in t1.items():
        d1 = sum(a1) + sum(b1)
        for (a2, b2), c2 in t2.items():
            if max_degree is not None and d1 + sum(a2) + sum(b2) > max_degree:
                continue
            key = (
                tuple(u + v for u, v in zip(a1, a2)),
                tuple(u + v for u, v in zip(b1, b2)),
            )
            out[key] = out.get(key, 0) + c1 * c2
    return out


class ActionPolynomial:
    """Polynomial in the n action variables I with real coefficients.

    ``coeffs`` maps l in N^n to the coefficient of the monomial I^l.
    Corresponds to a phase-space polynomial whose terms all have a = b.
    """

    __slots__ = ("n", "coeffs")

    def __init__(self, n, coeffs=None):
        if n < 1:
            raise DomainError("need n >= 1")
        self.n = int(n)
        clean = {}
        for l, c in (coeffs or {}).items():
            l = tuple(int(v) for v in l)
            if len(l) != self.n:
                raise ShapeError(f"action exponent must have length n={self.n}")
            if any(v < 0 for v in l):
                raise ShapeError("negative exponent")
            c = float(c)
            if c != 0.0:
                clean[l] = clean.get(l, 0.0) + c
        # relative per-degree prune, mirroring GradedPolynomial
        deg_max = {}
        for l, c in clean.items():
            deg_max[sum(l)] = max(deg_max.get(sum(l), 0.0), abs(c))
        self.coeffs = {
            l: c for l, c in clean.items() if abs(c) > PRUNE_REL * deg_max[sum(l)]
        }

    @classmethod
    def zero(cls, n):
        return cls(n, {})

    @classmethod
    def linear(cls, omega):
        """The linear form omega.I."""
        omega = np.asarray(omega, dtype=float)
        n = omega.size
        coeffs = {}
        for j, w in enumerate(omega):
            l = [0] * n
            l[j] = 1
            coeffs[tuple(l)] = w
        return cls(n, coeffs)

    def is_zero(self):
        return not self.coeffs

    def max_degree(self):
        return max((sum(l) for l in self.coeffs), default=0)

    def degrees(self):
        return sorted({sum(l) for l in self.coeffs})

    def is_homogeneous(self, k):
        return all(sum(l) == k for l in self.coeffs)

    def homogeneous_part(self, k):
        return ActionPolynomial(
            self.n, {l: c for l, c in self.coeffs.items() if sum(l) == k}
        )

    def __add__(self, other):
        if self.n != other.n:
            raise DimensionMismatchError("mixed n")
        out = dict(self.coeffs)
        for l, c in other.coeffs.items():
            out[l] = out.get(l, 0.0) + c
        return ActionPolynomial(self.n, out)

    def __sub__(self, other):
        return self + (-1.0) * other

    def __rmul__(self, scalar):
        return ActionPolynomial(
            self.n, {l: scalar * c for l, c in self.coeffs.items()}
        )

    __mul__ = __rmul__

    def evaluate(self, I):
        I = np.atleast_2d(np.asarray(I, dtype=float))
        out = np.zeros(I.shape[0])
        for l, c in self.coeffs.items():
            term = np.full(I.shape[0], c)
            for j, e in enumerate(l):
                if e:
                    term *= I[:, j] ** e
            out += term
        return out if out.size > 1 else float(out[0])

    def gradient(self, I):
        """Gradient dP/dI at points I (M x n) -> (M x n)."""
        I = np.atleast_2d(np.asarray(I, dtype=float))
        out = np.zeros_like(I)
        for l, c in self.coeffs.items():
            for j, e in enumerate(l):
                if not e:
                    continue
                term = np.full(I.shape[0], c * e)
                for j2, e2 in enumerate(l):
                    p = e2 - 1 if j2 == j else e2
                    if p:
                        term *= I[:, j2] ** p
                out[:, j] += term
        return out

    def hessian(self, I):
        """Hessian at points I (M x n) -> (M x n x n)."""
        I = np.atleast_2d(np.asarray(I, dtype=float))
        M = I.shape[0]
        out = np.zeros((M, self.n, self.n))
        for l, c in self.coeffs.items():
            for j in range(self.n):
                for k in range(j, self.n):
                    if j == k:
                        fac = l[j] * (l[j] - 1)
                    else:
                        fac = l[j] * l[k]
                    if not fac:
                        continue
                    term = np.full(M, c * fac)
                    for j2, e2 in enumerate(l):
                        p = e2 - (j2 == j) - (j2 == k)
                        if p:
                            term *= I[:, j2] ** p
                    out[:, j, k] += term
                    if j != k:
                        out[:, k, j] += term
        return out

    def compose_linear(self, R):
        """Substitute I -> R I (R an n x n real matrix)."""
        R = np.asarray(R, dtype=float)
        if R.shape != (self.n, self.n):
            raise ShapeError("matrix must be n x n")
        # expand each I_j^e as a power of the linear form sum_k R[j,k] I_k
        out = {}
        for l, c in self.coeffs.items():
            prod = {(0,) * self.n: float(c)}
            for j, e in enumerate(l):
                for _ in range(e):
                    nxt = {}
                    for key, v in prod.items():
                        for k in range(self.n):
                            if R[j, k] == 0.0:
                                continue
                            key2 = list(key)
                            key2[k] += 1
                            key2 = tuple(key2)
                            nxt[key2] = nxt.get(key2, 0.0) + v * R[j, k]
                    prod = nxt
            for key, v in prod.items():
                out[key] = out.get(key, 0.0) + v
        return ActionPolynomial(self.n, out)

    def to_graded(self):
        return GradedPolynomial.from_actions(self)

    def sorted_coeffs(self):
        return sorted(self.coeffs.items(), key=lambda kv: (sum(kv[0]), kv[0]))

    def to_text(self):
        """One monomial per line: ``l_1 ... l_n | value``, graded-lex sorted."""
        return "\n".join(
            "{} | {!r}".format(" ".join(map(str, l)), c)
            for l, c in self.sorted_coeffs()
        )

    @classmethod
    def from_text(cls, n, text):
        coeffs = {}
        for line in text.strip().splitlines():
            line = line.strip()
            if not line:
                continue
            l_part, c_part = (p.strip() for p in line.split("|"))
            l = tuple(int(v) for v in l_part.split())
            coeffs[l] = coeffs.get(l, 0.0) + float(c_part)
        return cls(n, coeffs)

    def __repr__(self):
        return f"ActionPolynomial(n={self.n}, terms={len(self.coeffs)})"


class Frequency:
    """Frequency vector omega in R^n (radians per unit time)."""

    __slots__ = ("omega",)

    def __init__(self, omega):
        omega = np.asarray(omega, dtype=float).copy()
        if omega.ndim != 1 or omega.size < 1:
            raise ShapeError("omega must be a nonempty vector")
        if not np.all(np.isfinite(omega)):
            raise DomainError("omega entries must be finite")
        omega.setflags(write=False)
        self.omega = omega

    @property
    def n(self):
        return self.omega.size

    def max_abs(self):
        return float(np.max(np.abs(self.omega)))

    def action_hamiltonian(self):
        """omega.I as a phase-space polynomial."""
        return GradedPolynomial.from_actions(ActionPolynomial.linear(self.omega))

    def __repr__(self):
        return f"Frequency({np.array2string(self.omega, separator=', ')})"


# -- module-level operations ---------------------------------------------------


def formal_actions(z):
    """Formal actions I_j = (x_j^2 + y_j^2)/2 of a phase point (x, y)."""
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or z.size % 2:
        raise ShapeError("phase point must have even length")
    n = z.size // 2
    return (z[:n] ** 2 + z[n:] ** 2) / 2.0


def _canonical_content(P):
    return tuple(
        (key, (float(complex(c).real), float(complex(c).imag)))
        for key, c in sorted(P.terms.items())
    )


def poisson_bracket(P, Q, max_degree=None):
    """Poisson bracket {P, Q} = sum_j (dP/dx_j dQ/dy_j - dP/dy_j dQ/dx_j).

    Computed in the complexified representation, where it reads
    i * sum_j (dP/dzeta_j dQ/dzetabar_j - dP/dzetabar_j dQ/dzeta_j).
    Antisymmetry holds exactly at the coefficient level: operands are
    ordered canonically and the sign applied afterwards, so {P, Q} and
    {Q, P} are built from identical floating-point products.
    """
    if P.n != Q.n:
        raise DimensionMismatchError("bracket operands must share n")
    if P is not Q:
        ca, cb = _canonical_content(P), _canonical_content(Q)
        if ca > cb:
            return -poisson_bracket(Q, P, max_degree=max_degree)
        if ca == cb:
            return GradedPolynomial.zero(P.n)
    else:
        return GradedPolynomial.zero(P.n)
    n = P.n
    out = {}
    p_items = [(a, b, c, sum(a) + sum(b)) for (a, b), c in P.terms.items()]
    q_items = [(a, b, c, sum(a) + sum(b)) for (a, b), c in Q.terms.items()]
    for a1, b1, c1, d1 in p_items:
        for a2, b2, c2, d2 in q_items:
            if max_degree is not None and d1 + d2 - 2 > max_degree:
                continue
            cc = c1 * c2
            for j in range(n):
                # dP/dzeta_j * dQ/dzetabar_j
                if a1[j] and b2[j]:
                    coeff = 1j * cc * (a1[j] * b2[j])
                    key = (
                        _dec_merge(a1, a2, j),
                        _dec_merge(b2, b1, j),
                    )
                    out[key] = out.get(key, 0) + coeff
                # - dP/dzetabar_j * dQ/dzeta_j
                if b1[j] and a2[j]:
                    coeff = -1j * cc * (b1[j] * a2[j])
                    key = (
                        _dec_merge(a2, a1, j),
                        _dec_merge(b1, b2, j),
                    )
                    out[key] = out.get(key, 0) + coeff
    return GradedPolynomial(n, out)


def _dec_merge(dec_t, other_t, j):
    """Componentwise sum of two exponent tuples with dec_t[j] reduced by 1."""
    return tuple(
        (u - 1 if i == j else u) + v for i, (u, v) in enumerate(zip(dec_t, other_t))
    )


def bombieri_norm(h_k, k):
    """Bombieri norm of a degree-k homogeneous action polynomial.

    sqrt( sum_{|l|=k} |p_l|^2 / C_k^l ) with C_k^l = k!/(l_1!...l_n!).
    """
    if not h_k.is_homogeneous(k):
        raise ShapeError(f"polynomial is not homogeneous of degree {k}")
    total = 0.0
    for l, c in h_k.coeffs.items():
        total += c * c / multinomial(k, l)
    return math.sqrt(total)


def sup_norm_bound(P, s):
    """Majorant upper bound for sup |P| over the complex ball of radius s.

    Sum of |coefficient| * s^degree over the real-monomial representation;
    exact for monomials, an upper bound in general.
    """
    if s <= 0:
        raise DomainError("radius must be positive")
    total = 0.0
    for (alpha, beta), c in P.to_real_terms().items():
        total += abs(c) * s ** (sum(alpha) + sum(beta))
    return total


class LinearSymplecticMap:
    """Real linear symplectic change of variables z = T z~."""

    __slots__ = ("matrix",)

    def __init__(self, matrix):
        self.matrix = np.asarray(matrix, dtype=float).copy()
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise ShapeError("matrix must be square")
        if self.matrix.shape[0] % 2:
            raise ShapeError("matrix must act on R^{2n}")
        self.matrix.setflags(write=False)

    @property
    def n(self):
        return self.matrix.shape[0] // 2

    def __call__(self, z):
        return self.matrix @ np.asarray(z, dtype=float)

    def symplectic_defect(self):
        """Max-norm of T^t J T - J."""
        J = standard_symplectic_matrix(self.n)
        return float(np.max(np.abs(self.matrix.T @ J @ self.matrix - J)))

    def apply(self, P, max_degree=None):
        """Pullback P o T as a GradedPolynomial."""
        if P.n != self.n:
            raise DimensionMismatchError("map and polynomial disagree on n")
        W = _complexification_matrix(self.n)
        Winv = _inverse_complexification_matrix(self.n)
        M = W @ self.matrix @ Winv
        return P.substitute_linear(M, max_degree=max_degree)

    def inverse(self):
        J = standard_symplectic_matrix(self.n)
        # symplectic inverse: T^{-1} = -J T^t J
        return LinearSymplecticMap(-J @ self.matrix.T @ J)


def standard_symplectic_matrix(n):
    J = np.zeros((2 * n, 2 * n))
    J[:n, n:] = np.eye(n)
    J[n:, :n] = -np.eye(n)
    return J


def _complexification_matrix(n):
    """W with zetafull = W z for z = (x, y)."""
    W = np.zeros((2 * n, 2 * n), dtype=complex)
    for j in range(n):
        W[j, j] = 1 / SQRT2
        W[j, n + j] = -1j / SQRT2
        W[n + j, j] = 1 / SQRT2
        W[n + j, n + j] = 1j / SQRT2
    return W


def _inverse_complexification_matrix(n):
    Winv = np.zeros((2 * n, 2 * n), dtype=complex)
    for j in range(n):
        Winv[j, j] = 1 / SQRT2
        Winv[j, n + j] = 1 / SQRT2
        Winv[n + j, j] = 1j / SQRT2
        Winv[n + j, n + j] = -1j / SQRT2
    return Winv


def diagonalize_quadratic(H2, tol=1e-10):
    """Symplectically diagonalize an elliptic quadratic Hamiltonian.

    Returns (Frequency, LinearSymplecticMap T) with H2 o T = omega.I.
    Raises NotEllipticError for spectra off the imaginary axis and
    DegenerateFrequencyError for repeated frequency magnitudes.
    """
    n = H2.n
    if H2.is_zero() or H2.max_degree() != 2 or H2.min_degree() != 2:
        raise ShapeError("H2 must be homogeneous of degree 2")
    # Hessian S with H2 = z^t S z / 2, from the real-monomial coefficients
    S = np.zeros((2 * n, 2 * n))
    for (alpha, beta), c in H2.to_real_terms().items():
        if abs(c.imag) > 1e-9 * (1 + abs(c)):
            raise ShapeError("H2 must be real-valued for real arguments")
        idx = [j for j, e in enumerate(alpha) for _ in range(e)]
        idx += [n + j for j, e in enumerate(beta) for _ in range(e)]
        i, j = idx
        if i == j:
            S[i, i] += 2 * c.real
        else:
            S[i, j] += c.real
            S[j, i] += c.real
    J = standard_symplectic_matrix(n)
    A = J @ S
    eigvals, eigvecs = np.linalg.eig(A)
    scale = max(np.max(np.abs(eigvals)), 1e-300)
    if np.max(np.abs(eigvals.real)) > tol * scale:
        raise NotEllipticError(
            f"eigenvalue with real part {np.max(np.abs(eigvals.real)):.3e}"
        )
    pos = [(lam.imag, eigvecs[:, i]) for i, lam in enumerate(eigvals) if lam.imag > 0]
    if len(pos) != n:
        raise NotEllipticError("could not pair the spectrum into +/- i nu")
    pos.sort(key=lambda p: p[0])
    nus = np.array([p[0] for p in pos])
    if n > 1 and np.min(np.diff(nus)) <= tol * scale:
        raise DegenerateFrequencyError(f"repeated frequency magnitudes {nus}")
    omega = np.zeros(n)
    cols_e = []
    cols_f = []
    for j, (nu, u) in enumerate(pos):
        a, b = u.real.copy(), u.imag.copy()
        sigma = a @ J @ b
        if abs(sigma) < 1e-12 * (np.linalg.norm(a) * np.linalg.norm(b) + 1e-300):
            raise DegenerateFrequencyError("defective eigenplane")
        if sigma > 0:
            e, f = a / math.sqrt(sigma), b / math.sqrt(sigma)
            omega[j] = nu
        else:
            e, f = a / math.sqrt(-sigma), -b / math.sqrt(-sigma)
            omega[j] = -nu
        # canonical phase: rotate the (e, f) frame inside its invariant plane
        # so the dominant x-coordinate lands on e (identity for diagonal input)
        i_star = int(np.argmax(e[:n] ** 2 + f[:n] ** 2))
        c, s = e[i_star], f[i_star]
        r = math.hypot(c, s)
        e, f = (c * e + s * f) / r, (-s * e + c * f) / r
        cols_e.append(e)
        cols_f.append(f)
    T = np.column_stack(cols_e + cols_f)
    tmap = LinearSymplecticMap(T)
    if tmap.symplectic_defect() > 1e-8:
        raise DegenerateFrequencyError(
            f"symplectic normalization failed, defect {tmap.symplectic_defect():.2e}"
        )
    return Frequency(omega), tmap
