"""Sampling the Hilbert brick of action polynomials.

A brick sample is a tuple (h_1..h_m) with h_k homogeneous of degree k in the
actions and Bombieri norm at most 1. Each h_k is drawn uniformly (with
respect to the volume of the Bombieri inner product) from the unit ball:
a standard Gaussian in the Bombieri-orthonormal basis, normalized to the
sphere, radius U^{1/dim}.

Substreams: the degree-k part of a draw is generated by a Philox
counter-based generator keyed on (seed, k), so extending a sample to higher
degrees with the same seed reproduces the lower degrees bit for bit.
"""

import itertools
import math

import numpy as np

from .errors import DimensionMismatchError, DomainError
from .polyalg import ActionPolynomial, GradedPolynomial, multinomial


def degree_exponents(n, k):
    """Exponent tuples l in N^n with |l| = k, graded-lex order."""
    out = []
    for combo in itertools.combinations_with_replacement(range(n), k):
        l = [0] * n
        for j in combo:
            l[j] += 1
        out.append(tuple(l))
    return sorted(out)


def degree_dimension(n, k):
    """dim of the space of degree-k homogeneous polynomials in n variables."""
    return math.comb(k + n - 1, n - 1)


def _degree_rng(seed, k):
    key = np.random.SeedSequence((int(seed), int(k))).generate_state(2, dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


class BrickSample:
    """Truncated Hilbert-brick draw.

    Attributes
    ----------
    m : int
        Truncation degree.
    parts : list of ActionPolynomial
        (h_1..h_m), h_k homogeneous of degree k with Bombieri norm <= 1.
    seed : int
        RNG seed that produced the sample.
    """

    SCHEMA_VERSION = 1

    def __init__(self, m, parts, seed):
        self.m = int(m)
        self.parts = list(parts)
        self.seed = int(seed)
        if len(self.parts) != self.m:
            raise DomainError("need exactly m parts")

    @property
    def n(self):
        return self.parts[0].n

    def as_action_polynomial(self):
        out = ActionPolynomial.zero(self.n)
        for p in self.parts:
            out = out + p
        return out

    def to_json_dict(self):
        return {
            "schema_version": self.SCHEMA_VERSION,
            "n": self.n,
            "m": self.m,
            "seed": self.seed,
            "parts": [
                {
                    "degree": k + 1,
                    "coeffs": {
                        " ".join(map(str, l)): c for l, c in p.sorted_coeffs()
                    },
                }
                for k, p in enumerate(self.parts)
            ],
        }

    @classmethod
    def from_json_dict(cls, doc):
        n = int(doc["n"])
        parts = []
        for entry in doc["parts"]:
            coeffs = {
                tuple(int(v) for v in key.split()): float(c)
                for key, c in entry["coeffs"].items()
            }
            parts.append(ActionPolynomial(n, coeffs))
        return cls(doc["m"], parts, doc["seed"])

    def __repr__(self):
        return f"BrickSample(n={self.n}, m={self.m}, seed={self.seed})"


def _sample_degree(n, k, seed):
    exps = degree_exponents(n, k)
    dim = len(exps)
    rng = _degree_rng(seed, k)
    g = rng.standard_normal(dim)
    radius = rng.random() ** (1.0 / dim)
    g *= radius / np.linalg.norm(g)
    # orthonormal basis vector for I^l is sqrt(C_k^l) * I^l
    coeffs = {
        l: g[i] * math.sqrt(multinomial(k, l)) for i, l in enumerate(exps)
    }
    return ActionPolynomial(n, coeffs)


def sample_brick(n, m, seed):
    """Draw (h_1..h_m) independently, uniform on each Bombieri unit ball.

    Deterministic given the seed; degree-k parts come from independent
    substreams keyed on (seed, k).
    """
    if n < 1 or m < 1:
        raise DomainError("need n >= 1 and m >= 1")
    return BrickSample(m, [_sample_degree(n, k, seed) for k in range(1, m + 1)], seed)


def extend_brick(sample, m_new, seed):
    """Extend a sample with fresh degrees m+1..m_new drawn from ``seed``."""
    if m_new < sample.m:
        raise DomainError("m_new must be >= the sample's m")
    tail = [_sample_degree(sample.n, k, seed) for k in range(sample.m + 1, m_new + 1)]
    return BrickSample(m_new, sample.parts + tail, sample.seed)


def brick_to_hamiltonian(sample):
    """Expand sum_k h_k(I(x, y)) into phase-space variables."""
    return GradedPolynomial.from_actions(sample.as_action_polynomial())


def perturb(H, sample):
    """Coefficient-wise sum H + h(I); returns (perturbed, new frequency).

    The degree-1 brick part is linear in I, so it shifts the frequency;
    the shifted omega is reported alongside the summed Hamiltonian.
    """
    h = brick_to_hamiltonian(sample)
    if H.n != h.n:
        raise DimensionMismatchError("Hamiltonian and sample disagree on n")
    from .bnf import extract_diagonal_frequency
    from .polyalg import Frequency

    base = extract_diagonal_frequency(H)
    shift = np.zeros(H.n)
    for l, c in sample.parts[0].coeffs.items():
        shift[l.index(1)] = c
    return H + h, Frequency(base.omega + shift)
