"""Named Hamiltonian families for reproducible experiments.

All families return a GradedPolynomial with a diagonal quadratic part:

- harmonic: omega.I (free oscillators).
- quartic-1dof: I + c x^4, the basic one-degree normal-form benchmark.
- resonant-coupled: omega = (1, 1) with the quadratic coupling eps * x1 y2;
  actions exchange through the 1:1 resonance on a timescale ~ 1/eps.
- convex-benchmark: Diophantine omega = (1, golden ratio) with definite
  torsion (I1^2 + I1 I2 + I2^2)/2 and a cubic coupling eps * x1^2 x2.
- resonant-drive: omega = (1, 1) driven by 2 eps Re(zeta1^{m+1} zetabar2^{m+1}),
  a resonant term of phase-space degree 2m + 2. The integrable part is its
  own normal form through order m and the drive sits at the remainder order,
  producing secular transfer with first-passage times ~ rho^{-m}.
"""

import math

from .errors import ConfigError
from .polyalg import ActionPolynomial, GradedPolynomial

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


def harmonic(omega=(1.0, GOLDEN)):
    return GradedPolynomial.from_actions(ActionPolynomial.linear(list(omega)))


def quartic_1dof(c=0.25):
    return GradedPolynomial.from_actions(
        ActionPolynomial(1, {(1,): 1.0})
    ) + GradedPolynomial.from_real_terms(1, {((4,), (0,)): float(c)})


def resonant_coupled(eps=0.05):
    base = GradedPolynomial.from_actions(ActionPolynomial.linear([1.0, 1.0]))
    coupling = GradedPolynomial.from_real_terms(2, {((1, 0), (0, 1)): float(eps)})
    return base + coupling


def convex_benchmark(eps=0.05):
    base = GradedPolynomial.from_actions(
        ActionPolynomial.linear([1.0, GOLDEN])
        + ActionPolynomial(2, {(2, 0): 0.5, (1, 1): 0.5, (0, 2): 0.5})
    )
    coupling = GradedPolynomial.from_real_terms(2, {((2, 1), (0, 0)): float(eps)})
    return base + coupling


def resonant_drive(m=2, eps=0.3):
    m = int(m)
    if m < 1:
        raise ConfigError("resonant-drive needs m >= 1")
    base = GradedPolynomial.from_actions(ActionPolynomial.linear([1.0, 1.0]))
    p = m + 1
    drive = GradedPolynomial(
        2, {((p, 0), (0, p)): float(eps), ((0, p), (p, 0)): float(eps)}
    )
    return base + drive


FAMILIES = {
    "harmonic": harmonic,
    "quartic-1dof": quartic_1dof,
    "resonant-coupled": resonant_coupled,
    "convex-benchmark": convex_benchmark,
    "resonant-drive": resonant_drive,
}


def build(name, params=None):
    """Instantiate a named family with keyword parameters."""
    if name not in FAMILIES:
        raise ConfigError(
            f"unknown family {name!r}; known: {', '.join(sorted(FAMILIES))}"
        )
    try:
        return FAMILIES[name](**(params or {}))
    except TypeError as exc:
        raise ConfigError(f"bad parameters for family {name!r}: {exc}") from None
