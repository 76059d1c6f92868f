import numpy as np
import pytest

from birkhoff.arith import resonance_order
from birkhoff.polyalg import ActionPolynomial, GradedPolynomial


def make_omega(rng, n, nonresonant_through):
    """Draw omega with no resonance up to the given order (rejection sampled)."""
    for _ in range(200):
        w = rng.uniform(0.6, 1.7, size=n) + rng.uniform(0, 1, size=n) * np.sqrt(2) / 3
        if n > 1 and np.min(np.diff(np.sort(np.abs(w)))) < 0.05:
            continue
        if resonance_order(w, nonresonant_through) is None:
            return w
    raise RuntimeError("could not draw a non-resonant frequency")


def random_hamiltonian(rng, n, omega, n_terms=5, degrees=(3, 4), scale=0.2):
    """omega.I plus a few random real monomials of the given degrees."""
    H = GradedPolynomial.from_actions(ActionPolynomial.linear(omega))
    terms = {}
    for _ in range(n_terms):
        d = int(rng.choice(degrees))
        alpha = np.zeros(n, dtype=int)
        beta = np.zeros(n, dtype=int)
        for _ in range(d):
            slot = rng.integers(0, 2 * n)
            if slot < n:
                alpha[slot] += 1
            else:
                beta[slot - n] += 1
        key = (tuple(alpha), tuple(beta))
        terms[key] = terms.get(key, 0.0) + scale * rng.standard_normal()
    return H + GradedPolynomial.from_real_terms(n, terms)


def random_action_polynomial(rng, n, k, scale=1.0):
    """Random homogeneous degree-k action polynomial."""
    from birkhoff.brick import degree_exponents

    coeffs = {l: scale * rng.standard_normal() for l in degree_exponents(n, k)}
    return ActionPolynomial(n, coeffs)


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL line per acceptance criterion, visible in every run."""
    import re

    lines = []
    for status, key in (("PASS", "passed"), ("FAIL", "failed")):
        for rep in terminalreporter.stats.get(key, []):
            m = re.search(r"test_criterion_(\d+)", getattr(rep, "nodeid", ""))
            if not m:
                continue
            num = int(m.group(1))
            try:
                import test_acceptance

                label = test_acceptance.CRITERIA.get(num, "")
            except ImportError:
                label = ""
            lines.append((num, f"{status}  criterion {num}: {label}"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
