"""Resonance and Diophantine diagnostics for frequency vectors.

Brute-force scans over integer vectors k with |k.omega| compared against
gamma / ||k||_inf^tau. Correctness over speed: boxes up to K ~ 100 at
n <= 4 are enumerated exhaustively with a sign symmetry reduction.
"""

import numpy as np

from .errors import DomainError
from .polyalg import Frequency

# |k.omega| below RESONANCE_GUARD_REL * ||k||_1 * max|omega_j| counts as k.omega = 0.
RESONANCE_GUARD_REL = 1e-12


class DiophantineReport:
    """Result of a Diophantine scan.

    Attributes
    ----------
    omega : Frequency
    tau : float
    K : int
        Cutoff: all k with 0 < ||k||_inf <= K were scanned.
    gamma_K : float
        min |k.omega| * ||k||_inf^tau over the scanned box.
    worst_k : tuple of int
        Arg-min of the scan.
    resonance_order : int or None
        Smallest ||k||_1 with |k.omega| below the resonance guard,
        None if no scanned k is resonant.
    """

    SCHEMA_VERSION = 1

    def __init__(self, omega, tau, K, gamma_K, worst_k, resonance_order):
        self.omega = omega
        self.tau = tau
        self.K = K
        self.gamma_K = gamma_K
        self.worst_k = worst_k
        self.resonance_order = resonance_order

    def to_json_dict(self):
        return {
            "schema_version": self.SCHEMA_VERSION,
            "omega": [float(v) for v in self.omega.omega],
            "tau": self.tau,
            "K": self.K,
            "gamma_K": self.gamma_K,
            "worst_k": list(self.worst_k),
            "resonance_order": self.resonance_order,
        }

    def __repr__(self):
        return (
            f"DiophantineReport(gamma_K={self.gamma_K:.6g}, worst_k={self.worst_k}, "
            f"resonance_order={self.resonance_order})"
        )


def _as_omega(omega):
    if isinstance(omega, Frequency):
        return omega
    return Frequency(omega)


def _scan_box(n, K):
    """All k with 0 < ||k||_inf <= K, first nonzero entry positive."""
    grids = np.meshgrid(*([np.arange(-K, K + 1)] * n), indexing="ij")
    ks = np.stack([g.ravel() for g in grids], axis=1)
    nonzero = np.any(ks != 0, axis=1)
    ks = ks[nonzero]
    # symmetry: keep the representative with positive first nonzero entry
    first = ks[np.arange(len(ks)), np.argmax(ks != 0, axis=1)]
    return ks[first > 0]


def resonance_guard(omega, k_norm1):
    return RESONANCE_GUARD_REL * k_norm1 * max(omega.max_abs(), 1e-300)


def resonance_order(omega, K):
    """Smallest ||k||_1 <= K with k.omega ~ 0; None if absent.

    Exhaustive over 0 < ||k||_1 <= K.
    """
    if K < 1:
        raise DomainError("K must be >= 1")
    omega = _as_omega(omega)
    ks = _scan_box(omega.n, K)
    norm1 = np.sum(np.abs(ks), axis=1)
    ks = ks[norm1 <= K]
    norm1 = norm1[norm1 <= K]
    kw = np.abs(ks @ omega.omega)
    guard = RESONANCE_GUARD_REL * norm1 * max(omega.max_abs(), 1e-300)
    resonant = kw <= guard
    if not np.any(resonant):
        return None
    return int(norm1[resonant].min())


def diophantine_gamma(omega, tau, K):
    """Scan gamma_K = min |k.omega| * ||k||_inf^tau over 0 < ||k||_inf <= K."""
    if tau <= 0:
        raise DomainError("tau must be positive")
    if K < 1:
        raise DomainError("K must be >= 1")
    omega = _as_omega(omega)
    ks = _scan_box(omega.n, K)
    kw = np.abs(ks @ omega.omega)
    kinf = np.max(np.abs(ks), axis=1)
    norm1 = np.sum(np.abs(ks), axis=1)
    guard = RESONANCE_GUARD_REL * norm1 * max(omega.max_abs(), 1e-300)
    resonant = kw <= guard
    quality = np.where(resonant, 0.0, kw) * kinf.astype(float) ** tau
    idx = int(np.argmin(quality))
    res_order = None
    if np.any(resonant):
        res_order = int(norm1[resonant].min())
        # report the resonance itself as the worst vector
        res_idx = np.flatnonzero(resonant)
        idx = int(res_idx[np.argmin(norm1[res_idx])])
    return DiophantineReport(
        omega=omega,
        tau=float(tau),
        K=int(K),
        gamma_K=float(quality[idx]),
        worst_k=tuple(int(v) for v in ks[idx]),
        resonance_order=res_order,
    )
