"""Symplectic integration and empirical stability measurement.

Implicit midpoint (second order, symplectic, works for the non-separable
polynomial Hamiltonians produced by normalization) with the vector field
evaluated by exact polynomial differentiation. The inner loop is jitted;
one trajectory is sequential, sweeps parallelize trivially at the caller.
"""

import math

import numpy as np
from numba import njit

from .errors import DomainError, ShapeError, StepFailureError
from .polyalg import formal_actions

FP_TOL = 1e-13
MAX_FP_ITER = 100
SCHEME_ID = "implicit-midpoint"


# -- polynomial compilation ------------------------------------------------


def _real_coefficients(H):
    terms = H.to_real_terms()
    if terms:
        scale = max(abs(c) for c in terms.values())
        worst = max(abs(c.imag) for c in terms.values())
        if worst > 1e-9 * max(scale, 1.0):
            raise ShapeError("Hamiltonian must be real-valued for real arguments")
    return {key: c.real for key, c in terms.items()}


def _compile_energy(real_terms, n):
    T = len(real_terms)
    exps = np.zeros((max(T, 1), 2 * n), dtype=np.int64)
    coefs = np.zeros(max(T, 1))
    for t, ((alpha, beta), c) in enumerate(real_terms.items()):
        exps[t, :n] = alpha
        exps[t, n:] = beta
        coefs[t] = c
    if T == 0:
        coefs = coefs[:0]
        exps = exps[:0]
    return exps, coefs


def _compile_field(real_terms, n):
    """Arrays for X = (dH/dy, -dH/dx), one row per monomial per component."""
    rows = []
    for (alpha, beta), c in real_terms.items():
        for j in range(n):
            if beta[j]:
                e = list(alpha) + list(beta)
                e[n + j] -= 1
                rows.append((j, c * beta[j], e))
            if alpha[j]:
                e = list(alpha) + list(beta)
                e[j] -= 1
                rows.append((n + j, -c * alpha[j], e))
    T = len(rows)
    exps = np.zeros((max(T, 1), 2 * n), dtype=np.int64)
    coefs = np.zeros(max(T, 1))
    comp = np.zeros(max(T, 1), dtype=np.int64)
    for t, (i, c, e) in enumerate(rows):
        comp[t] = i
        coefs[t] = c
        exps[t] = e
    if T == 0:
        exps, coefs, comp = exps[:0], coefs[:0], comp[:0]
    return exps, coefs, comp


class CompiledHamiltonian:
    """Jittable arrays for one Hamiltonian: energy terms and vector field."""

    def __init__(self, H):
        self.n = H.n
        real_terms = _real_coefficients(H)
        self.h_exps, self.h_coefs = _compile_energy(real_terms, H.n)
        self.f_exps, self.f_coefs, self.f_comp = _compile_field(real_terms, H.n)

    def energy(self, z):
        return float(_eval_terms(np.asarray(z, dtype=float), self.h_exps, self.h_coefs))

    def field(self, z):
        out = np.empty(2 * self.n)
        _eval_field(np.asarray(z, dtype=float), self.f_exps, self.f_coefs, self.f_comp, out)
        return out

    def step(self, z, dt, fp_tol=FP_TOL, max_iter=MAX_FP_ITER):
        znew, ok = _step_kernel(
            np.asarray(z, dtype=float),
            dt,
            self.f_exps,
            self.f_coefs,
            self.f_comp,
            fp_tol,
            max_iter,
        )
        if not ok:
            raise StepFailureError(0.0)
        return znew


@njit(cache=True)
def _eval_terms(z, exps, coefs):
    total = 0.0
    for t in range(coefs.size):
        v = coefs[t]
        for i in range(z.size):
            e = exps[t, i]
            if e == 1:
                v *= z[i]
            elif e > 1:
                v *= z[i] ** e
        total += v
    return total


@njit(cache=True)
def _eval_field(z, exps, coefs, comp, out):
    for i in range(out.size):
        out[i] = 0.0
    for t in range(coefs.size):
        v = coefs[t]
        for i in range(z.size):
            e = exps[t, i]
            if e == 1:
                v *= z[i]
            elif e > 1:
                v *= z[i] ** e
        out[comp[t]] += v


@njit(cache=True)
def _step_kernel(z, dt, fexps, fcoefs, fcomp, fp_tol, max_iter):
    d = z.size
    u = np.empty(d)
    xu = np.empty(d)
    _eval_field(z, fexps, fcoefs, fcomp, xu)
    for i in range(d):
        u[i] = z[i] + 0.5 * dt * xu[i]
    ok = False
    for _ in range(max_iter):
        _eval_field(u, fexps, fcoefs, fcomp, xu)
        delta = 0.0
        for i in range(d):
            nv = z[i] + 0.5 * dt * xu[i]
            dv = abs(nv - u[i])
            if dv > delta:
                delta = dv
            u[i] = nv
        if delta <= fp_tol:
            ok = True
            break
    znew = np.empty(d)
    for i in range(d):
        znew[i] = 2.0 * u[i] - z[i]
    return znew, ok


@njit(cache=True)
def _integrate_kernel(
    z0,
    dt,
    nsteps,
    record_every,
    hexps,
    hcoefs,
    fexps,
    fcoefs,
    fcomp,
    n,
    fp_tol,
    max_iter,
    escape_sq,
    drift_thresh,
    rec_steps,
    rec_states,
    rec_actions,
    rec_energy,
):
    d = 2 * n
    z = z0.copy()
    I0 = np.empty(n)
    for j in range(n):
        I0[j] = 0.5 * (z[j] ** 2 + z[n + j] ** 2)
    E0 = _eval_terms(z, hexps, hcoefs)

    rec_steps[0] = 0
    for i in range(d):
        rec_states[0, i] = z[i]
    for j in range(n):
        rec_actions[0, j] = I0[j]
    rec_energy[0] = E0
    nrec = 1

    max_drift = 0.0
    argmax_step = 0
    max_eerr = 0.0
    status = 0
    stop_step = nsteps
    u = np.empty(d)
    xu = np.empty(d)

    for k in range(1, nsteps + 1):
        # implicit midpoint with fixed-point iteration
        _eval_field(z, fexps, fcoefs, fcomp, xu)
        for i in range(d):
            u[i] = z[i] + 0.5 * dt * xu[i]
        ok = False
        for _ in range(max_iter):
            _eval_field(u, fexps, fcoefs, fcomp, xu)
            delta = 0.0
            for i in range(d):
                nv = z[i] + 0.5 * dt * xu[i]
                dv = abs(nv - u[i])
                if dv > delta:
                    delta = dv
                u[i] = nv
            if delta <= fp_tol:
                ok = True
                break
        if not ok:
            status = 3
            stop_step = k
            break
        for i in range(d):
            z[i] = 2.0 * u[i] - z[i]

        drift2 = 0.0
        for j in range(n):
            Ij = 0.5 * (z[j] ** 2 + z[n + j] ** 2)
            diff = Ij - I0[j]
            drift2 += diff * diff
        drift = math.sqrt(drift2)
        if drift > max_drift:
            max_drift = drift
            argmax_step = k
        eerr = abs(_eval_terms(z, hexps, hcoefs) - E0)
        if eerr > max_eerr:
            max_eerr = eerr

        recorded = False
        if k % record_every == 0:
            rec_steps[nrec] = k
            for i in range(d):
                rec_states[nrec, i] = z[i]
            for j in range(n):
                rec_actions[nrec, j] = 0.5 * (z[j] ** 2 + z[n + j] ** 2)
            rec_energy[nrec] = _eval_terms(z, hexps, hcoefs)
            nrec += 1
            recorded = True

        if drift_thresh > 0.0 and drift > drift_thresh:
            status = 1
            stop_step = k
            if not recorded:
                rec_steps[nrec] = k
                for i in range(d):
                    rec_states[nrec, i] = z[i]
                for j in range(n):
                    rec_actions[nrec, j] = 0.5 * (z[j] ** 2 + z[n + j] ** 2)
                rec_energy[nrec] = _eval_terms(z, hexps, hcoefs)
                nrec += 1
            break
        if escape_sq > 0.0:
            z2 = 0.0
            for i in range(d):
                z2 += z[i] * z[i]
            if z2 > escape_sq:
                status = 2
                stop_step = k
                if not recorded:
                    rec_steps[nrec] = k
                    for i in range(d):
                        rec_states[nrec, i] = z[i]
                    for j in range(n):
                        rec_actions[nrec, j] = 0.5 * (z[j] ** 2 + z[n + j] ** 2)
                    rec_energy[nrec] = _eval_terms(z, hexps, hcoefs)
                    nrec += 1
                break

    return status, stop_step, nrec, max_drift, argmax_step, max_eerr


class TrajectoryRecord:
    """Time series of a symplectic integration.

    times are uniformly spaced by dt * record_every; actions row j equals
    formal_actions(states row j). Drift statistics cover every computed
    step, recorded or not.
    """

    def __init__(self, times, states, actions, energy, dt, scheme_id,
                 record_every, escaped, max_drift, max_drift_time,
                 max_energy_error):
        self.times = times
        self.states = states
        self.actions = actions
        self.energy = energy
        self.dt = dt
        self.scheme_id = scheme_id
        self.record_every = record_every
        self.escaped = escaped
        self.max_drift = max_drift
        self.max_drift_time = max_drift_time
        self.max_energy_error = max_energy_error

    def __len__(self):
        return len(self.times)

    def __repr__(self):
        return (
            f"TrajectoryRecord(rows={len(self.times)}, dt={self.dt}, "
            f"T={self.times[-1] if len(self.times) else 0.0:.6g}, "
            f"escaped={self.escaped})"
        )


def integrate(
    H,
    z0,
    dt,
    t_max,
    record_every=1,
    escape_radius=None,
    fp_tol=FP_TOL,
    max_iter=MAX_FP_ITER,
    compiled=None,
    drift_threshold=None,
):
    """Fixed-step implicit-midpoint integration of the flow of H.

    The one-step map preserves the symplectic form exactly in exact
    arithmetic; the implicit equation is solved by fixed-point iteration to
    ``fp_tol``. Stops early (flagged, not an error) when ||z|| exceeds
    ``escape_radius``; a non-convergent step raises StepFailureError with
    its time stamp.
    """
    if dt == 0:
        raise DomainError("dt must be nonzero")
    if t_max / dt < 1:
        raise DomainError("t_max must cover at least one step of sign dt")
    ch = compiled if compiled is not None else CompiledHamiltonian(H)
    z0 = np.asarray(z0, dtype=float)
    if z0.shape != (2 * ch.n,):
        raise ShapeError(f"z0 must have length {2 * ch.n}")
    nsteps = int(round(t_max / dt))
    nrec_cap = nsteps // record_every + 3
    rec_steps = np.zeros(nrec_cap, dtype=np.int64)
    rec_states = np.zeros((nrec_cap, 2 * ch.n))
    rec_actions = np.zeros((nrec_cap, ch.n))
    rec_energy = np.zeros(nrec_cap)
    escape_sq = float(escape_radius) ** 2 if escape_radius is not None else -1.0
    thresh = float(drift_threshold) if drift_threshold is not None else -1.0
    status, stop_step, nrec, max_drift, argmax_step, max_eerr = _integrate_kernel(
        z0,
        float(dt),
        nsteps,
        int(record_every),
        ch.h_exps,
        ch.h_coefs,
        ch.f_exps,
        ch.f_coefs,
        ch.f_comp,
        ch.n,
        float(fp_tol),
        int(max_iter),
        escape_sq,
        thresh,
        rec_steps,
        rec_states,
        rec_actions,
        rec_energy,
    )
    if status == 3:
        raise StepFailureError(stop_step * dt)
    return TrajectoryRecord(
        times=rec_steps[:nrec] * dt,
        states=rec_states[:nrec].copy(),
        actions=rec_actions[:nrec].copy(),
        energy=rec_energy[:nrec].copy(),
        dt=dt,
        scheme_id=SCHEME_ID,
        record_every=record_every,
        escaped=(status == 2),
        max_drift=max_drift,
        max_drift_time=argmax_step * dt,
        max_energy_error=max_eerr,
    )


def action_drift(rec):
    """Max over recorded times of ||I(t) - I(0)|| and the time achieving it."""
    if len(rec.times) == 0:
        raise DomainError("empty trajectory record")
    diffs = np.linalg.norm(rec.actions - rec.actions[0], axis=1)
    idx = int(np.argmax(diffs))
    return float(diffs[idx]), float(rec.times[idx])


class StabilityHit:
    """First-passage result: exit time, or censored at t_max."""

    def __init__(self, time, censored, t_max):
        self.time = time
        self.censored = censored
        self.t_max = t_max

    def effective_time(self):
        """Exit time, with censored runs counted at the horizon (lower bound)."""
        return self.t_max if self.censored else self.time

    def __repr__(self):
        return (
            f"StabilityHit(censored at {self.t_max:g})"
            if self.censored
            else f"StabilityHit({self.time:g})"
        )


def stability_time(H, z0, C, t_max, dt, escape_radius=None, compiled=None):
    """First recorded time with ||I(t) - I(0)|| > C * rho, rho = ||I(z0)||."""
    if C <= 1:
        raise DomainError("drift multiple C must exceed 1")
    rho = float(np.linalg.norm(formal_actions(z0)))
    if rho <= 0:
        raise DomainError("initial point must have positive action radius")
    ch = compiled if compiled is not None else CompiledHamiltonian(H)
    nsteps = int(round(t_max / dt))
    rec = integrate(
        H,
        z0,
        dt,
        t_max,
        record_every=max(nsteps, 1),
        escape_radius=escape_radius,
        compiled=ch,
        drift_threshold=C * rho,
    )
    # drift statistics cover every step; the stop row carries the exit
    if rec.max_drift > C * rho:
        return StabilityHit(rec.max_drift_time, False, t_max)
    return StabilityHit(None, True, t_max)


def direction_set(n, n_random=8, seed=0):
    """Deterministic + seeded initial-condition directions.

    Fixed part: equal action split at uniform phase angles {0, pi/4, pi/2},
    plus one skewed 85/15 split per axis at staggered phases. Random part:
    seeded (split, phase) pairs.
    """
    out = []
    u_eq = np.ones(n) / math.sqrt(n)
    for label, theta in (("eq-0", 0.0), ("eq-pi4", math.pi / 4), ("eq-pi2", math.pi / 2)):
        out.append((label, u_eq, np.full(n, theta)))
    for j in range(n):
        w = np.full(n, 0.15)
        w[j] = 0.85
        u = w / np.linalg.norm(w)
        theta = np.zeros(n)
        theta[j] = math.pi / 4
        out.append((f"skew{j}-pi4", u, theta))
    key = np.random.SeedSequence((int(seed), 0xD12EC7)).generate_state(
        2, dtype=np.uint64
    )
    rng = np.random.Generator(np.random.Philox(key=key))
    for i in range(n_random):
        w = np.abs(rng.standard_normal(n)) + 1e-9
        u = w / np.linalg.norm(w)
        theta = rng.uniform(0.0, 2 * math.pi, size=n)
        out.append((f"rand{i}", u, theta))
    return out


def phase_point(rho, split, phases):
    """Phase point with action vector rho * split and given phase angles."""
    split = np.asarray(split, dtype=float)
    phases = np.asarray(phases, dtype=float)
    I = rho * split
    x = np.sqrt(2 * I) * np.cos(phases)
    y = -np.sqrt(2 * I) * np.sin(phases)
    return np.concatenate([x, y])


def _fit_poly_law(rho, T):
    """log T = p log(1/rho) + c."""
    X = np.log(1.0 / rho)
    Y = np.log(T)
    p, c = np.polyfit(X, Y, 1)
    resid = Y - (p * X + c)
    return {"p": float(p), "c": float(c), "sse": float(np.sum(resid**2))}


def _fit_exp_law(rho, T):
    """log T = c * rho^{-a} + b over a grid of exponents a."""
    Y = np.log(T)
    best = None
    for a in np.linspace(0.2, 3.0, 29):
        X = rho ** (-a)
        A = np.column_stack([X, np.ones_like(X)])
        coef, *_ = np.linalg.lstsq(A, Y, rcond=None)
        resid = Y - A @ coef
        sse = float(np.sum(resid**2))
        if best is None or sse < best["sse"]:
            best = {"a": float(a), "c": float(coef[0]), "b": float(coef[1]), "sse": sse}
    return best


class StabilityCurve:
    """Per-rho worst-case exit times with model fits.

    rows: list of (rho, direction_id, exit_time_or_None, censored).
    exit_times: per-rho minimum of effective times (censored rows are
    horizon lower bounds and are flagged).
    """

    def __init__(self, rhos, exit_times, censored, C, fit, rows, t_max):
        self.rhos = rhos
        self.exit_times = exit_times
        self.censored = censored
        self.C = C
        self.fit = fit
        self.rows = rows
        self.t_max = t_max

    def __repr__(self):
        return f"StabilityCurve(rhos={list(self.rhos)}, fit={self.fit.get('better')})"


def _stability_task(args):
    """Worker for scaling sweeps; top-level so process pools can pickle it."""
    H, z0, C, t_max, dt, escape_radius = args
    hit = stability_time(H, z0, C, t_max, dt, escape_radius=escape_radius)
    return hit.time, hit.censored


def scaling_experiment(H, rhos, C, t_max, dt, n_random=8, seed=0,
                       escape_radius=None, mapper=None):
    """Worst-case-over-directions exit times on a rho grid, with fits.

    Fits both log T = p log(1/rho) + c and log T = c rho^{-a} + b on the
    uncensored rows and reports the better model by residual; all-censored
    grids yield a lower-bound-only curve (not an error). ``mapper`` lets a
    caller fan the independent (rho, direction) runs out to a pool; results
    are consumed in task order either way.
    """
    rhos = np.asarray(sorted(rhos, reverse=True), dtype=float)
    dirs = direction_set(H.n, n_random=n_random, seed=seed)
    tasks = []
    labels = []
    for rho in rhos:
        for label, split, phases in dirs:
            z0 = phase_point(rho, split, phases)
            tasks.append((H, z0, C, t_max, dt, escape_radius))
            labels.append((float(rho), label))
    if mapper is None:
        ch = CompiledHamiltonian(H)
        results = []
        for task in tasks:
            hit = stability_time(
                H, task[1], C, t_max, dt, escape_radius=escape_radius, compiled=ch
            )
            results.append((hit.time, hit.censored))
    else:
        results = list(mapper(_stability_task, tasks))
    rows = []
    exit_times = []
    censored_flags = []
    idx = 0
    for rho in rhos:
        best = None
        best_censored = True
        for _ in dirs:
            (rho_l, label) = labels[idx]
            time_val, was_censored = results[idx]
            idx += 1
            rows.append((rho_l, label, time_val, was_censored))
            eff = t_max if was_censored else time_val
            if best is None or eff < best:
                best = eff
                best_censored = was_censored
        exit_times.append(best)
        censored_flags.append(best_censored)
    exit_times = np.array(exit_times)
    censored_flags = np.array(censored_flags)
    fit = {"n_uncensored": int(np.sum(~censored_flags))}
    mask = ~censored_flags
    if np.sum(mask) >= 2:
        fit["poly"] = _fit_poly_law(rhos[mask], exit_times[mask])
        if np.sum(mask) >= 3:
            fit["exp"] = _fit_exp_law(rhos[mask], exit_times[mask])
            fit["better"] = (
                "poly" if fit["poly"]["sse"] <= fit["exp"]["sse"] else "exp"
            )
        else:
            fit["better"] = "poly"
    else:
        fit["better"] = "censored"
    return StabilityCurve(
        rhos, exit_times, censored_flags, C, fit, rows, t_max
    )


def flow_time_one(H, points, dt=0.01, fp_tol=1e-14):
    """Time-1 Hamiltonian flow of H applied to each row of ``points``."""
    ch = CompiledHamiltonian(H)
    nsteps = max(1, int(round(1.0 / dt)))
    h = 1.0 / nsteps
    pts = np.atleast_2d(np.asarray(points, dtype=float)).copy()
    for r in range(pts.shape[0]):
        z = pts[r]
        for _ in range(nsteps):
            z, ok = _step_kernel(
                z, h, ch.f_exps, ch.f_coefs, ch.f_comp, fp_tol, MAX_FP_ITER
            )
            if not ok:
                raise StepFailureError(0.0)
        pts[r] = z
    return pts
