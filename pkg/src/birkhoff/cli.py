"""Batch front-end: TOML configs in, JSON/CSV artifacts out.

    birkhoff <command> --config <path> [--seed N] [--out DIR] [--jobs N]

Commands: bnf, dioph, sample, bnfmap, rescale, badvol, drift, scaling.
Every output embeds (JSON) or sidecars (CSV) the resolved configuration and
the tool version; reruns with the same config are byte-identical.
Exit codes: 0 success, 2 config error, 3 numerical failure.
"""

import argparse
import concurrent.futures
import json
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

import numpy as np

from . import __version__
from .errors import BirkhoffError, ConfigError
from .polyalg import ActionPolynomial, GradedPolynomial
from . import arith, bnf, brick, dynamics, families, genericity

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

# command -> section -> allowed keys
_HAM_KEYS = {"family", "params", "n", "terms", "sample_file", "perturb_seed",
             "perturb_m"}

_SCHEMAS = {
    "bnf": {
        "hamiltonian": _HAM_KEYS,
        "bnf": {"m", "trunc", "output"},
    },
    "dioph": {"dioph": {"omega", "tau", "K", "output"}},
    "sample": {"sample": {"n", "m", "seed", "output"}},
    "bnfmap": {
        "hamiltonian": _HAM_KEYS,
        "bnfmap": {"m", "cases", "fd_step", "seed", "trunc", "output"},
    },
    "rescale": {
        "hamiltonian": _HAM_KEYS,
        "rescale": {"m", "s_m", "r_m", "trunc", "output"},
    },
    "badvol": {
        "badvol": {
            "action",
            "n",
            "coeffs",
            "rho",
            "eps",
            "samples",
            "grid",
            "seed",
            "output",
        }
    },
    "drift": {
        "hamiltonian": _HAM_KEYS,
        "drift": {
            "z0",
            "rho",
            "split",
            "phases",
            "dt",
            "t_max",
            "record_every",
            "escape_radius",
            "output",
        },
    },
    "scaling": {
        "hamiltonian": _HAM_KEYS,
        "scaling": {
            "rhos",
            "C",
            "t_max",
            "dt",
            "n_random",
            "seed",
            "escape_radius",
            "output",
            "fit_output",
        },
    },
}

_REQUIRED = {
    "bnf": ("hamiltonian", "bnf"),
    "dioph": ("dioph",),
    "sample": ("sample",),
    "bnfmap": ("hamiltonian", "bnfmap"),
    "rescale": ("hamiltonian", "rescale"),
    "badvol": ("badvol",),
    "drift": ("hamiltonian", "drift"),
    "scaling": ("hamiltonian", "scaling"),
}


class ExperimentConfig:
    """Validated configuration for one command run."""

    def __init__(self, command, sections, source):
        self.command = command
        self.sections = sections
        self.source = str(source)

    def get(self, section, key, default=None):
        return self.sections.get(section, {}).get(key, default)

    def require(self, section, key):
        try:
            return self.sections[section][key]
        except KeyError:
            raise ConfigError(f"missing required key {section}.{key}") from None

    def resolved(self):
        return {
            "command": self.command,
            "source": self.source,
            "sections": self.sections,
        }


def load_config(command, path):
    if command not in _SCHEMAS:
        raise ConfigError(f"unknown command {command!r}")
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from None
    schema = _SCHEMAS[command]
    for section, content in raw.items():
        if section not in schema:
            raise ConfigError(f"unknown config section [{section}]")
        if not isinstance(content, dict):
            raise ConfigError(f"section [{section}] must be a table")
        for key in content:
            if key not in schema[section]:
                raise ConfigError(f"unknown config key {section}.{key}")
    for section in _REQUIRED[command]:
        if section not in raw:
            raise ConfigError(f"missing required section [{section}]")
    return ExperimentConfig(command, raw, path)


def hamiltonian_from_config(cfg):
    section = cfg.sections.get("hamiltonian", {})
    if "family" in section:
        if "terms" in section or "n" in section:
            raise ConfigError("hamiltonian: give either family or inline terms")
        base = families.build(section["family"], section.get("params"))
    elif "terms" in section:
        if "n" not in section:
            raise ConfigError("hamiltonian.n is required with inline terms")
        try:
            base = GradedPolynomial.from_text(int(section["n"]), section["terms"])
        except Exception as exc:
            raise ConfigError(f"hamiltonian.terms: {exc}") from None
    else:
        raise ConfigError("hamiltonian: need family or inline terms")
    return _apply_perturbation(base, section)


def _apply_perturbation(base, section):
    """Optional brick perturbation: an explicit sample file, or a fresh draw."""
    has_file = "sample_file" in section
    has_seed = "perturb_seed" in section
    if has_file and has_seed:
        raise ConfigError("hamiltonian: give sample_file or perturb_seed, not both")
    if has_file:
        try:
            doc = json.loads(Path(section["sample_file"]).read_text())
        except FileNotFoundError:
            raise ConfigError(
                f"hamiltonian.sample_file: not found: {section['sample_file']}"
            ) from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"hamiltonian.sample_file: {exc}") from None
        sample_doc = doc.get("result", doc)
        try:
            sample = brick.BrickSample.from_json_dict(sample_doc)
        except Exception as exc:
            raise ConfigError(f"hamiltonian.sample_file: {exc}") from None
        perturbed, _ = brick.perturb(base, sample)
        return perturbed
    if has_seed:
        m = int(section.get("perturb_m", 2))
        sample = brick.sample_brick(base.n, m, int(section["perturb_seed"]))
        perturbed, _ = brick.perturb(base, sample)
        return perturbed
    if "perturb_m" in section:
        raise ConfigError("hamiltonian.perturb_m requires perturb_seed")
    return base


def _check_radius(name, value, open_right=True):
    v = float(value)
    hi_ok = v < 1.0 if open_right else v <= 1.0
    if not (0.0 < v and hi_ok):
        raise ConfigError(f"{name} = {v} must lie in (0, 1)")
    return v


def _json_out(path, cfg, result):
    doc = {
        "version": __version__,
        "config": cfg.resolved(),
        "result": result,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _csv_out(path, cfg, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_csv_cell(v) for v in row) + "\n")
    meta = {"version": __version__, "config": cfg.resolved(), "columns": header}
    with open(str(path) + ".meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _csv_cell(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    return str(v)


# -- command implementations -------------------------------------------------


def _cmd_bnf(cfg, out_dir, seed, jobs):
    H = hamiltonian_from_config(cfg)
    m = int(cfg.require("bnf", "m"))
    trunc = cfg.get("bnf", "trunc")
    result = bnf.normalize(H, m, trunc=int(trunc) if trunc is not None else None)
    path = out_dir / cfg.get("bnf", "output", "bnf.json")
    _json_out(path, cfg, result.to_json_dict())
    return [path]


def _cmd_dioph(cfg, out_dir, seed, jobs):
    omega = [float(v) for v in cfg.require("dioph", "omega")]
    tau = float(cfg.require("dioph", "tau"))
    K = int(cfg.require("dioph", "K"))
    report = arith.diophantine_gamma(omega, tau, K)
    path = out_dir / cfg.get("dioph", "output", "dioph.json")
    _json_out(path, cfg, report.to_json_dict())
    return [path]


def _cmd_sample(cfg, out_dir, seed, jobs):
    n = int(cfg.require("sample", "n"))
    m = int(cfg.require("sample", "m"))
    s = seed if seed is not None else int(cfg.get("sample", "seed", 0))
    sample = brick.sample_brick(n, m, s)
    path = out_dir / cfg.get("sample", "output", "sample.json")
    _json_out(path, cfg, sample.to_json_dict())
    return [path]


def _cmd_bnfmap(cfg, out_dir, seed, jobs):
    H = hamiltonian_from_config(cfg)
    m = int(cfg.require("bnfmap", "m"))
    cases = int(cfg.get("bnfmap", "cases", 5))
    fd_step = float(cfg.get("bnfmap", "fd_step", 1e-4))
    s = seed if seed is not None else int(cfg.get("bnfmap", "seed", 0))
    n = H.n
    zeros = [ActionPolynomial.zero(n) for _ in range(m)]
    det, jac = genericity.bnf_map_jacobian(H, m, zeros, fd_step)
    det_half = genericity.jacobian_unit_check(H, m, zeros, fd_step / 2)
    triangular = []
    for case in range(cases):
        base_seed = 1000 * s + case
        P = [brick.sample_brick(n, m, base_seed).parts[k] for k in range(m)]
        Q_ref = genericity.bnf_map(H, m, P)
        for j in range(2, m + 1):
            P_mod = list(P)
            P_mod[j - 1] = brick.sample_brick(n, m, base_seed + 7919).parts[j - 1]
            Q_mod = genericity.bnf_map(H, m, P_mod)
            worst = 0.0
            for i in range(j - 1):
                keys = set(Q_ref[i].coeffs) | set(Q_mod[i].coeffs)
                for l in keys:
                    worst = max(
                        worst,
                        abs(
                            Q_ref[i].coeffs.get(l, 0.0) - Q_mod[i].coeffs.get(l, 0.0)
                        ),
                    )
            triangular.append(
                {"case": case, "perturbed_order": j, "max_lower_change": worst}
            )
    result = {
        "jacobian_det": det,
        "jacobian_det_half_step": det_half,
        "fd_step": fd_step,
        "dimension": int(jac.shape[0]),
        "max_upper_entry": float(
            np.max(np.abs(np.triu(jac, k=1))) if jac.shape[0] > 1 else 0.0
        ),
        "triangularity": triangular,
    }
    path = out_dir / cfg.get("bnfmap", "output", "bnfmap.json")
    _json_out(path, cfg, result)
    return [path]


def _cmd_rescale(cfg, out_dir, seed, jobs):
    H = hamiltonian_from_config(cfg)
    m = int(cfg.require("rescale", "m"))
    s_m = _check_radius("rescale.s_m", cfg.require("rescale", "s_m"))
    r_m = _check_radius("rescale.r_m", cfg.get("rescale", "r_m", 0.5))
    trunc = cfg.get("rescale", "trunc")
    nf = bnf.normalize(H, m, trunc=int(trunc) if trunc is not None else None)
    rescaled = genericity.rescale(H, nf, s_m, r_m=r_m)
    from .polyalg import bombieri_norm

    per_degree = []
    for k, (before, after) in enumerate(
        zip(nf.invariants, rescaled.parts), start=1
    ):
        per_degree.append(
            {
                "degree": k,
                "norm_before": bombieri_norm(before, k),
                "norm_after": bombieri_norm(after, k),
                "factor": s_m ** (2 * k - 2),
                "in_brick": bombieri_norm(after, k) <= 1.0 + 1e-12,
            }
        )
    result = {
        "context": rescaled.context.to_json_dict(),
        "per_degree": per_degree,
        "remainder_terms": len(rescaled.remainder.terms),
    }
    path = out_dir / cfg.get("rescale", "output", "rescale.json")
    _json_out(path, cfg, result)
    return [path]


def _action_from_config(cfg):
    section = cfg.sections["badvol"]
    name = section.get("action")
    if name == "norm-squared":
        n = int(section.get("n", 2))
        return ActionPolynomial(
            n, {tuple(2 if j == i else 0 for j in range(n)): 1.0 for i in range(n)}
        )
    if name == "cubic-1d":
        return ActionPolynomial(1, {(3,): 1.0})
    if name == "zero":
        return ActionPolynomial.zero(int(section.get("n", 2)))
    if name is not None:
        raise ConfigError(f"unknown badvol.action {name!r}")
    if "coeffs" not in section or "n" not in section:
        raise ConfigError("badvol: need action=<name> or (n, coeffs)")
    try:
        return ActionPolynomial.from_text(int(section["n"]), section["coeffs"])
    except Exception as exc:
        raise ConfigError(f"badvol.coeffs: {exc}") from None


def _cmd_badvol(cfg, out_dir, seed, jobs):
    h = _action_from_config(cfg)
    rho = float(cfg.require("badvol", "rho"))
    eps_list = [float(v) for v in cfg.require("badvol", "eps")]
    samples = int(cfg.get("badvol", "samples", 2000))
    grid = int(cfg.get("badvol", "grid", 41))
    s = seed if seed is not None else int(cfg.get("badvol", "seed", 0))
    estimates = genericity.badvol_sweep(
        h, rho, eps_list, samples=samples, grid=grid, seed=s
    )
    rows = []
    for est in estimates:
        lo, hi = est.fraction_ci()
        rows.append(
            (est.eps, est.rho, est.samples, est.bad_fraction, lo, hi)
        )
    path = out_dir / cfg.get("badvol", "output", "badvol.csv")
    _csv_out(
        path,
        cfg,
        ["eps", "rho", "samples", "bad_fraction", "ci_low", "ci_high"],
        rows,
    )
    return [path]


def _cmd_drift(cfg, out_dir, seed, jobs):
    H = hamiltonian_from_config(cfg)
    section = cfg.sections["drift"]
    dt = float(cfg.require("drift", "dt"))
    t_max = float(cfg.require("drift", "t_max"))
    record_every = int(section.get("record_every", 1))
    escape = section.get("escape_radius")
    if "z0" in section:
        z0 = np.asarray([float(v) for v in section["z0"]])
    else:
        rho = _check_radius("drift.rho", cfg.require("drift", "rho"))
        split = section.get("split")
        phases = section.get("phases", [0.0] * H.n)
        if split is None:
            split = [1.0 / np.sqrt(H.n)] * H.n
        z0 = dynamics.phase_point(rho, split, phases)
    rec = dynamics.integrate(
        H,
        z0,
        dt,
        t_max,
        record_every=record_every,
        escape_radius=float(escape) if escape is not None else None,
    )
    n = H.n
    header = (
        ["t"]
        + [f"z{i}" for i in range(2 * n)]
        + [f"I{j + 1}" for j in range(n)]
        + ["H"]
    )
    rows = []
    for i in range(len(rec.times)):
        rows.append(
            [float(rec.times[i])]
            + [float(v) for v in rec.states[i]]
            + [float(v) for v in rec.actions[i]]
            + [float(rec.energy[i])]
        )
    path = out_dir / cfg.get("drift", "output", "drift.csv")
    _csv_out(path, cfg, header, rows)
    return [path]


def _cmd_scaling(cfg, out_dir, seed, jobs):
    H = hamiltonian_from_config(cfg)
    rhos = [_check_radius("scaling.rhos", v) for v in cfg.require("scaling", "rhos")]
    C = float(cfg.require("scaling", "C"))
    t_max = float(cfg.require("scaling", "t_max"))
    dt = float(cfg.require("scaling", "dt"))
    n_random = int(cfg.get("scaling", "n_random", 8))
    s = seed if seed is not None else int(cfg.get("scaling", "seed", 0))
    escape = cfg.get("scaling", "escape_radius")
    mapper = None
    pool = None
    if jobs and jobs > 1:
        pool = concurrent.futures.ProcessPoolExecutor(max_workers=jobs)
        mapper = pool.map
    try:
        curve = dynamics.scaling_experiment(
            H,
            rhos,
            C,
            t_max,
            dt,
            n_random=n_random,
            seed=s,
            escape_radius=float(escape) if escape is not None else None,
            mapper=mapper,
        )
    finally:
        if pool is not None:
            pool.shutdown()
    rows = [
        (rho, "" if t is None else t, int(c), label)
        for rho, label, t, c in curve.rows
    ]
    path = out_dir / cfg.get("scaling", "output", "scaling.csv")
    _csv_out(path, cfg, ["rho", "exit_time", "censored", "direction_id"], rows)
    fit_path = out_dir / cfg.get("scaling", "fit_output", "scaling_fit.json")
    _json_out(
        fit_path,
        cfg,
        {
            "C": C,
            "t_max": t_max,
            "fit": curve.fit,
            "summary": [
                {
                    "rho": float(r),
                    "exit_time": float(t),
                    "censored": bool(c),
                }
                for r, t, c in zip(curve.rhos, curve.exit_times, curve.censored)
            ],
        },
    )
    return [path, fit_path]


_COMMANDS = {
    "bnf": _cmd_bnf,
    "dioph": _cmd_dioph,
    "sample": _cmd_sample,
    "bnfmap": _cmd_bnfmap,
    "rescale": _cmd_rescale,
    "badvol": _cmd_badvol,
    "drift": _cmd_drift,
    "scaling": _cmd_scaling,
}


def run(command, config_path, seed=None, out=None, jobs=1):
    """Execute one command; returns (exit_code, list of artifact paths)."""
    try:
        cfg = load_config(command, config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG, []
    out_dir = Path(out) if out else Path.cwd()
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        paths = _COMMANDS[command](cfg, out_dir, seed, jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG, []
    except BirkhoffError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL, []
    for p in paths:
        print(p)
    return EXIT_OK, paths


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="birkhoff",
        description="Birkhoff normal form and stability experiment runner",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", default=None)
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args(argv)
    code, _ = run(args.command, args.config, seed=args.seed, out=args.out,
                  jobs=args.jobs)
    return code


if __name__ == "__main__":
    sys.exit(main())
