"""Batch driver: parse a JSON run configuration, execute one command, and
emit structured results (JSON payload plus optional CSV tables).

Commands: solve, bound, chain, susy-check, sector-scan, eps-scan,
transform-check, oracle. Exit codes: 0 success, 2 validation error,
3 solver non-convergence, 4 internal error.

Heavy numerical imports happen inside run() so that --threads /
CQSM_THREADS can cap the BLAS and FFT pools before numpy spins them up.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from typing import Any

from .errors import (ConfigError, CqsmError, NonConvergenceError,
                     TruncatedSpectrumError)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NONCONVERGENCE = 3
EXIT_INTERNAL = 4

COMMANDS = ("solve", "bound", "chain", "susy-check", "sector-scan",
            "eps-scan", "transform-check", "oracle")

_DEFAULTS = {
    "grid": {"half_width": 8.0, "points": 31},
    "cyl_grid": {"r_max": 8.0, "z_max": 8.0, "n_r": 48, "n_z": 48},
    "solver": {"tol": 1e-8, "max_pairs": 12, "maxiter": 1200,
               "gap_margin": 0.02, "method": "auto"},
    "field": {
        "profile": {"kind": "exp", "R": 0.55, "amplitude": 1.0, "length_unit": 1.0},
        "direction": {"kind": "hedgehog", "m": 1},
        "isospin": {"kind": "pauli", "copies": 1},
        "M": 1.0,
    },
    "bound": {"r_max": None, "n_quad": 128, "mc_samples": 1_000_000},
    "sectors": {"l_values": [0, 1, 2], "s_values": [1, -1],
                "t_values": [1, -1], "z_sign": -1},
    "susy": {"C": 1.0},
    "transform": {"grids": [21, 41], "dense_points": []},
    "oracle": {"points": [7, 9]},
    "eps": 1.0,
    "eps_list": [1.0, 0.5, 0.25],
    "seed": 1234,
    "output": {"csv": True},
}


# ----------------------------------------------------------------------------
# 17-significant-digit JSON writer (also the determinism contract: payloads
# with identical numbers serialize to identical bytes)
# ----------------------------------------------------------------------------

def _json_scalar(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        if math.isnan(x):
            return '"nan"'
        if math.isinf(x):
            return '"inf"' if x > 0 else '"-inf"'
        return format(x, ".17g")
    if isinstance(x, int):
        return str(x)
    if x is None:
        return "null"
    return json.dumps(str(x))


def dump_json(obj: Any, indent: int = 0) -> str:
    pad = "  " * indent
    pad_in = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad_in}{json.dumps(str(k))}: {dump_json(v, indent + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{pad_in}{dump_json(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    return _json_scalar(obj)


def config_hash(resolved: dict) -> str:
    canon = json.dumps(_canonical(resolved), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def _canonical(obj):
    if isinstance(obj, dict):
        return {k: _canonical(v) for k, v in sorted(obj.items())}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    if isinstance(obj, float):
        return format(obj, ".17g")
    return obj


# ----------------------------------------------------------------------------
# configuration parsing and validation
# ----------------------------------------------------------------------------

@dataclass
class RunConfig:
    command: str
    raw: dict
    resolved: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.resolved[key]


def _merge_defaults(defaults, given, path=""):
    if isinstance(defaults, dict):
        if given is None:
            given = {}
        if not isinstance(given, dict):
            raise ConfigError(path or "config", "expected an object")
        out = {}
        for key, dval in defaults.items():
            out[key] = _merge_defaults(dval, given.get(key), f"{path}.{key}".lstrip("."))
        for key in given:
            if key not in defaults:
                out[key] = given[key]
        return out
    return defaults if given is None else given


def _require(cond: bool, fieldname: str, message: str):
    if not cond:
        raise ConfigError(fieldname, message)


def parse_config(path: str, command: str, seed_override: int | None = None) -> RunConfig:
    """Load, merge with documented defaults, and validate. Every default is
    resolved into the echoed configuration (no silent defaults)."""
    if command not in COMMANDS:
        raise ConfigError("command", f"unknown command {command!r}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"malformed JSON at line {exc.lineno}: {exc.msg}")
    resolved = _merge_defaults(_DEFAULTS, raw)
    resolved["command"] = command
    if seed_override is not None:
        resolved["seed"] = int(seed_override)

    g = resolved["grid"]
    _require(int(g["points"]) % 2 == 1, "grid.points", "n must be odd")
    _require(int(g["points"]) >= 5, "grid.points", "n must be >= 5")
    _require(float(g["half_width"]) > 0, "grid.half_width", "must be positive")
    s = resolved["solver"]
    _require(float(s["tol"]) > 0, "solver.tol", "must be positive")
    _require(int(s["max_pairs"]) >= 1, "solver.max_pairs", "must be >= 1")
    _require(s["method"] in ("auto", "dense", "folded"), "solver.method",
             "must be auto, dense, or folded")
    _require(0 < float(resolved["eps"]), "eps", "must be positive")
    for e in resolved["eps_list"]:
        _require(float(e) > 0, "eps_list", "all entries must be positive")
    f = resolved["field"]
    _require(float(f["M"]) > 0, "field.M", "must be positive")
    prof = f["profile"]
    _require(prof.get("kind") in ("exp", "mixed", "rational", "custom"),
             "field.profile.kind", "must be exp, mixed, rational, or custom")
    if prof.get("kind") == "custom":
        csv = prof.get("csv")
        _require(bool(csv), "field.profile.csv", "custom profile needs a csv path")
        _require(os.path.exists(csv), "field.profile.csv", f"file not found: {csv}")
    direction = f["direction"]
    _require(direction.get("kind") in ("hedgehog", "constant", "planar"),
             "field.direction.kind", "must be hedgehog, constant, or planar")
    if direction.get("kind") == "hedgehog":
        m = direction.get("m", 1)
        _require(int(m) >= 1, "field.direction.m", "winding must be >= 1")
    sec = resolved["sectors"]
    _require(int(sec["z_sign"]) in (1, -1), "sectors.z_sign", "must be +-1")
    return RunConfig(command=command, raw=raw, resolved=resolved)


def _build_field(resolved):
    from . import fields as F
    from .algebra import kron_identity_triple, pauli_triple
    fc = resolved["field"]
    prof_cfg = fc["profile"]
    kind = prof_cfg["kind"]
    unit = float(prof_cfg.get("length_unit", 1.0))
    if kind == "exp":
        base = F.ExpProfile(float(prof_cfg.get("R", 0.55)), length_unit=unit)
    elif kind == "mixed":
        base = F.MixedProfile(
            a1=float(prof_cfg.get("a1", 0.65)), R1=float(prof_cfg.get("R1", 0.58)),
            a2=float(prof_cfg.get("a2", 0.35)),
            R2=float(prof_cfg.get("R2", math.sqrt(0.3))), length_unit=unit)
    elif kind == "rational":
        base = F.RationalProfile(float(prof_cfg.get("lam", math.sqrt(0.4))),
                                 length_unit=unit)
    else:
        base = F.CustomRadialProfile.from_csv(prof_cfg["csv"])
    amp = float(prof_cfg.get("amplitude", 1.0))
    profile = base if amp == 1.0 else F.AmplitudeScaled(base, amp)
    triple = pauli_triple()
    copies = int(resolved["field"]["isospin"].get("copies", 1))
    if copies > 1:
        triple = kron_identity_triple(triple, copies)
    d = fc["direction"]
    if d["kind"] == "hedgehog":
        direction = F.HedgehogField(m=int(d.get("m", 1)))
    elif d["kind"] == "constant":
        direction = F.ConstantField(tuple(d.get("axis", (0.0, 0.0, 1.0))))
    else:
        angle = base if amp == 1.0 else profile
        direction = F.PlanarField(float(d.get("C", 1.0)), angle)
    return F.MassFieldConfig(profile, triple, direction, M=float(fc["M"]))


# ----------------------------------------------------------------------------
# command implementations
# ----------------------------------------------------------------------------

def _csv_write(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(
                format(x, ".17g") if isinstance(x, float) else str(x)
                for x in row) + "\n")


def _cmd_solve(cfg, mf, out_dir):
    import numpy as np

    from .algebra import weyl_matrices
    from .fields import ConstantField, HedgehogField
    from .grid import GridSpec
    from .operators import K3Operator, assemble_H_eps
    from .sectors import classify_by_k3
    from .spectra import gap_eigenvalues, ground_energies

    alg = weyl_matrices()
    g = GridSpec(float(cfg["grid"]["half_width"]), int(cfg["grid"]["points"]))
    s = cfg["solver"]
    op = assemble_H_eps(g, mf, alg, float(cfg["eps"]))
    res = gap_eigenvalues(op, max_pairs=int(s["max_pairs"]), tol=float(s["tol"]),
                          method=s["method"], delta_edge=float(s["gap_margin"]),
                          seed=int(cfg["seed"]), maxiter=int(s["maxiter"]))
    e_plus, e_minus = ground_energies(res)
    direction = mf.direction
    classifiable = (isinstance(direction, HedgehogField)
                    or (isinstance(direction, ConstantField)
                        and abs(direction.direction[2]) > 0.999999))
    labels = [None] * res.eigenvalues.size
    variances = [float("nan")] * res.eigenvalues.size
    if classifiable and res.eigenvectors is not None and res.eigenvalues.size:
        m = direction.m if isinstance(direction, HedgehogField) else 1
        k3 = K3Operator(g, mf.triple, m)
        cls = classify_by_k3(res, k3, mf.triple, m)
        labels = [c.label for c in cls]
        variances = [c.k3_variance for c in cls]
    rows = []
    for j, lam in enumerate(res.eigenvalues):
        lab = labels[j]
        rows.append((j, float(lam), float(res.residual_norms[j]),
                     lab.l if lab else "", lab.s if lab else "",
                     lab.t if lab else "", float(variances[j])))
    if cfg["output"].get("csv", True):
        _csv_write(os.path.join(out_dir, "eigenvalues.csv"),
                   ["index", "lambda", "residual", "sector_l", "sector_s",
                    "sector_t", "k3_variance"], rows)
    payload = {
        "mass_edge": float(res.mass_edge),
        "delta_edge": float(res.delta_edge),
        "eigenvalues": [float(x) for x in res.eigenvalues],
        "residuals": [float(x) for x in res.residual_norms],
        "n_gap": int(res.eigenvalues.size),
        "E0_plus": e_plus, "E0_minus": e_minus,
        "edge_states": [float(x) for x in res.solver_info.get("edge_states", [])],
        "sectors": [{"l": lab.l, "s": lab.s, "t": lab.t,
                     "k3_variance": float(v)} if lab else None
                    for lab, v in zip(labels, variances)],
        "solver": {k: v for k, v in res.solver_info.items()
                   if k in ("method", "iterations", "matvecs", "converged",
                            "truncated", "block")},
    }
    ok = res.converged and not res.truncated
    return payload, ok


def _cmd_bound(cfg, mf, out_dir):
    from .bounds import cf_monte_carlo, cf_radial
    b = cfg["bound"]
    rq = cf_radial(mf, r_max=b["r_max"] and float(b["r_max"]),
                   n_quad=int(b["n_quad"]))
    rmc = cf_monte_carlo(mf, int(b["mc_samples"]), int(cfg["seed"]))
    sigma = math.hypot(rq.quadrature_error_estimate,
                       rmc.quadrature_error_estimate)
    payload = {
        "radial": {"c_f": rq.c_f, "n_h_bound": rq.n_h_bound,
                   "error": rq.quadrature_error_estimate, **rq.details},
        "monte_carlo": {"c_f": rmc.c_f, "n_h_bound": rmc.n_h_bound,
                        "stderr": rmc.quadrature_error_estimate, **rmc.details},
        "agreement_sigmas": abs(rq.c_f - rmc.c_f) / sigma if sigma > 0 else 0.0,
    }
    return payload, True


def _cmd_chain(cfg, mf, out_dir):
    from .bounds import bound_chain_report
    from .grid import GridSpec
    g = GridSpec(float(cfg["grid"]["half_width"]), int(cfg["grid"]["points"]))
    b = cfg["bound"]
    rec = bound_chain_report(mf, g, float(cfg["solver"]["tol"]),
                             r_max=b["r_max"] and float(b["r_max"]),
                             n_quad=int(b["n_quad"]), seed=int(cfg["seed"]),
                             max_pairs=int(cfg["solver"]["max_pairs"]),
                             maxiter=int(cfg["solver"]["maxiter"]))
    if cfg["output"].get("csv", True):
        _csv_write(os.path.join(out_dir, "chain.csv"), ["quantity", "value"],
                   [("N_H", rec.n_h), ("N_minus_LF", rec.n_minus_lf),
                    ("N_minus_L0", rec.n_minus_l0), ("bound", rec.bound),
                    ("C_F", rec.c_f)])
    payload = {
        "N_H": rec.n_h, "N_minus_LF": rec.n_minus_lf,
        "N_minus_L0": rec.n_minus_l0, "bound": rec.bound, "C_F": rec.c_f,
        "scalar_negatives": rec.scalar_negatives,
        "monotone": rec.monotone, **rec.details,
    }
    return payload, bool(rec.details.get("converged", True))


def _cmd_susy(cfg, mf, out_dir):
    import numpy as np

    from .algebra import weyl_matrices, xi_operator
    from .fields import PlanarField
    from .grid import GridSpec, random_state
    from .operators import GradingOperator, assemble_H_eps, susy_residual
    from .spectra import (check_pair_symmetry, gap_eigenvalues,
                          susy_pairing_residual)

    if not isinstance(mf.direction, PlanarField):
        raise ConfigError("field.direction.kind",
                          "susy-check requires the planar direction family")
    alg = weyl_matrices()
    g = GridSpec(float(cfg["grid"]["half_width"]), int(cfg["grid"]["points"]))
    s = cfg["solver"]
    op = assemble_H_eps(g, mf, alg, float(cfg["eps"]))
    gamma = GradingOperator(g, xi_operator(mf.direction.c, mf.triple), mf.dim_k)
    rng = np.random.default_rng(int(cfg["seed"]))
    psi = random_state(g, mf.dim_k, rng)
    anti = susy_residual(op, gamma, psi)
    res = gap_eigenvalues(op, max_pairs=int(s["max_pairs"]), tol=float(s["tol"]),
                          method=s["method"], seed=int(cfg["seed"]),
                          maxiter=int(s["maxiter"]))
    pairing = check_pair_symmetry(res, float(s["tol"]))
    quasi = susy_pairing_residual(op, gamma, res) if res.eigenvalues.size else []
    payload = {
        "anticommutator_residual": float(anti),
        "eigenvalues": [float(x) for x in res.eigenvalues],
        "pairing_max_mismatch": pairing.max_mismatch,
        "pairing_unmatched": [float(x) for x in pairing.unmatched],
        "multiplicity_ok": pairing.multiplicity_ok,
        "quasi_eigenvector_residuals": [float(x) for x in quasi],
        "n_gap": int(res.eigenvalues.size),
    }
    ok = res.converged and not res.truncated
    return payload, ok


def _cmd_sector_scan(cfg, mf, out_dir):
    from .sectors import CylGrid, radial_profile_as_G, sector_epsilon_scan
    sec = cfg["sectors"]
    cg = cfg["cyl_grid"]
    grid = CylGrid(float(cg["r_max"]), float(cg["z_max"]),
                   int(cg["n_r"]), int(cg["n_z"]))
    rows = sector_epsilon_scan(radial_profile_as_G(mf.profile),
                               [int(x) for x in sec["l_values"]],
                               [int(x) for x in sec["s_values"]],
                               [int(x) for x in sec["t_values"]],
                               mf.M, [float(e) for e in cfg["eps_list"]],
                               grid, z_sign=int(sec["z_sign"]))
    if cfg["output"].get("csv", True):
        _csv_write(os.path.join(out_dir, "sector_scan.csv"),
                   ["l", "s", "t", "eps", "E0", "converged"],
                   [(r.l, r.s, r.t, r.eps, r.e0, r.converged) for r in rows])
    payload = {"rows": [{"l": r.l, "s": r.s, "t": r.t, "eps": r.eps,
                         "E0": r.e0, "converged": r.converged} for r in rows]}
    return payload, all(r.converged for r in rows)


def _cmd_eps_scan(cfg, mf, out_dir):
    from .algebra import weyl_matrices
    from .grid import GridSpec
    from .spectra import scan_epsilon
    alg = weyl_matrices()
    g = GridSpec(float(cfg["grid"]["half_width"]), int(cfg["grid"]["points"]))
    s = cfg["solver"]
    rows = scan_epsilon(g, mf, alg, [float(e) for e in cfg["eps_list"]],
                        tol=float(s["tol"]), max_pairs=int(s["max_pairs"]),
                        seed=int(cfg["seed"]), method=s["method"],
                        maxiter=int(s["maxiter"]))
    if cfg["output"].get("csv", True):
        _csv_write(os.path.join(out_dir, "eps_scan.csv"),
                   ["eps", "n_gap", "E0_plus", "E0_minus", "converged", "skipped"],
                   [(r.eps, "" if r.n_gap is None else r.n_gap,
                     "" if r.e0_plus is None else r.e0_plus,
                     "" if r.e0_minus is None else r.e0_minus,
                     r.converged, r.skipped) for r in rows])
    payload = {"rows": [{"eps": r.eps, "n_gap": r.n_gap, "E0_plus": r.e0_plus,
                         "E0_minus": r.e0_minus, "converged": r.converged,
                         "skipped": r.skipped} for r in rows]}
    ok = all(r.converged for r in rows if not r.skipped)
    return payload, ok


def _cmd_transform_check(cfg, mf, out_dir):
    import numpy as np

    from .algebra import weyl_matrices
    from .fields import ConstantField
    from .grid import GridSpec, gaussian_state
    from .operators import (FieldTransform, assemble_H, assemble_HB,
                            dense_matrix, dense_transform,
                            transform_conjugation_residual)

    if not isinstance(mf.direction, ConstantField):
        raise ConfigError("field.direction.kind",
                          "transform-check requires a constant direction")
    alg = weyl_matrices()
    L = float(cfg["grid"]["half_width"])
    residuals = []
    for n in cfg["transform"]["grids"]:
        g = GridSpec(L, int(n))
        h = assemble_H(g, mf, alg)
        hb = assemble_HB(g, mf, alg)
        xf = FieldTransform(g, mf)
        psi = gaussian_state(g, mf.dim_k, width=1.0, moment=2,
                             center=(0.2, -0.15, 0.1))
        residuals.append({"n": int(n),
                          "residual": transform_conjugation_residual(h, hb, xf, psi)})
    dense = []
    for n in cfg["transform"].get("dense_points", []):
        g = GridSpec(L, int(n))
        h = dense_matrix(assemble_H(g, mf, alg))
        x = dense_transform(FieldTransform(g, mf))
        conj = x @ h @ x.conj().T
        ew_h = np.linalg.eigvalsh(h)
        ew_c = np.linalg.eigvalsh(conj)
        ew_b = np.linalg.eigvalsh(dense_matrix(assemble_HB(g, mf, alg)))
        dense.append({
            "n": int(n),
            "max_spectrum_shift_conjugated": float(np.max(np.abs(ew_h - ew_c))),
            "max_spectrum_shift_hb": float(np.max(np.abs(ew_h - ew_b))),
        })
    payload = {"matvec_residuals": residuals, "dense_spectra": dense}
    return payload, True


def _cmd_oracle(cfg, mf, out_dir):
    import numpy as np

    from .algebra import weyl_matrices
    from .grid import GridSpec
    from .operators import assemble_H_eps
    from .spectra import gap_eigenvalues

    alg = weyl_matrices()
    L = float(cfg["grid"]["half_width"])
    s = cfg["solver"]
    entries = []
    ok = True
    for n in cfg["oracle"]["points"]:
        g = GridSpec(L, int(n))
        op = assemble_H_eps(g, mf, alg, float(cfg["eps"]))
        dense = gap_eigenvalues(op, max_pairs=int(s["max_pairs"]),
                                tol=float(s["tol"]), method="dense",
                                keep_vectors=False)
        folded = gap_eigenvalues(op, max_pairs=int(s["max_pairs"]),
                                 tol=float(s["tol"]), method="folded",
                                 seed=int(cfg["seed"]),
                                 maxiter=int(s["maxiter"]), keep_vectors=False)
        agree = (dense.eigenvalues.size == folded.eigenvalues.size)
        diff = float("nan")
        if agree and dense.eigenvalues.size:
            diff = float(np.max(np.abs(dense.eigenvalues - folded.eigenvalues)))
        elif agree:
            diff = 0.0
        entries.append({"n": int(n),
                        "dense": [float(x) for x in dense.eigenvalues],
                        "folded": [float(x) for x in folded.eigenvalues],
                        "count_agree": agree, "max_diff": diff,
                        "folded_converged": folded.converged})
        ok = ok and agree and folded.converged
    return {"comparisons": entries}, ok


_DISPATCH = {
    "solve": _cmd_solve,
    "bound": _cmd_bound,
    "chain": _cmd_chain,
    "susy-check": _cmd_susy,
    "sector-scan": _cmd_sector_scan,
    "eps-scan": _cmd_eps_scan,
    "transform-check": _cmd_transform_check,
    "oracle": _cmd_oracle,
}


def run(cfg: RunConfig, out_dir: str) -> tuple[dict, int]:
    """Execute the configured command; returns (result document, exit code)."""
    from . import __version__
    os.makedirs(out_dir, exist_ok=True)
    mf = _build_field(cfg.resolved)
    t0 = time.time()
    try:
        payload, ok = _DISPATCH[cfg.command](cfg.resolved, mf, out_dir)
        code = EXIT_OK if ok else EXIT_NONCONVERGENCE
        error = None
    except (NonConvergenceError, TruncatedSpectrumError) as exc:
        payload, code, error = {}, EXIT_NONCONVERGENCE, str(exc)
    doc = {
        "command": cfg.command,
        "config": cfg.resolved,
        "config_hash": config_hash(cfg.resolved),
        "payload": payload,
        "error": error,
        "meta": {"version": __version__,
                 "wall_seconds": time.time() - t0},
    }
    with open(os.path.join(out_dir, "result.json"), "w", encoding="utf-8") as fh:
        fh.write(dump_json(doc) + "\n")
    return doc, code


def _apply_thread_cap(threads: int | None):
    if threads is None:
        env = os.environ.get("CQSM_THREADS")
        threads = int(env) if env else None
    if threads is None or threads < 1:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, str(threads))
    from . import operators
    operators._FFT_WORKERS = threads


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cqsm",
        description="Spectral analysis of soliton Dirac operators with "
                    "operator-valued mass terms")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the configured RNG seed")
    parser.add_argument("--threads", type=int, default=None,
                        help="cap BLAS/FFT threads (or set CQSM_THREADS)")
    args = parser.parse_args(argv)
    _apply_thread_cap(args.threads)
    try:
        cfg = parse_config(args.config, args.command, seed_override=args.seed)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        doc, code = run(cfg, args.out)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except CqsmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except Exception as exc:  # anything unexpected is an internal error
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    n = doc["payload"]
    summary = {k: n[k] for k in ("n_gap", "N_H", "monotone", "agreement_sigmas")
               if isinstance(n, dict) and k in n}
    print(f"{cfg.command}: exit={code} hash={doc['config_hash'][:12]} {summary}")
    return code


if __name__ == "__main__":
    sys.exit(main())
