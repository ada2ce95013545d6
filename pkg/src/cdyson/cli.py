"""Config-driven experiment runner.

``cdyson <subcommand> --config cfg.json [--out DIR] [--seed N] [--quiet]``

Every run writes CSV tables plus ``manifest.json`` (config echo, version,
timestamps, one verdict per check, file inventory).  Exit codes: 0 when all
checks pass, 1 when one fails, 2 for configuration errors.
"""
import argparse
import csv
import json
import logging
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .contour import QuadratureRule
from .dyson import (
    DEFAULT_TOL,
    InteractionSystem,
    dyson_series,
    exact_propagator,
    group_law_defects,
)
from .errors import CDysonError, CheckFailure, ConfigError
from .gml import gml_sweep
from .qed_toy import (
    ElectronModeSet,
    PhotonModeSet,
    build_hamiltonians,
    certify_operator,
    analytic_shift_bounds,
    photon_field,
    run_gml_qed,
)

log = logging.getLogger("cdyson")

SCHEMA_VERSION = 1
SUBCOMMANDS = ("certify", "dyson-check", "properties", "gml-sweep", "qed-demo")
PRESETS = ("free", "symmetric16", "random", "gml_abstract", "qed_small")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_vec3 = {"type": "array", "items": _num, "minItems": 3, "maxItems": 3}
_cplx = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "scenario", "model"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "scenario": {"type": "string", "minLength": 1},
        "seed": {"type": "integer", "minimum": 0},
        "model": {
            "type": "object",
            "required": ["preset"],
            "additionalProperties": False,
            "properties": {
                "preset": {"enum": list(PRESETS)},
                "dim": {"type": "integer", "minimum": 2, "maximum": 512},
                "coupling": {"type": "number", "minimum": 0},
                "symmetric": {"type": "boolean"},
                "spectrum_max": _pos,
                "qed": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "photon_momenta": {"type": "array", "items": _vec3, "minItems": 1},
                        "electron_momenta": {"type": "array", "items": _vec3, "minItems": 1},
                        "mass": _pos,
                        "coupling": {"type": "number", "minimum": 0},
                        "points": {"type": "array", "items": _vec3, "minItems": 1},
                        "weights": {"type": "array", "items": _num, "minItems": 1},
                        "n_max": {"type": "integer", "minimum": 1, "maximum": 6},
                        "photon_cutoff": _pos,
                        "electron_cutoff": _pos,
                        "k_min": _pos,
                    },
                },
            },
        },
        "tolerance": _pos,
        "quadrature_nodes": {"type": "integer", "minimum": 4, "maximum": 256},
        "eps": _pos,
        "T_grid": {"type": "array", "items": _pos, "minItems": 2},
        "points": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["z", "z_prime"],
                "additionalProperties": False,
                "properties": {"z": _cplx, "z_prime": _cplx},
            },
            "minItems": 1,
        },
        "random_points": {"type": "integer", "minimum": 1, "maximum": 1000},
        "thresholds": {
            "type": "object",
            "additionalProperties": _pos,
        },
        "rate_reference": {"enum": ["gap", "sector_gap"]},
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string", "minLength": 1}},
        },
    },
}

DEFAULT_THRESHOLDS = {
    "identity_defect": 1e-8,
    "group_law": 1e-8,
    "final_error": 1e-6,
    "rate_rel_error": 0.2,
    "overlap": 0.5,
}

# ---------------------------------------------------------------------------
# config


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from exc
    preset = cfg["model"]["preset"]
    if preset in ("symmetric16", "random", "gml_abstract") and "seed" not in cfg:
        raise ConfigError(f"preset {preset!r} is randomized; a seed is mandatory")
    if "random_points" in cfg and "seed" not in cfg:
        raise ConfigError("random_points needs a seed")
    qed = cfg["model"].get("qed")
    if qed and len(qed.get("points", [])) != len(qed.get("weights", qed.get("points", []))):
        raise ConfigError("model.qed: one weight per spatial point")
    return cfg


# ---------------------------------------------------------------------------
# models


def _random_system(rng, dim, coupling, symmetric, top):
    lam = np.sort(rng.uniform(0.0, top, dim))
    lam[0] = 0.0
    q, _ = np.linalg.qr(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))
    h0 = (q * lam) @ q.conj().T
    h0 = (h0 + h0.conj().T) / 2
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    if symmetric:
        a = (a + a.conj().T) / 2
    s = InteractionSystem(h0, a)
    c = max(s.certificate.C, s.certificate.C_adj)
    return InteractionSystem(h0, a * (coupling / c)) if c > 0 else s


def build_system(cfg):
    """The abstract ``(H0, A)`` pair described by ``cfg['model']``."""
    m = cfg["model"]
    preset = m["preset"]
    rng = np.random.default_rng(cfg.get("seed", 0))
    if preset == "free":
        dim = m.get("dim", 8)
        lam = np.linspace(0.0, m.get("spectrum_max", 1.5), dim)
        return InteractionSystem(np.diag(lam).astype(np.complex128), np.zeros((dim, dim)))
    if preset == "symmetric16":
        return _random_system(rng, m.get("dim", 16), m.get("coupling", 0.8), True, m.get("spectrum_max", 1.5))
    if preset == "random":
        return _random_system(rng, m.get("dim", 16), m.get("coupling", 0.8), m.get("symmetric", True),
                              m.get("spectrum_max", 1.5))
    if preset == "gml_abstract":
        return gml_abstract_problem(rng, m.get("dim", 16), m.get("coupling", 0.25))[0]
    if preset == "qed_small":
        model = build_qed(cfg)
        return model.system(model.H_int)
    raise ConfigError(f"unknown preset {preset!r}")


def gml_abstract_problem(rng, dim=16, coupling=0.25):
    """Gapped system plus two insertions: an isolated ground level under a narrow excited band."""
    lam = np.r_[0.0, np.sort(rng.uniform(1.0, 1.3, dim - 1))]
    h0 = np.diag(lam).astype(np.complex128)
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    a = (a + a.conj().T) / 2
    a *= coupling / np.linalg.norm(a, 2)
    x = rng.normal(size=(dim, dim))
    x = (x + x.T) / 2
    y = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return InteractionSystem(h0, a), [(x, 0.5), (y, -0.3)]


QED_SMALL = {
    "photon_momenta": [[0.0, 0.0, 1.0]],
    "electron_momenta": [[0.3, 0.0, 0.0]],
    "mass": 0.4,
    "coupling": 0.5,
    "points": [[0.0, 0.0, 0.0], [0.5, 0.0, 0.0]],
    "weights": [0.5, 0.5],
    "n_max": 2,
    "photon_cutoff": 2.0,
    "electron_cutoff": 1.0,
    "k_min": 0.1,
}


def build_qed(cfg):
    q = dict(QED_SMALL)
    q.update(cfg["model"].get("qed", {}))
    photons = PhotonModeSet(q["photon_momenta"], cutoff=q["photon_cutoff"], k_min=q["k_min"])
    electrons = ElectronModeSet(q["electron_momenta"], mass=q["mass"], cutoff=q["electron_cutoff"])
    return build_hamiltonians(photons, electrons, q["coupling"], q["points"], q["weights"], q["n_max"])


# ---------------------------------------------------------------------------
# output


class Run:
    """Collects verdicts and files for one invocation; writes the manifest."""

    def __init__(self, subcommand, cfg, out_dir, seed):
        self.subcommand = subcommand
        self.cfg = cfg
        self.out = Path(out_dir)
        self.seed = seed
        self.checks = []
        self.files = []
        self.notes = {}
        self.started = datetime.now(timezone.utc).isoformat()

    def check(self, name, value, threshold, passed=None, kind="<="):
        if passed is None:
            passed = bool(np.isfinite(value) and value <= threshold) if kind == "<=" else bool(value >= threshold)
        self.checks.append({"name": name, "value": _jsonable(value), "threshold": threshold,
                            "relation": kind, "passed": bool(passed)})
        log.info("%-28s %-4s %.3e (%s %.3e)", name, "PASS" if passed else "FAIL", value, kind, threshold)
        return passed

    def write_csv(self, name, header, rows):
        self.out.mkdir(parents=True, exist_ok=True)
        path = self.out / name
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        self.files.append(name)
        return path

    def first_failure(self):
        return next((c["name"] for c in self.checks if not c["passed"]), None)

    def write_manifest(self, status, error=None):
        self.out.mkdir(parents=True, exist_ok=True)
        manifest = {
            "subcommand": self.subcommand,
            "config": self.cfg,
            "seed": self.seed,
            "version": __version__,
            "started": self.started,
            "finished": datetime.now(timezone.utc).isoformat(),
            "status": status,
            "error": error,
            "checks": self.checks,
            "notes": self.notes,
            "files": sorted(self.files + ["manifest.json"]),
        }
        with open(self.out / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if np.isfinite(v) else str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


# ---------------------------------------------------------------------------
# subcommands


def _thresholds(cfg):
    t = dict(DEFAULT_THRESHOLDS)
    t.update(cfg.get("thresholds", {}))
    return t


def _points(cfg, rng):
    if "points" in cfg:
        return [(complex(*p["z"]), complex(*p["z_prime"])) for p in cfg["points"]]
    n = cfg.get("random_points", 5)
    out = []
    for _ in range(n):
        # |z|, |z'| <= 3 and Im z <= Im z' <= 0
        while True:
            z = complex(rng.uniform(-2.0, 2.0), -rng.uniform(0.0, 2.0))
            zp = complex(rng.uniform(-2.0, 2.0), -rng.uniform(0.0, 2.0))
            if z.imag > zp.imag:
                z, zp = complex(z.real, zp.imag), complex(zp.real, z.imag)
            if abs(z) <= 3 and abs(zp) <= 3:
                out.append((z, zp))
                break
    return out


def cmd_certify(run, cfg, rng):
    if cfg["model"]["preset"] == "qed_small":
        model = build_qed(cfg)
        bounds = analytic_shift_bounds(model)
        pieces = {"H_I": model.H_I, "H_II": model.H_II, "photon": photon_field(model, 1, [0.0, 0.0, 0.0], lift=True)}
        rows = []
        for name, op in pieces.items():
            cert = certify_operator(model, op)
            rows.append([name, cert.C, cert.C_adj, cert.b, bounds[name], cert.leak])
            run.check(f"shift_{name}", cert.b, bounds[name] * (1 + 1e-12))
        run.write_csv("certificate.csv", ["operator", "C", "C_adj", "b", "b_bound", "leak"], rows)
        return
    s = build_system(cfg)
    cert = s.certificate
    run.write_csv("certificate.csv", ["operator", "C", "C_adj", "b", "b_op", "b_adj", "leak"],
                  [["A", cert.C, cert.C_adj, cert.b, cert.b_op, cert.b_adj, cert.leak]])
    run.check("finite_C", max(cert.C, cert.C_adj), np.inf, passed=bool(np.isfinite(max(cert.C, cert.C_adj))))
    run.check("finite_shift", cert.b, s.spread, passed=bool(np.isfinite(cert.b) and cert.b <= s.spread + 1e-12))


def cmd_dyson_check(run, cfg, rng):
    s = build_system(cfg)
    tol = cfg.get("tolerance", DEFAULT_TOL)
    rule = QuadratureRule(cfg.get("quadrature_nodes", 32))
    rows, worst = [], 0.0
    for z, zp in _points(cfg, rng):
        ds = dyson_series(s, z, zp, tol=tol, rule=rule)
        ex = exact_propagator(s, z, zp)
        defect = float(np.linalg.norm(ds.value - ex, 2))
        worst = max(worst, defect)
        rows.append([z.real, z.imag, zp.real, zp.imag, ds.N, defect, ds.next_term_norm, ds.tail_bound])
    run.write_csv("dyson_check.csv",
                  ["z_re", "z_im", "zp_re", "zp_im", "N", "identity_defect", "next_term_norm", "tail_bound"], rows)
    run.check("max_identity_defect", worst, _thresholds(cfg)["identity_defect"])


def cmd_properties(run, cfg, rng):
    s = build_system(cfg)
    tol = cfg.get("tolerance", DEFAULT_TOL)
    limit = _thresholds(cfg)["group_law"]
    pts = cfg.get("points")
    if pts and len(pts) >= 2:
        (z, zp), (_, zpp) = [(complex(*p["z"]), complex(*p["z_prime"])) for p in pts[:2]]
    else:
        z, zp, zpp = 1.5 - 2.0j, 0.4 - 1.1j, -0.8 - 0.3j
    defects = group_law_defects(s, z, zp, zpp, tol=tol)
    rows = [[k, v, limit] for k, v in defects.items()]
    run.write_csv("properties.csv", ["check", "defect", "threshold"], rows)
    for k, v in defects.items():
        run.check(k, v, limit)


def _sweep_report(run, cfg, sw, prefix=""):
    th = _thresholds(cfg)
    run.write_csv(f"{prefix}gml_sweep.csv", ["T", "ratio_re", "ratio_im", "abs_error"],
                  [[T, r.real, r.imag, e] for T, r, e in zip(sw.T_grid, sw.ratio, sw.abs_error)])
    ref_kind = cfg.get("rate_reference", "gap")
    predicted = sw.predicted_rate if ref_kind == "gap" else sw.sector_rate
    rel = abs(sw.rate - predicted) / predicted if np.isfinite(sw.rate) else np.inf
    run.notes.update({
        "fitted_rate": _jsonable(sw.rate),
        "eps_times_gap": _jsonable(sw.predicted_rate),
        "eps_times_sector_gap": _jsonable(sw.sector_rate),
        "rate_reference": ref_kind,
        "ground_energy": sw.E0,
        "gap": sw.gap,
        "sector_gap": _jsonable(sw.sector_gap),
        "reference_G": [sw.reference.real, sw.reference.imag],
    })
    run.write_csv(f"{prefix}gml_fit.csv", ["eps", "gap", "sector_gap", "fitted_rate", "predicted_rate", "rel_error"],
                  [[sw.eps, sw.gap, sw.sector_gap, sw.rate, predicted, rel]])
    run.check("overlap", abs(sw.overlap), th["overlap"], kind=">=")
    run.check("final_error", float(sw.abs_error[-1]), th["final_error"])
    run.check(f"rate_vs_eps_{ref_kind}", rel, th["rate_rel_error"])


def cmd_gml_sweep(run, cfg, rng):
    eps = cfg.get("eps", 0.1)
    tol = cfg.get("tolerance", DEFAULT_TOL)
    grid = cfg.get("T_grid")
    if cfg["model"]["preset"] == "qed_small":
        model = build_qed(cfg)
        sw = run_gml_qed(model, [("photon", 1, [0, 0, 0], 0.5), ("photon", 1, [0, 0, 0], -0.5)],
                         eps=eps, T_grid=grid, tol=tol)
    elif cfg["model"]["preset"] == "gml_abstract":
        m = cfg["model"]
        s, ops = gml_abstract_problem(rng, m.get("dim", 16), m.get("coupling", 0.25))
        sw = gml_sweep(s.h0, s.a, ops, eps=eps, T_grid=grid, tol=tol)
    else:
        raise ConfigError("gml-sweep needs preset 'gml_abstract' or 'qed_small'")
    _sweep_report(run, cfg, sw)


def cmd_qed_demo(run, cfg, rng):
    if cfg["model"]["preset"] != "qed_small":
        raise ConfigError("qed-demo needs preset 'qed_small'")
    cmd_certify(run, cfg, rng)
    model = build_qed(cfg)
    sw = run_gml_qed(model, [("photon", 1, [0, 0, 0], 0.5), ("photon", 1, [0, 0, 0], -0.5)],
                     eps=cfg.get("eps", 0.1), T_grid=cfg.get("T_grid"), tol=cfg.get("tolerance", DEFAULT_TOL))
    _sweep_report(run, cfg, sw)


COMMANDS = {
    "certify": cmd_certify,
    "dyson-check": cmd_dyson_check,
    "properties": cmd_properties,
    "gml-sweep": cmd_gml_sweep,
    "qed-demo": cmd_qed_demo,
}


# ---------------------------------------------------------------------------
# entry point


def run(subcommand, config_path, out_dir=None, seed=None, quiet=False):
    """Execute one subcommand; returns the exit code."""
    logging.basicConfig(level=logging.WARNING if quiet else logging.INFO, format="%(message)s", force=True)
    cfg, rc = None, 2
    out = Path(out_dir) if out_dir else Path("cdyson-out")
    runner = Run(subcommand, None, out, seed)
    try:
        if subcommand not in COMMANDS:
            raise ConfigError(f"unknown subcommand {subcommand!r}")
        cfg = load_config(config_path)
        if seed is not None:
            cfg["seed"] = int(seed)
        if out_dir is None and "output" in cfg and "dir" in cfg["output"]:
            runner.out = Path(cfg["output"]["dir"])
        runner.cfg, runner.seed = cfg, cfg.get("seed")
        rng = np.random.default_rng(cfg.get("seed", 0))
        t0 = time.perf_counter()
        COMMANDS[subcommand](runner, cfg, rng)
        runner.notes["seconds"] = round(time.perf_counter() - t0, 3)
        failed = runner.first_failure()
        if failed:
            raise CheckFailure(f"check {failed!r} failed")
        runner.write_manifest("pass")
        rc = 0
    except ConfigError as exc:
        runner.write_manifest("config_error", str(exc))
        log.error("config error: %s", exc)
        rc = 2
    except CheckFailure as exc:
        runner.write_manifest("fail", str(exc))
        log.error("%s", exc)
        rc = 1
    except CDysonError as exc:
        # a numerical guard tripped: the run cannot vouch for its result
        runner.checks.append({"name": type(exc).__name__, "value": None, "threshold": None,
                              "relation": "raised", "passed": False})
        runner.write_manifest("fail", f"{type(exc).__name__}: {exc}")
        log.error("%s: %s", type(exc).__name__, exc)
        rc = 1
    return rc


def build_parser():
    p = argparse.ArgumentParser(prog="cdyson", description="Complex-time Dyson series experiments.")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", required=True, help="JSON experiment config")
    p.add_argument("--out", default=None, help="output directory (overrides config output.dir)")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (overrides config seed)")
    p.add_argument("--quiet", action="store_true", help="only report errors")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        print("seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    return run(args.subcommand, args.config, args.out, args.seed, args.quiet)


if __name__ == "__main__":
    sys.exit(main())
