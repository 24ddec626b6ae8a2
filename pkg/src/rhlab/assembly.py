"""Pipeline assembly: lower-bound constants, experiment configs, persistence.

Combines barrier certificates, packing counts, and curve statistics into the
partial lower-bound constant for expected component counts, and hosts the
experiment runner behind the command line: flat key = value configs, RFC-4180
CSV artifacts, and a JSON manifest naming seed, versions, and wall time.
Certificate masses live on the log scale as well as in floats, because
erfc(M)/4 underflows for desk-scale M.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import time
from dataclasses import dataclass

import numpy as np

from . import __version__
from .ensembles import AffinePolynomial, EnsembleSpec
from .errors import ConfigError, NumericalFailure
from .fubini import vol_fs_rpn, vol_round_rpn
from .packing import Manifold, euclidean_ball_volume, packing_sweep
from .transversality import (
    BarrierCertificate,
    HypersurfaceModel,
    SupNormEstimates,
    assemble_certificate,
    estimate_c1_c2,
    isotopy_trap_check,
    presence_probability_mc,
)

__all__ = [
    "SigmaCatalogEntry",
    "LowerBoundReport",
    "compute_c_sigma",
    "log_c_sigma",
    "default_models",
    "build_catalog_entry",
    "lower_bound_report",
    "run_experiment",
    "parse_config",
]


# ------------------------------------------------------------- sigma catalog

def default_models() -> dict:
    """Plane-curve models exercising the distinct nesting signatures.

    Configurations stay inside radius ~1 so the peak-section decay factor
    exp(-|y|^2/2) on the tubes keeps the rescaled constants above the 0.5
    acceptance floor; tube levels sit below each model's smallest critical
    value of |P| so that 0 stays regular on U.
    """
    circle = AffinePolynomial.from_terms(
        2, 2, {(0, 0): -1.0, (2, 0): 1.0, (0, 2): 1.0}
    )
    # ((x-0.6)^2 + y^2 - 0.09)((x+0.6)^2 + y^2 - 0.09): |P|(0) = 0.073
    two_far = _product_of_circles(((0.6, 0.0, 0.3), (-0.6, 0.0, 0.3)))
    # (x^2 + y^2 - 0.45^2)(x^2 + y^2 - 0.81): saddle value |P| = 0.092
    two_nested = _product_of_circles(((0.0, 0.0, 0.45), (0.0, 0.0, 0.9)))
    return {
        "one_oval": HypersurfaceModel(circle, (0,), R=2.0, delta_K=0.2, delta_U=0.4,
                                      name="one_oval"),
        "two_nonnested": HypersurfaceModel(two_far, (0, 0), R=2.0, delta_K=0.025,
                                           delta_U=0.05, name="two_nonnested"),
        "two_nested": HypersurfaceModel(two_nested, (0, 1), R=2.0, delta_K=0.03,
                                        delta_U=0.06, name="two_nested"),
    }


def _product_of_circles(circles) -> AffinePolynomial:
    terms = {(0, 0): 1.0}
    for cx, cy, r in circles:
        factor = {
            (2, 0): 1.0, (0, 2): 1.0,
            (1, 0): -2.0 * cx, (0, 1): -2.0 * cy,
            (0, 0): cx * cx + cy * cy - r * r,
        }
        new = {}
        for ea, ca in terms.items():
            for eb, cb in factor.items():
                key = (ea[0] + eb[0], ea[1] + eb[1])
                new[key] = new.get(key, 0.0) + ca * cb
        terms = new
    degree = max(sum(e) for e in terms)
    return AffinePolynomial.from_terms(2, degree, terms)


def compute_c_sigma(c_tilde: float, n: int, R: float) -> float:
    """c_tilde / (2^n Vol_eucl B(0, R))."""
    if c_tilde < 0 or R <= 0 or n < 1:
        raise ValueError("c_tilde must be >= 0, R > 0, n >= 1")
    return c_tilde / (2**n * euclidean_ball_volume(n, R))


def log_c_sigma(log_c_tilde: float, n: int, R: float) -> float:
    return log_c_tilde - n * math.log(2.0) - math.log(euclidean_ball_volume(n, R))


@dataclass(frozen=True)
class SigmaCatalogEntry:
    name: str
    model: HypersurfaceModel
    betti: tuple  # (b_0(Sigma), b_1(Sigma)) for the plane-curve models
    certificate: BarrierCertificate
    R: float
    c_sigma: float
    log_c_sigma: float

    def __post_init__(self):
        want = compute_c_sigma(self.certificate.c_tilde, self.model.n, self.R)
        if not math.isclose(self.c_sigma, want, rel_tol=1e-12, abs_tol=1e-320):
            raise ValueError("c_sigma must recompute from its factors")
        if not (self.log_c_sigma < 0 and math.isfinite(self.log_c_sigma)):
            raise ValueError("log c_sigma must witness positivity")


def build_catalog_entry(name: str, model: HypersurfaceModel, d: int,
                        sup_estimates: SupNormEstimates | None = None,
                        trials: int = 300, seed: int = 0) -> SigmaCatalogEntry:
    cert = assemble_certificate(model, d, sup_estimates=sup_estimates,
                                trials=trials, seed=seed)
    k = len(model.sigma_spec)  # components of Sigma; each circle adds 1 to b0 and b1
    return SigmaCatalogEntry(
        name=name, model=model, betti=(k, k), certificate=cert, R=model.R,
        c_sigma=compute_c_sigma(cert.c_tilde, model.n, model.R),
        log_c_sigma=log_c_sigma(cert.log_c_tilde, model.n, model.R),
    )


@dataclass(frozen=True)
class LowerBoundReport:
    n: int
    i: int
    partial_c_i_minus: float
    log_partial_c_i_minus: float
    empirical_normalized: dict  # d -> mean_b0 / (sqrt(d)^n Vol_FS RP^n)
    empirical_raw: dict         # d -> mean_b0 / sqrt(d)^n
    c_plus_total: float
    c_plus_i: float
    verdicts: dict

    @property
    def all_pass(self) -> bool:
        return all(self.verdicts.values())


def lower_bound_report(catalog: list, matrix_table, curve_stats: list,
                       i: int = 0) -> LowerBoundReport:
    """Assemble partial c_i^- and check the desk-scale sandwich.

    catalog: SigmaCatalogEntry list; matrix_table: DetExpectationTable at
    matching n; curve_stats: BettiStats list. All at n = 2.
    """
    n = 2
    for e in catalog:
        if e.model.n != n:
            raise ValueError("catalog entry dimension mismatch")
    if matrix_table is not None and matrix_table.size != n - 1:
        raise ValueError("matrix table size must be n - 1")
    partial = sum(e.c_sigma * e.betti[i] for e in catalog)
    if catalog:
        log_partial = max(
            e.log_c_sigma + math.log(e.betti[i]) for e in catalog if e.betti[i] > 0
        )  # lower bound on the log of the sum; exact enough as a positivity witness
    else:
        log_partial = -math.inf
    vol = vol_fs_rpn(n)
    emp_norm = {s.d: s.mean_b0 / (math.sqrt(s.d) ** n * vol) for s in curve_stats}
    emp_raw = {s.d: s.mean_b0 / math.sqrt(s.d) ** n for s in curve_stats}
    c_plus_total = float(matrix_table.total) if matrix_table is not None else math.nan
    c_plus_i = float(matrix_table.c_plus[i]) if matrix_table is not None else math.nan
    verdicts = {}
    # vacuously true for an empty catalog (partial bound 0 bounds nothing)
    verdicts["partial_positive"] = math.isfinite(log_partial) if catalog else True
    if emp_norm:
        low = min(emp_norm.values())
        verdicts["partial_below_empirical"] = partial <= low or log_partial < math.log(max(low, 1e-300))
        if matrix_table is not None:
            verdicts["empirical_below_c_plus"] = max(emp_norm.values()) <= c_plus_total
    return LowerBoundReport(
        n=n, i=i, partial_c_i_minus=partial, log_partial_c_i_minus=log_partial,
        empirical_normalized=emp_norm, empirical_raw=emp_raw,
        c_plus_total=c_plus_total, c_plus_i=c_plus_i, verdicts=verdicts,
    )


# ----------------------------------------------------------------- config IO

_SCHEMAS = {
    "roots1d": {
        "kind": (str, True), "degree": (int, True), "trials": (int, True),
        "method": (str, False),
    },
    "matrixstats": {
        "m_values": ("int_list", True), "trials": (int, True),
        "alpha": (float, False), "tail_n_values": ("int_list", False),
    },
    "fubini": {
        "p_coeffs": ("float_list", True), "p_degree": (int, True),
        "d_values": ("int_list", True), "radius_factors": ("float_list", True),
    },
    "barrier": {
        "p_coeffs": ("float_list", True), "p_degree": (int, True),
        "delta_k": (float, True), "delta_u": (float, True), "r": (float, True),
        "sigma_spec": ("int_list", True), "d": (int, True),
        "trials": (int, False), "presence_degrees": ("int_list", False),
        "presence_trials": (int, False), "isotopy_trials": (int, False),
    },
    "curves2d": {
        "degree": (int, True), "trials": (int, True), "level": (int, False),
        "dump_polyline": (bool, False),
    },
    "packing": {
        "manifold": (str, True), "dim": (int, True), "epsilons": ("float_list", True),
    },
    "report": {
        "certificate_degree": (int, True), "curve_degrees": ("int_list", True),
        "curve_trials": (int, True), "matrix_trials": (int, True),
        "certificate_trials": (int, False),
    },
}


def _convert(raw: str, kind, key: str, lineno: int):
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is bool:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if kind == "int_list":
            return [int(v) for v in raw.split(",") if v.strip() != ""]
        if kind == "float_list":
            return [float(v) for v in raw.split(",") if v.strip() != ""]
        return raw
    except ValueError as exc:
        raise ConfigError(f"line {lineno}: field {key!r}: cannot parse {raw!r}") from exc


def parse_config(path: str) -> dict:
    """Flat key = value config with '#' comments; typed by experiment schema."""
    entries = {}
    lines = {}
    try:
        text = open(path, encoding="utf-8").read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = body.partition("=")
        key = key.strip()
        if key in entries:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        entries[key] = raw.strip()
        lines[key] = lineno
    if "experiment" not in entries:
        raise ConfigError("config must name an 'experiment'")
    exp = entries.pop("experiment")
    if exp not in _SCHEMAS:
        raise ConfigError(
            f"line {lines['experiment']}: unknown experiment {exp!r} "
            f"(known: {', '.join(sorted(_SCHEMAS))})"
        )
    schema = _SCHEMAS[exp]
    seed = None
    if "seed" in entries:
        seed = int(_convert(entries.pop("seed"), int, "seed", lines.get("seed", 0)))
    out = {"experiment": exp, "seed": seed}
    for key, raw in entries.items():
        if key not in schema:
            raise ConfigError(f"line {lines[key]}: unknown field {key!r} for {exp}")
        out[key] = _convert(raw, schema[key][0], key, lines[key])
    for key, (kind, required) in schema.items():
        if required and key not in out:
            raise ConfigError(f"missing required field {key!r} for experiment {exp}")
    return out


# ------------------------------------------------------------- artifact sinks

def _atomic_write(path: str, data: bytes):
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def _write_csv(path: str, header: list, rows: list):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    _atomic_write(path, buf.getvalue().encode())


def _write_json(path: str, obj):
    _atomic_write(path, (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode())


# ------------------------------------------------------------ experiment runs

def _exp_roots1d(cfg, seed, out_dir):
    from .roots1d import expected_roots_crofton, expected_roots_mc

    spec = EnsembleSpec(cfg["kind"], 2, cfg["degree"], seed=seed)
    est = expected_roots_mc(spec, cfg["trials"], method=cfg.get("method", "hybrid"))
    cro = expected_roots_crofton(spec)
    path = os.path.join(out_dir, "roots1d.csv")
    _write_csv(path, ["kind", "d", "trials", "mean", "std_error", "crofton_value"],
               [[cfg["kind"], cfg["degree"], cfg["trials"], est.mean, est.std_error, cro]])
    return [path]


def _exp_matrixstats(cfg, seed, out_dir):
    from .matrixstats import estimate_e_table, gamma_asymptote

    rows = []
    for m in cfg["m_values"]:
        t = estimate_e_table(m, cfg["trials"], seed=seed)
        ratio = t.total / gamma_asymptote(m + 1)
        for i in range(m + 1):
            rows.append([m, i, float(t.e_hat[i]), float(t.std_errors[i]),
                         float(t.c_plus[i]), t.total, ratio])
    path = os.path.join(out_dir, "matrixstats.csv")
    _write_csv(path, ["m", "i", "e_hat", "std_error", "c_plus", "total", "gamma_ratio"], rows)
    return [path]


def _exp_fubini(cfg, seed, out_dir):
    from .fubini import peak_mass_fraction

    P = AffinePolynomial(1, cfg["p_degree"], np.array(cfg["p_coeffs"], dtype=float))
    rows = []
    for d in cfg["d_values"]:
        for R in cfg["radius_factors"]:
            rows.append([d, R, peak_mass_fraction(P, d, R)])
    path = os.path.join(out_dir, "fubini.csv")
    _write_csv(path, ["d", "radius", "mass_fraction"], rows)
    return [path]


def _model_from_config(cfg) -> HypersurfaceModel:
    P = AffinePolynomial(2, cfg["p_degree"], np.array(cfg["p_coeffs"], dtype=float))
    return HypersurfaceModel(
        P=P, sigma_spec=tuple(cfg["sigma_spec"]), R=cfg["r"],
        delta_K=cfg["delta_k"], delta_U=cfg["delta_u"],
    )


def _exp_barrier(cfg, seed, out_dir):
    model = _model_from_config(cfg)
    d = cfg["d"]
    cert = assemble_certificate(model, d, trials=cfg.get("trials", 300), seed=seed)
    payload = {
        "delta": cert.delta, "epsilon": cert.epsilon, "C1": cert.C1, "C2": cert.C2,
        "M": cert.M, "c_tilde": cert.c_tilde, "log_c_tilde": cert.log_c_tilde,
        "d": d, "raw_delta": cert.raw_delta, "raw_epsilon": cert.raw_epsilon,
    }
    if cfg.get("presence_degrees"):
        presence = {}
        for dd in cfg["presence_degrees"]:
            est = presence_probability_mc(model, dd, cfg.get("presence_trials", 500),
                                          seed=seed)
            presence[str(dd)] = {
                "probability": est.probability, "std_error": est.std_error,
                "indeterminate_fraction": est.indeterminate_fraction,
            }
        payload["presence"] = presence
    if cfg.get("isotopy_trials"):
        payload["isotopy_fraction"] = isotopy_trap_check(
            model, cert, d, trials=cfg["isotopy_trials"], seed=seed
        )
    path = os.path.join(out_dir, "certificate.json")
    _write_json(path, payload)
    return [path]


def _exp_curves2d(cfg, seed, out_dir):
    from .curves2d import betti_statistics, extract_topology, spherical_grid
    from .ensembles import sample

    d = cfg["degree"]
    stats = betti_statistics(d, cfg["trials"], level=cfg.get("level"), seed=seed)
    level = stats.level
    grid = spherical_grid(level)
    spec = EnsembleSpec("kostlan", 3, d, seed=seed)
    rows = []
    for t in range(cfg["trials"]):
        topo = extract_topology(sample(spec, t), grid)
        rows.append([d, t, topo.b0, topo.n_noncontractible, topo.flagged])
    rows.append([d, "aggregate", stats.mean_b0, stats.std_error, stats.flagged_fraction])
    path = os.path.join(out_dir, "curves2d.csv")
    _write_csv(path, ["d", "trial", "b0", "n_noncontractible", "flagged"], rows)
    artifacts = [path]
    if cfg.get("dump_polyline"):
        poly = _polyline_of_first_component(sample(spec, 0), grid)
        p2 = os.path.join(out_dir, "curve_polyline.json")
        _write_json(p2, poly)
        artifacts.append(p2)
    return artifacts


def _polyline_of_first_component(Q, grid):
    from .curves2d import _trace_cycles

    from .curves2d import evaluate_on_vertices

    vals = evaluate_on_vertices(Q, grid.vertices)
    signs = vals > 0
    ev = grid.tri_edge_verts
    crossed_edges = signs[ev[:, :, 0]] != signs[ev[:, :, 1]]
    crossed = np.flatnonzero(crossed_edges.any(axis=1))
    if len(crossed) == 0:
        return {"points": []}
    label, _, _ = _trace_cycles(crossed_edges, grid, crossed)
    tris = [t for t in crossed if label[t] == 0]
    pts = []
    for t in tris:
        for k in range(3):
            if crossed_edges[t, k]:
                a, b = ev[t, k]
                va, vb = vals[a], vals[b]
                lam = va / (va - vb)
                p = grid.vertices[a] + lam * (grid.vertices[b] - grid.vertices[a])
                pts.append((p / np.linalg.norm(p)).tolist())
                break
    return {"points": pts}


def _exp_packing(cfg, seed, out_dir):
    kind = cfg["manifold"].lower()
    if kind not in ("sphere", "projective"):
        raise ConfigError(f"manifold must be sphere or projective, got {kind!r}")
    man = Manifold(kind, cfg["dim"])
    stats = packing_sweep(man, cfg["epsilons"], seed=seed)
    rows = [[f"{kind}{man.n}", s.epsilon, s.count, s.normalized, s.bound] for s in stats]
    path = os.path.join(out_dir, "packing.csv")
    _write_csv(path, ["manifold", "epsilon", "N", "normalized", "bound"], rows)
    return [path]


def _exp_report(cfg, seed, out_dir):
    from .curves2d import betti_statistics
    from .matrixstats import estimate_e_table

    d = cfg["certificate_degree"]
    models = default_models()
    sup = estimate_c1_c2([d], cfg.get("certificate_trials", 300), 2.0, seed=seed)
    catalog = [
        build_catalog_entry(name, model, d, sup_estimates=sup, seed=seed)
        for name, model in models.items()
    ]
    table = estimate_e_table(1, cfg["matrix_trials"], seed=seed)
    stats = [betti_statistics(dd, cfg["curve_trials"], seed=seed)
             for dd in cfg["curve_degrees"]]
    report = lower_bound_report(catalog, table, stats, i=0)
    payload = {
        "n": report.n, "i": report.i,
        "partial_c_i_minus": report.partial_c_i_minus,
        "log_partial_c_i_minus": report.log_partial_c_i_minus,
        "empirical_normalized": {str(k): v for k, v in report.empirical_normalized.items()},
        "empirical_raw": {str(k): v for k, v in report.empirical_raw.items()},
        "c_plus_total": report.c_plus_total,
        "c_plus_i": report.c_plus_i,
        "verdicts": report.verdicts,
        "vol_fs_rp2": vol_fs_rpn(2),
        "vol_round_rp2": vol_round_rpn(2),
        "catalog": {
            e.name: {"c_sigma": e.c_sigma, "log_c_sigma": e.log_c_sigma,
                     "betti": list(e.betti), "M": e.certificate.M}
            for e in catalog
        },
    }
    path = os.path.join(out_dir, "report.json")
    _write_json(path, payload)
    rows = [[e.name, e.certificate.M, e.log_c_sigma, e.betti[0]] for e in catalog]
    p2 = os.path.join(out_dir, "report_catalog.csv")
    _write_csv(p2, ["name", "M", "log_c_sigma", "b0"], rows)
    return [path, p2]


_RUNNERS = {
    "roots1d": _exp_roots1d,
    "matrixstats": _exp_matrixstats,
    "fubini": _exp_fubini,
    "barrier": _exp_barrier,
    "curves2d": _exp_curves2d,
    "packing": _exp_packing,
    "report": _exp_report,
}


def run_experiment(config_path: str, out_dir: str = ".", seed: int | None = None) -> dict:
    """Parse, dispatch, and persist one experiment; returns the manifest.

    A numerical failure still leaves a manifest behind (status
    "numerical-failure" with the error and any partial estimate) before the
    exception propagates to the caller.
    """
    cfg = parse_config(config_path)
    effective_seed = seed if seed is not None else (cfg.get("seed") or 0)
    os.makedirs(out_dir, exist_ok=True)
    digest = hashlib.sha256(open(config_path, "rb").read()).hexdigest()
    manifest = {
        "experiment": cfg["experiment"],
        "config_path": os.path.abspath(config_path),
        "config_sha256": digest,
        "seed": effective_seed,
        "versions": {"rhlab": __version__, "numpy": np.__version__},
    }
    t0 = time.perf_counter()
    try:
        artifacts = _RUNNERS[cfg["experiment"]](cfg, effective_seed, out_dir)
    except NumericalFailure as exc:
        manifest.update({
            "status": "numerical-failure",
            "error": str(exc),
            "partial": exc.partial,
            "wall_time_s": time.perf_counter() - t0,
            "artifacts": [],
        })
        _write_json(os.path.join(out_dir, "manifest.json"), manifest)
        raise
    manifest.update({
        "status": "ok",
        "wall_time_s": time.perf_counter() - t0,
        "artifacts": [os.path.basename(a) for a in artifacts],
    })
    _write_json(os.path.join(out_dir, "manifest.json"), manifest)
    return manifest
