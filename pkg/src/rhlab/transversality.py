"""The barrier pipeline: quantitative transversality made executable.

For a plane-curve model (affine P with 0 a regular value, tubular
neighborhoods K, U encoded as |P|-sublevel sets inside B(0, R)):

1. (delta, eps): grid minima of |P| on U \\ K and of ||grad P|| where
   |P| <= delta, refined until stable.
2. (delta', eps'): the same bounds verified for the degree-d peak section,
   compensated by the section's normalization so they are comparable to
   (delta, eps). In the chart the assembled section satisfies
   sigma(1, y/sqrt(d)) = sqrt(d)^n / nu * P(y) exactly, so the compensated
   quantities are
       psi(y) = |P(y)| (1 + |y|^2/d)^(-d/2)
       phi(y) = (1 + |y|^2/d)^(-d/2) ||grad P(y) - y P(y)/(1 + |y|^2/d)||,
   the Fubini-Study-normalized section value and chart gradient.
3. (C1, C2): Monte Carlo sup-norm expectation constants over B(0, R/sqrt(d)),
   inflated by three standard errors; the Markov-filtered mass at 4 C1, 4 C2
   must be at least one half.
4. M = max(4 C1/delta', 4 C2/eps') and c_tilde = erfc(M)/4 > 0, kept in log
   form as well since M ~ 15-30 puts erfc near the underflow edge.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, log_ndtr

from .curves2d import ball_signature, plane_curve_components
from .ensembles import (
    AffinePolynomial,
    EnsembleSpec,
    affine_derivative,
    monomial_matrix,
    multi_indices,
    sample_batch,
)
from .errors import CertificateFailure
from .fubini import ProjectivePoint, build_peak_section, fs_l2_norm_sq_parseval, rotation_to

__all__ = [
    "HypersurfaceModel",
    "BarrierCertificate",
    "PresenceEstimate",
    "RescaledCheck",
    "SupNormEstimates",
    "estimate_delta_epsilon",
    "rescaled_constants",
    "estimate_c1_c2",
    "markov_filter_mass",
    "assemble_certificate",
    "presence_probability_mc",
    "isotopy_trap_check",
]

RESCALE_FLOOR = 0.5  # delta', eps' must retain at least half of delta, eps
GRID_SAFETY = 0.9    # safety factor on grid minima


@dataclass(frozen=True)
class HypersurfaceModel:
    """Union of compact components of P^(-1)(0) with tubular data.

    K = {|P| <= delta_K} and U = {|P| < delta_U}, both intersected with
    B(0, R). sigma_spec is the nesting signature of the selected components
    (sorted tuple of containment depths, e.g. (0,) = one oval).
    """

    P: AffinePolynomial
    sigma_spec: tuple
    R: float
    delta_K: float
    delta_U: float
    name: str = ""

    def __post_init__(self):
        if not 0 < self.delta_K < self.delta_U:
            raise ValueError("need 0 < delta_K < delta_U")
        if self.R <= 0:
            raise ValueError("R must be positive")
        object.__setattr__(self, "sigma_spec", tuple(self.sigma_spec))
        gmins = []
        for res in (128, 256, 512):
            pts = _ball_points(self.R, res)
            vals = self.P(pts)
            inside_u = np.abs(vals) <= self.delta_U
            if not inside_u.any():
                # legal only for the trivial empty model (e.g. P = 1): the
                # presence event is then "no closed component in the ball"
                if self.sigma_spec != ():
                    raise CertificateFailure("U is empty on the validation grid")
                return
            g = _gradient_values(self.P, pts[inside_u])
            gmins.append(float(np.linalg.norm(g, axis=1).min()))
        # a vanishing gradient inside U makes the grid minimum track the grid
        # spacing; a regular model's minimum is grid-independent
        if gmins[-1] < 1e-12 or gmins[-1] < 0.7 * gmins[0]:
            raise CertificateFailure(
                f"0 is not a regular value of P on U (grid min |grad| "
                f"{gmins[0]:.3e} -> {gmins[-1]:.3e} under refinement)"
            )

    @property
    def n(self) -> int:
        return self.P.nvars


def _ball_points(R: float, res: int) -> np.ndarray:
    lin = np.linspace(-R, R, res)
    X, Y = np.meshgrid(lin, lin, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=-1)
    return pts[(pts**2).sum(axis=1) <= R * R]


def _gradient_values(P: AffinePolynomial, pts: np.ndarray) -> np.ndarray:
    out = np.empty_like(pts)
    for j in range(P.nvars):
        out[:, j] = affine_derivative(P, j)(pts)
    return out


def estimate_delta_epsilon(model: HypersurfaceModel, grid_resolution: int = 192,
                           max_resolution: int = 3072):
    """(delta, eps) of the first proof step, from refined grid minima."""
    prev = None
    res = grid_resolution
    while res <= max_resolution:
        pts = _ball_points(model.R, res)
        vals = model.P(pts)
        shell = (np.abs(vals) > model.delta_K) & (np.abs(vals) < model.delta_U)
        if not shell.any():
            raise CertificateFailure("U \\ K meets no grid point; K/U too tight")
        delta = GRID_SAFETY * float(np.abs(vals[shell]).min())
        low = np.abs(vals) <= delta
        if not low.any():
            raise CertificateFailure("{|P| <= delta} meets no grid point")
        g = _gradient_values(model.P, pts[low])
        eps = GRID_SAFETY * float(np.linalg.norm(g, axis=1).min())
        if eps <= 0:
            raise CertificateFailure("gradient vanished inside the delta-tube")
        if prev is not None:
            d0, e0 = prev
            if abs(delta - d0) < 0.01 * d0 and abs(eps - e0) < 0.01 * e0:
                return delta, eps
        prev = (delta, eps)
        res *= 2
    raise CertificateFailure(
        f"grid minima did not stabilize below resolution {max_resolution}"
    )


def _psi_phi(model: HypersurfaceModel, pts: np.ndarray, d: int):
    """Compensated FS section value and chart-gradient norm at y in B(0,R)."""
    vals = model.P(pts)
    g = _gradient_values(model.P, pts)
    s = 1.0 + (pts**2).sum(axis=1) / d
    w = s ** (-d / 2.0)
    psi = np.abs(vals) * w
    corr = g - pts * (vals / s)[:, None]
    phi = w * np.linalg.norm(corr, axis=1)
    return psi, phi


@dataclass(frozen=True)
class RescaledCheck:
    d: int
    delta_prime: float
    epsilon_prime: float
    delta_ratio: float
    eps_ratio: float
    ok: bool


def rescaled_constants(model: HypersurfaceModel, d: int, delta: float, eps: float,
                       grid_resolution: int = 384) -> RescaledCheck:
    """Largest (delta', eps') verified for the degree-d section on the shrunk
    tubes, reported relative to the model constants; fails below the 0.5 floor.
    """
    if d < model.P.degree:
        raise ValueError("d must be at least deg P")
    pts = _ball_points(model.R, grid_resolution)
    vals = model.P(pts)
    in_u = np.abs(vals) < model.delta_U
    shell = (np.abs(vals) > model.delta_K) & in_u
    psi, phi = _psi_phi(model, pts, d)
    delta_prime = float(psi[shell].min())
    low = (psi <= delta) & in_u  # the gradient bound is claimed on U_d only
    if not low.any():
        raise CertificateFailure("compensated tube {psi <= delta} met no grid point")
    eps_prime = float(phi[low].min())
    dr, er = delta_prime / delta, eps_prime / eps
    ok = dr >= RESCALE_FLOOR and er >= RESCALE_FLOOR
    if not ok:
        raise CertificateFailure(
            f"rescaled constants lost too much: delta'/delta = {dr:.3f}, "
            f"eps'/eps = {er:.3f} (floor {RESCALE_FLOOR})"
        )
    return RescaledCheck(d=d, delta_prime=delta_prime, epsilon_prime=eps_prime,
                         delta_ratio=dr, eps_ratio=er, ok=ok)


# ------------------------------------------------------- sup-norm machinery

def _chart_ball_grid(R_over_sqrtd: float, n_radial: int = 14, n_angular: int = 28):
    r = R_over_sqrtd * np.arange(1, n_radial + 1) / n_radial
    th = 2 * math.pi * np.arange(n_angular) / n_angular
    z = np.concatenate([
        np.zeros((1, 2)),
        np.stack([np.outer(r, np.cos(th)).ravel(), np.outer(r, np.sin(th)).ravel()], axis=-1),
    ])
    return z


def _section_value_matrices(d: int, z: np.ndarray):
    """Matrices evaluating sigma(1,z) and its two chart partials at rows z."""
    E = multi_indices(3, d)
    pts = np.concatenate([np.ones((len(z), 1)), z], axis=1)
    M0 = monomial_matrix(E, pts)
    mats = [M0]
    for j in (1, 2):
        Ej = E.copy()
        Ej[:, j] = np.maximum(Ej[:, j] - 1, 0)
        Mj = monomial_matrix(Ej, pts) * E[:, j][None, :]
        mats.append(Mj)
    w = (1.0 + (z**2).sum(axis=1)) ** (-d / 2.0)
    return mats, w


def _sup_norms(C: np.ndarray, mats, w, z, d: int):
    """Per-sample sup over the grid of |f| and ||grad f|| (FS-normalized)."""
    M0, M1, M2 = mats
    v0 = C @ M0.T
    v1 = C @ M1.T
    v2 = C @ M2.T
    s = 1.0 + (z**2).sum(axis=1)
    f = v0 * w[None, :]
    gx = w[None, :] * (v1 - z[None, :, 0] * v0 / s[None, :] * d)
    gy = w[None, :] * (v2 - z[None, :, 1] * v0 / s[None, :] * d)
    sup_f = np.abs(f).max(axis=1)
    sup_g = np.sqrt(gx**2 + gy**2).max(axis=1)
    return sup_f, sup_g


@dataclass(frozen=True)
class SupNormEstimates:
    C1: float
    C2: float
    per_degree: tuple  # (d, mean_sup_f / sqrt(d)^n, se_f, mean_sup_g / sqrt(d)^(n+1), se_g)


def estimate_c1_c2(d_values, trials: int, R: float, seed: int = 0) -> SupNormEstimates:
    """Monte Carlo constants with E sup_B |sigma| <= C1 sqrt(d)^n and
    E sup_B |d sigma| <= C2 sqrt(d)^(n+1) across the given degrees (n = 2);
    each mean is inflated by three standard errors before taking the max."""
    rows = []
    c1 = 0.0
    c2 = 0.0
    for d in d_values:
        z = _chart_ball_grid(R / math.sqrt(d))
        mats, w = _section_value_matrices(d, z)
        spec = EnsembleSpec("kostlan", 3, d, seed=seed)
        C = sample_batch(spec, d, trials)
        sup_f, sup_g = _sup_norms(C, mats, w, z, d)
        sf = d  # sqrt(d)^2
        sg = d ** 1.5
        m_f, se_f = sup_f.mean() / sf, sup_f.std(ddof=1) / math.sqrt(trials) / sf
        m_g, se_g = sup_g.mean() / sg, sup_g.std(ddof=1) / math.sqrt(trials) / sg
        rows.append((d, m_f, se_f, m_g, se_g))
        c1 = max(c1, m_f + 3 * se_f)
        c2 = max(c2, m_g + 3 * se_g)
    return SupNormEstimates(C1=c1, C2=c2, per_degree=tuple(rows))


def markov_filter_mass(C1: float, C2: float, d: int, trials: int, R: float,
                       seed: int = 0) -> float:
    """Empirical mass of {sup |sigma| <= 4 C1 sqrt(d)^n, sup |d sigma| <=
    4 C2 sqrt(d)^(n+1)}; at least one half when C1, C2 bound the means."""
    z = _chart_ball_grid(R / math.sqrt(d))
    mats, w = _section_value_matrices(d, z)
    spec = EnsembleSpec("kostlan", 3, d, seed=seed)
    C = sample_batch(spec, 7 * d + 1, trials)
    sup_f, sup_g = _sup_norms(C, mats, w, z, d)
    ok = (sup_f <= 4 * C1 * d) & (sup_g <= 4 * C2 * d**1.5)
    return float(ok.mean())


@dataclass(frozen=True)
class BarrierCertificate:
    delta: float
    epsilon: float
    C1: float
    C2: float
    M: float
    c_tilde: float
    log_c_tilde: float
    d: int
    raw_delta: float = float("nan")
    raw_epsilon: float = float("nan")

    def __post_init__(self):
        m = max(4 * self.C1 / self.delta, 4 * self.C2 / self.epsilon)
        if not math.isclose(m, self.M, rel_tol=1e-12):
            raise ValueError("M must equal max(4 C1/delta, 4 C2/epsilon)")
        want = 0.25 * erfc(self.M)
        if not (math.isclose(self.c_tilde, want, rel_tol=1e-12, abs_tol=1e-300)):
            raise ValueError("c_tilde must equal erfc(M)/4")
        if not self.log_c_tilde < 0:
            raise ValueError("log c_tilde must be finite and negative")


def log_quarter_erfc(M: float) -> float:
    """log(erfc(M)/4), stable for large M via the normal log-CDF."""
    return math.log(2.0) + float(log_ndtr(-math.sqrt(2.0) * M)) - math.log(4.0)


def section_scale(model: HypersurfaceModel, d: int) -> float:
    """nu * s: the factor between P-unit compensated constants and the
    constants satisfied by the unit-L2 peak section sigma_hat = sigma/s,
    where nu is the eq.-style normalization and s = ||sigma||_L2."""
    sec = build_peak_section(model.P, d, ProjectivePoint(_origin(model.n)))
    return sec.normalization * math.sqrt(fs_l2_norm_sq_parseval(sec.section))


def _origin(n: int) -> np.ndarray:
    v = np.zeros(n + 1)
    v[0] = 1.0
    return v


def assemble_certificate(model: HypersurfaceModel, d: int,
                         sup_estimates: SupNormEstimates | None = None,
                         trials: int = 300, seed: int = 0) -> BarrierCertificate:
    """Run all four steps at degree d and return the barrier constants.

    The stored delta, epsilon are the step-1 constants of the unit-L2
    section itself: the compensated grid minima delta', eps' (comparable to
    the model's delta, eps and subject to the 0.5 floor) divided by the
    section scale nu * s.
    """
    delta, eps = estimate_delta_epsilon(model)
    check = rescaled_constants(model, d, delta, eps)
    if sup_estimates is None:
        sup_estimates = estimate_c1_c2([d], trials, model.R, seed=seed)
    C1, C2 = sup_estimates.C1, sup_estimates.C2
    scale = section_scale(model, d)
    delta_sec = check.delta_prime / scale
    eps_sec = check.epsilon_prime / scale
    M = max(4 * C1 / delta_sec, 4 * C2 / eps_sec)
    return BarrierCertificate(
        delta=delta_sec, epsilon=eps_sec, C1=C1, C2=C2,
        M=M, c_tilde=0.25 * erfc(M), log_c_tilde=log_quarter_erfc(M),
        d=d, raw_delta=delta, raw_epsilon=eps,
    )


# ------------------------------------------------------------- presence test

@dataclass(frozen=True)
class PresenceEstimate:
    d: int
    trials: int
    hits: int
    probability: float
    std_error: float
    indeterminate_fraction: float


def presence_probability_mc(model: HypersurfaceModel, d: int, trials: int,
                            x: ProjectivePoint | None = None, seed: int = 0,
                            oversample: float = 2.0) -> PresenceEstimate:
    """Probability that the closed components of a random section's zero set
    fully contained in B(x, R/sqrt(d)) match the model's nesting signature.

    Trials whose in-ball components are too small for the grid to certify
    are excluded as indeterminate and reported.
    """
    if model.n != 2:
        raise ValueError("presence test is implemented for plane curves (n = 2)")
    if x is None:
        x = ProjectivePoint(np.array([1.0, 0.0, 0.0]))
    r0 = model.R / math.sqrt(d)
    res = max(32, int(math.ceil(2 * model.R * math.sqrt(d) * oversample)))
    lin = np.linspace(-r0, r0, res)
    Z1, Z2 = np.meshgrid(lin, lin, indexing="ij")
    zs = np.stack([Z1.ravel(), Z2.ravel()], axis=-1)
    disk = ((zs**2).sum(axis=1) <= r0 * r0).reshape(res, res)
    U = np.concatenate([np.ones((len(zs), 1)), zs], axis=1)
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    r = rotation_to(x)
    U = U @ r.T
    E = multi_indices(3, d)
    M = monomial_matrix(E, U)
    spec = EnsembleSpec("kostlan", 3, d, seed=seed)

    hits = 0
    indeterminate = 0
    batch = 256
    done = 0
    stream = 0
    target = tuple(model.sigma_spec)
    while done < trials:
        b = min(batch, trials - done)
        C = sample_batch(spec, stream, b)
        vals = C @ M.T
        for i in range(b):
            sig, flagged = ball_signature(vals[i].reshape(res, res), lin, disk)
            if flagged:
                indeterminate += 1
            elif sig == target:
                hits += 1
        done += b
        stream += 1
    valid = trials - indeterminate
    p = hits / valid if valid else float("nan")
    se = math.sqrt(p * (1 - p) / valid) if valid else float("nan")
    return PresenceEstimate(
        d=d, trials=trials, hits=hits, probability=p, std_error=se,
        indeterminate_fraction=indeterminate / trials,
    )


# --------------------------------------------------------------- isotopy trap

def _shell_edges(mask: np.ndarray):
    """Index pairs of 4-neighbor grid edges inside a boolean vertex mask."""
    H, W = mask.shape
    idx = np.arange(H * W).reshape(H, W)
    pairs = []
    right = mask[:, :-1] & mask[:, 1:]
    pairs.append(np.stack([idx[:, :-1][right], idx[:, 1:][right]], axis=1))
    down = mask[:-1, :] & mask[1:, :]
    pairs.append(np.stack([idx[:-1, :][down], idx[1:, :][down]], axis=1))
    return np.concatenate(pairs, axis=0)


def isotopy_trap_check(model: HypersurfaceModel, cert: BarrierCertificate, d: int,
                       trials: int = 200, seed: int = 0, n_t: int = 11,
                       grid_resolution: int = 120, max_attempts: int = 60,
                       a_override: float | None = None, tau_scale: float = 1.0):
    """Fraction of barrier-set samples whose homotopy a sigma_P + t tau keeps
    the zero set out of U_d \\ K_d and its component count in U_d constant.

    a defaults to M + |N(0, 1/2)|; tau is a Kostlan sample projected
    L2-orthogonally to the normalized peak section and resampled until both
    sup bounds hold. a_override and tau_scale exist for the negative control
    (a below M) and the trivial tau = 0 case.
    """
    if model.n != 2:
        raise ValueError("isotopy check is implemented for plane curves")
    sec = build_peak_section(model.P, d, ProjectivePoint(np.array([1.0, 0.0, 0.0])))
    s_norm = math.sqrt(fs_l2_norm_sq_parseval(sec.section))
    if s_norm < 1e-12:
        raise ValueError("peak section is numerically zero")
    sigma_hat = sec.section.coeffs / s_norm

    lin_y = np.linspace(-model.R, model.R, grid_resolution)
    Y1, Y2 = np.meshgrid(lin_y, lin_y, indexing="ij")
    ys = np.stack([Y1.ravel(), Y2.ravel()], axis=-1)
    pvals = model.P(ys)
    ball = (ys**2).sum(axis=1) <= model.R**2
    u_mask = (np.abs(pvals) < model.delta_U) & ball
    shell_mask = u_mask & (np.abs(pvals) > model.delta_K)
    # exact chart identity: sigma_hat(1, y/sqrt d) = d^(n/2) P(y) / (nu s)
    coef = float(d) / (sec.normalization * s_norm)
    hat_vals = coef * pvals
    zs = ys / math.sqrt(d)
    E = multi_indices(3, d)
    pts3 = np.concatenate([np.ones((len(zs), 1)), zs], axis=1)
    Mfull = np.empty((len(zs), len(E)))
    chunk = 4000
    for i in range(0, len(zs), chunk):
        Mfull[i : i + chunk] = monomial_matrix(E, pts3[i : i + chunk])

    edges = _shell_edges(shell_mask.reshape(grid_resolution, grid_resolution))
    zb = _chart_ball_grid(model.R / math.sqrt(d))
    mats, w = _section_value_matrices(d, zb)
    rng = np.random.default_rng((seed, 5))
    spec = EnsembleSpec("kostlan", 3, d, seed=seed)

    passes = 0
    ts = np.linspace(0.0, 1.0, n_t)
    from .ensembles import kostlan_weights

    wts2 = kostlan_weights(3, d) ** 2
    for trial in range(trials):
        # rejection sample tau in sigma^perp with both sup bounds
        for attempt in range(max_attempts):
            g = sample_batch(spec, 1000 + trial * max_attempts + attempt, 1)[0]
            inner = float((g * sigma_hat / wts2).sum()) / float((sigma_hat**2 / wts2).sum())
            tau = g - inner * sigma_hat
            sup_f, sup_g = _sup_norms(tau[None, :], mats, w, zb, d)
            if sup_f[0] <= 4 * cert.C1 * d and sup_g[0] <= 4 * cert.C2 * d**1.5:
                break
        else:
            raise CertificateFailure("tau rejection sampling exhausted attempts")
        tau = tau * tau_scale
        a = a_override if a_override is not None else cert.M + abs(rng.normal(0, math.sqrt(0.5)))
        tau_vals = Mfull @ tau

        good = True
        ncomp0 = None
        for t in ts:
            v = a * hat_vals + t * tau_vals
            if np.abs(v[shell_mask]).min() <= 0.0:
                good = False
                break
            sgn = v > 0
            if (sgn[edges[:, 0]] != sgn[edges[:, 1]]).any():
                good = False
                break
            comps = plane_curve_components(
                v.reshape(grid_resolution, grid_resolution), lin_y, lin_y,
                u_mask.reshape(grid_resolution, grid_resolution),
            )
            ncomp = len(comps)
            if ncomp0 is None:
                ncomp0 = ncomp
            elif ncomp != ncomp0:
                good = False
                break
        passes += good
    return passes / trials
