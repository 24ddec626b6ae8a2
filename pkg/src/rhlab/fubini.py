"""Fubini-Study geometry: pointwise/L2 norms, peak sections, concentration.

Conventions, fixed once for the whole package:

* The FS volume form is rescaled so Vol(CP^n) = 1. On the chart U_0 = C^n
  it is (n!/pi^n) (1 + |z|^2)^(-(n+1)) dLebesgue, which makes the weighted
  monomials w_alpha X^alpha with w_alpha = sqrt((d+n)!/(n! alpha!)) an
  exactly orthonormal basis.
* Geodesic distances use the same normalization: lengths shrink by
  fs_length_scale(n) = (n!/pi^n)^(1/(2n)) relative to the metric in which
  a projective line has area pi (equivalently, relative to the round unit
  sphere on real points). This is the single conversion constant between
  the unit-round and volume-normalized conventions.
* Peak sections are normalized so their L2 norm tends to one under the
  volume-1 convention: the denominator is sqrt(n! * sum_a P_a^2 a!), the
  volume-adapted version of the Gaussian integral of |P|^2 over C^n.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import lgamma

import numpy as np
from numpy.polynomial.legendre import leggauss

from .ensembles import (
    AffinePolynomial,
    EnsembleKind,
    EnsembleSpec,
    HomogeneousPolynomial,
    affine_multi_indices,
    evaluate,
    homogenize,
    kostlan_weights,
    monomial_matrix,
    multi_indices,
    sample_batch,
)
from .errors import NumericalFailure
from .roots1d import ExpectationEstimate

__all__ = [
    "ProjectivePoint",
    "PeakSection",
    "fs_length_scale",
    "vol_fs_rpn",
    "vol_round_rpn",
    "fs_pointwise_norm_sq",
    "fs_l2_norm_sq",
    "fs_l2_norm_sq_parseval",
    "fs_l2_inner_parseval",
    "build_peak_section",
    "peak_mass_fraction",
    "expected_pointwise_value",
]


def fs_length_scale(n: int) -> float:
    """Length conversion from the unit-round / line-area-pi convention to the
    volume-1 convention. The only place this constant appears."""
    return (math.factorial(n) / math.pi**n) ** (1.0 / (2 * n))


def vol_round_rpn(n: int) -> float:
    """Volume of RP^n as half the round unit n-sphere."""
    half_sphere = math.pi ** ((n + 1) / 2.0) / math.exp(lgamma((n + 1) / 2.0))
    return half_sphere


def vol_fs_rpn(n: int) -> float:
    """Volume of RP^n in the volume-1 normalization of CP^n."""
    return fs_length_scale(n) ** n * vol_round_rpn(n)


@dataclass(frozen=True)
class ProjectivePoint:
    """Point of RP^n or CP^n stored as a unit-norm representative.

    Canonicalized so the first nonzero coordinate is positive real; equality
    of points is equality of canonical representatives up to 1e-14.
    """

    homog: np.ndarray = field(repr=True)
    chart_hint: int = 0

    def __post_init__(self):
        v = np.asarray(self.homog)
        nrm = np.linalg.norm(v)
        if nrm == 0:
            raise ValueError("zero vector does not define a projective point")
        v = v / nrm
        for i, c in enumerate(v):
            if abs(c) > 1e-14:
                phase = c / abs(c)
                v = v / phase
                break
        if not np.iscomplexobj(v):
            v = v.astype(float)
        v.setflags(write=False)
        object.__setattr__(self, "homog", v)
        object.__setattr__(self, "chart_hint", int(np.argmax(np.abs(v))))

    @classmethod
    def from_chart(cls, z, chart: int = 0) -> "ProjectivePoint":
        z = np.atleast_1d(np.asarray(z))
        v = np.concatenate([np.ones(1, dtype=z.dtype), z]) if chart == 0 else None
        if v is None:
            raise ValueError("only chart 0 is supported here")
        return cls(v)

    def chart_coords(self) -> np.ndarray:
        """Coordinates on U_0 (requires homog[0] != 0)."""
        if abs(self.homog[0]) < 1e-14:
            raise ValueError("point is not in the chart U_0")
        return np.asarray(self.homog[1:] / self.homog[0])


def fs_pointwise_norm_sq(Q: HomogeneousPolynomial, x) -> float:
    """|Q(v)|^2 / ||v||^(2d) for any representative v of x.

    Evaluation happens at the unit representative, which is the overflow- and
    underflow-safe form of the definition for every degree.
    """
    v = x.homog if isinstance(x, ProjectivePoint) else np.asarray(x)
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise ValueError("zero representative")
    val = evaluate(Q, v / nrm)
    return float(abs(val) ** 2)


def _univariate_chart_coeffs(Q: HomogeneousPolynomial) -> np.ndarray:
    """Q(1, z) coefficients by ascending power of z (nvars = 2)."""
    # graded order for nvars=2 is (d,0), (d-1,1), ..., (0,d): index = power of X1
    return np.asarray(Q.coeffs)


def _bivariate_chart_coeffs(Q: HomogeneousPolynomial) -> np.ndarray:
    """Matrix q[j, k] with Q(1, z1, z2) = sum q[j,k] z1^j z2^k (nvars = 3)."""
    d = Q.degree
    out = np.zeros((d + 1, d + 1))
    for row, c in zip(Q.exponents, Q.coeffs):
        out[int(row[1]), int(row[2])] = c
    return out


def _polyval_asc(coeffs: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Horner evaluation, coefficients by ascending power."""
    out = np.zeros_like(z, dtype=np.result_type(coeffs.dtype, z.dtype))
    for c in coeffs[::-1]:
        out = out * z + c
    return out


def _radial_nodes(npts: int, split=None):
    """Gauss-Legendre nodes on [0, pi/2) in phi, returned as (r, weight)
    pairs for the substitution r = tan(phi). Optional split point in r."""
    edges = [0.0, math.pi / 2]
    if split is not None:
        edges = [0.0, math.atan(split), math.pi / 2]
    xs, ws = leggauss(npts)
    rs, wout, seg = [], [], []
    for a, b in zip(edges[:-1], edges[1:]):
        phi = 0.5 * (b - a) * xs + 0.5 * (a + b)
        w = 0.5 * (b - a) * ws
        rs.append(np.tan(phi))
        wout.append(w / np.cos(phi) ** 2)  # dr = sec^2 dphi
        seg.append(np.full(npts, len(seg)))
    return np.concatenate(rs), np.concatenate(wout), np.concatenate(seg)


def _l2_cp1(cu: np.ndarray, d: int, npts: int, split=None):
    """(total, per_segment) of (1/pi) int |p(z)|^2 (1+|z|^2)^(-(d+2)) dL."""
    ntheta = 2 * d + 8
    theta = 2 * math.pi * np.arange(ntheta) / ntheta
    r, wr, seg = _radial_nodes(npts, split)
    z = r[:, None] * np.exp(1j * theta)[None, :]
    vals = np.abs(_polyval_asc(cu, z)) ** 2
    radial = vals.mean(axis=1) * 2 * math.pi  # exact trapezoid in theta
    dens = (1.0 + r * r) ** (-(d + 2.0)) * r
    contrib = radial * dens * wr / math.pi
    nseg = int(seg.max()) + 1
    per_seg = np.array([contrib[seg == s].sum() for s in range(nseg)])
    return float(contrib.sum()), per_seg


def _l2_cp2(qjk: np.ndarray, d: int, npts: int):
    """Hybrid quadrature of the CP^2 L2 norm: the inner z2 integral reduces
    by monomial orthogonality to Beta moments, the z1 integral is polar
    quadrature (exact trapezoid in the angle)."""
    lg = np.array([lgamma(v) for v in range(1, d + 4)])  # lg[i] = lgamma(i+1)
    ks = np.arange(d + 1)
    # J_k / pi = k! (d+1-k)! / (d+2)!
    logJ = lg[ks] + lg[d + 1 - ks] - lg[d + 2]
    ntheta = 2 * d + 8
    theta = 2 * math.pi * np.arange(ntheta) / ntheta
    r, wr, _ = _radial_nodes(npts)
    z1 = r[:, None] * np.exp(1j * theta)[None, :]
    total = 0.0
    s2 = 1.0 + r * r
    for k in range(d + 1):
        ck = qjk[: d + 1 - k + 1, k]
        if not np.any(ck):
            continue
        vals = np.abs(_polyval_asc(ck, z1)) ** 2
        radial = vals.mean(axis=1) * 2 * math.pi
        dens = s2 ** (k - (d + 2.0)) * r
        total += math.exp(logJ[k]) * float((radial * dens * wr).sum())
    return 2.0 / math.pi * total


def fs_l2_norm_sq(Q: HomogeneousPolynomial, rel_tol: float = 1e-6, mc_trials: int = 200_000,
                  seed: int = 0) -> float:
    """L2 norm squared of Q over CP^n, total volume one.

    Quadrature for n in {1, 2} with a refinement check at `rel_tol`;
    uniform-point Monte Carlo fallback for n = 3.
    """
    n = Q.nvars - 1
    d = Q.degree
    if not np.any(Q.coeffs):
        return 0.0
    if n == 1:
        cu = _univariate_chart_coeffs(Q)
        base = max(48, d + 40)
        v1, _ = _l2_cp1(cu, d, base)
        v2, _ = _l2_cp1(cu, d, int(1.5 * base))
        if abs(v2 - v1) > rel_tol * max(abs(v2), 1e-300):
            v3, _ = _l2_cp1(cu, d, 3 * base)
            if abs(v3 - v2) > rel_tol * max(abs(v3), 1e-300):
                raise NumericalFailure("CP^1 quadrature did not converge", partial=v3)
            return v3
        return v2
    if n == 2:
        qjk = _bivariate_chart_coeffs(Q)
        base = max(48, d + 40)
        v1 = _l2_cp2(qjk, d, base)
        v2 = _l2_cp2(qjk, d, int(1.5 * base))
        if abs(v2 - v1) > rel_tol * max(abs(v2), 1e-300):
            raise NumericalFailure("CP^2 quadrature did not converge", partial=v2)
        return v2
    if n == 3:
        rng = np.random.default_rng((seed, 0))
        z = rng.normal(size=(mc_trials, 4)) + 1j * rng.normal(size=(mc_trials, 4))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        vals = np.abs(monomial_matrix(Q.exponents, z) @ Q.coeffs.astype(complex)) ** 2
        return float(vals.mean())
    raise NotImplementedError("fs_l2_norm_sq supports n <= 3")


def fs_l2_norm_sq_parseval(Q: HomogeneousPolynomial) -> float:
    """Exact L2 norm squared through the orthonormal monomial basis."""
    w = kostlan_weights(Q.nvars, Q.degree)
    return float(((Q.coeffs / w) ** 2).sum())


def fs_l2_inner_parseval(Q1: HomogeneousPolynomial, Q2: HomogeneousPolynomial) -> float:
    if (Q1.nvars, Q1.degree) != (Q2.nvars, Q2.degree):
        raise ValueError("inner product needs matching nvars and degree")
    w2 = kostlan_weights(Q1.nvars, Q1.degree) ** 2
    return float((Q1.coeffs * Q2.coeffs / w2).sum())


# ---------------------------------------------------------------- peak sections

def _linear_form_power(c: np.ndarray, m: int) -> HomogeneousPolynomial:
    """(c . X)^m as a dense homogeneous polynomial (log-multinomial build)."""
    nv = len(c)
    E = multi_indices(nv, m)
    lg = np.array([lgamma(v + 1.0) for v in range(m + 1)])
    logmult = lg[m] - lg[E].sum(axis=1)
    with np.errstate(divide="ignore"):
        logabs = np.where(np.abs(c) > 0, np.log(np.abs(np.where(c == 0, 1.0, c))), -np.inf)
    logterm = logmult + E @ logabs
    sign = np.prod(np.where(c < 0, -1.0, 1.0)[None, :] ** (E % 2 * (c[None, :] != 0)), axis=1)
    dead = (E * (c[None, :] == 0)).sum(axis=1) > 0
    coeffs = np.where(dead, 0.0, sign * np.exp(logterm))
    return HomogeneousPolynomial(nv, m, coeffs)


def _mul_dense(A: HomogeneousPolynomial, B: HomogeneousPolynomial) -> HomogeneousPolynomial:
    """Product of homogeneous polynomials (intended for small deg A)."""
    if A.nvars != B.nvars:
        raise ValueError("variable count mismatch")
    from .ensembles import _index_of_multi  # local: private order lookup

    idx = _index_of_multi(A.nvars, A.degree + B.degree)
    out = np.zeros(len(idx))
    EB = B.exponents
    for ea, ca in zip(A.exponents, A.coeffs):
        if ca == 0.0:
            continue
        tgt = EB + ea[None, :]
        for row, cb in zip(tgt, B.coeffs):
            if cb != 0.0:
                out[idx[tuple(int(t) for t in row)]] += ca * cb
    return HomogeneousPolynomial(A.nvars, A.degree + B.degree, out)


def _compose_linear(Q: HomogeneousPolynomial, M: np.ndarray) -> HomogeneousPolynomial:
    """Q(M v); practical for small degree (expands products of linear forms)."""
    nv = Q.nvars
    acc = None
    for row, c in zip(Q.exponents, Q.coeffs):
        if c == 0.0:
            continue
        term = None
        for j in range(nv):
            e = int(row[j])
            if e == 0:
                continue
            f = _linear_form_power(M[j, :], e)
            if term is None:
                term = f
            else:
                small, big = (term, f) if term.degree <= f.degree else (f, term)
                term = _mul_dense(small, big)
        if term is None:
            term = HomogeneousPolynomial(nv, 0, np.array([1.0]))
        coeffs = c * term.coeffs
        if acc is None:
            acc = coeffs.copy()
        else:
            acc += coeffs
    return HomogeneousPolynomial(nv, Q.degree, acc)


def rotation_to(x: ProjectivePoint) -> np.ndarray:
    """Real orthogonal matrix sending [1:0:...:0] to x (Gram-Schmidt); the
    identity when x is the origin of the chart."""
    v = np.real(x.homog).astype(float)
    v = v / np.linalg.norm(v)
    n1 = len(v)
    if abs(v[0] - 1.0) < 1e-15:
        return np.eye(n1)
    cols = [v]
    for e in np.eye(n1):
        w = e.copy()
        for c in cols:
            w -= (w @ c) * c
        nw = np.linalg.norm(w)
        if nw > 1e-8:
            cols.append(w / nw)
        if len(cols) == n1:
            break
    return np.stack(cols, axis=1)


@dataclass(frozen=True)
class PeakSection:
    base_poly: AffinePolynomial
    target_degree: int
    rotation: np.ndarray = field(repr=False)
    normalization: float
    section: HomogeneousPolynomial = field(repr=False)
    center: ProjectivePoint

    def __post_init__(self):
        if self.target_degree < self.base_poly.degree:
            raise ValueError("target degree below deg P")
        r = self.rotation
        if np.abs(r.T @ r - np.eye(len(r))).max() > 1e-12:
            raise ValueError("rotation is not orthogonal to 1e-12")
        if self.section.degree != self.target_degree:
            raise ValueError("assembled section has the wrong degree")


def gaussian_sq_integral(P: AffinePolynomial) -> float:
    """int_{C^n} |P(y)|^2 exp(-||y||^2) dLebesgue = pi^n sum_a P_a^2 a!.

    Monomial orthogonality under the rotation-invariant Gaussian makes this
    exact; the quadrature route is kept in the tests as a cross-check.
    """
    E = affine_multi_indices(P.nvars, P.degree)
    lg = np.array([lgamma(v + 1.0) for v in range(P.degree + 1)])
    fact = np.exp(lg[E].sum(axis=1))
    return math.pi**P.nvars * float((P.coeffs**2 * fact).sum())


def build_peak_section(P: AffinePolynomial, d: int, x: ProjectivePoint) -> PeakSection:
    """Assemble the degree-d section peaking at x with model zero set P^(-1)(0).

    Steps: rescale P by sqrt(d), homogenize with the X_0 padding, scale by
    sqrt(d)^n, divide by the volume-adapted normalization
    sqrt(n! sum_a P_a^2 a!), and rotate the chart origin onto x.
    """
    n = P.nvars
    k = P.degree
    if d < k:
        raise ValueError(f"target degree {d} < deg P = {k}")
    E = affine_multi_indices(n, k)
    scaled = P.coeffs * np.sqrt(float(d)) ** E.sum(axis=1)
    Pd = AffinePolynomial(n, k, scaled)
    body = homogenize(Pd, d)
    norm = math.sqrt(gaussian_sq_integral(P) * math.factorial(n) / math.pi**n)
    coeffs = math.sqrt(float(d)) ** n / norm * body.coeffs
    sec = HomogeneousPolynomial(n + 1, d, coeffs)
    r = rotation_to(x)
    if not np.allclose(r, np.eye(n + 1)):
        sec = _compose_rotation_structured(Pd, d, r, math.sqrt(float(d)) ** n / norm)
    return PeakSection(
        base_poly=P, target_degree=d, rotation=r, normalization=norm,
        section=sec, center=x,
    )


def _compose_rotation_structured(Pd: AffinePolynomial, d: int, r: np.ndarray, scale: float):
    """(Q_k X_0^(d-k)) o r^(-1) exploiting the X_0-power structure."""
    k = Pd.degree
    Minv = r.T
    Qk = homogenize(Pd, k)
    head = _compose_linear(Qk, Minv)
    tail = _linear_form_power(Minv[0, :], d - k) if d > k else None
    full = head if tail is None else _mul_dense(head, tail)
    return HomogeneousPolynomial(full.nvars, d, scale * full.coeffs)


def peak_mass_fraction(P: AffinePolynomial, d: int, radius_factor: float,
                       npts: int = 400) -> float:
    """Fraction of the peak section's L2 mass inside the geodesic ball of
    volume-normalized FS radius radius_factor / sqrt(d) around the peak.

    n = 1 only. The geodesic radius rho converts to the chart radius
    tan(rho / fs_length_scale(1)).
    """
    if P.nvars != 1:
        raise NotImplementedError("mass fraction is implemented for n = 1")
    sec = build_peak_section(P, d, ProjectivePoint(np.array([1.0, 0.0])))
    cu = _univariate_chart_coeffs(sec.section)
    rho = radius_factor / math.sqrt(d)
    r0 = math.tan(rho / fs_length_scale(1))
    total, per_seg = _l2_cp1(cu, d, npts, split=r0)
    return float(per_seg[0] / total)


def expected_pointwise_value(spec: EnsembleSpec, x: ProjectivePoint, trials: int,
                             stream_index: int = 0) -> ExpectationEstimate:
    """Monte Carlo E|sigma(x)| of the pointwise FS norm at x.

    For the Kostlan ensemble the exact value is
    sqrt((d+n)!/(pi n! d!)): sigma(x) is centered Gaussian with variance
    (d+n)!/(2 n! d!) at every unit point.
    """
    if spec.kind is not EnsembleKind.KOSTLAN:
        raise ValueError("expected_pointwise_value is defined for Kostlan specs")
    C = sample_batch(spec, stream_index, trials)
    E = multi_indices(spec.nvars, spec.degree)
    u = np.real(x.homog).astype(float)
    mono = np.prod(u[None, :] ** E, axis=1)
    vals = np.abs(C @ mono)
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(trials))
    return ExpectationEstimate(mean=mean, std_error=se, trials=trials, spec=spec)
