"""Polynomial data structures and the Kac/Kostlan Gaussian ensembles.

Coefficients are stored densely over a fixed graded-lexicographic order on
multi-indices (see :func:`multi_indices`). The probability model is the
Gaussian measure with density pi^(-N/2) exp(-||P||^2) relative to the
orthonormal basis of the ensemble, so every orthonormal coordinate is an
independent centered Gaussian with variance 1/2.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from math import comb, lgamma

import numpy as np

__all__ = [
    "VARIANCE_PER_COORD",
    "EnsembleKind",
    "EnsembleSpec",
    "HomogeneousPolynomial",
    "AffinePolynomial",
    "multi_indices",
    "affine_multi_indices",
    "kostlan_weight",
    "kostlan_weights",
    "sample",
    "sample_batch",
    "evaluate",
    "gradient",
    "derivative",
    "homogenize",
    "dehomogenize",
    "monomial_matrix",
    "random_rotation",
]

# Variance of each coefficient in the orthonormal basis, read off the density
# exp(-||P||^2) (not exp(-||P||^2 / 2)). Fixed globally; matrix and sup-norm
# constants downstream depend on it.
VARIANCE_PER_COORD = 0.5


class EnsembleKind(str, Enum):
    KAC = "kac"
    KOSTLAN = "kostlan"


@lru_cache(maxsize=None)
def multi_indices(nvars: int, degree: int) -> np.ndarray:
    """All exponent tuples of length `nvars` summing to `degree`.

    Rows are ordered lexicographically descending, so (d, 0, ..., 0) comes
    first and (0, ..., 0, d) last. This order is the wire format for
    serialized coefficient vectors.
    """
    if nvars < 1 or degree < 0:
        raise ValueError("need nvars >= 1 and degree >= 0")
    if nvars == 1:
        out = np.array([[degree]], dtype=np.int64)
    else:
        rows = []
        for first in range(degree, -1, -1):
            rest = multi_indices(nvars - 1, degree - first)
            block = np.empty((len(rest), nvars), dtype=np.int64)
            block[:, 0] = first
            block[:, 1:] = rest
            rows.append(block)
        out = np.vstack(rows)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def affine_multi_indices(nvars: int, degree: int) -> np.ndarray:
    """Exponent tuples of total degree <= `degree`, grouped by total degree
    ascending, lexicographically descending inside each block."""
    blocks = [multi_indices(nvars, s) for s in range(degree + 1)]
    out = np.vstack(blocks)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _index_of_multi(nvars: int, degree: int) -> dict:
    return {tuple(a): i for i, a in enumerate(multi_indices(nvars, degree))}


@lru_cache(maxsize=None)
def _index_of_affine(nvars: int, degree: int) -> dict:
    return {tuple(a): i for i, a in enumerate(affine_multi_indices(nvars, degree))}


def kostlan_weight(alpha, d: int, n: int) -> float:
    """sqrt((d+n)! / (n! a_0! ... a_n!)), evaluated through log-Gamma.

    `alpha` has n+1 entries summing to d; raises ValueError otherwise.
    """
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != n + 1:
        raise ValueError(f"alpha must have {n + 1} entries, got {len(alpha)}")
    if any(a < 0 for a in alpha) or sum(alpha) != d:
        raise ValueError(f"alpha must be nonnegative with |alpha| = {d}")
    log_w2 = lgamma(d + n + 1) - lgamma(n + 1) - sum(lgamma(a + 1) for a in alpha)
    return math.exp(0.5 * log_w2)


@lru_cache(maxsize=None)
def kostlan_weights(nvars: int, degree: int) -> np.ndarray:
    """Vector of kostlan_weight over the graded order for (nvars, degree)."""
    E = multi_indices(nvars, degree)
    n = nvars - 1
    lg = np.array([lgamma(k + 1.0) for k in range(degree + 1)])
    log_w2 = lgamma(degree + n + 1) - lgamma(n + 1) - lg[E].sum(axis=1)
    w = np.exp(0.5 * log_w2)
    w.setflags(write=False)
    return w


def _frozen(a) -> np.ndarray:
    out = np.asarray(a, dtype=float).copy()
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class HomogeneousPolynomial:
    """Dense real homogeneous polynomial in `nvars` >= 2 variables."""

    nvars: int
    degree: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.nvars < 2:
            raise ValueError("homogeneous polynomials need nvars >= 2")
        if self.degree < 0:
            raise ValueError("degree must be >= 0")
        object.__setattr__(self, "coeffs", _frozen(self.coeffs))
        m = comb(self.degree + self.nvars - 1, self.nvars - 1)
        if self.coeffs.shape != (m,):
            raise ValueError(f"expected {m} coefficients, got {self.coeffs.shape}")

    @property
    def exponents(self) -> np.ndarray:
        return multi_indices(self.nvars, self.degree)

    def __call__(self, v):
        return evaluate(self, v)

    def to_json(self) -> str:
        return json.dumps(
            {"nvars": self.nvars, "degree": self.degree, "coeffs": self.coeffs.tolist()}
        )

    @classmethod
    def from_json(cls, text: str) -> "HomogeneousPolynomial":
        obj = json.loads(text)
        return cls(obj["nvars"], obj["degree"], np.array(obj["coeffs"], dtype=float))


@dataclass(frozen=True)
class AffinePolynomial:
    """Dense real polynomial of total degree <= `degree` in `nvars` >= 1 variables."""

    nvars: int
    degree: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.nvars < 1:
            raise ValueError("affine polynomials need nvars >= 1")
        if self.degree < 0:
            raise ValueError("degree must be >= 0")
        object.__setattr__(self, "coeffs", _frozen(self.coeffs))
        m = len(affine_multi_indices(self.nvars, self.degree))
        if self.coeffs.shape != (m,):
            raise ValueError(f"expected {m} coefficients, got {self.coeffs.shape}")

    @property
    def exponents(self) -> np.ndarray:
        return affine_multi_indices(self.nvars, self.degree)

    def __call__(self, x):
        x = np.asarray(x)
        E = self.exponents
        return _eval_dense(self.coeffs, E, x)

    @classmethod
    def from_terms(cls, nvars: int, degree: int, terms: dict) -> "AffinePolynomial":
        """Build from {exponent tuple: coefficient}."""
        idx = _index_of_affine(nvars, degree)
        c = np.zeros(len(idx))
        for a, v in terms.items():
            c[idx[tuple(a)]] = v
        return cls(nvars, degree, c)


@dataclass(frozen=True)
class EnsembleSpec:
    """Which Gaussian ensemble to sample: kind, dimensions, and base seed."""

    kind: EnsembleKind
    nvars: int
    degree: int
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", EnsembleKind(self.kind))
        if self.degree < 0:
            raise ValueError("degree must be >= 0")
        if self.kind is EnsembleKind.KAC and self.nvars != 2:
            raise ValueError("the Kac ensemble is univariate (nvars = 2)")
        if self.kind is EnsembleKind.KOSTLAN and self.nvars < 2:
            raise ValueError("Kostlan needs nvars >= 2")
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def n_coeffs(self) -> int:
        return comb(self.degree + self.nvars - 1, self.nvars - 1)

    def rng(self, stream_index: int) -> np.random.Generator:
        return np.random.default_rng((int(self.seed), int(stream_index)))


def _orthonormal_to_monomial(spec: EnsembleSpec) -> np.ndarray:
    """Per-coefficient factor turning orthonormal-basis draws into monomial
    coefficients. Kac: all ones (monomials are the orthonormal basis)."""
    if spec.kind is EnsembleKind.KAC:
        return np.ones(spec.n_coeffs)
    return kostlan_weights(spec.nvars, spec.degree)


def sample(spec: EnsembleSpec, stream_index: int = 0) -> HomogeneousPolynomial:
    """One draw; a deterministic function of (spec.seed, stream_index)."""
    rng = spec.rng(stream_index)
    g = rng.normal(0.0, math.sqrt(VARIANCE_PER_COORD), spec.n_coeffs)
    return HomogeneousPolynomial(spec.nvars, spec.degree, g * _orthonormal_to_monomial(spec))


def sample_batch(spec: EnsembleSpec, stream_index: int, count: int) -> np.ndarray:
    """`count` draws from one stream as a (count, n_coeffs) coefficient array.

    Row i is the i-th sequential draw of the stream, so a batch is
    reproducible from (seed, stream_index) but row i differs from
    sample(spec, i).
    """
    rng = spec.rng(stream_index)
    g = rng.normal(0.0, math.sqrt(VARIANCE_PER_COORD), (count, spec.n_coeffs))
    return g * _orthonormal_to_monomial(spec)


def _eval_dense(coeffs, E, v):
    v = np.asarray(v)
    if v.shape[-1] != E.shape[1]:
        raise ValueError(f"point has {v.shape[-1]} coordinates, need {E.shape[1]}")
    if v.ndim == 1:
        return float(np.real_if_close(coeffs @ np.prod(v[None, :] ** E, axis=1))) \
            if not np.iscomplexobj(v) else complex(coeffs @ np.prod(v[None, :] ** E, axis=1))
    return monomial_matrix(E, v) @ coeffs


def evaluate(Q: HomogeneousPolynomial, v):
    """Q(v) for a single point or an (k, nvars) array of points."""
    return _eval_dense(Q.coeffs, Q.exponents, v)


def monomial_matrix(E: np.ndarray, V: np.ndarray) -> np.ndarray:
    """(k, n_monomials) matrix of monomial values v^alpha at rows of V.

    Built from per-variable power tables, so cost is O(k * (m + d * nvars)).
    """
    V = np.asarray(V)
    k, nv = V.shape
    dmax = int(E.max())
    out = None
    for j in range(nv):
        pows = np.empty((k, dmax + 1), dtype=V.dtype)
        pows[:, 0] = 1.0
        for e in range(1, dmax + 1):
            pows[:, e] = pows[:, e - 1] * V[:, j]
        col = pows[:, E[:, j]]
        out = col if out is None else out * col
    return out


def gradient(Q: HomogeneousPolynomial, v) -> np.ndarray:
    """Analytic gradient of Q at a single point v."""
    v = np.asarray(v, dtype=float)
    E = Q.exponents
    if v.shape != (Q.nvars,):
        raise ValueError(f"point must have {Q.nvars} coordinates")
    out = np.empty(Q.nvars)
    for j in range(Q.nvars):
        Ej = E.copy()
        mask = Ej[:, j] > 0
        c = Q.coeffs * E[:, j]
        Ej[:, j] = np.maximum(Ej[:, j] - 1, 0)
        # coefficient factor E[:, j] already kills mask-complement terms
        out[j] = c[mask] @ np.prod(v[None, :] ** Ej[mask], axis=1)
    return out


def derivative(Q: HomogeneousPolynomial, j: int) -> HomogeneousPolynomial:
    """Partial derivative dQ/dX_j as a polynomial of degree d-1."""
    if Q.degree == 0:
        raise ValueError("cannot differentiate a constant to a homogeneous polynomial")
    E = Q.exponents
    idx = _index_of_multi(Q.nvars, Q.degree - 1)
    c = np.zeros(len(idx))
    for row, coef in zip(E, Q.coeffs):
        if row[j] == 0 or coef == 0.0:
            continue
        tgt = list(row)
        tgt[j] -= 1
        c[idx[tuple(tgt)]] += coef * row[j]
    return HomogeneousPolynomial(Q.nvars, Q.degree - 1, c)


def affine_derivative(P: AffinePolynomial, j: int) -> AffinePolynomial:
    """Partial derivative dP/dx_j of an affine polynomial."""
    deg = max(P.degree - 1, 0)
    idx = _index_of_affine(P.nvars, deg)
    c = np.zeros(len(idx))
    for row, coef in zip(P.exponents, P.coeffs):
        if row[j] == 0 or coef == 0.0:
            continue
        tgt = list(row)
        tgt[j] -= 1
        c[idx[tuple(tgt)]] += coef * row[j]
    return AffinePolynomial(P.nvars, deg, c)


def homogenize(P: AffinePolynomial, target_degree: int) -> HomogeneousPolynomial:
    """Multiply each term by the power of X_0 bringing it to `target_degree`."""
    if target_degree < P.degree:
        raise ValueError(f"target degree {target_degree} < deg P = {P.degree}")
    idx = _index_of_multi(P.nvars + 1, target_degree)
    c = np.zeros(len(idx))
    for row, coef in zip(P.exponents, P.coeffs):
        s = int(row.sum())
        key = (target_degree - s, *map(int, row))
        c[idx[key]] += coef
    return HomogeneousPolynomial(P.nvars + 1, target_degree, c)


def dehomogenize(Q: HomogeneousPolynomial) -> AffinePolynomial:
    """Restrict to the chart X_0 = 1; inverse of homogenize at degree d."""
    idx = _index_of_affine(Q.nvars - 1, Q.degree)
    c = np.zeros(len(idx))
    for row, coef in zip(Q.exponents, Q.coeffs):
        key = tuple(int(a) for a in row[1:])
        c[idx[key]] += coef
    return AffinePolynomial(Q.nvars - 1, Q.degree, c)


def random_rotation(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed element of O(n) (QR with sign-fixed diagonal)."""
    M = rng.normal(size=(n, n))
    q, r = np.linalg.qr(M)
    return q * np.sign(np.diag(r))
