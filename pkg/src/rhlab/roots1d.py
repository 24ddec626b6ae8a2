"""Exact real-root counting for univariate samples and the Crofton check.

count_real_roots is always exact: coefficients convert exactly to integers
scaled by a power of two and the subresultant Sturm chain is evaluated at
-inf/+inf. The Monte Carlo estimator routes most trials through a float64
Sturm chain first and re-counts exactly every trial whose chain margin is
small, whose count breaks the parity/range invariants, or which lands in a
deterministic audit subsample; any audit disagreement aborts the run.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.integrate import quad

from . import _sturmpure
from .ensembles import EnsembleKind, EnsembleSpec, sample_batch
from .errors import NumericalFailure

try:
    from . import _sturmchain as _cext
except ImportError:  # extension is optional; gmpy2 path is ~30x slower
    _cext = None

__all__ = [
    "SturmChain",
    "RootCountResult",
    "ExpectationEstimate",
    "count_real_roots",
    "expected_roots_mc",
    "gamma_speed",
    "expected_roots_crofton",
]

# float-chain margin below which a trial is re-counted exactly
MARGIN_THRESHOLD = 1e-9
# deterministic exact audit: every AUDIT_STRIDE-th trial
AUDIT_STRIDE = 200


@dataclass(frozen=True)
class RootCountResult:
    count: int
    degree: int
    is_exact: bool


@dataclass(frozen=True)
class ExpectationEstimate:
    mean: float
    std_error: float
    trials: int
    spec: EnsembleSpec | None = None
    exact_fraction: float = 1.0


class SturmChain:
    """Canonical Sturm chain with exact rational coefficients.

    p0 = P, p1 = P', p_{i+1} = -rem(p_{i-1}, p_i), ending at the last
    nonzero remainder (the gcd of P and P' up to sign). Intended for small
    and moderate degrees; the production counter uses an integer-scaled
    equivalent of this chain.
    """

    def __init__(self, coeffs):
        p0 = [Fraction(float(c)) for c in coeffs]
        while p0 and p0[-1] == 0:
            p0.pop()
        if not p0:
            raise ValueError("zero polynomial")
        p1 = [i * c for i, c in enumerate(p0)][1:]
        chain = [p0]
        if p1:
            chain.append(p1)
        while len(chain[-1]) > 1:
            r = self._rem(chain[-2], chain[-1])
            if not r:
                break
            chain.append([-c for c in r])
        self.chain = chain

    @staticmethod
    def _rem(a, b):
        r = list(a)
        db = len(b) - 1
        while len(r) - 1 >= db and r:
            q = r[-1] / b[-1]
            off = len(r) - 1 - db
            for j in range(db):
                r[off + j] -= q * b[j]
            r.pop()
            while r and r[-1] == 0:
                r.pop()
        return r

    def sign_variations(self, x=None, at_minus_infinity=False) -> int:
        """Sign variations at a rational point, or at +/-infinity when x is None."""
        signs = []
        for p in self.chain:
            if x is None:
                s = 1 if p[-1] > 0 else -1
                if at_minus_infinity and (len(p) - 1) % 2 == 1:
                    s = -s
            else:
                v = sum(c * Fraction(x) ** i for i, c in enumerate(p))
                if v == 0:
                    continue
                s = 1 if v > 0 else -1
            signs.append(s)
        return sum(1 for a, b in zip(signs, signs[1:]) if a * b < 0)

    def count_distinct_real_roots(self, a=None, b=None) -> int:
        """Roots in (a, b]; whole line when both endpoints are omitted."""
        va = self.sign_variations(a, at_minus_infinity=True) if a is None else self.sign_variations(a)
        vb = self.sign_variations(b) if b is not None else self.sign_variations(None)
        return va - vb


def _coeff_array(P):
    if hasattr(P, "coeffs") and hasattr(P, "nvars"):
        if P.nvars != 1:
            raise ValueError("count_real_roots expects a univariate polynomial")
        return np.asarray(P.coeffs, dtype=float)
    return np.asarray(P, dtype=float)


def _count_exact(coeffs) -> int:
    c = np.ascontiguousarray(coeffs, dtype=float)
    if _cext is not None:
        return _cext.count_one(c)
    return _sturmpure.count_real_roots_exact(c)


def _count_exact_rows(rows) -> np.ndarray:
    rows = np.ascontiguousarray(rows, dtype=float)
    if _cext is not None:
        return np.array(_cext.count_many(rows), dtype=np.int64)
    return np.array(_sturmpure.count_many(rows), dtype=np.int64)


def count_real_roots(P) -> RootCountResult:
    """Exact count of distinct real roots of P over the whole line."""
    c = _coeff_array(P)
    nz = np.nonzero(c)[0]
    if len(nz) == 0:
        raise ValueError("zero polynomial")
    deg = int(nz[-1])
    return RootCountResult(count=_count_exact(c[: deg + 1]), degree=deg, is_exact=True)


def float_sturm_counts(C: np.ndarray):
    """Batched float64 Sturm chains for full-degree coefficient rows.

    Returns (counts, margins). The margin of a chain is the worst relative
    cancellation seen while forming the coefficients that decide signs (the
    top of each remainder and of the intermediate quotient step): leading
    coefficients are often legitimately tiny relative to mid coefficients
    (binomial weight profiles), so smallness alone is not suspicious, but a
    lead produced by near-total cancellation is.
    """
    C = np.asarray(C, dtype=float)
    nb, m = C.shape
    d = m - 1
    lead_signs = np.zeros((nb, d + 1), np.int8)
    margins = np.full(nb, np.inf)

    A = C.copy()
    B = C[:, 1:] * np.arange(1.0, d + 1)
    lead_signs[:, 0] = np.sign(A[:, -1])
    lead_signs[:, 1] = np.sign(B[:, -1])

    idx = 2
    degB = d - 1
    with np.errstate(over="ignore", invalid="ignore", divide="ignore", under="ignore"):
        while degB >= 1:
            n = degB + 1
            lb = B[:, -1]
            safe = np.where(lb == 0, 1.0, lb)
            q1 = A[:, -1] / safe
            T = A[:, :-1].copy()
            prod1 = q1[:, None] * B[:, : n - 1]
            T[:, 1:] -= prod1
            # cancellation in the coefficient that becomes the next quotient
            denom_t = np.abs(A[:, -2]) + np.abs(prod1[:, -1]) + 1e-300
            margins = np.minimum(margins, np.abs(T[:, -1]) / denom_t)
            q0 = T[:, -1] / safe
            prod0 = q0[:, None] * B[:, : n - 1]
            R = prod0 - T[:, : n - 1]  # -(T - q0 B)
            # cancellation in the new leading coefficient
            denom_r = np.abs(prod0[:, -1]) + np.abs(T[:, n - 2]) + 1e-300
            margins = np.minimum(margins, np.abs(R[:, -1]) / denom_r)
            mx = np.abs(R).max(axis=1)
            bad = ~np.isfinite(mx) | (mx == 0)
            mx = np.where(bad, 1.0, mx)
            scale = np.ldexp(1.0, -np.frexp(mx)[1])
            R *= scale[:, None]
            margins = np.where(bad, 0.0, margins)
            lead_signs[:, idx] = np.sign(R[:, -1])
            A, B = B, R
            degB -= 1
            idx += 1

    degs = np.arange(d, -1, -1)
    s_plus = lead_signs.astype(np.int32)
    s_minus = s_plus * np.where(degs % 2 == 1, -1, 1)
    v_plus = np.sum(s_plus[:, :-1] * s_plus[:, 1:] < 0, axis=1)
    v_minus = np.sum(s_minus[:, :-1] * s_minus[:, 1:] < 0, axis=1)
    return (v_minus - v_plus).astype(np.int64), margins


def _count_batch_hybrid(C: np.ndarray, first_trial_index: int):
    """Counts for sample rows C: float tier plus exact re-counts.

    Exact re-counts happen for (a) margins below MARGIN_THRESHOLD, (b)
    parity/range violations, (c) the audit subsample. Audit mismatches raise.
    """
    nb, m = C.shape
    d = m - 1
    counts, margins = float_sturm_counts(C)
    redo = margins < MARGIN_THRESHOLD
    redo |= (counts < 0) | (counts > d) | ((counts - d) % 2 != 0)
    trial_ids = first_trial_index + np.arange(nb)
    audit = trial_ids % AUDIT_STRIDE == 0
    to_exact = redo | audit
    if to_exact.any():
        exact = _count_exact_rows(C[to_exact])
        mismatch = audit[to_exact] & ~redo[to_exact] & (exact != counts[to_exact])
        if mismatch.any():
            raise RuntimeError(
                "float Sturm tier disagreed with the exact chain on an audit "
                "trial; counts cannot be trusted, aborting"
            )
        counts[to_exact] = exact
    # per-trial invariants (Thm-1.1-style) on the final counts
    if ((counts < 0) | (counts > d)).any():
        raise AssertionError("root count outside [0, degree]")
    if (((counts - d) % 2 != 0)).any():
        raise AssertionError("root count parity violation on an exact count")
    return counts, int(to_exact.sum())


def expected_roots_mc(
    spec: EnsembleSpec,
    trials: int,
    method: str = "hybrid",
    batch_size: int = 2048,
) -> ExpectationEstimate:
    """Monte Carlo mean of per-sample real-root counts; deterministic in seed.

    method="exact" forces the integer chain on every trial; "hybrid" is the
    audited two-tier scheme (see module docstring).
    """
    if spec.nvars != 2:
        raise ValueError("expected_roots_mc needs a univariate (nvars = 2) spec")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if method not in ("hybrid", "exact"):
        raise ValueError(f"unknown method {method!r}")
    d = spec.degree
    total = 0
    total_sq = 0
    n_exact = 0
    done = 0
    stream = 0
    while done < trials:
        b = min(batch_size, trials - done)
        C = sample_batch(spec, stream, b)
        if d == 0:
            counts = np.zeros(b, dtype=np.int64)
            n_exact += b
        elif method == "exact":
            counts = _count_exact_rows(C)
            n_exact += b
        else:
            counts, ne = _count_batch_hybrid(C, done)
            n_exact += ne
        total += int(counts.sum())
        total_sq += int((counts * counts).sum())
        done += b
        stream += 1
    mean = total / trials
    var = max(total_sq / trials - mean * mean, 0.0)
    se = math.sqrt(var / trials)
    return ExpectationEstimate(
        mean=mean, std_error=se, trials=trials, spec=spec,
        exact_fraction=n_exact / trials,
    )


def _moment_curve_sums(kind: EnsembleKind, d: int, t: float):
    """(s0, s1, s2) = (||g||^2, <g, g'>, ||g'||^2) for the moment curve at |t| <= 1."""
    if kind is EnsembleKind.KOSTLAN:
        # binomial closed forms of the three series
        s0 = (1.0 + t * t) ** d
        s1 = d * t * (1.0 + t * t) ** (d - 1) if d >= 1 else 0.0
        s2 = d * (1.0 + t * t) ** (d - 2) * (1.0 + d * t * t) if d >= 1 else 0.0
        return s0, s1, s2
    k = np.arange(d + 1, dtype=float)
    tk = t ** k
    s0 = float(tk @ tk)
    g = k * tk  # k t^k
    if t == 0.0:
        return s0, 0.0, (1.0 if d >= 1 else 0.0)
    s1 = float(g @ tk) / t
    s2 = float(g @ g) / (t * t)
    return s0, s1, s2


def gamma_speed(spec: EnsembleSpec, t: float) -> float:
    """||gamma'(t)|| for the normalized moment curve of the ensemble.

    Stable for all t: the curve is projectively symmetric under t -> 1/t
    (with reversed coefficients), so |t| > 1 reduces to the unit interval
    instead of overflowing the power sums.
    """
    if spec.nvars != 2:
        raise ValueError("gamma_speed needs a univariate spec")
    t = float(t)
    d = spec.degree
    if d == 0:
        return 0.0
    if abs(t) > 1.0:
        u = 1.0 / t
        return gamma_speed(spec, u) * u * u
    s0, s1, s2 = _moment_curve_sums(spec.kind, d, t)
    val = (s2 * s0 - s1 * s1) / (s0 * s0)
    return math.sqrt(max(val, 0.0))


def expected_roots_crofton(spec: EnsembleSpec) -> float:
    """(1/pi) * length(gamma) by adaptive quadrature over theta = arctan t."""
    if spec.nvars != 2:
        raise ValueError("expected_roots_crofton needs a univariate spec")
    if spec.degree == 0:
        return 0.0

    def integrand(theta):
        c = math.cos(theta)
        return gamma_speed(spec, math.tan(theta)) / (c * c)

    out = quad(
        integrand, -math.pi / 2, math.pi / 2,
        points=[-math.pi / 4, math.pi / 4],
        limit=400, epsabs=1e-9, epsrel=1e-10, full_output=1,
    )
    value, abserr = out[0], out[1]
    if len(out) > 3 or abserr > 1e-6 * max(1.0, abs(value)):
        raise NumericalFailure(
            f"crofton quadrature did not converge (err {abserr:g})",
            partial=value / math.pi,
        )
    return value / math.pi
