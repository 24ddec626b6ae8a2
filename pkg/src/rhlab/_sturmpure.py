"""Pure-Python (gmpy2) subresultant Sturm chain, fallback for the C extension.

Same algorithm as _sturmchain.c: exact dyadic-to-integer conversion, Brown's
subresultant PRS with tracked scale signs, sign variations at -inf/+inf.
"""
from __future__ import annotations

try:
    from gmpy2 import mpz
except ImportError:  # pragma: no cover - gmpy2 is a declared dependency
    mpz = int


def _to_scaled_ints(coeffs):
    mants = []
    shifts = []
    deg = -1
    for i, c in enumerate(coeffs):
        c = float(c)
        if c != c or c in (float("inf"), float("-inf")):
            raise ValueError("non-finite coefficient")
        if c != 0.0:
            deg = i
        num, den = c.as_integer_ratio()
        mants.append(num)
        shifts.append(den.bit_length() - 1)
    if deg < 0:
        raise ValueError("zero polynomial")
    K = max(shifts[: deg + 1])
    return [mpz(m) << (K - s) for m, s in zip(mants[: deg + 1], shifts[: deg + 1])]


def count_real_roots_exact(coeffs) -> int:
    """Exact number of distinct real roots of sum c[i] x^i."""
    A = _to_scaled_ints(coeffs)
    degA = len(A) - 1
    if degA == 0:
        return 0
    B = [i * c for i, c in enumerate(A)][1:]
    degB = degA - 1

    sgnlead = [1 if A[-1] > 0 else -1]
    degs = [degA]
    sA, sB = 1, 1
    sgnlead.append(sB * (1 if B[-1] > 0 else -1))
    degs.append(degB)

    g = mpz(1)
    h = mpz(1)
    first = True
    while degB >= 1:
        delta = degA - degB
        lb = B[degB]
        R = list(A)
        degR = degA
        rounds = 0
        while degR >= degB:
            coef = R[degR]
            off = degR - degB
            newR = [lb * c for c in R[:degR]]
            for j in range(degB):
                newR[off + j] -= coef * B[j]
            R = newR
            degR -= 1
            rounds += 1
            while degR >= 0 and R[degR] == 0:
                degR -= 1
            if degR < 0:
                break
        for _ in range(rounds, delta + 1):
            if degR < 0:
                break
            R = [lb * c for c in R]
        if degR < 0:
            break  # nontrivial gcd; truncated chain still counts distinct roots
        R = R[: degR + 1]

        if first:
            beta = mpz(1) if (delta + 1) % 2 == 0 else mpz(-1)
            first = False
        else:
            beta = -g * h**delta
        R = [c // beta for c in R]

        slb = 1 if lb > 0 else -1
        spow = 1 if (delta + 1) % 2 == 0 else slb
        sbeta = 1 if beta > 0 else -1
        s_next = -sA * spow * sbeta

        g = lb
        if delta == 1:
            h = g
        elif delta > 1:
            h = g**delta // h ** (delta - 1)

        A, degA, sA = B, degB, sB
        B, degB, sB = R, degR, s_next
        sgnlead.append(sB * (1 if B[degB] > 0 else -1))
        degs.append(degB)

    vplus = 0
    vminus = 0
    for i in range(len(sgnlead) - 1):
        a, b = sgnlead[i], sgnlead[i + 1]
        am = -a if degs[i] % 2 else a
        bm = -b if degs[i + 1] % 2 else b
        if a * b < 0:
            vplus += 1
        if am * bm < 0:
            vminus += 1
    return vminus - vplus


def count_many(rows) -> list:
    return [count_real_roots_exact(row) for row in rows]
