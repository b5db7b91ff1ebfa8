"""Small exact linear algebra: rational solving and saturated integer kernels.

Matrices are lists of lists of ints or Fractions; sizes here are tiny
(edges of a quotient graph), so plain Gaussian elimination is enough.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd


def frac_solve(A, b):
    """One solution x of A x = b over Q, or None if inconsistent.

    Free variables are set to 0.
    """
    m = len(A)
    n = len(A[0]) if m else 0
    M = [[Fraction(A[i][j]) for j in range(n)] + [Fraction(b[i])] for i in range(m)]
    piv_cols = []
    r = 0
    for c in range(n):
        p = next((i for i in range(r, m) if M[i][c] != 0), None)
        if p is None:
            continue
        M[r], M[p] = M[p], M[r]
        inv = 1 / M[r][c]
        M[r] = [x * inv for x in M[r]]
        for i in range(m):
            if i != r and M[i][c] != 0:
                f = M[i][c]
                M[i] = [x - f * y for x, y in zip(M[i], M[r])]
        piv_cols.append(c)
        r += 1
        if r == m:
            break
    for i in range(r, m):
        if M[i][n] != 0:
            return None
    x = [Fraction(0)] * n
    for i, c in enumerate(piv_cols):
        x[c] = M[i][n]
    return x


def _row_hnf_with_transform(B):
    """Row reduce B over Z by unimodular row operations; return (H, U)."""
    m = len(B)
    n = len(B[0]) if m else 0
    H = [list(row) for row in B]
    U = [[1 if i == j else 0 for j in range(m)] for i in range(m)]
    r = 0
    for c in range(n):
        while True:
            rows = [i for i in range(r, m) if H[i][c] != 0]
            if not rows:
                break
            p = min(rows, key=lambda i: abs(H[i][c]))
            H[r], H[p] = H[p], H[r]
            U[r], U[p] = U[p], U[r]
            done = True
            for i in range(r + 1, m):
                if H[i][c] != 0:
                    q = H[i][c] // H[r][c]
                    H[i] = [x - q * y for x, y in zip(H[i], H[r])]
                    U[i] = [x - q * y for x, y in zip(U[i], U[r])]
                    if H[i][c] != 0:
                        done = False
            if done:
                break
        if any(H[i][c] != 0 for i in range(r, m)):
            if H[r][c] < 0:
                H[r] = [-x for x in H[r]]
                U[r] = [-x for x in U[r]]
            r += 1
            if r == m:
                break
    return H, U


def integer_kernel(A):
    """Basis of the saturated lattice {x in Z^n : A x = 0}.

    Rows of a unimodular transform that kill A^T give the kernel, so the
    result is automatically a basis of the full integer kernel.
    """
    m = len(A)
    n = len(A[0]) if m else 0
    if n == 0:
        return []
    B = [[A[i][j] for i in range(m)] for j in range(n)]  # A^T, n x m
    H, U = _row_hnf_with_transform(B)
    out = []
    for i in range(n):
        if all(x == 0 for x in H[i]):
            v = U[i]
            g = 0
            for x in v:
                g = gcd(g, x)
            assert g == 1, "unimodular kernel row should be primitive"
            out.append(list(v))
    return out


def vectors_equal_up_to_sign(u, v):
    return u == v or [-x for x in u] == v


def content(v):
    g = 0
    for x in v:
        g = gcd(g, x)
    return g
