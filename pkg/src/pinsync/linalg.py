"""Dense real linear algebra kernels.

Matrices are plain ``float64`` :class:`numpy.ndarray` objects.  The two
non-trivial kernels, the matrix exponential and the general real
eigenvalue solver, are implemented here; the spectral norm and Kronecker
product delegate to numpy.
"""

import math

import numpy as np

from .errors import ConvergenceError, DimensionError, MatrixOverflowError, ValidationError

__all__ = [
    "as_matrix",
    "mat_exp",
    "eigenvalues",
    "spectral_radius",
    "max_real_part",
    "spectral_norm",
    "kron",
]

# Padé numerator coefficients for the [13/13] approximant of exp.
_PADE13 = (
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
)
_SCALED_NORM = 0.5
_DEFLATION_TOL = 1e-14
_SWEEPS_PER_DIM = 40


def as_matrix(M, name="matrix"):
    """Return ``M`` as a finite 2-D float64 array (a copy is not forced)."""
    a = np.asarray(M, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] == 0 or a.shape[1] == 0:
        raise DimensionError(f"{name} must be a non-empty 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} has non-finite entries", code="E_NONFINITE")
    return a


def _square(M, name):
    a = as_matrix(M, name)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {a.shape}")
    return a


def _pade13(A):
    n = A.shape[0]
    b = _PADE13
    ident = np.eye(n)
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A4 @ A2
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2) + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
    V = A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident
    return np.linalg.solve(V - U, V + U)


def mat_exp(M, t=1.0):
    """Matrix exponential ``exp(t*M)`` by scaling and squaring.

    The scaled matrix ``t*M / 2**s`` has 1-norm at most 0.5 before the
    [13/13] Padé approximant is applied.

    Raises
    ------
    DimensionError
        If ``M`` is not square.
    MatrixOverflowError
        If any entry of the result is not representable.
    """
    a = _square(M, "M")
    t = float(t)
    if not math.isfinite(t):
        raise ValidationError("t must be finite", code="E_NONFINITE")
    n = a.shape[0]
    if t == 0.0:
        return np.eye(n)
    A = t * a
    norm1 = np.linalg.norm(A, 1)
    if not math.isfinite(norm1):
        raise MatrixOverflowError("exponent argument overflows")
    s = 0
    if norm1 > _SCALED_NORM:
        s = int(math.ceil(math.log2(norm1 / _SCALED_NORM)))
        A = A / 2.0**s
    with np.errstate(over="ignore", invalid="ignore"):
        E = _pade13(A)
        for _ in range(s):
            E = E @ E
    if not np.all(np.isfinite(E)):
        raise MatrixOverflowError(f"exp(tM) overflows (||tM||_1 = {norm1:.6g})")
    return E


def _balance(a):
    # Parlett-Reinsch diagonal similarity with radix-2 scale factors.
    radix = 2.0
    sqrdx = radix * radix
    n = a.shape[0]
    done = False
    while not done:
        done = True
        for i in range(n):
            c = np.sum(np.abs(a[:, i])) - abs(a[i, i])
            r = np.sum(np.abs(a[i, :])) - abs(a[i, i])
            if c == 0.0 or r == 0.0:
                continue
            g = r / radix
            f = 1.0
            s = c + r
            while c < g:
                f *= radix
                c *= sqrdx
            g = r * radix
            while c > g:
                f /= radix
                c /= sqrdx
            if (c + r) / f < 0.95 * s:
                done = False
                a[i, :] /= f
                a[:, i] *= f
    return a


def _hessenberg(a):
    # Householder reduction to upper Hessenberg form, in place.
    n = a.shape[0]
    for k in range(n - 2):
        x = a[k + 1:, k].copy()
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        v = x
        v[0] += math.copysign(alpha, x[0])
        v /= np.linalg.norm(v)
        a[k + 1:, k:] -= 2.0 * np.outer(v, v @ a[k + 1:, k:])
        a[:, k + 1:] -= 2.0 * np.outer(a[:, k + 1:] @ v, v)
        a[k + 2:, k] = 0.0
    return a


def _hqr(h):
    """Eigenvalues of an upper Hessenberg matrix by Francis double-shift QR.

    Works in place on ``h``; returns a complex array.
    """
    n = h.shape[0]
    eps = _DEFLATION_TOL
    wr = np.zeros(n, dtype=complex)
    anorm = float(np.sum(np.abs(np.triu(h, -1))))
    max_sweeps = _SWEEPS_PER_DIM * n
    sweeps = 0
    nn = n - 1
    t = 0.0
    its = 0
    while nn >= 0:
        l = nn
        while l > 0:
            s = abs(h[l - 1, l - 1]) + abs(h[l, l])
            if s == 0.0:
                s = anorm
            if abs(h[l, l - 1]) <= eps * s:
                h[l, l - 1] = 0.0
                break
            l -= 1
        x = h[nn, nn]
        if l == nn:
            wr[nn] = x + t
            nn -= 1
            its = 0
            continue
        y = h[nn - 1, nn - 1]
        w = h[nn, nn - 1] * h[nn - 1, nn]
        if l == nn - 1:
            p = 0.5 * (y - x)
            q = p * p + w
            z = math.sqrt(abs(q))
            x += t
            if q >= 0.0:
                z = p + math.copysign(z, p)
                wr[nn - 1] = wr[nn] = x + z
                if z != 0.0:
                    wr[nn] = x - w / z
            else:
                wr[nn - 1] = complex(x + p, z)
                wr[nn] = complex(x + p, -z)
            nn -= 2
            its = 0
            continue

        if sweeps >= max_sweeps:
            found = wr[nn + 1:].copy()
            raise ConvergenceError(
                f"QR iteration did not converge after {sweeps} sweeps; "
                f"{found.size} of {n} eigenvalues found",
                partial=found,
                iterations=sweeps,
            )
        if its in (10, 20):
            # exceptional shift
            t += x
            h[np.arange(nn + 1), np.arange(nn + 1)] -= x
            s = abs(h[nn, nn - 1]) + abs(h[nn - 1, nn - 2])
            y = x = 0.75 * s
            w = -0.4375 * s * s
        its += 1
        sweeps += 1

        m = nn - 2
        while m >= l:
            z = h[m, m]
            r = x - z
            s = y - z
            p = (r * s - w) / h[m + 1, m] + h[m, m + 1]
            q = h[m + 1, m + 1] - z - r - s
            r = h[m + 2, m + 1]
            s = abs(p) + abs(q) + abs(r)
            if s == 0.0:
                s = 1.0
            p /= s
            q /= s
            r /= s
            if m == l:
                break
            u = abs(h[m, m - 1]) * (abs(q) + abs(r))
            v = abs(p) * (abs(h[m - 1, m - 1]) + abs(z) + abs(h[m + 1, m + 1]))
            if u <= eps * v:
                break
            m -= 1
        for i in range(m, nn - 1):
            h[i + 2, i] = 0.0
            if i != m:
                h[i + 2, i - 1] = 0.0

        for k in range(m, nn):
            if k != m:
                p = h[k, k - 1]
                q = h[k + 1, k - 1]
                r = h[k + 2, k - 1] if k + 1 != nn else 0.0
                x = abs(p) + abs(q) + abs(r)
                if x != 0.0:
                    p /= x
                    q /= x
                    r /= x
            s = math.copysign(math.sqrt(p * p + q * q + r * r), p)
            if s == 0.0:
                continue
            if k == m:
                if l != m:
                    h[k, k - 1] = -h[k, k - 1]
            else:
                h[k, k - 1] = -s * x
            p += s
            x = p / s
            y = q / s
            z = r / s
            q /= p
            r /= p
            # apply reflector to rows k..k+2
            js = slice(k, nn + 1)
            pv = h[k, js] + q * h[k + 1, js]
            if k + 1 != nn:
                pv = pv + r * h[k + 2, js]
                h[k + 2, js] -= pv * z
            h[k + 1, js] -= pv * y
            h[k, js] -= pv * x
            # and to columns k..k+2
            mmin = min(nn, k + 3)
            ii = slice(l, mmin + 1)
            pv = x * h[ii, k] + y * h[ii, k + 1]
            if k + 1 != nn:
                pv = pv + z * h[ii, k + 2]
                h[ii, k + 2] -= pv * r
            h[ii, k + 1] -= pv * q
            h[ii, k] -= pv
    return wr


def eigenvalues(M):
    """All eigenvalues of a real square matrix, with multiplicity.

    Complex eigenvalues come out as exact conjugate pairs, the one with
    positive imaginary part first.

    Raises
    ------
    DimensionError
        If ``M`` is not square.
    ConvergenceError
        If the QR sweeps exceed ``40 * n``; ``partial`` holds the
        eigenvalues deflated so far.
    """
    a = np.array(_square(M, "M"), dtype=float, copy=True)
    if a.shape[0] == 1:
        return np.array([complex(a[0, 0])])
    amax = float(np.max(np.abs(a)))
    if amax == 0.0:
        return np.zeros(a.shape[0], dtype=complex)
    # power-of-two scaling is exact and keeps the sweeps clear of under/overflow
    scale = 2.0 ** math.frexp(amax)[1]
    a /= scale
    _balance(a)
    _hessenberg(a)
    return _hqr(a) * scale


def spectral_radius(M):
    """max |lambda| over all eigenvalues of ``M``."""
    return float(np.max(np.abs(eigenvalues(M))))


def max_real_part(M):
    """Largest real part among the eigenvalues of ``M``."""
    return float(np.max(eigenvalues(M).real))


def spectral_norm(M):
    """Largest singular value (operator 2-norm)."""
    return float(np.linalg.norm(as_matrix(M), 2))


def kron(A, B):
    return np.kron(as_matrix(A, "A"), as_matrix(B, "B"))
