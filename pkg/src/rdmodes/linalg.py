"""Dense linear-algebra kernels over a NumericContext.

Matrices are lists of row lists, vectors are flat lists; entries are
context scalars (floats at 16 digits, mpmath bigfloats above).  The
routines here are deliberately plain: partial-pivot elimination, one-sided
Jacobi SVD, Householder least squares, a small shifted-QR eigensolver, and
symmetric/tridiagonal eigensolvers used by the finite-difference spectrum
code.

All operations validate dimensions and raise the module's exception types
on numerical failure; thresholds are powers of ten tied to the context's
working precision.
"""
from __future__ import annotations

from .precision import NumericContext


class SingularMatrixError(ArithmeticError):
    """A pivot fell below the singularity threshold."""


class RankDeficientError(ArithmeticError):
    """Least-squares matrix has (numerically) dependent columns."""


class NoConvergenceError(ArithmeticError):
    """An iterative kernel exhausted its sweep or iteration budget."""


# ---------------------------------------------------------------------------
# shape helpers


def matrix_shape(a):
    """Return (rows, cols) of ``a``, checking rectangularity."""
    m = len(a)
    if m == 0:
        raise ValueError("empty matrix")
    n = len(a[0])
    for row in a:
        if len(row) != n:
            raise ValueError("ragged matrix rows")
    return m, n


def norm_inf(a):
    """Max absolute row sum of a matrix, or max magnitude of a vector."""
    if a and isinstance(a[0], (list, tuple)):
        return max(sum(abs(x) for x in row) for row in a)
    return max(abs(x) for x in a) if a else 0


def mat_vec(a, v):
    m, n = matrix_shape(a)
    if len(v) != n:
        raise ValueError(f"matrix is {m}x{n} but vector has length {len(v)}")
    return [sum(row[j] * v[j] for j in range(n)) for row in a]


def _identity(ctx, n):
    one, zero = ctx.num(1), ctx.num(0)
    return [[one if i == j else zero for j in range(n)] for i in range(n)]


# ---------------------------------------------------------------------------
# Gaussian elimination


def solve_linear(ctx: NumericContext, a, b):
    """Solve ``a x = b`` by Gaussian elimination with partial pivoting.

    Raises SingularMatrixError when the selected pivot magnitude drops
    below ``10**(-digits+4) * norm_inf(a)``.
    """
    m, n = matrix_shape(a)
    if m != n:
        raise ValueError(f"matrix must be square, got {m}x{n}")
    if len(b) != n:
        raise ValueError(f"rhs length {len(b)} does not match order {n}")
    scale = norm_inf(a)
    if scale == 0:
        raise SingularMatrixError("zero matrix")
    threshold = ctx.tol(4) * scale
    work = [list(row) for row in a]
    rhs = list(b)
    for k in range(n):
        piv_row = max(range(k, n), key=lambda r: abs(work[r][k]))
        piv = work[piv_row][k]
        if abs(piv) < threshold:
            raise SingularMatrixError(
                f"pivot {float(abs(piv)):.3e} below threshold "
                f"{float(threshold):.3e} in column {k}"
            )
        if piv_row != k:
            work[k], work[piv_row] = work[piv_row], work[k]
            rhs[k], rhs[piv_row] = rhs[piv_row], rhs[k]
        for i in range(k + 1, n):
            factor = work[i][k] / piv
            if factor == 0:
                continue
            work[i][k] = ctx.num(0)
            for j in range(k + 1, n):
                work[i][j] -= factor * work[k][j]
            rhs[i] -= factor * rhs[k]
    return _back_substitute(work, rhs)


def _back_substitute(upper, rhs):
    n = len(rhs)
    x = [None] * n
    for i in range(n - 1, -1, -1):
        acc = rhs[i]
        row = upper[i]
        for j in range(i + 1, n):
            acc -= row[j] * x[j]
        x[i] = acc / row[i]
    return x


def condition_estimate(ctx: NumericContext, a):
    """Cheap infinity-norm condition estimate ``norm(a) * norm(a^-1)``.

    Computes the explicit inverse column by column; meant for the small
    (order <= a few dozen) systems this package deals in.  Returns context
    +inf when the elimination breaks down, so callers can use the estimate
    directly in reliability thresholds.
    """
    m, n = matrix_shape(a)
    if m != n:
        raise ValueError("condition estimate needs a square matrix")
    try:
        cols = []
        for j in range(n):
            e = [ctx.num(0)] * n
            e[j] = ctx.num(1)
            cols.append(solve_linear(ctx, a, e))
        inv_norm = max(
            sum(abs(cols[j][i]) for j in range(n)) for i in range(n)
        )
    except SingularMatrixError:
        return ctx.num("inf")
    return norm_inf(a) * inv_norm


# ---------------------------------------------------------------------------
# least squares


def least_squares(ctx: NumericContext, a, b):
    """Minimise ``|a x - b|_2`` via Householder QR (requires rows >= cols).

    Raises RankDeficientError when a diagonal entry of R falls below
    ``10**(-digits+4) * norm_inf(a)``.
    """
    m, n = matrix_shape(a)
    if m < n:
        raise ValueError(f"need at least as many rows as columns, got {m}x{n}")
    if len(b) != m:
        raise ValueError(f"rhs length {len(b)} does not match row count {m}")
    threshold = ctx.tol(4) * norm_inf(a)
    r = [list(row) for row in a]
    y = list(b)
    zero = ctx.num(0)
    for k in range(n):
        norm2 = zero
        for i in range(k, m):
            norm2 += r[i][k] * r[i][k]
        norm = ctx.sqrt(norm2)
        if norm < threshold:
            raise RankDeficientError(
                f"column {k} has no remaining weight ({float(norm):.3e})"
            )
        alpha = -norm if r[k][k] >= 0 else norm
        v = [r[k][k] - alpha] + [r[i][k] for i in range(k + 1, m)]
        vnorm2 = zero
        for t in v:
            vnorm2 += t * t
        if vnorm2 == 0:
            continue
        for j in range(k, n):
            s = zero
            for i in range(k, m):
                s += v[i - k] * r[i][j]
            tau = (s + s) / vnorm2
            for i in range(k, m):
                r[i][j] -= tau * v[i - k]
        s = zero
        for i in range(k, m):
            s += v[i - k] * y[i]
        tau = (s + s) / vnorm2
        for i in range(k, m):
            y[i] -= tau * v[i - k]
        r[k][k] = alpha
        for i in range(k + 1, m):
            r[i][k] = zero
    square = [row[:n] for row in r[:n]]
    return _back_substitute(square, y[:n])


# ---------------------------------------------------------------------------
# one-sided Jacobi SVD

_SVD_MAX_SWEEPS = 30


def svd(ctx: NumericContext, a):
    """Thin SVD ``a = u @ diag(s) @ v^T`` by one-sided Jacobi rotations.

    ``a`` must have at least as many rows as columns.  Returns
    ``(u, s, v)`` with singular values sorted descending; u is m x n with
    orthonormal columns (completed for exactly-zero singular values), v is
    n x n.  Raises NoConvergenceError after 30 sweeps without reaching the
    rotation tolerance.
    """
    m, n = matrix_shape(a)
    if m < n:
        raise ValueError(f"need rows >= cols, got {m}x{n}")
    cols = [[a[i][j] for i in range(m)] for j in range(n)]
    v = _identity(ctx, n)
    one = ctx.num(1)
    eps = ctx.eps
    converged = False
    for _ in range(_SVD_MAX_SWEEPS):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = sum(x * x for x in cols[p])
                beta = sum(x * x for x in cols[q])
                gamma = sum(x * y for x, y in zip(cols[p], cols[q]))
                if alpha == 0 or beta == 0:
                    continue
                if abs(gamma) <= eps * ctx.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (gamma + gamma)
                if zeta >= 0:
                    t = one / (zeta + ctx.sqrt(one + zeta * zeta))
                else:
                    t = -one / (-zeta + ctx.sqrt(one + zeta * zeta))
                c = one / ctx.sqrt(one + t * t)
                s = c * t
                for i in range(m):
                    xp, xq = cols[p][i], cols[q][i]
                    cols[p][i] = c * xp - s * xq
                    cols[q][i] = s * xp + c * xq
                for i in range(n):
                    vp, vq = v[i][p], v[i][q]
                    v[i][p] = c * vp - s * vq
                    v[i][q] = s * vp + c * vq
        if not rotated:
            converged = True
            break
    if not converged:
        raise NoConvergenceError(
            f"Jacobi SVD did not settle in {_SVD_MAX_SWEEPS} sweeps"
        )
    sigma = [ctx.sqrt(sum(x * x for x in col)) for col in cols]
    order = sorted(range(n), key=lambda j: -sigma[j])
    sigma_sorted = [sigma[j] for j in order]
    u_cols = []
    for j in order:
        if sigma[j] > 0:
            u_cols.append([x / sigma[j] for x in cols[j]])
        else:
            u_cols.append(None)
    for idx, col in enumerate(u_cols):
        if col is None:
            u_cols[idx] = _orthonormal_completion(ctx, u_cols, m)
    u = [[u_cols[j][i] for j in range(n)] for i in range(m)]
    v_sorted = [[v[i][j] for j in order] for i in range(n)]
    return u, sigma_sorted, v_sorted


def _orthonormal_completion(ctx, partial_cols, m):
    """Unit vector orthogonal to every non-None column in ``partial_cols``."""
    best = None
    best_norm = ctx.num(-1)
    for k in range(m):
        cand = [ctx.num(0)] * m
        cand[k] = ctx.num(1)
        for col in partial_cols:
            if col is None:
                continue
            proj = sum(c * x for c, x in zip(cand, col))
            for i in range(m):
                cand[i] -= proj * col[i]
        nrm = ctx.sqrt(sum(x * x for x in cand))
        if nrm > best_norm:
            best, best_norm = cand, nrm
    if best_norm <= 0:
        raise NoConvergenceError("cannot complete orthonormal basis")
    return [x / best_norm for x in best]


# ---------------------------------------------------------------------------
# small dense eigenvalues (shifted complex QR)

_EIG_MAX_ORDER = 16


def eig_small(ctx: NumericContext, a, iteration_factor: int = 100):
    """Eigenvalues of a small real matrix as (real, imag) context pairs.

    Reduces to Hessenberg form, then runs a Wilkinson-shifted complex QR
    iteration with deflation.  Intended for matrices of order <= 16 (the
    rotation solves inside the exponential-sum fit); larger input is
    rejected.  Raises NoConvergenceError if the iteration budget
    ``iteration_factor * n`` is exhausted.  Output is sorted by real part
    then imaginary part.
    """
    m, n = matrix_shape(a)
    if m != n:
        raise ValueError(f"matrix must be square, got {m}x{n}")
    if n > _EIG_MAX_ORDER:
        raise ValueError(f"order {n} exceeds the small-matrix limit {_EIG_MAX_ORDER}")
    if n == 1:
        return [(ctx.num(a[0][0]), ctx.num(0))]
    h = _hessenberg(ctx, a)
    h = [[ctx.complex_of(x) for x in row] for row in h]
    eps = ctx.eps
    evals = []
    budget = iteration_factor * n
    steps = 0
    hi = n - 1
    while hi >= 0:
        for i in range(hi):
            if abs(h[i + 1][i]) <= eps * (abs(h[i][i]) + abs(h[i + 1][i + 1])):
                h[i + 1][i] = ctx.complex_of(0)
        if hi == 0 or h[hi][hi - 1] == 0:
            evals.append(h[hi][hi])
            hi -= 1
            continue
        lo = hi - 1
        while lo > 0 and h[lo][lo - 1] != 0:
            lo -= 1
        if hi - lo == 1:
            evals.extend(
                _eig_2x2(ctx, h[lo][lo], h[lo][hi], h[hi][lo], h[hi][hi])
            )
            hi -= 2
            continue
        steps += 1
        if steps > budget:
            raise NoConvergenceError(
                f"QR iteration exceeded {budget} steps at block [{lo},{hi}]"
            )
        mu = _wilkinson_shift(ctx, h, hi)
        _qr_step(ctx, h, lo, hi, mu)
    re_im = [(z.real, z.imag) for z in evals]
    re_im.sort(key=lambda p: (p[0], p[1]))
    return re_im


def _hessenberg(ctx, a):
    n = len(a)
    h = [[ctx.num(x) for x in row] for row in a]
    zero = ctx.num(0)
    for k in range(n - 2):
        norm2 = zero
        for i in range(k + 1, n):
            norm2 += h[i][k] * h[i][k]
        norm = ctx.sqrt(norm2)
        if norm == 0:
            continue
        alpha = -norm if h[k + 1][k] >= 0 else norm
        v = [h[k + 1][k] - alpha] + [h[i][k] for i in range(k + 2, n)]
        vnorm2 = zero
        for t in v:
            vnorm2 += t * t
        if vnorm2 == 0:
            continue
        for j in range(k, n):
            s = zero
            for i in range(k + 1, n):
                s += v[i - k - 1] * h[i][j]
            tau = (s + s) / vnorm2
            for i in range(k + 1, n):
                h[i][j] -= tau * v[i - k - 1]
        for i in range(n):
            s = zero
            for j in range(k + 1, n):
                s += v[j - k - 1] * h[i][j]
            tau = (s + s) / vnorm2
            for j in range(k + 1, n):
                h[i][j] -= tau * v[j - k - 1]
        h[k + 1][k] = alpha
        for i in range(k + 2, n):
            h[i][k] = zero
    return h


def _eig_2x2(ctx, a, b, c, d):
    tr = a + d
    disc = ctx.csqrt((a - d) * (a - d) + 4 * b * c)
    half = ctx.num(2)
    return [(tr + disc) / half, (tr - disc) / half]


def _wilkinson_shift(ctx, h, hi):
    a, b = h[hi - 1][hi - 1], h[hi - 1][hi]
    c, d = h[hi][hi - 1], h[hi][hi]
    e1, e2 = _eig_2x2(ctx, a, b, c, d)
    return e1 if abs(e1 - d) <= abs(e2 - d) else e2


def _qr_step(ctx, h, lo, hi, mu):
    for i in range(lo, hi + 1):
        h[i][i] -= mu
    rots = []
    for i in range(lo, hi):
        f, g = h[i][i], h[i + 1][i]
        r = ctx.sqrt((abs(f) * abs(f)) + (abs(g) * abs(g)))
        if r == 0:
            c = ctx.complex_of(1)
            s = ctx.complex_of(0)
        else:
            c, s = f / r, g / r
        rots.append((c, s))
        cc, sc = c.conjugate(), s.conjugate()
        for col in range(i, hi + 1):
            u, w = h[i][col], h[i + 1][col]
            h[i][col] = cc * u + sc * w
            h[i + 1][col] = -s * u + c * w
    for j, (c, s) in enumerate(rots):
        i = lo + j
        sc, cc = s.conjugate(), c.conjugate()
        for row in range(lo, i + 2):
            u, w = h[row][i], h[row][i + 1]
            h[row][i] = u * c + w * s
            h[row][i + 1] = -u * sc + w * cc
    for i in range(lo, hi + 1):
        h[i][i] += mu


# ---------------------------------------------------------------------------
# symmetric / tridiagonal eigensolvers (for discretised diffusion operators)


def tridiagonalize_symmetric(ctx: NumericContext, a):
    """Householder reduction of a symmetric matrix to tridiagonal form.

    Returns ``(diag, off, q)`` with ``a = q @ T @ q^T`` where T has main
    diagonal ``diag`` and symmetric off-diagonal ``off``.  Symmetry of the
    input is trusted, not checked (the callers build their matrices).
    """
    n, nc = matrix_shape(a)
    if n != nc:
        raise ValueError("matrix must be square")
    h = [[ctx.num(x) for x in row] for row in a]
    q = _identity(ctx, n)
    zero = ctx.num(0)
    for k in range(n - 2):
        norm2 = zero
        for i in range(k + 1, n):
            norm2 += h[i][k] * h[i][k]
        norm = ctx.sqrt(norm2)
        if norm == 0:
            continue
        alpha = -norm if h[k + 1][k] >= 0 else norm
        v = [ctx.num(0)] * n
        v[k + 1] = h[k + 1][k] - alpha
        for i in range(k + 2, n):
            v[i] = h[i][k]
        vnorm2 = zero
        for t in v:
            vnorm2 += t * t
        if vnorm2 == 0:
            continue
        # two-sided application to h
        for j in range(n):
            s = zero
            for i in range(k + 1, n):
                s += v[i] * h[i][j]
            tau = (s + s) / vnorm2
            for i in range(k + 1, n):
                h[i][j] -= tau * v[i]
        for i in range(n):
            s = zero
            for j in range(k + 1, n):
                s += v[j] * h[i][j]
            tau = (s + s) / vnorm2
            for j in range(k + 1, n):
                h[i][j] -= tau * v[j]
        # accumulate q := q    @ householder
        for i in range(n):
            s = zero
            for j in range(k + 1, n):
                s += v[j] * q[i][j]
            tau = (s + s) / vnorm2
            for j in range(k + 1, n):
                q[i][j] -= tau * v[j]
    diag = [h[i][i] for i in range(n)]
    off = [(h[i + 1][i] + h[i][i + 1]) / 2 for i in range(n - 1)]
    return diag, off, q


def _sturm_count(ctx, diag, off, x, pivmin):
    """Number of eigenvalues of the tridiagonal matrix strictly below x."""
    count = 0
    q = diag[0] - x
    if abs(q) < pivmin:
        q = -pivmin
    if q < 0:
        count += 1
    for i in range(1, len(diag)):
        q = diag[i] - x - off[i - 1] * off[i - 1] / q
        if abs(q) < pivmin:
            q = -pivmin
        if q < 0:
            count += 1
    return count


def _solve_shifted_tridiagonal(ctx, diag, off, shift, b, pivmin):
    """Solve (T - shift I) x = b with partial pivoting on the three bands."""
    n = len(diag)
    d = [diag[i] - shift for i in range(n)]
    u1 = [off[i] for i in range(n - 1)]
    u2 = [ctx.num(0)] * max(n - 2, 0)
    low = [off[i] for i in range(n - 1)]
    x = list(b)
    for k in range(n - 1):
        if abs(low[k]) > abs(d[k]):
            d[k], low[k] = low[k], d[k]
            u1[k], d[k + 1] = d[k + 1], u1[k]
            if k < n - 2:
                u2[k], u1[k + 1] = u1[k + 1], u2[k]
            x[k], x[k + 1] = x[k + 1], x[k]
        if abs(d[k]) < pivmin:
            d[k] = pivmin
        factor = low[k] / d[k]
        d[k + 1] -= factor * u1[k]
        if k < n - 2:
            u1[k + 1] -= factor * u2[k]
        x[k + 1] -= factor * x[k]
    if abs(d[n - 1]) < pivmin:
        d[n - 1] = pivmin
    out = [None] * n
    out[n - 1] = x[n - 1] / d[n - 1]
    for i in range(n - 2, -1, -1):
        acc = x[i] - u1[i] * out[i + 1]
        if i < n - 2:
            acc -= u2[i] * out[i + 2]
        out[i] = acc / d[i]
    return out


def tridiagonal_eigenpairs(ctx: NumericContext, diag, off, count=None):
    """Smallest ``count`` eigenpairs of a symmetric tridiagonal matrix.

    Eigenvalues by bisection on Sturm counts, eigenvectors by a few rounds
    of inverse iteration; returns ``(values, vectors)`` sorted ascending,
    vectors unit length with their largest component positive.
    """
    n = len(diag)
    if len(off) != n - 1:
        raise ValueError("off-diagonal length must be n-1")
    if count is None:
        count = n
    if not 1 <= count <= n:
        raise ValueError(f"count must be in [1, {n}]")
    zero = ctx.num(0)
    radius = [zero] * n
    for i in range(n):
        r = zero
        if i > 0:
            r += abs(off[i - 1])
        if i < n - 1:
            r += abs(off[i])
        radius[i] = r
    lo = min(diag[i] - radius[i] for i in range(n))
    hi = max(diag[i] + radius[i] for i in range(n))
    scale = max(abs(lo), abs(hi), ctx.num(1))
    pivmin = ctx.eps * ctx.eps * scale
    width_floor = 4 * ctx.eps * scale
    max_bisect = (ctx.digits * 7) // 2 + 24
    values = []
    for k in range(count):
        a, b = lo, hi
        for _ in range(max_bisect):
            mid = (a + b) / 2
            if b - a <= width_floor:
                break
            if _sturm_count(ctx, diag, off, mid, pivmin) <= k:
                a = mid
            else:
                b = mid
        values.append((a + b) / 2)
    vectors = []
    gap_tol = ctx.sqrt(ctx.eps) * scale
    for k, lam in enumerate(values):
        vec = _golden_start(ctx, n, k)
        for _ in range(4):
            vec = _solve_shifted_tridiagonal(ctx, diag, off, lam, vec, pivmin)
            if k > 0 and abs(values[k] - values[k - 1]) <= gap_tol:
                prev = vectors[k - 1]
                proj = sum(x * y for x, y in zip(vec, prev))
                vec = [x - proj * y for x, y in zip(vec, prev)]
            nrm = ctx.sqrt(sum(x * x for x in vec))
            if nrm == 0:
                vec = _golden_start(ctx, n, k + count)
                continue
            vec = [x / nrm for x in vec]
        peak = max(range(n), key=lambda i: abs(vec[i]))
        if vec[peak] < 0:
            vec = [-x for x in vec]
        vectors.append(vec)
    # Rayleigh-quotient polish: bisection stops at an absolute width, the
    # quotient restores relative accuracy for the small eigenvalues.
    for k, vec in enumerate(vectors):
        quad = sum(diag[i] * vec[i] * vec[i] for i in range(n))
        quad += 2 * sum(off[i] * vec[i] * vec[i + 1] for i in range(n - 1))
        values[k] = quad
    return values, vectors


def _golden_start(ctx, n, seed):
    phi = ctx.num("0.6180339887498948482045868343656381")
    vec = []
    for i in range(n):
        t = (seed + 1 + i) * phi
        vec.append((t - int(t)) - ctx.num("0.5"))
    return vec


def symmetric_eigenpairs(ctx: NumericContext, a, count=None):
    """Smallest ``count`` eigenpairs of a symmetric matrix.

    Householder tridiagonalisation followed by bisection plus inverse
    iteration, with the eigenvectors rotated back to the original basis.
    """
    diag, off, q = tridiagonalize_symmetric(ctx, a)
    values, tri_vecs = tridiagonal_eigenpairs(ctx, diag, off, count)
    n = len(diag)
    vectors = []
    for tv in tri_vecs:
        full = [sum(q[i][j] * tv[j] for j in range(n)) for i in range(n)]
        peak = max(range(n), key=lambda i: abs(full[i]))
        if full[peak] < 0:
            full = [-x for x in full]
        vectors.append(full)
    return values, vectors
