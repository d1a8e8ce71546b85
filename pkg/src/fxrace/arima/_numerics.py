"""Compiled numerics for exact Gaussian ARMA likelihood evaluation.

The likelihood is computed with a Kalman filter on the Harvey state-space
form of an ARMA(p, q) process, started from the exact stationary state
covariance. Regression coefficients (and an optional intercept column) are
profiled out of the likelihood by filtering the regressors alongside the
data and solving a weighted least-squares problem on the innovations, so
the optimizer only searches over the ARMA coefficients.

Stationarity and invertibility are enforced through the partial
autocorrelation transform: unconstrained reals map through tanh (scaled
slightly inside (-1, 1)) and the Durbin-Levinson recursion.

Everything here is nopython-compiled; keep inputs contiguous float64.
"""

import numpy as np
from numba import njit

BIG = 1e100
PACF_CAP = 0.998
LOG_2PI = 1.8378770664093453


@njit(cache=True)
def pacf_to_coef(raw):  # pragma: no cover
    """Map unconstrained reals to stationary AR coefficients.

    tanh (scaled by PACF_CAP) gives partial autocorrelations in (-1, 1);
    the Durbin-Levinson recursion turns them into AR coefficients whose
    polynomial roots lie outside the unit circle.
    """
    p = len(raw)
    new = np.empty(p)
    for i in range(p):
        new[i] = PACF_CAP * np.tanh(raw[i])
    work = np.empty(p)
    for j in range(1, p):
        a = new[j]
        for k in range(j):
            work[k] = new[k] - a * new[j - 1 - k]
        for k in range(j):
            new[k] = work[k]
    return new


@njit(cache=True)
def coef_to_pacf(coef):  # pragma: no cover
    """Inverse of :func:`pacf_to_coef`; returns (raw, ok)."""
    p = len(coef)
    pac = coef.copy()
    work = np.empty(p)
    for j in range(p - 1, 0, -1):
        a = pac[j]
        denom = 1.0 - a * a
        if abs(denom) < 1e-12:
            return np.zeros(p), False
        for k in range(j):
            work[k] = (pac[k] + a * pac[j - 1 - k]) / denom
        for k in range(j):
            pac[k] = work[k]
    raw = np.empty(p)
    for i in range(p):
        z = pac[i] / PACF_CAP
        if not np.isfinite(z) or abs(z) >= 1.0:
            z = 0.9999 if z > 0 else -0.9999
        raw[i] = np.arctanh(z)
    return raw, True


@njit(cache=True)
def expand_poly(nonseasonal, seasonal, period):  # pragma: no cover
    """Multiply (1 - sum a_i B^i) by (1 - sum A_j B^(j*s)); returns lag
    coefficients with the sign convention of the nonseasonal input."""
    p = len(nonseasonal)
    P = len(seasonal)
    if P == 0 or period == 0:
        return nonseasonal.copy()
    full = np.zeros(p + period * P)
    for i in range(p):
        full[i] = nonseasonal[i]
    for j in range(P):
        full[period * (j + 1) - 1] += seasonal[j]
        for i in range(p):
            full[period * (j + 1) + i] -= seasonal[j] * nonseasonal[i]
    return full


@njit(cache=True)
def assemble_arma(x, p, q, P, Q, period):  # pragma: no cover
    """Transform the packed parameter vector into full AR/MA coefficients.

    Layout of x: [p nonseasonal AR | q nonseasonal MA | P seasonal AR |
    Q seasonal MA]. The seasonal expansion for the MA side flips signs so
    that both sides multiply as (1 + sum theta B^k).
    """
    phi = pacf_to_coef(x[:p])
    theta = pacf_to_coef(x[p : p + q])
    Phi = pacf_to_coef(x[p + q : p + q + P])
    Theta = pacf_to_coef(x[p + q + P : p + q + P + Q])
    phi_full = expand_poly(phi, Phi, period)
    # (1 + t(B))(1 + T(B^s)) == (1 - (-t(B)))(1 - (-T(B^s)))
    theta_full = -expand_poly(-theta, -Theta, period)
    return phi_full, theta_full


@njit(cache=True)
def stationary_p0(phi, theta, m):  # pragma: no cover
    """Stationary state covariance: solve P = T P T' + R R' (unit variance)."""
    Tm = np.zeros((m, m))
    for i in range(len(phi)):
        Tm[i, 0] = phi[i]
    for i in range(m - 1):
        Tm[i, i + 1] = 1.0
    R = np.zeros(m)
    R[0] = 1.0
    for j in range(len(theta)):
        R[j + 1] = theta[j]
    mm = m * m
    A = np.zeros((mm, mm))
    b = np.zeros(mm)
    for i in range(m):
        for j in range(m):
            row = i * m + j
            b[row] = R[i] * R[j]
            for k in range(m):
                for l in range(m):
                    A[row, k * m + l] -= Tm[i, k] * Tm[j, l]
            A[row, row] += 1.0
    vecp = np.linalg.solve(A, b)
    P = np.empty((m, m))
    for i in range(m):
        for j in range(m):
            P[i, j] = vecp[i * m + j]
    return P


@njit(cache=True)
def filter_multi(W, phi, theta):  # pragma: no cover
    """Kalman filter of every column of W through the same ARMA(p, q) model.

    Returns (nu, F, a_next, ok): per-column innovations (n x c), common
    innovation variances F (unit-sigma scale), and the one-step-ahead
    predicted state for every column (m x c). The filter is linear in the
    data, so states and innovations of a linear combination of columns are
    the same combination of the outputs.
    """
    n, c = W.shape
    p = len(phi)
    q = len(theta)
    m = max(p, q + 1)
    nu = np.empty((n, c))
    F = np.empty(n)
    A = np.zeros((m, c))
    P = stationary_p0(phi, theta, m)
    if not np.all(np.isfinite(P)):
        return nu, F, A, False

    phi_pad = np.zeros(m)
    for i in range(p):
        phi_pad[i] = phi[i]
    R = np.zeros(m)
    R[0] = 1.0
    for j in range(q):
        R[j + 1] = theta[j]

    TP = np.empty((m, m))
    K = np.empty(m)
    anew = np.empty((m, c))
    steady = False
    for t in range(n):
        Ft = P[0, 0]
        if not (Ft > 1e-12) or not np.isfinite(Ft):
            return nu, F, A, False
        F[t] = Ft
        for j in range(c):
            nu[t, j] = W[t, j] - A[0, j]
        if steady:
            # K and P are at their steady-state values; only states move.
            for j in range(c):
                a0 = A[0, j]
                for i in range(m):
                    nxt = A[i + 1, j] if i + 1 < m else 0.0
                    anew[i, j] = phi_pad[i] * a0 + nxt + K[i] * nu[t, j]
            for i in range(m):
                for j in range(c):
                    A[i, j] = anew[i, j]
            continue
        # TP = T @ P, exploiting the companion structure of T
        for i in range(m):
            for j in range(m):
                v = phi_pad[i] * P[0, j]
                if i + 1 < m:
                    v += P[i + 1, j]
                TP[i, j] = v
        for i in range(m):
            K[i] = TP[i, 0] / Ft
        # state update for every column
        for j in range(c):
            a0 = A[0, j]
            for i in range(m):
                nxt = A[i + 1, j] if i + 1 < m else 0.0
                anew[i, j] = phi_pad[i] * a0 + nxt + K[i] * nu[t, j]
        for i in range(m):
            for j in range(c):
                A[i, j] = anew[i, j]
        # P <- T P T' + R R' - K F K'
        newP_change = 0.0
        for i in range(m):
            for j in range(i, m):
                v = phi_pad[j] * TP[i, 0]
                if j + 1 < m:
                    v += TP[i, j + 1]
                v += R[i] * R[j] - K[i] * Ft * K[j]
                newP_change += abs(v - P[i, j])
                P[i, j] = v
                P[j, i] = v
        if newP_change < 1e-12 * m * m:
            steady = True
    return nu, F, A, True


@njit(cache=True)
def _wls_solve(nu, F):  # pragma: no cover
    """Weighted least squares of innovations column 0 on the remaining
    columns with weights 1/F. Returns (beta, rss, ok); ok is False when the
    normal equations are numerically singular (collinear regressors)."""
    n, c = nu.shape
    r = c - 1
    beta = np.zeros(r)
    if r == 0:
        rss = 0.0
        for t in range(n):
            rss += nu[t, 0] * nu[t, 0] / F[t]
        return beta, rss, True
    G = np.zeros((r, r))
    bv = np.zeros(r)
    for t in range(n):
        w = 1.0 / F[t]
        for i in range(r):
            xi = nu[t, i + 1]
            bv[i] += w * xi * nu[t, 0]
            for j in range(i, r):
                G[i, j] += w * xi * nu[t, j + 1]
    for i in range(r):
        for j in range(i):
            G[i, j] = G[j, i]
    # Cholesky with a singularity guard
    L = np.zeros((r, r))
    scale = 0.0
    for i in range(r):
        scale += G[i, i]
    if scale <= 0.0:
        return beta, 0.0, False
    tol = 1e-13 * scale
    for i in range(r):
        for j in range(i + 1):
            s = G[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            if i == j:
                if s <= tol:
                    return beta, 0.0, False
                L[i, i] = np.sqrt(s)
            else:
                L[i, j] = s / L[j, j]
    # solve L L' beta = bv
    y = np.zeros(r)
    for i in range(r):
        s = bv[i]
        for k in range(i):
            s -= L[i, k] * y[k]
        y[i] = s / L[i, i]
    for i in range(r - 1, -1, -1):
        s = y[i]
        for k in range(i + 1, r):
            s -= L[k, i] * beta[k]
        beta[i] = s / L[i, i]
    rss = 0.0
    for t in range(n):
        e = nu[t, 0]
        for i in range(r):
            e -= nu[t, i + 1] * beta[i]
        rss += e * e / F[t]
    return beta, rss, True


@njit(cache=True)
def profile_nll(x, W, p, q, P, Q, period):  # pragma: no cover
    """Mean negative log-likelihood with sigma2 and regression coefficients
    concentrated out. Returns BIG on any numerical failure."""
    phi, theta = assemble_arma(x, p, q, P, Q, period)
    nu, F, _, ok = filter_multi(W, phi, theta)
    if not ok:
        return BIG
    _, rss, ok = _wls_solve(nu, F)
    if not ok:
        return BIG
    n = W.shape[0]
    sigma2 = rss / n
    if not (sigma2 > 0.0) or not np.isfinite(sigma2):
        return BIG
    mean_logf = 0.0
    for t in range(n):
        mean_logf += np.log(F[t])
    mean_logf /= n
    return 0.5 * (LOG_2PI + 1.0 + np.log(sigma2)) + 0.5 * mean_logf


@njit(cache=True)
def _gradient(x, W, p, q, P, Q, period, h):  # pragma: no cover
    k = len(x)
    g = np.empty(k)
    xt = x.copy()
    for i in range(k):
        xi = x[i]
        xt[i] = xi + h
        fp = profile_nll(xt, W, p, q, P, Q, period)
        xt[i] = xi - h
        fm = profile_nll(xt, W, p, q, P, Q, period)
        xt[i] = xi
        g[i] = (fp - fm) / (2.0 * h)
    return g


@njit(cache=True)
def fit_profile(W, p, q, P, Q, period, x0, gtol, maxiter):  # pragma: no cover
    """BFGS minimization of the concentrated mean negative log-likelihood.

    Quasi-Newton with central-difference gradients and a backtracking
    Armijo line search; the inverse-Hessian approximation resets to the
    identity when a search direction fails. Returns (x, nll, converged,
    iterations). Convergence means the gradient norm dropped below gtol or
    the step and objective both stagnated at machine-practical precision.
    """
    k = len(x0)
    x = x0.copy()
    f = profile_nll(x, W, p, q, P, Q, period)
    if k == 0:
        return x, f, f < BIG, 0
    if f >= BIG:
        # zero start is in the stationary region, so this means the data are
        # degenerate; report failure at the start point
        return x, f, False, 0
    h = 1e-5
    g = _gradient(x, W, p, q, P, Q, period, h)
    H = np.eye(k)
    d = np.empty(k)
    xn = np.empty(k)
    reset_used = False
    stall = 0
    it = 0
    for it in range(1, maxiter + 1):
        gmax = 0.0
        for i in range(k):
            if abs(g[i]) > gmax:
                gmax = abs(g[i])
        if gmax < gtol:
            return x, f, True, it
        for i in range(k):
            s = 0.0
            for j in range(k):
                s -= H[i, j] * g[j]
            d[i] = s
        slope = 0.0
        for i in range(k):
            slope += g[i] * d[i]
        if slope >= 0.0:
            H = np.eye(k)
            for i in range(k):
                d[i] = -g[i]
            slope = 0.0
            for i in range(k):
                slope += g[i] * d[i]
        dmax = 0.0
        for i in range(k):
            if abs(d[i]) > dmax:
                dmax = abs(d[i])
        # cap the trial displacement: beyond ~2 the tanh map saturates and the
        # search would strand itself on a flat plateau
        step = 1.0 if dmax <= 2.0 else 2.0 / dmax
        fn = BIG
        ok_step = False
        for _ in range(40):
            for i in range(k):
                xn[i] = x[i] + step * d[i]
            fn = profile_nll(xn, W, p, q, P, Q, period)
            if fn <= f + 1e-4 * step * slope:
                ok_step = True
                break
            step *= 0.5
        if not ok_step:
            if reset_used:
                return x, f, gmax < 1e-4, it
            H = np.eye(k)
            reset_used = True
            continue
        gn = _gradient(xn, W, p, q, P, Q, period, h)
        # stagnation check
        df = f - fn
        dxmax = 0.0
        for i in range(k):
            if abs(xn[i] - x[i]) > dxmax:
                dxmax = abs(xn[i] - x[i])
        # BFGS inverse update
        sy = 0.0
        for i in range(k):
            sy += (xn[i] - x[i]) * (gn[i] - g[i])
        if sy > 1e-12:
            rho = 1.0 / sy
            Hy = np.empty(k)
            for i in range(k):
                s = 0.0
                for j in range(k):
                    s += H[i, j] * (gn[j] - g[j])
                Hy[i] = s
            yHy = 0.0
            for i in range(k):
                yHy += (gn[i] - g[i]) * Hy[i]
            for i in range(k):
                si = xn[i] - x[i]
                for j in range(k):
                    sj = xn[j] - x[j]
                    H[i, j] += (
                        (1.0 + rho * yHy) * rho * si * sj
                        - rho * (Hy[i] * sj + si * Hy[j])
                    )
        for i in range(k):
            x[i] = xn[i]
            g[i] = gn[i]
        f = fn
        if df < 1e-12 * (1.0 + abs(f)) and dxmax < 1e-8:
            return x, f, True, it
        # a flat likelihood ridge (e.g. AR/MA root cancellation) never meets
        # the gradient tolerance; repeated negligible progress counts as done
        if df < 1e-11 * (1.0 + abs(f)):
            stall += 1
            if stall >= 3:
                return x, f, True, it
        else:
            stall = 0
    return x, f, False, it


@njit(cache=True)
def profile_details(x, W, p, q, P, Q, period):  # pragma: no cover
    """Full fit output at a parameter vector: regression coefficients,
    innovation variance, per-observation log-likelihood pieces, composite
    residual innovations and the predicted next state of the composite
    (regression-adjusted) process. Returns ok=False on numerical failure."""
    n, c = W.shape
    r = c - 1
    phi, theta = assemble_arma(x, p, q, P, Q, period)
    m = max(len(phi), len(theta) + 1)
    nu, F, A, ok = filter_multi(W, phi, theta)
    beta = np.zeros(r)
    resid = np.empty(n)
    state = np.zeros(m)
    if not ok:
        return beta, 0.0, -BIG, resid, state, phi, theta, False
    beta, rss, ok = _wls_solve(nu, F)
    if not ok:
        return beta, 0.0, -BIG, resid, state, phi, theta, False
    sigma2 = rss / n
    if not (sigma2 > 0.0) or not np.isfinite(sigma2):
        return beta, sigma2, -BIG, resid, state, phi, theta, False
    sum_logf = 0.0
    for t in range(n):
        e = nu[t, 0]
        for i in range(r):
            e -= nu[t, i + 1] * beta[i]
        resid[t] = e
        sum_logf += np.log(F[t])
    for i in range(m):
        s = A[i, 0]
        for j in range(r):
            s -= A[i, j + 1] * beta[j]
        state[i] = s
    loglik = -0.5 * n * (LOG_2PI + 1.0 + np.log(sigma2)) - 0.5 * sum_logf
    return beta, sigma2, loglik, resid, state, phi, theta, True
