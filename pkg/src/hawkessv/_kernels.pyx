# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops.

Every function here has a line-for-line twin in ``_pykernels.py``; the two
must agree to floating-point round-off for identical inputs.  Random numbers
are always drawn by the caller and passed in, so the backends consume the
same stream.
"""
import numpy as np

from libc.math cimport exp, fabs, log, log1p, sqrt, M_PI
from scipy.special.cython_special cimport log_ndtr, ndtr, ndtri

cdef double LOG2PI = log(2.0 * M_PI)
cdef double EPS = 1e-10


cdef inline double clamp01(double d) noexcept nogil:
    if d < EPS:
        return EPS
    if d > 1.0 - EPS:
        return 1.0 - EPS
    return d


cdef inline double bern_logpmf(int k, double d) noexcept nogil:
    if k:
        return log(d)
    return log1p(-d)


def hawkes_path(double alpha, double delta_inf, double delta1, double[::1] drive,
                double[::1] out):
    """delta_t = alpha*delta_inf + (1-alpha)*delta_{t-1} + drive_{t-1}, clamped."""
    cdef Py_ssize_t t, n = out.shape[0]
    cdef double a = alpha * delta_inf, b = 1.0 - alpha
    if n == 0:
        return
    out[0] = clamp01(delta1)
    for t in range(1, n):
        out[t] = clamp01(a + b * out[t - 1] + drive[t - 1])


def data_logdensity(double[::1] x, double[::1] lnbv, signed char[::1] dnp,
                    double[::1] zp, double[::1] V, double[::1] zv,
                    signed char[::1] dnv, double[::1] dp, double[::1] dv,
                    double mu, double gamma, double mu_p, double gamma_p,
                    double sigma_p, double sigma_bv, double kappa, double theta,
                    double psi, double s2, double mu_v, int price_jumps,
                    int zv_terms, int dnv_bern):
    """Sum of all measurement, transition and latent-prior log terms."""
    cdef Py_ssize_t t, n = x.shape[0]
    cdef double tot = 0.0, v, e, m, sd, lsb = log(sigma_bv), lsp = 0.0
    cdef double b = 1.0 - kappa - psi * gamma, lmv = 0.0
    if price_jumps:
        lsp = log(sigma_p)
    if zv_terms:
        lmv = log(mu_v)
    for t in range(n):
        v = V[t]
        if not (v > 0.0):
            return -np.inf
        e = x[t] - mu - gamma * v
        tot += -0.5 * (LOG2PI + log(v)) - 0.5 * e * e / v
        e = lnbv[t] - log(v)
        tot += -0.5 * LOG2PI - lsb - 0.5 * e * e / (sigma_bv * sigma_bv)
        if price_jumps:
            if dnp[t]:
                e = zp[t] - mu_p - gamma_p * v
                tot += -0.5 * LOG2PI - lsp - 0.5 * e * e / (sigma_p * sigma_p)
            tot += bern_logpmf(dnp[t], dp[t])
        if zv_terms:
            tot += -lmv - zv[t] / mu_v
        if dnv_bern and t > 0:
            tot += bern_logpmf(dnv[t], dv[t])
        if t + 1 < n:
            m = kappa * theta + psi * (x[t] - mu) + b * v + zv[t] * dnv[t]
            sd = sqrt(s2 * v)
            e = V[t + 1] - m
            tot += -0.5 * LOG2PI - log(sd) - 0.5 * e * e / (sd * sd) - log_ndtr(m / sd)
    return tot


cdef inline double sigmoid(double lo) noexcept nogil:
    if lo >= 0:
        return 1.0 / (1.0 + exp(-lo))
    return exp(lo) / (1.0 + exp(lo))


def sweep_dnv(signed char[::1] dnv, double[::1] dv, double[::1] lt_diff,
              double[::1] base, double[::1] u, double alpha, double delta_inf,
              double beta_vv, double drive_max, double[::1] work):
    """Single-site Gibbs sweep over variance-jump occurrences t >= 1.

    ``lt_diff[t]`` is the transition log-density difference (jump minus no
    jump) for V_{t+1}.  Flipping dNv_t changes every later intensity; the
    log-ratio of the downstream Bernoulli terms is accumulated until the two
    intensity paths coincide bitwise, except that the draw is settled early
    once a rigorous bound on the remaining (geometrically decaying) terms
    shows which side of the uniform the conditional probability lies.  The
    outcome is the exact Gibbs draw.  Returns the number of flips.
    """
    cdef Py_ssize_t t, s, s2, n = dnv.shape[0]
    cdef int cur, new, flips = 0, decided
    cdef double a, acc, prod, lo0, lo, bound, dd, lb, ub, mm, y, c = 1.0 - alpha
    cdef double ad = alpha * delta_inf, b = 1.0 - alpha
    cdef double hi_level = delta_inf + drive_max / alpha
    for t in range(1, n):
        cur = dnv[t]
        lo0 = lt_diff[t] + log(dv[t]) - log1p(-dv[t])
        acc = 0.0
        prod = 1.0
        decided = -1
        s = t + 1
        while s < n:
            if s == t + 1:
                a = clamp01(ad + b * dv[t] + base[t] + beta_vv * (1 - cur))
            else:
                a = clamp01(ad + b * work[s - 1] + base[s - 1] + beta_vv * dnv[s - 1])
            if a == dv[s]:
                break
            work[s] = a
            if dnv[s]:
                prod *= a / dv[s]
            else:
                prod *= (1.0 - a) / (1.0 - dv[s])
            s += 1
            if (s - t) % 16 == 0 and s < n:
                acc += log(prod)
                prod = 1.0
                # bound on the terms s, s+1, ... not yet accumulated
                dd = fabs(work[s - 1] - dv[s - 1]) * c
                lb = delta_inf if delta_inf < dv[s - 1] else dv[s - 1]
                if work[s - 1] < lb:
                    lb = work[s - 1]
                if lb < EPS:
                    lb = EPS
                ub = hi_level
                if dv[s - 1] > ub:
                    ub = dv[s - 1]
                if work[s - 1] > ub:
                    ub = work[s - 1]
                if ub > 1.0 - EPS:
                    ub = 1.0 - EPS
                mm = lb if lb < 1.0 - ub else 1.0 - ub
                y = dd / mm
                if y < 0.5:
                    bound = 1.000001 * y / ((1.0 - y) * alpha) + 1e-12
                    lo = acc if cur == 0 else -acc
                    if u[t] < sigmoid(lo0 + lo - bound):
                        decided = 1
                        break
                    if u[t] >= sigmoid(lo0 + lo + bound):
                        decided = 0
                        break
        if decided < 0:
            acc += log(prod)
            lo = lo0 + (acc if cur == 0 else -acc)
            new = 1 if u[t] < sigmoid(lo) else 0
        else:
            new = decided
        if new != cur:
            flips += 1
            dnv[t] = new
            # finish the alternative path (no densities needed) and commit it
            while s < n:
                if s == t + 1:
                    a = clamp01(ad + b * dv[t] + base[t] + beta_vv * (1 - cur))
                else:
                    a = clamp01(ad + b * work[s - 1] + base[s - 1] + beta_vv * dnv[s - 1])
                if a == dv[s]:
                    break
                work[s] = a
                s += 1
            for s2 in range(t + 1, s):
                dv[s2] = work[s2]
    return flips


cdef class _VBlock:
    """Local log target of a block of log-variances and its derivatives."""
    cdef double[::1] V, x, lnbv, zp, zv
    cdef signed char[::1] dnp, dnv
    cdef double mu, gamma, mu_p, gamma_p, sigma_p, sigma_bv, kappa, theta, psi, s2
    cdef double ap0, alp, av0, alv, b
    cdef int price_jumps, m5, dnv_bern
    cdef Py_ssize_t n

    def __init__(self, V, x, lnbv, dnp, zp, zv, dnv, double mu, double gamma,
                 double mu_p, double gamma_p, double sigma_p, double sigma_bv,
                 double kappa, double theta, double psi, double s2,
                 int price_jumps, int m5, double ap0, double alp, double av0,
                 double alv, int dnv_bern):
        self.V = V
        self.x = x
        self.lnbv = lnbv
        self.dnp = dnp
        self.zp = zp
        self.zv = zv
        self.dnv = dnv
        self.mu = mu
        self.gamma = gamma
        self.mu_p = mu_p
        self.gamma_p = gamma_p
        self.sigma_p = sigma_p
        self.sigma_bv = sigma_bv
        self.kappa = kappa
        self.theta = theta
        self.psi = psi
        self.s2 = s2
        self.price_jumps = price_jumps
        self.m5 = m5
        self.ap0 = ap0
        self.alp = alp
        self.av0 = av0
        self.alv = alv
        self.dnv_bern = dnv_bern
        self.b = 1.0 - kappa - psi * gamma
        self.n = self.V.shape[0]

    cdef inline double _c(self, Py_ssize_t t) noexcept nogil:
        return self.kappa * self.theta + self.psi * (self.x[t] - self.mu) + self.zv[t] * self.dnv[t]

    cdef double meas(self, Py_ssize_t t, double h) noexcept nogil:
        # measurement terms at t as a density in h = log V (Jacobian included)
        cdef double v = exp(h), e, tot
        e = self.x[t] - self.mu - self.gamma * v
        tot = -0.5 * h - 0.5 * e * e / v
        e = self.lnbv[t] - h
        tot += -0.5 * e * e / (self.sigma_bv * self.sigma_bv) + h
        if self.price_jumps and self.dnp[t]:
            e = self.zp[t] - self.mu_p - self.gamma_p * v
            tot += -0.5 * e * e / (self.sigma_p * self.sigma_p)
        if self.m5:
            if self.price_jumps:
                tot += bern_logpmf(self.dnp[t], clamp01(self.ap0 + self.alp * v))
            if self.dnv_bern and t > 0:
                tot += bern_logpmf(self.dnv[t], clamp01(self.av0 + self.alv * v))
        return tot

    cdef double trans(self, Py_ssize_t t, double u, double w) noexcept nogil:
        cdef double m = self._c(t) + self.b * u
        cdef double var = self.s2 * u
        cdef double e = w - m
        return -0.5 * log(var) - 0.5 * e * e / var - log_ndtr(m / sqrt(var))

    cdef double target(self, Py_ssize_t a, Py_ssize_t nb, double* h) noexcept nogil:
        cdef Py_ssize_t i, t
        cdef double tot = 0.0
        for i in range(nb):
            tot += self.meas(a + i, h[i])
        tot += self.trans(a - 1, self.V[a - 1], exp(h[0]))
        for i in range(nb - 1):
            tot += self.trans(a + i, exp(h[i]), exp(h[i + 1]))
        t = a + nb - 1
        if t + 1 < self.n:
            tot += self.trans(t, exp(h[nb - 1]), self.V[t + 1])
        return tot

    cdef void derivs(self, Py_ssize_t a, Py_ssize_t nb, double* h, double* g,
                     double* d, double* o) noexcept nogil:
        # gradient g, Hessian diagonal d and super-diagonal o (truncation
        # normaliser and state-dependent Bernoulli terms are left out)
        cdef Py_ssize_t i, t
        cdef double v, aa, e, s2 = self.s2, b = self.b, sb2 = self.sigma_bv * self.sigma_bv
        cdef double u, w, fu, fw, fuu, fww, fuw, sp2
        for i in range(nb):
            t = a + i
            v = exp(h[i])
            aa = self.x[t] - self.mu
            g[i] = -0.5 + aa * aa / (2.0 * v) - self.gamma * self.gamma * v / 2.0
            d[i] = -aa * aa / (2.0 * v) - self.gamma * self.gamma * v / 2.0
            g[i] += (self.lnbv[t] - h[i]) / sb2 + 1.0
            d[i] += -1.0 / sb2
            if self.price_jumps and self.dnp[t]:
                sp2 = self.sigma_p * self.sigma_p
                e = self.zp[t] - self.mu_p - self.gamma_p * v
                g[i] += self.gamma_p * v * e / sp2
                d[i] += (self.gamma_p * v * e - self.gamma_p * self.gamma_p * v * v) / sp2
            if i + 1 < nb:
                o[i] = 0.0
        for i in range(-1, nb):
            t = a + i
            if t + 1 >= self.n:
                break
            if i == -1:
                u = self.V[t]
            else:
                u = exp(h[i])
            if i + 1 < nb:
                w = exp(h[i + 1])
            else:
                w = self.V[t + 1]
            e = w - self._c(t) - b * u
            fu = -0.5 / u + b * e / (s2 * u) + e * e / (2.0 * s2 * u * u)
            fw = -e / (s2 * u)
            fuu = 0.5 / (u * u) - b * b / (s2 * u) - 2.0 * b * e / (s2 * u * u) - e * e / (s2 * u * u * u)
            fww = -1.0 / (s2 * u)
            fuw = b / (s2 * u) + e / (s2 * u * u)
            if i >= 0:
                g[i] += u * fu
                d[i] += u * fu + u * u * fuu
            if i + 1 < nb:
                g[i + 1] += w * fw
                d[i + 1] += w * fw + w * w * fww
                if i >= 0:
                    o[i] += u * w * fuw


cdef int chol_tri(Py_ssize_t n, double* d, double* o, double* l, double* m) noexcept nogil:
    # P = tri(-o, -d, -o) (negated Hessian) = L L^T, L lower bidiagonal with
    # diagonal l and sub-diagonal m
    cdef Py_ssize_t i
    cdef double piv
    for i in range(n):
        piv = -d[i]
        if i > 0:
            m[i] = -o[i - 1] / l[i - 1]
            piv -= m[i] * m[i]
        if not (piv > 0.0):
            return 0
        l[i] = sqrt(piv)
    return 1


cdef void chol_solve(Py_ssize_t n, double* l, double* m, double* g, double* out) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(n):
        out[i] = g[i]
        if i > 0:
            out[i] -= m[i] * out[i - 1]
        out[i] /= l[i]
    for i in range(n - 1, -1, -1):
        if i + 1 < n:
            out[i] -= m[i + 1] * out[i + 1]
        out[i] /= l[i]


cdef double quad_form(Py_ssize_t n, double* l, double* m, double* x, double* c) noexcept nogil:
    # ||L^T (x - c)||^2
    cdef Py_ssize_t i
    cdef double s = 0.0, y
    for i in range(n):
        y = l[i] * (x[i] - c[i])
        if i + 1 < n:
            y += m[i + 1] * (x[i + 1] - c[i + 1])
        s += y * y
    return s


cdef int laplace(_VBlock blk, Py_ssize_t a, Py_ssize_t nb, double* h, double* g,
                 double* d, double* o, double* l, double* m, double* step,
                 double* trial) noexcept nogil:
    # Newton iterations from the data-based start h = lnbv; on exit h holds
    # the mode and (l, m) the Cholesky factor of the negated Hessian there.
    cdef Py_ssize_t i, it, k, tries
    cdef double f0, f1, load, mx
    for i in range(nb):
        h[i] = blk.lnbv[a + i]
    f0 = blk.target(a, nb, h)
    for it in range(30):
        blk.derivs(a, nb, h, g, d, o)
        load = 0.0
        tries = 0
        while not chol_tri(nb, d, o, l, m):
            mx = 1e-8
            for i in range(nb):
                if fabs(d[i]) > mx:
                    mx = fabs(d[i])
            load = 1e-6 * mx if load == 0.0 else load * 10.0
            for i in range(nb):
                d[i] -= load
            tries += 1
            if tries > 40:
                return 0
        chol_solve(nb, l, m, g, step)
        mx = 0.0
        for i in range(nb):
            if fabs(step[i]) > mx:
                mx = fabs(step[i])
        if mx > 2.0:
            for i in range(nb):
                step[i] *= 2.0 / mx
            mx = 2.0
        for k in range(30):
            for i in range(nb):
                trial[i] = h[i] + step[i]
            f1 = blk.target(a, nb, trial)
            if f1 >= f0 - 1e-10:
                break
            for i in range(nb):
                step[i] *= 0.5
            mx *= 0.5
        else:
            break
        for i in range(nb):
            h[i] = trial[i]
        f0 = f1
        if mx < 1e-7:
            break
    blk.derivs(a, nb, h, g, d, o)
    load = 0.0
    tries = 0
    while not chol_tri(nb, d, o, l, m):
        mx = 1e-8
        for i in range(nb):
            if fabs(d[i]) > mx:
                mx = fabs(d[i])
        load = 1e-6 * mx if load == 0.0 else load * 10.0
        for i in range(nb):
            d[i] -= load
        tries += 1
        if tries > 40:
            return 0
    return 1


def sample_v_blocks(_VBlock blk, long[::1] starts, double[::1] z, double[::1] u,
                    double step_scale, signed char[::1] accepted):
    """One sweep of blocked MH over log V_t, t >= 1 (V_0 is fixed).

    Each block uses a Laplace approximation of its conditional (mode by
    damped Newton from the measurement-only start) and an autoregressive
    proposal around the mode, reversible for that Gaussian; step_scale = 1
    gives an independence proposal, 0 leaves the state unchanged.
    """
    cdef Py_ssize_t nblocks = starts.shape[0] - 1, k, a, nb, i, maxn = 0
    cdef double rho = sqrt(1.0 - step_scale * step_scale), sc = step_scale
    cdef double lt_cur, lt_new, lq_cur, lq_new, la
    cdef int n_acc = 0
    for k in range(nblocks):
        if starts[k + 1] - starts[k] > maxn:
            maxn = starts[k + 1] - starts[k]
    buf = np.zeros((10, maxn + 1))
    cdef double[:, ::1] B = buf
    cdef double* h = &B[0, 0]
    cdef double* g = &B[1, 0]
    cdef double* d = &B[2, 0]
    cdef double* o = &B[3, 0]
    cdef double* l = &B[4, 0]
    cdef double* m = &B[5, 0]
    cdef double* st = &B[6, 0]
    cdef double* tr = &B[7, 0]
    cdef double* cur = &B[8, 0]
    cdef double* prop = &B[9, 0]
    for k in range(nblocks):
        a = starts[k]
        nb = starts[k + 1] - a
        accepted[k] = 0
        for i in range(nb):
            cur[i] = log(blk.V[a + i])
        if sc == 0.0:
            accepted[k] = 1
            n_acc += 1
            continue
        if not laplace(blk, a, nb, h, g, d, o, l, m, st, tr):
            continue
        # L^T w = z  ->  w ~ N(0, P^{-1})
        for i in range(nb - 1, -1, -1):
            st[i] = z[a + i]
            if i + 1 < nb:
                st[i] -= m[i + 1] * st[i + 1]
            st[i] /= l[i]
        for i in range(nb):
            prop[i] = h[i] + rho * (cur[i] - h[i]) + sc * st[i]
        lt_cur = blk.target(a, nb, cur)
        lt_new = blk.target(a, nb, prop)
        lq_cur = -0.5 * quad_form(nb, l, m, cur, h)
        lq_new = -0.5 * quad_form(nb, l, m, prop, h)
        la = lt_new - lt_cur + lq_cur - lq_new
        if la >= 0.0 or log(u[k]) < la:
            for i in range(nb):
                blk.V[a + i] = exp(prop[i])
            accepted[k] = 1
            n_acc += 1
    return n_acc


def block_target(_VBlock blk, Py_ssize_t a, double[::1] h):
    """Expose the local log target (used by tests)."""
    return blk.target(a, h.shape[0], &h[0])


def block_mode(_VBlock blk, Py_ssize_t a, Py_ssize_t nb):
    """Return (mode, chol_diag, chol_sub) of the block's Laplace approximation."""
    buf = np.zeros((8, nb + 1))
    cdef double[:, ::1] B = buf
    ok = laplace(blk, a, nb, &B[0, 0], &B[1, 0], &B[2, 0], &B[3, 0], &B[4, 0],
                 &B[5, 0], &B[6, 0], &B[7, 0])
    if not ok:
        raise FloatingPointError("Laplace approximation failed")
    return buf[0, :nb].copy(), buf[4, :nb].copy(), buf[5, :nb].copy()


def simulate_path(int p_mode, int v_mode, int price_jumps, int var_jumps,
                  double mu, double gamma, double mu_p, double gamma_p,
                  double sigma_p, double sigma_bv, double kappa, double theta,
                  double psi, double s2, double mu_v, double V1,
                  double p_a, double p_b, double p_inf, double p_0,
                  double v_a, double v_b, double v_inf, double v_0,
                  double beta_vp, double beta_vpn,
                  double[::1] xi_p, double[::1] xi_bv, double[::1] xi_zp,
                  double[::1] u_ind, double[::1] u_np, double[::1] u_nv,
                  double[::1] e_zv,
                  double[::1] r, double[::1] lnbv, signed char[::1] dnp,
                  double[::1] zp, double[::1] V, double[::1] zv,
                  signed char[::1] dnv, double[::1] dp, double[::1] dv):
    """Forward simulation of the discretised system.

    p_mode/v_mode: 0 zero, 1 hawkes, 2 linear in V, 3 constant, 4 tied to dnp.
    For hawkes p_a=alpha, p_b=beta (self excitation); for linear p_a is the
    intercept and p_b the slope.  The positivity truncation of V_{t+1} is
    drawn exactly by inverting the truncated normal cdf.
    """
    cdef Py_ssize_t t, n = r.shape[0]
    cdef double v, m, sd, q, xi, x, neg
    V[0] = V1
    for t in range(n):
        v = V[t]
        if p_mode == 0:
            dp[t] = 0.0
        elif p_mode == 1:
            if t == 0:
                dp[t] = clamp01(p_0)
            else:
                dp[t] = clamp01(p_a * p_inf + (1.0 - p_a) * dp[t - 1] + p_b * dnp[t - 1])
        elif p_mode == 2:
            dp[t] = clamp01(p_a + p_b * v)
        else:
            dp[t] = clamp01(p_0)
        if v_mode == 0 or v_mode == 4:
            dv[t] = 0.0
        elif v_mode == 1:
            if t == 0:
                dv[t] = clamp01(v_0)
            else:
                neg = 1.0 if (dnp[t - 1] and zp[t - 1] < 0.0) else 0.0
                dv[t] = clamp01(v_a * v_inf + (1.0 - v_a) * dv[t - 1] + v_b * dnv[t - 1]
                                + beta_vp * dnp[t - 1] + beta_vpn * neg)
        elif v_mode == 2:
            dv[t] = clamp01(v_a + v_b * v)
        else:
            dv[t] = clamp01(v_0)
        dnp[t] = 1 if (price_jumps and u_np[t] < dp[t]) else 0
        zp[t] = (mu_p + gamma_p * v + sigma_p * xi_zp[t]) if dnp[t] else 0.0
        r[t] = mu + gamma * v + sqrt(v) * xi_p[t] + zp[t]
        lnbv[t] = log(v) + sigma_bv * xi_bv[t]
        if not var_jumps:
            dnv[t] = 0
        elif v_mode == 4 or t == 0:
            dnv[t] = dnp[t]
        else:
            dnv[t] = 1 if u_nv[t] < dv[t] else 0
        zv[t] = mu_v * e_zv[t] if var_jumps else 0.0
        if t + 1 < n:
            x = r[t] - zp[t]
            m = kappa * theta + (1.0 - kappa) * v + psi * (x - mu - gamma * v) + zv[t] * dnv[t]
            sd = sqrt(s2 * v)
            q = u_ind[t] * ndtr(m / sd)
            if q > 0.0:
                xi = -ndtri(q)
            else:
                xi = -m / sd - log(u_ind[t]) / (-m / sd)
            V[t + 1] = m + sd * xi
            if not (V[t + 1] > 0.0):
                V[t + 1] = 1e-12 * v
