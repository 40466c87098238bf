"""Pure-Python versions of the compiled kernels.

Each function mirrors the one of the same name in ``_kernels.pyx``.  They are
selected automatically when the extension is not built, or on request via the
``HSV_BACKEND=python`` environment variable.  Hot loops are written with
``math`` scalars so the arithmetic follows the compiled code step by step.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import log_ndtr as _log_ndtr_vec
from scipy.special import ndtr, ndtri

LOG2PI = math.log(2.0 * math.pi)
EPS = 1e-10


def _log_ndtr(z: float) -> float:
    return float(_log_ndtr_vec(z))


def clamp01(d):
    if d < EPS:
        return EPS
    if d > 1.0 - EPS:
        return 1.0 - EPS
    return d


def bern_logpmf(k, d):
    return math.log(d) if k else math.log1p(-d)


def hawkes_path(alpha, delta_inf, delta1, drive, out):
    n = out.shape[0]
    if n == 0:
        return
    a = alpha * delta_inf
    b = 1.0 - alpha
    prev = clamp01(delta1)
    out[0] = prev
    for t in range(1, n):
        prev = clamp01(a + b * prev + drive[t - 1])
        out[t] = prev


def data_logdensity(x, lnbv, dnp, zp, V, zv, dnv, dp, dv, mu, gamma, mu_p, gamma_p,
                    sigma_p, sigma_bv, kappa, theta, psi, s2, mu_v, price_jumps,
                    zv_terms, dnv_bern):
    V = np.asarray(V, dtype=float)
    if not np.all(V > 0.0):
        return -np.inf
    lv = np.log(V)
    e = x - mu - gamma * V
    tot = np.sum(-0.5 * (LOG2PI + lv) - 0.5 * e * e / V)
    e = lnbv - lv
    tot += np.sum(-0.5 * LOG2PI - math.log(sigma_bv) - 0.5 * e * e / (sigma_bv * sigma_bv))
    if price_jumps:
        jp = dnp.astype(bool)
        e = zp[jp] - mu_p - gamma_p * V[jp]
        tot += np.sum(-0.5 * LOG2PI - math.log(sigma_p) - 0.5 * e * e / (sigma_p * sigma_p))
        tot += np.sum(np.where(jp, np.log(dp), np.log1p(-dp)))
    if zv_terms:
        tot += np.sum(-math.log(mu_v) - zv / mu_v)
    if dnv_bern:
        k = dnv[1:].astype(bool)
        tot += np.sum(np.where(k, np.log(dv[1:]), np.log1p(-dv[1:])))
    if V.shape[0] > 1:
        b = 1.0 - kappa - psi * gamma
        m = kappa * theta + psi * (x[:-1] - mu) + b * V[:-1] + zv[:-1] * dnv[:-1]
        sd = np.sqrt(s2 * V[:-1])
        e = V[1:] - m
        tot += np.sum(-0.5 * LOG2PI - np.log(sd) - 0.5 * e * e / (sd * sd)
                      - _log_ndtr_vec(m / sd))
    return float(tot)


def _sigmoid(lo):
    if lo >= 0:
        return 1.0 / (1.0 + math.exp(-lo))
    return math.exp(lo) / (1.0 + math.exp(lo))


def sweep_dnv(dnv, dv, lt_diff, base, u, alpha, delta_inf, beta_vv, drive_max, work):
    n = dnv.shape[0]
    c = 1.0 - alpha
    ad = alpha * delta_inf
    b = 1.0 - alpha
    hi_level = delta_inf + drive_max / alpha
    flips = 0
    for t in range(1, n):
        cur = int(dnv[t])
        lo0 = lt_diff[t] + math.log(dv[t]) - math.log1p(-dv[t])
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
                acc += math.log(prod)
                prod = 1.0
                dd = abs(work[s - 1] - dv[s - 1]) * c
                lb = min(delta_inf, dv[s - 1], work[s - 1])
                lb = max(lb, EPS)
                ub = min(max(hi_level, dv[s - 1], work[s - 1]), 1.0 - EPS)
                y = dd / min(lb, 1.0 - ub)
                if y < 0.5:
                    bound = 1.000001 * y / ((1.0 - y) * alpha) + 1e-12
                    lo = acc if cur == 0 else -acc
                    if u[t] < _sigmoid(lo0 + lo - bound):
                        decided = 1
                        break
                    if u[t] >= _sigmoid(lo0 + lo + bound):
                        decided = 0
                        break
        if decided < 0:
            acc += math.log(prod)
            new = 1 if u[t] < _sigmoid(lo0 + (acc if cur == 0 else -acc)) else 0
        else:
            new = decided
        if new != cur:
            flips += 1
            dnv[t] = new
            while s < n:
                if s == t + 1:
                    a = clamp01(ad + b * dv[t] + base[t] + beta_vv * (1 - cur))
                else:
                    a = clamp01(ad + b * work[s - 1] + base[s - 1] + beta_vv * dnv[s - 1])
                if a == dv[s]:
                    break
                work[s] = a
                s += 1
            dv[t + 1:s] = work[t + 1:s]
    return flips


class _VBlock:
    """Local log target of a block of log-variances and its derivatives."""

    def __init__(self, V, x, lnbv, dnp, zp, zv, dnv, mu, gamma, mu_p, gamma_p,
                 sigma_p, sigma_bv, kappa, theta, psi, s2, price_jumps, m5,
                 ap0, alp, av0, alv, dnv_bern):
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
        self.n = V.shape[0]

    def _c(self, t):
        return self.kappa * self.theta + self.psi * (self.x[t] - self.mu) + self.zv[t] * self.dnv[t]

    def meas(self, t, h):
        v = math.exp(h)
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

    def trans(self, t, u, w):
        m = self._c(t) + self.b * u
        var = self.s2 * u
        e = w - m
        return -0.5 * math.log(var) - 0.5 * e * e / var - _log_ndtr(m / math.sqrt(var))

    def target(self, a, nb, h):
        tot = 0.0
        for i in range(nb):
            tot += self.meas(a + i, h[i])
        tot += self.trans(a - 1, self.V[a - 1], math.exp(h[0]))
        for i in range(nb - 1):
            tot += self.trans(a + i, math.exp(h[i]), math.exp(h[i + 1]))
        t = a + nb - 1
        if t + 1 < self.n:
            tot += self.trans(t, math.exp(h[nb - 1]), self.V[t + 1])
        return tot

    def derivs(self, a, nb, h, g, d, o):
        s2 = self.s2
        b = self.b
        sb2 = self.sigma_bv * self.sigma_bv
        for i in range(nb):
            t = a + i
            v = math.exp(h[i])
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
            u = self.V[t] if i == -1 else math.exp(h[i])
            w = math.exp(h[i + 1]) if i + 1 < nb else self.V[t + 1]
            e = w - self._c(t) - b * u
            fu = -0.5 / u + b * e / (s2 * u) + e * e / (2.0 * s2 * u * u)
            fw = -e / (s2 * u)
            fuu = (0.5 / (u * u) - b * b / (s2 * u) - 2.0 * b * e / (s2 * u * u)
                   - e * e / (s2 * u * u * u))
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


def _chol_tri(n, d, o, l, m):
    for i in range(n):
        piv = -d[i]
        if i > 0:
            m[i] = -o[i - 1] / l[i - 1]
            piv -= m[i] * m[i]
        if not (piv > 0.0):
            return False
        l[i] = math.sqrt(piv)
    return True


def _chol_solve(n, l, m, g, out):
    for i in range(n):
        out[i] = g[i]
        if i > 0:
            out[i] -= m[i] * out[i - 1]
        out[i] /= l[i]
    for i in range(n - 1, -1, -1):
        if i + 1 < n:
            out[i] -= m[i + 1] * out[i + 1]
        out[i] /= l[i]


def _quad_form(n, l, m, x, c):
    s = 0.0
    for i in range(n):
        y = l[i] * (x[i] - c[i])
        if i + 1 < n:
            y += m[i + 1] * (x[i + 1] - c[i + 1])
        s += y * y
    return s


def _factor_loaded(nb, d, o, l, m):
    load = 0.0
    tries = 0
    while not _chol_tri(nb, d, o, l, m):
        mx = 1e-8
        for i in range(nb):
            if abs(d[i]) > mx:
                mx = abs(d[i])
        load = 1e-6 * mx if load == 0.0 else load * 10.0
        for i in range(nb):
            d[i] -= load
        tries += 1
        if tries > 40:
            return False
    return True


def _laplace(blk, a, nb, h, g, d, o, l, m, step, trial):
    for i in range(nb):
        h[i] = blk.lnbv[a + i]
    f0 = blk.target(a, nb, h)
    for _ in range(30):
        blk.derivs(a, nb, h, g, d, o)
        if not _factor_loaded(nb, d, o, l, m):
            return False
        _chol_solve(nb, l, m, g, step)
        mx = 0.0
        for i in range(nb):
            if abs(step[i]) > mx:
                mx = abs(step[i])
        if mx > 2.0:
            for i in range(nb):
                step[i] *= 2.0 / mx
            mx = 2.0
        for _k in range(30):
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
    return _factor_loaded(nb, d, o, l, m)


def sample_v_blocks(blk, starts, z, u, step_scale, accepted):
    nblocks = starts.shape[0] - 1
    rho = math.sqrt(1.0 - step_scale * step_scale)
    sc = step_scale
    maxn = int(np.max(np.diff(starts))) if nblocks > 0 else 0
    h, g, d, o, l, m, st, tr, cur, prop = (np.zeros(maxn + 1) for _ in range(10))
    n_acc = 0
    for k in range(nblocks):
        a = int(starts[k])
        nb = int(starts[k + 1]) - a
        accepted[k] = 0
        for i in range(nb):
            cur[i] = math.log(blk.V[a + i])
        if sc == 0.0:
            accepted[k] = 1
            n_acc += 1
            continue
        if not _laplace(blk, a, nb, h, g, d, o, l, m, st, tr):
            continue
        for i in range(nb - 1, -1, -1):
            st[i] = z[a + i]
            if i + 1 < nb:
                st[i] -= m[i + 1] * st[i + 1]
            st[i] /= l[i]
        for i in range(nb):
            prop[i] = h[i] + rho * (cur[i] - h[i]) + sc * st[i]
        lt_cur = blk.target(a, nb, cur)
        lt_new = blk.target(a, nb, prop)
        lq_cur = -0.5 * _quad_form(nb, l, m, cur, h)
        lq_new = -0.5 * _quad_form(nb, l, m, prop, h)
        la = lt_new - lt_cur + lq_cur - lq_new
        if la >= 0.0 or math.log(u[k]) < la:
            for i in range(nb):
                blk.V[a + i] = math.exp(prop[i])
            accepted[k] = 1
            n_acc += 1
    return n_acc


def block_target(blk, a, h):
    return blk.target(a, h.shape[0], h)


def block_mode(blk, a, nb):
    buf = np.zeros((8, nb + 1))
    if not _laplace(blk, a, nb, *buf):
        raise FloatingPointError("Laplace approximation failed")
    return buf[0, :nb].copy(), buf[4, :nb].copy(), buf[5, :nb].copy()


def simulate_path(p_mode, v_mode, price_jumps, var_jumps, mu, gamma, mu_p, gamma_p,
                  sigma_p, sigma_bv, kappa, theta, psi, s2, mu_v, V1,
                  p_a, p_b, p_inf, p_0, v_a, v_b, v_inf, v_0, beta_vp, beta_vpn,
                  xi_p, xi_bv, xi_zp, u_ind, u_np, u_nv, e_zv,
                  r, lnbv, dnp, zp, V, zv, dnv, dp, dv):
    n = r.shape[0]
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
        if v_mode in (0, 4):
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
        r[t] = mu + gamma * v + math.sqrt(v) * xi_p[t] + zp[t]
        lnbv[t] = math.log(v) + sigma_bv * xi_bv[t]
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
            sd = math.sqrt(s2 * v)
            q = u_ind[t] * float(ndtr(m / sd))
            if q > 0.0:
                xi = -float(ndtri(q))
            else:
                xi = -m / sd - math.log(u_ind[t]) / (-m / sd)
            V[t + 1] = m + sd * xi
            if not (V[t + 1] > 0.0):
                V[t + 1] = 1e-12 * v
