# kernels.py
"""
Compiled per-fact AdaGrad kernels, one per model family.

Each kernel walks a batch of (r, s, o, y) index arrays in order and, for every fact,
computes the logistic loss plus L2 over the touched rows, its gradient, then applies
the AdaGrad update to the touched rows in place. All gradients of a fact are taken
before any of its rows move; when s == o the subject and object gradients are summed
onto the one row, as `models.loss_and_gradient` does. Kernels return the summed loss.

Arguments are plain float64 / int64 ndarrays; `trainer.TrainState` owns the dispatch.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# halvings tried before a TransE step that lowers its own fact's margin is dropped
MAX_HALVINGS = 30


# ----------------------------
# Shared pieces
# ----------------------------
@njit(cache=True)
def _logistic(y, phi):
    # log(1 + exp(-y*phi)) and dL/dphi = -y * sigmoid(-y*phi)
    m = -y * phi
    if m > 0.0:
        loss = m + np.log1p(np.exp(-m))
        sig = 1.0 / (1.0 + np.exp(-m))
    else:
        e = np.exp(m)
        loss = np.log1p(e)
        sig = e / (1.0 + e)
    return loss, -y * sig


@njit(cache=True)
def _adagrad(row, g, acc, lr, eps, use_sqrt):
    for k in range(row.shape[0]):
        acc[k] += g[k] * g[k]
        if use_sqrt:
            row[k] -= lr * g[k] / (np.sqrt(acc[k]) + eps)
        else:
            row[k] -= lr * g[k] / (acc[k] + eps)


@njit(cache=True)
def _sq(row):
    total = 0.0
    for k in range(row.shape[0]):
        total += row[k] * row[k]
    return total


# ----------------------------
# CP
# ----------------------------
@njit(cache=True)
def cp_steps(U, V, W, aU, aV, aW, r, s, o, y, lam, lr, eps, use_sqrt):
    K = U.shape[1]
    gu = np.empty(K)
    gv = np.empty(K)
    gw = np.empty(K)
    total = 0.0
    for n in range(r.shape[0]):
        u, v, w = U[s[n]], V[o[n]], W[r[n]]
        phi = 0.0
        for k in range(K):
            phi += w[k] * u[k] * v[k]
        loss, coef = _logistic(y[n], phi)
        for k in range(K):
            gw[k] = coef * (u[k] * v[k]) + 2.0 * lam * w[k]
            gu[k] = coef * (w[k] * v[k]) + 2.0 * lam * u[k]
            gv[k] = coef * (w[k] * u[k]) + 2.0 * lam * v[k]
        if lam != 0.0:
            loss += lam * (_sq(w) + _sq(u) + _sq(v))
        _adagrad(w, gw, aW[r[n]], lr, eps, use_sqrt)
        _adagrad(u, gu, aU[s[n]], lr, eps, use_sqrt)
        _adagrad(v, gv, aV[o[n]], lr, eps, use_sqrt)
        total += loss
    return total


# ----------------------------
# RESCAL
# ----------------------------
@njit(cache=True)
def rescal_steps(E, W, aE, aW, r, s, o, y, lam, lr, eps, use_sqrt):
    K = E.shape[1]
    meo = np.empty(K)
    mtes = np.empty(K)
    gs = np.empty(K)
    go = np.empty(K)
    gm = np.empty((K, K))
    total = 0.0
    for n in range(r.shape[0]):
        es, eo, M = E[s[n]], E[o[n]], W[r[n]]
        same = s[n] == o[n]
        for i in range(K):
            acc_i = 0.0
            acc_t = 0.0
            for j in range(K):
                acc_i += M[i, j] * eo[j]
                acc_t += M[j, i] * es[j]
            meo[i] = acc_i
            mtes[i] = acc_t
        phi = 0.0
        for i in range(K):
            phi += es[i] * meo[i]
        loss, coef = _logistic(y[n], phi)

        for i in range(K):
            for j in range(K):
                gm[i, j] = coef * (es[i] * eo[j]) + 2.0 * lam * M[i, j]
        for k in range(K):
            if same:
                gs[k] = coef * meo[k] + coef * mtes[k] + 2.0 * lam * es[k] + 2.0 * lam * es[k]
            else:
                gs[k] = coef * meo[k] + 2.0 * lam * es[k]
                go[k] = coef * mtes[k] + 2.0 * lam * eo[k]
        if lam != 0.0:
            mm = 0.0
            for i in range(K):
                for j in range(K):
                    mm += M[i, j] * M[i, j]
            loss += lam * (mm + _sq(es) + _sq(eo))

        am = aW[r[n]]
        for i in range(K):
            for j in range(K):
                g = gm[i, j]
                am[i, j] += g * g
                if use_sqrt:
                    M[i, j] -= lr * g / (np.sqrt(am[i, j]) + eps)
                else:
                    M[i, j] -= lr * g / (am[i, j] + eps)
        _adagrad(es, gs, aE[s[n]], lr, eps, use_sqrt)
        if not same:
            _adagrad(eo, go, aE[o[n]], lr, eps, use_sqrt)
        total += loss
    return total


# ----------------------------
# TransE
# ----------------------------
@njit(cache=True)
def _unit(out, row):
    nrm = np.sqrt(_sq(row))
    if nrm == 0.0:
        for k in range(out.shape[0]):
            out[k] = 0.0
        out[0] = 1.0
    else:
        for k in range(out.shape[0]):
            out[k] = row[k] / nrm


@njit(cache=True)
def _transe_phi(es, w, eo, q):
    if q == 1:
        total = 0.0
        for k in range(es.shape[0]):
            total += abs(es[k] + w[k] - eo[k])
        return -total
    total = 0.0
    for k in range(es.shape[0]):
        d = es[k] + w[k] - eo[k]
        total += d * d
    return -np.sqrt(total)


@njit(cache=True)
def transe_steps(E, W, aE, aW, r, s, o, y, q, lam, lr, eps, use_sqrt):
    """
    Entity rows stay on the unit sphere: a step is projected before it is kept, and
    is halved until the fact's own margin y*phi does not drop (dropped after
    MAX_HALVINGS). Accumulators take the full gradient either way.
    """
    K = E.shape[1]
    d = np.empty(K)
    g = np.empty(K)
    gw = np.empty(K)
    gs = np.empty(K)
    go = np.empty(K)
    step_w = np.empty(K)
    step_s = np.empty(K)
    step_o = np.empty(K)
    cw = np.empty(K)
    cs = np.empty(K)
    co = np.empty(K)
    raw = np.empty(K)
    total = 0.0
    for n in range(r.shape[0]):
        es, eo, w = E[s[n]], E[o[n]], W[r[n]]
        same = s[n] == o[n]
        for k in range(K):
            d[k] = es[k] + w[k] - eo[k]
        if q == 1:
            phi = 0.0
            for k in range(K):
                phi -= abs(d[k])
                if d[k] > 0.0:
                    g[k] = -1.0
                elif d[k] < 0.0:
                    g[k] = 1.0
                else:
                    g[k] = 0.0
        else:
            nrm = np.sqrt(_sq(d))
            phi = -nrm
            for k in range(K):
                g[k] = -d[k] / nrm if nrm > 0.0 else 0.0
        loss, coef = _logistic(y[n], phi)

        for k in range(K):
            gw[k] = coef * g[k] + 2.0 * lam * w[k]
            if same:
                gs[k] = coef * g[k] + coef * (-g[k]) + 2.0 * lam * es[k] + 2.0 * lam * es[k]
            else:
                gs[k] = coef * g[k] + 2.0 * lam * es[k]
                go[k] = coef * (-g[k]) + 2.0 * lam * eo[k]
        if lam != 0.0:
            loss += lam * (_sq(w) + _sq(es) + _sq(eo))

        acc_w, acc_s, acc_o = aW[r[n]], aE[s[n]], aE[o[n]]
        for k in range(K):
            acc_w[k] += gw[k] * gw[k]
            acc_s[k] += gs[k] * gs[k]
            if not same:
                acc_o[k] += go[k] * go[k]
        for k in range(K):
            if use_sqrt:
                step_w[k] = lr * gw[k] / (np.sqrt(acc_w[k]) + eps)
                step_s[k] = lr * gs[k] / (np.sqrt(acc_s[k]) + eps)
                step_o[k] = lr * go[k] / (np.sqrt(acc_o[k]) + eps) if not same else 0.0
            else:
                step_w[k] = lr * gw[k] / (acc_w[k] + eps)
                step_s[k] = lr * gs[k] / (acc_s[k] + eps)
                step_o[k] = lr * go[k] / (acc_o[k] + eps) if not same else 0.0

        margin = y[n] * phi
        t = 1.0
        for _ in range(MAX_HALVINGS):
            for k in range(K):
                cw[k] = w[k] - t * step_w[k]
                raw[k] = es[k] - t * step_s[k]
            _unit(cs, raw)
            if same:
                for k in range(K):
                    co[k] = cs[k]
            else:
                for k in range(K):
                    raw[k] = eo[k] - t * step_o[k]
                _unit(co, raw)
            if y[n] * _transe_phi(cs, cw, co, q) >= margin:
                for k in range(K):
                    w[k] = cw[k]
                    es[k] = cs[k]
                    eo[k] = co[k]
                break
            t *= 0.5
        total += loss
    return total


# ----------------------------
# DistMult
# ----------------------------
@njit(cache=True)
def distmult_steps(E, W, aE, aW, r, s, o, y, lam, lr, eps, use_sqrt):
    K = E.shape[1]
    gw = np.empty(K)
    gs = np.empty(K)
    go = np.empty(K)
    total = 0.0
    for n in range(r.shape[0]):
        es, eo, w = E[s[n]], E[o[n]], W[r[n]]
        same = s[n] == o[n]
        phi = 0.0
        for k in range(K):
            phi += w[k] * es[k] * eo[k]
        loss, coef = _logistic(y[n], phi)
        for k in range(K):
            gw[k] = coef * (es[k] * eo[k]) + 2.0 * lam * w[k]
            if same:
                gs[k] = coef * (w[k] * eo[k]) + coef * (w[k] * es[k]) + 2.0 * lam * es[k] + 2.0 * lam * es[k]
            else:
                gs[k] = coef * (w[k] * eo[k]) + 2.0 * lam * es[k]
                go[k] = coef * (w[k] * es[k]) + 2.0 * lam * eo[k]
        if lam != 0.0:
            loss += lam * (_sq(w) + _sq(es) + _sq(eo))
        _adagrad(w, gw, aW[r[n]], lr, eps, use_sqrt)
        _adagrad(es, gs, aE[s[n]], lr, eps, use_sqrt)
        if not same:
            _adagrad(eo, go, aE[o[n]], lr, eps, use_sqrt)
        total += loss
    return total


# ----------------------------
# F (pair embeddings)
# ----------------------------
@njit(cache=True)
def f_steps(W, D, aW, aD, r, p, y, lam, lr, eps, use_sqrt):
    """`p` indexes rows of the pair table D, one per (s, o)."""
    K = W.shape[1]
    gw = np.empty(K)
    gd = np.empty(K)
    total = 0.0
    for n in range(r.shape[0]):
        w, dp = W[r[n]], D[p[n]]
        phi = 0.0
        for k in range(K):
            phi += dp[k] * w[k]
        loss, coef = _logistic(y[n], phi)
        for k in range(K):
            gw[k] = coef * dp[k] + 2.0 * lam * w[k]
            gd[k] = coef * w[k] + 2.0 * lam * dp[k]
        if lam != 0.0:
            loss += lam * (_sq(w) + _sq(dp))
        _adagrad(w, gw, aW[r[n]], lr, eps, use_sqrt)
        _adagrad(dp, gd, aD[p[n]], lr, eps, use_sqrt)
        total += loss
    return total


# ----------------------------
# ComplEx
# ----------------------------
@njit(cache=True)
def complex_steps(Er, Ei, Wr, Wi, aEr, aEi, aWr, aWi, r, s, o, y, lam, lr, eps, use_sqrt):
    K = Er.shape[1]
    g_wr = np.empty(K)
    g_wi = np.empty(K)
    g_sr = np.empty(K)
    g_si = np.empty(K)
    g_or = np.empty(K)
    g_oi = np.empty(K)
    total = 0.0
    for n in range(r.shape[0]):
        wr, wi = Wr[r[n]], Wi[r[n]]
        sr, si = Er[s[n]], Ei[s[n]]
        orr, oi = Er[o[n]], Ei[o[n]]
        same = s[n] == o[n]
        # Re(<w, e_s, conj(e_o)>)
        phi = 0.0
        for k in range(K):
            phi += wr[k] * (sr[k] * orr[k] + si[k] * oi[k]) + wi[k] * (sr[k] * oi[k] - si[k] * orr[k])
        loss, coef = _logistic(y[n], phi)
        for k in range(K):
            g_wr[k] = coef * (sr[k] * orr[k] + si[k] * oi[k]) + 2.0 * lam * wr[k]
            g_wi[k] = coef * (sr[k] * oi[k] - si[k] * orr[k]) + 2.0 * lam * wi[k]
            ds_r = wr[k] * orr[k] + wi[k] * oi[k]
            ds_i = wr[k] * oi[k] - wi[k] * orr[k]
            do_r = wr[k] * sr[k] - wi[k] * si[k]
            do_i = wr[k] * si[k] + wi[k] * sr[k]
            if same:
                g_sr[k] = coef * ds_r + coef * do_r + 2.0 * lam * sr[k] + 2.0 * lam * sr[k]
                g_si[k] = coef * ds_i + coef * do_i + 2.0 * lam * si[k] + 2.0 * lam * si[k]
            else:
                g_sr[k] = coef * ds_r + 2.0 * lam * sr[k]
                g_si[k] = coef * ds_i + 2.0 * lam * si[k]
                g_or[k] = coef * do_r + 2.0 * lam * orr[k]
                g_oi[k] = coef * do_i + 2.0 * lam * oi[k]
        if lam != 0.0:
            loss += lam * (_sq(wr) + _sq(wi) + _sq(sr) + _sq(si) + _sq(orr) + _sq(oi))
        _adagrad(wr, g_wr, aWr[r[n]], lr, eps, use_sqrt)
        _adagrad(wi, g_wi, aWi[r[n]], lr, eps, use_sqrt)
        _adagrad(sr, g_sr, aEr[s[n]], lr, eps, use_sqrt)
        _adagrad(si, g_si, aEi[s[n]], lr, eps, use_sqrt)
        if not same:
            _adagrad(orr, g_or, aEr[o[n]], lr, eps, use_sqrt)
            _adagrad(oi, g_oi, aEi[o[n]], lr, eps, use_sqrt)
        total += loss
    return total
