"""Fused forward/backward kernels for windowed span encoders.

Every function here is written in the numba-compatible subset of numpy (plain
loops, basic slicing, contiguous np.dot) and is self-contained: the module is
imported as-is for the pure-numpy reference path, and backend.py compiles
njit twins from the very same function objects.  Keep the two requirements in
mind when editing: no calls into other Python functions, and no f-strings or
dict/list-of-array juggling inside kernels.

Shared conventions:
  z (N, d)      encoder output rows for one sentence, float64.
  k             half-width; token i sees rows max(0,i-k)..min(N-1,i+k).
  hh = d // 2   hidden size per direction.
  Output row i is [backward-pass final state, forward-pass final state];
  cache arrays are indexed [direction] with 0 = forward params, 1 = backward.
  Per-token chains are independent: the fused loops are literally the
  per-token re-encoding, so no batching shortcut can change results.

Gate equations (documented here once, used verbatim in kernels and oracles):
  rnn   h' = tanh(x W + h U + b)
  gru   r = sig(xW|r + hU|r + b|r); u = sig(xW|u + hU|u + b|u)
        n = tanh(xW|n + r * hU|n + b|n); h' = (1 - u) * n + u * h
  lstm  i,f,o = sig(pre), g = tanh(pre) with pre = x W + h U + b split [i,f,g,o]
        c' = f * c + i * g; h' = o * tanh(c')
  cnn   width-3 convolution truncated at span edges, tanh, per-channel max
        over time; two independent parameter sets fill the two output halves.
  mlp   mean over span rows, one d->d linear, tanh (single parameter set).
Logistic is computed in the overflow-safe form e=exp(-|p|), p>=0 -> 1/(1+e),
else e/(1+e).
"""

import numpy as np


def rnn_window_fwd(z, k, w_f, u_f, b_f, w_b, u_b, b_b):
    """z (N, d), w_* (d, hh), u_* (hh, hh), b_* (hh,) -> H (N, 2hh), hs (2, N, w, hh)."""
    n_tok, d = z.shape
    hh = w_f.shape[1]
    w = 2 * k + 1
    out = np.zeros((n_tok, 2 * hh))
    hs = np.zeros((2, n_tok, w, hh))
    for direction in range(2):
        if direction == 0:
            wm, um, bv = w_f, u_f, b_f
        else:
            wm, um, bv = w_b, u_b, b_b
        for i in range(n_tok):
            lo = i - k if i - k > 0 else 0
            hi = i + k if i + k < n_tok - 1 else n_tok - 1
            steps = hi - lo + 1
            h = np.zeros(hh)
            for s in range(steps):
                if direction == 0:
                    t = lo + s
                else:
                    t = hi - s
                pre = np.dot(z[t], wm) + np.dot(h, um) + bv
                h = np.tanh(pre)
                hs[direction, i, s] = h
            if direction == 0:
                out[i, hh:] = h
            else:
                out[i, :hh] = h
    return out, hs


def rnn_window_bwd(d_out, z, k, w_f, u_f, b_f, w_b, u_b, b_b, hs):
    """Adjoint of rnn_window_fwd -> (dz, dw_f, du_f, db_f, dw_b, du_b, db_b)."""
    n_tok, d = z.shape
    hh = w_f.shape[1]
    dz = np.zeros((n_tok, d))
    dw_f = np.zeros(w_f.shape)
    du_f = np.zeros(u_f.shape)
    db_f = np.zeros(hh)
    dw_b = np.zeros(w_b.shape)
    du_b = np.zeros(u_b.shape)
    db_b = np.zeros(hh)
    zeros_h = np.zeros(hh)
    for direction in range(2):
        if direction == 0:
            wm, um = w_f, u_f
            dw, du, db = dw_f, du_f, db_f
        else:
            wm, um = w_b, u_b
            dw, du, db = dw_b, du_b, db_b
        for i in range(n_tok):
            lo = i - k if i - k > 0 else 0
            hi = i + k if i + k < n_tok - 1 else n_tok - 1
            steps = hi - lo + 1
            if direction == 0:
                dh = d_out[i, hh:].copy()
            else:
                dh = d_out[i, :hh].copy()
            for s in range(steps - 1, -1, -1):
                if direction == 0:
                    t = lo + s
                else:
                    t = hi - s
                h = hs[direction, i, s]
                if s > 0:
                    h_prev = hs[direction, i, s - 1]
                else:
                    h_prev = zeros_h
                dpre = dh * (1.0 - h * h)
                dw += z[t].reshape(-1, 1) * dpre
                du += h_prev.reshape(-1, 1) * dpre
                db += dpre
                dz[t] += np.dot(wm, dpre)
                dh = np.dot(um, dpre)
    return dz, dw_f, du_f, db_f, dw_b, du_b, db_b


def gru_window_fwd(z, k, w_f, u_f, b_f, w_b, u_b, b_b):
    """z (N, d), w_* (d, 3hh), u_* (hh, 3hh), b_* (3hh,), gate order [r, u, n].

    Returns (H (N, 2hh), gates (2, N, w, 3hh), hun (2, N, w, hh), hs (2, N, w, hh));
    gates hold post-activation r/u/n, hun the n-slice of h_prev @ U.
    """
    n_tok, d = z.shape
    hh = w_f.shape[1] // 3
    w = 2 * k + 1
    out = np.zeros((n_tok, 2 * hh))
    gates = np.zeros((2, n_tok, w, 3 * hh))
    hun = np.zeros((2, n_tok, w, hh))
    hs = np.zeros((2, n_tok, w, hh))
    for direction in range(2):
        if direction == 0:
            wm, um, bv = w_f, u_f, b_f
        else:
            wm, um, bv = w_b, u_b, b_b
        for i in range(n_tok):
            lo = i - k if i - k > 0 else 0
            hi = i + k if i + k < n_tok - 1 else n_tok - 1
            steps = hi - lo + 1
            h = np.zeros(hh)
            for s in range(steps):
                if direction == 0:
                    t = lo + s
                else:
                    t = hi - s
                xw = np.dot(z[t], wm)
                hu = np.dot(h, um)
                pr = xw[:hh] + hu[:hh] + bv[:hh]
                er = np.exp(-np.abs(pr))
                r = np.where(pr >= 0.0, 1.0 / (1.0 + er), er / (1.0 + er))
                pu = xw[hh:2 * hh] + hu[hh:2 * hh] + bv[hh:2 * hh]
                eu = np.exp(-np.abs(pu))
                u = np.where(pu >= 0.0, 1.0 / (1.0 + eu), eu / (1.0 + eu))
                pn = xw[2 * hh:] + r * hu[2 * hh:] + bv[2 * hh:]
                n = np.tanh(pn)
                gates[direction, i, s, :hh] = r
                gates[direction, i, s, hh:2 * hh] = u
                gates[direction, i, s, 2 * hh:] = n
                hun[direction, i, s] = hu[2 * hh:]
                h = (1.0 - u) * n + u * h
                hs[direction, i, s] = h
            if direction == 0:
                out[i, hh:] = h
            else:
                out[i, :hh] = h
    return out, gates, hun, hs


def gru_window_bwd(d_out, z, k, w_f, u_f, b_f, w_b, u_b, b_b, gates, hun, hs):
    """Adjoint of gru_window_fwd -> (dz, dw_f, du_f, db_f, dw_b, du_b, db_b)."""
    n_tok, d = z.shape
    hh = w_f.shape[1] // 3
    dz = np.zeros((n_tok, d))
    dw_f = np.zeros(w_f.shape)
    du_f = np.zeros(u_f.shape)
    db_f = np.zeros(3 * hh)
    dw_b = np.zeros(w_b.shape)
    du_b = np.zeros(u_b.shape)
    db_b = np.zeros(3 * hh)
    zeros_h = np.zeros(hh)
    dxw = np.zeros(3 * hh)
    dhu = np.zeros(3 * hh)
    for direction in range(2):
        if direction == 0:
            wm, um = w_f, u_f
            dw, du, db = dw_f, du_f, db_f
        else:
            wm, um = w_b, u_b
            dw, du, db = dw_b, du_b, db_b
        for i in range(n_tok):
            lo = i - k if i - k > 0 else 0
            hi = i + k if i + k < n_tok - 1 else n_tok - 1
            steps = hi - lo + 1
            if direction == 0:
                dh = d_out[i, hh:].copy()
            else:
                dh = d_out[i, :hh].copy()
            for s in range(steps - 1, -1, -1):
                if direction == 0:
                    t = lo + s
                else:
                    t = hi - s
                r = gates[direction, i, s, :hh]
                u = gates[direction, i, s, hh:2 * hh]
                n = gates[direction, i, s, 2 * hh:]
                hun_s = hun[direction, i, s]
                if s > 0:
                    h_prev = hs[direction, i, s - 1]
                else:
                    h_prev = zeros_h
                dn = dh * (1.0 - u)
                du_gate = dh * (h_prev - n)
                dh_prev = dh * u
                dpn = dn * (1.0 - n * n)
                dr = dpn * hun_s
                dpr = dr * r * (1.0 - r)
                dpu = du_gate * u * (1.0 - u)
                dxw[:hh] = dpr
                dxw[hh:2 * hh] = dpu
                dxw[2 * hh:] = dpn
                dhu[:hh] = dpr
                dhu[hh:2 * hh] = dpu
                dhu[2 * hh:] = dpn * r
                dw += z[t].reshape(-1, 1) * dxw
                du += h_prev.reshape(-1, 1) * dhu
                db += dxw
                dz[t] += np.dot(wm, dxw)
                dh = dh_prev + np.dot(um, dhu)
    return dz, dw_f, du_f, db_f, dw_b, du_b, db_b


def lstm_window_fwd(z, k, w_f, u_f, b_f, w_b, u_b, b_b):
    """z (N, d), w_* (d, 4hh), u_* (hh, 4hh), b_* (4hh,), gate order [i, f, g, o].

    Returns (H (N, 2hh), gates (2, N, w, 4hh), cs (2, N, w, hh), hs (2, N, w, hh)).
    """
    n_tok, d = z.shape
    hh = w_f.shape[1] // 4
    w = 2 * k + 1
    out = np.zeros((n_tok, 2 * hh))
    gates = np.zeros((2, n_tok, w, 4 * hh))
    cs = np.zeros((2, n_tok, w, hh))
    hs = np.zeros((2, n_tok, w, hh))
    for direction in range(2):
        if direction == 0:
            wm, um, bv = w_f, u_f, b_f
        else:
            wm, um, bv = w_b, u_b, b_b
        for i in range(n_tok):
            lo = i - k if i - k > 0 else 0
            hi = i + k if i + k < n_tok - 1 else n_tok - 1
            steps = hi - lo + 1
            h = np.zeros(hh)
            c = np.zeros(hh)
            for s in range(steps):
                if direction == 0:
                    t = lo + s
                else:
                    t = hi - s
                pre = np.dot(z[t], wm) + np.dot(h, um) + bv
                pi = pre[:hh]
                pf = pre[hh:2 * hh]
                pg = pre[2 * hh:3 * hh]
                po = pre[3 * hh:]
                ei = np.exp(-np.abs(pi))
                ig = np.where(pi >= 0.0, 1.0 / (1.0 + ei), ei / (1.0 + ei))
                ef = np.exp(-np.abs(pf))
                fg = np.where(pf >= 0.0, 1.0 / (1.0 + ef), ef / (1.0 + ef))
                gg = np.tanh(pg)
                eo = np.exp(-np.abs(po))
                og = np.where(po >= 0.0, 1.0 / (1.0 + eo), eo / (1.0 + eo))
                c = fg * c + ig * gg
                h = og * np.tanh(c)
                gates[direction, i, s, :hh] = ig
                gates[direction, i, s, hh:2 * hh] = fg
                gates[direction, i, s, 2 * hh:3 * hh] = gg
                gates[direction, i, s, 3 * hh:] = og
                cs[direction, i, s] = c
                hs[direction, i, s] = h
            if direction == 0:
                out[i, hh:] = h
            else:
                out[i, :hh] = h
    return out, gates, cs, hs


def lstm_window_bwd(d_out, z, k, w_f, u_f, b_f, w_b, u_b, b_b, gates, cs, hs):
    """Adjoint of lstm_window_fwd -> (dz, dw_f, du_f, db_f, dw_b, du_b, db_b)."""
    n_tok, d = z.shape
    hh = w_f.shape[1] // 4
    dz = np.zeros((n_tok, d))
    dw_f = np.zeros(w_f.shape)
    du_f = np.zeros(u_f.shape)
    db_f = np.zeros(4 * hh)
    dw_b = np.zeros(w_b.shape)
    du_b = np.zeros(u_b.shape)
    db_b = np.zeros(4 * hh)
    zeros_h = np.zeros(hh)
    dpre = np.zeros(4 * hh)
    for direction in range(2):
        if direction == 0:
            wm, um = w_f, u_f
            dw, du, db = dw_f, du_f, db_f
        else:
            wm, um = w_b, u_b
            dw, du, db = dw_b, du_b, db_b
        for i in range(n_tok):
            lo = i - k if i - k > 0 else 0
            hi = i + k if i + k < n_tok - 1 else n_tok - 1
            steps = hi - lo + 1
            if direction == 0:
                dh = d_out[i, hh:].copy()
            else:
                dh = d_out[i, :hh].copy()
            dc = np.zeros(hh)
            for s in range(steps - 1, -1, -1):
                if direction == 0:
                    t = lo + s
                else:
                    t = hi - s
                ig = gates[direction, i, s, :hh]
                fg = gates[direction, i, s, hh:2 * hh]
                gg = gates[direction, i, s, 2 * hh:3 * hh]
                og = gates[direction, i, s, 3 * hh:]
                c = cs[direction, i, s]
                if s > 0:
                    c_prev = cs[direction, i, s - 1]
                    h_prev = hs[direction, i, s - 1]
                else:
                    c_prev = zeros_h
                    h_prev = zeros_h
                tc = np.tanh(c)
                do = dh * tc
                dc = dc + dh * og * (1.0 - tc * tc)
                di = dc * gg
                df = dc * c_prev
                dg = dc * ig
                dc = dc * fg
                dpre[:hh] = di * ig * (1.0 - ig)
                dpre[hh:2 * hh] = df * fg * (1.0 - fg)
                dpre[2 * hh:3 * hh] = dg * (1.0 - gg * gg)
                dpre[3 * hh:] = do * og * (1.0 - og)
                dw += z[t].reshape(-1, 1) * dpre
                du += h_prev.reshape(-1, 1) * dpre
                db += dpre
                dz[t] += np.dot(wm, dpre)
                dh = np.dot(um, dpre)
    return dz, dw_f, du_f, db_f, dw_b, du_b, db_b


def cnn_window_fwd(z, k, k_f, b_f, k_b, b_b):
    """z (N, d), k_* (3, d, hh), b_* (hh,) -> H (N, 2hh), y (2, N, w, hh), amax (2, N, hh).

    Width-3 convolution over the span (kernel truncated at span edges), tanh,
    then per-channel max over span positions; ties keep the first position.
    """
    n_tok, d = z.shape
    hh = k_f.shape[2]
    w = 2 * k + 1
    out = np.zeros((n_tok, 2 * hh))
    ys = np.zeros((2, n_tok, w, hh))
    amax = np.zeros((2, n_tok, hh), dtype=np.int64)
    for part in range(2):
        if part == 0:
            km, bv = k_f, b_f
        else:
            km, bv = k_b, b_b
        for i in range(n_tok):
            lo = i - k if i - k > 0 else 0
            hi = i + k if i + k < n_tok - 1 else n_tok - 1
            steps = hi - lo + 1
            for s in range(steps):
                acc = np.zeros(hh)
                for dt in range(-1, 2):
                    ss = s + dt
                    if ss >= 0 and ss < steps:
                        acc = acc + np.dot(z[lo + ss], km[dt + 1])
                ys[part, i, s] = np.tanh(acc + bv)
            for c in range(hh):
                best = 0
                for s in range(1, steps):
                    if ys[part, i, s, c] > ys[part, i, best, c]:
                        best = s
                amax[part, i, c] = best
                if part == 0:
                    out[i, hh + c] = ys[part, i, best, c]
                else:
                    out[i, c] = ys[part, i, best, c]
    return out, ys, amax


def cnn_window_bwd(d_out, z, k, k_f, b_f, k_b, b_b, ys, amax):
    """Adjoint of cnn_window_fwd -> (dz, dk_f, db_f, dk_b, db_b)."""
    n_tok, d = z.shape
    hh = k_f.shape[2]
    w = 2 * k + 1
    dz = np.zeros((n_tok, d))
    dk_f = np.zeros(k_f.shape)
    db_f = np.zeros(hh)
    dk_b = np.zeros(k_b.shape)
    db_b = np.zeros(hh)
    dy = np.zeros((w, hh))
    for part in range(2):
        if part == 0:
            km = k_f
            dk, db = dk_f, db_f
        else:
            km = k_b
            dk, db = dk_b, db_b
        for i in range(n_tok):
            lo = i - k if i - k > 0 else 0
            hi = i + k if i + k < n_tok - 1 else n_tok - 1
            steps = hi - lo + 1
            dy[:steps] = 0.0
            for c in range(hh):
                if part == 0:
                    g = d_out[i, hh + c]
                else:
                    g = d_out[i, c]
                s = amax[part, i, c]
                y = ys[part, i, s, c]
                dy[s, c] += g * (1.0 - y * y)
            for s in range(steps):
                da = dy[s]
                db += da
                for dt in range(-1, 2):
                    ss = s + dt
                    if ss >= 0 and ss < steps:
                        dk[dt + 1] += z[lo + ss].reshape(-1, 1) * da
                        dz[lo + ss] += np.dot(km[dt + 1], da)
    return dz, dk_f, db_f, dk_b, db_b


def mlp_window_fwd(z, k, w_m, b_m):
    """z (N, d), w_m (d, d), b_m (d,) -> H (N, d), means (N, d), acts (N, d).

    Mean over span rows then one linear + tanh; position-free by construction.
    acts is the same buffer as H, repeated so the cache tuple feeds the
    backward positionally like every other kernel.
    """
    n_tok, d = z.shape
    out = np.zeros((n_tok, d))
    means = np.zeros((n_tok, d))
    for i in range(n_tok):
        lo = i - k if i - k > 0 else 0
        hi = i + k if i + k < n_tok - 1 else n_tok - 1
        steps = hi - lo + 1
        m = np.zeros(d)
        for t in range(lo, hi + 1):
            m = m + z[t]
        m = m / steps
        means[i] = m
        out[i] = np.tanh(np.dot(m, w_m) + b_m)
    return out, means, out


def mlp_window_bwd(d_out, z, k, w_m, b_m, means, out):
    """Adjoint of mlp_window_fwd -> (dz, dw_m, db_m)."""
    n_tok, d = z.shape
    dz = np.zeros((n_tok, d))
    dw = np.zeros(w_m.shape)
    db = np.zeros(d)
    for i in range(n_tok):
        lo = i - k if i - k > 0 else 0
        hi = i + k if i + k < n_tok - 1 else n_tok - 1
        steps = hi - lo + 1
        y = out[i]
        da = d_out[i] * (1.0 - y * y)
        dw += means[i].reshape(-1, 1) * da
        db += da
        dm = np.dot(w_m, da) / steps
        for t in range(lo, hi + 1):
            dz[t] += dm
    return dz, dw, db
