"""Hot inner loops, each with a numba kernel and a pure-numpy twin.

The public names at the bottom dispatch on :data:`texfuse._backend.USE_NUMBA`.
Both flavours add floating-point terms in the same order, so they agree
bit for bit on the same inputs (checked in ``tests/test_backends.py``).
"""
import numpy as np

from ._backend import USE_NUMBA, njit

# --------------------------------------------------------------------------
# LBP code map
# --------------------------------------------------------------------------


def _corner_terms(dx, dy):
    """Bilinear corners of one neighbour offset as (row_off, col_off, weight).

    Zero-weight corners are dropped so that exact-grid samples never touch
    pixels outside the sampling circle.
    """
    fx = np.floor(dx)
    fy = np.floor(dy)
    tx = dx - fx
    ty = dy - fy
    terms = []
    for oy, wy in ((0, 1.0 - ty), (1, ty)):
        for ox, wx in ((0, 1.0 - tx), (1, tx)):
            w = wy * wx
            if w != 0.0:
                terms.append((int(fy) + oy, int(fx) + ox, w))
    return terms


def sampling_table(P, R):
    """Neighbour offsets flattened into arrays the kernels can consume.

    Returns ``(start, roff, coff, weight)`` where the corners of neighbour
    ``k`` are ``start[k]:start[k + 1]``.
    """
    angles = 2.0 * np.pi * np.arange(P) / P
    # snap so that grid-aligned neighbours (and their 90-degree images) are exact
    dxs = np.round(R * np.cos(angles), 12) + 0.0
    dys = np.round(R * np.sin(angles), 12) + 0.0
    start = [0]
    roff, coff, wts = [], [], []
    for dx, dy in zip(dxs, dys):
        for r, c, w in _corner_terms(dx, dy):
            roff.append(r)
            coff.append(c)
            wts.append(w)
        start.append(len(wts))
    return (np.asarray(start, np.int64), np.asarray(roff, np.int64),
            np.asarray(coff, np.int64), np.asarray(wts, np.float64))


@njit
def _lbp_codes_numba(img, margin, start, roff, coff, wts):
    h, w = img.shape
    P = start.shape[0] - 1
    oh = h - 2 * margin
    ow = w - 2 * margin
    out = np.zeros((oh, ow), np.int64)
    for i in range(oh):
        y = i + margin
        for j in range(ow):
            x = j + margin
            vc = img[y, x]
            code = 0
            for k in range(P):
                v = 0.0
                for t in range(start[k], start[k + 1]):
                    v += wts[t] * img[y + roff[t], x + coff[t]]
                if v >= vc:
                    code |= 1 << k
            out[i, j] = code
    return out


def _lbp_codes_numpy(img, margin, start, roff, coff, wts):
    h, w = img.shape
    P = start.shape[0] - 1
    oh = h - 2 * margin
    ow = w - 2 * margin
    centre = img[margin:margin + oh, margin:margin + ow]
    out = np.zeros((oh, ow), np.int64)
    for k in range(P):
        v = np.zeros((oh, ow))
        for t in range(start[k], start[k + 1]):
            r0 = margin + roff[t]
            c0 = margin + coff[t]
            v += wts[t] * img[r0:r0 + oh, c0:c0 + ow]
        out |= (v >= centre).astype(np.int64) << k
    return out


# --------------------------------------------------------------------------
# PRICoLBP co-occurrence accumulation
# --------------------------------------------------------------------------


@njit
def _pricolbp_numba(codes, riu, minrot, mag, gx, gy, templates, uniform_codes,
                    P, n_b, eps):
    h, w = codes.shape
    T = templates.shape[0]
    n_a = P + 2
    hist = np.zeros((T, n_a * n_b))
    mask = (1 << P) - 1
    n_u = uniform_codes.shape[0]
    for y in range(h):
        for x in range(w):
            if codes[y, x] < 0:
                continue
            m = mag[y, x]
            if m < eps:
                continue
            ux = gx[y, x] / m
            uy = gy[y, x] / m
            a_bin = riu[y, x]
            s = minrot[y, x]
            for t in range(T):
                a = templates[t, 0]
                b = templates[t, 1]
                # normal = gradient rotated by +90 degrees: (-uy, ux)
                bx = int(np.floor(x + a * ux - b * uy + 0.5))
                by = int(np.floor(y + a * uy + b * ux + 0.5))
                if bx < 0 or by < 0 or bx >= w or by >= h:
                    continue
                cb = codes[by, bx]
                if cb < 0:
                    continue
                rot = ((cb >> s) | (cb << (P - s))) & mask
                pos = np.searchsorted(uniform_codes, rot)
                if pos < n_u and uniform_codes[pos] == rot:
                    b_bin = pos
                else:
                    b_bin = n_u
                hist[t, a_bin * n_b + b_bin] += m + mag[by, bx]
    return hist


def _pricolbp_numpy(codes, riu, minrot, mag, gx, gy, templates, uniform_codes,
                    P, n_b, eps):
    h, w = codes.shape
    T = templates.shape[0]
    n_a = P + 2
    hist = np.zeros((T, n_a * n_b))
    mask = (1 << P) - 1
    n_u = uniform_codes.shape[0]
    ys, xs = np.nonzero((codes >= 0) & (mag >= eps))
    m = mag[ys, xs]
    ux = gx[ys, xs] / m
    uy = gy[ys, xs] / m
    a_bin = riu[ys, xs]
    s = minrot[ys, xs]
    for t in range(T):
        a, b = templates[t]
        bx = np.floor(xs + a * ux - b * uy + 0.5).astype(np.int64)
        by = np.floor(ys + a * uy + b * ux + 0.5).astype(np.int64)
        ok = (bx >= 0) & (by >= 0) & (bx < w) & (by < h)
        idx = np.nonzero(ok)[0]
        cb = codes[by[idx], bx[idx]]
        keep = cb >= 0
        idx = idx[keep]
        cb = cb[keep]
        st = s[idx]
        rot = ((cb >> st) | (cb << (P - st))) & mask
        pos = np.searchsorted(uniform_codes, rot)
        hit = pos < n_u
        hit[hit] = uniform_codes[pos[hit]] == rot[hit]
        b_bin = np.where(hit, pos, n_u)
        bins = a_bin[idx] * n_b + b_bin
        wts = m[idx] + mag[by[idx], bx[idx]]
        hist[t] = np.bincount(bins, weights=wts, minlength=n_a * n_b)
    return hist


# --------------------------------------------------------------------------
# Dense SIFT spatial binning
# --------------------------------------------------------------------------


@njit
def _sift_bins_numba(ohist, wx, wy, tops, lefts):
    """Separable spatial pooling of per-pixel orientation histograms.

    ``out[ti, li, by, bx, o] = sum_v sum_u wy[v, by] * wx[u, bx]
    * ohist[tops[ti] + v, lefts[li] + u, o]``.
    """
    H = ohist.shape[0]
    n_o = ohist.shape[2]
    S = wx.shape[0]
    n_bx = wx.shape[1]
    n_by = wy.shape[1]
    n_t = tops.shape[0]
    n_l = lefts.shape[0]
    rows = np.zeros((H, n_l, n_bx, n_o))
    for y in range(H):
        for li in range(n_l):
            l0 = lefts[li]
            for u in range(S):
                for bx in range(n_bx):
                    wgt = wx[u, bx]
                    if wgt == 0.0:
                        continue
                    for o in range(n_o):
                        rows[y, li, bx, o] += wgt * ohist[y, l0 + u, o]
    out = np.zeros((n_t, n_l, n_by, n_bx, n_o))
    for ti in range(n_t):
        t0 = tops[ti]
        for v in range(S):
            for by in range(n_by):
                wgt = wy[v, by]
                if wgt == 0.0:
                    continue
                for li in range(n_l):
                    for bx in range(n_bx):
                        for o in range(n_o):
                            out[ti, li, by, bx, o] += wgt * rows[t0 + v, li, bx, o]
    return out


def _sift_bins_numpy(ohist, wx, wy, tops, lefts):
    H = ohist.shape[0]
    n_o = ohist.shape[2]
    S = wx.shape[0]
    n_bx = wx.shape[1]
    n_by = wy.shape[1]
    rows = np.zeros((H, lefts.shape[0], n_bx, n_o))
    # zero-weight terms add +0.0, which leaves every sum unchanged
    for u in range(S):
        rows += wx[u][None, None, :, None] * ohist[:, lefts + u, None, :]
    out = np.zeros((tops.shape[0], lefts.shape[0], n_by, n_bx, n_o))
    for v in range(S):
        out += wy[v][None, None, :, None, None] * rows[tops + v][:, :, None, :, :]
    return out


# --------------------------------------------------------------------------
# Dual coordinate descent epoch for the L1-loss SVM (Gram form)
# --------------------------------------------------------------------------


@njit
def _dcd_epoch_numba(K, y, alpha, f, C, order):
    """One sweep of dual coordinate descent.

    ``f`` holds ``K @ (alpha * y)`` and is updated in place alongside alpha.
    Returns the largest absolute projected gradient seen.
    """
    n = y.shape[0]
    pg_max = 0.0
    for idx in range(order.shape[0]):
        i = order[idx]
        G = y[i] * f[i] - 1.0
        a = alpha[i]
        if a <= 0.0:
            pg = min(G, 0.0)
        elif a >= C:
            pg = max(G, 0.0)
        else:
            pg = G
        if abs(pg) > pg_max:
            pg_max = abs(pg)
        if pg == 0.0:
            continue
        qii = K[i, i]
        if qii <= 0.0:
            continue
        na = min(max(a - G / qii, 0.0), C)
        d = (na - a) * y[i]
        if d != 0.0:
            alpha[i] = na
            for j in range(n):
                f[j] += d * K[j, i]
    return pg_max


def _dcd_epoch_numpy(K, y, alpha, f, C, order):
    pg_max = 0.0
    for i in order:
        G = y[i] * f[i] - 1.0
        a = alpha[i]
        if a <= 0.0:
            pg = min(G, 0.0)
        elif a >= C:
            pg = max(G, 0.0)
        else:
            pg = G
        pg_max = max(pg_max, abs(pg))
        if pg == 0.0:
            continue
        qii = K[i, i]
        if qii <= 0.0:
            continue
        na = min(max(a - G / qii, 0.0), C)
        d = (na - a) * y[i]
        if d != 0.0:
            alpha[i] = na
            f += d * K[:, i]
    return pg_max


@njit
def _dcd_epoch_primal_numba(X, y, alpha, w, C, order, qdiag):
    """Same sweep in weight space; ``w`` holds ``X.T @ (alpha * y)``."""
    d = X.shape[1]
    pg_max = 0.0
    for idx in range(order.shape[0]):
        i = order[idx]
        s = 0.0
        for k in range(d):
            s += w[k] * X[i, k]
        G = y[i] * s - 1.0
        a = alpha[i]
        if a <= 0.0:
            pg = min(G, 0.0)
        elif a >= C:
            pg = max(G, 0.0)
        else:
            pg = G
        if abs(pg) > pg_max:
            pg_max = abs(pg)
        if pg == 0.0 or qdiag[i] <= 0.0:
            continue
        na = min(max(a - G / qdiag[i], 0.0), C)
        step = (na - a) * y[i]
        if step != 0.0:
            alpha[i] = na
            for k in range(d):
                w[k] += step * X[i, k]
    return pg_max


def _dcd_epoch_primal_numpy(X, y, alpha, w, C, order, qdiag):
    pg_max = 0.0
    for i in order:
        G = y[i] * float(X[i] @ w) - 1.0
        a = alpha[i]
        if a <= 0.0:
            pg = min(G, 0.0)
        elif a >= C:
            pg = max(G, 0.0)
        else:
            pg = G
        pg_max = max(pg_max, abs(pg))
        if pg == 0.0 or qdiag[i] <= 0.0:
            continue
        na = min(max(a - G / qdiag[i], 0.0), C)
        step = (na - a) * y[i]
        if step != 0.0:
            alpha[i] = na
            w += step * X[i]
    return pg_max


NUMBA_KERNELS = {
    "lbp_codes": _lbp_codes_numba,
    "pricolbp": _pricolbp_numba,
    "sift_bins": _sift_bins_numba,
    "dcd_epoch": _dcd_epoch_numba,
    "dcd_epoch_primal": _dcd_epoch_primal_numba,
}
NUMPY_KERNELS = {
    "lbp_codes": _lbp_codes_numpy,
    "pricolbp": _pricolbp_numpy,
    "sift_bins": _sift_bins_numpy,
    "dcd_epoch": _dcd_epoch_numpy,
    "dcd_epoch_primal": _dcd_epoch_primal_numpy,
}
_ACTIVE = NUMBA_KERNELS if USE_NUMBA else NUMPY_KERNELS

lbp_codes = _ACTIVE["lbp_codes"]
pricolbp_accumulate = _ACTIVE["pricolbp"]
sift_bins = _ACTIVE["sift_bins"]
dcd_epoch = _ACTIVE["dcd_epoch"]
dcd_epoch_primal = _ACTIVE["dcd_epoch_primal"]
