# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_pykernels``; same contracts."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, floor, INFINITY

cnp.import_array()

DEF NOISE = -1


cdef inline double _seg_dist2(double px, double py, double xa, double ya,
                              double xb, double yb) noexcept nogil:
    cdef double dx = xb - xa, dy = yb - ya
    cdef double L2 = dx * dx + dy * dy
    cdef double t, ex, ey
    if L2 == 0:
        return (px - xa) * (px - xa) + (py - ya) * (py - ya)
    t = ((px - xa) * dx + (py - ya) * dy) / L2
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    ex = px - (xa + t * dx)
    ey = py - (ya + t * dy)
    return ex * ex + ey * ey


def points_in_polygon(px, py, vx, vy, double band):
    cdef double[::1] X = np.ascontiguousarray(px, dtype=np.float64).reshape(-1)
    cdef double[::1] Y = np.ascontiguousarray(py, dtype=np.float64).reshape(-1)
    cdef double[::1] VX = np.ascontiguousarray(vx, dtype=np.float64)
    cdef double[::1] VY = np.ascontiguousarray(vy, dtype=np.float64)
    cdef Py_ssize_t n = X.shape[0], m = VX.shape[0], i, k
    out = np.zeros(n, dtype=bool)
    cdef cnp.npy_bool[::1] O = out
    cdef double x, y, x1, y1, x2, y2, xa, ya, xb, yb, cross, band2 = band * band
    cdef int parity, near
    with nogil:
        for k in range(n):
            x = X[k]
            y = Y[k]
            parity = 0
            x1 = VX[m - 1]
            y1 = VY[m - 1]
            for i in range(m):
                x2 = VX[i]
                y2 = VY[i]
                if y1 <= y2:
                    xa = x1; ya = y1; xb = x2; yb = y2
                else:
                    xa = x2; ya = y2; xb = x1; yb = y1
                if ya < y and y <= yb:
                    cross = (xb - xa) * (y - ya) - (yb - ya) * (x - xa)
                    if cross > 0:
                        parity ^= 1
                x1 = x2
                y1 = y2
            near = 0
            if not parity and band > 0:
                x1 = VX[m - 1]
                y1 = VY[m - 1]
                for i in range(m):
                    x2 = VX[i]
                    y2 = VY[i]
                    # edge bounding box farther than the band: cannot be near
                    if not (y < (y1 if y1 < y2 else y2) - band or y > (y1 if y1 > y2 else y2) + band
                            or x < (x1 if x1 < x2 else x2) - band or x > (x1 if x1 > x2 else x2) + band):
                        if _seg_dist2(x, y, x1, y1, x2, y2) <= band2:
                            near = 1
                            break
                    x1 = x2
                    y1 = y2
            O[k] = parity | near
    return out.reshape(np.shape(px))


def min_edge_distance(px, py, vx, vy):
    cdef double[::1] X = np.ascontiguousarray(px, dtype=np.float64).reshape(-1)
    cdef double[::1] Y = np.ascontiguousarray(py, dtype=np.float64).reshape(-1)
    cdef double[::1] VX = np.ascontiguousarray(vx, dtype=np.float64)
    cdef double[::1] VY = np.ascontiguousarray(vy, dtype=np.float64)
    cdef Py_ssize_t n = X.shape[0], m = VX.shape[0], i, j, k
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] O = out
    cdef double best, d
    with nogil:
        for k in range(n):
            best = INFINITY
            for i in range(m):
                j = (i + 1) % m
                d = _seg_dist2(X[k], Y[k], VX[i], VY[i], VX[j], VY[j])
                if d < best:
                    best = d
            O[k] = sqrt(best)
    return out.reshape(np.shape(px))


cdef Py_ssize_t _lower_bound(long long[::1] keys, long long key) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = keys.shape[0], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if keys[mid] < key:
            lo = mid + 1
        else:
            hi = mid
    return lo


def dbscan_labels(points, double eps, int min_points):
    pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 2)
    cdef Py_ssize_t n = pts.shape[0]
    labels_arr = np.full(n, NOISE, dtype=np.int64)
    if n == 0:
        return labels_arr
    cdef double[:, ::1] P = pts
    cdef long long[::1] L = labels_arr

    # uniform grid slightly coarser than eps so rounding never splits neighbours
    cell = eps * (1.0 + 1e-6)
    cx = np.floor((pts[:, 0] - pts[:, 0].min()) / cell).astype(np.int64)
    cy = np.floor((pts[:, 1] - pts[:, 1].min()) / cell).astype(np.int64)
    cdef long long W = int(cy.max()) + 3
    key_all = (cx + 1) * W + (cy + 1)
    order_arr = np.argsort(key_all, kind="stable")
    keys_arr = np.ascontiguousarray(key_all[order_arr])
    cdef long long[::1] KEY = np.ascontiguousarray(key_all)
    cdef long long[::1] SK = keys_arr
    cdef long long[::1] ORD = order_arr.astype(np.int64)
    count_arr = np.zeros(n, dtype=np.int64)
    cdef long long[::1] CNT = count_arr
    cdef double eps2 = eps * eps, dx, dy
    cdef Py_ssize_t i, q, r, s, a, b, top
    cdef long long base, key
    cdef int ox, oy

    with nogil:
        for i in range(n):
            base = KEY[i]
            for ox in range(-1, 2):
                for oy in range(-1, 2):
                    key = base + ox * W + oy
                    s = _lower_bound(SK, key)
                    while s < n and SK[s] == key:
                        r = ORD[s]
                        dx = P[r, 0] - P[i, 0]
                        dy = P[r, 1] - P[i, 1]
                        if dx * dx + dy * dy <= eps2:
                            CNT[i] += 1
                        s += 1

    stack_arr = np.empty(n, dtype=np.int64)
    cdef long long[::1] STK = stack_arr
    cdef long long cluster = 0
    with nogil:
        for i in range(n):
            if L[i] != NOISE or CNT[i] < min_points:
                continue
            L[i] = cluster
            top = 0
            STK[top] = i
            top += 1
            while top > 0:
                top -= 1
                q = STK[top]
                base = KEY[q]
                for ox in range(-1, 2):
                    for oy in range(-1, 2):
                        key = base + ox * W + oy
                        s = _lower_bound(SK, key)
                        while s < n and SK[s] == key:
                            r = ORD[s]
                            s += 1
                            if L[r] != NOISE:
                                continue
                            dx = P[r, 0] - P[q, 0]
                            dy = P[r, 1] - P[q, 1]
                            if dx * dx + dy * dy <= eps2:
                                L[r] = cluster
                                if CNT[r] >= min_points:
                                    STK[top] = r
                                    top += 1
            cluster += 1
    return labels_arr


def gini_best_split(x_sorted, y_sorted, int n_classes, Py_ssize_t min_leaf):
    cdef double[::1] x = np.ascontiguousarray(x_sorted, dtype=np.float64)
    cdef long long[::1] y = np.ascontiguousarray(y_sorted, dtype=np.int64)
    cdef Py_ssize_t n = x.shape[0], i, c
    if n < 2:
        return np.inf, np.nan, 0
    left_arr = np.zeros(n_classes, dtype=np.float64)
    total_arr = np.zeros(n_classes, dtype=np.float64)
    cdef double[::1] left = left_arr
    cdef double[::1] total = total_arr
    for i in range(n):
        total[y[i]] += 1.0
    cdef double best = INFINITY, score, nl, nr, sl, sr, rc, gl, gr
    cdef Py_ssize_t best_k = -1
    with nogil:
        for i in range(n - 1):
            left[y[i]] += 1.0
            nl = i + 1
            nr = n - nl
            if not (x[i + 1] > x[i]) or nl < min_leaf or nr < min_leaf:
                continue
            sl = 0.0
            sr = 0.0
            for c in range(n_classes):
                sl += left[c] * left[c]
                rc = total[c] - left[c]
                sr += rc * rc
            gl = 1.0 - sl / (nl * nl)
            gr = 1.0 - sr / (nr * nr)
            score = (nl * gl + nr * gr) / n
            if score < best:
                best = score
                best_k = i
    if best_k < 0:
        return np.inf, np.nan, 0
    cdef double thr = 0.5 * (x[best_k] + x[best_k + 1])
    if not (x[best_k] <= thr and thr < x[best_k + 1]):
        thr = x[best_k]
    return float(best), float(thr), best_k + 1
