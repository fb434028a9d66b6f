# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled DP kernels for DTW and Drop-DTW.

Pointer codes and comparison order match ``_fallback.py`` exactly; any change
here must be mirrored there.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef double INF = float("inf")


def dtw_fill(const double[:, ::1] cost):
    cdef Py_ssize_t m = cost.shape[0], n = cost.shape[1], i, j
    acc_arr = np.full((m, n), INF, dtype=np.float64)
    ptr_arr = np.full((m, n), -1, dtype=np.int8)
    cdef double[:, ::1] acc = acc_arr
    cdef signed char[:, ::1] ptr = ptr_arr
    cdef double best
    cdef signed char p
    for i in range(m):
        for j in range(n):
            if i == 0 and j == 0:
                acc[0, 0] = cost[0, 0]
                continue
            best = INF
            p = -1
            if i > 0 and j > 0:
                best = acc[i - 1, j - 1]
                p = 0
            if j > 0 and acc[i, j - 1] < best:
                best = acc[i, j - 1]
                p = 1
            if i > 0 and acc[i - 1, j] < best:
                best = acc[i - 1, j]
                p = 2
            acc[i, j] = cost[i, j] + best
            ptr[i, j] = p
    return acc_arr, ptr_arr


def drop_dtw_fill(const double[:, ::1] cost, double drop_clip, double drop_sent):
    cdef Py_ssize_t m = cost.shape[0], n = cost.shape[1], i, j, a, b
    cdef double dv = drop_clip, dt = drop_sent
    D_arr = np.full((m, n), INF, dtype=np.float64)
    R_arr = np.full((m, n), INF, dtype=np.float64)
    C_arr = np.full((m, n), INF, dtype=np.float64)
    Z_arr = np.full((m + 1, n + 1), INF, dtype=np.float64)
    pD_arr = np.zeros((m, n), dtype=np.int8)
    pR_arr = np.zeros((m, n), dtype=np.int8)
    pC_arr = np.zeros((m, n), dtype=np.int8)
    pZ_arr = np.zeros((m + 1, n + 1), dtype=np.int8)
    cdef double[:, ::1] D = D_arr
    cdef double[:, ::1] R = R_arr
    cdef double[:, ::1] C = C_arr
    cdef double[:, ::1] Z = Z_arr
    cdef signed char[:, ::1] pD = pD_arr
    cdef signed char[:, ::1] pR = pR_arr
    cdef signed char[:, ::1] pC = pC_arr
    cdef signed char[:, ::1] pZ = pZ_arr
    cdef double best, alt
    cdef signed char p

    Z[0, 0] = 0.0
    for i in range(1, m + 1):
        Z[i, 0] = Z[i - 1, 0] + dv
        pZ[i, 0] = 2
    for j in range(1, n + 1):
        Z[0, j] = Z[0, j - 1] + dt
        pZ[0, j] = 1

    for a in range(m):
        for b in range(n):
            if b > 0:
                best = D[a, b - 1]
                p = 0
                alt = R[a, b - 1] + dt
                if alt < best:
                    best = alt
                    p = 1
                R[a, b] = best
                pR[a, b] = p
            if a > 0:
                best = D[a - 1, b]
                p = 0
                alt = C[a - 1, b] + dv
                if alt < best:
                    best = alt
                    p = 1
                C[a, b] = best
                pC[a, b] = p

            best = Z[a, b]
            p = 0
            if R[a, b] < best:
                best = R[a, b]
                p = 1
            if C[a, b] < best:
                best = C[a, b]
                p = 2
            D[a, b] = cost[a, b] + best
            pD[a, b] = p

            best = D[a, b]
            p = 0
            alt = Z[a + 1, b] + dt
            if alt < best:
                best = alt
                p = 1
            alt = Z[a, b + 1] + dv
            if alt < best:
                best = alt
                p = 2
            alt = Z[a, b] + dv + dt
            if alt < best:
                best = alt
                p = 3
            Z[a + 1, b + 1] = best
            pZ[a + 1, b + 1] = p

    return D_arr, R_arr, C_arr, Z_arr, pD_arr, pR_arr, pC_arr, pZ_arr
