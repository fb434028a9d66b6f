"""Pure-Python DP kernels.

Mirror of ``_kernels.pyx`` operation for operation, so both backends give
bit-identical tables and pointers. Used when the extension is not built or
``STORYALIGN_PURE=1`` is set.
"""

import numpy as np

INF = float("inf")

# DTW predecessor codes
DIAG, LEFT, UP = 0, 1, 2

# Drop-DTW pointer codes.
# Z (rectangle fully resolved): which transition closed cell (i, j)
Z_MATCH, Z_DROP_SENT, Z_DROP_CLIP, Z_DROP_BOTH = 0, 1, 2, 3
# D (pair matched): where the chain came from
D_FRESH, D_SAME_CLIP, D_SAME_SENT = 0, 1, 2
# R / C (run continuing on one clip / one sentence)
RUN_ADJACENT, RUN_SKIP = 0, 1


def dtw_fill(cost):
    m, n = cost.shape
    d = cost.tolist()
    acc = [[INF] * n for _ in range(m)]
    ptr = [[-1] * n for _ in range(m)]
    for i in range(m):
        row, drow = acc[i], d[i]
        prow = acc[i - 1] if i else None
        for j in range(n):
            if i == 0 and j == 0:
                row[0] = drow[0]
                continue
            best, p = INF, -1
            if i and j:
                best, p = prow[j - 1], DIAG
            if j and row[j - 1] < best:
                best, p = row[j - 1], LEFT
            if i and prow[j] < best:
                best, p = prow[j], UP
            row[j] = drow[j] + best
            ptr[i][j] = p
    return np.array(acc, dtype=np.float64), np.array(ptr, dtype=np.int8)


def drop_dtw_fill(cost, drop_clip, drop_sent):
    m, n = cost.shape
    dv, dt = float(drop_clip), float(drop_sent)
    d = cost.tolist()
    D = [[INF] * n for _ in range(m)]
    R = [[INF] * n for _ in range(m)]
    C = [[INF] * n for _ in range(m)]
    Z = [[INF] * (n + 1) for _ in range(m + 1)]
    pD = [[0] * n for _ in range(m)]
    pR = [[0] * n for _ in range(m)]
    pC = [[0] * n for _ in range(m)]
    pZ = [[0] * (n + 1) for _ in range(m + 1)]

    Z[0][0] = 0.0
    for i in range(1, m + 1):
        Z[i][0] = Z[i - 1][0] + dv
        pZ[i][0] = Z_DROP_CLIP
    for j in range(1, n + 1):
        Z[0][j] = Z[0][j - 1] + dt
        pZ[0][j] = Z_DROP_SENT

    for a in range(m):
        for b in range(n):
            if b:
                r, pr = D[a][b - 1], RUN_ADJACENT
                alt = R[a][b - 1] + dt
                if alt < r:
                    r, pr = alt, RUN_SKIP
                R[a][b] = r
                pR[a][b] = pr
            if a:
                c, pc = D[a - 1][b], RUN_ADJACENT
                alt = C[a - 1][b] + dv
                if alt < c:
                    c, pc = alt, RUN_SKIP
                C[a][b] = c
                pC[a][b] = pc

            best, p = Z[a][b], D_FRESH
            if R[a][b] < best:
                best, p = R[a][b], D_SAME_CLIP
            if C[a][b] < best:
                best, p = C[a][b], D_SAME_SENT
            D[a][b] = d[a][b] + best
            pD[a][b] = p

            best, p = D[a][b], Z_MATCH
            alt = Z[a + 1][b] + dt
            if alt < best:
                best, p = alt, Z_DROP_SENT
            alt = Z[a][b + 1] + dv
            if alt < best:
                best, p = alt, Z_DROP_CLIP
            alt = Z[a][b] + dv + dt
            if alt < best:
                best, p = alt, Z_DROP_BOTH
            Z[a + 1][b + 1] = best
            pZ[a + 1][b + 1] = p

    f8 = np.float64
    i1 = np.int8
    return (
        np.array(D, dtype=f8),
        np.array(R, dtype=f8),
        np.array(C, dtype=f8),
        np.array(Z, dtype=f8),
        np.array(pD, dtype=i1),
        np.array(pR, dtype=i1),
        np.array(pC, dtype=i1),
        np.array(pZ, dtype=i1),
    )
