"""Literal, loop-based transcriptions used as independent test oracles.

Nothing here imports from the package under test.
"""

import math


def clamp_get(img, y, x):
    h, w = len(img), len(img[0])
    return int(img[min(max(y, 0), h - 1)][min(max(x, 0), w - 1)])


def lbp_oracle(img):
    """Plain 3x3 LBP; neighbours clockwise from top-left, bit i for neighbour i."""
    ring = [(-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1)]
    h, w = len(img), len(img[0])
    out = [[0] * w for _ in range(h)]
    for y in range(h):
        for x in range(w):
            c = clamp_get(img, y, x)
            code = 0
            for i, (dy, dx) in enumerate(ring):
                if clamp_get(img, y + dy, x + dx) >= c:
                    code += 2 ** i
            out[y][x] = code
    return out


def patch(img, cy, cx, w):
    half = w // 2
    return [clamp_get(img, cy + dy, cx + dx)
            for dy in range(-half, half + 1) for dx in range(-half, half + 1)]


def ssd(a, b):
    return sum((p / 255.0 - q / 255.0) ** 2 for p, q in zip(a, b))


def tplbp_oracle(img, S=8, w=3, alpha=2, r=2, tau=0.01):
    """Direct per-pixel evaluation of the three-patch code, bits i = 0..S-1."""
    h, wd = len(img), len(img[0])
    out = [[0] * wd for _ in range(h)]
    for y in range(h):
        for x in range(wd):
            cp = patch(img, y, x, w)
            ring = []
            for i in range(S):
                px = x + r * math.cos(2 * math.pi * i / S)
                py = y - r * math.sin(2 * math.pi * i / S)
                ring.append(patch(img, int(math.floor(py + 0.5)), int(math.floor(px + 0.5)), w))
            code = 0
            for i in range(S):
                diff = ssd(ring[i], cp) - ssd(ring[(i + alpha) % S], cp)
                if diff >= tau:
                    code += 2 ** i
            out[y][x] = code
    return out


def histogram_oracle(codes, x0, x1, y0, y1, M):
    hist = [0] * M
    for y in range(y0, y1):
        for x in range(x0, x1):
            hist[codes[y][x]] += 1
    return hist


def spm_double_sum(codes1, codes2, L, M):
    """Unnormalised pyramid match kernel by explicit loops over levels and cells."""
    h1, w1 = len(codes1), len(codes1[0])
    h2, w2 = len(codes2), len(codes2[0])
    total = 0.0
    for l in range(L + 1):
        weight = 1.0 / 2 ** L if l == 0 else 1.0 / 2 ** (L - l + 1)
        n = 2 ** l
        for jy in range(n):
            for jx in range(n):
                a = histogram_oracle(codes1, jx * w1 // n, (jx + 1) * w1 // n,
                                     jy * h1 // n, (jy + 1) * h1 // n, M)
                b = histogram_oracle(codes2, jx * w2 // n, (jx + 1) * w2 // n,
                                     jy * h2 // n, (jy + 1) * h2 // n, M)
                total += weight * sum(min(p, q) for p, q in zip(a, b))
    return total
