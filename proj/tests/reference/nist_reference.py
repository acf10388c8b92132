#!/usr/bin/env python3
"""Independent NumPy/SciPy statistics for the eight randomness tests.

Writes tests/data/nist_reference.json. Inputs come from the splitmix64 bit generator
(state_i = seed + i*golden, bits least significant first), which the C++ tests reproduce.
"""
import json
import math
import sys
from pathlib import Path

import numpy as np
from scipy.fft import fft
from scipy.special import erfc, gammaincc, ndtr

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x):
    x = (x + GOLDEN) & MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK
    return x ^ (x >> 31)


def splitmix_bits(seed, n):
    words = (n + 63) // 64
    state = seed
    out = np.empty(words * 64, dtype=np.int8)
    for w in range(words):
        v = splitmix64(state)
        state = (state + GOLDEN) & MASK
        out[w * 64:(w + 1) * 64] = [(v >> k) & 1 for k in range(64)]
    return out[:n]


def monobit(e):
    n = len(e)
    if n < 100:
        return [], False
    s = abs(int(np.sum(2 * e.astype(np.int64) - 1))) / math.sqrt(n)
    return [float(erfc(s / math.sqrt(2)))], True


def runs(e):
    n = len(e)
    if n < 100:
        return [], False
    pi = float(np.mean(e))
    if abs(pi - 0.5) >= 2 / math.sqrt(n):
        return [], False
    v = 1 + int(np.count_nonzero(e[1:] != e[:-1]))
    p = erfc(abs(v - 2 * n * pi * (1 - pi)) / (2 * math.sqrt(2 * n) * pi * (1 - pi)))
    return [float(p)], True


def dft(e):
    n = len(e) - len(e) % 2
    if n < 100:
        return [], False
    x = 2.0 * e[:n] - 1.0
    mod = np.abs(fft(x))[: n // 2]
    t = math.sqrt(math.log(1 / 0.05) * n)
    n0 = 0.95 * n / 2
    n1 = int(np.count_nonzero(mod < t))
    d = (n1 - n0) / math.sqrt(n * 0.95 * 0.05 / 4)
    return [float(erfc(abs(d) / math.sqrt(2)))], True


def template(e, B=(0, 0, 0, 0, 0, 0, 0, 0, 1), N=8):
    n, m = len(e), len(B)
    M = n // N
    if M < m:
        return [], False
    B = np.array(B, dtype=np.int8)
    mu = (M - m + 1) / 2 ** m
    var = M * (1 / 2 ** m - (2 * m - 1) / 2 ** (2 * m))
    chi2 = 0.0
    for i in range(N):
        block = e[i * M:(i + 1) * M]
        j, w = 0, 0
        while j <= M - m:
            if np.array_equal(block[j:j + m], B):
                w += 1
                j += m
            else:
                j += 1
        chi2 += (w - mu) ** 2 / var
    return [float(gammaincc(N / 2, chi2 / 2))], True


def apen(e, m=2):
    n = len(e)
    if n < 2 ** (m + 6):
        return [], False

    def phi(k):
        ext = np.concatenate([e, e[:k - 1]]) if k > 1 else e
        codes = np.zeros(n, dtype=np.int64)
        for j in range(k):
            codes = codes * 2 + ext[j:j + n]
        c = np.bincount(codes, minlength=2 ** k)
        c = c[c > 0] / n
        return float(np.sum(c * np.log(c)))

    chi2 = 2 * n * (math.log(2) - (phi(m) - phi(m + 1)))
    return [float(gammaincc(2 ** (m - 1), chi2 / 2))], True


def cusum_p(n, z):
    s1 = 0.0
    for k in range(int((-n / z + 1) / 4), int((n / z - 1) / 4) + 1):
        s1 += ndtr((4 * k + 1) * z / math.sqrt(n)) - ndtr((4 * k - 1) * z / math.sqrt(n))
    s2 = 0.0
    for k in range(int((-n / z - 3) / 4), int((n / z - 1) / 4) + 1):
        s2 += ndtr((4 * k + 3) * z / math.sqrt(n)) - ndtr((4 * k + 1) * z / math.sqrt(n))
    return float(1 - s1 + s2)


def cusum(e):
    n = len(e)
    if n < 100:
        return [], False
    x = 2 * e.astype(np.int64) - 1
    fwd = int(np.max(np.abs(np.cumsum(x))))
    bwd = int(np.max(np.abs(np.cumsum(x[::-1]))))
    return [cusum_p(n, fwd), cusum_p(n, bwd)], True


def cycles_of(e):
    s = np.concatenate([[0], np.cumsum(2 * e.astype(np.int64) - 1), [0]])
    zeros = np.flatnonzero(s == 0)
    if s[-2] == 0:
        zeros = zeros[:-1]
    return s, zeros


def excursions(e, min_cycles=500):
    s, zeros = cycles_of(e)
    J = len(zeros) - 1
    if J == 0:
        return [], False
    ps = []
    for x in (-4, -3, -2, -1, 1, 2, 3, 4):
        ax = abs(x)
        probs = [1 - 1 / (2 * ax)]
        probs += [1 / (4 * ax * ax) * (1 - 1 / (2 * ax)) ** (k - 1) for k in range(1, 5)]
        probs.append(1 / (2 * ax) * (1 - 1 / (2 * ax)) ** 4)
        nu = np.zeros(6)
        for c in range(J):
            visits = int(np.count_nonzero(s[zeros[c]:zeros[c + 1]] == x))
            nu[min(visits, 5)] += 1
        chi2 = sum((nu[k] - J * probs[k]) ** 2 / (J * probs[k]) for k in range(6))
        ps.append(float(gammaincc(2.5, chi2 / 2)))
    return ps, J >= min_cycles


def excursions_variant(e, min_cycles=500):
    s, zeros = cycles_of(e)
    J = len(zeros) - 1
    if J == 0:
        return [], False
    ps = []
    for x in list(range(-9, 0)) + list(range(1, 10)):
        xi = int(np.count_nonzero(s == x))
        ps.append(float(erfc(abs(xi - J) / math.sqrt(2 * J * (4 * abs(x) - 2)))))
    return ps, J >= min_cycles


TESTS = [
    ("Monobit Frequency", monobit),
    ("Runs", runs),
    ("Discrete Fourier Transform", dft),
    ("Non Overlapping Template", template),
    ("Approximate Entropy", apen),
    ("Cumulative Sums", cusum),
    ("Random Excursion", excursions),
    ("Random Excursion Variant", excursions_variant),
]


def case(seed, n):
    e = splitmix_bits(seed, n)
    tests = []
    for name, fn in TESTS:
        p, applicable = fn(e)
        tests.append({"name": name, "p_values": [min(max(v, 0.0), 1.0) for v in p], "applicable": applicable})
    return {"seed": seed, "n": n, "tests": tests}


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parents[1] / "data" / "nist_reference.json"
    cases = [case(seed, 10000) for seed in range(1, 21)]
    cases += [case(seed, 1000000) for seed in (101, 102)]
    cases += [case(seed, 380) for seed in (201, 202)]
    out.write_text(json.dumps({"generator": "splitmix64-lsb-first", "cases": cases}, indent=1) + "\n")


if __name__ == "__main__":
    main()
