"""Standalone re-implementation of the desk-2x2 matching chain.

Written independently of the C++ kernel; its outputs are frozen into
tests/test_chain.cpp. Run: python3 tests/oracles/chain_stationary.py
"""
import itertools

import numpy as np

MU = {0: {0: [0.9, 0.3], 1: [0.5, 0.2]}, 1: {0: [0.8, 0.25], 1: [0.6, 0.15]}}
K, M, N, EXP_C = 2, 2, 2, 5.0


def utility(j, prof):
    k = sum(1 for a in prof if a == prof[j])
    return MU[j][prof[j]][k - 1] if k <= N else 0.0


UTILS = [sorted({0.0} | {v for m in range(M) for v in MU[j][m] if v > 0}) for j in range(K)]
LOCAL = [[(a, u, s) for a in range(M) for u in UTILS[j] for s in ("C", "D")] for j in range(K)]
STATES = list(itertools.product(*LOCAL))
INDEX = {s: i for i, s in enumerate(STATES)}


def kernel(eps):
    e = eps ** EXP_C
    P = np.zeros((len(STATES), len(STATES)))
    for i, z in enumerate(STATES):
        dists = []
        for a, _, s in z:
            dists.append([(1 - e) if m == a else e / (M - 1) for m in range(M)] if s == "C" else [1.0 / M] * M)
        for prof in itertools.product(range(M), repeat=K):
            p = np.prod([dists[j][prof[j]] for j in range(K)])
            if p == 0:
                continue
            outs = []
            for j, (a, u, s) in enumerate(z):
                uj = utility(j, prof)
                if s == "C" and prof[j] == a and uj == u:
                    outs.append([((a, u, s), 1.0)])
                else:
                    acc = eps ** (1 - uj)
                    outs.append([((prof[j], uj, "C"), acc), ((prof[j], uj, "D"), 1 - acc)])
            for combo in itertools.product(*outs):
                P[i, INDEX[tuple(c[0] for c in combo)]] += p * np.prod([c[1] for c in combo])
    return P


def stationary(P):
    n = len(P)
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    return np.linalg.solve(A, b)


if __name__ == "__main__":
    for eps in (0.3, 0.2, 0.1, 0.05):
        pi = stationary(kernel(eps))
        row = []
        for prof in itertools.product(range(M), repeat=K):
            z = tuple((prof[j], utility(j, prof), "C") for j in range(K))
            row.append(pi[INDEX[z]])
        d0 = sum(pi[i] for i, z in enumerate(STATES) if all(s == "D" for _, _, s in z))
        print(eps, " ".join(f"{v:.12f}" for v in row), f"D0={d0:.12e}")
