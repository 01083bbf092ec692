"""Independent brute-force oracles used by several test modules."""
import numpy as np


def similarity_oracle(M):
    P = len(M)
    S = [[0] * P for _ in range(P)]
    for i in range(P):
        for j in range(P):
            if i == j:
                continue
            total = 0
            for k in range(P):
                if k != i and k != j:
                    total += min(int(M[i][k]), int(M[j][k]))
            S[i][j] = total
    return S


def agglomerate_oracle(M, target_k):
    """Replays the greedy merge rule with explicit loops over every cluster pair."""
    P = len(M)
    clusters = [[i] for i in range(P)]
    while len(clusters) > target_k:
        K = len(clusters)
        C = [[sum(int(M[a][b]) for a in clusters[x] for b in clusters[y]) for y in range(K)]
             for x in range(K)]
        S = similarity_oracle(C)
        best_key = None
        best_pair = None
        for x in range(K):
            for y in range(K):
                if x == y:
                    continue
                a, b = sorted((x, y), key=lambda c: min(clusters[c]))
                key = (-S[a][b], min(clusters[a]), min(clusters[b]))
                if best_key is None or key < best_key:
                    best_key, best_pair = key, (a, b)
        a, b = best_pair
        merged = sorted(clusters[a] + clusters[b])
        clusters = [c for n, c in enumerate(clusters) if n not in (a, b)] + [merged]
        clusters.sort(key=min)
    return sorted(sorted(c) for c in clusters)


def numeric_grad(f, x, h=1e-5):
    """Central finite differences of scalar f() with respect to array x (modified in place)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        old = x[idx]
        x[idx] = old + h
        fp = f()
        x[idx] = old - h
        fm = f()
        x[idx] = old
        g[idx] = (fp - fm) / (2 * h)
    return g
