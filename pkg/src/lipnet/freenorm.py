"""Lipschitz-free norm of finitely supported zero-sum weightings.

The norm of a molecule is the minimal cost of transporting its positive part
onto its negative part, solved by successive shortest paths with node
potentials on the complete bipartite support graph.  The final potentials
form a feasible dual solution, so every solve carries its own optimality
certificate: the primal/dual gap is recorded in the plan and must stay at
transport-LP roundoff scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_EPS = 1e-12


@dataclass(frozen=True)
class Molecule:
    """Zero-sum weighting over net points, addressed by point indices."""

    support: tuple
    weights: tuple

    def __post_init__(self):
        support = tuple(int(i) for i in self.support)
        weights = tuple(float(w) for w in self.weights)
        if len(support) != len(weights):
            raise ValueError("support and weights must align")
        if len(set(support)) != len(support):
            raise ValueError("support indices must be distinct")
        scale = max([abs(w) for w in weights], default=0.0)
        if abs(sum(weights)) > 1e-12 * max(1.0, scale) * max(1, len(weights)):
            raise ValueError("molecule weights must sum to zero")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def dirac_difference(cls, i: int, j: int):
        return cls(support=(i, j), weights=(1.0, -1.0))

    def scaled(self, lam: float):
        return Molecule(self.support, tuple(lam * w for w in self.weights))

    def is_zero(self, tol=_EPS) -> bool:
        return all(abs(w) <= tol for w in self.weights)


def combine(*mus: Molecule) -> Molecule:
    acc = {}
    for mu in mus:
        for i, w in zip(mu.support, mu.weights):
            acc[i] = acc.get(i, 0.0) + w
    items = sorted((i, w) for i, w in acc.items() if abs(w) > _EPS)
    return Molecule(tuple(i for i, _ in items), tuple(w for _, w in items))


@dataclass
class TransportPlan:
    """Primal certificate: flows (source, sink, mass) plus the dual bound."""

    flows: list
    cost: float
    dual_value: float

    @property
    def dual_gap(self) -> float:
        return abs(self.cost - self.dual_value)


def _as_metric(metric):
    if callable(metric):
        return metric
    arr = np.asarray(metric, dtype=float)

    def d(i, j):
        return float(arr[i, j])

    return d


def _ssp_transport(cost: np.ndarray, supply, demand):
    """Min-cost transport on a complete bipartite graph; returns flow, potentials.

    Successive shortest paths under reduced costs; each augmentation exhausts
    a source or a sink, and the potentials stay dual-feasible throughout.
    """
    ns, nt = cost.shape
    pot_s = [0.0] * ns
    pot_t = [0.0] * nt
    res_s = [float(v) for v in supply]
    res_t = [float(v) for v in demand]
    flow = np.zeros((ns, nt))
    total = sum(res_s)
    eps = _EPS * max(1.0, total)
    inf = math.inf

    while sum(res_s) > eps:
        dist_s = [0.0 if res_s[i] > eps else inf for i in range(ns)]
        dist_t = [inf] * nt
        par_t = [-1] * nt
        par_s = [-1] * ns
        done_s = [False] * ns
        done_t = [False] * nt
        while True:
            side, node, best = None, -1, inf
            for i in range(ns):
                if not done_s[i] and dist_s[i] < best:
                    side, node, best = 0, i, dist_s[i]
            for j in range(nt):
                if not done_t[j] and dist_t[j] < best:
                    side, node, best = 1, j, dist_t[j]
            if side is None:
                break
            if side == 0:
                i = node
                done_s[i] = True
                for j in range(nt):
                    if done_t[j]:
                        continue
                    w = cost[i, j] + pot_s[i] - pot_t[j]
                    if dist_s[i] + w < dist_t[j]:
                        dist_t[j] = dist_s[i] + w
                        par_t[j] = i
            else:
                j = node
                done_t[j] = True
                for i in range(ns):
                    if done_s[i] or flow[i, j] <= eps:
                        continue
                    w = -cost[i, j] + pot_t[j] - pot_s[i]
                    if dist_t[j] + w < dist_s[i]:
                        dist_s[i] = dist_t[j] + w
                        par_s[i] = j
        sink, best = -1, inf
        for j in range(nt):
            if res_t[j] > eps and dist_t[j] < best:
                sink, best = j, dist_t[j]
        if sink < 0:
            raise RuntimeError("transport problem infeasible; molecule unbalanced?")
        path = []
        j = sink
        while True:
            i = par_t[j]
            path.append((i, j))
            if par_s[i] < 0:
                break
            j = par_s[i]
        amount = min(res_t[sink], res_s[path[-1][0]])
        for k in range(1, len(path)):
            amount = min(amount, flow[path[k - 1][0], path[k][1]])
        if amount <= 0:
            raise RuntimeError("degenerate augmentation in transport solve")
        for k, (i, j) in enumerate(path):
            flow[i, j] += amount
            if k >= 1:
                flow[path[k - 1][0], j] -= amount
        res_t[sink] -= amount
        res_s[path[-1][0]] -= amount
        cap = dist_t[sink]
        for i in range(ns):
            pot_s[i] += min(dist_s[i], cap)
        for j in range(nt):
            pot_t[j] += min(dist_t[j], cap)
    return flow, pot_s, pot_t


def free_norm(metric, mu: Molecule):
    """Free-space norm of a molecule with its optimal transport certificate.

    ``metric`` is a pairwise distance matrix or a callable on point indices;
    it must be positive between distinct support points.  Returns the norm
    and the plan; the plan's dual gap is the built-in optimality check.
    """
    d = _as_metric(metric)
    src = [(i, w) for i, w in zip(mu.support, mu.weights) if w > _EPS]
    snk = [(i, -w) for i, w in zip(mu.support, mu.weights) if w < -_EPS]
    if not src and not snk:
        return 0.0, TransportPlan(flows=[], cost=0.0, dual_value=0.0)
    if not src or not snk:
        raise ValueError("molecule is unbalanced")
    cost = np.asarray([[d(i, j) for j, _ in snk] for i, _ in src], dtype=float)
    if np.any(cost < 0):
        raise ValueError("metric must be nonnegative")
    supply = [w for _, w in src]
    demand = [w for _, w in snk]
    flow, pot_s, pot_t = _ssp_transport(cost, supply, demand)
    value = float((flow * cost).sum())
    dual = -sum(a * p for a, p in zip(supply, pot_s)) + sum(b * p for b, p in zip(demand, pot_t))
    flows = [
        (src[i][0], snk[j][0], float(flow[i, j]))
        for i in range(len(src))
        for j in range(len(snk))
        if flow[i, j] > _EPS
    ]
    return value, TransportPlan(flows=flows, cost=value, dual_value=float(dual))


def linearize(family, index: int, mu: Molecule) -> Molecule:
    """Push a molecule forward through retraction ``index`` of the family."""
    acc = {}
    for i, w in zip(mu.support, mu.weights):
        if not 0 <= i < len(family.points):
            raise ValueError(f"support index {i} outside the family")
        j = family.image_index(index, i)
        acc[j] = acc.get(j, 0.0) + w
    items = sorted((j, w) for j, w in acc.items() if abs(w) > _EPS)
    return Molecule(tuple(j for j, _ in items), tuple(w for _, w in items))


def family_metric(family, n_points=None):
    """Dense distance matrix over the first n points of a family."""
    n = len(family.points) if n_points is None else n_points
    I, J = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    return family.pair_distance(I.ravel(), J.ravel()).reshape(n, n)


def sample_molecule(rng, n_points, max_support=8, weight_bound=3) -> Molecule:
    """Random molecule: small support, symmetric integer weights, balanced last."""
    for _ in range(64):
        k = int(rng.integers(2, max_support + 1))
        k = min(k, n_points)
        support = np.sort(rng.choice(n_points, size=k, replace=False))
        w = rng.integers(-weight_bound, weight_bound + 1, size=k).astype(float)
        w[-1] = -w[:-1].sum()
        if np.any(w != 0):
            return Molecule(tuple(int(i) for i in support), tuple(w))
    raise RuntimeError("could not sample a nonzero molecule")


def basis_constant_estimate(family, sample_count: int, rng_seed: int,
                            max_support=8, weight_bound=3, indices=None,
                            metric=None):
    """Empirical Schauder-style constant of the linearized retractions.

    Max over seeded molecules and retraction indices of the norm ratio
    free_norm(linearize(n, mu)) / free_norm(mu).  Deterministic under the
    seed; returns (estimate, details) with the worst witness recorded.
    """
    rng = np.random.default_rng(rng_seed)
    P = len(family.points)
    if metric is None:
        metric = family_metric(family)
    if indices is None:
        indices = range(P)
    best = 0.0
    witness = None
    gaps = 0.0
    solves = 0
    for _ in range(sample_count):
        mu = sample_molecule(rng, P, max_support, weight_bound)
        base, plan = free_norm(metric, mu)
        gaps = max(gaps, plan.dual_gap)
        solves += 1
        if base <= _EPS:
            continue
        for g in indices:
            nu = linearize(family, g, mu)
            val, plan2 = free_norm(metric, nu)
            gaps = max(gaps, plan2.dual_gap)
            solves += 1
            ratio = val / base
            if ratio > best:
                best = ratio
                witness = (g, mu.support, mu.weights)
    details = {"max_dual_gap": gaps, "solves": solves, "seed": rng_seed,
               "witness": witness, "samples": sample_count}
    return best, details
