"""Sparse weighted least-squares engine.

Minimizes ``sum_i diag_i (x_i - t_i)^2 + sum_(i,j) w_ij (x_i - x_j)^2`` by
solving the normal equations ``(D + L) x = D t`` with preconditioned CG.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components


class SingularSystemError(RuntimeError):
    """A connected component of the edge graph carries no data weight."""


@dataclass(frozen=True)
class SparseSpdSystem:
    dim: int
    diag: np.ndarray
    targets: np.ndarray
    edge_i: np.ndarray
    edge_j: np.ndarray
    edge_w: np.ndarray

    @property
    def rhs(self):
        return self.diag * self.targets

    @property
    def edges(self):
        return list(zip(self.edge_i.tolist(), self.edge_j.tolist(), self.edge_w.tolist()))

    def matrix(self):
        """Assembled ``diag(diag) + Laplacian(edges)`` as CSR."""
        n = self.dim
        i, j, w = self.edge_i, self.edge_j, self.edge_w
        degree = np.bincount(i, w, minlength=n) + np.bincount(j, w, minlength=n)
        rows = np.concatenate([np.arange(n), i, j])
        cols = np.concatenate([np.arange(n), j, i])
        vals = np.concatenate([self.diag + degree, -w, -w])
        return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))

    def objective(self, x):
        x = np.asarray(x, dtype=np.float64)
        data = np.sum(self.diag * (x - self.targets) ** 2)
        smooth = np.sum(self.edge_w * (x[self.edge_i] - x[self.edge_j]) ** 2)
        return float(data + smooth)


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    final_residual: float
    converged: bool


def assemble(data_weights, targets, edge_i, edge_j, edge_w, *, check=True):
    """Build the system; raises SingularSystemError when some component has no
    positive data weight (unless ``check`` is False)."""
    diag = np.asarray(data_weights, dtype=np.float64).ravel()
    targets = np.asarray(targets, dtype=np.float64).ravel()
    edge_i = np.asarray(edge_i, dtype=np.int64).ravel()
    edge_j = np.asarray(edge_j, dtype=np.int64).ravel()
    edge_w = np.asarray(edge_w, dtype=np.float64).ravel()
    n = diag.size
    if targets.size != n:
        raise ValueError("data_weights and targets differ in length")
    if not (edge_i.size == edge_j.size == edge_w.size):
        raise ValueError("edge arrays differ in length")
    if np.any(diag < 0) or np.any(edge_w < 0) or not np.all(np.isfinite(diag)) or not np.all(np.isfinite(edge_w)):
        raise ValueError("weights must be finite and nonnegative")
    if edge_i.size and (edge_i.min() < 0 or max(edge_i.max(), edge_j.max()) >= n or edge_j.min() < 0):
        raise ValueError("edge index out of range")
    if np.any(edge_i == edge_j):
        raise ValueError("self-loops are not allowed")
    # store every edge as i < j
    lo, hi = np.minimum(edge_i, edge_j), np.maximum(edge_i, edge_j)
    system = SparseSpdSystem(n, diag, targets, lo, hi, edge_w)
    if check:
        _check_components(system)
    return system


def _check_components(system):
    n = system.dim
    keep = system.edge_w > 0
    graph = sp.coo_matrix(
        (np.ones(int(keep.sum())), (system.edge_i[keep], system.edge_j[keep])), shape=(n, n)
    )
    n_comp, comp = connected_components(graph, directed=False)
    anchored = np.bincount(comp, system.diag > 0, minlength=n_comp) > 0
    if not anchored.all():
        bad = int(np.flatnonzero(~anchored)[0])
        members = np.flatnonzero(comp == bad)
        raise SingularSystemError(
            f"{(~anchored).sum()} component(s) without data weight, e.g. unknowns {members[:5].tolist()}"
        )


def solve(system: SparseSpdSystem, tol=1e-6, max_iter=None, x0=None):
    """Jacobi-preconditioned conjugate gradient started from the targets.

    Convergence is judged on the true relative residual ``|Ax - b| / |b|``.
    """
    A = system.matrix()
    b = system.rhs
    n = system.dim
    if max_iter is None:
        max_iter = 10 * n
    x = np.array(system.targets if x0 is None else x0, dtype=np.float64)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        # only the zero vector satisfies a relative contract against b = 0
        x = np.zeros(n)
        return x, SolveReport(0, 0.0, True)

    dia = A.diagonal()
    # an isolated unknown without data weight has a zero diagonal (check=False)
    inv_diag = np.divide(1.0, dia, out=np.ones(n), where=dia > 0)
    r = b - A @ x
    res = np.linalg.norm(r) / bnorm
    it = 0
    while res > tol and it < max_iter:
        z = inv_diag * r
        p = z.copy()
        rz = r @ z
        # inner CG loop; leaves to recompute the true residual when the
        # recursive one claims convergence
        while it < max_iter:
            Ap = A @ p
            pAp = p @ Ap
            if pAp <= 0.0:
                break
            alpha = rz / pAp
            x += alpha * p
            r -= alpha * Ap
            it += 1
            if np.linalg.norm(r) / bnorm <= tol:
                break
            z = inv_diag * r
            rz_new = r @ z
            p = z + (rz_new / rz) * p
            rz = rz_new
        r = b - A @ x
        new_res = np.linalg.norm(r) / bnorm
        if new_res >= res and pAp <= 0.0:
            res = new_res
            break
        res = new_res
    return x, SolveReport(it, float(res), bool(res <= tol))
