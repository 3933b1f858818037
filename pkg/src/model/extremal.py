"""
Extremal distance of a quad through a discrete Dirichlet problem.

The continuous domain (union of the interior unit faces) is sampled on a
grid of mesh 1/s. The potential equals 0 on arc (ab) and 1 on arc (cd) and
is free elsewhere, so the remaining boundary carries Neumann conditions. A
grid edge's conductance is the share of its two adjacent grid cells lying in
the domain. In two dimensions the Dirichlet energy needs no mesh factor, and
for the conformal rectangle (0,1) x (0,l) the potential y/l has energy 1/l,
hence l = 1 / energy.
"""
from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.sparse.linalg import LinearOperator, cg

from src.errors import InvalidParams, InvalidQuad, NoConvergence
from src.lattice.domain import Quad

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
DEFAULT_MAXITER = 1_000_000


@dataclass
class HarmonicProblem:
    """Refined grid with conductances and Dirichlet values for one quad."""
    quad: Quad
    refinement: int
    nodes: np.ndarray = field(repr=False)          # (n, 2) integer grid coordinates
    edge_i: np.ndarray = field(repr=False)
    edge_j: np.ndarray = field(repr=False)
    conductance: np.ndarray = field(repr=False)
    dirichlet: Dict[int, float] = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return int(self.nodes.shape[0])


@dataclass
class HarmonicSolution:
    potential: np.ndarray = field(repr=False)
    energy: float
    residual: float
    iterations: int

    @property
    def ell(self) -> float:
        return 1.0 / self.energy if self.energy > 0 else math.inf


def _arc_points(quad: Quad, name: str, s: int) -> set:
    pts = quad.arc(name)
    out = set()
    for (x0, y0), (x1, y1) in zip(pts[:-1], pts[1:]):
        for t in range(s + 1):
            out.add((s * x0 + t * (x1 - x0), s * y0 + t * (y1 - y0)))
    return out


def build_problem(quad: Quad, refinement: int) -> HarmonicProblem:
    s = int(refinement)
    if s < 1:
        raise InvalidParams(f"refinement must be >= 1, got {refinement}")
    faces = set(quad.domain.faces)
    face_arr = np.array(sorted(faces), dtype=np.int64)
    offsets = np.array([(i, j) for i in range(s + 1) for j in range(s + 1)], dtype=np.int64)
    nodes = np.unique((face_arr[:, None, :] * s + offsets[None, :, :]).reshape(-1, 2), axis=0)
    index = {(int(x), int(y)): k for k, (x, y) in enumerate(nodes.tolist())}

    def cell_inside(cx: int, cy: int) -> bool:
        return (cx // s, cy // s) in faces

    ei, ej, cond = [], [], []
    for (x, y), k in index.items():
        right = index.get((x + 1, y))
        if right is not None:
            c = 0.5 * cell_inside(x, y) + 0.5 * cell_inside(x, y - 1)
            if c > 0:
                ei.append(k)
                ej.append(right)
                cond.append(c)
        up = index.get((x, y + 1))
        if up is not None:
            c = 0.5 * cell_inside(x, y) + 0.5 * cell_inside(x - 1, y)
            if c > 0:
                ei.append(k)
                ej.append(up)
                cond.append(c)

    low = _arc_points(quad, "ab", s)
    high = _arc_points(quad, "cd", s)
    if not low or not high:
        raise InvalidQuad("Dirichlet arcs must be non-empty")
    if low & high:
        raise InvalidQuad("Dirichlet arcs (ab) and (cd) intersect")
    dirichlet = {index[p]: 0.0 for p in low}
    dirichlet.update({index[p]: 1.0 for p in high})
    return HarmonicProblem(quad=quad, refinement=s, nodes=nodes, edge_i=np.asarray(ei, dtype=np.int64),
                           edge_j=np.asarray(ej, dtype=np.int64), conductance=np.asarray(cond, dtype=float),
                           dirichlet=dirichlet)


def _laplacian(problem: HarmonicProblem) -> sparse.csr_matrix:
    n = problem.n_nodes
    i, j, c = problem.edge_i, problem.edge_j, problem.conductance
    off = sparse.coo_matrix((np.concatenate([-c, -c]), (np.concatenate([i, j]), np.concatenate([j, i]))),
                            shape=(n, n))
    diag = np.bincount(i, weights=c, minlength=n) + np.bincount(j, weights=c, minlength=n)
    return (off + sparse.diags(diag)).tocsr()


def solve(problem: HarmonicProblem, tol: float = DEFAULT_TOL, maxiter: int = DEFAULT_MAXITER) -> HarmonicSolution:
    """Conjugate gradients with a Jacobi preconditioner on the free nodes."""
    if tol <= 0:
        raise InvalidParams(f"tol must be positive, got {tol}")
    n = problem.n_nodes
    lap = _laplacian(problem)

    # free nodes cut off from every Dirichlet node carry no energy
    n_comp, labels = csgraph.connected_components(lap, directed=False)
    fixed = np.fromiter(problem.dirichlet.keys(), dtype=np.int64)
    anchored = np.zeros(n_comp, dtype=bool)
    anchored[labels[fixed]] = True
    is_fixed = np.zeros(n, dtype=bool)
    is_fixed[fixed] = True
    free = np.flatnonzero(~is_fixed & anchored[labels])

    u = np.zeros(n)
    u[fixed] = np.fromiter(problem.dirichlet.values(), dtype=float)
    a = lap[free][:, free].tocsr()
    rhs = -(lap[free][:, fixed] @ u[fixed])
    iterations = 0
    residual = 0.0
    if free.size:
        inv_diag = 1.0 / a.diagonal()
        precond = LinearOperator(a.shape, matvec=lambda x: inv_diag * x)

        def count(_):
            nonlocal iterations
            iterations += 1

        x, info = cg(a, rhs, rtol=tol, maxiter=maxiter, M=precond, callback=count)
        if info > 0:
            raise NoConvergence(f"conjugate gradients stopped after {info} iterations")
        norm = float(np.linalg.norm(rhs))
        residual = float(np.linalg.norm(rhs - a @ x)) / norm if norm > 0 else 0.0
        u[free] = x

    du = u[problem.edge_i] - u[problem.edge_j]
    energy = float(np.dot(problem.conductance, du * du))
    return HarmonicSolution(potential=u, energy=energy, residual=residual, iterations=iterations)


def extremal_distance(quad: Quad, refinement: int = 32, tol: float = DEFAULT_TOL,
                      maxiter: int = DEFAULT_MAXITER) -> float:
    return extremal_solution(quad, refinement, tol, maxiter)[1].ell


def extremal_solution(quad: Quad, refinement: int = 32, tol: float = DEFAULT_TOL,
                      maxiter: int = DEFAULT_MAXITER) -> Tuple[HarmonicProblem, HarmonicSolution]:
    started = time.perf_counter()
    problem = build_problem(quad, refinement)
    solution = solve(problem, tol, maxiter)
    logger.debug(f"[extremal] s={refinement}: {problem.n_nodes} nodes, ell={solution.ell:.6f}, "
                 f"{solution.iterations} iterations in {(time.perf_counter() - started) * 1000:.0f} ms")
    return problem, solution


def duality_check(quad: Quad, refinement: int = 32, tol: float = DEFAULT_TOL) -> float:
    """Product of the extremal distances of (ab)-(cd) and (bc)-(da); 1 in the limit."""
    return extremal_report(quad, refinement, tol)["product"]


def extremal_report(quad: Quad, refinement: int = 32, tol: float = DEFAULT_TOL) -> dict:
    _, primal = extremal_solution(quad, refinement, tol)
    _, dual = extremal_solution(quad.rotated(), refinement, tol)
    report = {
        "ell": primal.ell,
        "dual_ell": dual.ell,
        "product": primal.ell * dual.ell,
        "refinement": int(refinement),
        "residual": max(primal.residual, dual.residual),
    }
    logger.info(f"[extremal] ell={report['ell']:.6f}, dual={report['dual_ell']:.6f}, "
                f"product={report['product']:.6f} (s={refinement})")
    return report


def write_report(path: Path | str, report: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, indent=2), encoding="utf-8")
