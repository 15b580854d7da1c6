"""Shared deterministic numerics: polytope geometry, projections, spectral
projected gradient, golden-section search, and minimization over measure
hulls.

Solver modules compose these routines. The brute-force reference module
deliberately does not import this file.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import AmbigoptError

INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


# --- projections ---------------------------------------------------------


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the unit simplex (sorted-cumsum algorithm)."""
    v = np.asarray(v, dtype=float)
    n = v.size
    a = -np.sort(-v)
    cums = (np.cumsum(a) - 1.0) / np.arange(1, n + 1)
    k = np.nonzero(a > cums)[0][-1]
    return np.maximum(v - cums[k], 0.0)


def project_to_polytope(A: np.ndarray, b: np.ndarray, z: np.ndarray,
                        *, tol: float = 1e-10) -> np.ndarray:
    """Euclidean projection onto {x : A x >= b}.

    Exact active-set enumeration; intended for desk-scale systems (few
    constraints, dimension <= 12). The valid KKT system is unique, so the
    first active set passing both primal feasibility and dual sign checks
    is the projection.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    z = np.asarray(z, dtype=float)
    if z.size == 0 or A.size == 0:
        return z.copy()
    slack = A @ z - b
    if (slack >= -tol).all():
        return z.copy()
    n, k = A.shape
    for size in range(1, k + 1):
        for S in combinations(range(n), size):
            As = A[list(S)]
            M = As @ As.T
            rhs = b[list(S)] - As @ z
            try:
                lam = np.linalg.solve(M, rhs)
            except np.linalg.LinAlgError:
                continue
            if not np.all(np.isfinite(lam)) or (lam < -1e-9).any():
                continue
            x = z + As.T @ lam
            if (A @ x - b >= -1e-8 * (1.0 + np.abs(b))).all():
                return x
    raise AmbigoptError("polytope projection failed (degenerate system)")


def polytope_vertices(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Vertices of the bounded polytope {x : A x >= b}, deduplicated and
    deterministically ordered. Dimension zero yields the single empty point."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    n, k = A.shape
    if k == 0:
        return np.zeros((1, 0))
    found = {}
    for S in combinations(range(n), k):
        As = A[list(S)]
        if abs(np.linalg.det(As)) < 1e-12 * max(1.0, float(np.abs(As).max()) ** k):
            continue
        x = np.linalg.solve(As, b[list(S)])
        if (A @ x - b >= -1e-9 * (1.0 + np.abs(b))).all():
            found[tuple(np.round(x, 9))] = x
    if not found:
        raise AmbigoptError("polytope has no vertices (empty or unbounded)")
    keys = sorted(found.keys())
    return np.array([found[key] for key in keys])


# --- line search ----------------------------------------------------------


def golden_max(f, lo: float, hi: float, *, rel_tol: float = 1e-10,
               max_iter: int = 400):
    """Golden-section maximization of a unimodal function on [lo, hi].

    Returns (argmax, value, evals). Endpoints are included as candidates, so
    boundary maxima survive. Tolerance is relative to the bracket midpoint.
    """
    evals = 2
    x1 = hi - INVPHI * (hi - lo)
    x2 = lo + INVPHI * (hi - lo)
    f1, f2 = f(x1), f(x2)
    flo, fhi = f(lo), f(hi)
    evals += 2
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if (hi - lo) <= rel_tol * max(abs(mid), 1e-300):
            break
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - INVPHI * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + INVPHI * (hi - lo)
            f2 = f(x2)
        evals += 1
    cands = [(flo, lo), (fhi, hi), (f1, x1), (f2, x2)]
    fbest, xbest = max(cands, key=lambda t: (t[0], -abs(t[1])))
    return xbest, fbest, evals


def golden_min(f, lo: float, hi: float, *, rel_tol: float = 1e-10,
               max_iter: int = 400):
    x, fx, evals = golden_max(lambda t: -f(t), lo, hi,
                              rel_tol=rel_tol, max_iter=max_iter)
    return x, -fx, evals


# --- spectral projected gradient -------------------------------------------


@dataclass
class SpgResult:
    z: np.ndarray
    value: float
    iterations: int
    residual: float


def spg_max(fun, grad, project, z0: np.ndarray, *, tol: float = 1e-10,
            max_iter: int = 100_000) -> SpgResult:
    """Maximize a concave function over a convex set with spectral projected
    gradient (Barzilai-Borwein steps, non-monotone backtracking).

    ``fun`` may return -inf off the effective domain; the starting point must
    be finite-valued. The residual is the sup-norm of the unit-step gradient
    mapping z - P(z + grad).
    """
    z = project(np.asarray(z0, dtype=float))
    fz = fun(z)
    if not np.isfinite(fz):
        raise ValueError("spg_max requires a finite starting value")
    g = grad(z)
    alpha = 1.0 / max(1.0, float(np.linalg.norm(g)))
    hist = deque([fz], maxlen=10)
    residual = math.inf
    it = 0
    stall = 0
    for it in range(1, max_iter + 1):
        # Cap trial-point displacement so the exact projector is never fed
        # points far outside the iterate scale (precision would collapse
        # there); BB steps themselves stay uncapped below this length.
        cap = 10.0 * (1.0 + float(np.max(np.abs(z)))) if z.size else 1.0
        gnorm = float(np.max(np.abs(g))) if g.size else 0.0
        tau = 1.0 if gnorm <= cap else cap / gnorm
        zp = project(z + tau * g)
        residual = float(np.max(np.abs(z - zp))) / tau if z.size else 0.0
        if residual <= tol:
            break
        step = alpha if alpha * gnorm <= cap else cap / gnorm
        d = project(z + step * g) - z
        gtd = float(g @ d)
        if gtd <= 0.0:
            d = zp - z
            gtd = float(g @ d)
            if gtd <= 0.0:
                break
        lam = 1.0
        f_ref = min(hist)
        accepted = False
        for _ in range(60):
            z_new = z + lam * d
            f_new = fun(z_new)
            if np.isfinite(f_new) and f_new >= f_ref + 1e-4 * lam * gtd:
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            break
        g_new = grad(z_new)
        s = z_new - z
        yv = g_new - g
        sy = float(s @ yv)
        ss = float(s @ s)
        alpha = ss / (-sy) if sy < -1e-18 else min(alpha * 10.0, 1e12)
        alpha = min(max(alpha, 1e-12), 1e12)
        if f_new - fz <= 1e-15 * (1.0 + abs(fz)):
            stall += 1
            if stall >= 20:
                z, fz, g = z_new, f_new, g_new
                break
        else:
            stall = 0
        z, fz, g = z_new, f_new, g_new
        hist.append(fz)
    return SpgResult(z=z, value=fz, iterations=it, residual=residual)


# --- minimization over a measure hull --------------------------------------


@dataclass
class HullMinResult:
    weights: np.ndarray
    point: np.ndarray
    value: float
    candidates: list
    iterations: int


def _fd_grad(fw, w: np.ndarray, fw0: float, h: float = 1e-7) -> np.ndarray:
    """Forward-difference gradient in the raw weight coordinates."""
    g = np.zeros_like(w)
    for i in range(w.size):
        wp = w.copy()
        wp[i] += h
        vv, _ = fw(wp / wp.sum())
        g[i] = (vv - fw0) / h
    return g


def minimize_over_hull(fq, P: np.ndarray, *, starts: int = 4, seed: int = 0,
                       warm: np.ndarray | None = None, extra=(),
                       tol: float = 1e-10, max_iter: int = 2000,
                       tie_tol: float = 1e-8,
                       vertex_scan: bool = True) -> HullMinResult:
    """Minimize q -> fq(q) over the convex hull of the rows of P.

    ``fq`` returns (value, grad or None); a missing gradient falls back to
    forward differences in the weight coordinates. Vertices are always
    evaluated exhaustively; ``starts`` controls additional projected-gradient
    descents seeded at the barycenter, the warm start and Dirichlet draws.

    Among candidates tied with the minimum within ``tie_tol``, the returned
    point maximizes support size, then Shannon entropy (with the barycenter
    of the tied set added as a candidate). This realizes the maximal-solution
    tie-break at finite scale.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    K = P.shape[0]
    rng = np.random.default_rng(seed)
    evals = 0

    def fw(w):
        nonlocal evals
        evals += 1
        q = w @ P
        v, gq = fq(q)
        gw = None if gq is None else P @ gq
        return v, gw

    if K == 1:
        w = np.ones(1)
        v, _ = fw(w)
        return HullMinResult(weights=w, point=P[0].copy(), value=float(v),
                             candidates=[(w, float(v))], iterations=0)

    cands: list[tuple[np.ndarray, float]] = []
    if vertex_scan or warm is None:
        for k in range(K):
            w = np.zeros(K)
            w[k] = 1.0
            v, _ = fw(w)
            cands.append((w, v))
    start_pts = []
    if warm is not None:
        w = project_to_simplex(np.asarray(warm, dtype=float))
        v, _ = fw(w)
        cands.append((w, v))
        start_pts.append(w)
    bary = np.full(K, 1.0 / K)
    v_bary, _ = fw(bary)
    cands.append((bary, v_bary))
    start_pts.append(bary)
    for w in extra:
        w = project_to_simplex(np.asarray(w, dtype=float))
        v, _ = fw(w)
        cands.append((w, v))
        start_pts.append(w)
    while len(start_pts) < starts:
        start_pts.append(rng.dirichlet(np.ones(K)))

    total_iters = 0
    if K > 1:
        grad_cache: dict[bytes, tuple[float, np.ndarray | None]] = {}

        def cached(w):
            key = w.tobytes()
            if key not in grad_cache:
                grad_cache[key] = fw(w)
            return grad_cache[key]

        def neg_val(w):
            return -cached(w)[0]

        def neg_grad(w):
            v, g = cached(w)
            if g is None:
                g = _fd_grad(fw, w, v)
            g = np.clip(g, -1e12, 1e12)
            return -g

        for w0 in start_pts[:starts]:
            v0, _ = fw(w0)
            if not np.isfinite(v0):
                continue
            try:
                res = spg_max(neg_val, neg_grad, project_to_simplex, w0,
                              tol=tol, max_iter=max_iter)
            except ValueError:
                continue
            total_iters += res.iterations
            cands.append((res.z, -res.value))

    # normalize candidate records to (w, value)
    fixed = []
    for w, v in cands:
        fixed.append((np.asarray(w, dtype=float), float(v)))
    best_val = min(v for _, v in fixed)
    if not np.isfinite(best_val) and best_val > 0:
        # everything +inf
        w = fixed[0][0]
        return HullMinResult(weights=w, point=w @ P, value=math.inf,
                             candidates=fixed, iterations=total_iters)

    tied = [(w, v) for w, v in fixed if v <= best_val + tie_tol]
    if len(tied) > 1:
        wbar = np.mean([w for w, _ in tied], axis=0)
        vbar, _ = fw(wbar)
        if vbar <= best_val + tie_tol:
            tied.append((wbar, vbar))

    def tie_key(item):
        w, _ = item
        q = w @ P
        support = int(np.sum(q > 1e-12))
        qpos = q[q > 1e-12]
        entropy = float(-np.sum(qpos * np.log(qpos)))
        return (support, entropy, tuple(-q))

    w_sel, _ = max(tied, key=tie_key)
    return HullMinResult(weights=w_sel, point=w_sel @ P, value=best_val,
                         candidates=fixed, iterations=total_iters)
