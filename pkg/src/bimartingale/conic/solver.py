"""Operator-splitting (ADMM) solver for :class:`ConicProgram`.

The program ``min c@x, A@x = b, x_K in K`` is split as

    min  c@xt + I{A xt = b}(xt) + I_K(s)    s.t.  xt_K = s

and solved by over-relaxed ADMM with an adaptive penalty. Each iteration
solves one quasi-definite linear system (reduced to the Schur complement on
the equality rows, which is factored once per penalty value) and projects
onto the product cone. Infeasibility and unboundedness are detected from the
successive differences of the iterates.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .cones import project_batch
from .program import (INFEASIBLE, MAX_ITERATIONS, OPTIMAL, UNBOUNDED,
                      ConicProgram, SolveReport)

log = logging.getLogger(__name__)

_DENSE_LIMIT = 200
_DENSE_FILL = 0.3


@dataclass
class Settings:
    tol_feas: float = 1e-8
    tol_gap: float = 1e-8
    max_iter: int = 200_000
    scaling: bool = True
    rho: float = 0.1
    sigma: float = 1e-6
    relax: float = 1.6
    adaptive_rho: bool = True
    eq_rho_scale: float = 1e3
    reg: float = 1e-8
    check_every: int = 10
    adapt_every: int = 50
    ruiz_iters: int = 15
    anderson_mem: int = 10
    anderson_safeguard: float = 2.0
    anderson_reg: float = 1e-12

    def __post_init__(self):
        if self.tol_feas <= 0 or self.tol_gap <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


class _ConeGroups:
    """Coned variables gathered into equal-cone groups for batched projection."""

    def __init__(self, program: ConicProgram):
        groups: dict = {}
        for block, start in program.cones:
            groups.setdefault(block.key, (block, []))[1].append(start)
        self.groups = []
        for block, starts in groups.values():
            idx = np.asarray(starts)[:, None] + np.arange(block.size)[None, :]
            self.groups.append((block, idx))
        if self.groups:
            self.index = np.concatenate([idx.ravel() for _, idx in self.groups])
        else:
            self.index = np.zeros(0, dtype=int)
        self.hints = [np.full(idx.shape[0], 0.5) for _, idx in self.groups]
        # offsets of each group inside the packed vector x[self.index]
        self.slices = []
        pos = 0
        for block, idx in self.groups:
            self.slices.append(slice(pos, pos + idx.size))
            pos += idx.size

    def project(self, v: np.ndarray, warm: bool = False) -> np.ndarray:
        """Project a packed vector (ordered like ``self.index``).

        With ``warm`` the power-cone root finders start from, and then
        update, the shrink factors of the previous warm call.
        """
        out = np.empty_like(v)
        for k, ((block, idx), sl) in enumerate(zip(self.groups, self.slices)):
            hint = self.hints[k] if warm and block.kind == "power" else None
            out[sl] = project_batch(v[sl].reshape(idx.shape), block, hint).ravel()
        return out

    def project_dual(self, v: np.ndarray) -> np.ndarray:
        # Moreau: P_{K*}(v) = v + P_K(-v)
        return v + self.project(-v)

    def block_average(self, w: np.ndarray) -> np.ndarray:
        """Replace per-variable weights by their mean over each cone block."""
        out = w.copy()
        for (block, idx), sl in zip(self.groups, self.slices):
            out[idx] = w[idx].mean(axis=1, keepdims=True)
        return out


def _ruiz(A, c, b, groups, iters):
    m, n = A.shape
    D = np.ones(n)
    E = np.ones(m)
    As = A.copy()
    for _ in range(iters):
        col = sp.linalg.norm(As, np.inf, axis=0) if As.nnz else np.zeros(n)
        col = np.where(col > 0, col, 1.0)
        dcol = 1.0 / np.sqrt(col)
        dcol = groups.block_average(dcol)
        row = sp.linalg.norm(As, np.inf, axis=1) if As.nnz else np.zeros(m)
        row = np.where(row > 0, row, 1.0)
        drow = 1.0 / np.sqrt(row)
        D *= dcol
        E *= drow
        As = sp.diags(drow) @ As @ sp.diags(dcol)
    D = np.clip(D, 1e-4, 1e4)
    E = np.clip(E, 1e-4, 1e4)
    As = (sp.diags(E) @ A @ sp.diags(D)).tocsr()
    cs = D * c
    cscale = 1.0 / max(1.0, np.max(np.abs(cs)) if cs.size else 1.0)
    return As, D, E, cscale


class _Factor:
    """Schur complement ``A diag(1/d) A^T + delta I`` factorization."""

    def __init__(self, A, d, delta):
        self.A = A
        self.AT = A.T.tocsr()
        self.dinv = 1.0 / d
        m = A.shape[0]
        if m == 0:
            self.solve = lambda r: r
            return
        S = (A @ sp.diags(self.dinv) @ self.AT).tocsc() + delta * sp.identity(m, format="csc")
        if m <= _DENSE_LIMIT or S.nnz > _DENSE_FILL * m * m:
            cho = sla.cho_factor(S.toarray(), lower=True, check_finite=False)
            self.solve = lambda r: sla.cho_solve(cho, r, check_finite=False)
        else:
            lu = spla.splu(S, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                           options={"SymmetricMode": True})
            self.solve = lu.solve

    def kkt(self, r1, r2):
        """Solve ``[diag(d) A^T; A -delta I] [x; nu] = [r1; r2]``."""
        t = self.dinv * r1
        nu = self.solve(self.A @ t - r2)
        x = t - self.dinv * (self.AT @ nu)
        return x, nu


def solve(program: ConicProgram, settings: Settings | None = None,
          warm_start=None) -> SolveReport:
    """Solve ``program`` and return a :class:`SolveReport`.

    Parameters
    ----------
    program : ConicProgram
    settings : Settings, optional
    warm_start : tuple (x, y), optional
        Primal and equality-dual guess in the original (unscaled) space.
    """
    st = settings or Settings()
    groups = _ConeGroups(program)
    A0, b0, c0 = program.A, program.b, program.c
    m, n = A0.shape
    K = groups.index
    nK = K.size

    if st.scaling:
        A, D, E, cscale = _ruiz(A0, c0, b0, groups, st.ruiz_iters)
    else:
        A, D, E, cscale = A0.tocsr(), np.ones(n), np.ones(m), 1.0
    AT = A.T.tocsr()
    c = cscale * D * c0
    b = E * b0

    # state in the scaled space
    x = np.zeros(n)
    sK = np.zeros(nK)
    yK = np.zeros(nK)
    ye = np.zeros(m)
    rho = st.rho
    if warm_start is not None:
        x0, y0 = warm_start
        if x0 is not None:
            x = np.asarray(x0, dtype=float) / D
            sK = groups.project(x[K])
        if y0 is not None:
            ye = cscale * np.asarray(y0, dtype=float) / E
            zK = (c - AT @ ye)[K]
            yK = -groups.project_dual(zK)

    def eq_penalty(rho):
        # the equality penalty doubles as the static KKT regularization, so it
        # is capped at 1/reg; using the same value in the dual update keeps
        # the fixed point exact
        return min(st.eq_rho_scale * rho, 1.0 / st.reg)

    def factor(rho):
        d = np.full(n, st.sigma)
        d[K] += rho
        return _Factor(A, d, 1.0 / eq_penalty(rho))

    fac = factor(rho)
    alpha = st.relax
    status = MAX_ITERATIONS
    it = 0

    def unscaled(x, sK, ye, yK):
        xo = x.copy()
        xo[K] = sK
        xo = D * xo
        yo = E * ye / cscale
        zK = -yK * (1.0 / cscale) / D[K]
        return xo, yo, zK

    def residuals(xo, yo, zK):
        # relative residuals: each is normalized by the size of the terms
        # it balances, so the thresholds are scale-free
        Ax = A0 @ xo
        ATy = A0.T @ yo
        rp = _amax(Ax - b0) / (1.0 + max(_amax(Ax), _amax(b0)))
        rd_vec = c0 - ATy
        rd_vec[K] -= zK
        rd = _amax(rd_vec) / (1.0 + max(_amax(c0), _amax(ATy), _amax(zK)))
        pobj = float(c0 @ xo)
        dobj = float(b0 @ yo)
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        return rp, rd, pobj, dobj, gap

    def step(x, sK, yK, ye, rho, fac):
        r1 = st.sigma * x - c
        r1[K] += rho * sK - yK
        rho_eq = eq_penalty(rho)
        xt, nu = fac.kkt(r1, b + ye / rho_eq)
        x_new = alpha * xt + (1.0 - alpha) * x
        vK = alpha * xt[K] + (1.0 - alpha) * sK + yK / rho
        sK_new = groups.project(vK, warm=True)
        yK_new = rho * (vK - sK_new)
        ye_new = ye - alpha * (ye + nu)
        return x_new, sK_new, yK_new, ye_new

    # The iteration state holds only the free part of x: on the coned part
    # the proximal term is centred at s, which leaves the fixed points
    # unchanged and keeps the state (and the acceleration cost) small.
    free = np.ones(n, dtype=bool)
    free[K] = False
    split = np.cumsum([int(free.sum()), nK, nK])

    def pack(x, sK, yK, ye, rho):
        # duals are divided by their penalties so all blocks share a scale
        return np.concatenate([x[free], sK, yK / rho, ye / eq_penalty(rho)])

    def unpack(w, rho):
        xf, sK, yK, ye = np.split(w, split)
        x = np.empty(n)
        x[free] = xf
        x[K] = sK
        return x, sK, yK * rho, ye * eq_penalty(rho)

    accel = _Anderson(st.anderson_mem, st.anderson_reg) if st.anderson_mem > 0 else None
    w = pack(x, sK, yK, ye, rho)
    fallback = None     # plain iterate to return to if an extrapolation fails
    n_reject = 0

    for it in range(1, st.max_iter + 1):
        x, sK, yK, ye = unpack(w, rho)
        x, sK, yK, ye = step(x, sK, yK, ye, rho, fac)
        g = pack(x, sK, yK, ye, rho)
        f = g - w
        fnorm = np.linalg.norm(f)

        if fallback is not None:
            g_base, f_ref = fallback
            fallback = None
            if not fnorm <= st.anderson_safeguard * f_ref:
                n_reject += 1
                accel.reset()
                w = g_base
                continue

        check = it % st.check_every == 0 or it == st.max_iter
        if check:
            xo, yo, zK = unscaled(x, sK, ye, yK)
            rp, rd, pobj, dobj, gap = residuals(xo, yo, zK)
            if it % (50 * st.check_every) == 0:
                log.debug("iter %d rho %.2e rp %.2e rd %.2e gap %.2e rej %d", it, rho, rp, rd, gap, n_reject)
            if rp <= st.tol_feas and rd <= st.tol_feas and gap <= st.tol_gap:
                status = OPTIMAL
                break
            x0, _, yK0, ye0 = unpack(w, rho)
            cert = _certificate((x0, ye0, yK0), x, ye, yK, A, AT, b, c, K, groups,
                                st.tol_feas)
            if cert is not None:
                status = cert
                break

            if st.adaptive_rho and it % st.adapt_every == 0:
                # balance the relative residuals reported to the caller
                new_rho = float(np.clip(rho * np.sqrt(max(rp, 1e-30) / max(rd, 1e-30)),
                                        1e-6, 1e6))
                if new_rho > 5.0 * rho or new_rho < 0.2 * rho:
                    log.debug("iter %d: rho %.3e -> %.3e", it, rho, new_rho)
                    rho = new_rho
                    fac = factor(rho)
                    w = pack(x, sK, yK, ye, rho)
                    if accel is not None:
                        accel.reset()
                    continue

        if accel is None:
            w = g
            continue
        w_acc = accel.extrapolate(w, g, f)
        if w_acc is None:
            w = g
        else:
            fallback = (g, fnorm)
            w = w_acc

    xo, yo, zK = unscaled(x, sK, ye, yK)
    rp, rd, pobj, dobj, gap = residuals(xo, yo, zK)
    if status in (INFEASIBLE, UNBOUNDED):
        pobj = np.inf if status == INFEASIBLE else -np.inf
        gap = np.inf
    return SolveReport(status=status, x=xo, y=yo, objective_value=pobj,
                       primal_residual=rp, dual_residual=rd, gap=gap,
                       iterations=it, z=zK)


def _amax(v) -> float:
    return float(np.max(np.abs(v))) if v.size else 0.0


class _Anderson:
    """Type-II Anderson acceleration of a fixed-point iteration ``w -> g(w)``.

    Differences are kept in ring buffers together with their Gram matrix,
    which is updated one column at a time.
    """

    def __init__(self, mem: int, reg: float = 1e-12):
        self.mem = mem
        self.reg = reg
        self.S = None
        self.reset()

    def reset(self):
        self.g_prev = None
        self.f_prev = None
        self.count = 0
        self.head = 0

    def extrapolate(self, w, g, f):
        if self.S is None:
            # histories are stored row-wise so each difference is contiguous
            self.S = np.zeros((self.mem, w.size))     # differences of g
            self.F = np.zeros((self.mem, w.size))     # differences of f
            self.G = np.zeros((self.mem, self.mem))   # Gram matrix of F
            self.s2 = np.zeros(self.mem)              # squared norms of S rows
        if self.g_prev is not None:
            k = self.head
            np.subtract(g, self.g_prev, out=self.S[k])
            np.subtract(f, self.f_prev, out=self.F[k])
            self.s2[k] = self.S[k] @ self.S[k]
            self.head = (k + 1) % self.mem
            self.count = min(self.count + 1, self.mem)
        m = self.count
        self.g_prev, self.f_prev = g, f
        if m == 0:
            return None
        F = self.F[:m]
        k = (self.head - 1) % self.mem
        prod = F @ np.column_stack([f, self.F[k]])
        self.G[k, :m] = prod[:, 1]
        self.G[:m, k] = prod[:, 1]
        M = self.G[:m, :m].copy()
        # Tikhonov term scaled by both histories: directions along which g
        # moves but f hardly changes (e.g. the null space of A^T for a
        # redundant row) must not receive large coefficients
        M.flat[::m + 1] += self.reg * max(np.trace(M) + self.s2[:m].sum(), 1e-300)
        try:
            coef = np.linalg.solve(M, prod[:, 0])
        except np.linalg.LinAlgError:
            self.reset()
            return None
        if not np.all(np.isfinite(coef)):
            self.reset()
            return None
        return g - coef @ self.S[:m]


def _certificate(prev, x, ye, yK, A, AT, b, c, K, groups, eps):
    """Infeasibility / unboundedness tests on the last iterate difference."""
    x_prev, ye_prev, yK_prev = prev
    # primal infeasibility: lam = -(dy) with A^T lam_e - E^T lam_K = 0, lam in C*, b@lam_e < 0
    dye = ye - ye_prev
    dyK = yK - yK_prev
    scale = max(np.max(np.abs(dye)) if dye.size else 0.0,
                np.max(np.abs(dyK)) if dyK.size else 0.0)
    if scale > 1e-12:
        g = AT @ dye
        g[K] -= dyK
        lamK = -dyK
        dual_viol = np.max(np.abs(lamK - groups.project_dual(lamK))) if K.size else 0.0
        if (np.max(np.abs(g)) <= eps * scale and dual_viol <= eps * scale
                and float(b @ dye) > eps * scale):
            return INFEASIBLE
    dx = x - x_prev
    scale = np.max(np.abs(dx)) if dx.size else 0.0
    if scale > 1e-12:
        Adx = A @ dx
        cone_viol = np.max(np.abs(dx[K] - groups.project(dx[K]))) if K.size else 0.0
        if (np.max(np.abs(Adx)) <= eps * scale and cone_viol <= eps * scale
                and float(c @ dx) < -eps * scale):
            return UNBOUNDED
    return None
