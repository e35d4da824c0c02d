"""SPEB-minimizing fully digital precoders.

The covariance C_n = W_n W_n^H is restricted to C_n = L_n Z_n L_n^H with a
small Hermitian Z_n (side 3K).  L_n stacks the conjugated responses and
their angle derivatives: the FIM only sees W_n through W_n^T b for those
vectors b, i.e. through projections onto their conjugates.

Each MM iteration linearizes the position-domain FIM around Z_t, subtracts a
curvature term s I with s >= (L/2) sum_n ||Z_n - Z_n,t||^2 so the surrogate
stays below the true FIM, and solves the resulting SDP.  The curvature L is
adapted by backtracking.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .channel import StatCsi
from .errors import NonConvergenceWarning, RankDeficientWarning, SolverFailure
from .fim import (pilot_gram, position_crb, real_quadratic,
                  transform_and_speb, transformation)
from .sdp import SdpProblem, SdpStatus, hmat, hvec, solve

# column of L_n (per UT block) backing each of the six FIM parameters
_PARAM_BLOCK = np.array([1, 2, 0, 0, 0, 0])


@dataclass(frozen=True)
class SubspaceBasis:
    L: np.ndarray      # (N, N_t, 3K) = conj([V, V_x, V_y])
    gram: np.ndarray   # (N, 3K, 3K) = L^H L
    num_uts: int

    @property
    def side(self) -> int:
        return self.L.shape[-1]

    def columns(self, k: int) -> np.ndarray:
        """Columns of L backing the six parameter derivatives of UT k."""
        return _PARAM_BLOCK * self.num_uts + k

    def orthonormal(self) -> "SubspaceBasis":
        """Same column space with an orthonormal basis Q (L = Q R); Z maps to R Z R^H."""
        Q, R = np.linalg.qr(self.L)
        # q-vectors need the original derivative directions: keep R to rebuild them
        return OrthoBasis(Q, np.eye(Q.shape[-1])[None].repeat(Q.shape[0], 0) + 0j,
                          self.num_uts, R, self)

    def q_vectors(self) -> np.ndarray:
        """q[n, k, :, i] = L_n^H conj(b_i); shaped (N, K, 3K, 6)."""
        K = self.num_uts
        cols = np.stack([self.columns(k) for k in range(K)])  # (K, 6)
        return np.moveaxis(self.gram[:, :, cols], 1, 2)


@dataclass(frozen=True)
class OrthoBasis(SubspaceBasis):
    R: np.ndarray = None
    parent: SubspaceBasis = None

    def q_vectors(self) -> np.ndarray:
        # Q^H conj(b) = Q^H L e_col = R e_col
        K = self.num_uts
        cols = np.stack([self.parent.columns(k) for k in range(K)])
        return np.moveaxis(self.R[:, :, cols], 1, 2)

    def to_parent(self, Y) -> np.ndarray:
        """Z with L Z L^H = Q Y Q^H."""
        Rinv = np.linalg.inv(self.R)
        return Rinv @ Y @ np.conj(np.swapaxes(Rinv, -1, -2))

    def from_parent(self, Z) -> np.ndarray:
        return self.R @ Z @ np.conj(np.swapaxes(self.R, -1, -2))


def build_subspace(stat: StatCsi, rank_tol: float = 1e-10) -> SubspaceBasis:
    L = np.conj(np.concatenate([stat.V, stat.dVx, stat.dVy], axis=1)).transpose(0, 2, 1)
    sv = np.linalg.svd(L, compute_uv=False)
    if np.any(sv[:, -1] <= rank_tol * sv[:, 0]):
        warnings.warn("subspace basis is numerically rank deficient", RankDeficientWarning,
                      stacklevel=2)
    gram = np.conj(np.swapaxes(L, -1, -2)) @ L
    return SubspaceBasis(L, gram, stat.num_uts)


def z_from_precoder(W, basis: SubspaceBasis) -> np.ndarray:
    """Z_n with L Z L^H equal to the projection of W W^H onto span(L_n)."""
    X = np.linalg.solve(basis.gram, np.conj(np.swapaxes(basis.L, -1, -2)) @ np.asarray(W))
    return X @ np.conj(np.swapaxes(X, -1, -2))


def covariance(Z, basis: SubspaceBasis) -> np.ndarray:
    L = basis.L
    return L @ Z @ np.conj(np.swapaxes(L, -1, -2))


def transmit_power(Z, basis: SubspaceBasis) -> float:
    return float(np.real(np.einsum("nab,nba->", basis.gram, Z)))


# -- FIM as a function of Z --------------------------------------------------------

def _fim_terms(Z, basis: SubspaceBasis, stat: StatCsi, S):
    """Numerators a[n,k,i,j] (2 Re{S_ij q_j^H Z q_i}) and denominators b[n,k]."""
    q = basis.q_vectors()
    Zq = np.einsum("nab,nkbi->nkai", Z, q)
    quad = np.einsum("nkaj,nkai->nkij", q.conj(), Zq)           # q_j^H Z q_i
    a = 2.0 * np.real(S * quad)
    qv = q[..., 2]
    ref = (np.abs(qv) ** 2).sum(axis=-1) * np.linalg.norm(Z, axis=(1, 2))[:, None]
    qzq = real_quadratic(np.einsum("nka,nab,nkb->nk", qv.conj(), Z, qv), scale=ref)
    b = stat.nlos_power[None, :] * qzq + stat.noise
    return a, b


def fim_from_Z(Z, basis: SubspaceBasis, stat: StatCsi, pilots=None, S=None) -> np.ndarray:
    """Channel-domain FIM per UT for covariances L Z L^H, shaped (K, 6, 6)."""
    S = pilot_gram(stat, pilots) if S is None else S
    a, b = _fim_terms(np.asarray(Z), basis, stat, S)
    J = stat.band_scale * (a / b[:, :, None, None]).sum(axis=0)
    return 0.5 * (J + np.swapaxes(J, -1, -2))


def speb_from_Z(Z, basis: SubspaceBasis, stat: StatCsi, S=None) -> np.ndarray:
    _, speb = transform_and_speb(fim_from_Z(Z, basis, stat, S=S), stat.xi)
    return speb


def mm_gradient(Z, A, D, noise) -> np.ndarray:
    """Gradient of Re Tr(A Z) / (Re Tr(D Z) + N0) w.r.t. Z.

    Uses the convention f(Z + dZ) ~ f(Z) + Re Tr(G dZ) for Hermitian dZ, with
    the Hermitian parts of A and D.  Leading dimensions broadcast.
    """
    Z = np.asarray(Z)
    A = np.asarray(A)
    D = np.asarray(D)
    Ah = 0.5 * (A + np.conj(np.swapaxes(A, -1, -2)))
    Dh = 0.5 * (D + np.conj(np.swapaxes(D, -1, -2)))
    num = np.real(np.einsum("...ab,...ba->...", Ah, Z))
    den = np.real(np.einsum("...ab,...ba->...", Dh, Z)) + noise
    num, den = num[..., None, None], den[..., None, None]
    return (den * Ah - num * Dh) / den ** 2


def _linearization(Z, basis: SubspaceBasis, stat: StatCsi, S):
    """J_t (K,6,6) and hvec gradients g[n,k,i,j,:] of each J entry w.r.t. Z_n."""
    q = basis.q_vectors()
    A = 2.0 * S[..., None, None] * np.einsum("nkai,nkbj->nkijab", q, q.conj())
    qv = q[..., 2]
    D = stat.nlos_power[None, :, None, None] * np.einsum("nka,nkb->nkab", qv, qv.conj())
    G = mm_gradient(Z[:, None, None, None], A, D[:, :, None, None], stat.noise)
    g = stat.band_scale * hvec(G)
    g = 0.5 * (g + np.swapaxes(g, 2, 3))
    J = fim_from_Z(Z, basis, stat, S=S)
    return J, g


# -- MM iteration ------------------------------------------------------------------

@dataclass
class MmState:
    t: int
    Z: np.ndarray            # (N, 3K, 3K)
    M: np.ndarray            # (K, 3, 3)
    L_curv: float
    objective: float         # sum_k Tr M_k
    speb: np.ndarray         # true SPEB per UT at Z
    power: float
    sdp_iterations: int = 0
    residuals: tuple = (0.0, 0.0)

    def record(self) -> dict:
        return {"iteration": self.t, "objective": self.objective,
                "speb_sum": float(self.speb.sum()), "power": self.power,
                "curvature": self.L_curv, "sdp_iterations": self.sdp_iterations,
                "res_primal": self.residuals[0], "res_dual": self.residuals[1]}


@dataclass
class MmContext:
    stat: StatCsi
    basis: SubspaceBasis
    budget: float            # design power over the retained subcarriers
    S: np.ndarray
    tol: float = 1e-7
    max_iter: int = 20_000
    max_backtrack: int = 4
    warm: object = None
    history: list = field(default_factory=list)


def initial_state(ctx: MmContext) -> MmState:
    """Scaled identity Z_n with equal per-subcarrier trace power."""
    basis = ctx.basis
    N, side = basis.gram.shape[0], basis.side
    per_sc = ctx.budget / N
    tr = np.real(np.trace(basis.gram, axis1=1, axis2=2))
    Z = (per_sc / tr)[:, None, None] * np.eye(side)[None]
    speb = speb_from_Z(Z, basis, ctx.stat, S=ctx.S)
    return MmState(0, Z.astype(complex), _position_blocks(Z, ctx), 0.0,
                   float(speb.sum()), speb, transmit_power(Z, basis))


def _position_blocks(Z, ctx: MmContext) -> np.ndarray:
    J = fim_from_Z(Z, ctx.basis, ctx.stat, S=ctx.S)
    Jbar, _ = transform_and_speb(J, ctx.stat.xi)
    out = np.full((Jbar.shape[0], 3, 3), np.inf)
    for k, Jk in enumerate(Jbar):
        try:
            out[k] = np.linalg.inv(Jk)[:3, :3]
        except np.linalg.LinAlgError:
            pass
    return out


def _whitener(J) -> np.ndarray:
    """Symmetric inverse square root of a PD matrix, computed after diagonal scaling."""
    d = 1.0 / np.sqrt(np.diag(J))
    w, U = np.linalg.eigh(d[:, None] * J * d[None, :])
    return d[:, None] * (U / np.sqrt(w)) @ U.T


def _surrogate_value(zhat, lin_c, lin_T, Wk, s_curv):
    """Sum over UTs of Tr E^T W B^-1 W^T E for the whitened surrogate blocks B."""
    B = lin_c + np.einsum("knijz,nz->kij", lin_T, zhat) - s_curv * np.eye(5)[None]
    total = 0.0
    for k in range(B.shape[0]):
        w = np.linalg.eigvalsh(B[k])
        if w[0] <= 1e-12 * max(w[-1], 1e-300):
            return np.inf
        X = Wk[k][:3] @ np.linalg.solve(B[k], Wk[k][:3].T)
        total += np.trace(X)
    return float(total)


def mm_step(state: MmState, ctx: MmContext) -> tuple[MmState, bool]:
    """One MM update.  Returns (new_state, progressed)."""
    stat, basis = ctx.stat, ctx.basis
    K = stat.num_uts
    N, side = basis.gram.shape[0], basis.side
    P = ctx.budget
    Z_t = state.Z
    J_t, g = _linearization(Z_t, basis, stat, ctx.S)
    Gam = transformation(stat.xi)                                  # (K,5,6)
    Jbar_t = Gam @ J_t @ np.swapaxes(Gam, -1, -2)
    gbar = np.einsum("kai,nkijz,kbj->knabz", Gam, g, Gam)          # (K,N,5,5,dz)
    c = float(state.speb.sum())
    if not np.isfinite(c):
        raise SolverFailure("MM requires a finite SPEB at the current iterate")
    # whitened LMI block W^T Jbar(Z) W with W = Jbar_t^{-1/2}, Z = P * Zhat
    Wk = np.stack([_whitener(J) for J in Jbar_t])                  # (K,5,5)
    zt_hat = hvec(Z_t) / P
    lin_T = P * np.einsum("kia,knijz,kjb->knabz", Wk, gbar, Wk)
    lin_c = np.eye(5)[None] - np.einsum("knabz,nz->kab", lin_T, zt_hat)
    grad_norm = float(np.linalg.norm(lin_T))
    L_curv = state.L_curv if state.L_curv > 0 else 1e-3 * grad_norm

    dz = zt_hat.shape[1]
    accepted = None
    for _ in range(ctx.max_backtrack):
        prob = SdpProblem()
        Zv = [prob.variable(side, hermitian=True, name=f"Z{n}") for n in range(N)]
        Mv = [prob.variable(3, name=f"M{k}") for k in range(K)]
        sv = prob.vector(1, name="s")
        prob.minimize([(m, m.functional(np.eye(3))) for m in Mv])
        prob.add_trace_le([(basis.gram[n], Zv[n]) for n in range(N)], 1.0)
        for z in Zv:
            prob.add_psd(z)
        for k in range(K):
            F0 = np.zeros((8, 8))
            F0[3:, 3:] = lin_c[k]
            F0[:3, 3:] = Wk[k][:3] / np.sqrt(c)
            F0[3:, :3] = Wk[k][:3].T / np.sqrt(c)
            Tm = np.zeros((8, 8, 6))
            Tm[:3, :3, :] = np.moveaxis(Mv[k].basis(), 0, -1)
            Ts = np.zeros((8, 8, 1))
            Ts[3:, 3:, 0] = -np.eye(5)
            terms = [(Mv[k], Tm), (sv, Ts)]
            for n in range(N):
                Tz = np.zeros((8, 8, dz))
                Tz[3:, 3:, :] = lin_T[k, n]
                terms.append((Zv[n], Tz))
            prob.add_lmi(F0, terms)
        # rotated cone: 2 s (1/L) >= sum ||Zhat - Zhat_t||^2
        rows = 2 + N * dz
        Ts_soc = np.zeros((rows, 1))
        Ts_soc[0, 0] = 1.0
        Ts_soc[-1, 0] = 1.0
        b = np.zeros(rows)
        b[0] = 1.0 / L_curv
        b[-1] = -1.0 / L_curv
        b[1:-1] = -np.sqrt(2.0) * zt_hat.ravel()
        soc_terms = [(sv, Ts_soc)]
        for n, z in enumerate(Zv):
            Tz = np.zeros((rows, dz))
            Tz[1 + n * dz:1 + (n + 1) * dz] = np.sqrt(2.0) * np.eye(dz)
            soc_terms.append((z, Tz))
        prob.add_soc(soc_terms, b)

        sol = solve(prob, tol=ctx.tol, max_iter=ctx.max_iter, warm_start=ctx.warm)
        if sol.status == SdpStatus.INFEASIBLE:
            raise SolverFailure("localization SDP reported infeasible")
        ctx.warm = sol
        Zhat = np.stack([sol.value(z) for z in Zv])
        Zhat = _project_psd(Zhat)
        zhat_vec = hvec(Zhat)
        s_val = 0.5 * L_curv * float(((zhat_vec - zt_hat) ** 2).sum())
        surr = _surrogate_value(zhat_vec, lin_c, lin_T, Wk, s_val)
        Z_new = P * Zhat
        speb_proj = speb_from_Z(Z_new, basis, stat, S=ctx.S)
        if np.isfinite(surr) and speb_proj.sum() <= surr * (1 + 1e-9):
            if surr > c * (1 + 1e-9):
                return state, False
            accepted = (Z_new, speb_proj, float(surr))
            break
        # curvature too small for a global bound: settle for true descent on the segment
        step = _segment_search(Z_t, Z_new, c, basis, stat, ctx.S)
        L_curv *= 2.0
        if step is not None:
            accepted = step
            break
    if accepted is None:
        warnings.warn("curvature backtracking did not find a descent step",
                      NonConvergenceWarning, stacklevel=2)
        return state, False
    Z_new, speb_proj, surr = accepted
    # budget: scale down when over it, scale up when that helps
    pw = transmit_power(Z_new, basis)
    speb = speb_proj
    if pw > 0 and not np.isclose(pw, P, rtol=1e-12):
        Z_s = Z_new * (P / pw)
        speb_s = speb_from_Z(Z_s, basis, stat, S=ctx.S)
        if pw > P or speb_s.sum() <= speb.sum():
            Z_new, speb = Z_s, speb_s
    if not speb.sum() <= c * (1 + 1e-9):
        return state, False
    new = MmState(state.t + 1, Z_new, _position_blocks(Z_new, ctx), 0.5 * L_curv, max(float(surr), float(speb.sum())),
                  speb, transmit_power(Z_new, basis), sol.iterations,
                  (sol.res_primal, sol.res_dual))
    return new, True


def _segment_search(Z_t, Z_new, c, basis, stat, S, steps: int = 6):
    """Largest tau in {1, 1/2, ...} whose convex combination lowers the true SPEB."""
    tau = 1.0
    for _ in range(steps):
        Z = Z_t + tau * (Z_new - Z_t)
        speb = speb_from_Z(Z, basis, stat, S=S)
        if speb.sum() < c * (1 - 1e-9):
            return Z, speb, float(speb.sum())
        tau *= 0.5
    return None


def _project_psd(Z):
    Z = 0.5 * (Z + np.conj(np.swapaxes(Z, -1, -2)))
    w, U = np.linalg.eigh(Z)
    return (U * np.maximum(w, 0.0)[:, None, :]) @ np.conj(np.swapaxes(U, -1, -2))


def run_mm(stat: StatCsi, budget: float, basis: SubspaceBasis | None = None,
           max_iter: int = 30, rel_tol: float = 1e-4, sdp_tol: float = 1e-6,
           sdp_max_iter: int = 5000, callback=None) -> tuple[MmState, list]:
    basis = build_subspace(stat).orthonormal() if basis is None else basis
    ctx = MmContext(stat, basis, budget, pilot_gram(stat), tol=sdp_tol, max_iter=sdp_max_iter)
    state = initial_state(ctx)
    trace = [state.record()]
    if callback:
        callback(state)
    while state.t < max_iter:
        prev = state.objective
        state, progressed = mm_step(state, ctx)
        if not progressed:
            break
        trace.append(state.record())
        if callback:
            callback(state)
        if abs(prev - state.objective) < rel_tol * state.objective:
            break
    return state, trace


# -- precoder recovery -------------------------------------------------------------

def recover_precoder(Z, basis: SubspaceBasis, stat: StatCsi, rng=None,
                     num_candidates: int = 50, rank_tol: float = 1e-8, S=None) -> np.ndarray:
    """Rank-K factor W_n (N, N_t, K) of C_n = L_n Z_n L_n^H."""
    rng = np.random.default_rng(rng)
    K = stat.num_uts
    Z = np.asarray(Z)
    N, Nt = basis.L.shape[0], basis.L.shape[1]
    Q, R = np.linalg.qr(basis.L)
    small = R @ Z @ np.conj(np.swapaxes(R, -1, -2))
    small = 0.5 * (small + np.conj(np.swapaxes(small, -1, -2)))
    w, U = np.linalg.eigh(small)
    w, U = w[:, ::-1], U[:, :, ::-1]
    w = np.maximum(w, 0.0)
    U = Q @ U                                    # eigenvectors of C_n
    top = w[:, :1]
    rank = (w > rank_tol * np.maximum(top, 1e-300)).sum(axis=1)
    r = min(K, U.shape[-1])
    trunc = np.zeros((N, Nt, K), dtype=complex)
    trunc[:, :, :r] = U[:, :, :r] * np.sqrt(w[:, None, :r])
    if np.all(rank <= K):
        return trunc
    power = w.sum(axis=1)
    S = pilot_gram(stat) if S is None else S

    def rescale(Wc):
        p = np.einsum("ntk,ntk->n", Wc.conj(), Wc).real
        f = np.sqrt(np.where(p > 0, power / np.where(p > 0, p, 1.0), 0.0))
        return Wc * f[:, None, None]

    from .fim import channel_fim
    best = rescale(trunc)
    best_val = _sum_speb(stat, best, S, channel_fim)
    half = U * np.sqrt(w)[:, None, :]
    for _ in range(num_candidates):
        G = (rng.standard_normal((N, w.shape[1], K)) + 1j * rng.standard_normal((N, w.shape[1], K)))
        cand = rescale(half @ G / np.sqrt(2 * K))
        val = _sum_speb(stat, cand, S, channel_fim)
        if val < best_val:
            best, best_val = cand, val
    return best


def speb_gradient(Y, basis: SubspaceBasis, stat: StatCsi, S=None):
    """Sum SPEB at Z = Y Y^H and its gradient with respect to Y (N, side, r).

    The gradient G satisfies d speb = Re Tr(G^H dY).
    """
    S = pilot_gram(stat) if S is None else S
    Z = Y @ np.conj(np.swapaxes(Y, -1, -2))
    J, g = _linearization(Z, basis, stat, S)
    Gam = transformation(stat.xi)
    Jbar = Gam @ J @ np.swapaxes(Gam, -1, -2)
    speb = position_crb(Jbar)
    if not np.all(np.isfinite(speb)):
        return np.inf, np.zeros_like(Y)
    inv = np.linalg.inv(Jbar)
    H = np.swapaxes(Gam, -1, -2) @ (inv[:, :, :3] @ inv[:, :3, :]) @ Gam
    Gz = hmat(-np.einsum("kij,nkijz->nz", H, g))
    return float(speb.sum()), 2.0 * Gz @ Y


def polish_precoder(W, basis: SubspaceBasis, stat: StatCsi, power: float, S=None,
                    max_iter: int = 200) -> np.ndarray:
    """Local descent of log sum-SPEB over rank-K precoders in span(L) at fixed power.

    ``basis`` must be orthonormal; ``power`` is the budget over the retained
    subcarriers.  Returns ``W`` unchanged if no improvement is found.
    """
    S = pilot_gram(stat) if S is None else S
    Q = basis.L
    Y0 = np.conj(np.swapaxes(Q, -1, -2)) @ np.asarray(W)
    shape = Y0.shape
    scale = np.sqrt(power)

    def unpack(x):
        return (x[:x.size // 2] + 1j * x[x.size // 2:]).reshape(shape)

    def fun(x):
        Y = unpack(x)
        nrm = np.linalg.norm(Y)
        val, G = speb_gradient(scale * Y / nrm, basis, stat, S)
        if not np.isfinite(val) or val <= 0:
            return 1e300, np.zeros_like(x)
        G = scale / nrm * (G - np.real(np.vdot(Y / nrm, G)) * Y / nrm) / val
        return np.log(val), np.concatenate([G.real.ravel(), G.imag.ravel()])

    x0 = np.concatenate([Y0.real.ravel(), Y0.imag.ravel()])
    # L-BFGS-B takes a unit-length first step: a large radius keeps it local
    x0 *= 100.0 / np.linalg.norm(x0)
    f0, _ = fun(x0)
    res = minimize(fun, x0, jac=True, method="L-BFGS-B", options={"maxiter": max_iter, "ftol": 1e-15, "gtol": 1e-12})
    if not res.fun < f0:
        return np.asarray(W)
    Y = unpack(res.x)
    return Q @ (scale * Y / np.linalg.norm(Y))


def _sum_speb(stat, W, S, channel_fim):
    J = channel_fim(stat, W, S=S)
    return float(position_crb(transformation(stat.xi) @ J
                              @ np.swapaxes(transformation(stat.xi), -1, -2)).sum())


@dataclass
class LocDesign:
    W: np.ndarray            # (N, N_t, K)
    Z: np.ndarray
    speb_relaxed: np.ndarray
    speb: np.ndarray
    trace: list
    iterations: int


def design_localization_precoder(stat: StatCsi, power: float, rng=None, max_iter: int = 30,
                                 rel_tol: float = 1e-4, sdp_tol: float = 1e-6,
                                 sdp_max_iter: int = 5000, num_candidates: int = 50,
                                 polish_iter: int = 200) -> LocDesign:
    """MM + SDP design, rank-K recovery and local polish; ``power`` is the physical budget P."""
    from .fim import fim_bundle
    budget = stat.design_power(power)
    basis = build_subspace(stat).orthonormal()
    state, trace = run_mm(stat, budget, basis, max_iter=max_iter, rel_tol=rel_tol,
                          sdp_tol=sdp_tol, sdp_max_iter=sdp_max_iter)
    W = recover_precoder(state.Z, basis, stat, rng, num_candidates=num_candidates)
    if polish_iter:
        W = polish_precoder(W, basis, stat, budget, max_iter=polish_iter)
    return LocDesign(W, state.Z, state.speb, fim_bundle(stat, W).speb, trace, state.t)
