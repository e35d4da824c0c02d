"""ADMM hybrid precoder trading weighted MSE against distance to a localization precoder.

Consensus copies ``G[k, n]`` (one N_t x K matrix per UT and subcarrier) are
tied to the hybrid product ``W_RF @ W_BB[n]`` through scaled duals ``Q`` and
per-copy penalties ``eta``.  Receivers follow ``s_hat = conj(u) y``.

Shapes: G, Q are (K, N, N_t, K); u, omega, eta are (K, N); W_BB is
(N, N_rf, K); W_RF is (N_t, N_rf).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from .channel import StatCsi
from .comm import spectral_efficiency
from .errors import BisectionFailure, ConfigError, NonConvergenceWarning, SingularGram
from .fim import fim_bundle

ARCHITECTURES = ("fully_connected", "partially_connected", "fully_digital")


@dataclass(frozen=True)
class AdmmConfig:
    rho_weight: float = 0.7
    penalty_init: float = 1.0
    balance: float = 10.0        # residual-balancing threshold
    mul: float = 2.0
    div: float = 2.0
    tol_rel: float = 1e-4        # eps_2 = tol_rel * design power
    max_iter: int = 500
    architecture: str = "fully_connected"
    trace_every: int = 0         # SE / APEB snapshots, 0 disables

    def __post_init__(self):
        if not 0.0 <= self.rho_weight <= 1.0:
            raise ConfigError("rho_weight must lie in [0, 1]")
        if self.penalty_init <= 0:
            raise ConfigError("penalty_init must be positive")
        if self.balance <= 1 or self.mul <= 1 or self.div <= 1:
            raise ConfigError("penalty update parameters must exceed 1")
        if self.tol_rel <= 0 or self.max_iter < 1:
            raise ConfigError("tolerance and iteration cap must be positive")
        if self.architecture not in ARCHITECTURES:
            raise ConfigError(f"unknown architecture {self.architecture!r}")


@dataclass
class AdmmState:
    G: np.ndarray
    u: np.ndarray
    omega: np.ndarray
    W_RF: np.ndarray
    W_BB: np.ndarray
    Q: np.ndarray
    eta: np.ndarray
    t: int = 0

    def product(self) -> np.ndarray:
        """W_RF W_BB[n], shaped (N, N_t, K)."""
        return np.einsum("ar,nrk->nak", self.W_RF, self.W_BB)

    def residual(self) -> float:
        return float((np.abs(self.G - self.product()[None]) ** 2).sum())


@dataclass(frozen=True)
class Weights:
    """Objective coefficients after normalization: c_m on weighted MSE, c_d on distance."""
    comm: float
    dist: float
    budget: float    # power budget per consensus copy (the design power)


@dataclass(frozen=True)
class HybridPrecoder:
    W_RF: np.ndarray
    W_BB: np.ndarray
    architecture: str

    @property
    def W(self) -> np.ndarray:
        return np.einsum("ar,nrk->nak", self.W_RF, self.W_BB)

    @property
    def power(self) -> float:
        return float((np.abs(self.W) ** 2).sum())


@dataclass
class HybridResult:
    precoder: HybridPrecoder
    iterations: int
    converged: bool
    trace: list = field(default_factory=list)


def phase(x) -> np.ndarray:
    """exp(j angle x) with angle(0) = 0."""
    return np.exp(1j * np.angle(np.asarray(x)))


def conj_phase_transpose(X) -> np.ndarray:
    """exp(-j angle X^T), the form of the fully connected analog update."""
    return np.exp(-1j * np.angle(np.asarray(X).T))


def block_mask(num_antennas: int, num_rf: int) -> np.ndarray:
    """Support of a partially connected analog network: antenna i feeds chain i // N_g."""
    if num_antennas % num_rf:
        raise ConfigError("partial connectivity requires N_rf to divide N_t")
    ng = num_antennas // num_rf
    mask = np.zeros((num_antennas, num_rf), dtype=bool)
    mask[np.arange(num_antennas), np.arange(num_antennas) // ng] = True
    return mask


# -- baselines ------------------------------------------------------------------

def baseline_codebook(stat: StatCsi, power: float | None = None) -> np.ndarray:
    """Conjugate steering vectors with equal power per UT and subcarrier, (N, N_t, K).

    ``power`` is the design power over the retained subcarriers and defaults
    to one watt.
    """
    power = 1.0 if power is None else power
    scale = np.sqrt(power / (stat.num_uts * stat.num_subcarriers))
    return scale * np.conj(np.swapaxes(stat.V, 1, 2))


# -- initialization ---------------------------------------------------------------

def _dft_phases(num_x: int, num_y: int, count: int) -> np.ndarray:
    """First ``count`` columns of the 2D DFT over the array, as unit-modulus vectors."""
    fx = np.exp(2j * np.pi * np.outer(np.arange(num_x), np.arange(num_x)) / num_x)
    fy = np.exp(2j * np.pi * np.outer(np.arange(num_y), np.arange(num_y)) / num_y)
    cols = [np.kron(fy[:, j], fx[:, i]) for j in range(num_y) for i in range(num_x)]
    return np.stack(cols[:count], axis=1)


def initial_analog(stat: StatCsi, architecture: str, W_loc=None) -> np.ndarray:
    """Analog matrix built from codebook beam phases.

    Column j uses the beam of UT j mod K; columns beyond K are offset by
    orthogonal DFT beams so the Gram matrix stays well conditioned.  With a
    localization precoder, the leading columns instead take the phases of its
    dominant left singular vectors (all subcarriers stacked), so the analog
    part starts inside the span the distance term pulls towards.
    """
    cfg = stat.cfg
    Nt, K = stat.num_antennas, stat.num_uts
    if architecture == "fully_digital":
        return np.eye(Nt, dtype=complex)
    Nrf = cfg.num_rf_chains
    mid = stat.num_subcarriers // 2
    beams = np.conj(stat.V[mid]).T                            # (N_t, K)
    if architecture == "fully_connected":
        offsets = _dft_phases(cfg.num_tx_x, cfg.num_tx_y, (Nrf + K - 1) // K)
        cols = [phase(beams[:, j % K] * offsets[:, j // K]) for j in range(Nrf)]
        W = np.stack(cols, axis=1)
        mask = np.ones_like(W, dtype=bool)
    else:
        mask = block_mask(Nt, Nrf)
        W = np.zeros((Nt, Nrf), dtype=complex)
        for j in range(Nrf):
            W[mask[:, j], j] = phase(beams[mask[:, j], j % K])
    if W_loc is not None:
        U = np.linalg.svd(np.concatenate(list(np.asarray(W_loc)), axis=1), full_matrices=False)[0]
        r = min(Nrf, U.shape[1])
        W[:, :r] = np.where(mask[:, :r], phase(U[:, :r]), 0)
    return W


def _least_squares_bb(W_RF, target) -> np.ndarray:
    gram = W_RF.conj().T @ W_RF
    try:
        return np.linalg.solve(gram, np.einsum("ar,nak->nrk", W_RF.conj(), target))
    except np.linalg.LinAlgError as exc:
        raise SingularGram("W_RF^H W_RF is singular") from exc


def _scale_to(W_RF, W_BB, budget):
    pw = float((np.abs(np.einsum("ar,nrk->nak", W_RF, W_BB)) ** 2).sum())
    return W_BB * np.sqrt(budget / pw) if pw > 0 else W_BB


def initial_state(stat: StatCsi, cfg: AdmmConfig, budget: float, W_loc=None) -> AdmmState:
    """Codebook-fitted start; ``W_loc`` (used only when rho < 1) seeds the analog part."""
    use_loc = W_loc is not None and cfg.rho_weight < 1
    W_RF = initial_analog(stat, cfg.architecture, W_loc if use_loc else None)
    W_BB = _scale_to(W_RF, _least_squares_bb(W_RF, baseline_codebook(stat, budget)), budget)
    K, N = stat.num_uts, stat.num_subcarriers
    X = np.einsum("ar,nrk->nak", W_RF, W_BB)
    G = np.broadcast_to(X, (K,) + X.shape).copy()
    st = AdmmState(G, np.zeros((K, N), complex), np.ones((K, N)), W_RF, W_BB,
                   np.zeros_like(G), np.full((K, N), cfg.penalty_init))
    st.u = update_u(st, stat)
    st.omega = update_omega(st, stat)
    return st


# -- per-copy communication terms ------------------------------------------------

def _copy_gains(G, stat: StatCsi) -> np.ndarray:
    """B[k, n, i] = hbar_{k,n}^T G[k, n] e_i."""
    return np.einsum("nkt,knti->kni", stat.hbar, G)


def copy_mse(state: AdmmState, stat: StatCsi) -> np.ndarray:
    B = _copy_gains(state.G, stat)
    K = stat.num_uts
    own = B[np.arange(K), :, np.arange(K)]                    # (K, N)
    total = (np.abs(B) ** 2).sum(axis=2)
    u = state.u
    return np.abs(u) ** 2 * (total + stat.noise) - 2 * np.real(np.conj(u) * own) + 1.0


def update_u(state: AdmmState, stat: StatCsi) -> np.ndarray:
    B = _copy_gains(state.G, stat)
    K = stat.num_uts
    own = B[np.arange(K), :, np.arange(K)]
    return own / ((np.abs(B) ** 2).sum(axis=2) + stat.noise)


def update_omega(state: AdmmState, stat: StatCsi) -> np.ndarray:
    """Reciprocal of the MSE at the current (G, u)."""
    return 1.0 / copy_mse(state, stat)


# -- G update ----------------------------------------------------------------------

def _g_system(state: AdmmState, stat: StatCsi, W_loc, w: Weights):
    """A = a I + b hbar* hbar^T and Psi for every copy.

    Returns (a, b, hc, Psi) with hc = conj(hbar) shaped (K, N, N_t).
    """
    K = stat.num_uts
    hc = np.conj(np.swapaxes(stat.hbar, 0, 1))                # (K, N, N_t)
    a = w.dist + 0.5 * state.eta
    b = w.comm * state.omega * np.abs(state.u) ** 2
    X = state.product()
    Psi = 0.5 * state.eta[..., None, None] * (X[None] - state.Q)
    if w.dist:
        Psi = Psi + w.dist * np.asarray(W_loc)[None]
    comm = (w.comm * state.omega * state.u)[..., None] * hc   # (K, N, N_t)
    Psi[np.arange(K), :, :, np.arange(K)] += comm
    return a, b, hc, Psi


def _g_spectrum(a, b, hc, Psi):
    """Eigenvalues (rank-one and bulk) and the matching Phi mass of each copy."""
    h2 = (np.abs(hc) ** 2).sum(axis=-1)
    lam1 = a + b * h2
    d = hc / np.sqrt(np.maximum(h2, np.finfo(float).tiny))[..., None]
    proj = np.einsum("knt,kntj->knj", d.conj(), Psi)
    p1 = (np.abs(proj) ** 2).sum(axis=-1)
    rest = np.maximum((np.abs(Psi) ** 2).sum(axis=(-2, -1)) - p1, 0.0)
    return lam1, p1, rest


def power_profile(mu, a, b, hc, Psi) -> float:
    """delta(mu) = sum over copies of ||(A + mu I)^-1 Psi||_F^2."""
    lam1, p1, rest = _g_spectrum(a, b, hc, Psi)
    return float((p1 / (lam1 + mu) ** 2 + rest / (a + mu) ** 2).sum())


def _solve_g(mu, a, b, hc, Psi):
    """(A + mu I)^-1 Psi via Sherman-Morrison."""
    am = (a + mu)[..., None, None]
    hTPsi = np.einsum("knt,kntj->knj", np.conj(hc), Psi)      # hbar^T Psi
    coef = (b / (a + mu + b * (np.abs(hc) ** 2).sum(axis=-1)))[..., None, None]
    return (Psi - coef * hc[..., None] * hTPsi[..., None, :]) / am


def update_G(state: AdmmState, stat: StatCsi, W_loc, w: Weights):
    """Returns (G, mu) solving the power-constrained copy update."""
    a, b, hc, Psi = _g_system(state, stat, W_loc, w)
    cap = w.budget * stat.num_uts
    if power_profile(0.0, a, b, hc, Psi) <= cap:
        return _solve_g(0.0, a, b, hc, Psi), 0.0
    f = lambda mu: power_profile(mu, a, b, hc, Psi) - cap
    hi = np.sqrt((np.abs(Psi) ** 2).sum() / cap)
    if not (np.isfinite(hi) and f(hi) <= 0):
        raise BisectionFailure("could not bracket the power multiplier")
    mu = brentq(f, 0.0, hi, xtol=1e-14 * max(hi, 1.0), rtol=1e-13, maxiter=500)
    return _solve_g(mu, a, b, hc, Psi), mu


# -- baseband and analog updates ---------------------------------------------------

def _weighted_target(state: AdmmState):
    """sum_k eta (G + Q) per subcarrier and sum_k eta, shaped (N, N_t, K), (N,)."""
    num = np.einsum("kn,knaj->naj", state.eta, state.G + state.Q)
    return num, state.eta.sum(axis=0)


def update_Wbb(state: AdmmState, architecture: str) -> np.ndarray:
    num, den = _weighted_target(state)
    W_RF = state.W_RF
    proj = np.einsum("ar,nak->nrk", W_RF.conj(), num) / den[:, None, None]
    if architecture == "partially_connected":
        ng = W_RF.shape[0] // W_RF.shape[1]
        return proj / ng
    if architecture == "fully_digital":
        return proj
    try:
        return np.linalg.solve(W_RF.conj().T @ W_RF, proj)
    except np.linalg.LinAlgError as exc:
        raise SingularGram("W_RF^H W_RF is singular") from exc


def analog_objective(state: AdmmState) -> float:
    """sum (eta/2) ||G - W_RF W_BB + Q||_F^2."""
    D = state.G - state.product()[None] + state.Q
    return float((0.5 * state.eta * (np.abs(D) ** 2).sum(axis=(-2, -1))).sum())


def update_Wrf(state: AdmmState, architecture: str) -> np.ndarray:
    if architecture == "fully_digital":
        return state.W_RF
    half = 0.5 * state.eta
    Y = np.einsum("kn,knaj,nrj->ar", half, state.G + state.Q, state.W_BB.conj())
    if architecture == "partially_connected":
        mask = np.abs(state.W_RF) > 0
        return np.where(mask, phase(Y), 0.0)
    T = np.einsum("kn,nrj,nsj->rs", half, state.W_BB, state.W_BB.conj())
    T = 0.5 * (T + T.conj().T)
    lam = np.linalg.eigvalsh(T)[-1]
    X = Y.conj().T - (T - lam * np.eye(T.shape[0])) @ state.W_RF.conj().T
    return conj_phase_transpose(X)


def update_dual_and_penalty(state: AdmmState, G_prev, cfg: AdmmConfig):
    """Dual ascent on the scaled duals, then residual balancing per copy.

    Returns (Q, eta).  Copies in exact consensus keep their penalty.
    """
    diff = state.G - state.product()[None]
    Q = state.Q + diff
    prim = (np.abs(diff) ** 2).sum(axis=(-2, -1))
    prog = (np.abs(state.G - G_prev) ** 2).sum(axis=(-2, -1))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(prim > 0, prim / prog, 1.0)
    eta = state.eta.copy()
    eta = np.where(ratio > cfg.balance, eta * cfg.mul, eta)
    eta = np.where(ratio < 1.0 / cfg.balance, eta / cfg.div, eta)
    Q = Q * (state.eta / eta)[..., None, None]
    return Q, eta


# -- driver ------------------------------------------------------------------------

def normalization(state: AdmmState, stat: StatCsi, W_loc, rho: float, budget: float) -> Weights:
    """Divide each metric by its value at the initial point before applying rho.

    The communication metric is the weighted MSE sum(omega * eps); with MMSE
    weights at the start this is K*N.  The distance metric is the squared
    Frobenius distance of the initial product to ``W_loc``.
    """
    wmse0 = float((state.omega * copy_mse(state, stat)).sum())
    X = state.product()
    d0 = float((np.abs(X - np.asarray(W_loc)) ** 2).sum()) if W_loc is not None else 0.0
    comm = rho / wmse0 if rho > 0 else 0.0
    dist = (1.0 - rho) / max(d0, 1e-12 * budget) if rho < 1 else 0.0
    return Weights(comm, dist, budget)


def weighted_objective(state: AdmmState, stat: StatCsi, W_loc, w: Weights) -> float:
    val = 0.0
    if w.comm:
        eps = copy_mse(state, stat)
        val += w.comm * float((state.omega * eps - np.log(state.omega)).sum())
    if w.dist:
        val += w.dist * float((np.abs(state.G - np.asarray(W_loc)[None]) ** 2).sum())
    return val


def run_hybrid(stat: StatCsi, W_loc, budget: float, cfg: AdmmConfig = AdmmConfig(),
               callback=None) -> HybridResult:
    """Alternate G, u, omega, W_BB, W_RF and dual/penalty updates.

    ``W_loc`` is the (N, N_t, K) localization precoder, or None when the
    distance term is switched off.  ``budget`` is the design power over the
    retained subcarriers.
    """
    if W_loc is None:
        W_loc = np.zeros((stat.num_subcarriers, stat.num_antennas, stat.num_uts), complex)
        if cfg.rho_weight < 1:
            raise ConfigError("a localization precoder is needed when rho_weight < 1")
    W_loc = np.asarray(W_loc)
    state = initial_state(stat, cfg, budget, W_loc)
    w = normalization(state, stat, W_loc, cfg.rho_weight, budget)
    eps2 = cfg.tol_rel * budget
    trace = []
    converged = False
    best = None
    while state.t < cfg.max_iter:
        G_prev = state.G
        state.G, mu = update_G(state, stat, W_loc, w)
        state.u = update_u(state, stat)
        state.omega = update_omega(state, stat)
        state.W_BB = update_Wbb(state, cfg.architecture)
        state.W_RF = update_Wrf(state, cfg.architecture)
        resid = state.residual()
        change = float((np.abs(state.G - G_prev) ** 2).sum())
        state.Q, state.eta = update_dual_and_penalty(state, G_prev, cfg)
        state.t += 1
        rec = {"iteration": state.t, "residual": resid, "change": change, "mu": mu,
               "objective": weighted_objective(state, stat, W_loc, w)}
        if cfg.trace_every and state.t % cfg.trace_every == 0:
            W = state.product() * np.sqrt(budget / max((np.abs(state.product()) ** 2).sum(), 1e-300))
            rec["se"] = spectral_efficiency(stat, W)
            rec["apeb"] = fim_bundle(stat, W).apeb
        trace.append(rec)
        if callback:
            callback(state, rec)
        if best is None or resid < best[0]:
            best = (resid, state.W_RF.copy(), state.W_BB.copy())
        if resid <= eps2 and change <= eps2:
            converged = True
            break
    W_RF, W_BB = state.W_RF, state.W_BB
    if not converged:
        warnings.warn(f"hybrid ADMM stopped at t_max = {cfg.max_iter} without consensus",
                      NonConvergenceWarning, stacklevel=2)
    W_BB = _scale_to(W_RF, W_BB, budget)
    return HybridResult(HybridPrecoder(W_RF, W_BB, cfg.architecture), state.t, converged, trace)


def baseline_fully_digital(stat: StatCsi, W_loc, budget: float,
                           cfg: AdmmConfig = AdmmConfig()) -> HybridResult:
    """The hybrid ADMM with the analog stage pinned to the identity."""
    return run_hybrid(stat, W_loc, budget, replace(cfg, architecture="fully_digital"))
