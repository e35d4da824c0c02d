"""Seeded random conic instances for the cross-solver fixture."""
import numpy as np

from leoical.sdp import SdpProblem


def random_instance(seed: int) -> SdpProblem:
    """min Re Tr(C X) + Tr(M) + 3t with a trace budget, an LMI coupling M and X, and a cone on X.

    X = 0, t = 0 and a large M form a strictly feasible point; the objective
    is bounded below because X is trace-bounded and M, t are forced up.
    """
    r = np.random.default_rng(seed)
    hx, hm = 3, 2
    A = r.normal(size=(hx, hx)) + 1j * r.normal(size=(hx, hx))
    C = 0.5 * (A + A.conj().T)
    B = r.normal(size=(2, hm))
    G = [0.5 * (g + g.conj().T) for g in (r.normal(size=(2, 2, hx, hx))
                                          + 1j * r.normal(size=(2, 2, hx, hx))).reshape(4, hx, hx)]
    prob = SdpProblem()
    X = prob.variable(hx, hermitian=True, name="X")
    M = prob.variable(hm, name="M")
    t = prob.vector(1, name="t")
    prob.minimize([(X, X.functional(C)), (M, M.functional(np.eye(hm))), (t, 3.0 * np.ones(1))])
    prob.add_trace_le([(np.eye(hx), X)], 1.0)
    prob.add_psd(X)
    side = hm + 2
    F0 = np.zeros((side, side))
    F0[:hm, hm:] = B.T
    F0[hm:, :hm] = B
    F0[hm:, hm:] = np.eye(2)
    Tm = np.zeros((side, side, M.dim))
    Tm[:hm, :hm] = np.moveaxis(M.basis(), 0, -1)
    Tx = np.zeros((side, side, X.dim))
    bx = X.basis()
    for idx, (a, b) in enumerate([(0, 0), (0, 1), (1, 0), (1, 1)]):
        Tx[hm + a, hm + b] = 0.3 * np.real(np.einsum("ij,dji->d", G[idx], bx))
    Tx = 0.5 * (Tx + np.swapaxes(Tx, 0, 1))
    Tt = np.zeros((side, side, 1))
    Tt[:hm, :hm, 0] = np.eye(hm)
    prob.add_lmi(F0, [(M, Tm), (X, Tx), (t, Tt)])
    # ||x|| <= t + 1
    Tsoc = np.zeros((1 + X.dim, 1))
    Tsoc[0, 0] = 1.0
    b = np.zeros(1 + X.dim)
    b[0] = 1.0
    prob.add_soc([(t, Tsoc), (X, np.vstack([np.zeros((1, X.dim)), np.eye(X.dim)]))], b)
    return prob


SEEDS = tuple(range(5))


def inverse_problem(J):
    """min Tr M  s.t. [[M, I], [I, J]] >= 0."""
    d = J.shape[0]
    prob = SdpProblem()
    M = prob.variable(d, name="M")
    prob.minimize([(M, M.functional(np.eye(d)))])
    F0 = np.block([[np.zeros((d, d)), np.eye(d)], [np.eye(d), J]])
    T = np.zeros((2 * d, 2 * d, M.dim))
    T[:d, :d] = np.moveaxis(M.basis(), 0, -1)
    prob.add_lmi(F0, [(M, T)])
    return prob, M


def eigen_problem(C, scale=1.0):
    """min Tr(C X)  s.t. Tr X <= 1, X >= 0."""
    prob = SdpProblem()
    X = prob.variable(C.shape[0], name="X")
    prob.minimize([(X, X.functional(scale * C))])
    prob.add_trace_le([(np.eye(C.shape[0]), X)], 1.0)
    prob.add_psd(X)
    return prob, X
