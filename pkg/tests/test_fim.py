import numpy as np
import pytest
from hypothesis import given, strategies as st

from leoical.channel import ChannelParams
from leoical.config import desk_profile
from leoical.errors import NonRealQuadraticForm
from leoical.fim import (apeb, channel_derivatives, channel_fim, equivalent_noise, fim_bundle,
                         pilot_gram, position_crb, real_quadratic, transform_and_speb,
                         transformation)
from leoical.scenario import SatelliteState, jacobian_xi, sample_scenario

from conftest import random_precoder, small_stat
from oracles import fd_jacobian_xi, likelihood_fim, loop_equivalent_noise, los_channel, schur_check

TINY = dict(num_tx_x=2, num_tx_y=4, num_rf_chains=2, num_uts=2, num_subcarriers=4,
            retained_subcarriers=0, slots_per_frame=2, pilot_syms_per_slot=2)


def test_equivalent_noise(rng, desk_stat):
    W = random_precoder(rng, desk_stat, power=0.3)
    assert np.allclose(equivalent_noise(desk_stat, W), loop_equivalent_noise(desk_stat, W), rtol=1e-12)
    assert np.all(equivalent_noise(desk_stat, W) >= desk_stat.noise)
    assert np.allclose(equivalent_noise(desk_stat, 0 * W), desk_stat.noise)
    sharp = small_stat(0, kappa=1e15)
    assert np.allclose(equivalent_noise(sharp, W), sharp.noise, rtol=1e-6)


def test_real_quadratic_guard():
    assert real_quadratic(np.array([2.0 + 1e-12j])) == pytest.approx(2.0)
    with pytest.raises(NonRealQuadraticForm):
        real_quadratic(np.array([1.0 + 0.1j]))


def test_channel_derivatives_fd(rng):
    cfg = desk_profile()
    for _ in range(10):
        eta = np.array([rng.uniform(1.1, 2.0), rng.uniform(1.1, 2.0), rng.uniform(6e-4, 1e-3),
                        rng.uniform(-5e4, 5e4), *rng.normal(size=2) * 1e-5])
        m, n = int(rng.integers(1, 60)), int(rng.integers(1, 513))
        D = channel_derivatives(ChannelParams.from_eta(eta), m, n, cfg)
        steps = [1e-6, 1e-6, 1e-13, 1e-3, 1e-11, 1e-11]
        for i, h in enumerate(steps):
            e = np.zeros(6)
            e[i] = h
            fd = (los_channel(eta + e, m, n, cfg) - los_channel(eta - e, m, n, cfg)) / (2 * h)
            assert np.linalg.norm(D[i] - fd) <= 1e-5 * np.linalg.norm(D[i])


def test_derivative_structure():
    cfg = desk_profile()
    p = ChannelParams(1.3, 1.7, 7e-4, 300.0, 0.0 + 0.0j)
    D = channel_derivatives(p, 3, 9, cfg)
    assert np.allclose(D[:4], 0)
    q = ChannelParams(1.3, 1.7, 7e-4, 300.0, 1e-5 - 2e-5j)
    D = channel_derivatives(q, 3, 9, cfg)
    assert np.allclose(D[5], 1j * D[4], rtol=0, atol=1e-15)


def test_fim_zero_alpha(rng):
    stat = small_stat(0)
    stat = stat.replace(params=tuple(ChannelParams(p.theta_x_rad, p.theta_y_rad, p.delay_s,
                                                   p.doppler_Hz, 0j) for p in stat.params))
    J = channel_fim(stat, random_precoder(rng, stat, 0.2))
    assert np.allclose(J[:, :4, :4], 0)
    assert np.all(np.isinf(fim_bundle(stat, random_precoder(rng, stat, 0.2)).speb))


def test_fim_symmetric_psd(rng, desk_stat):
    for _ in range(5):
        J = channel_fim(desk_stat, random_precoder(rng, desk_stat, 0.5))
        assert np.allclose(J, np.swapaxes(J, -1, -2))
        for Jk in J:
            w = np.linalg.eigvalsh(Jk)
            assert w[0] >= -1e-9 * w[-1]


def test_fim_matches_likelihood_small(rng):
    stat = small_stat(11, **TINY)
    W = random_precoder(rng, stat, power=0.2)
    J = channel_fim(stat, W)
    for k in range(stat.num_uts):
        ref = likelihood_fim(stat, W, k)
        assert np.linalg.norm(J[k] - ref) <= 0.01 * np.linalg.norm(ref)


def test_fim_power_scaling(rng):
    stat = small_stat(2)
    W = random_precoder(rng, stat, 0.3)
    J1, J2 = channel_fim(stat, W), channel_fim(stat, np.sqrt(2) * W)
    d1, d2 = np.diagonal(J1, axis1=1, axis2=2), np.diagonal(J2, axis1=1, axis2=2)
    assert np.all(d2 < 2 * d1)
    sharp = small_stat(2, kappa=1e15)
    assert np.allclose(channel_fim(sharp, np.sqrt(2) * W), 2 * channel_fim(sharp, W), rtol=1e-6)


def test_more_pilots_never_lose_information(rng, desk_stat):
    W = random_precoder(rng, desk_stat, 0.3)
    pilots = desk_stat.pilots
    J_less = channel_fim(desk_stat, W, pilots=pilots[:-1])
    J_more = channel_fim(desk_stat, W, pilots=pilots)
    assert np.all(np.diagonal(J_more - J_less, axis1=1, axis2=2) >= -1e-12 * np.abs(J_more).max())


def test_speb_permutation_invariance(rng, desk_stat):
    W = random_precoder(rng, desk_stat, 0.3)
    base = fim_bundle(desk_stat, W).speb
    perm_sc = np.array([3, 0, 7, 1, 6, 2, 5, 4])
    s2 = desk_stat.replace(subcarriers=desk_stat.subcarriers[perm_sc], V=desk_stat.V[perm_sc],
                           dVx=desk_stat.dVx[perm_sc], dVy=desk_stat.dVy[perm_sc])
    assert np.allclose(fim_bundle(s2, W[perm_sc]).speb, base, rtol=1e-8)
    pk = np.array([2, 0, 1])
    s3 = desk_stat.replace(theta=desk_stat.theta[pk], gamma=desk_stat.gamma[pk],
                           kappa=desk_stat.kappa[pk], V=desk_stat.V[:, pk], dVx=desk_stat.dVx[:, pk],
                           dVy=desk_stat.dVy[:, pk], params=tuple(desk_stat.params[i] for i in pk),
                           xi=desk_stat.xi[pk])
    assert np.allclose(fim_bundle(s3, W[:, :, pk]).speb, base[pk], rtol=1e-8)


def test_jacobian_xi_fd():
    cfg = desk_profile()
    sat = SatelliteState()
    for s in range(10):
        for u in sample_scenario(cfg, s).uts:
            X = jacobian_xi(u.position_m, u.velocity_mps, sat, cfg)
            ref = fd_jacobian_xi(u.position_m, u.velocity_mps, sat, cfg)
            assert np.all(np.linalg.norm(X - ref, axis=0) <= 1e-6 * np.linalg.norm(X, axis=0))
            assert np.linalg.norm(X[:, 2]) == pytest.approx(1 / cfg.speed_of_light, rel=1e-12)
            assert np.all(jacobian_xi(u.position_m, np.zeros(3), sat, cfg)[:, 3] == 0)


def test_transform_identity():
    xi = np.hstack([np.eye(3), np.zeros((3, 1))])
    Jbar, speb = transform_and_speb(np.eye(6), xi)
    assert np.allclose(Jbar, np.eye(5)) and speb == pytest.approx(3.0)


def test_speb_definitions_agree(rng):
    E = np.eye(5)[:, :3]
    for _ in range(20):
        A = rng.normal(size=(6, 6))
        J = A @ A.T + 0.1 * np.eye(6)
        xi = rng.normal(size=(3, 4))
        Jbar, speb = transform_and_speb(J, xi)
        G = transformation(xi)
        assert np.allclose(Jbar, G @ J @ G.T)
        inv = np.linalg.inv(Jbar)
        assert speb == pytest.approx(np.trace(E.T @ inv @ E), rel=1e-10)
        assert speb == pytest.approx(np.trace(inv[:3, :3]), rel=1e-10)
        # position CRB through the Schur complement of the nuisance block
        S = Jbar[:3, :3] - Jbar[:3, 3:] @ np.linalg.solve(Jbar[3:, 3:], Jbar[3:, :3])
        assert speb == pytest.approx(np.trace(np.linalg.inv(S)), rel=1e-10)


def test_singular_fim_is_infinite():
    J = np.zeros((5, 5))
    assert np.isinf(position_crb(J))
    J = np.diag([1.0, 1.0, 1.0, 1.0, 0.0])
    assert np.isinf(position_crb(J))


def test_apeb_examples():
    assert apeb([1.0, 1.0, 1.0]) == 1.0
    assert apeb([4.0]) == 2.0
    assert apeb([1.0, 4.0, 4.0]) == pytest.approx(np.sqrt(3))
    assert np.isinf(apeb([1.0, np.inf]))


def test_pilot_gram_hermitian(desk_stat):
    S = pilot_gram(desk_stat)
    assert np.allclose(S, np.conj(np.swapaxes(S, -1, -2)))


@given(st.integers(0, 10_000))
def test_schur_lemma_both_directions(seed):
    r = np.random.default_rng(seed)
    A = r.normal(size=(5, 5))
    J = A @ A.T + 0.05 * np.eye(5)
    E = np.eye(5)[:, :3]
    base = E.T @ np.linalg.solve(J, E)
    B = r.normal(size=(3, 3))
    M = base + r.choice([-1, 1]) * 0.05 * (B @ B.T)
    lhs, rhs = schur_check(M, E, J)
    assert lhs == rhs


def test_real_quadratic_cancellation_scale():
    # rounding-level imaginary part on a nearly cancelling form
    assert real_quadratic(np.array([1e-14 + 1e-18j]), scale=1.0) == pytest.approx(1e-14)
    with pytest.raises(NonRealQuadraticForm):
        real_quadratic(np.array([1e-14 + 1e-18j]))
    with pytest.raises(NonRealQuadraticForm):
        real_quadratic(np.array([1.0 + 0.1j]), scale=1.0)
