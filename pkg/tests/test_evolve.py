import numpy as np
import numpy.testing as npt
import pytest

from vbsqueeze.evolve import (
    COM_SIGN,
    REL_SIGN,
    DomainError,
    NotAntiHermitianError,
    bogoliubov_reports,
    closed_form_momentum,
    closed_form_position,
    conjugate,
    conjugate_low,
    coupled_blocks,
    domain_guard,
    exponentiate,
    fn_of_hermitian,
    k_omega,
    mode_reconstruction,
    mode_reconstruction_komega,
    scalar_k_omega,
    spectrum,
    transform_reports,
    unitarity_error,
)
from vbsqueeze.fock import (
    FockConfig,
    build_annihilation,
    build_com_rel,
    build_momentum,
    build_position,
    commutator,
    identity,
    low_indices,
    project,
)
from vbsqueeze.generators import (
    GeneratorSpec,
    build_bogoliubov_generator,
    build_L_single,
    build_L_two_mode,
    build_squeeze_generator,
)


def lowres(U, A, pred, k):
    idx = low_indices(A.structure, A.per_mode_dim, k)
    return np.linalg.norm(conjugate_low(U, A, k) - pred.entries[np.ix_(idx, idx)], 2)


@pytest.fixture(scope="module")
def single128():
    return FockConfig(128, 1, 1.0, 8)


@pytest.fixture(scope="module")
def two32():
    return FockConfig(32, 2, 1.0, 6)


@pytest.fixture(scope="module")
def vb32(two32):
    cache = {}

    def get(n, theta):
        if (n, theta) not in cache:
            cache[n, theta] = exponentiate(build_L_two_mode(two32, n), theta)
        return cache[n, theta]

    return get


# -- exponentials -------------------------------------------------------------

def test_exponentiate_identity_and_inverse():
    cfg = FockConfig(48, 1, 1.0, 8)
    L = build_L_single(cfg, 1)
    npt.assert_array_equal(exponentiate(L, 0.0).entries, np.eye(48))
    prod = exponentiate(L, 0.3) @ exponentiate(L, -0.3)
    npt.assert_allclose(prod.entries, np.eye(48), atol=1e-10)


def test_exponentiate_matches_scipy_expm():
    from scipy.linalg import expm

    cfg = FockConfig(40, 1, 1.0, 8)
    L = build_L_single(cfg, 2)
    npt.assert_allclose(exponentiate(L, 0.7).entries, expm(0.7 * L.entries), atol=1e-12)


def test_exponentiate_large_norm_unitary():
    cfg = FockConfig(64, 1, 1.0, 8)
    L = build_L_single(cfg, 0)
    theta = 50.0 / np.linalg.norm(L.entries, 2)
    assert unitarity_error(exponentiate(L, theta)) < 1e-9


def test_exponentiate_rejects_hermitian():
    cfg = FockConfig(16, 1, 1.0, 4)
    with pytest.raises(NotAntiHermitianError):
        exponentiate(build_position(cfg), 0.1)


def test_blocks_follow_conserved_quantities():
    cfg = FockConfig(8, 2, 1.0, 3)
    blocks = coupled_blocks(build_bogoliubov_generator(cfg).entries)
    # G conserves n1 - n2: one block per difference value
    assert len(blocks) == 2 * 8 - 1
    assert sum(len(b) for b in blocks) == 64


def test_vacuum_x2_after_squeezing():
    cfg = FockConfig(64, 1, 1.0, 8)
    theta = 0.3
    x2 = build_position(cfg).power(2).entries
    for gen, expected in ((build_squeeze_generator(cfg), np.exp(-2 * theta) * 0.5),
                          (build_L_single(cfg, 0), np.exp(2 * theta) * 0.5)):
        psi = exponentiate(gen, theta).entries[:, 0]
        npt.assert_allclose(np.vdot(psi, x2 @ psi).real, expected, atol=1e-12)


def test_conjugate_identity():
    cfg = FockConfig(16, 1, 1.0, 4)
    x = build_position(cfg)
    npt.assert_array_equal(conjugate(identity(cfg), x).entries, x.entries)


@pytest.mark.parametrize("sign, gen", [(+1, build_squeeze_generator), (-1, lambda c: build_L_single(c, 0))])
def test_single_mode_bogoliubov(sign, gen):
    cfg = FockConfig(64, 1, 1.0, 8)
    th = 0.2
    U = exponentiate(gen(cfg), th)
    a = build_annihilation(cfg)
    assert lowres(U, a, a * np.cosh(th) + a.dag * (sign * np.sinh(th)), 8) < 1e-8


def test_two_mode_bogoliubov_laws(two32):
    res = bogoliubov_reports(two32, 0.2)
    assert max(res.values()) < 1e-8


# -- functional calculus and domain ------------------------------------------

def test_fn_of_hermitian_polynomials(single128):
    x = build_position(single128)
    npt.assert_allclose(fn_of_hermitian(x, lambda t: t).entries, x.entries, atol=1e-11)
    sq = fn_of_hermitian(x, lambda t: t**2)
    npt.assert_allclose(project(sq, 8), project(x @ x, 8), atol=1e-11)


def test_fn_of_hermitian_domain(single128):
    x = build_position(single128)
    f = fn_of_hermitian(x, lambda t: (1 + 2 * 0.01 * t**2) ** -0.5)
    assert f.hermiticity_error() < 1e-12
    with pytest.raises(DomainError) as info:
        fn_of_hermitian(x, lambda t: np.log(t))
    assert info.value.eigenvalue is not None


def test_domain_guard_cases(single128):
    x = build_position(single128)
    lam = spectrum(x)[0]
    assert domain_guard(x, 3, 0.0)
    assert domain_guard(x, 2, 10.0, +1)
    assert not domain_guard(x, 1, -1.0 / lam.max(), +1)
    assert not domain_guard(x, 2, 0.01, -1, margin=0.99)


# -- closed forms ------------------------------------------------------------

def test_n0_closed_forms(two32):
    cfg = FockConfig(16, 1, 1.0, 4)
    x, p = build_position(cfg), build_momentum(cfg)
    npt.assert_allclose(closed_form_position((x, p), 0, 0.3).entries, np.exp(-0.3) * x.entries)
    npt.assert_allclose(closed_form_momentum((x, p), 0, 0.3).entries, np.exp(0.3) * p.entries)
    X, P, dx, dp = build_com_rel(two32)
    npt.assert_allclose(closed_form_position((X, P), 0, 0.3, COM_SIGN).entries, np.exp(0.3) * X.entries)
    npt.assert_allclose(closed_form_momentum((dx, dp), 0, 0.3, REL_SIGN).entries, np.exp(0.3) * dp.entries)


def test_translation_law():
    cfg = FockConfig(64, 1, 1.0, 8)
    x, p = build_position(cfg), build_momentum(cfg)
    U = exponentiate(build_L_single(cfg, -1), 0.4)
    assert lowres(U, x, closed_form_position((x, p), -1, 0.4), 8) < 1e-10
    assert lowres(U, p, closed_form_momentum((x, p), -1, 0.4), 8) < 1e-10


@pytest.mark.parametrize("n, theta", [(2, 0.01), (1, 0.02)])
def test_single_mode_laws(single128, n, theta):
    x, p = build_position(single128), build_momentum(single128)
    U = exponentiate(build_L_single(single128, n), theta)
    assert lowres(U, x, closed_form_position((x, p), n, theta), 8) < 1e-7
    assert lowres(U, p, closed_form_momentum((x, p), n, theta), 8) < 1e-7


def test_closed_form_domain_error(single128):
    x, p = build_position(single128), build_momentum(single128)
    with pytest.raises(DomainError):
        closed_form_position((x, p), 1, 0.5)


def test_transform_reports_flag_domain(single128):
    reports = transform_reports(single128, GeneratorSpec(1, 0.5), U=identity(single128))
    assert all(not r.domain_ok and not r.comparable for r in reports)


def test_canonical_pair_preserved(single128):
    x, p = build_position(single128), build_momentum(single128)
    U = exponentiate(build_L_single(single128, 2), 0.01)
    xt, pt = conjugate(U, x), conjugate(U, p)
    npt.assert_allclose(project(commutator(xt, pt), 8), 1j * np.eye(8), atol=1e-9)


# -- K / Omega ---------------------------------------------------------------

def test_k_omega_trivial_and_spectral(single128):
    x = build_position(single128)
    pair = k_omega(x, 2, 0.0)
    npt.assert_allclose(pair.K_op.entries, np.eye(128), atol=1e-12)
    npt.assert_allclose(pair.Omega_op.entries, 0, atol=1e-12)
    pair = k_omega(x, 2, 0.01)
    lam = spectrum(x)[0]
    kmin = spectrum(pair.K_op)[0].min()
    npt.assert_allclose(kmin, np.sqrt(1 + 0.02 * np.min(lam**2)), rtol=1e-10)
    assert kmin >= 1
    n0 = k_omega(x, 0, 0.3, COM_SIGN)
    npt.assert_allclose(n0.Omega_op.entries, 0.3 * np.eye(128))


def test_scalar_limit():
    theta = 0.4
    K, Om = scalar_k_omega(1e-6, theta, 1.0)
    npt.assert_allclose(K, np.sqrt(1 + 1e-6 * theta))
    npt.assert_allclose(np.exp(Om), np.exp(-theta), atol=1e-5)


# -- two-mode reconstructions --------------------------------------------------

def test_reconstruction_n0(two32, vb32):
    th = 0.2
    U = vb32(0, th)
    a1, a2 = build_annihilation(two32, 0), build_annihilation(two32, 1)
    r1, r2 = mode_reconstruction(two32, 0, th)
    assert lowres(U, a1, r1, 6) < 1e-8
    npt.assert_allclose(project(r1, 6), project(a1 * np.cosh(th) + a2.dag * np.sinh(th), 6), atol=1e-12)


def test_reconstruction_theta0(two32):
    r1, r2 = mode_reconstruction(two32, 2, 0.0)
    npt.assert_allclose(r1.entries, build_annihilation(two32, 0).entries, atol=1e-12)
    npt.assert_allclose(r2.entries, build_annihilation(two32, 1).entries, atol=1e-12)


@pytest.mark.parametrize("n, theta", [(2, 0.005), (1, 0.02)])
def test_reconstruction_nonlinear(two32, vb32, n, theta):
    U = vb32(n, theta)
    r = mode_reconstruction(two32, n, theta)
    rk = mode_reconstruction_komega(two32, n, theta)
    for mode in (0, 1):
        a = build_annihilation(two32, mode)
        assert lowres(U, a, r[mode], 6) < 1e-6
        assert lowres(U, a, rk[mode], 6) < 1e-6


def test_two_mode_residual_shrinks_with_dim(vb32, two32):
    spec = GeneratorSpec(1, 0.02, "virasoro_bogoliubov")
    small = FockConfig(16, 2, 1.0, 6)
    r16 = max(r.residual for r in transform_reports(small, spec))
    r32 = max(r.residual for r in transform_reports(two32, spec, U=vb32(1, 0.02)))
    assert r32 < r16
    assert r32 < 1e-5


def test_unitarity_of_two_mode(vb32):
    assert unitarity_error(vb32(2, 0.005)) < 1e-9


def test_unitarity_error_detects_nonunitary():
    cfg = FockConfig(8, 1, 1.0, 2)
    assert unitarity_error(identity(cfg) * 1.1) > 0.2
