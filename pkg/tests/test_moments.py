import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hardylab.errors import NumericalError
from hardylab.grid import Ball, GridFunction, GridSpec, restrict, sample_function
from hardylab.moments import (
    HardyIndex,
    PolyCoeffs,
    PolySpace,
    ball_measure,
    dual_norm_check,
    local_oscillation,
    match_moments_with_bump,
    moment,
    multiindices,
    poly_project,
    psi,
)


@given(dim=st.integers(1, 2), degree=st.integers(0, 5))
@settings(max_examples=30, deadline=None)
def test_polyspace_dimension(dim, degree):
    space = PolySpace(dim, degree)
    assert space.dimension == math.comb(degree + dim, dim)
    assert len(set(space.basis)) == space.dimension
    assert all(sum(a) <= degree for a in space.basis)


@pytest.mark.parametrize("p,dim,gamma,N,critical", [
    (1.0, 1, 0.0, 0, True),
    (1.0, 2, 0.0, 0, True),
    (2 / 3, 1, 0.5, 0, False),
    (0.5, 1, 1.0, 1, True),
    (1 / 3, 1, 2.0, 2, True),
    (0.5, 2, 2.0, 2, True),
    (0.8, 2, 0.5, 0, False),
])
def test_hardy_index(p, dim, gamma, N, critical):
    idx = HardyIndex(p, dim)
    assert idx.gamma_p == pytest.approx(gamma, abs=1e-12)
    assert idx.N_p == N
    assert idx.critical is critical


def test_hardy_index_rejects_bad_p():
    with pytest.raises(ValueError):
        HardyIndex(1.5, 1)
    with pytest.raises(ValueError):
        HardyIndex(0.0, 1)


def test_moment_even_bump_odd_order():
    spec = GridSpec(1, 4.0, 2048)
    f = sample_function(spec, lambda p: np.exp(-8 * p[0]**2))
    f = restrict(f, Ball((0.0,), 2.0))
    assert abs(moment(f, (0.0,), 1)) < 1e-10


def test_moment_indicator():
    spec = GridSpec(1, 4.0, 2048)
    r = 0.5
    f = GridFunction(spec, Ball((0.0,), r).mask(spec).astype(float))
    assert abs(moment(f, (0.0,), 0) - 2 * r) <= spec.cell_volume


def test_moment_matches_direct_summation():
    spec = GridSpec(1, 4.0, 512)
    rng = np.random.default_rng(0)
    f = restrict(GridFunction(spec, rng.normal(size=spec.shape)), Ball((0.0,), 2.0))
    x = spec.points()[0]
    for alpha in ((0,), (1,), (2,)):
        direct = float(np.sum(f.samples * (x - 0.3) ** alpha[0]) * spec.cell_volume)
        assert moment(f, (0.3,), alpha) == pytest.approx(direct, abs=1e-12)


def test_moment_rejects_boundary_support():
    spec = GridSpec(1, 4.0, 256)
    f = GridFunction(spec, np.ones(spec.shape))
    with pytest.raises(NumericalError, match="support escapes"):
        moment(f, (0.0,), 0)


def test_projection_recovers_polynomials():
    spec = GridSpec(1, 4.0, 2048)
    B = Ball((0.3,), 0.7)
    g = sample_function(spec, lambda p: 1.5 - 0.7 * (p[0] - 0.3) + 0.3 * (p[0] - 0.3) ** 2)
    pc = poly_project(restrict(g, B), B, 2)
    mask = B.mask(spec)
    err = np.max(np.abs(pc.evaluate(spec.points())[mask] - g.samples[mask]))
    assert err < 1e-9


def test_projection_order_zero_is_mean():
    spec = GridSpec(1, 4.0, 1024)
    rng = np.random.default_rng(1)
    f = GridFunction(spec, rng.normal(size=spec.shape))
    B = Ball((0.0,), 0.5)
    pc = poly_project(f, B, 0)
    assert pc.coeffs[0] == pytest.approx(f.samples[B.mask(spec)].mean(), abs=1e-13)


def gram_schmidt_projection(f: GridFunction, B: Ball, degree: int) -> np.ndarray:
    """Independent least-squares oracle via QR on the sampled monomials."""
    spec = f.spec
    mask = B.mask(spec)
    x = spec.points()
    cols = np.stack([(np.prod([(x[i] - B.center[i]) ** a
                               for i, a in enumerate(alpha)], axis=0))[mask]
                     for alpha in multiindices(spec.dim, degree)], axis=1)
    Q, _ = np.linalg.qr(cols)
    return Q @ (Q.T @ f.samples[mask])


def test_projection_matches_gram_schmidt_oracle():
    spec = GridSpec(1, 4.0, 2048)
    rng = np.random.default_rng(2)
    f = GridFunction(spec, rng.normal(size=spec.shape))
    B = Ball((-0.2,), 0.6)
    pc = poly_project(f, B, 2)
    mask = B.mask(spec)
    mine = pc.evaluate(spec.points())[mask]
    oracle = gram_schmidt_projection(f, B, 2)
    scale = np.max(np.abs(oracle)) + 1e-30
    assert np.max(np.abs(mine - oracle)) <= 1e-9 * scale


@given(seed=st.integers(0, 500), degree=st.integers(0, 2))
@settings(max_examples=25, deadline=None)
def test_moment_matching(seed, degree):
    spec = GridSpec(1, 2.0, 512)
    rng = np.random.default_rng(seed)
    f = GridFunction(spec, rng.normal(size=spec.shape))
    B = Ball((0.0,), 0.5)
    pc = poly_project(f, B, degree)
    mask = B.mask(spec)
    resid = np.zeros(spec.shape)
    resid[mask] = f.samples[mask] - pc.evaluate(spec.points())[mask]
    l2 = np.sqrt(np.sum(f.samples[mask] ** 2) * spec.cell_volume)
    x = spec.points()[0]
    for k in range(degree + 1):
        mom = abs(np.sum(resid[mask] * x[mask] ** k) * spec.cell_volume)
        assert mom <= 1e-9 * l2 * B.radius**k + 1e-15


def test_oscillation_constant_and_linear():
    spec = GridSpec(1, 1.0, 16384)
    const = GridFunction(spec, np.full(spec.shape, 2.7))
    B = Ball((0.0,), 0.25)
    assert local_oscillation(const, B, 0) <= 1e-12
    fx = sample_function(spec, lambda p: p[0])
    for r in (0.5, 0.25):
        osc = local_oscillation(fx, Ball((0.0,), r), 0)
        assert osc == pytest.approx(r / np.sqrt(3), rel=1e-3)


def test_oscillation_beats_random_competitors():
    spec = GridSpec(1, 4.0, 2048)
    rng = np.random.default_rng(3)
    f = GridFunction(spec, rng.normal(size=spec.shape))
    B = Ball((0.0,), 0.5)
    N = 1
    osc = local_oscillation(f, B, N)
    mask = B.mask(spec)
    x = spec.points()[0][mask]
    vol = int(mask.sum())
    for _ in range(200):
        c = rng.normal(size=N + 1)
        q = sum(ci * x**i for i, ci in enumerate(c))
        competitor = np.sqrt(np.sum((f.samples[mask] - q) ** 2) / vol)
        assert osc <= competitor + 1e-9


def test_oscillation_monotone_in_degree():
    spec = GridSpec(1, 4.0, 2048)
    rng = np.random.default_rng(4)
    f = GridFunction(spec, rng.normal(size=spec.shape))
    B = Ball((0.0,), 0.6)
    oscs = [local_oscillation(f, B, N) for N in range(4)]
    assert all(b <= a + 1e-12 for a, b in zip(oscs, oscs[1:]))


def test_projection_needs_enough_points():
    spec = GridSpec(1, 4.0, 256)
    f = GridFunction(spec, np.ones(spec.shape))
    with pytest.raises(NumericalError):
        poly_project(f, Ball((0.0,), 1.5 * spec.spacing), 4)


def test_psi_values():
    idx1 = HardyIndex(1.0, 1)
    assert psi(idx1, 0, 0.5) == pytest.approx(1.0 / math.log(3.0), rel=1e-12)
    idxh = HardyIndex(0.5, 1)
    assert psi(idxh, 0, 0.37) == pytest.approx(0.37)  # below the critical order
    assert psi(idxh, 1, 0.25) == pytest.approx(0.25 / math.log(5.0) ** 2, rel=1e-12)


def test_psi_limits():
    idx1 = HardyIndex(1.0, 1)
    idxh = HardyIndex(0.5, 1)
    ts = [10.0**-k for k in range(1, 9)]
    crit = [psi(idx1, 0, t) for t in ts]
    assert all(b < a for a, b in zip(crit, crit[1:])) and crit[-1] < 1e-1
    sub = [psi(idxh, 0, t) for t in ts]
    assert sub[-1] < 1e-7
    # critical branch is strictly below the power envelope
    assert all(psi(idxh, 1, t) / t < 0.25 for t in ts)


def test_psi_rejects_out_of_range_orders():
    idx23 = HardyIndex(2 / 3, 1)  # gamma = 1/2, not an integer
    with pytest.raises(ValueError):
        psi(idx23, 1, 0.5)
    with pytest.raises(ValueError):
        psi(HardyIndex(1.0, 1), 1, 0.5)
    with pytest.raises(ValueError):
        psi(HardyIndex(1.0, 1), 0, 1.5)


def test_dual_norm_polynomial_gives_zero():
    spec = GridSpec(1, 4.0, 1024)
    f = sample_function(spec, lambda p: 1.0 + 2.0 * p[0])
    lhs, rhs = dual_norm_check(f, Ball((0.0,), 0.5), 1, trials=10, seed=0)
    assert lhs <= 1e-9 and rhs <= 1e-9


def test_dual_norm_deterministic_candidate():
    spec = GridSpec(1, 4.0, 1024)
    rng = np.random.default_rng(5)
    for seed in range(10):
        f = GridFunction(spec, np.random.default_rng(seed).normal(size=spec.shape))
        lhs, rhs = dual_norm_check(f, Ball((0.0,), 0.5), 1, trials=0)
        assert abs(lhs - rhs) <= 1e-9
        lhs2, rhs2 = dual_norm_check(f, Ball((0.0,), 0.5), 1, trials=20, seed=seed)
        assert lhs2 <= rhs2 + 1e-9


def test_dual_norm_monte_carlo_lower_bound():
    from hardylab.moments import _smooth_noise_on_ball

    spec = GridSpec(1, 4.0, 1024)
    B = Ball((0.0,), 0.5)
    rng = np.random.default_rng(11)
    f = GridFunction(spec, _smooth_noise_on_ball(spec, B, rng))
    lhs, rhs = dual_norm_check(f, B, 1, trials=500, seed=99, include_deterministic=False)
    assert lhs / rhs >= 0.5


def test_moment_scale_covariance():
    spec = GridSpec(1, 8.0, 4096)

    def profile(p, s=1.0):
        return s**-1 * np.clip(1.0 - (p[0] / (3 * s)) ** 2, 0.0, None) ** 3

    base = sample_function(spec, profile)
    s = 2.0
    scaled = sample_function(spec, lambda p: profile(p, s))
    for alpha in ((0,), (2,)):
        lhs = moment(scaled, (0.0,), alpha)
        rhs = s ** alpha[0] * moment(base, (0.0,), alpha)
        assert lhs == pytest.approx(rhs, rel=1e-8)


def test_match_moments_with_bump():
    from hardylab.atoms import edge_cutoff

    spec = GridSpec(1, 4.0, 2048)
    B = Ball((0.0,), 0.5)
    bump = edge_cutoff(spec, B)
    targets = np.array([0.7, -0.2])
    q = match_moments_with_bump(spec, B, 1, bump, targets)
    assert moment(q, (0.0,), 0) == pytest.approx(0.7, abs=1e-12)
    assert moment(q, (0.0,), 1) == pytest.approx(-0.2, abs=1e-12)
    assert np.all(q.samples[~B.mask(spec)] == 0)


def test_ball_measure_is_discrete():
    spec = GridSpec(1, 4.0, 256)
    B = Ball((0.0,), 0.5)
    assert ball_measure(spec, B) == B.mask(spec).sum() * spec.cell_volume


def test_polycoeffs_text_roundtrip():
    spec = GridSpec(2, 2.0, 64)
    rng = np.random.default_rng(6)
    f = GridFunction(spec, rng.normal(size=spec.shape))
    B = Ball((0.1, -0.2), 0.8)
    pc = poly_project(f, B, 2)
    back = PolyCoeffs.from_text(pc.to_text())
    assert back.space == pc.space
    assert back.center == pc.center
    assert np.allclose(back.coeffs, pc.coeffs, rtol=0, atol=0)
