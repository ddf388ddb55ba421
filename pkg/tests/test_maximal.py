import numpy as np
import pytest

from hardylab.errors import NumericalError
from hardylab.grid import Ball, GridFunction, GridSpec, integrate, sample_function
from hardylab.grid import _lp_impl
from hardylab.maximal import (
    MollifierSpec,
    ScaleGrid,
    TestDictionary,
    build_phi0,
    build_test_dictionary,
    cutoff_eta,
    grand_maximal,
    hp_norm,
    hp_norm_global,
    phi_x_alpha,
    small_maximal,
    verify_admissible,
)
from hardylab.moments import HardyIndex, moment

IDX1 = HardyIndex(1.0, 1)
IDXH = HardyIndex(0.5, 1)


@pytest.fixture(scope="module")
def grid():
    return GridSpec(1, 4.0, 2048)


@pytest.fixture(scope="module")
def scales(grid):
    return ScaleGrid.default(grid, 1.0)


def test_mollifier_integrals():
    for dim in (1, 2):
        spec = GridSpec(dim, 8.0 if dim == 1 else 4.0, 2048 if dim == 1 else 256)
        for shape in ("gaussian", "smooth-bump"):
            mol = MollifierSpec(shape, dim)
            val = integrate(sample_function(spec, mol))
            assert val == pytest.approx(1.0, abs=1e-4)
            assert abs(mol.integral) >= 0.5


def test_scale_grid_validation(grid):
    with pytest.raises(ValueError):
        ScaleGrid(tuple(np.linspace(0.1, 1.0, 8)))  # too few
    with pytest.raises(ValueError):
        ScaleGrid(tuple([0.5] * 20))  # not increasing
    sg = ScaleGrid.default(grid, 1.0)
    assert sg.t_min >= 2 * grid.spacing
    assert len(sg.scales) >= 16
    ratios = np.diff(np.log(sg.scales))
    assert np.max(ratios) <= np.log(2.0**0.25) + 1e-12


def test_small_maximal_mollification_floor(grid, scales):
    mol = MollifierSpec("gaussian", 1)
    f = sample_function(grid, lambda p: np.exp(-4 * p[0] ** 2))
    sm = small_maximal(f, mol, scales)
    core = np.abs(grid.axis()) < 1.0
    assert np.all(sm.samples[core] >= 0.9 * abs(mol.integral) * f.samples[core])


def test_small_maximal_homogeneity(grid, scales):
    mol = MollifierSpec("gaussian", 1)
    rng = np.random.default_rng(0)
    f = GridFunction(grid, rng.normal(size=grid.shape))
    a = small_maximal(f, mol, scales)
    b = small_maximal(-2.5 * f, mol, scales)
    scale = np.max(a.samples)
    assert np.max(np.abs(b.samples - 2.5 * a.samples)) <= 1e-13 * scale


def test_small_maximal_scale_refinement(grid, scales):
    mol = MollifierSpec("gaussian", 1)
    f = sample_function(grid, lambda p: np.exp(-2 * p[0] ** 2) * (1 + 0.5 * np.sin(3 * p[0])))
    base = small_maximal(f, mol, scales)
    fine = small_maximal(f, mol, ScaleGrid(
        tuple(np.geomspace(scales.t_min, scales.t_max, 2 * len(scales.scales)))))
    rel = (integrate(fine.abs()) - integrate(base.abs())) / integrate(base.abs())
    assert 0 <= rel <= 0.02  # refinement only increases, and by little


def test_small_maximal_translation_covariance(grid, scales):
    # compactly supported mollifier and input, so the padded convolution never
    # feels the wrap seam and covariance is exact up to summation roundoff
    mol = MollifierSpec("smooth-bump", 1)
    f = sample_function(grid, lambda p: np.clip(1 - (p[0] / 0.5) ** 2, 0, None) ** 3)
    shift = 64  # whole cells
    gshift = GridFunction(grid, np.roll(f.samples, shift))
    a = small_maximal(f, mol, scales)
    b = small_maximal(gshift, mol, scales)
    assert np.max(np.abs(np.roll(a.samples, shift) - b.samples)) < 1e-13


def test_hp_norm_basics(grid, scales):
    mol = MollifierSpec("gaussian", 1)
    zero = GridFunction(grid, np.zeros(grid.shape))
    assert hp_norm(zero, IDX1, mol, scales) == 0.0
    f = sample_function(grid, lambda p: np.exp(-4 * p[0] ** 2))
    assert hp_norm(3.0 * f, IDX1, mol, scales) == pytest.approx(
        3.0 * hp_norm(f, IDX1, mol, scales), rel=1e-12)


def test_hp_norm_uniform_over_atom_seeds(grid, scales):
    from hardylab.atoms import AtomSpec, make_atom

    mol = MollifierSpec("gaussian", 1)
    spec_a = AtomSpec(IDX1, np.inf, Ball((0.0,), 0.25), "local")
    vals = [hp_norm(make_atom(spec_a, seed, grid), IDX1, mol, scales)
            for seed in range(50)]
    assert max(vals) / min(vals) <= 20.0


def test_global_norm_dominates_and_flags(grid, scales):
    mol = MollifierSpec("gaussian", 1)
    f = sample_function(grid, lambda p: (np.abs(p[0]) < 0.25).astype(float))
    local = hp_norm(f, IDX1, mol, scales)
    v1, fl1 = hp_norm_global(f, IDX1, mol, t_max=1.0)
    v2, fl2 = hp_norm_global(f, IDX1, mol, t_max=2.0)
    assert fl1 and fl2  # no cancellation
    assert v1 >= local - 1e-12
    assert v2 > v1  # truncated value grows without cancellation


def test_global_norm_stable_for_cancelling_atoms(grid):
    from hardylab.atoms import AtomSpec, make_atom

    mol = MollifierSpec("gaussian", 1)
    a = make_atom(AtomSpec(IDX1, 2.0, Ball((0.0,), 0.25), "global"), 0, grid)
    v1, fl1 = hp_norm_global(a, IDX1, mol, t_max=1.0)
    v2, fl2 = hp_norm_global(a, IDX1, mol, t_max=2.0)
    assert not fl1 and not fl2
    assert abs(v2 - v1) <= 0.10 * v1


def test_cutoff_profile_shape():
    s = np.linspace(0, 3, 301)
    vals = cutoff_eta(s)
    assert np.all(vals[s <= 1.5] == 1.0)
    assert np.all(vals[s >= 2.0] == 0.0)
    assert np.all(np.diff(vals) <= 1e-12)


def test_phi0_alpha_zero():
    bump = build_phi0((1.0,), (0,), IDX1)
    assert bump.integral > 0
    assert not bump.fallback
    # equals C on |y| < 1 where the cutoff is identically 1
    y = np.linspace(-0.99, 0.99, 199)[None, :]
    assert np.max(np.abs(bump(y) - bump.c_alpha)) == 0.0


def test_phi0_derivative_certification_margins():
    bump = build_phi0((1.0,), (1,), IDXH)
    assert abs(bump.integral) >= 1e-4
    for beta, measured, bound in bump.certification:
        assert sum(beta) <= IDXH.N_p + 1
        assert 1.0 - measured / bound >= 0.05


def test_phi0_monomial_reproduction():
    bump = build_phi0((-1.0,), (1,), IDXH)
    y = np.linspace(-0.99, 0.99, 199)[None, :]
    assert np.max(np.abs(bump(y) - bump.c_alpha * y[0])) == 0.0


def test_phi0_degenerate_case_raises():
    # mixed monomial with a perpendicular direction: the radial cutoff kills
    # the moment and the constrained fallback cannot reach the integral floor
    with pytest.raises(NumericalError, match="degenerate phi0"):
        build_phi0((1.0, 0.0), (1, 1), HardyIndex(0.5, 2))


def test_phi_x_alpha_support_and_formula():
    for xv in (0.3, -0.2):
        probe = phi_x_alpha((xv,), (0,), IDX1)
        t = probe.scale
        assert t == pytest.approx(4 * abs(xv))
        # support inside B(x, 4|x|), sampled
        y = np.linspace(xv - 2 * t, xv + 2 * t, 2001)[None, :]
        vals = probe(y)
        outside = np.abs(y[0] - xv) > t * (1 + 1e-9)
        assert np.max(np.abs(vals[outside]), initial=0.0) == 0.0
        # monomial region: phi(y) = C y^a / ((2|x|)^|a| |x|^n) for |y| < |x|
        yy = np.linspace(-abs(xv) * 0.99, abs(xv) * 0.99, 101)[None, :]
        expected = probe.phi0.c_alpha / abs(xv)
        assert np.max(np.abs(probe(yy) - expected)) < 1e-14


def test_phi_x_alpha_admissible_for_random_sites():
    rng = np.random.default_rng(42)
    for idx, alpha in ((IDX1, (0,)), (IDXH, (1,))):
        for _ in range(10):
            xv = float(rng.uniform(0.05, 0.45)) * (1 if rng.random() < 0.5 else -1)
            probe = phi_x_alpha((xv,), alpha, idx)
            rep = verify_admissible(probe, k=idx.N_p + 1, t=probe.scale, x=(xv,))
            assert rep.passed, rep.to_text()


def test_verify_admissible_detects_violation():
    mol = MollifierSpec("smooth-bump", 1)
    t = 0.5
    from hardylab.maximal import _mollifier_amplitude

    amp = _mollifier_amplitude(mol, 1)

    def entry(pts):
        return amp * t**-1 * mol(pts / t)

    rep = verify_admissible(entry, k=1, t=t, x=(0.0,))
    assert rep.passed
    rep2 = verify_admissible(lambda pts: 2.0 * entry(pts), k=1, t=t, x=(0.0,))
    assert not rep2.passed

    # an entry normalized to saturate the sup bound fails it when doubled
    sup = 1.0 / float(mol(np.zeros((1, 1)))[0])

    def saturating(pts):
        return 0.99 * sup * t**-1 * mol(pts / t)

    rep3 = verify_admissible(saturating, k=0, t=t, x=(0.0,))
    assert rep3.passed
    rep4 = verify_admissible(lambda pts: 2.0 * saturating(pts), k=0, t=t, x=(0.0,))
    assert not rep4.rows[0].passed  # the order-zero bound breaks


def test_grand_maximal_matches_scaled_small_maximal(grid, scales):
    mol = MollifierSpec("smooth-bump", 1)
    dct = build_test_dictionary(grid, IDX1, T=1.0, mollifier=mol, scales=scales)
    f = sample_function(grid, lambda p: np.exp(-2 * p[0] ** 2))
    gm = grand_maximal(f, dct)
    sm = small_maximal(f, mol, scales)
    amp = dct.entries[0].amplitude
    assert np.max(np.abs(gm.samples - amp * sm.samples)) == 0.0
    zero = GridFunction(grid, np.zeros(grid.shape))
    assert np.all(grand_maximal(zero, dct).samples == 0.0)


def test_grand_maximal_monotone_in_dictionary(grid, scales):
    mol = MollifierSpec("smooth-bump", 1)
    small_dct = build_test_dictionary(grid, IDX1, T=1.0, mollifier=mol, scales=scales)
    big = TestDictionary(small_dct.k, 2.0, IDX1, list(small_dct.entries))
    extra = build_test_dictionary(grid, IDX1, T=2.0, mollifier=mol,
                                  scales=ScaleGrid.default(grid, 2.0))
    big.entries.extend(extra.entries)
    rng = np.random.default_rng(1)
    f = GridFunction(grid, rng.normal(size=grid.shape))
    a = grand_maximal(f, small_dct)
    b = grand_maximal(f, big)
    assert np.all(b.samples >= a.samples - 1e-15)


def test_grand_maximal_sublinear(grid, scales):
    mol = MollifierSpec("smooth-bump", 1)
    dct = build_test_dictionary(grid, IDX1, T=1.0, mollifier=mol, scales=scales)
    rng = np.random.default_rng(2)
    f = GridFunction(grid, rng.normal(size=grid.shape))
    g = GridFunction(grid, rng.normal(size=grid.shape))
    lhs = grand_maximal(f + g, dct)
    rhs = grand_maximal(f, dct) + grand_maximal(g, dct)
    assert np.all(lhs.samples <= rhs.samples + 1e-12)


def test_grand_maximal_probe_lower_bound(grid):
    # with the explicit probes in the dictionary, the grand maximal function
    # at the probe sites dominates the rescaled moment exactly
    r = 0.25
    g = sample_function(grid, lambda p: (np.abs(p[0]) < r).astype(float))
    sites = ((0.2,), (0.3,), (0.45,))
    dct = build_test_dictionary(grid, IDX1, T=2.0, probe_alphas=((0,),),
                                probe_sites=sites)
    gm = grand_maximal(g, dct)
    m0 = moment(g, (0.0,), (0,))
    for (xv,) in sites:
        probe = phi_x_alpha((xv,), (0,), IDX1)
        claimed = probe.phi0.c_alpha * abs(xv) ** -1 * abs(m0)
        i = int(round((xv + grid.half_width) / grid.spacing))
        assert gm.samples[i] >= claimed - 1e-12


def test_dictionary_manifest(grid, scales):
    dct = build_test_dictionary(grid, IDX1, T=1.0, scales=scales,
                                probe_alphas=((0,),), probe_sites=((0.25,),))
    text = dct.manifest()
    lines = text.strip().splitlines()
    assert lines[0].startswith("# test dictionary")
    assert sum("mollifier-copy" in ln for ln in lines) == len(scales.scales)
    assert sum("moment-probe" in ln for ln in lines) == 1


def test_dictionary_requires_compact_mollifier(grid, scales):
    with pytest.raises(ValueError, match="compact"):
        build_test_dictionary(grid, IDX1, T=1.0,
                              mollifier=MollifierSpec("gaussian", 1), scales=scales)
