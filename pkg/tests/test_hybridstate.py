import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sagnacsim import polarization as pol
from sagnacsim.errors import DomainError, GridMismatchError, NoFringeError, UndefinedAngleError
from sagnacsim.hybridstate import (
    DelayChirpParams,
    FacetReflection,
    HybridState,
    apply_delay_chirp,
    estimate_fringe_angle,
    fidelity_bound_vs_reflectivity,
    fringe_angle_analytic,
    polarization_density_matrix,
    polarization_resolved_jsi,
    project_polarization,
    singlet_fidelity,
)
from sagnacsim.jsa import FrequencyGrid, JointSpectralAmplitude, inner_product, chip_jsa

FIG2 = DelayChirpParams(tau_s=300.0, tau_i=-300.0)
delays = st.floats(-1500, 1500, allow_nan=False)
chirps = st.floats(-2e4, 2e4, allow_nan=False)
params_strategy = st.builds(DelayChirpParams, delays, delays, delays, chirps, chirps, chirps)


def _tiny_jsa(seed=0, n=16):
    rng = np.random.default_rng(seed)
    grid = FrequencyGrid(1.2, 1.21, 0.01, 0.012, n, n)
    values = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return JointSpectralAmplitude.from_values(grid, values)


def test_zero_params_identity(small_jsa):
    out = apply_delay_chirp(small_jsa, DelayChirpParams())
    assert np.array_equal(out.values, small_jsa.values)


def test_delay_keeps_modulus(small_jsa):
    out = apply_delay_chirp(small_jsa, FIG2)
    assert np.allclose(np.abs(out.values), np.abs(small_jsa.values), rtol=1e-14, atol=0)


def test_delay_phase_gradient_is_antidiagonal(small_jsa):
    out = apply_delay_chirp(small_jsa, FIG2)
    g = small_jsa.grid
    ds, di = g.detuning_mesh()
    expected = np.exp(1j * 300.0 * (ds - di))
    assert np.allclose(out.values, small_jsa.values * expected, atol=1e-13)


@settings(max_examples=30, deadline=None)
@given(params_strategy)
def test_inverse_params_undo(small_jsa, p):
    back = apply_delay_chirp(apply_delay_chirp(small_jsa, p), -p)
    assert np.max(np.abs(back.values - small_jsa.values)) < 1e-12


def test_bad_reference_rejected(small_jsa):
    with pytest.raises(GridMismatchError):
        apply_delay_chirp(small_jsa, FIG2, reference=(1.0, float("nan")))


def test_state_needs_common_grid(small_jsa):
    other = _tiny_jsa()
    with pytest.raises(GridMismatchError):
        HybridState(small_jsa, other)


def test_state_needs_normalised_amplitudes(small_jsa):
    with pytest.raises(DomainError):
        HybridState(small_jsa, small_jsa.with_values(2 * small_jsa.values))


def test_singlet_projections(small_jsa):
    state = HybridState.from_jsa(small_jsa)
    assert project_polarization(state, "D", "D")[1] < 1e-9
    assert project_polarization(state, "D", "A")[1] == pytest.approx(0.5, abs=1e-9)
    assert project_polarization(state, "H", "V")[1] == pytest.approx(0.5, abs=1e-9)


def test_projection_matches_four_level_oracle(small_jsa):
    state = HybridState.from_jsa(small_jsa)
    for a in "HVDARL":
        for b in "HVDARL":
            v = np.kron(pol.KETS[a], pol.KETS[b])
            expected = abs(np.vdot(v, pol.PSI_MINUS)) ** 2
            assert project_polarization(state, a, b)[1] == pytest.approx(expected, abs=1e-9)


def test_hv_probability_independent_of_delays(small_jsa):
    state = HybridState.from_jsa(small_jsa, FIG2)
    assert project_polarization(state, "H", "V")[1] == pytest.approx(0.5, abs=1e-12)


def test_unnormalised_analyzer_rejected(small_jsa):
    state = HybridState.from_jsa(small_jsa)
    with pytest.raises(DomainError):
        project_polarization(state, [1.0, 1.0], "H")


@settings(max_examples=30, deadline=None)
@given(params_strategy, st.floats(0, 2 * math.pi))
def test_no_hh_or_vv(small_jsa, p, phase):
    state = HybridState.from_jsa(small_jsa, p, phase)
    assert project_polarization(state, "H", "H")[1] < 1e-12
    assert project_polarization(state, "V", "V")[1] < 1e-12


@settings(max_examples=20, deadline=None)
@given(params_strategy, st.sampled_from([("H", "V"), ("D", "A"), ("R", "L")]))
def test_probability_completeness(small_jsa, p, basis):
    state = HybridState.from_jsa(small_jsa, p)
    total = sum(project_polarization(state, a, b)[1] for a in basis for b in basis)
    assert total == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=20, deadline=None)
@given(params_strategy)
def test_rectilinear_jsis_ignore_delays(small_jsa, p):
    state = HybridState.from_jsa(small_jsa, p)
    base = np.abs(small_jsa.values) ** 2
    assert np.allclose(polarization_resolved_jsi(state, "H", "V"), 0.5 * base, rtol=1e-12, atol=1e-300)
    assert np.allclose(polarization_resolved_jsi(state, "V", "H"), 0.5 * base, rtol=1e-12, atol=1e-300)


def test_jsi_integrates_to_probability(small_jsa):
    state = HybridState.from_jsa(small_jsa, FIG2)
    amp, prob = project_polarization(state, "D", "D")
    assert np.sum(polarization_resolved_jsi(state, "D", "D")) * small_jsa.grid.cell == pytest.approx(prob)
    assert prob > 0.01


def test_zero_delay_dd_jsi_vanishes(small_jsa):
    state = HybridState.from_jsa(small_jsa)
    assert np.max(polarization_resolved_jsi(state, "D", "D")) < 1e-9


def test_fringe_angle_examples():
    assert fringe_angle_analytic(FIG2) == pytest.approx(-math.pi / 4)
    assert fringe_angle_analytic(DelayChirpParams(tau_p=123.0)) == pytest.approx(math.pi / 4)
    assert fringe_angle_analytic(DelayChirpParams(tau_s=300.0)) == 0.0


def test_fringe_angle_vertical_cases():
    assert fringe_angle_analytic(DelayChirpParams(tau_i=200.0)) == math.pi / 2
    # orientation is defined modulo pi, so both signs fold onto +pi/2
    assert fringe_angle_analytic(DelayChirpParams(tau_i=-200.0)) == math.pi / 2


def test_fringe_angle_undefined():
    with pytest.raises(UndefinedAngleError):
        fringe_angle_analytic(DelayChirpParams(tau_p=100.0, tau_s=-100.0, tau_i=-100.0))


def test_estimator_on_synthetic_fringes():
    n = 128
    x = np.arange(n)
    xs, xi = np.meshgrid(x, x, indexing="ij")
    k = 2 * math.pi / 9.0
    theta = math.radians(30.0)
    grid = 1 + np.cos(k * (math.cos(theta) * xs + math.sin(theta) * xi))
    assert math.degrees(estimate_fringe_angle(grid)) == pytest.approx(30.0, abs=2.0)


def test_estimator_on_fig2_spectrum(unfiltered_jsa):
    state = HybridState.from_jsa(unfiltered_jsa, FIG2)
    g = unfiltered_jsa.grid
    dd = polarization_resolved_jsi(state, "D", "D")
    hv = polarization_resolved_jsi(state, "H", "V")
    est = estimate_fringe_angle(dd, (g.d_signal, g.d_idler), reference=hv)
    assert math.degrees(est) == pytest.approx(math.degrees(fringe_angle_analytic(FIG2)), abs=2.0)


def test_chirped_fringes_rotate_across_the_grid(unfiltered_jsa):
    params = DelayChirpParams(tau_s=300.0, tau_i=-300.0, chirp_p=5800.0)
    state = HybridState.from_jsa(unfiltered_jsa, params)
    g = unfiltered_jsa.grid
    dd = polarization_resolved_jsi(state, "D", "D")
    hv = polarization_resolved_jsi(state, "H", "V")
    # the pump chirp delays high-sum frequencies more: upper-right vs lower-left
    h = g.n_signal // 2
    low = estimate_fringe_angle(dd[:h, :h], (g.d_signal, g.d_idler), reference=hv[:h, :h])
    high = estimate_fringe_angle(dd[h:, h:], (g.d_signal, g.d_idler), reference=hv[h:, h:])
    assert abs(math.degrees(low - high)) > 5.0


def test_estimator_rejects_flat_and_empty_grids(small_jsa):
    with pytest.raises(NoFringeError):
        estimate_fringe_angle(np.ones((32, 32)))
    state = HybridState.from_jsa(small_jsa)
    with pytest.raises(NoFringeError):
        estimate_fringe_angle(polarization_resolved_jsi(state, "D", "D"),
                              reference=polarization_resolved_jsi(state, "H", "V"))


def test_density_matrix_ideal_is_singlet(small_jsa):
    rho = polarization_density_matrix(HybridState.from_jsa(small_jsa))
    assert np.allclose(rho, np.outer(pol.PSI_MINUS, pol.PSI_MINUS.conj()), atol=1e-12)


def test_density_matrix_orthogonal_paths():
    f = _tiny_jsa(1)
    # Gram-Schmidt a second amplitude orthogonal to f
    g = _tiny_jsa(2)
    gv = g.values - inner_product(f, g) * f.values
    g = JointSpectralAmplitude.from_values(f.grid, gv)
    rho = polarization_density_matrix(HybridState(f, g))
    assert singlet_fidelity(rho) == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_density_matrix_matches_brute_force(seed):
    f_c = _tiny_jsa(seed)
    f_cc = _tiny_jsa(seed + 10)
    phase = 0.7 + seed
    state = HybridState(f_c, f_cc, phase)
    rho = polarization_density_matrix(state)
    psi = np.zeros((2, 2) + f_c.grid.shape, dtype=complex)
    psi[0, 1] = f_cc.values / math.sqrt(2)
    psi[1, 0] = np.exp(1j * phase) * f_c.values / math.sqrt(2)
    flat = psi.reshape(4, -1)
    brute = flat @ flat.conj().T * f_c.grid.cell
    assert np.allclose(rho, brute, atol=1e-12)
    if seed == 0:
        pi_state = HybridState(f_c, f_cc)
        expected = (1 + inner_product(f_c, f_cc).real) / 2
        assert singlet_fidelity(polarization_density_matrix(pi_state)) == pytest.approx(expected, abs=1e-9)


def test_density_matrix_with_reflection_is_physical(small_jsa):
    state = HybridState.from_jsa(small_jsa, FIG2)
    rho = polarization_density_matrix(state, FacetReflection(0.05, 0.02))
    assert np.allclose(rho, rho.conj().T, atol=1e-12)
    assert np.trace(rho).real == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.eigvalsh(rho).min() > -1e-12


def test_reflection_fidelity_chip1(small_jsa):
    rho = polarization_density_matrix(HybridState.from_jsa(small_jsa), FacetReflection(0.02))
    assert singlet_fidelity(rho) == pytest.approx(0.96, abs=2e-3)


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 0.99))
def test_bound_matches_density_matrix(small_jsa, R):
    rho = polarization_density_matrix(HybridState.from_jsa(small_jsa), FacetReflection(R))
    assert fidelity_bound_vs_reflectivity(R) == pytest.approx(singlet_fidelity(rho), abs=1e-12)


def test_bound_curve():
    r = np.linspace(0, 0.1, 100)
    f = fidelity_bound_vs_reflectivity(r)
    assert f[0] == 1.0
    assert np.all(np.diff(f) <= 0)
    assert fidelity_bound_vs_reflectivity(0.02) == pytest.approx(0.9608)


def test_bound_domain():
    for bad in (-0.1, 1.0, float("nan")):
        with pytest.raises(DomainError):
            fidelity_bound_vs_reflectivity(bad)
    with pytest.raises(DomainError):
        FacetReflection(1.0)
