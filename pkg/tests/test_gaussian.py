import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from squeezelab.errors import InvalidArgument, PhysicalityError
from squeezelab.gaussian import (
    GaussianState,
    QuadratureCombination,
    apply_beam_splitter,
    apply_loss,
    apply_phase_rotation,
    beam_splitter_symplectic,
    duan_simon,
    epr_combinations,
    measured_covariance,
    phase_rotation_symplectic,
    quadrature_variance,
    squeezed_thermal_state,
    symplectic_form,
    tensor_product,
    vacuum_state,
)

from conftest import physical_states

V_MINUS = 0.8885
V_PLUS = 1.1404


def symplectic_from_unitary(u):
    """Oracle: real symplectic of a passive linear-optics unitary acting on ``a``.

    ``a' = U a`` with ``x = a + a^dag``, ``p = -i (a - a^dag)`` gives, in
    ``(x..., p...)`` ordering, ``[[Re U, -Im U], [Im U, Re U]]``; permuted here
    to interleaved ordering.
    """
    n = u.shape[0]
    blk = np.block([[u.real, -u.imag], [u.imag, u.real]])
    perm = np.ravel(np.column_stack([np.arange(n), np.arange(n) + n]))
    return blk[np.ix_(perm, perm)]


def epr_state(v_minus=V_MINUS, v_plus=V_PLUS):
    s = tensor_product(
        squeezed_thermal_state(v_minus, v_plus, np.pi / 2),
        squeezed_thermal_state(v_minus, v_plus, np.pi / 2),
    )
    s = apply_phase_rotation(s, 0, np.pi / 2)
    return apply_beam_splitter(s, 0, 1, 0.5)


def test_vacuum():
    assert np.array_equal(vacuum_state(1).cov, np.eye(2))
    assert np.array_equal(vacuum_state(2).cov, np.eye(4))
    assert np.array_equal(vacuum_state(2).mean, np.zeros(4))
    assert duan_simon(vacuum_state(2)) == 2.0


@pytest.mark.parametrize("n", [0, -1, 1.5])
def test_vacuum_rejects_bad_mode_count(n):
    with pytest.raises(InvalidArgument):
        vacuum_state(n)


def test_state_is_immutable():
    s = vacuum_state(1)
    with pytest.raises(ValueError):
        s.cov[0, 0] = 2.0


def test_asymmetric_covariance_rejected():
    with pytest.raises(InvalidArgument):
        GaussianState(np.zeros(2), np.array([[1.0, 0.1], [0.0, 1.0]]))


def test_squeezed_thermal_examples():
    assert squeezed_thermal_state(1, 1, 0.37).allclose(vacuum_state(1), atol=1e-15)
    s = squeezed_thermal_state(V_MINUS, V_PLUS, np.pi / 2)
    assert s.cov[1, 1] == pytest.approx(V_MINUS, abs=1e-15)
    assert s.cov[0, 0] == pytest.approx(V_PLUS, abs=1e-15)
    pure = squeezed_thermal_state(0.5, 2.0, 0.0)
    assert np.allclose(pure.cov, np.diag([0.5, 2.0]))
    assert pure.symplectic_eigenvalues() == pytest.approx([1.0], abs=1e-12)


def test_squeezed_thermal_variance_along_angle():
    theta = 0.7
    s = squeezed_thermal_state(0.6, 2.5, theta)
    c = np.array([np.cos(theta), np.sin(theta)])
    c_perp = np.array([-np.sin(theta), np.cos(theta)])
    assert quadrature_variance(s, c) == pytest.approx(0.6, abs=1e-14)
    assert quadrature_variance(s, c_perp) == pytest.approx(2.5, abs=1e-14)


def test_squeezed_thermal_errors():
    with pytest.raises(InvalidArgument):
        squeezed_thermal_state(0.0, 1.0, 0)
    with pytest.raises(InvalidArgument):
        squeezed_thermal_state(-1.0, 1.0, 0)
    with pytest.raises(PhysicalityError):
        squeezed_thermal_state(0.5, 1.5, 0)


def test_phase_rotation_examples():
    s = squeezed_thermal_state(0.5, 2.0, 0.0)
    assert apply_phase_rotation(s, 0, 0.0).allclose(s, atol=0)
    p_sq = apply_phase_rotation(s, 0, np.pi / 2)
    assert np.allclose(p_sq.cov, np.diag([2.0, 0.5]), atol=1e-15)
    assert apply_phase_rotation(s, 0, 2 * np.pi).allclose(s, atol=1e-12)
    with pytest.raises(InvalidArgument):
        apply_phase_rotation(s, 1, 0.1)


def test_beam_splitter_matches_unitary_oracle():
    for T in (0.0, 0.3, 0.5, 1.0):
        t, r = np.sqrt(T), np.sqrt(1 - T)
        u = np.array([[t, r], [-r, t]], dtype=complex)
        assert np.allclose(beam_splitter_symplectic(2, 0, 1, T), symplectic_from_unitary(u), atol=1e-15)
    phi = 0.9
    u = np.diag([np.exp(1j * phi), 1.0])
    assert np.allclose(phase_rotation_symplectic(2, 0, phi), symplectic_from_unitary(u), atol=1e-15)


def test_beam_splitter_examples():
    s = epr_state()
    assert apply_beam_splitter(s, 0, 1, 1.0).allclose(s, atol=0)
    vac = vacuum_state(2)
    for T in (0.0, 0.2, 0.5, 0.9):
        assert apply_beam_splitter(vac, 0, 1, T).allclose(vac, atol=1e-15)
    with pytest.raises(InvalidArgument):
        apply_beam_splitter(vac, 0, 0, 0.5)
    with pytest.raises(InvalidArgument):
        apply_beam_splitter(vac, 0, 1, 1.5)
    with pytest.raises(InvalidArgument):
        apply_beam_splitter(vac, 0, 2, 0.5)


def test_epr_example_against_matrix_oracle():
    # oracle: build input covariance by hand and apply the unitary-derived symplectic
    cov_in = np.diag([V_MINUS, V_PLUS, V_PLUS, V_MINUS])  # mode 1 x-squeezed, mode 2 p-squeezed
    h = 1 / np.sqrt(2)
    s = symplectic_from_unitary(np.array([[h, h], [-h, h]], dtype=complex))
    cov_out = s @ cov_in @ s.T
    cx = np.array([h, 0, -h, 0])
    cp = np.array([0, h, 0, h])
    expected_x, expected_p = cx @ cov_out @ cx, cp @ cov_out @ cp
    assert expected_x == pytest.approx(V_MINUS, abs=1e-12)
    assert expected_p == pytest.approx(V_MINUS, abs=1e-12)

    state = epr_state()
    comb_x, comb_p = epr_combinations(2, 0, 1)
    assert quadrature_variance(state, comb_x) == pytest.approx(expected_x, abs=1e-12)
    assert quadrature_variance(state, comb_p) == pytest.approx(expected_p, abs=1e-12)
    assert duan_simon(state) == pytest.approx(1.777, abs=1e-12)


def test_duan_simon_ideal_3db():
    v = 10 ** -0.3
    state = epr_state(v, 1 / v)
    assert duan_simon(state) == pytest.approx(1.0023744672545446, abs=1e-12)


def test_duan_simon_errors():
    with pytest.raises(InvalidArgument):
        duan_simon(vacuum_state(2), 0, 0)
    with pytest.raises(InvalidArgument):
        duan_simon(vacuum_state(2), 0, 2)


def test_loss_examples():
    s = squeezed_thermal_state(0.787, 1 / 0.787, np.pi / 2)
    assert apply_loss(s, 0, 1.0).allclose(s, atol=0)
    assert apply_loss(s, 0, 0.0).allclose(vacuum_state(1), atol=1e-15)
    assert apply_loss(s, 0, 0.53).cov[1, 1] == pytest.approx(0.88711, abs=1e-12)
    with pytest.raises(InvalidArgument):
        apply_loss(s, 0, 1.01)


def test_loss_scales_cross_blocks_and_mean():
    s = GaussianState([1.0, 2.0, 3.0, 4.0], epr_state().cov)
    out = apply_loss(s, 1, 0.25)
    assert np.allclose(out.mean, [1.0, 2.0, 1.5, 2.0])
    assert np.allclose(out.cov[0:2, 2:4], 0.5 * s.cov[0:2, 2:4])
    assert np.allclose(out.cov[2:4, 2:4], 0.25 * s.cov[2:4, 2:4] + 0.75 * np.eye(2))


def test_quadrature_variance_examples():
    assert quadrature_variance(vacuum_state(1), QuadratureCombination((1, 0))) == 1.0
    h = 1 / np.sqrt(2)
    assert quadrature_variance(vacuum_state(2), QuadratureCombination((h, 0, -h, 0))) == pytest.approx(1.0)
    with pytest.raises(InvalidArgument):
        quadrature_variance(vacuum_state(2), QuadratureCombination((1, 0)))
    with pytest.raises(InvalidArgument):
        QuadratureCombination((0, 0))


def test_measured_covariance():
    cov = measured_covariance(epr_state(), [0.0, 0.0])
    h = 1 / np.sqrt(2)
    assert np.array([h, -h]) @ cov @ np.array([h, -h]) == pytest.approx(V_MINUS, abs=1e-12)


def test_text_round_trip():
    s = GaussianState([0.1, -0.2, 0.3, 1e-17], epr_state().cov)
    text = s.to_text()
    assert text.startswith("n_modes 2\n")
    back = GaussianState.from_text(text)
    assert np.array_equal(back.cov, s.cov)
    assert np.array_equal(back.mean, s.mean)


def test_text_golden_vacuum():
    assert vacuum_state(1).to_text() == "n_modes 1\n0.0 0.0\n1.0 0.0\n0.0 1.0\n"


def test_text_rejects_malformed():
    with pytest.raises(InvalidArgument):
        GaussianState.from_text("n_modes 2\n0 0 0 0\n1 0 0 0\n")


# --- properties -------------------------------------------------------------------

OMEGA_TOL = 1e-12


@given(st.integers(1, 4), st.data())
def test_gate_matrices_are_symplectic(n, data):
    omega = symplectic_form(n)
    a = data.draw(st.integers(0, n - 1))
    phi = data.draw(st.floats(-10, 10))
    s = phase_rotation_symplectic(n, a, phi)
    assert np.max(np.abs(s @ omega @ s.T - omega)) < OMEGA_TOL
    if n > 1:
        b = data.draw(st.integers(0, n - 1).filter(lambda b: b != a))
        t = data.draw(st.floats(0, 1))
        s = beam_splitter_symplectic(n, a, b, t)
        assert np.max(np.abs(s @ omega @ s.T - omega)) < OMEGA_TOL


@settings(max_examples=200)
@given(physical_states(), st.data())
def test_operations_preserve_physicality(state, data):
    assert state.is_physical()
    n = state.n_modes
    k = data.draw(st.integers(0, n - 1))
    assert apply_loss(state, k, data.draw(st.floats(0, 1))).is_physical()
    assert apply_phase_rotation(state, k, data.draw(st.floats(-7, 7))).is_physical()
    if n > 1:
        j = (k + 1) % n
        assert apply_beam_splitter(state, k, j, data.draw(st.floats(0, 1))).is_physical()


@settings(max_examples=200)
@given(physical_states(n_modes=1), physical_states(n_modes=1))
def test_product_states_do_not_violate_duan_simon(a, b):
    assert duan_simon(tensor_product(a, b)) >= 2 - 1e-9


@settings(max_examples=200)
@given(physical_states(), st.data())
def test_passive_gates_conserve_photon_number(state, data):
    n = state.n_modes
    k = data.draw(st.integers(0, n - 1))
    out = apply_phase_rotation(state, k, data.draw(st.floats(-7, 7)))
    if n > 1:
        out = apply_beam_splitter(out, k, (k + 1) % n, data.draw(st.floats(0, 1)))
    assert out.mean_photon_number() == pytest.approx(state.mean_photon_number(), abs=1e-10)


@settings(max_examples=200)
@given(physical_states(n_modes=2))
def test_mach_zehnder_identity(state):
    out = apply_beam_splitter(state, 0, 1, 0.5)
    out = apply_phase_rotation(out, 1, np.pi)
    out = apply_beam_splitter(out, 0, 1, 0.5)
    # the interferometer leaves a pi phase on the second output port
    out = apply_phase_rotation(out, 1, np.pi)
    assert out.allclose(state, atol=1e-10)


def test_unphysical_state_detected():
    s = GaussianState(np.zeros(2), np.diag([0.5, 1.5]))
    assert not s.is_physical()
