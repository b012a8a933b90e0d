from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import qconv.filters as filters
from qconv.filters import (
    EstimatorMode,
    FilterParams,
    ansatz_gates,
    embedding_gates,
    eval_classical_dot,
    eval_hadamard_real,
    eval_hadamard_real_batch,
    eval_overlap_sq,
    eval_overlap_sq_batch,
    gate_count,
    grad_params,
    init_fixed,
    init_variational,
    inverse_embedding_gates,
    param_shift_derivs_batch,
    per_qubit_zero_product,
)
from qconv.parallel import map_batch
from qconv.statevec import Circuit, inner_product, new_zero_state, run_circuit


def random_config(
    rng: np.random.Generator, size_n: int = 2
) -> tuple[np.ndarray, FilterParams]:
    q = size_n**2
    window = rng.random(q)
    params = FilterParams(
        size_n, rng.uniform(0, 2 * np.pi, q), rng.uniform(0, 2 * np.pi, q)
    )
    return window, params


def overlap_via_two_states(window, params, scale=1.0) -> complex:
    """<embedded | ansatz> from two independent evolutions of |0...0>."""
    q = params.num_qubits
    zero = new_zero_state(q)
    embedded = run_circuit(zero, Circuit(q, embedding_gates(window, scale)))
    circuit_state = run_circuit(zero, Circuit(q, ansatz_gates(params)))
    return inner_product(embedded, circuit_state)


def test_filterparams_validation():
    with pytest.raises(ValueError):
        FilterParams(2, np.zeros(3), np.zeros(4))
    with pytest.raises(ValueError):
        FilterParams(0, np.zeros(0), np.zeros(0))
    p = FilterParams(2, np.zeros(4), np.ones(4))
    assert p.num_qubits == 4
    assert p.num_params == 8


def test_filterparams_vector_round_trip():
    rng = np.random.default_rng(3)
    _, params = random_config(rng)
    again = FilterParams.from_vector(2, params.to_vector())
    np.testing.assert_array_equal(again.theta_rx, params.theta_rx)
    np.testing.assert_array_equal(again.theta_ry, params.theta_ry)


def test_embedding_gates_structure():
    window = np.array([0.1, 0.2, 0.3, 0.4])
    gates = embedding_gates(window, scale=2.0)
    assert [g.kind for g in gates] == ["RY"] * 4
    assert [g.target for g in gates] == [0, 1, 2, 3]
    np.testing.assert_allclose([g.angle for g in gates], 2.0 * window)
    inverse = inverse_embedding_gates(window, scale=2.0)
    assert [g.target for g in inverse] == [3, 2, 1, 0]
    np.testing.assert_allclose([g.angle for g in inverse], -2.0 * window[::-1])


def test_ansatz_structure_and_gate_count():
    rng = np.random.default_rng(0)
    _, params = random_config(rng, size_n=2)
    gates = ansatz_gates(params)
    assert len(gates) == gate_count(params) == 3 * 4 - 1
    assert [g.kind for g in gates] == ["RX"] * 4 + ["CNOT"] * 3 + ["RY"] * 4
    # the staircase runs top-down: control k, target k-1
    cnots = [g for g in gates if g.kind == "CNOT"]
    assert [(g.controls[0], g.target) for g in cnots] == [(3, 2), (2, 1), (1, 0)]


def test_overlap_sq_matches_two_state_oracle():
    rng = np.random.default_rng(42)
    for _ in range(20):
        window, params = random_config(rng)
        want = abs(overlap_via_two_states(window, params)) ** 2
        assert eval_overlap_sq(window, params) == pytest.approx(want, abs=1e-12)


def test_hadamard_real_matches_two_state_oracle():
    rng = np.random.default_rng(43)
    for _ in range(20):
        window, params = random_config(rng)
        want = overlap_via_two_states(window, params).real
        assert eval_hadamard_real(window, params) == pytest.approx(want, abs=1e-12)


def test_estimators_honor_scale():
    rng = np.random.default_rng(44)
    window, params = random_config(rng)
    scale = 0.6
    want = overlap_via_two_states(window, params, scale).real
    assert eval_hadamard_real(window, params, scale) == pytest.approx(want, abs=1e-12)
    want_sq = abs(overlap_via_two_states(window, params, scale)) ** 2
    assert eval_overlap_sq(window, params, scale) == pytest.approx(want_sq, abs=1e-12)


def test_batch_matches_single_evaluations():
    rng = np.random.default_rng(45)
    _, params = random_config(rng)
    windows = rng.random((7, 4))
    sq = eval_overlap_sq_batch(windows, params)
    re = eval_hadamard_real_batch(windows, params)
    for i in range(7):
        assert sq[i] == pytest.approx(eval_overlap_sq(windows[i], params), abs=1e-14)
        assert re[i] == pytest.approx(eval_hadamard_real(windows[i], params), abs=1e-14)


def test_window_size_mismatch():
    rng = np.random.default_rng(46)
    _, params = random_config(rng)
    with pytest.raises(ValueError):
        eval_overlap_sq(np.zeros(5), params)
    with pytest.raises(ValueError):
        eval_hadamard_real_batch(np.zeros((2, 3)), params)


def test_classical_dot():
    window = np.array([1.0, 0.5, 0.0, 0.25])
    weights = np.array([2.0, -1.0, 3.0, 4.0])
    assert eval_classical_dot(window, weights) == pytest.approx(2.5)
    with pytest.raises(ValueError):
        eval_classical_dot(window, np.zeros(3))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_estimator_ranges_and_overlap_dominates_real_part(seed):
    rng = np.random.default_rng(seed)
    window, params = random_config(rng)
    sq = eval_overlap_sq(window, params)
    re = eval_hadamard_real(window, params)
    assert 0.0 <= sq <= 1.0 + 1e-12
    assert -1.0 - 1e-12 <= re <= 1.0 + 1e-12
    # |z|^2 >= Re(z)^2 for any complex overlap z
    assert sq >= re**2 - 1e-10


def test_zero_parameters_reduce_to_cosine_product():
    # with all angles zero the circuit is the identity (CNOTs fire on |0..0>
    # only trivially), so the overlap is just the embedding's <0| component
    rng = np.random.default_rng(54)
    params = FilterParams(2, np.zeros(4), np.zeros(4))
    for scale in (1.0, 0.5, np.pi):
        window = rng.random(4)
        want = np.prod(np.cos(scale * window / 2.0) ** 2)
        assert eval_overlap_sq(window, params, scale) == pytest.approx(
            want, abs=1e-12
        )


def test_estimator_ranges_thousand_case_sweep():
    rng = np.random.default_rng(55)
    for _ in range(20):
        _, params = random_config(rng)
        windows = rng.random((50, 4))
        sq = eval_overlap_sq_batch(windows, params)
        re = eval_hadamard_real_batch(windows, params)
        assert np.all(sq >= 0.0) and np.all(sq <= 1.0 + 1e-12)
        assert np.all(re >= -1.0 - 1e-12) and np.all(re <= 1.0 + 1e-12)
        assert np.all(sq >= re**2 - 1e-10)


def finite_diff(fn, window, params, h=1e-6) -> np.ndarray:
    theta = params.to_vector()
    grad = np.empty(len(theta))
    for j in range(len(theta)):
        plus, minus = theta.copy(), theta.copy()
        plus[j] += h
        minus[j] -= h
        grad[j] = (
            fn(window, FilterParams.from_vector(params.size_n, plus))
            - fn(window, FilterParams.from_vector(params.size_n, minus))
        ) / (2 * h)
    return grad


@pytest.mark.parametrize(
    "mode,fn",
    [
        (EstimatorMode.OVERLAP_SQUARED, eval_overlap_sq),
        (EstimatorMode.HADAMARD_REAL, eval_hadamard_real),
    ],
)
def test_grad_matches_finite_differences(mode, fn):
    rng = np.random.default_rng(47)
    for _ in range(3):
        window, params = random_config(rng)
        grad = grad_params(window, params, mode)
        want = finite_diff(fn, window, params)
        np.testing.assert_allclose(grad, want, atol=1e-8)


def test_grad_uses_exactly_two_evals_per_parameter(monkeypatch):
    rng = np.random.default_rng(48)
    window, params = random_config(rng)
    calls = {"n": 0}
    real = filters.eval_overlap_sq

    def counting(*args, **kwargs):
        calls["n"] += 1
        return real(*args, **kwargs)

    monkeypatch.setattr(filters, "eval_overlap_sq", counting)
    grad_params(window, params, EstimatorMode.OVERLAP_SQUARED)
    assert calls["n"] == 4 * params.size_n**2  # 2 evals x 2 n^2 parameters


def test_grad_at_zero_window_and_zero_params():
    # degenerate configuration: embedding and ansatz are both the identity,
    # so the estimator sits at its maximum and every derivative vanishes
    params = FilterParams(2, np.zeros(4), np.zeros(4))
    window = np.zeros(4)
    for mode, fn in (
        (EstimatorMode.OVERLAP_SQUARED, eval_overlap_sq),
        (EstimatorMode.HADAMARD_REAL, eval_hadamard_real),
    ):
        assert fn(window, params) == pytest.approx(1.0, abs=1e-12)
        grad = grad_params(window, params, mode)
        np.testing.assert_allclose(grad, np.zeros(8), atol=1e-12)
        np.testing.assert_allclose(
            grad, finite_diff(fn, window, params), atol=1e-8
        )


def test_grad_rejects_classical_mode():
    rng = np.random.default_rng(49)
    window, params = random_config(rng)
    with pytest.raises(ValueError):
        grad_params(window, params, EstimatorMode.CLASSICAL_DOT)
    with pytest.raises(ValueError):
        param_shift_derivs_batch(window, params, EstimatorMode.CLASSICAL_DOT)


def test_grad_through_pool_matches_serial():
    rng = np.random.default_rng(50)
    window, params = random_config(rng)
    serial = grad_params(window, params, EstimatorMode.HADAMARD_REAL)
    pooled = grad_params(
        window,
        params,
        EstimatorMode.HADAMARD_REAL,
        pool=lambda tasks: map_batch(tasks, workers=4),
    )
    np.testing.assert_array_equal(serial, pooled)


def test_param_shift_derivs_batch_matches_grad_params():
    rng = np.random.default_rng(51)
    _, params = random_config(rng)
    windows = rng.random((5, 4))
    derivs = param_shift_derivs_batch(windows, params, EstimatorMode.OVERLAP_SQUARED)
    assert derivs.shape == (8, 5)
    for i in range(5):
        one = grad_params(windows[i], params, EstimatorMode.OVERLAP_SQUARED)
        np.testing.assert_allclose(derivs[:, i], one, atol=1e-13)


def test_per_qubit_product_equals_overlap_for_single_qubit():
    # with one qubit there is no entangling gate, so the marginal product
    # and the joint probability coincide
    rng = np.random.default_rng(52)
    params = FilterParams(1, rng.uniform(0, np.pi, 1), rng.uniform(0, np.pi, 1))
    window = rng.random(1)
    assert per_qubit_zero_product(window, params) == pytest.approx(
        eval_overlap_sq(window, params), abs=1e-12
    )


def test_per_qubit_product_bounded():
    rng = np.random.default_rng(53)
    window, params = random_config(rng)
    value = per_qubit_zero_product(window, params)
    assert 0.0 <= value <= 1.0


def test_init_helpers_ranges_and_determinism():
    a = init_variational(2, np.random.default_rng(7))
    b = init_variational(2, np.random.default_rng(7))
    np.testing.assert_array_equal(a.to_vector(), b.to_vector())
    assert np.all(a.to_vector() >= 0) and np.all(a.to_vector() < np.pi)
    f = init_fixed(2, np.random.default_rng(8))
    assert np.all(f.to_vector() >= 0) and np.all(f.to_vector() < 2 * np.pi)
