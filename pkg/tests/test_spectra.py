"""Tests for the linearized operators, their lowest eigenpairs and the slope identity."""

import numpy as np
import pytest

from rnls_lab.core_layer.grid import auto_grid, inner_values, norm
from rnls_lab.errors import UsageError
from rnls_lab.models import ModelParams
from rnls_lab.solver_layer.spectra import (
    LinearizedOperator,
    apply_linop,
    dense_fd_l1_oracle,
    l1_negative_eigenvalue_1d,
    lowest_eigs,
    translation_rayleigh,
    vk_slope_test,
)


@pytest.fixture
def l1(cubic_soliton, cubic_params):
    return LinearizedOperator("L1", cubic_soliton, cubic_params)


class TestOperators:

    def test_l2_annihilates_profile(self, cubic_soliton, cubic_params):
        op = LinearizedOperator("L2", cubic_soliton, cubic_params)
        assert norm(apply_linop(op, cubic_soliton)) <= 1e-10 * norm(cubic_soliton)

    def test_form_is_symmetric(self, l1, cubic_soliton):
        grid = cubic_soliton.grid
        rng = np.random.default_rng(0)
        u = cubic_soliton.values.real * rng.standard_normal(grid.shape)
        v = cubic_soliton.values.real ** 2
        assert l1.form(u, v) == pytest.approx(l1.form(v, u), rel=1e-10)

    def test_rejects_unknown_kind(self, cubic_soliton, cubic_params):
        with pytest.raises(UsageError):
            LinearizedOperator("L3", cubic_soliton, cubic_params)

    def test_closed_form_negative_eigenvalue(self):
        assert l1_negative_eigenvalue_1d(2.0, 1.0) == -3.0
        assert l1_negative_eigenvalue_1d(6.0, 2.0) == pytest.approx(-30.0)


class TestLowestEigenpairs:

    def test_single_negative_direction(self, l1):
        pairs = lowest_eigs(l1, n_eigs=4)
        values = [pair.value for pair in pairs]
        assert sum(1 for value in values if value < -1e-6 * l1.scale) == 1
        assert values[0] == pytest.approx(-3.0, rel=1e-8)
        assert abs(values[1]) <= 1e-6 * l1.scale
        # kernel is spanned by the d = 1 translation field only
        assert values[2] >= 0.5
        assert values == sorted(values)

    def test_eigenfields_are_normalized_and_orthogonal(self, l1):
        pairs = lowest_eigs(l1, n_eigs=2)
        grid = l1.grid
        first, second = (pair.field.values for pair in pairs)
        assert inner_values(grid, first, first) == pytest.approx(1.0, rel=1e-12)
        assert abs(inner_values(grid, first, second)) <= 1e-8

    def test_translation_fields_sit_in_kernel(self, l1):
        assert all(abs(q) <= 1e-6 * l1.scale for q in translation_rayleigh(l1))

    def test_l2_is_nonnegative(self, cubic_soliton, cubic_params):
        op = LinearizedOperator("L2", cubic_soliton, cubic_params)
        pairs = lowest_eigs(op, n_eigs=2)
        assert abs(pairs[0].value) <= 1e-6 * op.scale
        assert pairs[1].value > 0

    def test_dense_oracle_agrees(self, l1):
        dense = dense_fd_l1_oracle(2.0, 1.0)
        assert dense[0] == pytest.approx(-3.0, abs=1e-4)
        assert lowest_eigs(l1, n_eigs=1)[0].value == pytest.approx(dense[0], abs=1e-4)

    def test_rejects_too_many_eigenpairs(self, l1):
        with pytest.raises(UsageError):
            lowest_eigs(l1, n_eigs=9)


class TestSlopeIdentity:

    def test_cubic(self, cubic_params, cubic_grid):
        report = vk_slope_test(cubic_params, cubic_grid)
        assert report.m_prime_closed == pytest.approx(1.0, rel=1e-12)
        assert report.l1_form == pytest.approx(-1.0, rel=1e-4)
        assert report.residual <= 1e-4
        assert abs(report.translation_overlap[0]) <= 1e-10

    @pytest.mark.parametrize("omega", [0.1, 1.0, 5.0])
    def test_regularized_sextic(self, omega):
        params = ModelParams(d=1, k=1, p=6.0, beta=1.0, omega=omega)
        report = vk_slope_test(params, auto_grid(params))
        assert report.residual <= 1e-4
        assert np.sign(report.l1_form) == -np.sign(report.m_prime_closed)

    def test_regularized_sextic_slope_signs(self):
        below = vk_slope_test(*self._sextic(0.1))
        assert below.m_prime_closed < 0
        assert below.l1_form > 0
        above = vk_slope_test(*self._sextic(1.0))
        assert above.m_prime_closed > 0
        assert above.l1_form < 0

    @staticmethod
    def _sextic(omega):
        params = ModelParams(d=1, k=1, p=6.0, beta=1.0, omega=omega)
        return params, auto_grid(params)

    def test_rejects_oversized_step(self, cubic_params, cubic_grid):
        with pytest.raises(UsageError):
            vk_slope_test(cubic_params, cubic_grid, delta_omega=2.0)
