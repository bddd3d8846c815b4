import unittest

import numpy as np

from numpy.testing import assert_allclose, assert_array_equal

from kern_core.exceptions.DimensionException import DimensionException
from kern_core.gru_cell import add_gru_parameters, gru_cell, gru_step
from kern_core.parameter_set import ParameterSet
from kern_core.tensor import Tensor
from tests.kern_core_tests.helpers import gru_oracle, zero_gru


class GruCell_Tests(unittest.TestCase):

    def setUp(self):
        self.rng = np.random.default_rng(11)
        self.params = ParameterSet()
        add_gru_parameters(self.params, "gru", 3, 4, self.rng)

    def test_zero_weights_should_halve_previous_state(self):
        zero_gru(self.params, "gru")
        v = np.array([1.0, -2.0, 0.5, 4.0])

        step = gru_step(Tensor(self.rng.standard_normal(3)), Tensor(v), self.params)

        assert_array_equal(step.z.data, np.full(4, 0.5))
        assert_array_equal(step.h_tilde.data, np.zeros(4))
        assert_array_equal(step.h.data, 0.5 * v)

    def test_zero_input_and_state_with_zero_biases_should_stay_zero(self):
        h = gru_cell(Tensor(np.zeros(3)), Tensor(np.zeros(4)), self.params)

        assert_array_equal(h.data, np.zeros(4))

    def test_random_instance_should_match_scalar_oracle(self):
        for gate in ("z", "r", "h"):
            self.params[f"gru.b_{gate}"].data = self.rng.standard_normal(4)
        a, h = self.rng.standard_normal(3), self.rng.standard_normal(4)

        result = gru_cell(Tensor(a), Tensor(h), self.params)

        assert_allclose(result.data, gru_oracle(a, h, self.params.to_arrays(), "gru"), rtol=0, atol=1e-12)

    def test_batched_rows_should_equal_single_node_updates(self):
        a, h = self.rng.standard_normal((5, 3)), self.rng.standard_normal((5, 4))

        batched = gru_cell(Tensor(a), Tensor(h), self.params).data

        for row in range(5):
            assert_allclose(batched[row], gru_cell(Tensor(a[row]), Tensor(h[row]), self.params).data, atol=1e-14)

    def test_output_should_lie_between_previous_and_candidate_state(self):
        h_prev = self.rng.standard_normal((6, 4))
        step = gru_step(Tensor(self.rng.standard_normal((6, 3))), Tensor(h_prev), self.params)

        low = np.minimum(h_prev, step.h_tilde.data) - 1e-12
        high = np.maximum(h_prev, step.h_tilde.data) + 1e-12
        self.assertTrue(np.all((low <= step.h.data) & (step.h.data <= high)))

    def test_randomized_updates_should_keep_gates_open_and_state_bounded(self):
        for _ in range(1000):
            for name in self.params:
                self.params[name].data = self.rng.standard_normal(self.params[name].shape)
            a, h_prev = self.rng.standard_normal(3), self.rng.standard_normal(4)

            step = gru_step(Tensor(a), Tensor(h_prev), self.params)

            for gate in (step.z.data, step.r.data):
                self.assertTrue(np.all((gate > 0.0) & (gate < 1.0)))
            low = np.minimum(h_prev, step.h_tilde.data) - 1e-12
            high = np.maximum(h_prev, step.h_tilde.data) + 1e-12
            self.assertTrue(np.all((low <= step.h.data) & (step.h.data <= high)))
            assert_allclose(step.h.data, gru_oracle(a, h_prev, self.params.to_arrays(), "gru"), rtol=0, atol=1e-12)

    def test_input_of_wrong_length_should_raise_dimension_error(self):
        with self.assertRaises(DimensionException):
            gru_cell(Tensor(np.zeros(2)), Tensor(np.zeros(4)), self.params)


if __name__ == '__main__':
    unittest.main()
