import numpy as np
from django.test import SimpleTestCase

from mmocc.error import DimensionError, ParameterError, StateError
from mmocc.numerics import (
	LayerContext, Conv2d, check_layers, grad_check, layer_fn_for,
	conv2d_forward, batchnorm2d_forward, maxpool2d_forward, maxpool2d_backward,
	dropout_forward, activation_forward, activation_backward,
	upsample2x_forward, upsample2x_backward,
)

GRAD_TOLERANCE = 1e-4

class Conv2dTest(SimpleTestCase):
	def test_all_ones_kernel(self):
		x = np.arange(1, 10, dtype=np.float64).reshape(1, 1, 3, 3)
		out, _ = conv2d_forward(x, np.ones((1, 1, 3, 3)), np.zeros(1))
		self.assertEqual(out.shape, (1, 1, 3, 3))
		self.assertEqual(out[0, 0, 1, 1], 45)
		self.assertEqual(out[0, 0, 0, 0], 12)

	def test_identity_kernel(self):
		x = np.random.default_rng(0).standard_normal((2, 3, 5, 5))
		kernels = np.zeros((3, 3, 3, 3))
		for c in range(3):
			kernels[c, c, 1, 1] = 1.0
		out, _ = conv2d_forward(x, kernels, np.zeros(3))
		np.testing.assert_allclose(out, x, rtol=0, atol=1e-15)

	def test_zero_input(self):
		kernels = np.random.default_rng(1).standard_normal((4, 2, 3, 3))
		out, _ = conv2d_forward(np.zeros((1, 2, 4, 4)), kernels, np.zeros(4))
		self.assertFalse(np.any(out))

	def test_linearity(self):
		rng = np.random.default_rng(6)
		kernels = rng.standard_normal((4, 2, 3, 3))
		x, y = rng.standard_normal((2, 3, 2, 6, 6))
		a, b = 1.7, -0.4
		combined, _ = conv2d_forward(a * x + b * y, kernels, np.zeros(4))
		fx, _ = conv2d_forward(x, kernels, np.zeros(4))
		fy, _ = conv2d_forward(y, kernels, np.zeros(4))
		expected = a * fx + b * fy
		self.assertLess(np.max(np.abs(combined - expected)) / np.max(np.abs(expected)), 1e-5)

	def test_channel_mismatch(self):
		with self.assertRaises(DimensionError):
			conv2d_forward(np.zeros((1, 2, 4, 4)), np.zeros((1, 3, 3, 3)), np.zeros(1))

class BatchNorm2dTest(SimpleTestCase):
	def test_constant_channel_gives_beta(self):
		x = np.full((3, 2, 2, 2), 7.0)
		beta = np.array([0.25, -1.5])
		out, _ = batchnorm2d_forward(x, np.array([2.0, 3.0]), beta, None, 'train')
		np.testing.assert_allclose(out, np.broadcast_to(beta.reshape(1, 2, 1, 1), x.shape))

	def test_two_values(self):
		x = np.array([0.0, 2.0]).reshape(2, 1, 1, 1)
		out, _ = batchnorm2d_forward(x, np.ones(1), np.zeros(1), None, 'train')
		np.testing.assert_allclose(out.reshape(-1), [-1.0, 1.0], atol=1e-3)

	def test_eval_identity(self):
		x = np.random.default_rng(2).standard_normal((2, 3, 4, 4))
		running = { 'mean': np.zeros(3), 'var': np.ones(3), 'count': np.ones(1) }
		out, _ = batchnorm2d_forward(x, np.ones(3), np.zeros(3), running, 'eval')
		np.testing.assert_allclose(out, x, rtol=1e-5)

	def test_eval_requires_running_statistics(self):
		running = { 'mean': np.zeros(1), 'var': np.ones(1), 'count': np.zeros(1) }
		with self.assertRaises(StateError):
			batchnorm2d_forward(np.zeros((1, 1, 2, 2)), np.ones(1), np.zeros(1), running, 'eval')

	def test_running_update_uses_unbiased_variance(self):
		x = np.array([0.0, 2.0]).reshape(2, 1, 1, 1)
		running = { 'mean': np.zeros(1), 'var': np.ones(1), 'count': np.zeros(1) }
		batchnorm2d_forward(x, np.ones(1), np.zeros(1), running, 'train')
		np.testing.assert_allclose(running['mean'], [0.1])
		np.testing.assert_allclose(running['var'], [0.9 + 0.1 * 2.0])
		self.assertEqual(running['count'][0], 1)

class MaxPool2dTest(SimpleTestCase):
	def test_forward_backward(self):
		x = np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 1, 2, 2)
		out, ctx = maxpool2d_forward(x)
		self.assertEqual(out.reshape(-1).tolist(), [4.0])
		grad = maxpool2d_backward(ctx, np.ones((1, 1, 1, 1)))
		self.assertEqual(grad.reshape(2, 2).tolist(), [[0.0, 0.0], [0.0, 1.0]])

	def test_tie_goes_to_first_index(self):
		out, ctx = maxpool2d_forward(np.full((1, 1, 2, 2), 5.0))
		self.assertEqual(out.reshape(-1).tolist(), [5.0])
		grad = maxpool2d_backward(ctx, np.ones((1, 1, 1, 1)))
		self.assertEqual(grad.reshape(2, 2).tolist(), [[1.0, 0.0], [0.0, 0.0]])

	def test_backward_conserves_gradient_mass(self):
		rng = np.random.default_rng(7)
		_, ctx = maxpool2d_forward(rng.standard_normal((2, 3, 6, 6)))
		grad_out = rng.standard_normal((2, 3, 3, 3))
		grad = maxpool2d_backward(ctx, grad_out)
		self.assertAlmostEqual(float(grad.sum()), float(grad_out.sum()), places=12)
		self.assertEqual(int(np.count_nonzero(grad)), grad_out.size)

	def test_odd_size_rejected(self):
		with self.assertRaises(DimensionError):
			maxpool2d_forward(np.zeros((1, 1, 3, 4)))

class DropoutTest(SimpleTestCase):
	def test_eval_is_identity(self):
		x = np.random.default_rng(3).standard_normal((2, 3, 4, 4))
		out, _ = dropout_forward(x, 0.5, 'eval', None)
		self.assertIs(out, x)

	def test_rate_zero_is_identity(self):
		x = np.random.default_rng(4).standard_normal((2, 3))
		out, _ = dropout_forward(x, 0.0, 'train', np.random.default_rng(0))
		np.testing.assert_array_equal(out, x)

	def test_expectation_is_preserved(self):
		out, _ = dropout_forward(np.ones((10000, 8)), 0.5, 'train', np.random.default_rng(5))
		np.testing.assert_allclose(out.mean(axis=0), np.ones(8), rtol=0.05)

	def test_same_generator_state_same_mask(self):
		x = np.random.default_rng(8).standard_normal((4, 3, 5, 5)).astype(np.float32)
		first, _ = dropout_forward(x, 0.3, 'train', np.random.default_rng(11))
		second, _ = dropout_forward(x, 0.3, 'train', np.random.default_rng(11))
		self.assertEqual(first.tobytes(), second.tobytes())

	def test_invalid_rate(self):
		with self.assertRaises(ParameterError):
			dropout_forward(np.ones(3), 1.0, 'train', np.random.default_rng(0))

class ActivationTest(SimpleTestCase):
	def test_relu(self):
		out, _ = activation_forward(np.array([-1.0, 0.0, 2.0]), 'relu')
		self.assertEqual(out.tolist(), [0.0, 0.0, 2.0])

	def test_relu_backward(self):
		_, ctx = activation_forward(np.array([-1.0, 2.0]), 'relu')
		self.assertEqual(activation_backward(ctx, np.array([5.0, 5.0])).tolist(), [0.0, 5.0])

	def test_sigmoid(self):
		out, _ = activation_forward(np.array([0.0, -1000.0, 1000.0]), 'sigmoid')
		self.assertEqual(out[0], 0.5)
		self.assertTrue(np.all(np.isfinite(out)))
		self.assertEqual(out[1], 0.0)
		self.assertEqual(out[2], 1.0)

class Upsample2xTest(SimpleTestCase):
	def test_forward(self):
		out, _ = upsample2x_forward(np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 1, 2, 2))
		self.assertEqual(out.reshape(4, 4).tolist(), [
			[1, 1, 2, 2],
			[1, 1, 2, 2],
			[3, 3, 4, 4],
			[3, 3, 4, 4],
		])

	def test_backward_block_sum(self):
		_, ctx = upsample2x_forward(np.zeros((1, 1, 2, 2)))
		grad = upsample2x_backward(ctx, np.ones((1, 1, 4, 4)))
		self.assertEqual(grad.reshape(2, 2).tolist(), [[4.0, 4.0], [4.0, 4.0]])

	def test_single_pixel(self):
		out, _ = upsample2x_forward(np.full((1, 1, 1, 1), 7.0))
		self.assertEqual(out.reshape(2, 2).tolist(), [[7.0, 7.0], [7.0, 7.0]])

class LayerContextTest(SimpleTestCase):
	def test_single_use(self):
		_, ctx = upsample2x_forward(np.zeros((1, 1, 1, 1)))
		upsample2x_backward(ctx, np.ones((1, 1, 2, 2)))
		self.assertTrue(ctx.consumed)
		with self.assertRaises(StateError):
			upsample2x_backward(ctx, np.ones((1, 1, 2, 2)))

	def test_op_mismatch(self):
		ctx = LayerContext('conv2d')
		with self.assertRaises(StateError):
			ctx.consume('maxpool2d')

class GradCheckTest(SimpleTestCase):
	def test_linear_conv_is_exact(self):
		rng = np.random.default_rng(6)
		conv = Conv2d('conv', 2, 2)
		params = { 'conv.weight': rng.uniform(0.5, 1.5, (2, 2, 3, 3)), 'conv.bias': rng.uniform(0.5, 1.5, 2) }
		error = grad_check(layer_fn_for(conv), params, rng.standard_normal((1, 2, 4, 4)))
		self.assertLess(error, 1e-8)

	def test_requires_float64(self):
		conv = Conv2d('conv', 1, 1)
		params = { 'conv.weight': np.ones((1, 1, 3, 3), dtype=np.float32), 'conv.bias': np.zeros(1, dtype=np.float32) }
		with self.assertRaises(ParameterError):
			grad_check(layer_fn_for(conv), params, np.ones((1, 1, 3, 3)))

	def test_all_layers(self):
		for seed in range(5):
			for name, error in check_layers(seed):
				with self.subTest(seed=seed, layer=name):
					self.assertLess(error, GRAD_TOLERANCE)
