import json
import tempfile
from pathlib import Path
from unittest import mock

import numpy as np
from django.test import SimpleTestCase

from mmocc.data import SamplePair, synth_generate
from mmocc.error import NumericError, ParameterError
from mmocc.model import ModelParams
from mmocc.occ import (
	POSITIVE, ANOMALY, TrainConfig, OccModel,
	train, nearest_rank, calibrate_threshold, feature_norms, score, score_samples, decide, classify,
)

TINY = dict(input_size=8, in_channels=3, channels=(4,), batch_size=8)

def random_samples(n, seed=0, size=8, channels=1):
	rng = np.random.default_rng(seed)
	return [
		SamplePair(
			rng.uniform(0, 1, (channels, size, size)).astype(np.float32),
			rng.uniform(0, 1, (channels, size, size)).astype(np.float32),
			0, f"s{i}",
		)
		for i in range(n)
	]

def ready_params(config: TrainConfig) -> ModelParams:
	params = ModelParams.initialize(config.arch, seed=config.seed)
	for key, value in params.buffers.items():
		if key.endswith('num_batches_tracked'):
			value[...] = 1
	return params.freeze()

class NearestRankTest(SimpleTestCase):
	def test_one_to_hundred(self):
		self.assertEqual(nearest_rank(np.arange(1, 101), 95), 95)
		self.assertEqual(nearest_rank(np.arange(100, 0, -1), 95), 95)

	def test_single_value(self):
		for q in (1, 50, 95, 100):
			self.assertEqual(nearest_rank([3.5], q), 3.5)

	def test_constant(self):
		self.assertEqual(nearest_rank([2.0] * 17, 95), 2.0)

	def test_invalid(self):
		with self.assertRaises(ParameterError):
			nearest_rank([], 95)
		with self.assertRaises(ParameterError):
			nearest_rank([1.0], 0)

class DecisionTest(SimpleTestCase):
	def test_boundary_is_positive(self):
		self.assertEqual(decide(1.25, 1.25), POSITIVE)
		self.assertEqual(decide(np.nextafter(1.25, 2.0), 1.25), ANOMALY)
		self.assertEqual(decide(0.0, 0.0), POSITIVE)

class ThresholdTest(SimpleTestCase):
	config = TrainConfig(input_size=8, in_channels=1, channels=(2,))

	def test_training_acceptance_rate(self):
		params = ready_params(self.config)
		for n in (20, 100, 158):
			with self.subTest(n=n):
				samples = random_samples(n, seed=n)
				tau = calibrate_threshold(params, samples)
				norms = feature_norms(params, samples)
				rate = np.count_nonzero([decide(float(v), tau) == POSITIVE for v in norms]) / n
				self.assertGreaterEqual(rate, 0.95)
				self.assertLessEqual(rate, 0.95 + 1 / n)

	def test_permutation_invariant(self):
		params = ready_params(self.config)
		samples = random_samples(30, seed=1)
		shuffled = [samples[i] for i in np.random.default_rng(2).permutation(30)]
		self.assertEqual(calibrate_threshold(params, samples), calibrate_threshold(params, shuffled))

	def test_thread_count_does_not_change_norms(self):
		params = ready_params(self.config)
		samples = random_samples(12, seed=3)
		np.testing.assert_array_equal(feature_norms(params, samples), feature_norms(params, samples, workers=4))

class ScoreTest(SimpleTestCase):
	def setUp(self):
		self.config = TrainConfig(input_size=8, in_channels=1, channels=(2,))
		self.model = OccModel(params=ready_params(self.config), tau=4.0, config=self.config, n_train=1)
		self.sample = random_samples(1)[0]

	def test_norm_of_embedding(self):
		with mock.patch('mmocc.occ.embed', return_value=np.array([[3.0, 4.0, 0.0, 0.0]], dtype=np.float32)):
			self.assertEqual(score(self.model, self.sample), 5.0)
			self.assertEqual(classify(self.model, self.sample), ANOMALY)
		with mock.patch('mmocc.occ.embed', return_value=np.array([[0.0, 4.0, 0.0, 0.0]], dtype=np.float32)):
			self.assertEqual(classify(self.model, self.sample), POSITIVE)

	def test_repeated_scoring(self):
		first = score(self.model, self.sample)
		self.assertGreaterEqual(first, 0.0)
		self.assertEqual(first, score(self.model, self.sample))
		self.assertEqual(first, float(score_samples(self.model, [self.sample])[0]))

	def test_invalid_threshold(self):
		with self.assertRaises(NumericError):
			OccModel(params=self.model.params, tau=float('nan'), config=self.config, n_train=1)

class TrainConfigTest(SimpleTestCase):
	def test_defaults(self):
		config = TrainConfig()
		self.assertEqual((config.epochs, config.batch_size, config.lr, config.weight_decay), (4, 32, 1e-3, 1e-3))
		self.assertEqual((config.input_size, config.mode, config.regularizer, config.lam), (32, 'multimodal', 'none', 0.01))

	def test_rejects_bad_values(self):
		for changes in ({ 'epochs': 0 }, { 'lr': 0.0 }, { 'mode': 'fusion' }, { 'regularizer': 'l2' }, { 'input_size': 30 }):
			with self.subTest(changes=changes):
				with self.assertRaises(ParameterError):
					TrainConfig(**changes)

	def test_rejects_non_integer_counts(self):
		for data in ({ 'epochs': 2.5 }, { 'batch_size': 4.0 }, { 'seed': '1' }, { 'epochs': True }, { 'channels': [4.5] }):
			with self.subTest(data=data):
				with self.assertRaises(ParameterError):
					TrainConfig.from_dict(data)

	def test_numpy_integers_are_normalized(self):
		config = TrainConfig(epochs=np.int64(2), seed=np.int32(3))
		self.assertIs(type(config.epochs), int)
		self.assertIs(type(config.seed), int)

	def test_unknown_key(self):
		with self.assertRaises(ParameterError):
			TrainConfig.from_dict({ 'epochs': 2, 'learning_rate': 0.1 })

	def test_json_with_overrides(self):
		with tempfile.TemporaryDirectory() as tmp:
			path = Path(tmp) / 'config.json'
			path.write_text(json.dumps({ 'epochs': 2, 'seed': 5, 'channels': [8, 4] }), encoding='utf-8')
			config = TrainConfig.from_json(path, seed=7, mode=None)
		self.assertEqual(config.epochs, 2)
		self.assertEqual(config.seed, 7)
		self.assertEqual(config.channels, (8, 4))
		self.assertEqual(TrainConfig.from_dict(config.to_dict()), config)

class TrainTest(SimpleTestCase):
	def test_deterministic(self):
		data = [p for p in synth_generate(12, n_classes=2, size=8, seed=0) if p.class_id == 0]
		config = TrainConfig(epochs=2, **TINY)
		first = train(data, config)
		second = train(data, config)
		self.assertEqual(first, second)
		self.assertEqual(first.n_train, 12)
		self.assertEqual(len(first.history), 2)

	def test_loss_decreases(self):
		data = [p for p in synth_generate(16, n_classes=2, size=8, seed=1) if p.class_id == 0]
		improved = 0
		for seed in range(5):
			model = train(data, TrainConfig(epochs=5, lr=1e-2, seed=seed, **TINY))
			improved += model.history[-1]['total'] < model.history[0]['total']
		self.assertGreaterEqual(improved, 4)

	def test_regularized_training_keeps_single_sample_batch(self):
		data = [p for p in synth_generate(9, n_classes=2, size=8, seed=2) if p.class_id == 0]
		for regularizer in ('direct', 'det', 'logdet'):
			with self.subTest(regularizer=regularizer):
				model = train(data, TrainConfig(epochs=1, regularizer=regularizer, **TINY))
				self.assertEqual(model.n_train, 9)
				self.assertTrue(np.isfinite(model.history[0]['total']))

	def test_empty_dataset(self):
		with self.assertRaises(ParameterError):
			train([], TrainConfig(**TINY))
