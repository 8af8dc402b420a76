import numpy as np
from django.test import SimpleTestCase

from mmocc.data import SamplePair, synth_generate
from mmocc.experiments import AVERAGE, run_benchmark, format_table, collapse_comparison
from mmocc.metrics import evaluate
from mmocc.model import REGULARIZERS
from mmocc.occ import TrainConfig, train

def square_view(cells, rng, size=16, noise_sigma=0.05) -> np.ndarray:
	q = size // 4
	view = np.zeros((3, size, size))
	for row, col in cells:
		view[:, row * q:(row + 1) * q, col * q:(col + 1) * q] = 1.0
	view += rng.normal(0.0, noise_sigma, view.shape)
	return np.clip(view, 0.0, 1.0).astype(np.float32)

def complementary_task(seed=0, n_train=24, n_positive_test=12, n_per_side=6):
	"""
	正常: 左右とも1つの正方形。異常: 左右どちらか一方にだけ正方形が1つ増える。
	片方のモダリティだけでは半数の異常が正常と区別できない。
	"""
	rng = np.random.default_rng(seed)

	def pair(extra_left, extra_right, class_id, sample_id):
		left = [(0, 0)] + ([(2, 2)] if extra_left else [])
		right = [(0, 3)] + ([(2, 1)] if extra_right else [])
		return SamplePair(square_view(left, rng), square_view(right, rng), class_id, sample_id)

	train_set = [pair(False, False, 0, f"p{i}") for i in range(n_train)]
	test = [pair(False, False, 0, f"t{i}") for i in range(n_positive_test)]
	test += [pair(True, False, 1, f"l{i}") for i in range(n_per_side)]
	test += [pair(False, True, 1, f"r{i}") for i in range(n_per_side)]
	labels = np.array([0] * n_positive_test + [1] * (2 * n_per_side))
	return train_set, test, labels

class BenchmarkTest(SimpleTestCase):
	config = TrainConfig(epochs=1, batch_size=8, input_size=8, channels=(4,))

	def test_rows_per_task_and_average(self):
		datasets = { }

		def dataset_for_size(size):
			datasets[size] = synth_generate(6, n_classes=2, size=size, seed=0)
			return datasets[size]

		rows = run_benchmark(dataset_for_size, self.config, sizes=(8,), seeds=(0,))
		self.assertEqual(len(rows), 3 * 3)
		self.assertEqual([r.task for r in rows[:3]], ['0', '1', AVERAGE])
		self.assertEqual([r.mode for r in rows[::3]], ['multimodal', 'unimodal_left', 'unimodal_right'])
		for r in rows:
			self.assertTrue(0.0 <= r.roc_auc <= 1.0)
		self.assertAlmostEqual(rows[2].roc_auc, np.mean([rows[0].roc_auc, rows[1].roc_auc]))

		table = format_table(rows)
		self.assertIn('ROC-AUC', table)
		self.assertEqual(len(table.splitlines()), 2 + len(rows))
		self.assertEqual(list(datasets), [8])

	def test_input_sizes_run_end_to_end(self):
		config = TrainConfig(epochs=1, batch_size=4, channels=(2, 2, 2))
		rows = run_benchmark(
			lambda size: synth_generate(4, n_classes=2, size=size, seed=0),
			config, sizes=(32, 64, 128), modes=('multimodal',), seeds=(0,),
		)
		self.assertEqual([r.input_size for r in rows], [32] * 3 + [64] * 3 + [128] * 3)
		for r in rows:
			with self.subTest(size=r.input_size, task=r.task):
				for value in (r.recall, r.p_at_n, r.roc_auc):
					self.assertTrue(0.0 <= value <= 1.0)

class ModalityComparisonTest(SimpleTestCase):
	config = TrainConfig(epochs=1, batch_size=8, input_size=16, channels=(8,), seed=0)

	def roc_auc(self, config):
		train_set, test, labels = complementary_task()
		return evaluate(train(train_set, config), test, labels).roc_auc

	def test_multimodal_sees_anomalies_in_either_view(self):
		auc = { mode: self.roc_auc(self.config.replace(mode=mode)) for mode in ('multimodal', 'unimodal_left', 'unimodal_right') }
		self.assertGreaterEqual(auc['multimodal'], 0.8)
		self.assertGreaterEqual(auc['multimodal'], auc['unimodal_left'])
		self.assertGreaterEqual(auc['multimodal'], auc['unimodal_right'])

	def test_regularizers_change_little(self):
		baseline = self.roc_auc(self.config)
		for regularizer in REGULARIZERS[1:]:
			with self.subTest(regularizer=regularizer):
				auc = self.roc_auc(self.config.replace(regularizer=regularizer, lam=0.01))
				self.assertLessEqual(abs(auc - baseline), 0.1)

class CollapseTest(SimpleTestCase):
	config = TrainConfig(epochs=1, batch_size=8, input_size=8, channels=(4,))

	def test_reconstruction_terms_prevent_collapse(self):
		rng = np.random.default_rng(1)
		data = [
			SamplePair(
				rng.uniform(0, 1, (3, 8, 8)).astype(np.float32),
				rng.uniform(0, 1, (3, 8, 8)).astype(np.float32),
				0, f"r{i}",
			)
			for i in range(16)
		]
		result = collapse_comparison(data, self.config, epochs=200, lr=1e-2)
		self.assertEqual(set(result), { 'full', 'compactness_only', 'ratio' })
		self.assertGreater(result['full'], 0)
		self.assertLessEqual(result['ratio'], 0.1)
