from unittest import mock

import numpy as np
from django.test import SimpleTestCase

from mmocc.data import SamplePair
from mmocc.error import DimensionError, ParameterError
from mmocc.metrics import roc_auc, precision_at_n, recall_at_threshold, report_from_scores, evaluate

def brute_force_auc(scores, labels):
	anomalies = scores[labels == 1]
	positives = scores[labels == 0]
	wins = 0.0
	for a in anomalies:
		for p in positives:
			wins += 1.0 if a > p else 0.5 if a == p else 0.0
	return wins / (len(anomalies) * len(positives))

def brute_force_p_at_n(scores, labels):
	n = int(labels.sum())
	ranked = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
	return sum(labels[i] for i in ranked[:n]) / n

def brute_force_recall(scores, labels, tau):
	positives = [s for s, l in zip(scores, labels) if l == 0]
	return sum(1 for s in positives if s <= tau) / len(positives)

def random_instance(rng, ties: bool):
	n = int(rng.integers(2, 501))
	labels = rng.integers(0, 2, n)
	labels[0], labels[1] = 0, 1
	scores = rng.integers(0, 10, n).astype(np.float64) if ties else rng.standard_normal(n)
	return scores, labels

class RocAucTest(SimpleTestCase):
	def test_examples(self):
		self.assertEqual(roc_auc([1, 2, 3, 4], [0, 0, 1, 1]), 1.0)
		self.assertEqual(roc_auc([4, 3, 2, 1], [0, 0, 1, 1]), 0.0)
		self.assertEqual(roc_auc([1, 2, 3, 1.5], [0, 1, 0, 1]), 0.5)

	def test_brute_force_oracle(self):
		rng = np.random.default_rng(0)
		for i in range(200):
			scores, labels = random_instance(rng, ties=i % 2 == 0)
			self.assertLess(abs(roc_auc(scores, labels) - brute_force_auc(scores, labels)), 1e-12)

	def test_properties(self):
		rng = np.random.default_rng(1)
		scores = rng.standard_normal(50)
		labels = rng.integers(0, 2, 50)
		labels[:2] = (0, 1)
		self.assertAlmostEqual(roc_auc(scores, labels), 1 - roc_auc(-scores, labels), places=12)
		self.assertEqual(roc_auc(scores, labels), roc_auc(np.exp(scores), labels))

	def test_single_class(self):
		with self.assertRaises(ParameterError):
			roc_auc([1, 2], [0, 0])

class PrecisionAtNTest(SimpleTestCase):
	def test_examples(self):
		self.assertEqual(precision_at_n([5, 4, 1, 0], [1, 1, 0, 0]), 1.0)
		self.assertEqual(precision_at_n([0, 1, 4, 5], [1, 1, 0, 0]), 0.0)
		self.assertEqual(precision_at_n([3, 2, 2, 1], [1, 0, 1, 0]), 0.5)

	def test_brute_force_oracle(self):
		rng = np.random.default_rng(2)
		for i in range(200):
			scores, labels = random_instance(rng, ties=i % 2 == 0)
			self.assertEqual(precision_at_n(scores, labels), brute_force_p_at_n(scores, labels))

	def test_no_anomalies(self):
		with self.assertRaises(ParameterError):
			precision_at_n([1, 2], [0, 0])

class RecallTest(SimpleTestCase):
	def test_examples(self):
		self.assertEqual(recall_at_threshold([1, 2, 3], [0, 0, 0], 5), 1.0)
		self.assertEqual(recall_at_threshold([1, 2, 3], [0, 0, 0], 0.5), 0.0)
		self.assertAlmostEqual(recall_at_threshold([1, 2, 3, 9], [0, 0, 0, 1], 2), 2 / 3)

	def test_brute_force_oracle(self):
		rng = np.random.default_rng(3)
		for i in range(200):
			scores, labels = random_instance(rng, ties=i % 2 == 0)
			tau = float(rng.choice(scores))
			self.assertEqual(recall_at_threshold(scores, labels, tau), brute_force_recall(scores, labels, tau))

	def test_monotone_in_threshold(self):
		rng = np.random.default_rng(4)
		scores = rng.standard_normal(40)
		labels = np.zeros(40, dtype=int)
		values = [recall_at_threshold(scores, labels, t) for t in np.linspace(-3, 3, 25)]
		self.assertEqual(values, sorted(values))

	def test_no_positives(self):
		with self.assertRaises(ParameterError):
			recall_at_threshold([1.0], [1], 0.5)

class ReportTest(SimpleTestCase):
	def test_all_zero_scores(self):
		report = report_from_scores(np.zeros(6), [0, 0, 0, 1, 1, 1], tau=0.0)
		self.assertEqual(report.recall, 1.0)
		self.assertEqual(report.roc_auc, 0.5)
		self.assertEqual((report.n_test, report.n_anomalies), (6, 3))
		self.assertEqual(set(report.as_dict()), { 'recall', 'p_at_n', 'roc_auc', 'n_test', 'n_anomalies' })

	def test_order_invariance(self):
		rng = np.random.default_rng(5)
		scores = rng.standard_normal(30)
		labels = rng.integers(0, 2, 30)
		labels[:2] = (0, 1)
		order = rng.permutation(30)
		a = report_from_scores(scores, labels, 0.1)
		b = report_from_scores(scores[order], labels[order], 0.1)
		self.assertEqual(a.recall, b.recall)
		self.assertAlmostEqual(a.roc_auc, b.roc_auc, places=12)

	def test_length_mismatch(self):
		with self.assertRaises(DimensionError):
			report_from_scores([1.0, 2.0], [0], 1.0)

	def test_evaluate_uses_model_threshold(self):
		samples = [SamplePair(np.zeros((1, 8, 8)), np.zeros((1, 8, 8)), sample_id=str(i)) for i in range(4)]
		model = mock.Mock(tau=2.0)
		with mock.patch('mmocc.occ.score_samples', return_value=np.array([1.0, 3.0, 2.5, 4.0])):
			report = evaluate(model, samples, [0, 0, 1, 1])
		self.assertEqual(report.recall, 0.5)
		self.assertEqual(report.p_at_n, 0.5)
		self.assertEqual(report.roc_auc, 0.75)
