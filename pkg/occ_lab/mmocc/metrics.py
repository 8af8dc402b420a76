"""
mmocc.metrics
異常検知の評価指標: Recall (正常クラス, 閾値 τ)、P@n、ROC-AUC。

ラベルは正常 0 / 異常 1 で、スコアが大きいほど異常とみなす。
"""
from dataclasses import dataclass, asdict
from typing import Sequence
import numpy as np
from sklearn.metrics import roc_auc_score

from .error import ParameterError, DimensionError

@dataclass(frozen=True)
class EvalReport:
	recall: float
	p_at_n: float
	roc_auc: float
	n_test: int
	n_anomalies: int

	def as_dict(self) -> dict:
		return asdict(self)

def _as_arrays(scores, labels) -> tuple[np.ndarray, np.ndarray]:
	scores = np.asarray(scores, dtype=np.float64).reshape(-1)
	labels = np.asarray(labels).reshape(-1)
	if scores.shape != labels.shape:
		raise DimensionError(
			f"scores and labels differ in length ({scores.size} vs {labels.size}).",
			details={ 'scores': scores.size, 'labels': labels.size }
		)
	if not np.all(np.isin(labels, (0, 1))):
		raise ParameterError("labels must be 0 (positive) or 1 (anomaly).")
	return scores, labels.astype(np.int64)

def roc_auc(scores: Sequence[float], labels: Sequence[int]) -> float:
	"""
	ランダムに選んだ異常サンプルのスコアが正常サンプルを上回る確率 (同点は 0.5 として数える)。
	"""
	scores, labels = _as_arrays(scores, labels)
	if labels.min(initial=1) == labels.max(initial=0):
		raise ParameterError("ROC-AUC requires both positive (0) and anomaly (1) samples.")
	return float(roc_auc_score(labels, scores))

def precision_at_n(scores: Sequence[float], labels: Sequence[int]) -> float:
	"""
	スコア上位 n 件 (n は異常サンプル数) に含まれる異常サンプルの割合。
	同点は添字の小さいサンプルを優先する。
	"""
	scores, labels = _as_arrays(scores, labels)
	n = int(labels.sum())
	if n == 0:
		raise ParameterError("P@n requires at least one anomaly sample.")
	# 安定ソートでスコア降順・添字昇順
	order = np.argsort(-scores, kind='stable')
	return float(labels[order[:n]].sum() / n)

def recall_at_threshold(scores: Sequence[float], labels: Sequence[int], tau: float) -> float:
	"""
	正常クラスの再現率: スコアが tau 以下の正常サンプルの割合。
	"""
	scores, labels = _as_arrays(scores, labels)
	positives = scores[labels == 0]
	if positives.size == 0:
		raise ParameterError("Recall requires at least one positive (label 0) sample.")
	return float(np.count_nonzero(positives <= tau) / positives.size)

def report_from_scores(scores: Sequence[float], labels: Sequence[int], tau: float) -> EvalReport:
	scores, labels = _as_arrays(scores, labels)
	if scores.size == 0:
		raise ParameterError("Cannot evaluate an empty test set.")
	return EvalReport(
		recall=recall_at_threshold(scores, labels, tau),
		p_at_n=precision_at_n(scores, labels),
		roc_auc=roc_auc(scores, labels),
		n_test=int(scores.size),
		n_anomalies=int(labels.sum()),
	)

def evaluate(model, test_samples, labels, workers: int = 1) -> EvalReport:
	"""
	テストデータ全件をスコア付けし、モデルの閾値 τ で3つの指標をまとめる。

	Args:
		model: OccModel。
		test_samples: テストサンプル列。
		labels: テストラベル (正常 0 / 異常 1)。
		workers: スコア計算のスレッド数。
	"""
	from .occ import score_samples

	if len(test_samples) == 0:
		raise ParameterError("Cannot evaluate an empty test set.")
	scores = score_samples(model, test_samples, workers=workers)
	return report_from_scores(scores, labels, model.tau)
