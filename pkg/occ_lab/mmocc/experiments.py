"""
mmocc.experiments
one-vs-rest ベンチマークと、再構成項を外した場合の潜在表現の縮退の比較。

ベンチマークでは各クラスを順に正常クラスとし、入力サイズ・ブランチ構成・正則化の組ごとに
Recall / P@n / ROC-AUC をシードで平均した行と、タスク平均の行を出力する。
"""
from dataclasses import dataclass, asdict
from typing import Callable, Iterable, Optional, Sequence
import logging
import numpy as np

from .data import SamplePair, build_task, class_ids
from .error import ParameterError
from .metrics import evaluate
from .occ import TrainConfig, train, feature_norms

logger = logging.getLogger(__name__)

AVERAGE = 'avg'

COLLAPSE_EPOCHS = 100
COLLAPSE_LR = 1e-2

@dataclass(frozen=True)
class BenchRow:
	input_size: int
	mode: str
	regularizer: str
	task: str
	recall: float
	p_at_n: float
	roc_auc: float
	n_seeds: int

	def as_dict(self) -> dict:
		return asdict(self)

def _mean_row(rows: Sequence[BenchRow], task: str) -> BenchRow:
	first = rows[0]
	return BenchRow(
		input_size=first.input_size,
		mode=first.mode,
		regularizer=first.regularizer,
		task=task,
		recall=float(np.mean([r.recall for r in rows])),
		p_at_n=float(np.mean([r.p_at_n for r in rows])),
		roc_auc=float(np.mean([r.roc_auc for r in rows])),
		n_seeds=first.n_seeds,
	)

def run_task(
		dataset: Sequence[SamplePair],
		positive_class: int,
		config: TrainConfig,
		seeds: Iterable[int],
		workers: int = 1,
) -> BenchRow:
	"""1つの正常クラスについて、シードごとに分割・学習・評価して平均をとる。"""
	reports = []
	for seed in seeds:
		task = build_task(dataset, positive_class, config.train_fraction, seed=seed)
		model = train(task.train, config.replace(seed=seed))
		reports.append(evaluate(model, task.test, task.labels, workers=workers))
	if not reports:
		raise ParameterError("At least one seed is required.")
	return BenchRow(
		input_size=config.input_size,
		mode=config.mode,
		regularizer=config.regularizer,
		task=str(positive_class),
		recall=float(np.mean([r.recall for r in reports])),
		p_at_n=float(np.mean([r.p_at_n for r in reports])),
		roc_auc=float(np.mean([r.roc_auc for r in reports])),
		n_seeds=len(reports),
	)

def run_benchmark(
		dataset_for_size: Callable[[int], Sequence[SamplePair]],
		base_config: TrainConfig,
		sizes: Sequence[int] = (32,),
		modes: Sequence[str] = ('multimodal', 'unimodal_left', 'unimodal_right'),
		regularizers: Sequence[str] = ('none',),
		seeds: Sequence[int] = (0,),
		classes: Optional[Sequence[int]] = None,
		workers: int = 1,
) -> list[BenchRow]:
	"""
	one-vs-rest プロトコルを全組み合わせについて実行する。

	Args:
		dataset_for_size: 入力サイズ S を受け取り、そのサイズに前処理済みのデータセットを返す関数。
		base_config: 各実行の元になる学習設定。mode / regularizer / input_size / seed は上書きされる。
		sizes: 入力サイズの一覧。
		modes: ブランチ構成の一覧。
		regularizers: 正則化の一覧。
		seeds: 分割・初期化に使うシードの一覧。
		classes: 正常クラスとするクラス。None の場合はデータセットの全クラス。

	Returns:
		(サイズ, 構成, 正則化) ごとに、タスク別の行の後に平均行が続く BenchRow のリスト。
	"""
	rows = []
	for size in sizes:
		dataset = dataset_for_size(size)
		task_classes = list(classes) if classes is not None else class_ids(dataset)
		if len(class_ids(dataset)) < 2:
			raise ParameterError("The benchmark needs a labeled dataset with at least two classes.")
		for mode in modes:
			for regularizer in regularizers:
				config = base_config.replace(input_size=size, mode=mode, regularizer=regularizer)
				task_rows = []
				for c in task_classes:
					row = run_task(dataset, c, config, seeds, workers=workers)
					logger.info(
						"S=%d %s/%s class %s: recall=%.3f P@n=%.3f AUC=%.3f",
						size, mode, regularizer, row.task, row.recall, row.p_at_n, row.roc_auc,
					)
					task_rows.append(row)
				rows.extend(task_rows)
				rows.append(_mean_row(task_rows, AVERAGE))
	return rows

def format_table(rows: Sequence[BenchRow]) -> str:
	header = f"{'S':>4}  {'mode':<15} {'reg':<7} {'task':>4}  {'Recall':>7} {'P@n':>7} {'ROC-AUC':>8}"
	lines = [header, '-' * len(header)]
	for r in rows:
		lines.append(
			f"{r.input_size:>4}  {r.mode:<15} {r.regularizer:<7} {r.task:>4}  "
			f"{r.recall:>7.3f} {r.p_at_n:>7.3f} {r.roc_auc:>8.3f}"
		)
	return '\n'.join(lines)

def collapse_comparison(
		train_data: Sequence[SamplePair],
		config: TrainConfig,
		epochs: Optional[int] = COLLAPSE_EPOCHS,
		lr: Optional[float] = COLLAPSE_LR,
) -> dict[str, float]:
	"""
	同じシード・設定で、損失全体と compactness 項のみ (recon_weight=0) の2通りで学習し、
	学習データの平均潜在ノルムを比べる。

	比較する2つの学習は、config のエポック数・学習率の代わりに共通のスケジュール (epochs, lr) を使う。

	Args:
		train_data: 正常クラスの学習データ。
		config: 学習設定。
		epochs: 比較に使うエポック数。None の場合は config の値。
		lr: 比較に使う学習率。None の場合は config の値。

	Returns:
		'full', 'compactness_only', 'ratio' (= compactness_only / full) を持つ辞書。
	"""
	schedule = config.replace(epochs=epochs or config.epochs, lr=lr or config.lr)
	result = { }
	for key, weight in (('full', config.recon_weight or 1.0), ('compactness_only', 0.0)):
		model = train(train_data, schedule.replace(recon_weight=weight))
		result[key] = float(np.mean(feature_norms(model.params, train_data, config.mode)))
	result['ratio'] = result['compactness_only'] / result['full'] if result['full'] > 0 else float('inf')
	logger.info(
		"mean latent norm after %d epochs (lr=%g): full=%.6f compactness_only=%.6f (ratio %.4f)",
		schedule.epochs, schedule.lr, result['full'], result['compactness_only'], result['ratio'],
	)
	return result
