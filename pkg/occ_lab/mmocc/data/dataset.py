"""
mmocc.data.dataset
2視点画像のペアデータセット、マニフェストの読み書き、一クラス分類タスクの構築。

マニフェストは UTF-8 の CSV で、ヘッダは `sample_id,left_path,right_path,class_id`。
パスはマニフェストのあるディレクトリからの相対パス。
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence
import csv
import logging
import math
import numpy as np

from ..error import IngestionError, ParameterError
from .image_utils import read_image, preprocess_image, write_ppm, to_uint8_image

logger = logging.getLogger(__name__)

MANIFEST_FIELDS = ('sample_id', 'left_path', 'right_path', 'class_id')

@dataclass
class SamplePair:
	"""
	1サンプル分の2つのモダリティ (左右の視点画像)。

	Attributes:
		left: 第1モダリティ [C, S, S] (値は [0, 1])。
		right: 第2モダリティ [C, S, S]。
		class_id: クラス番号。不明の場合は None。
		sample_id: サンプルを一意に識別する文字列。
	"""
	left: np.ndarray
	right: np.ndarray
	class_id: Optional[int] = None
	sample_id: str = ''

	def __post_init__(self):
		if self.left.shape != self.right.shape:
			raise IngestionError(
				f"Sample '{self.sample_id}': views differ in geometry {self.left.shape} vs {self.right.shape}.",
				details={ 'sample_id': self.sample_id }
			)

	@property
	def geometry(self) -> tuple[int, ...]:
		return self.left.shape

@dataclass
class OccTask:
	"""
	一クラス分類タスク。

	Attributes:
		positive_class: 正常クラスの番号。
		train: 学習データ (正常クラスのみ)。
		test: テストデータ (残りの正常クラス + 他の全クラス)。
		labels: テストデータのラベル (正常 0 / 異常 1)。
	"""
	positive_class: int
	train: list[SamplePair] = field(default_factory=list)
	test: list[SamplePair] = field(default_factory=list)
	labels: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

def stack_pairs(pairs: Sequence[SamplePair]) -> tuple[np.ndarray, np.ndarray]:
	"""サンプル列をバッチ ([N, C, S, S], [N, C, S, S]) にまとめる。"""
	return np.stack([p.left for p in pairs]), np.stack([p.right for p in pairs])

def _default_workers() -> int:
	from django.conf import settings
	return getattr(settings, 'OCC_WORKERS', 4) if settings.configured else 4

def _parse_class_id(raw: str, row: int, sample_id: str) -> Optional[int]:
	raw = (raw or '').strip()
	if not raw:
		return None
	try:
		return int(raw)
	except ValueError as e:
		raise IngestionError(
			f"Row {row}: invalid class_id '{raw}' for sample '{sample_id}'.",
			details={ 'row': row, 'sample_id': sample_id, 'class_id': raw }
		) from e

def load_dataset(
		manifest_path: str | Path,
		input_size: int = 32,
		workers: Optional[int] = None,
) -> list[SamplePair]:
	"""
	マニフェストを読み込み、各行の画像を前処理してサンプル列を返す。
	画像の読み込みは並列に行うが、結果はマニフェストの行順に並ぶ。

	Args:
		manifest_path: マニフェスト CSV のパス。
		input_size: 前処理後の画像サイズ S。
		workers: 読み込みスレッド数。None の場合は設定値 OCC_WORKERS。

	Returns:
		SamplePair のリスト。
	"""
	manifest_path = Path(manifest_path)
	if not manifest_path.is_file():
		raise IngestionError(f"Manifest not found: {manifest_path}", details={ 'path': str(manifest_path) })
	base = manifest_path.parent

	with open(manifest_path, newline='', encoding='utf-8') as f:
		reader = csv.DictReader(f)
		if reader.fieldnames is None or tuple(h.strip() for h in reader.fieldnames) != MANIFEST_FIELDS:
			raise IngestionError(
				f"Manifest header must be {','.join(MANIFEST_FIELDS)}, but given {reader.fieldnames}.",
				details={ 'path': str(manifest_path), 'header': reader.fieldnames }
			)
		rows = list(reader)

	seen: dict[str, int] = { }
	entries = []
	for i, row in enumerate(rows, start=2):  # 1行目はヘッダ
		sample_id = (row.get('sample_id') or '').strip()
		if not sample_id:
			raise IngestionError(f"Row {i}: empty sample_id.", details={ 'row': i })
		if sample_id in seen:
			raise IngestionError(
				f"Row {i}: duplicate sample_id '{sample_id}' (first seen in row {seen[sample_id]}).",
				details={ 'row': i, 'sample_id': sample_id }
			)
		seen[sample_id] = i
		if None in row:
			raise IngestionError(
				f"Row {i}: too many columns for sample '{sample_id}'.",
				details={ 'row': i, 'sample_id': sample_id, 'extra': row[None] }
			)
		paths = { key: (row.get(key) or '').strip() for key in ('left_path', 'right_path') }
		missing = [key for key, value in paths.items() if not value]
		if missing:
			raise IngestionError(
				f"Row {i}: missing {', '.join(missing)} for sample '{sample_id}'.",
				details={ 'row': i, 'sample_id': sample_id, 'missing': missing }
			)
		entries.append((
			i, sample_id,
			base / paths['left_path'], base / paths['right_path'],
			_parse_class_id(row.get('class_id'), i, sample_id),
		))

	def load_row(entry) -> SamplePair:
		row, sample_id, left_path, right_path, class_id = entry
		try:
			left = preprocess_image(read_image(left_path), input_size)
			right = preprocess_image(read_image(right_path), input_size)
		except IngestionError as e:
			raise IngestionError(
				f"Row {row} ('{sample_id}'): {e}",
				details={ 'row': row, 'sample_id': sample_id, **e.details }
			) from e
		return SamplePair(left, right, class_id, sample_id)

	with ThreadPoolExecutor(max_workers=max(1, workers or _default_workers())) as executor:
		pairs = list(executor.map(load_row, entries))

	logger.info("Loaded %d samples from %s", len(pairs), manifest_path)
	return pairs

def export_dataset(
		pairs: Sequence[SamplePair],
		out_dir: str | Path,
		manifest_name: str = 'manifest.csv',
) -> Path:
	"""
	サンプル列を PPM 画像とマニフェストとして書き出す。

	Returns:
		書き出したマニフェストのパス。
	"""
	out_dir = Path(out_dir)
	image_dir = out_dir / 'images'
	image_dir.mkdir(parents=True, exist_ok=True)

	manifest_path = out_dir / manifest_name
	with open(manifest_path, 'w', newline='', encoding='utf-8') as f:
		writer = csv.writer(f, lineterminator='\n')
		writer.writerow(MANIFEST_FIELDS)
		for pair in pairs:
			left_rel = f"images/{pair.sample_id}_left.ppm"
			right_rel = f"images/{pair.sample_id}_right.ppm"
			write_ppm(out_dir / left_rel, to_uint8_image(pair.left))
			write_ppm(out_dir / right_rel, to_uint8_image(pair.right))
			writer.writerow([pair.sample_id, left_rel, right_rel, '' if pair.class_id is None else pair.class_id])

	logger.info("Exported %d samples to %s", len(pairs), out_dir)
	return manifest_path

def class_ids(dataset: Sequence[SamplePair]) -> list[int]:
	"""データセットに含まれるクラス番号 (昇順)。"""
	return sorted({ p.class_id for p in dataset if p.class_id is not None })

def build_task(
		dataset: Sequence[SamplePair],
		positive_class: int,
		train_fraction: float = 0.66,
		seed: int = 0,
) -> OccTask:
	"""
	正常クラスのサンプルをシャッフルし、先頭 floor(train_fraction * N_pos) 件を学習データに、
	残りの正常サンプルと他クラスの全サンプルをテストデータにする。

	Returns:
		OccTask。テストラベルは正常 0、異常 1。
	"""
	if not (0.0 < train_fraction < 1.0):
		raise ParameterError("train_fraction must be in (0, 1).", details={ 'train_fraction': train_fraction })
	positives = [p for p in dataset if p.class_id == positive_class]
	if not positives:
		raise ParameterError(
			f"Class {positive_class} is not present in the dataset.",
			details={ 'positive_class': positive_class, 'classes': class_ids(dataset) }
		)
	others = [p for p in dataset if p.class_id != positive_class]

	order = np.random.default_rng(seed).permutation(len(positives))
	shuffled = [positives[i] for i in order]
	n_train = int(math.floor(train_fraction * len(positives) + 1e-9))

	train = shuffled[:n_train]
	held_out = shuffled[n_train:]
	test = held_out + others
	labels = np.array([0] * len(held_out) + [1] * len(others), dtype=np.int64)
	logger.debug("Task class=%d: %d train, %d test (%d anomalies)", positive_class, len(train), len(test), len(others))
	return OccTask(positive_class, train, test, labels)
