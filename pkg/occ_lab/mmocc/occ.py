"""
mmocc.occ
一クラス分類パイプライン: 学習、閾値の較正、異常スコア、判定。
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, asdict, replace
from pathlib import Path
from typing import Optional, Sequence
import json
import logging
import math
import numbers
import numpy as np

from .error import DimensionError, NumericError, ParameterError
from .optim import Adam
from .model import ArchConfig, ModelParams, BRANCH_MODES, REGULARIZERS, compute_loss, embed
from .data import SamplePair, stack_pairs

logger = logging.getLogger(__name__)

POSITIVE = 'positive'
ANOMALY = 'anomaly'

INTEGER_FIELDS = ('epochs', 'batch_size', 'input_size', 'in_channels', 'seed')

@dataclass(frozen=True)
class TrainConfig:
	"""
	学習設定。JSON 設定ファイルのキーはこのクラスのフィールド名と完全に一致する。
	"""
	epochs: int = 4
	batch_size: int = 32
	lr: float = 1e-3
	weight_decay: float = 1e-3
	input_size: int = 32
	mode: str = 'multimodal'
	regularizer: str = 'none'
	lam: float = 0.01
	seed: int = 0
	in_channels: int = 3
	channels: tuple[int, ...] = (64, 32, 16)
	dropout: float = 0.2
	percentile: float = 95.0
	recon_weight: float = 1.0
	train_fraction: float = 0.66

	def __post_init__(self):
		for name in INTEGER_FIELDS:
			value = getattr(self, name)
			if isinstance(value, bool) or not isinstance(value, numbers.Integral):
				raise ParameterError(f"{name} must be an integer, but given {value!r}.", details={ name: value })
			object.__setattr__(self, name, int(value))
		if any(isinstance(c, bool) or not isinstance(c, numbers.Integral) for c in self.channels):
			raise ParameterError("channels must be a list of integers.", details={ 'channels': self.channels })
		object.__setattr__(self, 'channels', tuple(int(c) for c in self.channels))
		if self.epochs < 1:
			raise ParameterError(f"epochs must be >= 1, but given {self.epochs}.", details={ 'epochs': self.epochs })
		if self.batch_size < 1:
			raise ParameterError(f"batch_size must be >= 1, but given {self.batch_size}.",
										details={ 'batch_size': self.batch_size })
		if not self.lr > 0:
			raise ParameterError(f"lr must be positive, but given {self.lr}.", details={ 'lr': self.lr })
		if self.weight_decay < 0 or self.lam < 0 or self.recon_weight < 0:
			raise ParameterError(
				"weight_decay, lam and recon_weight must be non-negative.",
				details={ 'weight_decay': self.weight_decay, 'lam': self.lam, 'recon_weight': self.recon_weight }
			)
		if self.mode not in BRANCH_MODES:
			raise ParameterError(f"Unknown mode: {self.mode}", details={ 'mode': self.mode, 'choices': BRANCH_MODES })
		if self.regularizer not in REGULARIZERS:
			raise ParameterError(f"Unknown regularizer: {self.regularizer}",
										details={ 'regularizer': self.regularizer, 'choices': REGULARIZERS })
		if not (0 < self.percentile <= 100):
			raise ParameterError("percentile must be in (0, 100].", details={ 'percentile': self.percentile })
		self.arch  # 構成の検証

	@property
	def arch(self) -> ArchConfig:
		return ArchConfig(
			input_size=self.input_size,
			in_channels=self.in_channels,
			channels=self.channels,
			dropout=self.dropout,
		)

	def to_dict(self) -> dict:
		d = asdict(self)
		d['channels'] = list(self.channels)
		return d

	@classmethod
	def from_dict(cls, data: dict, **overrides) -> 'TrainConfig':
		"""
		辞書から設定を作る。未知のキーはエラーとする。overrides の値 (None 以外) が優先される。
		"""
		if not isinstance(data, dict):
			raise ParameterError("Config must be a JSON object.", details={ 'type': type(data).__name__ })
		known = { f.name for f in fields(cls) }
		unknown = sorted(set(data) - known)
		if unknown:
			raise ParameterError(f"Unknown config keys: {', '.join(unknown)}", details={ 'unknown': unknown })
		values = dict(data)
		values.update({ k: v for k, v in overrides.items() if v is not None })
		try:
			return cls(**values)
		except TypeError as e:
			raise ParameterError(f"Invalid config: {e}") from e

	@classmethod
	def from_json(cls, path: str | Path, **overrides) -> 'TrainConfig':
		try:
			with open(path, encoding='utf-8') as f:
				data = json.load(f)
		except json.JSONDecodeError as e:
			raise ParameterError(f"Config file is not valid JSON: {path} ({e})", details={ 'path': str(path) }) from e
		return cls.from_dict(data, **overrides)

	def replace(self, **changes) -> 'TrainConfig':
		return replace(self, **changes)

@dataclass
class OccModel:
	"""
	学習済みパラメータ、閾値 τ、学習設定を持つ配布可能なモデル。

	Attributes:
		params: 凍結済みのモデルパラメータ。
		tau: 閾値。スコアが tau 以下なら正常クラスと判定する。
		config: 学習設定。
		n_train: 学習データ数。
		history: エポックごとの平均損失 (保存されない)。
	"""
	params: ModelParams
	tau: float
	config: TrainConfig
	n_train: int
	history: list[dict[str, float]] = field(default_factory=list, compare=False)

	def __post_init__(self):
		if not (math.isfinite(self.tau) and self.tau >= 0):
			raise NumericError(f"Threshold must be finite and non-negative, but given {self.tau}.", details={ 'tau': self.tau })

	@property
	def mode(self) -> str:
		return self.config.mode

def _check_geometry(samples: Sequence[SamplePair], arch: ArchConfig):
	expected = (arch.in_channels, arch.input_size, arch.input_size)
	for s in samples:
		if s.left.shape != expected or s.right.shape != expected:
			raise DimensionError(
				f"Sample '{s.sample_id}' has geometry {s.left.shape}, but the model expects {expected}.",
				details={ 'sample_id': s.sample_id, 'shape': s.left.shape, 'expected': expected }
			)

def _mean_breakdown(items: list[dict[str, float]]) -> dict[str, float]:
	return { k: float(np.mean([d[k] for d in items])) for k in items[0] }

def train(dataset: Sequence[SamplePair], config: TrainConfig) -> OccModel:
	"""
	正常クラスのデータのみでモデルを学習し、閾値を較正する。

	epochs × ceil(N / batch_size) 回の更新を行う。各エポックでシード付きのシャッフルを行い、
	最後の端数バッチも学習に使う。同じシード・設定・データからは同一のモデルが得られる。

	Args:
		dataset: 正常クラスのサンプル列。
		config: 学習設定。

	Returns:
		学習済みの OccModel。
	"""
	if len(dataset) == 0:
		raise ParameterError("Cannot train on an empty dataset.")
	arch = config.arch
	_check_geometry(dataset, arch)

	init_seq, shuffle_seq, dropout_seq = np.random.SeedSequence(config.seed).spawn(3)
	params = ModelParams.initialize(arch, seed=init_seq, dtype=np.float32)
	shuffle_rng = np.random.default_rng(shuffle_seq)
	dropout_rng = np.random.default_rng(dropout_seq)
	optimizer = Adam(lr=config.lr, weight_decay=config.weight_decay)

	left, right = stack_pairs(dataset)
	n = len(dataset)
	steps_per_epoch = math.ceil(n / config.batch_size)
	logger.info(
		"Training %s model on %d samples (S=%d, %d epochs, %d steps/epoch, regularizer=%s)",
		config.mode, n, config.input_size, config.epochs, steps_per_epoch, config.regularizer,
	)

	history = []
	step = 0
	for epoch in range(config.epochs):
		order = shuffle_rng.permutation(n)
		epoch_losses = []
		for start in range(0, n, config.batch_size):
			idx = order[start:start + config.batch_size]
			try:
				breakdown, grads = compute_loss(
					params, left[idx], right[idx],
					branch_mode=config.mode,
					regularizer=config.regularizer,
					lam=config.lam,
					rng=dropout_rng,
					recon_weight=config.recon_weight,
				)
				optimizer.step(params.tensors, grads)
			except NumericError as e:
				raise NumericError(
					f"Training diverged at step {step} (epoch {epoch}): {e}",
					details={ 'step': step, 'epoch': epoch, **e.details }
				) from e
			epoch_losses.append(breakdown.as_dict())
			logger.debug("step %d: total=%.6f", step, breakdown.total)
			step += 1
		mean = _mean_breakdown(epoch_losses)
		history.append(mean)
		logger.info(
			"epoch %d/%d: total=%.4f compactness=%.4f recon=%.4f+%.4f penalty=%.4f",
			epoch + 1, config.epochs, mean['total'], mean['compactness'],
			mean['recon_x'], mean['recon_xprime'], mean['diversity_penalty'],
		)

	params.freeze()
	tau = calibrate_threshold(params, dataset, mode=config.mode, percentile=config.percentile)
	logger.info("Calibrated threshold tau=%.6f (percentile %.1f)", tau, config.percentile)
	return OccModel(params=params, tau=tau, config=config, n_train=n, history=history)

def _sample_norm(params: ModelParams, sample: SamplePair, mode: str) -> float:
	phi = embed(params, sample.left[None], sample.right[None], 'eval', None, branch_mode=mode)[0]
	return float(np.sqrt(np.sum(phi * phi, dtype=np.float32), dtype=np.float32))

def feature_norms(
		params: ModelParams,
		samples: Sequence[SamplePair],
		mode: str = 'multimodal',
		workers: int = 1,
) -> np.ndarray:
	"""
	各サンプルの埋め込みの L2 ノルム ||φ|| (eval モード、1サンプルずつ計算)。

	Returns:
		float32 の1次元配列。
	"""
	_check_geometry(samples, params.arch)
	if workers > 1 and len(samples) > 1:
		with ThreadPoolExecutor(max_workers=workers) as executor:
			norms = list(executor.map(lambda s: _sample_norm(params, s, mode), samples))
	else:
		norms = [_sample_norm(params, s, mode) for s in samples]
	norms = np.array(norms, dtype=np.float32)
	if not np.all(np.isfinite(norms)):
		raise NumericError("Non-finite embedding norm encountered.")
	return norms

def nearest_rank(values: Sequence[float], percentile: float) -> float:
	"""
	最近順位法による百分位点: 昇順で k = ceil(percentile / 100 * N) 番目の値 (補間なし)。
	"""
	values = np.sort(np.asarray(values))
	n = len(values)
	if n == 0:
		raise ParameterError("Cannot compute a percentile of an empty set.")
	if not (0 < percentile <= 100):
		raise ParameterError("percentile must be in (0, 100].", details={ 'percentile': percentile })
	k = min(n, max(1, math.ceil(percentile * n / 100 - 1e-9)))
	return float(values[k - 1])

def calibrate_threshold(
		params: ModelParams,
		train_data: Sequence[SamplePair],
		mode: str = 'multimodal',
		percentile: float = 95.0,
) -> float:
	"""
	学習データの埋め込みノルムの percentile 百分位点を閾値 τ とする。
	"""
	if len(train_data) == 0:
		raise ParameterError("Cannot calibrate a threshold on empty data.")
	return nearest_rank(feature_norms(params, train_data, mode), percentile)

def score(model: OccModel, sample: SamplePair) -> float:
	"""
	異常スコア ||φ(y, y')||₂。値が大きいほど異常。
	"""
	_check_geometry([sample], model.params.arch)
	return _sample_norm(model.params, sample, model.mode)

def score_samples(model: OccModel, samples: Sequence[SamplePair], workers: int = 1) -> np.ndarray:
	"""複数サンプルの異常スコア。スレッド数によらず score と同じ値になる。"""
	return feature_norms(model.params, samples, model.mode, workers=workers)

def decide(value: float, tau: float) -> str:
	"""スコアが tau 以下 (境界を含む) なら正常。"""
	return POSITIVE if value <= tau else ANOMALY

def classify(model: OccModel, sample: SamplePair) -> str:
	"""
	Returns:
		'positive' (正常クラス) または 'anomaly'。
	"""
	return decide(score(model, sample), model.tau)

def classify_samples(model: OccModel, samples: Sequence[SamplePair], workers: int = 1) -> list[str]:
	return [decide(float(v), model.tau) for v in score_samples(model, samples, workers)]
