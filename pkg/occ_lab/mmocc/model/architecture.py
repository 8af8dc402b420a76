"""
mmocc.model.architecture
共有重みの畳み込みオートエンコーダの構成とパラメータを定義する。
"""
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal, Optional
import numpy as np

from ..error import ParameterError
from ..numerics import LayerStack, Conv2d, BatchNorm2d, Activation, MaxPool2d, Dropout, Upsample2x

BranchMode = Literal['multimodal', 'unimodal_left', 'unimodal_right']
BRANCH_MODES: tuple[str, ...] = ('multimodal', 'unimodal_left', 'unimodal_right')

def branches(mode: str) -> tuple[int, ...]:
	"""
	モードが使用するモダリティの番号 (0: 左, 1: 右)。
	"""
	if mode == 'multimodal':
		return 0, 1
	elif mode == 'unimodal_left':
		return (0,)
	elif mode == 'unimodal_right':
		return (1,)
	raise ParameterError(f"Unknown mode: {mode}", details={ 'mode': mode, 'choices': BRANCH_MODES })

@dataclass(frozen=True)
class ArchConfig:
	"""
	Attributes:
		input_size: 入力画像の一辺 S。
		in_channels: 入力チャネル数 C。
		channels: エンコーダ各ブロックの畳み込みフィルタ数。デコーダは逆順を用いる。
		dropout: ドロップアウト率。
	"""
	input_size: int = 32
	in_channels: int = 3
	channels: tuple[int, ...] = (64, 32, 16)
	dropout: float = 0.2

	def __post_init__(self):
		object.__setattr__(self, 'channels', tuple(int(c) for c in self.channels))
		if not self.channels or any(c < 1 for c in self.channels):
			raise ParameterError("channels must be a non-empty list of positive integers.",
										details={ 'channels': self.channels })
		if self.in_channels < 1:
			raise ParameterError("in_channels must be positive.", details={ 'in_channels': self.in_channels })
		if self.input_size < self.downsample or self.input_size % self.downsample:
			raise ParameterError(
				f"input_size {self.input_size} must be a positive multiple of {self.downsample}.",
				details={ 'input_size': self.input_size, 'blocks': len(self.channels) }
			)
		if not (0.0 <= self.dropout < 1.0):
			raise ParameterError("dropout must be in [0, 1).", details={ 'dropout': self.dropout })

	@property
	def downsample(self) -> int:
		return 2 ** len(self.channels)

	@property
	def feature_size(self) -> int:
		"""エンコーダ出力の空間サイズ (m = p)。"""
		return self.input_size // self.downsample

	@property
	def feature_shape(self) -> tuple[int, int, int]:
		"""(d, m, p)"""
		return self.channels[-1], self.feature_size, self.feature_size

	@property
	def feature_dim(self) -> int:
		"""1モダリティ分の平坦化した特徴の次元 m * p * d。"""
		d, m, p = self.feature_shape
		return d * m * p

	def embedding_dim(self, mode: str = 'multimodal') -> int:
		return len(branches(mode)) * self.feature_dim

def build_encoder(arch: ArchConfig) -> LayerStack:
	"""畳み込み → バッチ正規化 → ReLU → 最大値プーリング → ドロップアウト のブロックを重ねる。"""
	layers = []
	prev = arch.in_channels
	for k, ch in enumerate(arch.channels):
		layers += [
			Conv2d(f"encoder.{k}.conv", prev, ch),
			BatchNorm2d(f"encoder.{k}.bn", ch),
			Activation(f"encoder.{k}.relu", 'relu'),
			MaxPool2d(f"encoder.{k}.pool"),
			Dropout(f"encoder.{k}.dropout", arch.dropout),
		]
		prev = ch
	return LayerStack(layers)

def build_decoder(arch: ArchConfig) -> LayerStack:
	"""
	アップサンプリング → 畳み込み → ReLU のブロックの後、出力畳み込みとシグモイド。
	デコーダにはバッチ正規化を置かない。再構成誤差は潜在表現のスケールに依存する。
	"""
	layers = []
	prev = arch.channels[-1]
	for k, ch in enumerate(reversed(arch.channels)):
		layers += [
			Upsample2x(f"decoder.{k}.upsample"),
			Conv2d(f"decoder.{k}.conv", prev, ch),
			Activation(f"decoder.{k}.relu", 'relu'),
		]
		prev = ch
	layers += [
		Conv2d("decoder.out.conv", prev, arch.in_channels),
		Activation("decoder.out.sigmoid", 'sigmoid'),
	]
	return LayerStack(layers)

@dataclass
class ModelParams:
	"""
	エンコーダ (E1 = E2) とデコーダ (D1 = D2) のパラメータ、およびバッチ正規化の移動統計量。
	エンコーダ・デコーダのパラメータはそれぞれ1組しか存在しない。
	"""
	arch: ArchConfig
	tensors: dict[str, np.ndarray] = field(default_factory=dict)
	buffers: dict[str, np.ndarray] = field(default_factory=dict)

	@classmethod
	def initialize(cls, arch: ArchConfig, seed: int = 0, dtype=np.float32) -> 'ModelParams':
		rng = np.random.default_rng(seed)
		params = cls(arch)
		for stack in (params.encoder, params.decoder):
			params.tensors.update(stack.init_params(rng, dtype))
			params.buffers.update(stack.init_buffers(dtype))
		return params

	@cached_property
	def encoder(self) -> LayerStack:
		return build_encoder(self.arch)

	@cached_property
	def decoder(self) -> LayerStack:
		return build_decoder(self.arch)

	@property
	def dtype(self):
		return next(iter(self.tensors.values())).dtype

	def expected_shapes(self) -> dict[str, tuple[int, ...]]:
		shapes = self.encoder.param_shapes()
		shapes.update(self.decoder.param_shapes())
		return shapes

	def copy(self, dtype: Optional[type] = None) -> 'ModelParams':
		dtype = dtype or self.dtype
		return ModelParams(
			self.arch,
			{ k: v.astype(dtype, copy=True) for k, v in self.tensors.items() },
			{ k: v.astype(dtype, copy=True) for k, v in self.buffers.items() },
		)

	def freeze(self) -> 'ModelParams':
		"""全テンソルを書き込み不可にする。"""
		for arr in (*self.tensors.values(), *self.buffers.values()):
			arr.flags.writeable = False
		return self

	def __eq__(self, other):
		if not isinstance(other, ModelParams):
			return NotImplemented
		return (
				self.arch == other.arch and
				self.tensors.keys() == other.tensors.keys() and
				self.buffers.keys() == other.buffers.keys() and
				all(np.array_equal(v, other.tensors[k]) and v.dtype == other.tensors[k].dtype for k, v in self.tensors.items()) and
				all(np.array_equal(v, other.buffers[k]) for k, v in self.buffers.items())
		)
