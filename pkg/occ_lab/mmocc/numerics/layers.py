"""
mmocc.numerics.layers
functional の演算を、名前付きパラメータを持つ層オブジェクトとしてまとめる。

層オブジェクトは構成情報のみを保持する不変オブジェクトであり、パラメータ・移動統計量・乱数状態は
すべて forward の引数として明示的に渡される。
"""
from typing import Mapping, Optional, Sequence
from abc import ABCMeta, abstractmethod
import numpy as np

from . import functional as F
from .functional import LayerContext, Mode

class BaseLayer(metaclass=ABCMeta):
	def __init__(self, name: str):
		self.name = name

	def param_shapes(self) -> dict[str, tuple[int, ...]]:
		"""学習パラメータの名前と形状。"""
		return { }

	def init_params(self, rng: np.random.Generator, dtype) -> dict[str, np.ndarray]:
		return { }

	def init_buffers(self, dtype) -> dict[str, np.ndarray]:
		"""学習対象外の状態 (移動統計量など)。"""
		return { }

	@abstractmethod
	def forward(
			self,
			x: np.ndarray,
			params: Mapping[str, np.ndarray],
			buffers: Optional[Mapping[str, np.ndarray]],
			mode: Mode,
			rng: Optional[np.random.Generator],
	) -> tuple[np.ndarray, LayerContext]:
		"""順伝播を行い、出力と逆伝播用のコンテキストを返す。"""
		pass

	@abstractmethod
	def backward(
			self, ctx: LayerContext, grad_out: np.ndarray
	) -> tuple[np.ndarray, dict[str, np.ndarray]]:
		"""逆伝播を行い、(入力の勾配, パラメータ名 -> 勾配) を返す。"""
		pass

	def __repr__(self):
		return f"{self.__class__.__name__}({self.name!r})"

class Conv2d(BaseLayer):
	def __init__(self, name: str, in_channels: int, out_channels: int, kernel_size: int = 3):
		super().__init__(name)
		self.in_channels = in_channels
		self.out_channels = out_channels
		self.kernel_size = kernel_size

	@property
	def weight_key(self) -> str:
		return f"{self.name}.weight"

	@property
	def bias_key(self) -> str:
		return f"{self.name}.bias"

	def param_shapes(self):
		k = self.kernel_size
		return {
			self.weight_key: (self.out_channels, self.in_channels, k, k),
			self.bias_key: (self.out_channels,),
		}

	def init_params(self, rng, dtype):
		# He 初期化
		fan_in = self.in_channels * self.kernel_size ** 2
		shape = self.param_shapes()[self.weight_key]
		return {
			self.weight_key: (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(dtype),
			self.bias_key: np.zeros(self.out_channels, dtype=dtype),
		}

	def forward(self, x, params, buffers, mode, rng):
		return F.conv2d_forward(x, params[self.weight_key], params[self.bias_key], padding=self.kernel_size // 2)

	def backward(self, ctx, grad_out):
		grad_input, grad_w, grad_b = F.conv2d_backward(ctx, grad_out)
		return grad_input, { self.weight_key: grad_w, self.bias_key: grad_b }

class BatchNorm2d(BaseLayer):
	def __init__(self, name: str, channels: int, eps: float = F.BN_EPS, momentum: float = F.BN_MOMENTUM):
		super().__init__(name)
		self.channels = channels
		self.eps = eps
		self.momentum = momentum

	def param_shapes(self):
		return { f"{self.name}.weight": (self.channels,), f"{self.name}.bias": (self.channels,) }

	def init_params(self, rng, dtype):
		return {
			f"{self.name}.weight": np.ones(self.channels, dtype=dtype),
			f"{self.name}.bias": np.zeros(self.channels, dtype=dtype),
		}

	def init_buffers(self, dtype):
		return {
			f"{self.name}.running_mean": np.zeros(self.channels, dtype=dtype),
			f"{self.name}.running_var": np.ones(self.channels, dtype=dtype),
			f"{self.name}.num_batches_tracked": np.zeros(1, dtype=dtype),
		}

	def running_view(self, buffers: Optional[Mapping[str, np.ndarray]]) -> Optional[dict[str, np.ndarray]]:
		if buffers is None:
			return None
		return {
			'mean': buffers[f"{self.name}.running_mean"],
			'var': buffers[f"{self.name}.running_var"],
			'count': buffers[f"{self.name}.num_batches_tracked"],
		}

	def forward(self, x, params, buffers, mode, rng):
		return F.batchnorm2d_forward(
			x, params[f"{self.name}.weight"], params[f"{self.name}.bias"],
			self.running_view(buffers), mode, eps=self.eps, momentum=self.momentum,
		)

	def backward(self, ctx, grad_out):
		grad_input, grad_gamma, grad_beta = F.batchnorm2d_backward(ctx, grad_out)
		return grad_input, { f"{self.name}.weight": grad_gamma, f"{self.name}.bias": grad_beta }

class MaxPool2d(BaseLayer):
	def forward(self, x, params, buffers, mode, rng):
		return F.maxpool2d_forward(x)

	def backward(self, ctx, grad_out):
		return F.maxpool2d_backward(ctx, grad_out), { }

class Dropout(BaseLayer):
	def __init__(self, name: str, rate: float):
		super().__init__(name)
		self.rate = rate

	def forward(self, x, params, buffers, mode, rng):
		return F.dropout_forward(x, self.rate, mode, rng)

	def backward(self, ctx, grad_out):
		return F.dropout_backward(ctx, grad_out), { }

class Activation(BaseLayer):
	def __init__(self, name: str, kind: str):
		super().__init__(name)
		self.kind = kind

	def forward(self, x, params, buffers, mode, rng):
		return F.activation_forward(x, self.kind)

	def backward(self, ctx, grad_out):
		return F.activation_backward(ctx, grad_out), { }

class Upsample2x(BaseLayer):
	def forward(self, x, params, buffers, mode, rng):
		return F.upsample2x_forward(x)

	def backward(self, ctx, grad_out):
		return F.upsample2x_backward(ctx, grad_out), { }

class LayerStack:
	"""
	層を順番に適用する。逆伝播ではパラメータ勾配を grads に加算する。
	"""

	def __init__(self, layers: Sequence[BaseLayer]):
		self.layers = tuple(layers)

	def param_shapes(self) -> dict[str, tuple[int, ...]]:
		shapes = { }
		for layer in self.layers:
			shapes.update(layer.param_shapes())
		return shapes

	def init_params(self, rng: np.random.Generator, dtype) -> dict[str, np.ndarray]:
		params = { }
		for layer in self.layers:
			params.update(layer.init_params(rng, dtype))
		return params

	def init_buffers(self, dtype) -> dict[str, np.ndarray]:
		buffers = { }
		for layer in self.layers:
			buffers.update(layer.init_buffers(dtype))
		return buffers

	def forward(self, x, params, buffers, mode, rng) -> tuple[np.ndarray, list[LayerContext]]:
		F.check_mode(mode)
		contexts = []
		for layer in self.layers:
			x, ctx = layer.forward(x, params, buffers, mode, rng)
			contexts.append(ctx)
		return x, contexts

	def backward(
			self,
			contexts: Sequence[LayerContext],
			grad_out: np.ndarray,
			grads: dict[str, np.ndarray],
	) -> np.ndarray:
		for layer, ctx in zip(reversed(self.layers), reversed(contexts)):
			grad_out, layer_grads = layer.backward(ctx, grad_out)
			for key, g in layer_grads.items():
				if key in grads:
					grads[key] = grads[key] + g
				else:
					grads[key] = g
		return grad_out
