"""
mmocc.optim
重み減衰 (L2 を勾配に加える古典的な形式) 付きの Adam。
"""
from typing import Mapping
import numpy as np

from .error import NumericError, ParameterError, DimensionError

class AdamState:
	"""
	パラメータごとの1次・2次モーメントと更新回数。
	"""

	def __init__(self):
		self.m: dict[str, np.ndarray] = { }
		self.v: dict[str, np.ndarray] = { }
		self.t: int = 0

	def __repr__(self):
		return f"{self.__class__.__name__}(t={self.t}, params={len(self.m)})"

class Adam:
	def __init__(
			self,
			lr: float = 1e-3,
			beta1: float = 0.9,
			beta2: float = 0.999,
			eps: float = 1e-8,
			weight_decay: float = 0.0,
	):
		if not lr > 0:
			raise ParameterError(f"Learning rate must be positive, but given {lr}.", details={ 'lr': lr })
		if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
			raise ParameterError("Adam betas must be in [0, 1).", details={ 'beta1': beta1, 'beta2': beta2 })
		if weight_decay < 0:
			raise ParameterError("Weight decay must be non-negative.", details={ 'weight_decay': weight_decay })
		self.lr = lr
		self.beta1 = beta1
		self.beta2 = beta2
		self.eps = eps
		self.weight_decay = weight_decay
		self.state = AdamState()

	def step(self, params: dict[str, np.ndarray], grads: Mapping[str, np.ndarray]):
		"""
		params をその場で更新する。

		Args:
			params: パラメータ名 -> 値。
			grads: パラメータ名 -> 勾配。勾配のないパラメータは勾配 0 として扱う。
		"""
		adam_step(params, grads, self.state, self.lr, self.beta1, self.beta2, self.eps, self.weight_decay)

def adam_step(
		params: dict[str, np.ndarray],
		grads: Mapping[str, np.ndarray],
		state: AdamState,
		lr: float = 1e-3,
		beta1: float = 0.9,
		beta2: float = 0.999,
		eps: float = 1e-8,
		weight_decay: float = 0.0,
):
	"""
	Adam の1ステップ。

	g' = g + weight_decay * θ
	m <- β1 m + (1 - β1) g'
	v <- β2 v + (1 - β2) g'^2
	θ <- θ - lr * m̂ / (sqrt(v̂) + eps)
	"""
	if not lr > 0:
		raise ParameterError(f"Learning rate must be positive, but given {lr}.", details={ 'lr': lr })
	for key, g in grads.items():
		if key not in params or g.shape != params[key].shape:
			raise DimensionError(
				f"Gradient '{key}' does not match any parameter shape.",
				details={ 'param': key, 'grad_shape': g.shape }
			)
		if not np.all(np.isfinite(g)):
			raise NumericError(f"Non-finite gradient for parameter '{key}'.", details={ 'param': key })

	state.t += 1
	bc1 = 1.0 - beta1 ** state.t
	bc2 = 1.0 - beta2 ** state.t

	for key in sorted(params):
		theta = params[key]
		g = grads.get(key)
		g = np.zeros_like(theta) if g is None else g.astype(theta.dtype, copy=False)
		if weight_decay:
			g = g + weight_decay * theta

		if key not in state.m:
			state.m[key] = np.zeros_like(theta)
			state.v[key] = np.zeros_like(theta)
		m, v = state.m[key], state.v[key]
		m *= beta1
		m += (1.0 - beta1) * g
		v *= beta2
		v += (1.0 - beta2) * (g * g)

		denom = np.sqrt(v / bc2) + eps
		theta -= (lr / bc1) * m / denom
