"""
mmocc.numerics.functional
畳み込みオートエンコーダを構成する各層の順伝播・逆伝播を numpy で実装する。

各 *_forward 関数は (出力, LayerContext) を返し、対応する *_backward 関数は
そのコンテキストを一度だけ消費して勾配を返す。
"""
from typing import Literal, Optional
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..error import DimensionError, ParameterError, StateError

Mode = Literal['train', 'eval']

BN_EPS = 1e-5
BN_MOMENTUM = 0.1

class LayerContext:
	"""
	逆伝播に必要な順伝播時のキャッシュ (プーリングの argmax、ドロップアウトのマスク、
	バッチ正規化のバッチ統計量など)。
	"""

	def __init__(self, op: str, **saved):
		self.op = op
		self._saved = saved
		self._consumed = False

	def consume(self, op: str) -> dict:
		"""保存された値を取り出す。コンテキストは一度しか使用できない。"""
		if op != self.op:
			raise StateError(
				f"Context produced by '{self.op}' cannot be used for '{op}' backward.",
				details={ 'expected': op, 'actual': self.op }
			)
		if self._consumed:
			raise StateError(f"Context of '{op}' has already been consumed.", details={ 'op': op })
		self._consumed = True
		saved, self._saved = self._saved, { }
		return saved

	@property
	def consumed(self) -> bool:
		return self._consumed

def check_mode(mode: str) -> str:
	if mode not in ('train', 'eval'):
		raise ParameterError(f"Unknown mode: {mode}", details={ 'mode': mode })
	return mode

def _require_4d(x: np.ndarray, op: str):
	if x.ndim != 4:
		raise DimensionError(
			f"{op} expects a [B, C, H, W] tensor, but given shape {x.shape}.",
			details={ 'op': op, 'shape': x.shape }
		)

# --- conv2d ---

def conv2d_forward(
		x: np.ndarray,
		kernels: np.ndarray,
		bias: np.ndarray,
		padding: int = 1,
) -> tuple[np.ndarray, LayerContext]:
	"""
	ストライド1、ゼロパディングの2次元畳み込み。

	Args:
		x: 入力 [B, C, H, W]。
		kernels: カーネル [F, C, kh, kw]。
		bias: バイアス [F]。
		padding: ゼロパディング幅。3x3 カーネルに 1 を指定すると H, W が保たれる。

	Returns:
		出力 [B, F, H', W'] とコンテキスト。
	"""
	_require_4d(x, 'conv2d')
	if kernels.ndim != 4 or x.shape[1] != kernels.shape[1]:
		raise DimensionError(
			f"conv2d: input channels {x.shape[1]} do not match kernel shape {kernels.shape}.",
			details={ 'input_shape': x.shape, 'kernel_shape': kernels.shape }
		)
	n_filters, _, kh, kw = kernels.shape
	if bias.shape != (n_filters,):
		raise DimensionError(
			f"conv2d: bias shape {bias.shape} does not match {n_filters} filters.",
			details={ 'bias_shape': bias.shape, 'filters': n_filters }
		)
	if not (0 <= padding < min(kh, kw)):
		raise ParameterError(f"conv2d: unsupported padding {padding}.", details={ 'padding': padding })

	padded = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
	cols = sliding_window_view(padded, (kh, kw), axis=(2, 3))  # [B, C, H', W', kh, kw]
	out = np.tensordot(cols, kernels, axes=([1, 4, 5], [1, 2, 3]))  # [B, H', W', F]
	out = out.transpose(0, 3, 1, 2) + bias[None, :, None, None]

	ctx = LayerContext('conv2d', cols=cols, kernels=kernels, padding=padding)
	return np.ascontiguousarray(out), ctx

def conv2d_backward(
		ctx: LayerContext, grad_out: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
	"""
	Returns:
		(入力の勾配, カーネルの勾配, バイアスの勾配)
	"""
	saved = ctx.consume('conv2d')
	cols, kernels, padding = saved['cols'], saved['kernels'], saved['padding']
	_, _, kh, kw = kernels.shape

	grad_kernels = np.tensordot(grad_out, cols, axes=([0, 2, 3], [0, 2, 3]))  # [F, C, kh, kw]
	grad_bias = grad_out.sum(axis=(0, 2, 3))

	# 入力勾配は反転カーネルとの相関
	ph, pw = kh - 1 - padding, kw - 1 - padding
	padded = np.pad(grad_out, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
	windows = sliding_window_view(padded, (kh, kw), axis=(2, 3))  # [B, F, H, W, kh, kw]
	flipped = kernels[:, :, ::-1, ::-1]
	grad_input = np.tensordot(windows, flipped, axes=([1, 4, 5], [0, 2, 3]))  # [B, H, W, C]

	return np.ascontiguousarray(grad_input.transpose(0, 3, 1, 2)), grad_kernels, grad_bias

# --- batchnorm2d ---

def batchnorm2d_forward(
		x: np.ndarray,
		gamma: np.ndarray,
		beta: np.ndarray,
		running: Optional[dict[str, np.ndarray]],
		mode: Mode,
		eps: float = BN_EPS,
		momentum: float = BN_MOMENTUM,
) -> tuple[np.ndarray, LayerContext]:
	"""
	チャネルごとのバッチ正規化。

	Args:
		x: 入力 [B, C, H, W]。
		gamma: スケール [C]。
		beta: シフト [C]。
		running:
			移動統計量 ('mean', 'var', 'count') を保持する辞書。
			train モードでは指数移動平均で更新され、eval モードではこれを用いて正規化する。
		mode: 'train' または 'eval'。

	Returns:
		正規化後の出力とコンテキスト。
	"""
	_require_4d(x, 'batchnorm2d')
	check_mode(mode)
	channels = x.shape[1]
	if gamma.shape != (channels,) or beta.shape != (channels,):
		raise DimensionError(
			f"batchnorm2d: affine parameters must have shape ({channels},).",
			details={ 'gamma_shape': gamma.shape, 'beta_shape': beta.shape }
		)
	shape = (1, channels, 1, 1)

	if mode == 'train':
		n = x.shape[0] * x.shape[2] * x.shape[3]
		if n < 1:
			raise DimensionError("batchnorm2d: empty batch in train mode.", details={ 'shape': x.shape })
		mean = x.mean(axis=(0, 2, 3))
		var = x.var(axis=(0, 2, 3))
		if running is not None:
			unbiased = var * (n / (n - 1)) if n > 1 else var
			running['mean'][...] = (1 - momentum) * running['mean'] + momentum * mean
			running['var'][...] = (1 - momentum) * running['var'] + momentum * unbiased
			running['count'][...] += 1
	else:
		if running is None or running['count'][0] < 1:
			raise StateError(
				"batchnorm2d: running statistics are not initialized; run train mode first.",
				details={ 'mode': mode }
			)
		mean, var = running['mean'].astype(x.dtype), running['var'].astype(x.dtype)

	inv_std = 1.0 / np.sqrt(var + eps)
	x_hat = (x - mean.reshape(shape)) * inv_std.reshape(shape)
	out = gamma.reshape(shape) * x_hat + beta.reshape(shape)

	ctx = LayerContext('batchnorm2d', x_hat=x_hat, gamma=gamma, inv_std=inv_std, mode=mode)
	return out, ctx

def batchnorm2d_backward(
		ctx: LayerContext, grad_out: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
	"""
	Returns:
		(入力の勾配, gamma の勾配, beta の勾配)
	"""
	saved = ctx.consume('batchnorm2d')
	x_hat, gamma, inv_std = saved['x_hat'], saved['gamma'], saved['inv_std']
	shape = (1, -1, 1, 1)

	grad_gamma = (grad_out * x_hat).sum(axis=(0, 2, 3))
	grad_beta = grad_out.sum(axis=(0, 2, 3))
	grad_x_hat = grad_out * gamma.reshape(shape)

	if saved['mode'] == 'eval':
		return grad_x_hat * inv_std.reshape(shape), grad_gamma, grad_beta

	n = grad_out.shape[0] * grad_out.shape[2] * grad_out.shape[3]
	sum_g = grad_x_hat.sum(axis=(0, 2, 3)).reshape(shape)
	sum_gx = (grad_x_hat * x_hat).sum(axis=(0, 2, 3)).reshape(shape)
	grad_input = (inv_std.reshape(shape) / n) * (n * grad_x_hat - sum_g - x_hat * sum_gx)
	return grad_input, grad_gamma, grad_beta

# --- maxpool2d ---

def maxpool2d_forward(x: np.ndarray) -> tuple[np.ndarray, LayerContext]:
	"""
	2x2 窓、ストライド2の最大値プーリング。
	同値の場合は窓内の走査順 (行優先) で最初の要素を選ぶ。
	"""
	_require_4d(x, 'maxpool2d')
	b, c, h, w = x.shape
	if h % 2 or w % 2:
		raise DimensionError(
			f"maxpool2d requires even spatial size, but given {h}x{w}.",
			details={ 'shape': x.shape }
		)
	windows = x.reshape(b, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(b, c, h // 2, w // 2, 4)
	argmax = windows.argmax(axis=-1)
	out = np.take_along_axis(windows, argmax[..., None], axis=-1)[..., 0]
	return out, LayerContext('maxpool2d', argmax=argmax, shape=x.shape)

def maxpool2d_backward(ctx: LayerContext, grad_out: np.ndarray) -> np.ndarray:
	saved = ctx.consume('maxpool2d')
	argmax = saved['argmax']
	b, c, h, w = saved['shape']
	grad = np.zeros((b, c, h // 2, w // 2, 4), dtype=grad_out.dtype)
	np.put_along_axis(grad, argmax[..., None], grad_out[..., None], axis=-1)
	return grad.reshape(b, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(b, c, h, w)

# --- dropout ---

def dropout_forward(
		x: np.ndarray,
		rate: float,
		mode: Mode,
		rng: Optional[np.random.Generator],
) -> tuple[np.ndarray, LayerContext]:
	"""
	Inverted dropout。train モードでは各要素を確率 rate で 0 にし、残りを 1/(1-rate) 倍する。
	eval モードでは恒等写像。
	"""
	check_mode(mode)
	if not (0.0 <= rate < 1.0):
		raise ParameterError(f"Dropout rate must be in [0, 1), but given {rate}.", details={ 'rate': rate })
	if mode == 'eval' or rate == 0.0:
		return x, LayerContext('dropout', mask=None)
	if rng is None:
		raise StateError("dropout in train mode requires a random generator.")

	keep = rng.random(x.shape) >= rate
	mask = keep.astype(x.dtype) * x.dtype.type(1.0 / (1.0 - rate))
	return x * mask, LayerContext('dropout', mask=mask)

def dropout_backward(ctx: LayerContext, grad_out: np.ndarray) -> np.ndarray:
	mask = ctx.consume('dropout')['mask']
	return grad_out if mask is None else grad_out * mask

# --- activation ---

def activation_forward(x: np.ndarray, kind: str) -> tuple[np.ndarray, LayerContext]:
	if kind == 'relu':
		positive = x > 0
		return np.where(positive, x, x.dtype.type(0)), LayerContext('activation', kind=kind, saved=positive)
	elif kind == 'sigmoid':
		# tanh 形式はオーバーフローしない
		out = 0.5 * (1.0 + np.tanh(0.5 * x))
		return out.astype(x.dtype, copy=False), LayerContext('activation', kind=kind, saved=out)
	raise ParameterError(f"Unknown activation: {kind}", details={ 'kind': kind })

def activation_backward(ctx: LayerContext, grad_out: np.ndarray) -> np.ndarray:
	saved = ctx.consume('activation')
	if saved['kind'] == 'relu':
		return grad_out * saved['saved']
	out = saved['saved']
	return grad_out * out * (1.0 - out)

# --- upsample2x ---

def upsample2x_forward(x: np.ndarray) -> tuple[np.ndarray, LayerContext]:
	"""最近傍補間による2倍アップサンプリング。"""
	_require_4d(x, 'upsample2x')
	return x.repeat(2, axis=2).repeat(2, axis=3), LayerContext('upsample2x', shape=x.shape)

def upsample2x_backward(ctx: LayerContext, grad_out: np.ndarray) -> np.ndarray:
	b, c, h, w = ctx.consume('upsample2x')['shape']
	return grad_out.reshape(b, c, h, 2, w, 2).sum(axis=(3, 5))
