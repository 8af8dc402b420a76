"""
mmocc.numerics.gradcheck
中心差分による数値勾配と解析勾配の比較。
"""
from typing import Callable, Iterator, Mapping, Optional
import logging
import numpy as np

from ..error import NumericError, ParameterError
from .functional import Mode
from .layers import BaseLayer, BatchNorm2d, Conv2d, MaxPool2d, Dropout, Activation, Upsample2x

logger = logging.getLogger(__name__)

BackwardFn = Callable[[np.ndarray], tuple[np.ndarray, Mapping[str, np.ndarray]]]
LayerFn = Callable[[Mapping[str, np.ndarray], np.ndarray], tuple[np.ndarray, BackwardFn]]

KINK_MARGIN = 1e-3

def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
	"""
	各座標の |a - n| / max(|a|, |n|, 1e-8) の最大値。
	"""
	analytic = np.asarray(analytic, dtype=np.float64)
	numeric = np.asarray(numeric, dtype=np.float64)
	if not (np.all(np.isfinite(analytic)) and np.all(np.isfinite(numeric))):
		raise NumericError("Non-finite gradient encountered during gradient check.")
	if analytic.size == 0:
		return 0.0
	denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
	return float(np.max(np.abs(analytic - numeric) / denom))

def numeric_gradient(f: Callable[[], float], array: np.ndarray, eps: float) -> np.ndarray:
	"""
	array をその場で摂動させ、スカラー関数 f の中心差分勾配を求める。
	array の値は呼び出し後に元に戻される。
	"""
	grad = np.zeros_like(array, dtype=np.float64)
	flat = array.reshape(-1)
	out = grad.reshape(-1)
	for i in range(flat.size):
		original = flat[i]
		flat[i] = original + eps
		f_plus = f()
		flat[i] = original - eps
		f_minus = f()
		flat[i] = original
		out[i] = (f_plus - f_minus) / (2 * eps)
	return grad

def grad_check(
		layer_fn: LayerFn,
		params: Optional[Mapping[str, np.ndarray]],
		inputs: np.ndarray,
		eps: float = 1e-5,
		readout_weights: Optional[np.ndarray] = None,
) -> float:
	"""
	層の解析勾配を数値勾配と比較する。

	スカラーの読み出し値は sum(readout_weights * output) (省略時は出力の総和)。

	Args:
		layer_fn:
			(params, inputs) を受け取り、(出力, backward) を返す関数。
			backward(grad_out) は (入力の勾配, パラメータ名 -> 勾配) を返す。
		params: 名前付きパラメータ。パラメータを持たない層では None。
		inputs: 入力テンソル。
		eps: 差分幅。
		readout_weights: 読み出し用の重み。出力と同じ形状。

	Returns:
		パラメータと入力の全座標にわたる最大相対誤差。
	"""
	params = dict(params or { })
	for name, arr in [*params.items(), ('input', inputs)]:
		if arr.dtype != np.float64:
			raise ParameterError(
				f"Gradient checks require float64 tensors, but '{name}' is {arr.dtype}.",
				details={ 'tensor': name, 'dtype': str(arr.dtype) }
			)

	out, backward = layer_fn(params, inputs)
	weights = np.ones_like(out) if readout_weights is None else readout_weights
	grad_input, grad_params = backward(weights.copy())

	def readout() -> float:
		value, _ = layer_fn(params, inputs)
		return float(np.sum(value * weights))

	errors = [relative_error(grad_input, numeric_gradient(readout, inputs, eps))]
	for name, arr in params.items():
		errors.append(relative_error(grad_params[name], numeric_gradient(readout, arr, eps)))
	return max(errors)

def layer_fn_for(
		layer: BaseLayer,
		mode: Mode = 'train',
		seed: int = 0,
		buffers: Optional[Mapping[str, np.ndarray]] = None,
) -> LayerFn:
	"""
	層オブジェクトを grad_check 用の関数に変換する。
	呼び出しのたびに同じシードの乱数生成器を使うため、ドロップアウトのマスクは固定される。
	"""
	def fn(params, inputs):
		out, ctx = layer.forward(inputs, params, buffers, mode, np.random.default_rng(seed))
		return out, lambda grad_out: layer.backward(ctx, grad_out)

	return fn

def sample_away_from_kinks(rng: np.random.Generator, shape, margin: float = KINK_MARGIN) -> np.ndarray:
	"""ReLU の折れ点 0 から margin 以上離れた値を生成する。"""
	magnitude = rng.uniform(10 * margin, 1.0, size=shape)
	return magnitude * rng.choice([-1.0, 1.0], size=shape)

def sample_tie_free(rng: np.random.Generator, shape, gap: float = KINK_MARGIN) -> np.ndarray:
	"""すべての要素が互いに gap 以上離れた値を生成する (プーリングの同値を避ける)。"""
	n = int(np.prod(shape))
	spacing = max(gap * 10, 1.0 / n)
	return (rng.permutation(n) * spacing - 0.5 * n * spacing).reshape(shape).astype(np.float64)

def check_layers(seed: int, eps: float = 1e-5) -> Iterator[tuple[str, float]]:
	"""
	全種類の層について grad_check を実行し、(層名, 最大相対誤差) を順に返す。
	"""
	rng = np.random.default_rng(seed)
	dtype = np.float64

	conv = Conv2d('conv', 2, 3)
	conv_params = { key: rng.standard_normal(shape) * 0.1 for key, shape in conv.param_shapes().items() }
	yield 'conv2d', grad_check(layer_fn_for(conv), conv_params, rng.standard_normal((2, 2, 5, 5)), eps)

	bn = BatchNorm2d('bn', 3)
	bn_params = { 'bn.weight': rng.uniform(0.5, 1.5, 3), 'bn.bias': rng.standard_normal(3) }
	x = rng.standard_normal((4, 3, 3, 3))
	# 総和の読み出しは入力勾配が恒等的に 0 になるため、乱数の重みで読み出す
	readout_weights = rng.standard_normal(x.shape)
	yield 'batchnorm2d', grad_check(
		layer_fn_for(bn, buffers=bn.init_buffers(dtype)), bn_params, x, eps, readout_weights=readout_weights
	)

	x = sample_tie_free(rng, (2, 2, 4, 4))
	yield 'maxpool2d', grad_check(layer_fn_for(MaxPool2d('pool')), None, x, eps, readout_weights=rng.standard_normal((2, 2, 2, 2)))

	x = rng.standard_normal((2, 3, 4, 4))
	yield 'dropout', grad_check(layer_fn_for(Dropout('drop', 0.3), seed=seed), None, x, eps)

	x = sample_away_from_kinks(rng, (2, 3, 4, 4))
	yield 'relu', grad_check(layer_fn_for(Activation('relu', 'relu')), None, x, eps, readout_weights=rng.standard_normal(x.shape))

	x = rng.standard_normal((2, 3, 4, 4)) * 2
	yield 'sigmoid', grad_check(layer_fn_for(Activation('sigmoid', 'sigmoid')), None, x, eps)

	x = rng.standard_normal((2, 3, 3, 3))
	yield 'upsample2x', grad_check(layer_fn_for(Upsample2x('up')), None, x, eps, readout_weights=rng.standard_normal((2, 3, 6, 6)))
