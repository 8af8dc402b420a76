"""
mmocc.model.network
共有重みオートエンコーダの順伝播と損失。

損失 (1バッチ N 件):
	L = 1/N Σ_i ( ||φ_i||² + ||D(E(x_i)) - x_i||² + ||D(E(x'_i)) - x'_i||² ) + λ R(Φ)

二乗ノルムは全座標の2乗和 (次元平均ではない) で、バッチについてのみ平均をとる。
"""
from dataclasses import dataclass
from typing import Optional, Sequence
import logging
import numpy as np

from ..error import DimensionError, NumericError, ParameterError
from ..numerics import LayerContext, Mode, check_mode, numeric_gradient, relative_error
from ..numerics.gradcheck import sample_away_from_kinks
from .architecture import ArchConfig, ModelParams, branches
from .regularizer import wld_penalty_with_grad, REGULARIZERS

logger = logging.getLogger(__name__)

@dataclass(frozen=True)
class LossBreakdown:
	"""
	損失の内訳。再構成項と正則化項は重みを掛ける前の値で、
	total = compactness + recon_weight * (recon_x + recon_xprime) + λ * diversity_penalty となる。
	バッチが1件の場合、diversity_penalty は 0 (正則化なし) になる。
	"""
	compactness: float
	recon_x: float
	recon_xprime: float
	diversity_penalty: float
	total: float
	recon_weight: float = 1.0

	def as_dict(self) -> dict[str, float]:
		return {
			'compactness': self.compactness,
			'recon_x': self.recon_x,
			'recon_xprime': self.recon_xprime,
			'diversity_penalty': self.diversity_penalty,
			'total': self.total,
			'recon_weight': self.recon_weight,
		}

def _check_images(params: ModelParams, x: np.ndarray, what: str = 'input'):
	arch = params.arch
	expected = (arch.in_channels, arch.input_size, arch.input_size)
	if x.ndim != 4 or x.shape[1:] != expected:
		raise DimensionError(
			f"{what} must have shape [B, {expected[0]}, {expected[1]}, {expected[2]}], but given {x.shape}.",
			details={ 'shape': x.shape, 'expected': expected }
		)

def encode(
		params: ModelParams,
		x: np.ndarray,
		mode: Mode = 'eval',
		rng: Optional[np.random.Generator] = None,
) -> tuple[np.ndarray, list[LayerContext]]:
	"""
	エンコーダを適用する。E1 と E2 は同じパラメータを使う同一の関数である。

	Args:
		params: モデルパラメータ。
		x: 画像 [B, C, S, S]。
		mode: 'train' または 'eval'。
		rng: train モードのドロップアウトに使う乱数生成器。

	Returns:
		特徴マップ [B, d, S/8, S/8] と各層のコンテキスト。
	"""
	_check_images(params, x)
	return params.encoder.forward(x.astype(params.dtype, copy=False), params.tensors, params.buffers, mode, rng)

def reconstruct(
		params: ModelParams,
		feature_map: np.ndarray,
		mode: Mode = 'eval',
		rng: Optional[np.random.Generator] = None,
) -> tuple[np.ndarray, list[LayerContext]]:
	"""
	デコーダで特徴マップから画像 [B, C, S, S] を復元する。出力はシグモイドにより [0, 1]。
	"""
	expected = params.arch.feature_shape
	if feature_map.ndim != 4 or feature_map.shape[1:] != expected:
		raise DimensionError(
			f"Feature map must have shape [B, {expected[0]}, {expected[1]}, {expected[2]}], but given {feature_map.shape}.",
			details={ 'shape': feature_map.shape, 'expected': expected }
		)
	return params.decoder.forward(feature_map, params.tensors, params.buffers, mode, rng)

def flatten(feature_map: np.ndarray) -> np.ndarray:
	"""
	特徴マップ [B, d, m, p] を m×p×d の行優先 (チャネルが最も速く変化) で [B, m*p*d] に平坦化する。
	"""
	return np.ascontiguousarray(feature_map.transpose(0, 2, 3, 1)).reshape(feature_map.shape[0], -1)

def unflatten(flat: np.ndarray, feature_shape: tuple[int, int, int]) -> np.ndarray:
	d, m, p = feature_shape
	return flat.reshape(flat.shape[0], m, p, d).transpose(0, 3, 1, 2)

def embed(
		params: ModelParams,
		x: Optional[np.ndarray],
		xprime: Optional[np.ndarray],
		mode: Mode = 'eval',
		rng: Optional[np.random.Generator] = None,
		branch_mode: str = 'multimodal',
) -> np.ndarray:
	"""
	φ = concat(Flat(E(x)), Flat(E(x'))) を計算する。

	Returns:
		埋め込み [B, D]。各行が1サンプルの φ。単一モダリティの場合は選択した側のみ。
	"""
	views = (x, xprime)
	parts = []
	for side in branches(branch_mode):
		if views[side] is None:
			raise ParameterError(f"Mode '{branch_mode}' requires modality {side}.", details={ 'mode': branch_mode })
		z, _ = encode(params, views[side], mode, rng)
		parts.append(flatten(z))
	return np.concatenate(parts, axis=1)

def compute_loss(
		params: ModelParams,
		x: Optional[np.ndarray],
		xprime: Optional[np.ndarray],
		branch_mode: str = 'multimodal',
		regularizer: str = 'none',
		lam: float = 0.0,
		rng: Optional[np.random.Generator] = None,
		recon_weight: float = 1.0,
) -> tuple[LossBreakdown, dict[str, np.ndarray]]:
	"""
	学習用 (train モード) の損失と全パラメータに関する解析勾配を計算する。

	Args:
		params: モデルパラメータ。train モードのバッチ正規化により移動統計量が更新される。
		x: 第1モダリティのバッチ [N, C, S, S]。
		xprime: 第2モダリティのバッチ。単一モダリティの場合、使わない側は None でもよい。
		branch_mode: 'multimodal', 'unimodal_left', 'unimodal_right'。
		regularizer: 'none', 'direct', 'det', 'logdet'。
		lam: 正則化項の重み λ。
		rng: ドロップアウト用の乱数生成器。
		recon_weight: 再構成項の重み。0 にすると圧縮項のみで学習する。

	Returns:
		損失の内訳と、パラメータ名 -> 勾配 の辞書。
	"""
	if regularizer not in REGULARIZERS:
		raise ParameterError(f"Unknown regularizer: {regularizer}", details={ 'regularizer': regularizer })
	views = (x, xprime)
	sides = branches(branch_mode)
	for side in sides:
		if views[side] is None:
			raise ParameterError(f"Mode '{branch_mode}' requires modality {side}.", details={ 'mode': branch_mode })
	n = views[sides[0]].shape[0]
	if n == 0:
		raise ParameterError("compute_loss requires a non-empty batch.")
	if any(views[side].shape[0] != n for side in sides):
		raise DimensionError("Both modalities must have the same batch size.")

	dtype = params.dtype
	forward = []
	recon = [0.0, 0.0]
	for side in sides:
		target = views[side].astype(dtype, copy=False)
		z, enc_ctx = encode(params, target, 'train', rng)
		r, dec_ctx = reconstruct(params, z, 'train', rng)
		diff = r - target
		recon[side] = float(np.sum(diff.astype(np.float64) ** 2)) / n
		forward.append((side, z, enc_ctx, diff, dec_ctx))

	phi = np.concatenate([flatten(z) for _, z, _, _, _ in forward], axis=1)
	compactness = float(np.sum(phi.astype(np.float64) ** 2)) / n

	penalty = 0.0
	grad_phi_reg = None
	if regularizer != 'none' and n < 2:
		logger.debug("Skipping the %s penalty for a batch of %d sample.", regularizer, n)
	elif regularizer != 'none':
		penalty, grad_phi_reg = wld_penalty_with_grad(phi, regularizer)

	total = compactness + recon_weight * (recon[0] + recon[1]) + lam * penalty
	if not np.isfinite(total):
		raise NumericError("Loss is not finite.", details={ 'compactness': compactness, 'recon': recon, 'penalty': penalty })

	grads: dict[str, np.ndarray] = { }
	scale = dtype.type(2.0 / n)
	feature_dim = params.arch.feature_dim
	for i, (side, z, enc_ctx, diff, dec_ctx) in enumerate(forward):
		grad_z = scale * z
		if recon_weight:
			grad_z = grad_z + params.decoder.backward(dec_ctx, dtype.type(recon_weight) * scale * diff, grads)
		if grad_phi_reg is not None and lam:
			block = grad_phi_reg[:, i * feature_dim:(i + 1) * feature_dim]
			grad_z = grad_z + dtype.type(lam) * unflatten(block, params.arch.feature_shape)
		params.encoder.backward(enc_ctx, grad_z, grads)

	breakdown = LossBreakdown(
		compactness=compactness,
		recon_x=recon[0],
		recon_xprime=recon[1],
		diversity_penalty=penalty,
		total=total,
		recon_weight=float(recon_weight),
	)
	return breakdown, grads

def check_loss_gradients(
		seed: int = 0,
		branch_mode: str = 'multimodal',
		regularizer: str = 'none',
		lam: float = 0.0,
		batch_size: int = 2,
		eps: float = 1e-5,
) -> float:
	"""
	小さな構成 (S=8, 1ブロック, 1チャネル入力, float64) で compute_loss の勾配を数値勾配と比較する。

	バッチ正規化の直前にある畳み込みのバイアスは損失に影響しない (勾配が恒等的に0) ため、
	それらは比較から除外し、解析勾配が0であることのみを確認する。

	Returns:
		最大相対誤差。
	"""
	arch = ArchConfig(input_size=8, in_channels=1, channels=(2,), dropout=0.25)
	params = ModelParams.initialize(arch, seed=seed, dtype=np.float64)
	rng = np.random.default_rng(seed + 1000)
	x = rng.uniform(0.0, 1.0, (batch_size, 1, 8, 8))
	xprime = rng.uniform(0.0, 1.0, (batch_size, 1, 8, 8))
	# 入力が全て 0 の位置が ReLU の折れ点に乗らないよう、デコーダのバイアスを 0 から離す
	for key, value in params.tensors.items():
		if key.startswith('decoder.') and key.endswith('.conv.bias') and not key.startswith('decoder.out'):
			value[...] = sample_away_from_kinks(rng, value.shape)

	def loss(fresh_seed=seed) -> tuple[LossBreakdown, dict]:
		return compute_loss(
			params, x, xprime, branch_mode, regularizer, lam, np.random.default_rng(fresh_seed)
		)

	_, analytic = loss()
	inert = { k for k in params.tensors if k.startswith('encoder.') and k.endswith('.conv.bias') }
	errors = []
	for key, value in params.tensors.items():
		if key in inert:
			if key in analytic and np.max(np.abs(analytic[key])) > 1e-8:
				raise NumericError(f"Gradient of '{key}' should vanish before batch normalization.")
			continue
		numeric = numeric_gradient(lambda: loss()[0].total, value, eps)
		errors.append(relative_error(analytic.get(key, np.zeros_like(value)), numeric))
	error = max(errors)
	logger.debug("loss gradient check (seed=%d, mode=%s, reg=%s): %.3e", seed, branch_mode, regularizer, error)
	return error
