"""
mmocc.model.regularizer
潜在表現の各ユニットの多様性 (相関の低さ) を促す正則化項。

バッチ内の埋め込み行列 Φ [B, d] の各列を平均0・ノルム1に正規化した U から
K = Uᵀ U を作り、次の3種類のペナルティを定義する。

 - direct: K の非対角成分の2乗平均
 - det: 1 - det(K)
 - logdet: -logdet(K + 1e-4 I)

いずれも値が小さいほど各ユニットが無相関であることを表す。
"""
import numpy as np

from ..error import ParameterError

REGULARIZERS: tuple[str, ...] = ('none', 'direct', 'det', 'logdet')
NORM_GUARD = 1e-8
LOGDET_RIDGE = 1e-4

def _check(phi: np.ndarray, variant: str):
	if variant not in REGULARIZERS[1:]:
		raise ParameterError(f"Unknown diversity regularizer: {variant}",
									details={ 'variant': variant, 'choices': REGULARIZERS[1:] })
	if phi.ndim != 2 or phi.shape[0] < 2:
		raise ParameterError(
			f"Diversity penalty needs a [B, d] embedding matrix with B >= 2, but given {phi.shape}.",
			details={ 'shape': phi.shape }
		)

def _normalize_columns(phi: np.ndarray):
	centered = phi - phi.mean(axis=0)
	norms = np.sqrt(np.sum(centered * centered, axis=0))
	return centered, norms, centered / (norms + NORM_GUARD)

def _adjugate(k: np.ndarray) -> tuple[float, np.ndarray]:
	"""
	特異値分解による行列式と余因子行列。K が特異でも安定に計算できる。
	"""
	u, s, vt = np.linalg.svd(k)
	sign = np.linalg.det(u) * np.linalg.det(vt)
	# prod_{j != i} s_j
	prefix = np.concatenate([[1.0], np.cumprod(s[:-1])])
	suffix = np.concatenate([np.cumprod(s[::-1][:-1])[::-1], [1.0]])
	cofactors = prefix * suffix
	det = float(sign * np.prod(s))
	adj = sign * (vt.T * cofactors) @ u.T
	return det, adj

def _penalty_and_kgrad(k: np.ndarray, variant: str) -> tuple[float, np.ndarray]:
	d = k.shape[0]
	if variant == 'direct':
		if d < 2:
			return 0.0, np.zeros_like(k)
		off = k - np.diag(np.diag(k))
		scale = 1.0 / (d * (d - 1))
		return float(np.sum(off * off) * scale), 2.0 * scale * off
	elif variant == 'det':
		det, adj = _adjugate(k)
		return 1.0 - det, -adj.T
	else:
		a = k + LOGDET_RIDGE * np.eye(d)
		_, logabs = np.linalg.slogdet(a)
		return float(-logabs), -np.linalg.inv(a).T

def wld_penalty(phi: np.ndarray, variant: str) -> float:
	"""
	Args:
		phi: バッチの埋め込み [B, d] (B >= 2)。
		variant: 'direct', 'det', 'logdet' のいずれか。

	Returns:
		ペナルティの値。
	"""
	_check(phi, variant)
	_, _, u = _normalize_columns(np.asarray(phi, dtype=np.float64))
	value, _ = _penalty_and_kgrad(u.T @ u, variant)
	return value

def wld_penalty_with_grad(phi: np.ndarray, variant: str) -> tuple[float, np.ndarray]:
	"""
	ペナルティの値と phi に関する勾配を返す。
	"""
	_check(phi, variant)
	x = np.asarray(phi, dtype=np.float64)
	centered, norms, u = _normalize_columns(x)
	value, grad_k = _penalty_and_kgrad(u.T @ u, variant)

	grad_u = u @ (grad_k + grad_k.T)
	denom = norms + NORM_GUARD
	projection = np.sum(centered * grad_u, axis=0)
	# ノルム0の列 (定数列) では centered も0なので第2項は0
	second = np.divide(projection, norms * denom * denom, out=np.zeros_like(norms), where=norms > 0)
	grad_centered = grad_u / denom - centered * second
	grad_phi = grad_centered - grad_centered.mean(axis=0)
	return value, grad_phi.astype(phi.dtype, copy=False)
