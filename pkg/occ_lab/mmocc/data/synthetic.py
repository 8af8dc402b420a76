"""
mmocc.data.synthetic
動作確認用の合成マルチモーダルデータセット。

クラス k の左画像には (S/4)x(S/4) の明るい正方形をクラス固有の位置に、右画像には左右反転した位置に
配置する。正方形の位置は S/4 四方のセルからなる 4x4 の格子上で決まり、最初の4クラスは
それぞれ別の象限に置かれる。
"""
import numpy as np

from ..error import ParameterError
from .dataset import SamplePair

# 4x4 格子上のセル (行, 列)。先頭4つは各象限の左上セル。
CLASS_CELLS: tuple[tuple[int, int], ...] = (
	(0, 0), (0, 2), (2, 0), (2, 2),
	(1, 1), (1, 3), (3, 1), (3, 3),
	(0, 1), (0, 3), (2, 1), (2, 3),
	(1, 0), (1, 2), (3, 0), (3, 2),
)

def square_position(class_id: int, size: int, mirrored: bool = False) -> tuple[int, int]:
	"""クラスの正方形の左上座標 (行, 列)。mirrored=True の場合は左右反転した位置。"""
	row, col = CLASS_CELLS[class_id]
	if mirrored:
		col = 3 - col
	q = size // 4
	return row * q, col * q

def synth_generate(
		n_per_class: int,
		n_classes: int = 4,
		size: int = 32,
		noise_sigma: float = 0.1,
		seed: int = 0,
		channels: int = 3,
) -> list[SamplePair]:
	"""
	合成データセットを生成する。

	Args:
		n_per_class: 1クラスあたりのサンプル数。
		n_classes: クラス数 (2 以上 16 以下)。
		size: 画像サイズ S (4 の倍数)。
		noise_sigma: 加えるガウスノイズの標準偏差。
		seed: 乱数シード。
		channels: チャネル数。

	Returns:
		クラス順に並んだ SamplePair のリスト。
	"""
	if n_per_class < 1:
		raise ParameterError("n_per_class must be >= 1.", details={ 'n_per_class': n_per_class })
	if not (2 <= n_classes <= len(CLASS_CELLS)):
		raise ParameterError(f"n_classes must be in [2, {len(CLASS_CELLS)}].", details={ 'n_classes': n_classes })
	if size < 4 or size % 4:
		raise ParameterError("size must be a positive multiple of 4.", details={ 'size': size })
	if noise_sigma < 0:
		raise ParameterError("noise_sigma must be non-negative.", details={ 'noise_sigma': noise_sigma })
	if channels < 1:
		raise ParameterError("channels must be positive.", details={ 'channels': channels })

	rng = np.random.default_rng(seed)
	q = size // 4
	pairs = []
	for k in range(n_classes):
		lr, lc = square_position(k, size)
		rr, rc = square_position(k, size, mirrored=True)
		for i in range(n_per_class):
			left = np.zeros((channels, size, size), dtype=np.float64)
			right = np.zeros((channels, size, size), dtype=np.float64)
			left[:, lr:lr + q, lc:lc + q] = 1.0
			right[:, rr:rr + q, rc:rc + q] = 1.0
			if noise_sigma > 0:
				left += rng.normal(0.0, noise_sigma, left.shape)
				right += rng.normal(0.0, noise_sigma, right.shape)
			pairs.append(SamplePair(
				left=np.clip(left, 0.0, 1.0).astype(np.float32),
				right=np.clip(right, 0.0, 1.0).astype(np.float32),
				class_id=k,
				sample_id=f"c{k}_{i:04d}",
			))
	return pairs
