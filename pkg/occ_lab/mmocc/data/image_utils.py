"""
mmocc.data.image_utils
画像ファイルの読み書きと前処理。
"""
from pathlib import Path
import numpy as np
import cv2
from PIL import Image, UnidentifiedImageError

from ..error import IngestionError, ParameterError

def read_image(path: str | Path) -> np.ndarray:
	"""
	画像ファイル (バイナリ PPM (P6) など Pillow が読める形式) を読み込む。

	Returns:
		[H, W, 3] の uint8 配列 (RGB)。
	"""
	path = Path(path)
	try:
		with Image.open(path) as image:
			return np.array(image.convert('RGB'), dtype=np.uint8)
	except FileNotFoundError as e:
		raise IngestionError(f"Image file not found: {path}", details={ 'path': str(path) }) from e
	except (UnidentifiedImageError, OSError, SyntaxError) as e:
		raise IngestionError(f"Failed to decode image: {path} ({e})", details={ 'path': str(path) }) from e

def write_ppm(path: str | Path, image: np.ndarray):
	"""
	[H, W, 3] の uint8 配列をバイナリ PPM (P6) として保存する。
	"""
	Image.fromarray(np.ascontiguousarray(image, dtype=np.uint8), mode='RGB').save(Path(path), format='PPM')

def preprocess_image(raw: np.ndarray, size: int) -> np.ndarray:
	"""
	画像を size x size にバイリニア補間でリサイズし、画素値を [0, 255] から [0, 1] に変換する。

	Args:
		raw: [H, W, C] または [H, W] の画像 (画素値 0 - 255)。
		size: 出力の一辺 S。

	Returns:
		[C, S, S] の float32 配列。
	"""
	image = np.asarray(raw, dtype=np.float32)
	if image.ndim == 2:
		image = image[:, :, None]
	if image.ndim != 3 or image.shape[0] < 1 or image.shape[1] < 1 or image.shape[2] < 1:
		raise ParameterError(f"Cannot preprocess an image of shape {np.shape(raw)}.", details={ 'shape': np.shape(raw) })
	if size < 1:
		raise ParameterError(f"Target size must be positive, but given {size}.", details={ 'size': size })

	h, w, c = image.shape
	if (h, w) != (size, size):
		# cv2.resize は1チャネルの場合に2次元配列を返すため、チャネルごとに処理する
		image = np.stack(
			[cv2.resize(image[:, :, k], (size, size), interpolation=cv2.INTER_LINEAR) for k in range(c)],
			axis=2
		)
	return np.clip(image.transpose(2, 0, 1) / np.float32(255.0), 0.0, 1.0).astype(np.float32)

def to_uint8_image(chw: np.ndarray) -> np.ndarray:
	"""[C, S, S] の [0, 1] 画像を [S, S, C] の uint8 画像に変換する。"""
	return np.clip(np.rint(chw.transpose(1, 2, 0) * 255.0), 0, 255).astype(np.uint8)
