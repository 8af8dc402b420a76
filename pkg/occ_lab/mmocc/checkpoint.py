"""
mmocc.checkpoint
OccModel のバイナリ形式での保存・読み込み。

形式 (すべてリトルエンディアン):
	magic 'MOCC' | version u16
	config: u32 長さ + UTF-8 JSON (キー順ソート)
	tau f32 | n_train u32 | レコード数 u32
	レコード: 名前 u16 長さ + UTF-8 | 種別 u8 (0: パラメータ, 1: 移動統計量) | 次元数 u8 | 各次元 u32 | 値 f32
"""
from pathlib import Path
import json
import logging
import os
import struct
import tempfile
import numpy as np

from .error import CheckpointError, CheckpointFormatError, CheckpointVersionError, CheckpointCorruptionError, OCCError
from .model import ModelParams

logger = logging.getLogger(__name__)

MAGIC = b'MOCC'
VERSION = 1

KIND_PARAM = 0
KIND_BUFFER = 1

def _encode_record(name: str, kind: int, array: np.ndarray) -> bytes:
	encoded = name.encode('utf-8')
	header = struct.pack('<H', len(encoded)) + encoded + struct.pack('<BB', kind, array.ndim)
	header += struct.pack(f'<{array.ndim}I', *array.shape)
	return header + np.ascontiguousarray(array, dtype='<f4').tobytes()

def to_bytes(model) -> bytes:
	"""OccModel をチェックポイント形式のバイト列に変換する。"""
	config = json.dumps(model.config.to_dict(), sort_keys=True, separators=(',', ':')).encode('utf-8')
	records = [
		*((name, KIND_PARAM, model.params.tensors[name]) for name in sorted(model.params.tensors)),
		*((name, KIND_BUFFER, model.params.buffers[name]) for name in sorted(model.params.buffers)),
	]
	parts = [
		MAGIC,
		struct.pack('<H', VERSION),
		struct.pack('<I', len(config)), config,
		struct.pack('<fII', model.tau, model.n_train, len(records)),
	]
	parts += [_encode_record(name, kind, array) for name, kind, array in records]
	return b''.join(parts)

def save_checkpoint(model, path: str | Path):
	"""
	一時ファイルに書き込んだ後に置き換えることで、アトミックに保存する。
	"""
	path = Path(path)
	data = to_bytes(model)
	tmp_name = None
	try:
		with tempfile.NamedTemporaryFile('wb', dir=path.parent, prefix=f".{path.name}.", delete=False) as f:
			tmp_name = f.name
			f.write(data)
			f.flush()
			os.fsync(f.fileno())
		os.replace(tmp_name, path)
	except OSError as e:
		if tmp_name and os.path.exists(tmp_name):
			os.unlink(tmp_name)
		raise CheckpointError(f"Failed to write checkpoint {path}: {e}", details={ 'path': str(path) }) from e
	logger.info("Saved checkpoint to %s (%d bytes)", path, len(data))

class _Reader:
	def __init__(self, data: bytes):
		self.data = memoryview(data)
		self.offset = 0

	def read(self, n: int, what: str) -> memoryview:
		if self.offset + n > len(self.data):
			raise CheckpointCorruptionError(
				f"Checkpoint is truncated while reading {what}.",
				details={ 'missing': what, 'offset': self.offset }
			)
		chunk = self.data[self.offset:self.offset + n]
		self.offset += n
		return chunk

	def unpack(self, fmt: str, what: str) -> tuple:
		return struct.unpack(fmt, self.read(struct.calcsize(fmt), what))

def from_bytes(data: bytes):
	"""チェックポイント形式のバイト列から OccModel を復元する。"""
	from .occ import OccModel, TrainConfig

	if len(data) < len(MAGIC) or bytes(data[:len(MAGIC)]) != MAGIC:
		raise CheckpointFormatError("Not a model checkpoint (bad magic).", details={ 'magic': bytes(data[:4]) })
	reader = _Reader(data)
	reader.read(len(MAGIC), 'magic')
	version, = reader.unpack('<H', 'version')
	if version != VERSION:
		raise CheckpointVersionError(
			f"Unsupported checkpoint version {version} (expected {VERSION}).",
			details={ 'version': version, 'expected': VERSION }
		)

	length, = reader.unpack('<I', 'config length')
	try:
		config = TrainConfig.from_dict(json.loads(bytes(reader.read(length, 'config')).decode('utf-8')))
	except (UnicodeDecodeError, json.JSONDecodeError, OCCError) as e:
		raise CheckpointFormatError(f"Invalid config in checkpoint: {e}") from e
	tau, n_train, n_records = reader.unpack('<fII', 'header')

	params = ModelParams(config.arch)
	for i in range(n_records):
		what = f"record {i}"
		name_len, = reader.unpack('<H', what)
		name = bytes(reader.read(name_len, what)).decode('utf-8', errors='replace')
		kind, ndim = reader.unpack('<BB', f"tensor '{name}'")
		shape = reader.unpack(f'<{ndim}I', f"tensor '{name}'")
		count = int(np.prod(shape, dtype=np.int64))
		raw = reader.read(4 * count, f"tensor '{name}'")
		array = np.frombuffer(raw, dtype='<f4').astype(np.float32).reshape(shape)
		if kind == KIND_PARAM:
			params.tensors[name] = array
		elif kind == KIND_BUFFER:
			params.buffers[name] = array
		else:
			raise CheckpointFormatError(f"Unknown record kind {kind} for '{name}'.", details={ 'name': name })
	if reader.offset != len(reader.data):
		raise CheckpointFormatError(
			f"Checkpoint has {len(reader.data) - reader.offset} trailing bytes after the last record.",
			details={ 'offset': reader.offset, 'size': len(reader.data) }
		)

	expected_buffers = { **params.encoder.init_buffers(np.float32), **params.decoder.init_buffers(np.float32) }
	for store, expected in (
			(params.tensors, params.expected_shapes()),
			(params.buffers, { k: v.shape for k, v in expected_buffers.items() }),
	):
		for name, shape in expected.items():
			if name not in store:
				raise CheckpointCorruptionError(f"Checkpoint is missing tensor '{name}'.", details={ 'missing': name })
			if store[name].shape != shape:
				raise CheckpointCorruptionError(
					f"Tensor '{name}' has shape {store[name].shape}, expected {shape}.",
					details={ 'name': name }
				)
	return OccModel(params=params.freeze(), tau=float(tau), config=config, n_train=n_train)

def load_checkpoint(path: str | Path):
	path = Path(path)
	try:
		data = path.read_bytes()
	except OSError as e:
		raise CheckpointError(f"Failed to read checkpoint {path}: {e}", details={ 'path': str(path) }) from e
	model = from_bytes(data)
	logger.info("Loaded checkpoint from %s", path)
	return model
