"""
mmocc.error
一クラス分類パイプラインのカスタムエラークラスを定義する。
"""

class OCCError(Exception):
	"""
	パイプライン全体で使用する基底カスタムエラークラス。
	"""

	def __init__(self, message, code='UNKNOWN_ERROR', details=None):
		super().__init__(message)
		self.code = code
		self.details = details if details is not None else { }

class DimensionError(OCCError, ValueError):
	"""
	テンソルの形状が演算の前提と一致しない場合のエラー。
	"""

	def __init__(self, message, details=None):
		super().__init__(message, 'DIMENSION_ERROR', details)

class ParameterError(OCCError, ValueError):
	"""
	引数・設定値が許容範囲外の場合のエラー。
	"""

	def __init__(self, message, details=None):
		super().__init__(message, 'PARAMETER_ERROR', details)

class StateError(OCCError, RuntimeError):
	"""
	内部状態が操作の前提を満たさない場合のエラー。
	(例: 未初期化の移動統計量による推論、使用済みコンテキストの再利用)
	"""

	def __init__(self, message, details=None):
		super().__init__(message, 'STATE_ERROR', details)

class NumericError(OCCError, ArithmeticError):
	"""
	NaN / Inf の発生、学習の発散など数値計算上のエラー。
	"""

	def __init__(self, message, details=None):
		super().__init__(message, 'NUMERIC_ERROR', details)

class IngestionError(OCCError, ValueError):
	"""
	データセットの読み込みに失敗した場合のエラー。
	details には問題のある行・パス・サンプルIDが含まれる。
	"""

	def __init__(self, message, details=None):
		super().__init__(message, 'INGESTION_ERROR', details)

class CheckpointError(OCCError):
	"""
	チェックポイントファイルに関するエラーの基底クラス。
	"""

	def __init__(self, message, code='CHECKPOINT_ERROR', details=None):
		super().__init__(message, code, details)

class CheckpointFormatError(CheckpointError):
	def __init__(self, message, details=None):
		super().__init__(message, 'CHECKPOINT_FORMAT_ERROR', details)

class CheckpointVersionError(CheckpointError):
	def __init__(self, message, details=None):
		super().__init__(message, 'CHECKPOINT_VERSION_ERROR', details)

class CheckpointCorruptionError(CheckpointError):
	"""
	ファイルが途中で切れている等、テンソルデータが欠損している場合のエラー。
	"""

	def __init__(self, message, details=None):
		super().__init__(message, 'CHECKPOINT_CORRUPTION_ERROR', details)
