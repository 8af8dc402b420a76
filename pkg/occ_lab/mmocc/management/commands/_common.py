"""
mmocc/management/commands/_common.py

各サブコマンド共通の引数定義・設定の組み立て・例外から終了コードへの変換。
"""
from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from mmocc.error import (
	OCCError, ParameterError, IngestionError, DimensionError, CheckpointError, NumericError,
)
from mmocc.model import BRANCH_MODES, REGULARIZERS
from mmocc.occ import TrainConfig

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

def add_config_arguments(parser):
	"""学習設定を上書きするフラグ。指定がなければ設定ファイル (または既定値) の値を使う。"""
	parser.add_argument('--config', help='TrainConfig JSON file')
	parser.add_argument('--seed', type=int)
	parser.add_argument('--mode', choices=BRANCH_MODES)
	parser.add_argument('--regularizer', choices=REGULARIZERS)
	parser.add_argument('--lambda', dest='lam', type=float)
	parser.add_argument('--input-size', dest='input_size', type=int)

def config_from_options(options) -> TrainConfig:
	overrides = { key: options.get(key) for key in ('seed', 'mode', 'regularizer', 'lam', 'input_size') }
	if options.get('config'):
		return TrainConfig.from_json(options['config'], **overrides)
	if overrides['seed'] is None:
		overrides['seed'] = settings.OCC_DEFAULT_SEED
	return TrainConfig.from_dict({ }, **overrides)

def workers_option(options) -> int:
	return max(1, options.get('workers') or settings.OCC_WORKERS)

class OccCommand(BaseCommand):
	"""
	パイプラインの例外を CommandError に変換する基底コマンド。
	ParameterError は 2、データ・チェックポイント・I/O のエラーは 3、数値エラーは 4 で終了する。
	"""
	requires_system_checks = []

	def execute(self, *args, **options):
		try:
			return super().execute(*args, **options)
		except CommandError:
			raise
		except ParameterError as e:
			raise CommandError(str(e), returncode=EXIT_USAGE) from e
		except (IngestionError, DimensionError, CheckpointError, OSError) as e:
			raise CommandError(str(e), returncode=EXIT_DATA) from e
		except NumericError as e:
			raise CommandError(str(e), returncode=EXIT_NUMERIC) from e
		except OCCError as e:
			raise CommandError(f"{e.code}: {e}") from e
