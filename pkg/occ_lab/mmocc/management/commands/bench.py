"""
mmocc/management/commands/bench.py

one-vs-rest ベンチマーク。各クラスを正常クラスとして学習・評価し、タスク別と平均の表を出力する。
--manifest を省略すると合成データセットで実行する。

使用方法:
python3 manage.py bench --seeds 5
python3 manage.py bench --manifest data/manifest.csv --sizes 32 64 128 --modes multimodal
python3 manage.py bench --collapse
"""
import json

from mmocc.data import load_dataset, synth_generate, build_task
from mmocc.experiments import COLLAPSE_EPOCHS, COLLAPSE_LR, run_benchmark, format_table, collapse_comparison
from mmocc.model import BRANCH_MODES, REGULARIZERS
from ._common import OccCommand, add_config_arguments, config_from_options, workers_option

class Command(OccCommand):
	help = 'Runs the one-vs-rest benchmark and prints per-task and average rows.'

	def add_arguments(self, parser):
		parser.add_argument('--manifest', help='Labeled manifest (default: synthetic data)')
		parser.add_argument('--out', help='JSON report path')
		parser.add_argument('--sizes', type=int, nargs='+')
		parser.add_argument('--modes', nargs='+', choices=BRANCH_MODES, default=list(BRANCH_MODES))
		parser.add_argument('--regularizers', nargs='+', choices=REGULARIZERS, default=['none'])
		parser.add_argument('--seeds', type=int, default=1, help='Number of seeds (0..n-1)')
		parser.add_argument('--n-per-class', dest='n_per_class', type=int, default=240)
		parser.add_argument('--noise', type=float, default=0.1)
		parser.add_argument('--collapse', action='store_true',
			help='Compare latent norms with and without the reconstruction terms instead')
		parser.add_argument('--collapse-epochs', dest='collapse_epochs', type=int, default=COLLAPSE_EPOCHS)
		parser.add_argument('--collapse-lr', dest='collapse_lr', type=float, default=COLLAPSE_LR)
		parser.add_argument('--workers', type=int)
		add_config_arguments(parser)

	def handle(self, *args, **options):
		config = config_from_options(options)
		workers = workers_option(options)

		def dataset_for_size(size):
			if options['manifest']:
				return load_dataset(options['manifest'], size, workers=workers)
			return synth_generate(options['n_per_class'], size=size, noise_sigma=options['noise'],
				seed=config.seed, channels=config.in_channels)

		if options['collapse']:
			task = build_task(dataset_for_size(config.input_size), 0, config.train_fraction, seed=config.seed)
			result = collapse_comparison(
				task.train, config, epochs=options['collapse_epochs'], lr=options['collapse_lr']
			)
			for key, value in result.items():
				self.stdout.write(f'{key:<17} {value:.6f}')
			self._write_json(options['out'], result)
			return

		rows = run_benchmark(
			dataset_for_size, config,
			sizes=options['sizes'] or [config.input_size],
			modes=options['modes'],
			regularizers=options['regularizers'],
			seeds=list(range(options['seeds'])),
			workers=workers,
		)
		self.stdout.write(format_table(rows))
		self._write_json(options['out'], { 'config': config.to_dict(), 'rows': [r.as_dict() for r in rows] })

	def _write_json(self, path, data):
		if not path:
			return
		with open(path, 'w', encoding='utf-8') as f:
			json.dump(data, f, indent=2, sort_keys=True)
		self.stdout.write(self.style.SUCCESS(f'Wrote report to {path}'))
