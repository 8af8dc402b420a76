"""
mmocc/management/commands/train.py

マニフェストの正常クラスのデータで学習し、閾値を較正してチェックポイントを保存する。

使用方法:
python3 manage.py train --manifest data/synth/manifest.csv --positive-class 0 --out model.mocc
"""
from mmocc.checkpoint import save_checkpoint
from mmocc.data import load_dataset, build_task
from mmocc.occ import train
from ._common import OccCommand, add_config_arguments, config_from_options, workers_option

class Command(OccCommand):
	help = 'Trains a one-class model on positive samples and writes a checkpoint.'

	def add_arguments(self, parser):
		parser.add_argument('--manifest', required=True)
		parser.add_argument('--out', required=True, help='Checkpoint path')
		parser.add_argument(
			'--positive-class', dest='positive_class', type=int,
			help='Train on the training split of this class (default: every row is positive)',
		)
		parser.add_argument('--workers', type=int)
		add_config_arguments(parser)

	def handle(self, *args, **options):
		config = config_from_options(options)
		dataset = load_dataset(options['manifest'], config.input_size, workers=workers_option(options))
		if options['positive_class'] is not None:
			task = build_task(dataset, options['positive_class'], config.train_fraction, seed=config.seed)
			dataset = task.train
			self.stdout.write(f'Class {task.positive_class}: {len(task.train)} training samples')

		model = train(dataset, config)
		for epoch, losses in enumerate(model.history, start=1):
			self.stdout.write(f"epoch {epoch}: loss {losses['total']:.6f}")
		save_checkpoint(model, options['out'])
		self.stdout.write(self.style.SUCCESS(
			f"Saved model to {options['out']} (tau={model.tau:.6f}, n_train={model.n_train})"
		))
