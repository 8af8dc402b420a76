"""
mmocc/management/commands/score.py

学習済みモデルでサンプルの異常スコアと判定を出力する。

使用方法:
python3 manage.py score --model model.mocc --left a_left.ppm --right a_right.ppm
python3 manage.py score --model model.mocc --manifest data/test/manifest.csv
"""
from django.core.management.base import CommandError

from mmocc.checkpoint import load_checkpoint
from mmocc.data import SamplePair, load_dataset, read_image, preprocess_image
from mmocc.occ import score_samples, decide
from ._common import OccCommand, EXIT_USAGE, workers_option

class Command(OccCommand):
	help = 'Prints anomaly scores and decisions for one sample or a manifest.'

	def add_arguments(self, parser):
		parser.add_argument('--model', required=True, help='Checkpoint path')
		parser.add_argument('--left', help='Left view image')
		parser.add_argument('--right', help='Right view image')
		parser.add_argument('--manifest')
		parser.add_argument('--workers', type=int)

	def handle(self, *args, **options):
		model = load_checkpoint(options['model'])
		size = model.config.input_size
		if options['manifest']:
			samples = load_dataset(options['manifest'], size, workers=workers_option(options))
		elif options['left'] and options['right']:
			samples = [SamplePair(
				preprocess_image(read_image(options['left']), size),
				preprocess_image(read_image(options['right']), size),
				sample_id=options['left'],
			)]
		else:
			raise CommandError('Either --manifest or both --left and --right are required.', returncode=EXIT_USAGE)

		scores = score_samples(model, samples, workers=workers_option(options))
		for sample, value in zip(samples, scores):
			self.stdout.write(f'{sample.sample_id}\t{float(value):.6f}\t{decide(float(value), model.tau)}')
		self.stdout.write(self.style.SUCCESS(f'Scored {len(samples)} samples (tau={model.tau:.6f})'))
