"""
mmocc/management/commands/gradcheck.py

全ての層と損失関数について、解析勾配を中心差分の数値勾配と比較する。

使用方法:
python3 manage.py gradcheck --seeds 5
"""
from django.core.management.base import CommandError

from mmocc.model import BRANCH_MODES, REGULARIZERS, check_loss_gradients
from mmocc.numerics import check_layers
from ._common import OccCommand, EXIT_NUMERIC

TOLERANCE = 1e-4

class Command(OccCommand):
	help = 'Runs the finite-difference gradient suite over all layers and the training loss.'

	def add_arguments(self, parser):
		parser.add_argument('--seeds', type=int, default=5)
		parser.add_argument('--eps', type=float, default=1e-5)

	def handle(self, *args, **options):
		failures = 0
		for seed in range(options['seeds']):
			results = list(check_layers(seed, options['eps']))
			for mode in BRANCH_MODES:
				results.append((f'loss[{mode}]', check_loss_gradients(seed, mode, 'none', 0.0, eps=options['eps'])))
			for regularizer in REGULARIZERS[1:]:
				results.append((
					f'loss[{regularizer}]',
					check_loss_gradients(seed, 'multimodal', regularizer, 0.1, batch_size=3, eps=options['eps']),
				))
			for name, error in results:
				ok = error < TOLERANCE
				failures += not ok
				line = f'seed {seed} {name:<22} {error:.3e}'
				self.stdout.write(self.style.SUCCESS(line) if ok else self.style.ERROR(line))

		if failures:
			raise CommandError(f'{failures} gradient checks exceeded {TOLERANCE:g}.', returncode=EXIT_NUMERIC)
		self.stdout.write(self.style.SUCCESS('All gradient checks passed.'))
