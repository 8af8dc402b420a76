"""
mmocc/management/commands/synth.py

合成マルチモーダルデータセット (PPM 画像 + マニフェスト) を書き出す。

使用方法:
python3 manage.py synth --out data/synth --seed 0
"""
from mmocc.data import synth_generate, export_dataset
from ._common import OccCommand

class Command(OccCommand):
	help = 'Writes a synthetic two-view dataset as PPM images and a manifest.'

	def add_arguments(self, parser):
		parser.add_argument('--out', required=True, help='Output directory')
		parser.add_argument('--seed', type=int, default=0)
		parser.add_argument('--n-per-class', dest='n_per_class', type=int, default=240)
		parser.add_argument('--classes', type=int, default=4)
		parser.add_argument('--input-size', dest='input_size', type=int, default=32)
		parser.add_argument('--noise', type=float, default=0.1, help='Gaussian noise sigma')

	def handle(self, *args, **options):
		pairs = synth_generate(
			n_per_class=options['n_per_class'],
			n_classes=options['classes'],
			size=options['input_size'],
			noise_sigma=options['noise'],
			seed=options['seed'],
		)
		manifest = export_dataset(pairs, options['out'])
		self.stdout.write(self.style.SUCCESS(f'Wrote {len(pairs)} samples to {manifest}'))
