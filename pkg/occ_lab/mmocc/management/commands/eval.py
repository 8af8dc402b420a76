"""
mmocc/management/commands/eval.py

テストマニフェストでモデルを評価し、Recall / P@n / ROC-AUC を表示して JSON に書き出す。
正常クラスのラベルは 0、他のクラスは 1 とする。

使用方法:
python3 manage.py eval --model model.mocc --manifest data/test/manifest.csv --positive-class 0 --out report.json
"""
import json
import numpy as np
from django.core.management.base import CommandError

from mmocc.checkpoint import load_checkpoint
from mmocc.data import load_dataset
from mmocc.metrics import evaluate
from ._common import OccCommand, EXIT_DATA, workers_option

class Command(OccCommand):
	help = 'Evaluates a model on a labeled test manifest.'

	def add_arguments(self, parser):
		parser.add_argument('--model', required=True, help='Checkpoint path')
		parser.add_argument('--manifest', required=True)
		parser.add_argument('--positive-class', dest='positive_class', type=int, required=True)
		parser.add_argument('--out', help='JSON report path')
		parser.add_argument('--workers', type=int)

	def handle(self, *args, **options):
		model = load_checkpoint(options['model'])
		samples = load_dataset(options['manifest'], model.config.input_size, workers=workers_option(options))
		unlabeled = [s.sample_id for s in samples if s.class_id is None]
		if unlabeled:
			raise CommandError(f'Samples without class_id: {", ".join(unlabeled[:5])}', returncode=EXIT_DATA)
		labels = np.array([0 if s.class_id == options['positive_class'] else 1 for s in samples], dtype=np.int64)

		report = evaluate(model, samples, labels, workers=workers_option(options))
		self.stdout.write(f"{'Recall':>8} {'P@n':>8} {'ROC-AUC':>8}  n_test n_anomalies")
		self.stdout.write(
			f'{report.recall:>8.4f} {report.p_at_n:>8.4f} {report.roc_auc:>8.4f}  {report.n_test:>6} {report.n_anomalies:>11}'
		)
		if options['out']:
			with open(options['out'], 'w', encoding='utf-8') as f:
				json.dump(report.as_dict(), f, indent=2, sort_keys=True)
			self.stdout.write(self.style.SUCCESS(f"Wrote report to {options['out']}"))
