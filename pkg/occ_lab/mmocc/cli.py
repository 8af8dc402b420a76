"""
mmocc.cli
サブコマンドの振り分け。各サブコマンドは mmocc/management/commands/ の管理コマンドとして実装され、
`python3 manage.py <command>` からも同じように実行できる。

使用方法:
python3 -m mmocc.cli <command> [options]
"""
import os
import sys
from typing import Optional, Sequence

COMMANDS = ('synth', 'train', 'score', 'eval', 'gradcheck', 'bench')

USAGE = (
	"usage: occ <command> [options]\n\n"
	"commands:\n"
	"  synth      write a synthetic two-view dataset (PPM + manifest)\n"
	"  train      train on a manifest and save a checkpoint\n"
	"  score      score samples with a checkpoint\n"
	"  eval       evaluate a checkpoint on a labeled manifest\n"
	"  gradcheck  run the finite-difference gradient suite\n"
	"  bench      run the one-vs-rest benchmark\n"
)

def _setup():
	from django.apps import apps
	if not apps.ready:
		import django
		os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'occ_lab.settings')
		django.setup()

def run(argv: Optional[Sequence[str]] = None) -> int:
	"""
	Args:
		argv: サブコマンド名とその引数。None の場合は sys.argv[1:]。

	Returns:
		終了コード (0: 成功, 2: 使い方の誤り, 3: データのエラー, 4: 数値エラー)。
	"""
	argv = list(sys.argv[1:] if argv is None else argv)
	if not argv or argv[0] not in COMMANDS:
		if argv and argv[0] not in ('-h', '--help'):
			sys.stderr.write(f"Unknown command: {argv[0]}\n")
		sys.stderr.write(USAGE)
		return 2

	_setup()
	from django.core.management import load_command_class

	name, args = argv[0], argv[1:]
	command = load_command_class('mmocc', name)
	try:
		command.run_from_argv(['occ', name, *args])
	except SystemExit as e:
		if e.code is None:
			return 0
		return e.code if isinstance(e.code, int) else 1
	return 0

if __name__ == '__main__':
	sys.exit(run())
