"""pytest から mmocc/tests を実行するための Django 初期化。"""
import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'occ_lab.settings')
django.setup()
