"""
Django settings for occ_lab project.

The project has no web surface: Django provides the settings layer, the
management-command CLI, logging configuration and the test runner.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.1/ref/settings/
"""

from pathlib import Path
import environ

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# 環境変数の読み込み (.env は任意)
env = environ.Env(
	OCC_LOG_LEVEL=(str, 'INFO'),
	OCC_WORKERS=(int, 4),
	OCC_DEFAULT_SEED=(int, 0),
)
env_file = BASE_DIR / '.env'
if env_file.exists():
	env.read_env(str(env_file))

SECRET_KEY = env('SECRET_KEY', default='occ-lab-local-development-key')

DEBUG = env.bool('DEBUG', default=False)

ALLOWED_HOSTS = []

# Application definition

INSTALLED_APPS = [
	'mmocc.apps.MmoccConfig',  # multimodal one-class classification
]

# Database (モデルは使用しない)
DATABASES = { }

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

USE_TZ = True

# 一クラス分類パイプラインの設定
OCC_LOG_LEVEL = env('OCC_LOG_LEVEL')
OCC_WORKERS = env('OCC_WORKERS')  # マニフェスト読み込み・スコア計算のスレッド数
OCC_DEFAULT_SEED = env('OCC_DEFAULT_SEED')

LOGGING = {
	'version': 1,
	'disable_existing_loggers': False,
	'formatters': {
		'plain': {
			'format': '{asctime} {levelname} {name}: {message}',
			'style': '{',
		},
	},
	'handlers': {
		'console': {
			'class': 'logging.StreamHandler',
			'formatter': 'plain',
		},
	},
	'loggers': {
		'mmocc': {
			'handlers': ['console'],
			'level': OCC_LOG_LEVEL,
			'propagate': False,
		},
	},
}
