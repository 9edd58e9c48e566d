"""
Configuration module for the RANDSMAP command line tools
Supports different environments: development, production, testing
"""

import os
import logging
from pathlib import Path

LOG_FORMAT = '%(asctime)s %(levelname)s: %(message)s [in %(pathname)s:%(lineno)d]'


class Config:
    """Base configuration class"""

    APP_NAME = 'randsmap'
    VERSION = '1.0.0'

    # Logging
    LOG_LEVEL = os.environ.get('LOG_LEVEL', 'INFO')
    LOG_FILE = os.environ.get('LOG_FILE', 'randsmap.log')
    LOG_MAX_BYTES = int(os.environ.get('LOG_MAX_BYTES', '10485760'))  # 10MB
    LOG_BACKUP_COUNT = int(os.environ.get('LOG_BACKUP_COUNT', '5'))

    @classmethod
    def init_app(cls, verbose=False):
        """Install the console handler on the root logger"""
        level = logging.DEBUG if verbose else getattr(logging, str(cls.LOG_LEVEL).upper(), logging.INFO)
        root = logging.getLogger()
        if not any(getattr(h, '_randsmap', False) for h in root.handlers):
            handler = logging.StreamHandler()
            handler.setFormatter(logging.Formatter(LOG_FORMAT))
            handler._randsmap = True
            root.addHandler(handler)
        root.setLevel(level)
        return root


class DevelopmentConfig(Config):
    """Development configuration"""

    LOG_LEVEL = os.environ.get('LOG_LEVEL', 'INFO')


class ProductionConfig(Config):
    """Production configuration: long benchmark runs with a log file"""

    LOG_LEVEL = os.environ.get('LOG_LEVEL', 'WARNING')

    @classmethod
    def init_app(cls, verbose=False):
        root = super().init_app(verbose)

        from logging.handlers import RotatingFileHandler

        log_path = Path(cls.LOG_FILE)
        if not log_path.parent.exists():
            log_path.parent.mkdir(parents=True)

        if not any(isinstance(h, RotatingFileHandler) for h in root.handlers):
            file_handler = RotatingFileHandler(
                log_path,
                maxBytes=cls.LOG_MAX_BYTES,
                backupCount=cls.LOG_BACKUP_COUNT
            )
            file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
            file_handler.setLevel(logging.INFO)
            root.addHandler(file_handler)
        root.info(f'{cls.APP_NAME} {cls.VERSION} startup')
        return root


class TestingConfig(Config):
    """Testing configuration"""

    LOG_LEVEL = 'WARNING'


# Configuration dictionary
config = {
    'development': DevelopmentConfig,
    'production': ProductionConfig,
    'testing': TestingConfig,
    'default': DevelopmentConfig
}


def get_config():
    """Get the configuration class based on environment"""
    env = os.environ.get('RANDSMAP_ENV', 'development').lower()
    return config.get(env, config['default'])
