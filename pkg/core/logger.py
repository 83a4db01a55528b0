import logging
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator

from config.settings import settings

LOG_FORMAT = "%(asctime)s | %(levelname)-8s | %(module)s:%(lineno)d | %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"


class LogConfig:
    _logger = None

    @classmethod
    def get_logger(cls, name: str = "I2C2W") -> logging.Logger:
        if cls._logger:
            return cls._logger

        logger = logging.getLogger(name)
        logger.setLevel(logging.DEBUG)

        # Handlers already attached (pytest live logging, earlier import): reuse them
        if logger.hasHandlers() and logger.handlers:
            cls._logger = logger
            return logger

        formatter = logging.Formatter(fmt=LOG_FORMAT, datefmt=DATE_FORMAT)

        # stderr keeps stdout free for command output
        c_handler = logging.StreamHandler(sys.stderr)
        c_handler.setLevel(getattr(logging, settings.logging.LEVEL, logging.INFO))
        c_handler.setFormatter(formatter)
        logger.addHandler(c_handler)

        if settings.logging.TO_FILE:
            cls._add_session_file(logger, formatter)

        cls._logger = logger
        return logger

    @staticmethod
    def _add_session_file(logger: logging.Logger, formatter: logging.Formatter) -> None:
        log_dir = settings.log_dir
        try:
            log_dir.mkdir(parents=True, exist_ok=True)
            log_file = log_dir / f"run_{settings.get_current_timestamp()}.log"
            f_handler = logging.FileHandler(log_file, encoding="utf-8")
        except OSError as e:
            logger.warning(f"⚠️ File logging disabled ({log_dir}): {e}")
            return
        f_handler.setLevel(logging.DEBUG)
        f_handler.setFormatter(formatter)
        logger.addHandler(f_handler)
        logger.debug(f"🚀 Logger initialized. Writing to: {log_file}")


def get_logger(name: str = "I2C2W") -> logging.Logger:
    return LogConfig.get_logger(name)


@contextmanager
def run_log(out_dir: Path) -> Iterator[Path]:
    """Mirror log records into ``out_dir/train.log`` while the block runs (appends on resume)."""
    logger = get_logger()
    path = Path(out_dir) / settings.artifacts.RUN_LOG
    handler = logging.FileHandler(path, mode="a", encoding="utf-8")
    handler.setLevel(logging.INFO)
    handler.setFormatter(logging.Formatter(fmt=LOG_FORMAT, datefmt=DATE_FORMAT))
    logger.addHandler(handler)
    try:
        yield path
    finally:
        logger.removeHandler(handler)
        handler.close()
