import logging
import logging.config
import sys
from pathlib import Path
from typing import Optional, Union

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
MAX_MESSAGE_LENGTH = 2000


class SeriesDumpFilter(logging.Filter):
    """
    Shortens over-long log messages, typically coefficient dumps of whole series.
    """

    def __init__(self, max_length: int = MAX_MESSAGE_LENGTH):
        super().__init__()
        self.max_length = max_length

    def filter(self, record):
        message = record.getMessage()
        if len(message) > self.max_length:
            dropped = len(message) - self.max_length
            record.msg = f"{message[: self.max_length]} ... [truncated {dropped} chars]"
            record.args = ()
        return True


def _has_filter(handler: logging.Handler) -> bool:
    return any(isinstance(f, SeriesDumpFilter) for f in handler.filters)


def _owned(handler: logging.Handler) -> bool:
    return getattr(handler, "crflat_owned", False) or (
        type(handler) is logging.StreamHandler and not _has_filter(handler)
    )


def setup_logger(
    level: int = logging.INFO,
    log_file: Optional[Union[str, Path]] = None,
    config_path: Optional[Union[str, Path]] = None,
):
    logger = logging.getLogger()  # Root logger

    if config_path is not None:
        logging.config.fileConfig(config_path, disable_existing_loggers=False)
        for handler in logger.handlers:
            if not _has_filter(handler):
                handler.addFilter(SeriesDumpFilter())
        return logger

    logger.setLevel(level)
    # replace earlier console handlers (ours or the basicConfig fallback)
    for handler in [h for h in logger.handlers if _owned(h)]:
        logger.removeHandler(handler)
        handler.close()

    formatter = logging.Formatter(LOG_FORMAT)

    # Console on stderr; stdout carries the verdict JSON
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(level)
    console_handler.setFormatter(formatter)
    console_handler.addFilter(SeriesDumpFilter())
    console_handler.crflat_owned = True
    logger.addHandler(console_handler)

    if log_file is not None:
        file_handler = logging.FileHandler(log_file)
        file_handler.setLevel(min(level, logging.DEBUG))
        file_handler.setFormatter(formatter)
        file_handler.addFilter(SeriesDumpFilter())
        file_handler.crflat_owned = True
        logger.addHandler(file_handler)
        logger.setLevel(min(level, logging.DEBUG))

    return logger
