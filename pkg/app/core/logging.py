import logging

from app.core.config import get_settings

LOGGER_NAME = "fso-qkd"
LOG_FORMAT = "%(asctime)s | %(levelname)s | %(name)s | %(message)s"


def setup_logging() -> logging.Logger:
    level = getattr(logging, str(get_settings().LOG_LEVEL).upper(), logging.INFO)

    try:
        # Keep whatever handlers the host (pytest, an embedding app) installed
        root = logging.getLogger()
        if not root.handlers:
            logging.basicConfig(level=level, format=LOG_FORMAT)

        logger = logging.getLogger(LOGGER_NAME)
        logger.setLevel(level)

        return logger

    except Exception:
        # Logging setup must never stop a computation
        try:
            logger = logging.getLogger(LOGGER_NAME)
            logger.setLevel(logging.INFO)

            if not logger.handlers:
                handler = logging.StreamHandler()
                handler.setFormatter(logging.Formatter(LOG_FORMAT))
                logger.addHandler(handler)

            return logger

        except Exception:
            return logging.getLogger()


def set_verbosity(verbose: int) -> None:
    """Raise the package logger to DEBUG for ``-v`` on the command line."""
    if verbose > 0:
        logging.getLogger(LOGGER_NAME).setLevel(logging.DEBUG)


logger = setup_logging()
