import logging
import os

from config import LOG_DIR, LOG_LEVEL, LOG_TO_FILE


def setup_logger(name, log_file=None, level=None):
    """
    Set up a logger with console and optional file handlers

    Args:
        name (str): Logger name
        log_file (str): Log file path (optional)
        level: Logging level, defaults to ZONE_LOG_LEVEL

    Returns:
        logging.Logger: Configured logger
    """
    if level is None:
        level = getattr(logging, LOG_LEVEL.upper(), logging.INFO)

    if log_file:
        log_dir = os.path.dirname(log_file)
        if log_dir and not os.path.exists(log_dir):
            os.makedirs(log_dir)

    logger = logging.getLogger(name)
    logger.setLevel(level)

    # Clear existing handlers to avoid duplicates
    logger.handlers.clear()
    logger.propagate = False

    detailed_formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )
    simple_formatter = logging.Formatter(
        '%(asctime)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    console_handler = logging.StreamHandler()
    console_handler.setLevel(level)
    console_handler.setFormatter(simple_formatter)
    logger.addHandler(console_handler)

    if log_file:
        file_handler = logging.FileHandler(log_file)
        file_handler.setLevel(level)
        file_handler.setFormatter(detailed_formatter)
        logger.addHandler(file_handler)

    return logger


def get_logger(name, log_file=None):
    """
    Get a logger instance

    When ZONE_LOG_TO_FILE is set and no file is given, logs go to
    <ZONE_LOG_DIR>/<name>.log.

    Args:
        name (str): Logger name
        log_file (str): Log file path (optional)

    Returns:
        logging.Logger: Logger instance
    """
    if log_file is None and LOG_TO_FILE:
        log_file = os.path.join(LOG_DIR, f'{name}.log')
    return setup_logger(name, log_file)
