import logging
import os
from datetime import datetime

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
DATE_FORMAT = '%Y-%m-%d %H:%M:%S'


def setup_logger(name, log_file=None):
    """
    Named logger for one pdlearn module, writing to stderr and optionally a file.

    The level comes from PDLEARN_LOG_LEVEL (default INFO); unknown names fall back to INFO.

    Args:
        name (str): Logger name, usually the module name
        log_file (str): Optional log file path, opened on the first record

    Returns:
        logging.Logger: Configured logger
    """
    level = getattr(logging, os.getenv('PDLEARN_LOG_LEVEL', 'INFO').upper(), logging.INFO)
    logger = logging.getLogger(name)
    logger.setLevel(level)
    logger.handlers.clear()
    formatter = logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT)

    console_handler = logging.StreamHandler()
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    if log_file:
        os.makedirs(os.path.dirname(log_file) or '.', exist_ok=True)
        file_handler = logging.FileHandler(log_file, delay=True)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    return logger


def get_default_log_file(module_name):
    """Daily log file under PDLEARN_LOG_DIR, or None when that is empty"""
    log_dir = os.getenv('PDLEARN_LOG_DIR', 'logs')
    if not log_dir:
        return None
    return os.path.join(log_dir, f"{module_name}_{datetime.now():%Y%m%d}.log")
