from .logging_setup import setup_logging, get_logger