"""
SchemaBridge: query autonomous component databases through one integrated
global schema.

Only a null handler is installed on the ``schemabridge`` logger. The command
line attaches handlers through :func:`set_stream_logger` (``-v``) and
:func:`set_file_logger` (``--log-file``).
"""
import logging

__version__ = '1.0.0'


def get_version():
    """
    The release of the mediator, as printed by ``schemabridge --version``.

    :rtype: ``string``
    """
    return __version__


# Per-entry relay and per-object merge detail, below DEBUG
TRACE = 5


class SBLogger(logging.Logger):
    """
    Logger class for the mediator's modules. Adds ``log.trace(...)`` for the
    per-entry relay and per-object merge messages that would drown the
    DEBUG output.
    """

    def trace(self, msg, *args, **kwargs):
        self.log(TRACE, msg, *args, **kwargs)


default_format_string = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"
logging.setLoggerClass(SBLogger)
logging.addLevelName(TRACE, "TRACE")
log = logging.getLogger('schemabridge')
log.addHandler(logging.NullHandler())


def _attach(name, handler, level, format_string):
    global log
    logger = logging.getLogger(name)
    logger.setLevel(level)
    handler.setLevel(level)
    handler.setFormatter(
        logging.Formatter(format_string or default_format_string))
    logger.addHandler(handler)
    log = logger
    return handler


def set_stream_logger(name, level=TRACE, format_string=None, stream=None):
    """
    Send the records of logger ``name`` to ``stream`` (standard error by
    default). Returns the handler so a caller can detach it again.
    """
    return _attach(name, logging.StreamHandler(stream), level,
                   format_string)


def set_file_logger(name, filepath, level=logging.INFO, format_string=None):
    """Append the records of logger ``name`` to ``filepath``."""
    return _attach(name, logging.FileHandler(filepath), level, format_string)
