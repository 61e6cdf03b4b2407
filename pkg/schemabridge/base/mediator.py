"""Base implementation of the mediator interface."""
import logging
import os
import threading
from configparser import ConfigParser
from os.path import expanduser

from pyeventsystem.middleware import SimpleMiddlewareManager

import six

from ..interfaces import Mediator
from ..interfaces.exceptions import UnknownSiteException
from ..interfaces.mediator import Configuration
from .middleware import EventDebugLoggingMiddleware
from .middleware import ExceptionWrappingMiddleware
from .schema import DEFAULT_YEAR_PIVOT
from .services import BaseCorrespondenceService
from .services import BaseIntegrationService
from .services import BasePropagationService
from .services import BaseQueryService
from .services import BaseRegistryService

log = logging.getLogger(__name__)

DEFAULT_STATE_DIR = '.schemabridge'
DEFAULT_QUERY_WORKERS = 4

# By default, use two locations for SchemaBridge configuration
SchemaBridgeConfigPath = '/etc/schemabridge.ini'
SchemaBridgeConfigLocations = [SchemaBridgeConfigPath]
UserConfigPath = os.path.join(expanduser('~'), '.schemabridge')
SchemaBridgeConfigLocations.append(UserConfigPath)

CONFIG_SECTION = 'mediator'
CONFIG_KEYS = ('state_dir', 'enable_pushdown', 'allow_partial_results',
               'query_workers', 'two_digit_year_pivot', 'sb_debug')

_TRUE_STRINGS = ('1', 'true', 'yes', 'on')


def as_bool(value):
    if isinstance(value, six.string_types):
        return value.strip().lower() in _TRUE_STRINGS
    return bool(value)


class BaseConfiguration(Configuration):

    def __init__(self, user_config):
        self.update(user_config or {})

    @property
    def state_dir(self):
        return self.get('state_dir') or os.environ.get(
            'SB_STATE_DIR', DEFAULT_STATE_DIR)

    @property
    def enable_pushdown(self):
        return as_bool(self.get('enable_pushdown', True))

    @property
    def allow_partial_results(self):
        return as_bool(self.get('allow_partial_results', True))

    @property
    def query_workers(self):
        """
        Get the number of subqueries run concurrently.

        :rtype: ``int``
        :return: The size of the subquery thread pool, at least 1.
        """
        workers = int(self.get('query_workers', DEFAULT_QUERY_WORKERS))
        log.debug("Running up to %s subqueries concurrently", workers)
        return max(1, workers)

    @property
    def two_digit_year_pivot(self):
        return int(self.get('two_digit_year_pivot', DEFAULT_YEAR_PIVOT))

    @property
    def debug_mode(self):
        """
        A flag indicating whether SchemaBridge is in debug mode. Setting
        this to True logs every mediator event.

        The flag can be toggled by sending in the sb_debug value via
        the config dictionary, or setting the SB_DEBUG environment variable.

        :rtype: ``bool``
        :return: Whether debug mode is on.
        """
        return as_bool(self.get('sb_debug', os.environ.get('SB_DEBUG',
                                                           False)))


class BaseMediator(Mediator):

    def __init__(self, config=None):
        self._config_parser = ConfigParser()
        self._config_parser.read(SchemaBridgeConfigLocations)
        self._config = BaseConfiguration(config)
        for key in CONFIG_KEYS:
            value = self._get_config_value(key)
            if value is not None and key not in self._config:
                self._config[key] = value
        self._middleware = SimpleMiddlewareManager()
        self.add_required_middleware()
        self._lock = threading.RLock()
        self._adapters = {}
        self._registry = BaseRegistryService(self)
        self._correspondence = BaseCorrespondenceService(self)
        self._integration = BaseIntegrationService(self)
        self._query = BaseQueryService(self)
        self._propagation = BasePropagationService(self)

    @property
    def config(self):
        return self._config

    @property
    def name(self):
        return str(self.__class__.__name__)

    @property
    def middleware(self):
        return self._middleware

    @property
    def lock(self):
        return self._lock

    @property
    def registry(self):
        return self._registry

    @property
    def correspondence(self):
        return self._correspondence

    @property
    def integration(self):
        return self._integration

    @property
    def query(self):
        return self._query

    @property
    def propagation(self):
        return self._propagation

    def add_required_middleware(self):
        """
        Adds common middleware that is essential for schemabridge to
        function. Any other extra middleware can be added through the
        middleware manager.
        """
        self.middleware.add(ExceptionWrappingMiddleware())
        if self.config.debug_mode:
            self.middleware.add(EventDebugLoggingMiddleware())

    def adapter(self, site):
        adapter = self._adapters.get(site)
        if adapter is None:
            raise UnknownSiteException("Site %s is not registered" % site)
        return adapter

    def attach_adapter(self, site, adapter):
        """
        Connect the adapter of a site. A mediator rebuilt from persisted
        state reattaches its adapters without registering them again.
        """
        with self._lock:
            self._adapters[site] = adapter

    @property
    def adapters(self):
        return dict(self._adapters)

    def persist(self):
        """Save the mediator state. The in-memory mediator keeps none."""
        pass

    def export(self):
        """The registry copies and the global schema as canonical text."""
        with self._lock:
            return "%s\n%s" % (self.registry.export(),
                               self.integration.export())

    def _get_config_value(self, key, default_value=None):
        """
        Look up one of :data:`CONFIG_KEYS`: a non-empty value passed in the
        configuration dict wins over the ``[mediator]`` section of the INI
        files, and ``default_value`` is returned when neither has one.
        Typed defaults are applied later by :class:`BaseConfiguration`.
        """
        log.debug("Getting config key %s, with supplied default value: %s",
                  key, default_value)
        value = default_value
        if isinstance(self.config, dict) and self.config.get(key):
            value = self.config.get(key, default_value)
        elif (self._config_parser.has_option(CONFIG_SECTION, key) and
              self._config_parser.get(CONFIG_SECTION, key)):
            value = self._config_parser.get(CONFIG_SECTION, key)
        return value
