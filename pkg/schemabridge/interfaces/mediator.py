"""
Specification for the mediator and its configuration
"""
from abc import ABCMeta
from abc import abstractmethod
from abc import abstractproperty

import six


class Configuration(dict):
    """
    Represents a schemabridge configuration object
    """

    @abstractproperty
    def state_dir(self):
        """
        The working directory the federation state is persisted in.

        Defaults to the ``SB_STATE_DIR`` environment variable, or
        ``.schemabridge`` in the current directory.

        :rtype: ``str``
        """
        pass

    @property
    def enable_pushdown(self):
        """
        Whether predicate conjuncts are pushed down to the sites. With
        pushdown disabled every predicate is evaluated at the mediator.

        :rtype: ``bool``
        """
        pass

    @property
    def allow_partial_results(self):
        """
        Whether union and generalization queries answer with a warning when
        a constituent site is offline, instead of failing.

        :rtype: ``bool``
        """
        pass

    @property
    def query_workers(self):
        """
        The number of subqueries run concurrently.

        :rtype: ``int``
        """
        pass

    @property
    def two_digit_year_pivot(self):
        """
        Two digit years below the pivot belong to the 2000s, others to the
        1900s.

        :rtype: ``int``
        """
        pass

    @abstractproperty
    def debug_mode(self):
        """
        A flag indicating whether schemabridge is in debug mode.

        Setting this to ``True`` logs every mediator event with its
        arguments and result. The flag can be toggled by sending in the
        ``sb_debug`` value via the config dictionary, or setting the
        ``SB_DEBUG`` environment variable.

        :rtype: ``bool``
        :return: Whether debug mode is on.
        """


@six.add_metaclass(ABCMeta)
class Mediator(object):
    """
    Base interface for the multidatabase mediator. The mediator owns the
    registry of local schema copies, the correspondence assertions, the
    global schema and the propagation state, and exposes them through its
    services.
    """

    @abstractproperty
    def config(self):
        """
        Returns the config object associated with this mediator.

        Example:

        .. code-block:: python

            mediator = SchemaMediator({'query_workers': 1})
            print(mediator.config.enable_pushdown)

        :rtype: :class:`.Configuration`
        :return: The configuration in effect.
        """
        pass

    @abstractproperty
    def middleware(self):
        """
        Returns the middleware manager associated with this mediator. Every
        service operation is dispatched through it as a
        ``mediator.<service>.<operation>`` event. Refer to pyeventsystem
        documentation for more information on how the middleware manager
        works.

        :rtype: :class:`.MiddlewareManager`
        """
        pass

    @abstractproperty
    def registry(self):
        """
        Provides access to the local schema registry.

        :rtype: :class:`.RegistryService`
        """
        pass

    @abstractproperty
    def correspondence(self):
        """
        Provides access to the correspondence assertions.

        :rtype: :class:`.CorrespondenceService`
        """
        pass

    @abstractproperty
    def integration(self):
        """
        Provides access to the integration operators and the global schema.

        :rtype: :class:`.IntegrationService`
        """
        pass

    @abstractproperty
    def query(self):
        """
        Provides access to the query engine.

        :rtype: :class:`.QueryService`
        """
        pass

    @abstractproperty
    def propagation(self):
        """
        Provides access to schema change propagation.

        :rtype: :class:`.PropagationService`
        """
        pass

    @abstractmethod
    def adapter(self, site):
        """
        Return the source adapter of a registered site.

        :rtype: :class:`.SourceAdapter`

        :raises UnknownSiteException: if the site is not registered.
        """
        pass
