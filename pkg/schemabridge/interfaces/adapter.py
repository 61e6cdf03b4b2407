"""
Specification for a source adapter: the uniform endpoint behind which an
autonomous component database answers subqueries and evolves its schema.
"""
from abc import ABCMeta
from abc import abstractmethod
from abc import abstractproperty

import six


@six.add_metaclass(ABCMeta)
class SourceAdapter(object):
    """
    Base interface for a simulated component database. An adapter holds one
    site's local schema and extents and speaks only in local names.
    """

    @abstractproperty
    def site_id(self):
        """
        The identifier of the site this adapter stands for.

        :rtype: ``str``
        :return: The site id, unique across the federation.
        """
        pass

    @abstractproperty
    def schema(self):
        """
        A copy of the site's current local schema.

        :rtype: :class:`.LocalSchema`
        :return: The local schema.
        """
        pass

    @abstractproperty
    def version(self):
        """
        The local schema version, bumped by every applied change.

        :rtype: ``int``
        """
        pass

    @abstractproperty
    def online(self):
        """
        Whether the site is reachable by the mediator.

        :rtype: ``bool``
        """
        pass

    @abstractproperty
    def outbound_log(self):
        """
        The site's schema update log, oldest entry first.

        :rtype: ``list`` of :class:`.ChangeLogEntry`
        """
        pass

    @abstractmethod
    def execute_subquery(self, subquery):
        """
        Evaluate a subquery expressed in local names.

        Example:

        .. code-block:: python

            q = SubQuery('employees', ['employeecode', 'name'],
                         [Comparison('age', Comparator.GT, 26)])
            result = adapter.execute_subquery(q)
            print(result.header, result.rows)

        :type subquery: :class:`.SubQuery`
        :param subquery: The class, projection and predicate to evaluate.

        :rtype: :class:`.SubResult`
        :return: The projected objects satisfying the predicate.

        :raises SiteOfflineException: if the site is offline.
        :raises UnknownClassException: if the class does not exist.
        :raises UnknownAttributeException: if an attribute does not exist.
        """
        pass

    @abstractmethod
    def apply_local_change(self, change):
        """
        Apply a schema change at the site and append it to the outbound log.
        The change is applied even when the site is offline.

        :type change: :class:`.SchemaChange`
        :param change: The modification, in local names.

        :rtype: ``int``
        :return: The new schema version.

        :raises InvalidChangeException: if the change does not apply.
        """
        pass

    @abstractmethod
    def set_connectivity(self, online):
        """
        Toggle the site on or offline.

        :type online: ``bool``
        :param online: The new state.

        :rtype: ``bool``
        :return: The previous state.
        """
        pass

    @abstractmethod
    def acknowledge(self, seq):
        """
        Mark every log entry up to and including ``seq`` as applied by the
        mediator.

        :type seq: ``int``
        :param seq: The highest acknowledged sequence number.
        """
        pass

    @abstractmethod
    def date_format(self, class_name, attribute_name):
        """
        The format dates of an attribute were written in at ingest, or
        ``None`` for ISO-8601.

        :rtype: ``str``
        """
        pass
