"""
Specifications for services available through the mediator
"""
from abc import ABCMeta
from abc import abstractmethod
from abc import abstractproperty

import six


@six.add_metaclass(ABCMeta)
class MediatorService(object):

    """
    Base interface for any service of the mediator. This interface has a
    mediator property that can be used to access the mediator associated
    with this service.
    """

    @abstractproperty
    def mediator(self):
        """
        Returns the mediator instance associated with this service.

        :rtype: :class:`.Mediator`
        """
        pass


class RegistryService(MediatorService):
    """
    The mediator's copies of the local schemas, including the restructuring
    renames the DBA applies before integration.
    """

    @abstractmethod
    def register_schema(self, site, adapter):
        """
        Register a site and a copy of its local schema.

        Example:

        .. code-block:: python

            adapter = MemorySourceAdapter('SiteA', schema, extents)
            mediator.registry.register_schema('SiteA', adapter)

        :type site: ``str``
        :param site: The site id.

        :type adapter: :class:`.SourceAdapter`
        :param adapter: The site's adapter; its schema is copied.

        :rtype: :class:`.LocalSchema`
        :return: The registered copy.

        :raises DuplicateSiteException: if the site is already registered.
        :raises InvalidSchemaException: if the schema violates an invariant.
        """
        pass

    @abstractmethod
    def get(self, site):
        """
        Return the registered schema of a site.

        :rtype: :class:`.LocalSchema`

        :raises UnknownSiteException: if the site is not registered.
        """
        pass

    @abstractmethod
    def list(self):
        """
        Return the registered schemas ordered by site id.

        :rtype: ``list`` of :class:`.LocalSchema`
        """
        pass

    @abstractmethod
    def rename_class(self, site, old, new):
        """
        Rename a class in the mediator's copy of a site schema. Assertions
        and virtual classes referencing it are updated in place.

        :rtype: :class:`.LocalSchema`

        :raises UnknownClassException: if ``old`` does not exist.
        :raises NameCollisionException: if ``new`` is taken.
        """
        pass

    @abstractmethod
    def rename_attribute(self, site, cls, old, new):
        """
        Rename an attribute in the mediator's copy of a site schema.
        Attribute correspondences referencing it are updated in place.

        :rtype: :class:`.LocalClass`

        :raises UnknownAttributeException: if ``old`` does not exist.
        :raises NameCollisionException: if ``new`` is taken.
        """
        pass


class CorrespondenceService(MediatorService):
    """
    The DBA-declared correspondence assertions.
    """

    @abstractmethod
    def parse_assertions(self, text):
        """
        Parse and validate an assertion document against the registry
        without storing it.

        :rtype: ``list`` of :class:`.CorrespondenceAssertion`
        """
        pass

    @abstractmethod
    def add(self, text):
        """
        Parse, validate and store the assertions of a document.

        :rtype: ``list`` of :class:`.CorrespondenceAssertion`
        :return: The stored assertions.
        """
        pass

    @abstractmethod
    def list(self):
        """
        :rtype: ``list`` of :class:`.CorrespondenceAssertion`
        """
        pass

    @abstractmethod
    def classify_pair(self, first, second, asserted):
        """
        Check that an asserted relationship is consistent with two
        registered classes.

        :rtype: :class:`.RelationKind`

        :raises InconsistentAssertionException: naming the violated
                                                condition.
        """
        pass

    @abstractmethod
    def global_attribute_set(self, assertion):
        """
        :rtype: ``list`` of ``tuple``
        :return: ``(global name, SemanticType)`` pairs.
        """
        pass


class IntegrationService(MediatorService):
    """
    The integration operators and the global schema they build.
    """

    @abstractmethod
    def union(self, name, constituents):
        """
        Merge equivalent or synonymous classes into a virtual class whose
        attributes are the union of the constituents' global attributes.

        :type constituents: ``list`` of :class:`.ClassRef`

        :rtype: :class:`.VirtualClass`

        :raises HomonymyForbiddenException: for homonymous constituents.
        :raises MissingAssertionException: for unrelated constituents.
        :raises ArityException: for fewer than two constituents.
        """
        pass

    @abstractmethod
    def generalize(self, name, constituents):
        """
        A common superclass whose attributes are the intersection of the
        constituents' global attributes.

        :rtype: :class:`.VirtualClass`
        """
        pass

    @abstractmethod
    def specialize(self, name, constituents):
        """
        A common subclass holding the objects present at every
        constituent; requires a key correspondence linking all of them.

        :rtype: :class:`.VirtualClass`

        :raises MissingKeyLinkException: without a spanning key link.
        """
        pass

    @abstractmethod
    def import_class(self, name, constituent):
        """
        The identity mapping over one local class.

        :rtype: :class:`.VirtualClass`

        :raises UnknownClassException: if the class is not registered.
        """
        pass

    @abstractmethod
    def revalidate(self, name):
        """
        Recompute a virtual class against the current local schemas.

        :rtype: :class:`.VirtualClass`
        """
        pass

    @abstractmethod
    def get(self, name):
        """
        :rtype: :class:`.VirtualClass`

        :raises UnknownVirtualClassException: if there is no such class.
        """
        pass

    @abstractmethod
    def list(self):
        """
        :rtype: ``list`` of :class:`.VirtualClass`
        """
        pass


class QueryService(MediatorService):
    """
    Answers queries against virtual classes.
    """

    @abstractmethod
    def decompose(self, query):
        """
        :rtype: :class:`.QueryPlan`
        """
        pass

    @abstractmethod
    def compose(self, sub_results, plan):
        """
        :rtype: :class:`.QueryResult`
        """
        pass

    @abstractmethod
    def execute(self, query):
        """
        Answer a query given as text or as a :class:`.GlobalQuery`.

        Example:

        .. code-block:: python

            result = mediator.query.execute("select * from employees")
            print(result.to_table())

        :rtype: :class:`.QueryResult`
        """
        pass


class PropagationService(MediatorService):
    """
    Bottom-up propagation of local schema changes to the mediator.
    """

    @abstractmethod
    def relay(self, site):
        """
        Deliver a site's pending log entries to the mediator. A site whose
        link is down delivers nothing.

        :rtype: :class:`.RelayReport`

        :raises UnknownSiteException: if the site is not registered.
        """
        pass

    @abstractmethod
    def mediator_apply(self, entry):
        """
        Apply one change log entry to the mediator's state.

        :rtype: ``list`` of ``tuple``
        :return: ``(virtual class name, status)`` of each affected class.

        :raises StaleEntryException: if the entry was already applied.
        :raises GapBufferedException: if the entry arrived early and was
                                      buffered.
        """
        pass

    @abstractmethod
    def convergence_check(self):
        """
        Rebuild the global schema from scratch from the sites' current
        schemas and compare it with the incrementally maintained one.

        :rtype: :class:`.ConvergenceReport`
        """
        pass
