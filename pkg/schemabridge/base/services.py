"""
Base implementation for services available through the mediator
"""
import difflib
import logging

from ..interfaces.exceptions import DuplicateSiteException
from ..interfaces.exceptions import DuplicateVirtualClassException
from ..interfaces.exceptions import GapBufferedException
from ..interfaces.exceptions import InvalidChangeException
from ..interfaces.exceptions import InvalidSchemaException
from ..interfaces.exceptions import NameCollisionException
from ..interfaces.exceptions import StaleEntryException
from ..interfaces.exceptions import UnknownAttributeException
from ..interfaces.exceptions import UnknownClassException
from ..interfaces.exceptions import UnknownSiteException
from ..interfaces.model import OperatorKind
from ..interfaces.services import CorrespondenceService
from ..interfaces.services import IntegrationService
from ..interfaces.services import MediatorService
from ..interfaces.services import PropagationService
from ..interfaces.services import QueryService
from ..interfaces.services import RegistryService
from . import helpers as sb_helpers
from .correspondence import ConversionCatalog
from .correspondence import LEFT
from .correspondence import classify_pair
from .correspondence import global_attribute_set
from .correspondence import parse_assertions
from .correspondence import pretty_print
from .integration import GlobalSchema
from .integration import VirtualClass
from .integration import build_virtual_class
from .integration import parse_definitions
from .integration import revalidate
from .middleware import dispatch
from .propagation import ChangeLogEntry
from .propagation import HighWaterMarks
from .propagation import Mailbox
from .propagation import RelayReport
from .propagation import ReplicationAgent
from .propagation import apply_change
from .query import GlobalQuery
from .query import QueryEngine
from .query import compose
from .query import decompose
from .schema import LocalClass
from .schema import LocalSchema
from .schema import format_schema

log = logging.getLogger(__name__)


class BaseMediatorService(MediatorService):

    STANDARD_EVENT_PRIORITY = 2500

    def __init__(self, mediator):
        self._service_event_pattern = "mediator"
        self._mediator = mediator
        # discover and register all middleware
        mediator.middleware.add(self)

    @property
    def mediator(self):
        return self._mediator

    @property
    def events(self):
        return self._mediator.middleware.events


class BaseRegistryService(RegistryService, BaseMediatorService):

    def __init__(self, mediator):
        super(BaseRegistryService, self).__init__(mediator)
        self._service_event_pattern += ".registry"
        self._schemas = {}

    def lookup(self, class_ref):
        """The registered :class:`.LocalClass` of a reference, or None."""
        schema = self._schemas.get(class_ref.site)
        if schema is None:
            return None
        return schema.get(class_ref.name)

    def _schema(self, site):
        schema = self._schemas.get(site)
        if schema is None:
            raise UnknownSiteException("Site %s is not registered" % site)
        return schema

    @property
    def sites(self):
        return sorted(self._schemas)

    @dispatch(event="mediator.registry.register_schema",
              priority=BaseMediatorService.STANDARD_EVENT_PRIORITY)
    def register_schema(self, site, adapter):
        sb_helpers.assert_valid_site(site)
        with self.mediator.lock:
            if site in self._schemas:
                raise DuplicateSiteException(
                    "Site %s is already registered" % site)
            if adapter.site_id != site:
                raise InvalidSchemaException(
                    "Adapter of site %s registered as %s" %
                    (adapter.site_id, site))
            schema = adapter.schema.validate()
            self._schemas[site] = schema
            self.mediator.attach_adapter(site, adapter)
            last = adapter.outbound_log[-1].seq if adapter.outbound_log \
                else 0
            self.mediator.propagation.high_water_marks.set(site, last,
                                                           save=False)
            if last:
                adapter.acknowledge(last)
            self.mediator.integration.revalidate_site(site)
            self.mediator.persist()
            log.info("Registered site %s with %d classes", site,
                     len(schema.classes))
            return schema.copy()

    def restore(self, schema):
        """Install a persisted registry copy without touching its site."""
        with self.mediator.lock:
            self._schemas[schema.site] = schema.validate()

    @dispatch(event="mediator.registry.get",
              priority=BaseMediatorService.STANDARD_EVENT_PRIORITY)
    def get(self, site):
        with self.mediator.lock:
            return self._schema(site).copy()

    @dispatch(event="mediator.registry.list",
              priority=BaseMediatorService.STANDARD_EVENT_PRIORITY)
    def list(self):
        with self.mediator.lock:
            return [self._schemas[s].copy() for s in self.sites]

    def replace(self, site, schema):
        self._schemas[site] = schema

    @dispatch(event="mediator.registry.rename_class",
              priority=BaseMediatorService.STANDARD_EVENT_PRIORITY)
    def rename_class(self, site, old, new):
        sb_helpers.assert_valid_name(new, "class name")
        with self.mediator.lock:
            schema = self._schema(site)
            cls = schema.get(old)
            if cls is None:
                raise UnknownClassException(
                    "Class %s does not exist at site %s" % (old, site))
            if cls.name == new:
                return schema.copy()
            other = schema.get(new)
            if other is not None and other is not cls:
                raise NameCollisionException(
                    "Class %s already exists at site %s" % (new, site))
            previous = cls.name
            cls.name = new
            self.mediator.correspondence.rename_class(site, previous, new)
            self.mediator.integration.rename_class(site, previous, new)
            self.mediator.integration.revalidate_site(site)
            self.mediator.persist()
            log.info("Renamed class %s.%s to %s", site, previous, new)
            return schema.copy()

    @dispatch(event="mediator.registry.rename_attribute",
              priority=BaseMediatorService.STANDARD_EVENT_PRIORITY)
    def rename_attribute(self, site, cls, old, new):
        sb_helpers.assert_valid_name(new, "attribute name")
        with self.mediator.lock:
            schema = self._schema(site)
            local_class = schema.get(cls)
            if local_class is None:
                raise UnknownClassException(
                    "Class %s does not exist at site %s" % (cls, site))
            attr = local_class.attribute(old)
            if attr is None:
                raise UnknownAttributeException(
                    "Attribute %s does not exist in %s" %
                    (old, local_class.ref))
            if attr.name == new:
                return local_class.copy()
            other = local_class.attribute(new)
            if other is not None and other is not attr:
                raise NameCollisionException(
                    "Attribute %s already exists in %s" %
                    (new, local_class.ref))
            previous = attr.name
            attr.name = new
            if local_class.key:
                local_class.key = tuple(
                    new if sb_helpers.names_equal(k, previous) else k
                    for k in local_class.key)
            self.mediator.correspondence.rename_attribute(
                site, local_class.name, previous, new)
            self.mediator.integration.revalidate_site(site)
            self.mediator.persist()
            log.info("Renamed attribute %s.%s to %s", local_class.ref,
                     previous, new)
            return local_class.copy()

    def export(self, schemas=None):
        """Canonical text of the registry copies, sorted by site."""
        schemas = schemas if schemas is not None else self._schemas
        parts = []
        for site in sorted(schemas):
            schema = schemas[site]
            ordered = LocalSchema(site, sorted(
                schema.classes, key=lambda c: sb_helpers.name_key(c.name)))
            parts.append("site %s\n%s" % (site, format_schema(ordered)))
        return "\n".join(parts)


class BaseCorrespondenceService(CorrespondenceService, BaseMediatorService):

    def __init__(self, mediator):
        super(BaseCorrespondenceService, self).__init__(mediator)
        self._service_event_pattern += ".correspondence"
        self._assertions = []
        self._catalog = ConversionCatalog()

    @property
    def catalog(self):
        return self._catalog

    def _lookup(self):
        return self.mediator.registry.lookup

    @dispatch(event="mediator.correspondence.parse_assertions",
              priority=BaseMediatorService.STANDARD_EVENT_PRIORITY)
    def parse_assertions(self, text):
        with self.mediator.lock:
            catalog = ConversionCatalog(self._catalog.declared())
            return parse_assertions(text, self._lookup(), catalog)

    @dispatch(event="mediator.correspondence.add",
              priority=BaseMediatorService.STANDARD_EVENT_PRIORITY)
    def add(self, text):
        with self.mediator.lock:
            catalog = ConversionCatalog(self._catalog.declared())
            assertions = parse_assertions(text, self._lookup(), catalog)
            self._catalog = catalog
            self._assertions.extend(assertions)
            self.mediator.integration.revalidate_all()
            self.mediator.persist()
            log.info("Stored %d correspondence assertions", len(assertions))
            return list(assertions)

    def restore(self, text):
        """Reload persisted assertions as declared, without validation."""
        with self.mediator.lock:
            catalog = ConversionCatalog()
            self._assertions = parse_assertions(text, None, catalog)
            self._catalog = catalog

    @dispatch(event="mediator.correspondence.list",
              priority=BaseMediatorService.STANDARD_EVENT_PRIORITY)
    def list(self):
        with self.mediator.lock:
            return list(self._assertions)

    def assertions(self):
        return self._assertions

    @dispatch(event="mediator.correspondence.classify_pair",
              priority=BaseMediatorService.STANDARD_EVENT_PRIORITY)
    def classify_pair(self, first, second, asserted, correspondences=None,
                      contained=LEFT):
        with self.mediator.lock:
            classes = []
            for ref in (first, second):
                cls = self.mediator.registry.lookup(ref)
                if cls is None:
                    raise UnknownClassException("Unknown class %s" % (ref,))
                classes.append(cls.copy())
        return classify_pair(classes[0], classes[1], asserted,
                             correspondences, contained)

    @dispatch(event="mediator.correspondence.global_attribute_set",
              priority=BaseMediatorService.STANDARD_EVENT_PRIORITY)
    def global_attribute_set(self, assertion):
        with self.mediator.lock:
            return global_attribute_set(assertion, self._lookup())

    def rename_class(self, site, old, new):
        for assertion in self._assertions:
            assertion.rename_class(site, old, new)

    def rename_attribute(self, site, cls, old, new):
        for assertion in self._assertions:
            assertion.rename_attribute(site, cls, old, new)

    def export(self):
        return pretty_print(self._assertions, self._catalog)


class BaseIntegrationService(IntegrationService, BaseMediatorService):

    def __init__(self, mediator):
        super(BaseIntegrationService, self).__init__(mediator)
        self._service_event_pattern += ".integration"
        self._global = GlobalSchema()

    @property
    def global_schema(self):
        return self._global

    def _define(self, name, operator, constituents, strict=True):
        with self.mediator.lock:
            if self._global.find(name) is not None:
                raise DuplicateVirtualClassException(
                    "Virtual class %s already exists" % name)
            lookup = self.mediator.registry.lookup
            assertions = self.mediator.correspondence.assertions()
            if strict:
                vc = build_virtual_class(name, operator, constituents,
                                         lookup, assertions)
            else:
                vc = revalidate(VirtualClass(name, operator, constituents),
                                lookup, assertions)
            self._global.add(vc)
            for warning in vc.warnings:
                log.warning("%s: %s", name, warning)
            self.mediator.persist()
            log.info("Defined %r", vc)
            return vc

    @dispatch(event="mediator.integration.union",
              priority=BaseMediatorService.STANDARD_EVENT_PRIORITY)
    def union(self, name, constituents):
        return self._define(name, OperatorKind.UNION, constituents)

    @dispatch(event="mediator.integration.generalize",
              priority=BaseMediatorService.STANDARD_EVENT_PRIORITY)
    def generalize(self, name, constituents):
        return self._define(name, OperatorKind.GENERALIZE, constituents)

    @dispatch(event="mediator.integration.specialize",
              priority=BaseMediatorService.STANDARD_EVENT_PRIORITY)
    def specialize(self, name, constituents):
        return self._define(name, OperatorKind.SPECIALIZE, constituents)

    @dispatch(event="mediator.integration.import_class",
              priority=BaseMediatorService.STANDARD_EVENT_PRIORITY)
    def import_class(self, name, constituent):
        return self._define(name, OperatorKind.IMPORT, [constituent])

    @dispatch(event="mediator.integration.integrate",
              priority=BaseMediatorService.STANDARD_EVENT_PRIORITY)
    def integrate(self, text):
        """
        Define every virtual class of a global schema definition document.

        :rtype: ``list`` of :class:`.VirtualClass`
        """
        with self.mediator.lock:
            return [self._define(d.name, d.operator, d.constituents)
                    for d in parse_definitions(text)]

    def restore(self, text):
        """Rebuild persisted definitions; failures become invalidations."""
        with self.mediator.lock:
            for definition in parse_definitions(text):
                self._define(definition.name, definition.operator,
                             definition.constituents, strict=False)

    @dispatch(event="mediator.integration.revalidate",
              priority=BaseMediatorService.STANDARD_EVENT_PRIORITY)
    def revalidate(self, name):
        with self.mediator.lock:
            vc = revalidate(self._global.get(name),
                            self.mediator.registry.lookup,
                            self.mediator.correspondence.assertions())
            self.mediator.persist()
            return vc

    def _revalidate_each(self, classes):
        affected = []
        for vc in classes:
            revalidate(vc, self.mediator.registry.lookup,
                       self.mediator.correspondence.assertions())
            affected.append((vc.name, vc.status_text))
        return affected

    def revalidate_site(self, site):
        """Revalidate the virtual classes with a constituent at ``site``."""
        with self.mediator.lock:
            return self._revalidate_each(self._global.referencing(site))

    def revalidate_all(self):
        with self.mediator.lock:
            return self._revalidate_each(self._global.list())

    def rename_class(self, site, old, new):
        for vc in self._global:
            vc.rename_class(site, old, new)

    @dispatch(event="mediator.integration.get",
              priority=BaseMediatorService.STANDARD_EVENT_PRIORITY)
    def get(self, name):
        with self.mediator.lock:
            return self._global.get(name).copy()

    @dispatch(event="mediator.integration.list",
              priority=BaseMediatorService.STANDARD_EVENT_PRIORITY)
    def list(self):
        with self.mediator.lock:
            return [vc.copy() for vc in self._global]

    @dispatch(event="mediator.integration.remove",
              priority=BaseMediatorService.STANDARD_EVENT_PRIORITY)
    def remove(self, name):
        with self.mediator.lock:
            self._global.remove(name)
            self.mediator.persist()

    def definitions(self):
        return self._global.definitions()

    def export(self):
        with self.mediator.lock:
            return self._global.export()


class BaseQueryService(QueryService, BaseMediatorService):

    def __init__(self, mediator):
        super(BaseQueryService, self).__init__(mediator)
        self._service_event_pattern += ".query"

    def _parse(self, query):
        if isinstance(query, GlobalQuery):
            return query
        return GlobalQuery.parse(query)

    def _snapshot(self, query):
        with self.mediator.lock:
            return self.mediator.integration.global_schema.get(
                query.virtual_class).copy()

    def _config(self):
        return self.mediator.config

    @dispatch(event="mediator.query.decompose",
              priority=BaseMediatorService.STANDARD_EVENT_PRIORITY)
    def decompose(self, query):
        query = self._parse(query)
        return decompose(query, self._snapshot(query),
                         self._config().enable_pushdown,
                         self._config().two_digit_year_pivot)

    @dispatch(event="mediator.query.compose",
              priority=BaseMediatorService.STANDARD_EVENT_PRIORITY)
    def compose(self, sub_results, plan):
        return compose(sub_results, plan,
                       self._config().allow_partial_results)

    def engine(self):
        config = self._config()
        return QueryEngine(self.mediator.adapter, config.query_workers,
                           config.enable_pushdown,
                           config.allow_partial_results,
                           config.two_digit_year_pivot)

    @dispatch(event="mediator.query.execute",
              priority=BaseMediatorService.STANDARD_EVENT_PRIORITY)
    def execute(self, query):
        query = self._parse(query)
        return self.engine().execute(query, self._snapshot(query))


class ConvergenceReport(object):
    """
    The outcome of comparing the maintained global directory with a
    from-scratch rebuild. ``diff`` is a unified diff, maintained first.
    """

    def __init__(self, maintained, rebuilt):
        self.maintained = maintained
        self.rebuilt = rebuilt
        self.diff = list(difflib.unified_diff(
            maintained.splitlines(), rebuilt.splitlines(),
            'maintained', 'rebuilt', lineterm=''))

    @property
    def equal(self):
        return not self.diff

    def __bool__(self):
        return self.equal

    __nonzero__ = __bool__

    def __repr__(self):
        return "<SB-ConvergenceReport: %s>" % (
            "equal" if self.equal else "%d diff lines" % len(self.diff))


class BasePropagationService(PropagationService, BaseMediatorService):

    def __init__(self, mediator, mailbox=None, high_water_marks=None):
        super(BasePropagationService, self).__init__(mediator)
        self._service_event_pattern += ".propagation"
        self._mailbox = mailbox or Mailbox()
        self._hwm = high_water_marks or HighWaterMarks()
        self._buffers = {}
        self._agents = {}
        self._rejected = []

    @property
    def mailbox(self):
        return self._mailbox

    @mailbox.setter
    def mailbox(self, mailbox):
        self._mailbox = mailbox
        self._agents = {}

    @property
    def high_water_marks(self):
        return self._hwm

    @high_water_marks.setter
    def high_water_marks(self, marks):
        self._hwm = marks

    def agent(self, site):
        adapter = self.mediator.adapter(site)
        agent = self._agents.get(site)
        if agent is None or agent.adapter is not adapter:
            agent = ReplicationAgent(adapter, self._mailbox)
            self._agents[site] = agent
        return agent

    @dispatch(event="mediator.propagation.relay",
              priority=BaseMediatorService.STANDARD_EVENT_PRIORITY)
    def relay(self, site):
        agent = self.agent(site)
        if not agent.adapter.online:
            log.info("Link to site %s is down, %d entries stay pending",
                     site, len(agent.pending()))
            return RelayReport(site, link_up=False)
        report = RelayReport(site)
        agent.send_pending()
        for message in self._mailbox.drain(site):
            entry = ChangeLogEntry.from_wire(message)
            try:
                applied, affected, rejected = self._deliver(entry)
                report.delivered += len(applied)
                report.affected_virtual_classes.extend(affected)
                report.rejected.extend(rejected)
            except StaleEntryException:
                report.skipped_duplicates += 1
            except GapBufferedException:
                report.buffered += 1
            self._mailbox.acknowledge(site, self._hwm.get(site))
        agent.receive_acks()
        log.info("Relayed site %s: %r", site, report)
        return report

    @dispatch(event="mediator.propagation.relay_all",
              priority=BaseMediatorService.STANDARD_EVENT_PRIORITY)
    def relay_all(self):
        """Relay every registered site, in site order."""
        return [self.relay(site) for site in self.mediator.registry.sites]

    @dispatch(event="mediator.propagation.apply",
              priority=BaseMediatorService.STANDARD_EVENT_PRIORITY)
    def mediator_apply(self, entry):
        """
        Apply one relayed entry, and any buffered successors it unblocks.
        Entries the registry copy refuses are listed in
        :attr:`rejected_entries`.
        """
        return self._deliver(entry)[1]

    @property
    def rejected_entries(self):
        """``(site, seq, reason)`` of every entry refused so far."""
        return list(self._rejected)

    def _deliver(self, entry):
        with self.mediator.lock:
            site = entry.site
            self.mediator.registry._schema(site)
            expected = self._hwm.get(site) + 1
            if entry.seq < expected:
                log.debug("Skipping duplicate entry %d of site %s",
                          entry.seq, site)
                raise StaleEntryException(site, entry.seq)
            buffer = self._buffers.setdefault(site, {})
            if entry.seq > expected:
                buffer[entry.seq] = entry
                log.warning("Entry %d of site %s arrived early, expecting"
                            " %d", entry.seq, site, expected)
                raise GapBufferedException(site, entry.seq, expected)
            applied = []
            affected = []
            rejected = []
            while entry is not None:
                try:
                    affected.extend(self._apply(entry))
                    applied.append(entry)
                except InvalidChangeException as e:
                    log.error("Entry %d of site %s does not apply to the"
                              " registry copy and is skipped: %s",
                              entry.seq, site, e)
                    rejected.append((entry.seq, str(e)))
                    self._rejected.append((site, entry.seq, str(e)))
                    self._hwm.set(site, entry.seq, save=False)
                buffer.pop(entry.seq, None)
                entry = buffer.get(entry.seq + 1)
            # marks reach disk only together with the registry copies
            self.mediator.persist()
            return applied, _last_status(affected), rejected

    def _apply(self, entry):
        site = entry.site
        registry = self.mediator.registry
        schema, effect = apply_change(registry._schema(site), entry.change,
                                      by_local_name=True)
        registry.replace(site, schema)
        if effect.renamed_class:
            self.mediator.correspondence.rename_class(
                site, effect.old_class_name, effect.class_name)
            self.mediator.integration.rename_class(
                site, effect.old_class_name, effect.class_name)
        if effect.renamed_attribute:
            self.mediator.correspondence.rename_attribute(
                site, effect.class_name, effect.old_attribute_name,
                effect.attribute_name)
        self._hwm.set(site, entry.seq, save=False)
        affected = self.mediator.integration.revalidate_site(site)
        log.info("Applied entry %d of site %s (%s)", entry.seq, site,
                 entry.change.kind.value)
        return affected

    def rebuild_registry(self):
        """
        The registry as it follows from the sites' current schemas, with the
        mediator-side names of the current registry carried over.
        """
        rebuilt = {}
        registry = self.mediator.registry
        for site in registry.sites:
            current = registry._schema(site)
            truth = self.mediator.adapter(site).schema
            classes = []
            for cls in truth.classes:
                known = current.get_by_local_name(cls.name)
                attributes = []
                names = {}
                for attr in cls.attributes:
                    copied = attr.copy()
                    copied.local_name = attr.name
                    known_attr = known.attribute_by_local_name(attr.name) \
                        if known is not None else None
                    if known_attr is not None:
                        copied.name = known_attr.name
                    names[sb_helpers.name_key(attr.name)] = copied.name
                    attributes.append(copied)
                key = [names[sb_helpers.name_key(k)] for k in cls.key] \
                    if cls.key else None
                classes.append(LocalClass(
                    site, known.name if known is not None else cls.name,
                    attributes, key, local_name=cls.name))
            rebuilt[site] = LocalSchema(site, classes)
        return rebuilt

    @dispatch(event="mediator.propagation.convergence_check",
              priority=BaseMediatorService.STANDARD_EVENT_PRIORITY)
    def convergence_check(self):
        """
        Compare the registry copies and the global schema with a rebuild
        from the sites' current schemas.

        The rebuild reuses the stored assertions, the virtual class
        definitions and the mediator-side names of the registry. It detects
        registry copies that lag or diverge from their sites and virtual
        classes derived from them, but not assertions or definitions that
        missed a rename: both sides of the comparison read the same ones.
        """
        with self.mediator.lock:
            registry = self.mediator.registry
            rebuilt = self.rebuild_registry()
            assertions = self.mediator.correspondence.assertions()

            def lookup(ref):
                schema = rebuilt.get(ref.site)
                return schema.get(ref.name) if schema is not None else None

            fresh = GlobalSchema()
            for definition in self.mediator.integration.definitions():
                fresh.add(revalidate(
                    VirtualClass(definition.name, definition.operator,
                                 definition.constituents),
                    lookup, assertions))
            maintained = "%s\n%s" % (
                registry.export(),
                self.mediator.integration.global_schema.export())
            scratch = "%s\n%s" % (registry.export(rebuilt), fresh.export())
        report = ConvergenceReport(maintained, scratch)
        log.info("Convergence check: %r", report)
        return report


def _last_status(affected):
    """Keep the final status of each affected virtual class, in order."""
    latest = {}
    order = []
    for name, status in affected:
        if name not in latest:
            order.append(name)
        latest[name] = status
    return [(name, latest[name]) for name in order]

