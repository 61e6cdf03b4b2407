"""
Base implementation of a source adapter: an in-process component database
holding one site's schema and extents, answering subqueries in local terms
and recording its own schema evolution in an outbound log.
"""
import logging
import operator
import threading
from collections import namedtuple

from ..interfaces.adapter import SourceAdapter
from ..interfaces.exceptions import InvalidChangeException
from ..interfaces.exceptions import InvalidQueryException
from ..interfaces.exceptions import InvalidSchemaException
from ..interfaces.exceptions import SiteOfflineException
from ..interfaces.exceptions import UnknownAttributeException
from ..interfaces.exceptions import UnknownClassException
from ..interfaces.model import BaseType
from ..interfaces.model import ChangeKind
from ..interfaces.model import Comparator
from . import helpers as sb_helpers
from .propagation import ChangeLogEntry
from .propagation import apply_change
from .schema import LocalSchema
from .schema import ObjectInstance
from .schema import convert_value_lenient
from .schema import default_value

log = logging.getLogger(__name__)

_OPERATORS = {
    Comparator.EQ: operator.eq,
    Comparator.NE: operator.ne,
    Comparator.LT: operator.lt,
    Comparator.LE: operator.le,
    Comparator.GT: operator.gt,
    Comparator.GE: operator.ge,
}


class Comparison(namedtuple('Comparison', 'attribute comparator value')):
    """
    One conjunct of a predicate: ``attribute comparator literal``.
    """
    __slots__ = ()

    def holds(self, value):
        """
        Evaluate the comparison against an attribute value. Any comparison
        involving null is false.
        """
        if value is None or self.value is None:
            return False
        try:
            return _OPERATORS[self.comparator](value, self.value)
        except TypeError:
            raise InvalidQueryException(
                "Cannot compare %r with %r on %s" %
                (value, self.value, self.attribute))

    def __str__(self):
        return "%s %s %r" % (self.attribute, self.comparator.value,
                             self.value)


def evaluate_predicate(predicate, lookup):
    """
    Whether every conjunct holds. ``lookup`` maps an attribute name to its
    value in the object under test.
    """
    return all(c.holds(lookup(c.attribute)) for c in predicate or ())


class SubQuery(object):
    """
    A query against one local class: a projection of local attribute names
    and an optional conjunction of comparisons.
    """

    def __init__(self, cls, projection, predicate=None):
        self.cls = cls
        self.projection = list(projection)
        self.predicate = list(predicate or [])

    def __eq__(self, other):
        return (isinstance(other, SubQuery) and
                sb_helpers.names_equal(self.cls, other.cls) and
                self.projection == other.projection and
                self.predicate == other.predicate)

    def __ne__(self, other):
        return not self.__eq__(other)

    __hash__ = None

    def __repr__(self):
        where = ""
        if self.predicate:
            where = " where " + " and ".join(str(c) for c in self.predicate)
        return "<SB-SubQuery: select %s from %s%s>" % (
            ", ".join(self.projection), self.cls, where)


class SubResult(object):
    """The answer of one site: a header of local names and value rows."""

    def __init__(self, header, rows):
        self.header = list(header)
        self.rows = [tuple(r) for r in rows]
        for row in self.rows:
            if len(row) != len(self.header):
                raise InvalidQueryException(
                    "Row %r does not match header %r" % (row, self.header))

    def __len__(self):
        return len(self.rows)

    def __repr__(self):
        return "<SB-SubResult: %s (%d rows)>" % (", ".join(self.header),
                                                 len(self.rows))


def _key_values(obj, key):
    return tuple(obj.values.get(k) for k in key)


def check_unique_key(cls, objs):
    """
    :raises InvalidSchemaException: if two objects share a key value.
    """
    if not cls.key:
        return
    seen = set()
    for obj in objs:
        value = _key_values(obj, cls.key)
        if value in seen:
            raise InvalidSchemaException(
                "Duplicate key %r in %s" % (value, cls.ref))
        seen.add(value)


class BaseSourceAdapter(SourceAdapter):
    """
    An in-memory component database. Schema mutation, log appends and
    subquery evaluation are serialised by a per-adapter lock.
    """

    def __init__(self, site_id, schema=None, extents=None,
                 date_formats=None, log_entries=None, pivot=None):
        sb_helpers.assert_valid_site(site_id)
        self._site_id = site_id
        self._schema = (schema or LocalSchema(site_id)).validate()
        if self._schema.site != site_id:
            raise InvalidSchemaException(
                "Schema of site %s registered as %s" %
                (self._schema.site, site_id))
        self._extents = dict(
            (sb_helpers.name_key(c.name), []) for c in self._schema.classes)
        for name, objs in (extents or {}).items():
            cls = self._schema.get(name)
            if cls is None:
                raise InvalidSchemaException(
                    "Extent given for unknown class %s" % name)
            for obj in objs:
                obj.validate(cls)
            check_unique_key(cls, objs)
            self._extents[sb_helpers.name_key(cls.name)] = list(objs)
        self._date_formats = dict(date_formats or {})
        self._log = list(log_entries or [])
        self._version = len(self._log)
        self._online = True
        self._pivot = pivot
        self._lock = threading.RLock()

    @property
    def site_id(self):
        return self._site_id

    @property
    def schema(self):
        with self._lock:
            return self._schema.copy()

    @property
    def version(self):
        return self._version

    @property
    def online(self):
        return self._online

    @property
    def outbound_log(self):
        with self._lock:
            return list(self._log)

    @property
    def next_seq(self):
        return self._log[-1].seq + 1 if self._log else 1

    def extent(self, class_name):
        """A copy of the objects of a class."""
        with self._lock:
            cls = self._get_class(class_name)
            return [o.copy() for o in
                    self._extents[sb_helpers.name_key(cls.name)]]

    def date_format(self, class_name, attribute_name):
        return self._date_formats.get((sb_helpers.name_key(class_name),
                                       sb_helpers.name_key(attribute_name)))

    @property
    def date_formats(self):
        return dict(self._date_formats)

    def _get_class(self, name):
        cls = self._schema.get(name)
        if cls is None:
            raise UnknownClassException(
                "Class %s does not exist at site %s" % (name, self.site_id))
        return cls

    def execute_subquery(self, subquery):
        if not self._online:
            raise SiteOfflineException(self.site_id)
        with self._lock:
            cls = self._get_class(subquery.cls)
            header = []
            for name in subquery.projection:
                attr = cls.attribute(name)
                if attr is None:
                    raise UnknownAttributeException(
                        "Attribute %s does not exist in %s" %
                        (name, cls.ref))
                header.append(attr.name)
            for comparison in subquery.predicate:
                if not cls.has_attribute(comparison.attribute):
                    raise UnknownAttributeException(
                        "Attribute %s does not exist in %s" %
                        (comparison.attribute, cls.ref))
            rows = []
            for obj in self._extents[sb_helpers.name_key(cls.name)]:
                if evaluate_predicate(subquery.predicate, obj.get):
                    rows.append(tuple(obj.values.get(h) for h in header))
        log.debug("Site %s answered %r with %d rows", self.site_id,
                  subquery, len(rows))
        return SubResult(header, rows)

    def apply_local_change(self, change):
        with self._lock:
            schema, effect = apply_change(self._schema, change)
            extents, formats = self._transform_extents(
                self._schema, schema, change, effect)
            entry = ChangeLogEntry(self.site_id, self.next_seq, change,
                                   flags=effect.flags)
            self._persist_change(entry, schema, extents, formats)
            self._schema = schema
            self._extents = extents
            self._date_formats = formats
            self._log.append(entry)
            self._version += 1
            log.info("Site %s applied %s as seq %d (version %d)%s",
                     self.site_id, change.kind.value, entry.seq,
                     self._version, "" if self._online else " while offline")
            return self._version

    def _transform_extents(self, old_schema, schema, change, effect):
        extents = dict(self._extents)
        formats = dict(self._date_formats)
        old_key = sb_helpers.name_key(change.cls)
        kind = change.kind

        if kind == ChangeKind.ADD_CLASS:
            extents[sb_helpers.name_key(effect.class_name)] = []
            return extents, formats
        if kind == ChangeKind.DROP_CLASS:
            extents.pop(old_key, None)
            for key in [k for k in formats if k[0] == old_key]:
                del formats[key]
            return extents, formats

        cls = schema.get(effect.class_name)
        new_key = sb_helpers.name_key(cls.name)
        objs = [ObjectInstance(cls.ref, o.values)
                for o in extents.pop(old_key)]

        if kind == ChangeKind.RENAME_CLASS:
            for key in [k for k in formats if k[0] == old_key]:
                formats[(new_key, key[1])] = formats.pop(key)

        elif kind == ChangeKind.ADD_ATTRIBUTE:
            attr = cls.attribute(effect.attribute_name)
            fill = None if attr.nullable else default_value(attr.type)
            for obj in objs:
                obj.values[attr.name] = fill

        elif kind == ChangeKind.DROP_ATTRIBUTE:
            for obj in objs:
                obj.values.pop(effect.old_attribute_name, None)
            formats.pop((new_key,
                         sb_helpers.name_key(effect.old_attribute_name)),
                        None)

        elif kind == ChangeKind.RENAME_ATTRIBUTE:
            old_attr = effect.old_attribute_name
            for obj in objs:
                obj.values[effect.attribute_name] = obj.values.pop(old_attr)
            fmt = formats.pop((new_key, sb_helpers.name_key(old_attr)), None)
            if fmt:
                formats[(new_key,
                         sb_helpers.name_key(effect.attribute_name))] = fmt

        elif kind == ChangeKind.CHANGE_ATTRIBUTE_TYPE:
            old_attr = old_schema.get(change.cls).attribute(change.attribute)
            attr = cls.attribute(effect.attribute_name)
            for obj in objs:
                value = convert_value_lenient(obj.values.get(attr.name),
                                              old_attr.type, attr.type,
                                              **self._pivot_kwargs())
                if value is None and not attr.nullable:
                    value = default_value(attr.type)
                obj.values[attr.name] = value
            if attr.type.base != BaseType.DATE:
                formats.pop((new_key, sb_helpers.name_key(attr.name)), None)

        try:
            for obj in objs:
                obj.validate(cls)
            check_unique_key(cls, objs)
        except InvalidSchemaException as e:
            raise InvalidChangeException(
                "%s would leave the extent of %s invalid: %s" %
                (change.kind.value, cls.ref, e))
        extents[new_key] = objs
        return extents, formats

    def _pivot_kwargs(self):
        return {'pivot': self._pivot} if self._pivot is not None else {}

    def set_connectivity(self, online):
        previous = self._online
        self._online = bool(online)
        if previous != self._online:
            log.info("Site %s is now %s", self.site_id,
                     "online" if self._online else "offline")
            self._persist_connectivity(self._online)
        return previous

    def acknowledge(self, seq):
        with self._lock:
            changed = False
            for entry in self._log:
                if entry.seq <= seq and not entry.applied:
                    entry.applied = True
                    changed = True
            if changed:
                self._persist_ack(seq)

    @property
    def acknowledged(self):
        """The highest acknowledged sequence number."""
        applied = [e.seq for e in self._log if e.applied]
        return max(applied) if applied else 0

    def _persist_change(self, entry, schema, extents, date_formats):
        """
        Hook for adapters that keep the site on disk. Called before the new
        state becomes visible; raising aborts the change.
        """
        pass

    def _persist_ack(self, seq):
        pass

    def _persist_connectivity(self, online):
        pass

    def __repr__(self):
        return "<SB-%s: %s v%d%s>" % (self.__class__.__name__, self.site_id,
                                      self._version,
                                      "" if self._online else " offline")
