"""
Bottom-up propagation of local schema modifications: the change vocabulary,
per-site change log entries and their line format, the replication agent
that relays a site's log, the mailbox carrying relay messages, and the
mediator's persisted high-water marks.
"""
import logging
import os
import random
import threading
from collections import defaultdict
from collections import deque

from ..interfaces.exceptions import InvalidChangeException
from ..interfaces.exceptions import InvalidSchemaException
from ..interfaces.exceptions import ParseException
from ..interfaces.model import ChangeKind
from . import helpers as sb_helpers
from .schema import Attribute
from .schema import LocalClass
from .schema import format_type_spec
from .schema import parse_attribute_spec
from .schema import parse_type_spec

log = logging.getLogger(__name__)

KEY_DROPPED = 'key_dropped'

_REQUIRED = {
    ChangeKind.ADD_CLASS: (),
    ChangeKind.DROP_CLASS: (),
    ChangeKind.RENAME_CLASS: ('new_name',),
    ChangeKind.ADD_ATTRIBUTE: ('attribute', 'type'),
    ChangeKind.DROP_ATTRIBUTE: ('attribute',),
    ChangeKind.RENAME_ATTRIBUTE: ('attribute', 'new_name'),
    ChangeKind.CHANGE_ATTRIBUTE_TYPE: ('attribute', 'type'),
}

_ALLOWED = {
    ChangeKind.ADD_CLASS: ('attributes', 'key'),
    ChangeKind.DROP_CLASS: (),
    ChangeKind.RENAME_CLASS: ('new_name',),
    ChangeKind.ADD_ATTRIBUTE: ('attribute', 'type', 'nullable'),
    ChangeKind.DROP_ATTRIBUTE: ('attribute',),
    ChangeKind.RENAME_ATTRIBUTE: ('attribute', 'new_name'),
    ChangeKind.CHANGE_ATTRIBUTE_TYPE: ('attribute', 'type', 'nullable'),
}


class SchemaChange(object):
    """
    A typed local schema modification. Names are the component database's
    own names. ``attributes`` and ``key`` only apply to AddClass, ``type`` and
    ``nullable`` to AddAttribute and ChangeAttributeType.
    """

    def __init__(self, kind, cls, attribute=None, new_name=None,
                 semantic_type=None, nullable=None, attributes=None,
                 key=None):
        self.kind = kind if isinstance(kind, ChangeKind) else ChangeKind(kind)
        self.cls = cls
        self.attribute = attribute
        self.new_name = new_name
        self.type = semantic_type
        self.nullable = nullable
        self.attributes = list(attributes or [])
        self.key = tuple(key) if key else None
        self.validate()

    def validate(self):
        """
        :raises InvalidChangeException: if the payload does not match the
                                        kind.
        """
        if not sb_helpers.is_valid_name(self.cls):
            raise InvalidChangeException(
                "%s needs a valid class name, got %r" %
                (self.kind.value, self.cls))
        for field in _REQUIRED[self.kind]:
            if getattr(self, field) in (None, ''):
                raise InvalidChangeException(
                    "%s requires %s" % (self.kind.value, field))
        payload = {
            'attribute': self.attribute, 'new_name': self.new_name,
            'type': self.type, 'nullable': self.nullable,
            'attributes': self.attributes or None, 'key': self.key,
        }
        for field, value in payload.items():
            if value is not None and field not in _ALLOWED[self.kind]:
                raise InvalidChangeException(
                    "%s does not take %s" % (self.kind.value, field))
        for name in (self.attribute, self.new_name):
            if name is not None and not sb_helpers.is_valid_name(name):
                raise InvalidChangeException("Invalid name: %r" % (name,))
        return self

    def fields(self):
        """The ``key=value`` fields of the change, in log-line order."""
        fields = [('kind', self.kind.value), ('class', self.cls)]
        if self.attribute is not None:
            fields.append(('attr', self.attribute))
        if self.new_name is not None:
            fields.append(('new', self.new_name))
        if self.type is not None:
            fields.append(('type', format_type_spec(self.type,
                                                    bool(self.nullable))))
        if self.attributes:
            fields.append(('attrs', ",".join(a.spec()
                                             for a in self.attributes)))
        if self.key:
            fields.append(('key', ",".join(self.key)))
        return fields

    def to_line(self):
        return " ".join("%s=%s" % f for f in self.fields())

    @classmethod
    def from_fields(cls, fields):
        fields = dict(fields)
        try:
            kind = ChangeKind(fields.pop('kind'))
        except KeyError:
            raise InvalidChangeException("Change is missing kind=")
        except ValueError as e:
            raise InvalidChangeException("Unknown change kind: %s" % e)
        semantic_type = nullable = None
        if 'type' in fields:
            try:
                semantic_type, nullable = parse_type_spec(fields.pop('type'))
            except InvalidSchemaException as e:
                raise InvalidChangeException(str(e))
        attributes = None
        if 'attrs' in fields:
            try:
                attributes = [parse_attribute_spec(spec) for spec
                              in fields.pop('attrs').split(',') if spec]
            except InvalidSchemaException as e:
                raise InvalidChangeException(str(e))
        key = None
        if 'key' in fields:
            key = [k for k in fields.pop('key').split(',') if k]
        change = cls(kind, fields.pop('class', None),
                     attribute=fields.pop('attr', None),
                     new_name=fields.pop('new', None),
                     semantic_type=semantic_type, nullable=nullable,
                     attributes=attributes, key=key)
        if fields:
            raise InvalidChangeException(
                "Unrecognised change fields: %s" % ", ".join(sorted(fields)))
        return change

    @classmethod
    def parse(cls, line):
        """
        Parse a change line such as
        ``kind=AddAttribute class=employees attr=fax type=text?``.
        """
        return cls.from_fields(parse_fields(line))

    def __eq__(self, other):
        return (isinstance(other, SchemaChange) and
                self.fields() == other.fields())

    def __ne__(self, other):
        return not self.__eq__(other)

    __hash__ = None

    def __repr__(self):
        return "<SB-SchemaChange: %s>" % self.to_line()


def parse_fields(line, line_number=None):
    """Split a ``key=value key=value`` line into ordered pairs."""
    fields = []
    for token in line.split():
        name, sep, value = token.partition('=')
        if not sep or not name:
            raise ParseException("Expected key=value, got %r" % token,
                                 line_number)
        fields.append((name, value))
    return fields


class ChangeLogEntry(object):
    """
    One entry of a site's outbound schema update log. ``seq`` is strictly
    increasing and gap-free per site; ``applied`` records that the mediator
    acknowledged the entry.
    """

    def __init__(self, site, seq, change, applied=False, flags=None):
        self.site = site
        self.seq = int(seq)
        self.change = change
        self.applied = applied
        self.flags = list(flags or [])

    def to_line(self):
        """The log-line form: ``seq=<n> kind=<K> class=<c> ...``."""
        line = "seq=%d %s" % (self.seq, self.change.to_line())
        if self.flags:
            line += " flags=%s" % ",".join(self.flags)
        return line

    @classmethod
    def parse(cls, site, line, line_number=None):
        fields = parse_fields(line, line_number)
        if not fields or fields[0][0] != 'seq':
            raise ParseException("Log line must start with seq=",
                                 line_number, 1)
        try:
            seq = int(fields[0][1])
        except ValueError:
            raise ParseException("Invalid seq: %r" % fields[0][1],
                                 line_number, 5)
        flags = []
        rest = []
        for name, value in fields[1:]:
            if name == 'flags':
                flags = [f for f in value.split(',') if f]
            elif name != 'site':
                rest.append((name, value))
        try:
            change = SchemaChange.from_fields(rest)
        except InvalidChangeException as e:
            raise ParseException(str(e), line_number)
        return cls(site, seq, change, flags=flags)

    def to_wire(self):
        """Relay messages mirror the log-line fields, prefixed by the site."""
        return "site=%s %s" % (self.site, self.to_line())

    @classmethod
    def from_wire(cls, message):
        site, sep, rest = message.partition(' ')
        name, _, value = site.partition('=')
        if name != 'site' or not sep:
            raise ParseException("Relay message must start with site=")
        return cls.parse(value, rest)

    def __eq__(self, other):
        return (isinstance(other, ChangeLogEntry) and
                self.site == other.site and self.seq == other.seq and
                self.change == other.change and self.flags == other.flags)

    def __ne__(self, other):
        return not self.__eq__(other)

    __hash__ = None

    def __repr__(self):
        return "<SB-ChangeLogEntry: %s %s%s>" % (
            self.site, self.to_line(), " (applied)" if self.applied else "")


def parse_log(site, text):
    return [ChangeLogEntry.parse(site, line, number)
            for number, line in sb_helpers.content_lines(text)]


class ChangeEffect(object):
    """
    What applying a change did, in terms of the names visible in the schema
    it was applied to. Used to rewrite references to renamed or dropped
    classes and attributes.
    """

    def __init__(self, change):
        self.change = change
        self.class_name = None
        self.old_class_name = None
        self.attribute_name = None
        self.old_attribute_name = None
        self.flags = []

    @property
    def renamed_class(self):
        return (self.old_class_name is not None and
                self.class_name is not None and
                self.old_class_name != self.class_name)

    @property
    def renamed_attribute(self):
        return (self.old_attribute_name is not None and
                self.attribute_name is not None and
                self.old_attribute_name != self.attribute_name)


def _unique_name(name, taken, suffix):
    taken = set(sb_helpers.name_key(t) for t in taken)
    if sb_helpers.name_key(name) not in taken:
        return name
    candidate = "%s_%s" % (name, suffix)
    counter = 2
    while sb_helpers.name_key(candidate) in taken:
        candidate = "%s_%s%d" % (name, suffix, counter)
        counter += 1
    log.warning("Name %s is taken, using %s", name, candidate)
    return candidate


def _find_class(schema, name, by_local_name):
    if by_local_name:
        cls = schema.get_by_local_name(name)
    else:
        cls = schema.get(name)
    if cls is None:
        raise InvalidChangeException(
            "Unknown class %s at site %s" % (name, schema.site))
    return cls


def _find_attribute(cls, name, by_local_name):
    if by_local_name:
        attr = cls.attribute_by_local_name(name)
    else:
        attr = cls.attribute(name)
    if attr is None:
        raise InvalidChangeException(
            "Unknown attribute %s of %s" % (name, cls.ref))
    return attr


def apply_change(schema, change, by_local_name=False):
    """
    Apply ``change`` to a copy of ``schema``.

    With ``by_local_name`` the change's names are resolved against the
    component database's own names, as the mediator does for its copies;
    mediator-visible names follow a local rename unless they had been
    renamed at the mediator.

    :rtype: ``tuple``
    :return: the new schema and a :class:`ChangeEffect`.

    :raises InvalidChangeException: if the change does not apply.
    """
    schema = schema.copy()
    effect = ChangeEffect(change)
    kind = change.kind
    site = schema.site

    if kind == ChangeKind.ADD_CLASS:
        if (schema.get_by_local_name(change.cls) is not None or
                (not by_local_name and schema.get(change.cls) is not None)):
            raise InvalidChangeException(
                "Class %s already exists at site %s" % (change.cls, site))
        name = _unique_name(change.cls, schema.class_names, site)
        attributes = [a.copy() for a in change.attributes]
        for attr in attributes:
            attr.local_name = attr.name
        cls = LocalClass(site, name, attributes, change.key,
                         local_name=change.cls)
        schema.classes.append(cls)
        effect.class_name = name
    else:
        cls = _find_class(schema, change.cls, by_local_name)
        effect.class_name = effect.old_class_name = cls.name

    if kind == ChangeKind.DROP_CLASS:
        schema.classes.remove(cls)
        effect.class_name = None

    elif kind == ChangeKind.RENAME_CLASS:
        other = schema.get_by_local_name(change.new_name)
        if other is not None and other is not cls:
            raise InvalidChangeException(
                "Class %s already exists at site %s" %
                (change.new_name, site))
        follow = cls.name == cls.local_name
        cls.local_name = change.new_name
        if follow:
            siblings = [c.name for c in schema.classes if c is not cls]
            cls.name = _unique_name(change.new_name, siblings, site)
        effect.class_name = cls.name

    elif kind == ChangeKind.ADD_ATTRIBUTE:
        if (cls.attribute_by_local_name(change.attribute) is not None or
                (not by_local_name and cls.has_attribute(change.attribute))):
            raise InvalidChangeException(
                "Attribute %s already exists in %s" %
                (change.attribute, cls.ref))
        name = _unique_name(change.attribute, cls.attribute_names, site)
        cls.attributes.append(Attribute(name, change.type,
                                        bool(change.nullable),
                                        local_name=change.attribute))
        effect.attribute_name = name

    elif kind == ChangeKind.DROP_ATTRIBUTE:
        attr = _find_attribute(cls, change.attribute, by_local_name)
        cls.attributes.remove(attr)
        effect.old_attribute_name = attr.name
        if cls.key and any(sb_helpers.names_equal(k, attr.name)
                           for k in cls.key):
            remaining = tuple(k for k in cls.key
                              if not sb_helpers.names_equal(k, attr.name))
            cls.key = remaining or None
            effect.flags.append(KEY_DROPPED)

    elif kind == ChangeKind.RENAME_ATTRIBUTE:
        attr = _find_attribute(cls, change.attribute, by_local_name)
        other = cls.attribute_by_local_name(change.new_name)
        if other is not None and other is not attr:
            raise InvalidChangeException(
                "Attribute %s already exists in %s" %
                (change.new_name, cls.ref))
        effect.old_attribute_name = attr.name
        follow = attr.name == attr.local_name
        attr.local_name = change.new_name
        if follow:
            siblings = [a.name for a in cls.attributes if a is not attr]
            attr.name = _unique_name(change.new_name, siblings, site)
            if cls.key:
                cls.key = tuple(attr.name if sb_helpers.names_equal(
                    k, effect.old_attribute_name) else k for k in cls.key)
        effect.attribute_name = attr.name

    elif kind == ChangeKind.CHANGE_ATTRIBUTE_TYPE:
        attr = _find_attribute(cls, change.attribute, by_local_name)
        attr.type = change.type
        if change.nullable is not None:
            attr.nullable = bool(change.nullable)
        effect.attribute_name = effect.old_attribute_name = attr.name

    try:
        schema.validate()
    except InvalidSchemaException as e:
        raise InvalidChangeException(
            "%s leaves site %s invalid: %s" % (change.kind.value, site, e))
    return schema, effect


class RelayReport(object):
    """The outcome of one relay of a site's pending log entries."""

    def __init__(self, site, delivered=0, skipped_duplicates=0, buffered=0,
                 affected_virtual_classes=None, link_up=True,
                 rejected=None):
        self.site = site
        self.delivered = delivered
        self.skipped_duplicates = skipped_duplicates
        self.buffered = buffered
        self.affected_virtual_classes = list(affected_virtual_classes or [])
        self.link_up = link_up
        # (seq, reason) of entries the registry copy refused
        self.rejected = list(rejected or [])

    def __repr__(self):
        return ("<SB-RelayReport: %s delivered=%d skipped=%d buffered=%d"
                " rejected=%d%s>" %
                (self.site, self.delivered, self.skipped_duplicates,
                 self.buffered, len(self.rejected),
                 "" if self.link_up else " link down"))


class Mailbox(object):
    """
    In-process channel between replication agents and the mediator. Each
    site has an outbound queue of relay messages and an inbound queue of
    acknowledgements. Faults are injected deterministically: ``reorder``
    shuffles each delivered batch with a seeded generator and ``lose_acks``
    drops acknowledgements on their way back to the site.
    """

    def __init__(self, reorder=False, lose_acks=False, seed=None):
        self.reorder = reorder
        self.lose_acks = lose_acks
        self._random = random.Random(seed)
        self._messages = defaultdict(deque)
        self._acks = defaultdict(deque)
        self._lock = threading.Lock()

    def post(self, site, message):
        with self._lock:
            self._messages[site].append(message)

    def drain(self, site):
        with self._lock:
            batch = list(self._messages[site])
            self._messages[site].clear()
        if self.reorder and len(batch) > 1:
            self._random.shuffle(batch)
        return batch

    def acknowledge(self, site, seq):
        if self.lose_acks:
            log.debug("Dropping acknowledgement %s for site %s", seq, site)
            return
        with self._lock:
            self._acks[site].append(seq)

    def collect_acks(self, site):
        with self._lock:
            acks = list(self._acks[site])
            self._acks[site].clear()
        return acks


class ReplicationAgent(object):
    """
    A site's replication agent: relays the site's pending log entries
    bottom-up through the mailbox and marks them applied once the mediator
    acknowledges them. It only reads the site's schema update log.
    """

    def __init__(self, adapter, mailbox):
        self.adapter = adapter
        self.mailbox = mailbox

    @property
    def site(self):
        return self.adapter.site_id

    def pending(self):
        return [e for e in self.adapter.outbound_log if not e.applied]

    def send_pending(self):
        entries = self.pending()
        for entry in entries:
            log.trace("Posting %s", entry.to_wire())
            self.mailbox.post(self.site, entry.to_wire())
        log.debug("Agent of site %s sent %d pending entries", self.site,
                  len(entries))
        return len(entries)

    def receive_acks(self):
        acks = self.mailbox.collect_acks(self.site)
        if acks:
            self.adapter.acknowledge(max(acks))
        return acks


class HighWaterMarks(object):
    """
    The mediator's per-site record of the last applied sequence number.
    When ``path`` is given, :meth:`save` rewrites the file atomically as
    ``site=<id> applied=<n>`` lines. ``set(..., save=False)`` only moves the
    mark in memory; the mediator flushes it after its registry copies.
    """

    def __init__(self, path=None):
        self.path = path
        self._marks = {}
        if path and os.path.exists(path):
            self._load()

    def _load(self):
        text = sb_helpers.read_text(self.path, "")
        for number, line in sb_helpers.content_lines(text):
            fields = dict(parse_fields(line, number))
            try:
                self._marks[fields['site']] = int(fields['applied'])
            except (KeyError, ValueError):
                raise ParseException("Expected site=<id> applied=<n>",
                                     number)

    def get(self, site):
        return self._marks.get(site, 0)

    def set(self, site, seq, save=True):
        self._marks[site] = seq
        if save:
            self.save()

    def items(self):
        return sorted(self._marks.items())

    def save(self):
        if not self.path:
            return
        sb_helpers.atomic_write(
            self.path, "".join("site=%s applied=%d\n" % item
                               for item in self.items()))
