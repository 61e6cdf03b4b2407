"""
Integration operators and the global schema. A virtual class is defined by
an operator over ordered constituent classes; its attribute set and mapping
rules are derived from the governing correspondence assertions and are
recomputed whenever the constituents evolve.
"""
import itertools
import logging
import re

from ..interfaces.exceptions import ArityException
from ..interfaces.exceptions import DuplicateVirtualClassException
from ..interfaces.exceptions import HomonymyForbiddenException
from ..interfaces.exceptions import InconsistentAssertionException
from ..interfaces.exceptions import InvalidSchemaException
from ..interfaces.exceptions import MissingAssertionException
from ..interfaces.exceptions import MissingKeyLinkException
from ..interfaces.exceptions import ParseException
from ..interfaces.exceptions import SchemaBridgeBaseException
from ..interfaces.exceptions import TypeMismatchException
from ..interfaces.exceptions import UnknownClassException
from ..interfaces.exceptions import UnknownVirtualClassException
from ..interfaces.model import OperatorKind
from ..interfaces.model import RelationKind
from ..interfaces.model import VirtualClassStatus
from . import helpers as sb_helpers
from .correspondence import LEFT
from .correspondence import classify_pair
from .correspondence import derive_global_attributes
from .schema import ClassRef

log = logging.getLogger(__name__)

# Relationships that allow each merging operator to combine a pair.
ADMISSIBLE_RELATIONS = {
    OperatorKind.UNION: (RelationKind.EQUIVALENCE, RelationKind.SYNONYMY),
    OperatorKind.GENERALIZE: (RelationKind.EQUIVALENCE, RelationKind.SYNONYMY,
                              RelationKind.CONTAINMENT),
    OperatorKind.SPECIALIZE: (RelationKind.EQUIVALENCE, RelationKind.SYNONYMY,
                              RelationKind.CONTAINMENT),
}

# Leading words of an invalidation reason, one per failure category.
REASON_MISSING_CONSTITUENT = "missing constituent"
REASON_MISSING_ASSERTION = "missing assertion"
REASON_HOMONYMY = "homonymy"
REASON_INCONSISTENT = "inconsistent assertion"
REASON_KEY_LINK_BROKEN = "key_link broken"
REASON_MISSING_KEY_LINK = "missing key link"
REASON_TYPE_MISMATCH = "type mismatch"
REASON_ARITY = "arity"

_REASONS = [
    (UnknownClassException, REASON_MISSING_CONSTITUENT),
    (MissingAssertionException, REASON_MISSING_ASSERTION),
    (HomonymyForbiddenException, REASON_HOMONYMY),
    (InconsistentAssertionException, REASON_INCONSISTENT),
    (TypeMismatchException, REASON_TYPE_MISMATCH),
    (ArityException, REASON_ARITY),
]


class GlobalAttribute(object):

    def __init__(self, name, semantic_type):
        self.name = name
        self.type = semantic_type

    def __eq__(self, other):
        return (isinstance(other, GlobalAttribute) and
                self.name == other.name and self.type == other.type)

    def __ne__(self, other):
        return not self.__eq__(other)

    def __hash__(self):
        return hash((self.name, self.type))

    def __repr__(self):
        return "<SB-GlobalAttribute: %s:%s>" % (self.name, self.type)


class MappingRule(object):
    """
    How one constituent supplies a global attribute: the local attribute
    (mediator-visible name and the site's own name), its local type and the
    conversion applied to its values.
    """

    def __init__(self, class_ref, attribute, local_name, source_type,
                 conversion=None):
        self.class_ref = class_ref
        self.attribute = attribute
        self.local_name = local_name
        self.source_type = source_type
        self.conversion = conversion

    def convert(self, value):
        if self.conversion is None:
            return value
        return self.conversion(value)

    @property
    def converted_type(self):
        if self.conversion is None:
            return self.source_type
        return self.conversion.result_type(self.source_type)

    def describe(self):
        text = "%s.%s" % (self.class_ref, self.attribute)
        if self.conversion is not None:
            text += " via %s" % self.conversion.name
        return text

    def __repr__(self):
        return "<SB-MappingRule: %s>" % self.describe()


class VirtualClassDefinition(object):
    """A line of the global schema definition document."""

    def __init__(self, operator, name, constituents):
        self.operator = operator
        self.name = name
        self.constituents = list(constituents)

    def to_line(self):
        return "%s %s = %s" % (self.operator.value, self.name,
                               ", ".join(str(c) for c in self.constituents))

    def __eq__(self, other):
        return (isinstance(other, VirtualClassDefinition) and
                self.to_line() == other.to_line())

    def __ne__(self, other):
        return not self.__eq__(other)

    __hash__ = None

    def __repr__(self):
        return "<SB-VirtualClassDefinition: %s>" % self.to_line()


_DEFINITION = re.compile(
    r"^(?P<operator>[A-Za-z]+)\s+(?P<name>\S+)\s*=\s*(?P<constituents>.*)$")


def parse_definitions(text):
    """
    Parse a global schema definition document, one virtual class per line::

        union employees = SiteA.employees, SiteB.employees
        import ug = SiteA.UGStudents

    :rtype: ``list`` of :class:`VirtualClassDefinition`
    """
    definitions = []
    for number, line in sb_helpers.content_lines(text):
        match = _DEFINITION.match(line)
        if not match:
            raise ParseException(
                "Expected <operator> <name> = <site>.<class>, ...", number, 1)
        try:
            operator = OperatorKind(match.group('operator').lower())
        except ValueError:
            raise ParseException(
                "Unknown operator %r, expected one of: %s" %
                (match.group('operator'),
                 ", ".join(o.value for o in OperatorKind)), number, 1)
        name = match.group('name')
        if not sb_helpers.is_valid_name(name):
            raise ParseException("Invalid virtual class name %r" % name,
                                 number, match.start('name') + 1)
        constituents = []
        for part in match.group('constituents').split(','):
            if not part.strip():
                raise ParseException("Empty constituent", number,
                                     match.start('constituents') + 1)
            constituents.append(ClassRef.parse(part))
        definitions.append(VirtualClassDefinition(operator, name,
                                                  constituents))
    return definitions


def format_definitions(definitions):
    return "".join(d.to_line() + "\n" for d in definitions)


class VirtualClass(object):
    """
    A class of the global schema: the operator, the ordered constituent
    classes, the derived attribute set and the mapping rules. ``key`` names
    the global attribute identifying objects across constituents. Objects
    are never stored; they are computed at query time.
    """

    def __init__(self, name, operator, constituents):
        self.name = name
        self.operator = operator
        self.constituents = list(constituents)
        self.attributes = []
        self.mapping = {}
        self.local_class_names = {}
        self.key = None
        self.assertions = []
        self.status = VirtualClassStatus.VALID
        self.reason = None
        self.warnings = []

    def local_class_name(self, class_ref):
        """The site's own name of a constituent class."""
        return self.local_class_names.get(class_ref, class_ref.name)

    @property
    def definition(self):
        return VirtualClassDefinition(self.operator, self.name,
                                      self.constituents)

    @property
    def is_valid(self):
        return self.status == VirtualClassStatus.VALID

    @property
    def attribute_names(self):
        return [a.name for a in self.attributes]

    def attribute(self, name):
        return sb_helpers.find_named(self.attributes, name)

    def rules(self, attribute_name):
        """The mapping rules of a global attribute, by constituent."""
        attr = self.attribute(attribute_name)
        return self.mapping.get(attr.name, {}) if attr else {}

    def rule(self, attribute_name, class_ref):
        return self.rules(attribute_name).get(class_ref)

    def references(self, site):
        return any(c.site == site for c in self.constituents)

    def rename_class(self, site, old, new):
        old_ref = ClassRef(site, old)
        self.constituents = [ClassRef(site, new) if c == old_ref else c
                             for c in self.constituents]

    def invalidate(self, reason):
        self.status = VirtualClassStatus.INVALIDATED
        self.reason = reason
        self.attributes = []
        self.mapping = {}
        self.key = None

    def copy(self):
        copied = VirtualClass(self.name, self.operator, self.constituents)
        copied.attributes = list(self.attributes)
        copied.mapping = dict((k, dict(v)) for k, v in self.mapping.items())
        copied.local_class_names = dict(self.local_class_names)
        copied.key = self.key
        copied.assertions = list(self.assertions)
        copied.status = self.status
        copied.reason = self.reason
        copied.warnings = list(self.warnings)
        return copied

    @property
    def status_text(self):
        if self.is_valid:
            return self.status
        return "%s(%s)" % (self.status, self.reason)

    def export(self):
        """The canonical text of the virtual class."""
        lines = ["virtual class %s" % self.name,
                 "  operator: %s" % self.operator.value,
                 "  constituents: %s" % ", ".join(
                     str(c) for c in self.constituents),
                 "  status: %s" % self.status_text]
        if self.key:
            lines.append("  key: %s" % self.key)
        for attr in self.attributes:
            rules = self.mapping.get(attr.name, {})
            sources = ", ".join(rules[c].describe()
                                for c in self.constituents if c in rules)
            lines.append("  attribute %s: %s <- %s" % (attr.name, attr.type,
                                                       sources))
        return "\n".join(lines) + "\n"

    def __repr__(self):
        return "<SB-VirtualClass: %s %s(%s) %s>" % (
            self.name, self.operator.value,
            ", ".join(str(c) for c in self.constituents), self.status_text)


def _governing_assertion(operator, first, second, assertions):
    """
    The assertion allowing ``operator`` to combine two classes.

    :raises HomonymyForbiddenException: if the classes are homonymous.
    :raises MissingAssertionException: if no admissible assertion relates
                                       them.
    """
    related = [a for a in assertions if a.relates(first, second)]
    for assertion in related:
        if assertion.relation == RelationKind.HOMONYMY:
            raise HomonymyForbiddenException(
                "%s and %s are homonymous and cannot be merged into a common"
                " virtual class" % (first, second))
    for assertion in related:
        if assertion.relation in ADMISSIBLE_RELATIONS[operator]:
            return assertion
    if related:
        raise MissingAssertionException(
            "%s requires %s between %s and %s, found only %s" %
            (operator.value, " or ".join(
                r.value for r in ADMISSIBLE_RELATIONS[operator]),
             first, second, ", ".join(a.relation.value for a in related)))
    raise MissingAssertionException(
        "No correspondence assertion relates %s and %s" % (first, second))


def _check_pair(assertion, lookup):
    left, right = lookup(assertion.left), lookup(assertion.right)
    if (assertion.relation == RelationKind.SYNONYMY and
            sb_helpers.names_equal(left.name, right.name)):
        raise HomonymyForbiddenException(
            "%s and %s now share a name and are homonymous" %
            (assertion.left, assertion.right))
    classify_pair(left, right, assertion.relation, assertion.correspondences,
                  assertion.contained or LEFT)


def _key_spans(classes, assertions):
    """
    Whether the key correspondences of ``assertions`` link the keys of all
    ``classes`` into one identity.
    """
    parent = dict((c.ref, c.ref) for c in classes)

    def find(ref):
        while parent[ref] != ref:
            ref = parent[ref]
        return ref

    for assertion in assertions:
        link = assertion.key_link
        if link is None or assertion.key_broken:
            continue
        refs = [m.ref.class_ref for m in link.members
                if m.ref.class_ref in parent]
        for ref in refs[1:]:
            parent[find(ref)] = find(refs[0])
    return len(set(find(c.ref) for c in classes)) == 1


def _key_attribute(specs, classes):
    for spec in specs:
        if len(spec.sources) != len(classes):
            continue
        if all(cls.is_key(spec.sources[cls.ref][0].name) for cls in classes):
            return spec
    return None


def build_virtual_class(name, operator, constituents, lookup, assertions):
    """
    Apply an integration operator.

    :type constituents: ``list`` of :class:`.ClassRef`
    :param constituents: The constituent classes, in order.

    :type lookup: ``callable``
    :param lookup: Maps a :class:`.ClassRef` to the current
                   :class:`.LocalClass` or ``None``.

    :type assertions: ``list`` of :class:`.CorrespondenceAssertion`
    :param assertions: All declared assertions.

    :rtype: :class:`VirtualClass`
    :return: A valid virtual class.

    :raises ArityException: for a wrong number of constituents.
    :raises UnknownClassException: if a constituent does not exist.
    :raises HomonymyForbiddenException: for a homonymous pair.
    :raises MissingAssertionException: for an unrelated pair.
    :raises MissingKeyLinkException: if a specialization lacks a key link.
    """
    try:
        sb_helpers.assert_valid_name(name, "virtual class name")
    except InvalidSchemaException as e:
        raise ParseException(str(e))
    vc = VirtualClass(name, operator, constituents)
    refs = vc.constituents
    if operator == OperatorKind.IMPORT and len(refs) != 1:
        raise ArityException(
            "import takes exactly one constituent, got %d" % len(refs))
    if operator != OperatorKind.IMPORT and len(refs) < 2:
        raise ArityException(
            "%s needs at least two constituents, got %d" %
            (operator.value, len(refs)))
    if len(set(refs)) != len(refs):
        raise ArityException(
            "%s lists a constituent more than once" % name)

    classes = []
    for ref in refs:
        cls = lookup(ref)
        if cls is None:
            raise UnknownClassException(
                "%s: constituent %s does not exist" %
                (REASON_MISSING_CONSTITUENT, ref))
        classes.append(cls)

    governing = []
    if operator != OperatorKind.IMPORT:
        for first, second in itertools.combinations(refs, 2):
            assertion = _governing_assertion(operator, first, second,
                                             assertions)
            resolved = assertion.resolved(lookup)
            _check_pair(resolved, lookup)
            governing.append(resolved)

    warnings = []
    specs = derive_global_attributes(classes, governing, warnings)

    broken = [a for a in governing if a.key_broken]
    spans = not broken and len(classes) > 1 and _key_spans(classes,
                                                           governing)
    key_spec = _key_attribute(specs, classes) if spans else None
    if operator == OperatorKind.SPECIALIZE and key_spec is None:
        if broken:
            raise MissingKeyLinkException(
                "%s: a key correspondence of %s lost a member" %
                (REASON_KEY_LINK_BROKEN, name))
        raise MissingKeyLinkException(
            "specialize %s needs a key correspondence linking all of %s" %
            (name, ", ".join(str(r) for r in refs)))
    if operator == OperatorKind.IMPORT:
        cls = classes[0]
        if cls.key and len(cls.key) == 1:
            key_spec = next(s for s in specs
                            if cls.is_key(s.sources[cls.ref][0].name))

    if operator == OperatorKind.GENERALIZE:
        specs = [s for s in specs if len(s.sources) == len(classes)]
        if not specs:
            message = ("Generalization %s has an empty attribute"
                       " intersection" % name)
            log.warning(message)
            warnings.append(message)

    for spec in specs:
        vc.attributes.append(GlobalAttribute(spec.name, spec.type))
        rules = {}
        for cls in classes:
            source = spec.sources.get(cls.ref)
            if source is None:
                continue
            attr, conversion = source
            rules[cls.ref] = MappingRule(cls.ref, attr.name, attr.local_name,
                                         attr.type, conversion)
        vc.mapping[spec.name] = rules
    vc.constituents = [c.ref for c in classes]
    vc.local_class_names = dict((c.ref, c.local_name) for c in classes)
    vc.key = key_spec.name if key_spec is not None else None
    vc.assertions = governing
    vc.warnings = warnings
    log.debug("Built %r", vc)
    return vc


def union(name, constituents, lookup, assertions):
    """Merge equivalent or synonymous classes; attributes are united."""
    return build_virtual_class(name, OperatorKind.UNION, constituents,
                               lookup, assertions)


def generalize(name, constituents, lookup, assertions):
    """A common superclass; attributes are intersected."""
    return build_virtual_class(name, OperatorKind.GENERALIZE, constituents,
                               lookup, assertions)


def specialize(name, constituents, lookup, assertions):
    """A common subclass keyed across all constituents."""
    return build_virtual_class(name, OperatorKind.SPECIALIZE, constituents,
                               lookup, assertions)


def import_class(name, constituent, lookup):
    """The identity mapping over one local class."""
    return build_virtual_class(name, OperatorKind.IMPORT, [constituent],
                               lookup, [])


def invalidation_reason(error):
    """The status reason for a failed derivation, led by its category."""
    message = str(error)
    if isinstance(error, MissingKeyLinkException):
        if message.startswith(REASON_KEY_LINK_BROKEN):
            return message
        return "%s: %s" % (REASON_MISSING_KEY_LINK, message)
    for cls, category in _REASONS:
        if isinstance(error, cls):
            if message.startswith(category):
                return message
            return "%s: %s" % (category, message)
    return message


def revalidate(vc, lookup, assertions):
    """
    Recompute a virtual class against the current local classes. Failures
    do not raise; the class is marked invalidated with a reason instead and
    recovers on a later revalidation once its preconditions hold again.

    :rtype: :class:`VirtualClass`
    :return: ``vc``, updated in place.
    """
    try:
        fresh = build_virtual_class(vc.name, vc.operator, vc.constituents,
                                    lookup, assertions)
    except SchemaBridgeBaseException as e:
        reason = invalidation_reason(e)
        if vc.is_valid or vc.reason != reason:
            log.warning("Virtual class %s invalidated: %s", vc.name, reason)
        vc.invalidate(reason)
        vc.assertions = []
        vc.warnings = []
        return vc
    if not vc.is_valid:
        log.info("Virtual class %s is valid again", vc.name)
    vc.attributes = fresh.attributes
    vc.local_class_names = fresh.local_class_names
    vc.mapping = fresh.mapping
    vc.key = fresh.key
    vc.assertions = fresh.assertions
    vc.warnings = fresh.warnings
    vc.status = VirtualClassStatus.VALID
    vc.reason = None
    return vc


class GlobalSchema(object):
    """The virtual classes of the federation, in definition order."""

    def __init__(self):
        self._classes = []

    def add(self, vc):
        if self.find(vc.name) is not None:
            raise DuplicateVirtualClassException(
                "Virtual class %s already exists" % vc.name)
        self._classes.append(vc)
        return vc

    def find(self, name):
        return sb_helpers.find_named(self._classes, name)

    def get(self, name):
        vc = self.find(name)
        if vc is None:
            raise UnknownVirtualClassException(
                "Virtual class %s does not exist" % name)
        return vc

    def remove(self, name):
        self._classes.remove(self.get(name))

    def list(self):
        return list(self._classes)

    def referencing(self, site):
        return [vc for vc in self._classes if vc.references(site)]

    def definitions(self):
        return [vc.definition for vc in self._classes]

    def __iter__(self):
        return iter(list(self._classes))

    def __len__(self):
        return len(self._classes)

    def export(self):
        """Canonical text of the global schema, sorted by name."""
        ordered = sorted(self._classes,
                         key=lambda vc: sb_helpers.name_key(vc.name))
        return "\n".join(vc.export() for vc in ordered)
