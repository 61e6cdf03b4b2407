"""
The common object-oriented data model into which every local schema is
transformed: semantic types and their coercion lattice, attributes, local
classes and schemas, object instances, and the line-oriented schema and
extent file formats.
"""
import datetime
import logging
import re
from collections import namedtuple

import six

from ..interfaces.exceptions import InvalidSchemaException
from ..interfaces.exceptions import ParseException
from ..interfaces.exceptions import TypeMismatchException
from ..interfaces.model import BaseType
from . import helpers as sb_helpers

log = logging.getLogger(__name__)

DEFAULT_YEAR_PIVOT = 50

ISO_DATE_FORMAT = '%Y-%m-%d'

IDENTIFIER_VALUE = re.compile(r"^[A-Za-z0-9_.:-]+$")

NUMERIC_BASES = (BaseType.INTEGER, BaseType.REAL)


class SemanticType(namedtuple('SemanticType', 'base unit')):
    """
    A value type of the common data model: one of the five base kinds and,
    for numeric kinds only, an optional unit tag such as a currency code.
    """
    __slots__ = ()

    def __new__(cls, base, unit=None):
        if not isinstance(base, BaseType):
            try:
                base = BaseType(base)
            except ValueError:
                raise InvalidSchemaException(
                    "Unknown base type: %r. Expected one of: %s" %
                    (base, ", ".join(b.value for b in BaseType)))
        if unit is not None:
            if base not in NUMERIC_BASES:
                raise InvalidSchemaException(
                    "A unit can only be given for integer or real types,"
                    " not for %s" % base.value)
            if not unit:
                unit = None
        return super(SemanticType, cls).__new__(cls, base, unit)

    @classmethod
    def parse(cls, text):
        """Parse ``base[:unit]``."""
        parts = text.strip().split(':')
        if len(parts) > 2 or not parts[0]:
            raise InvalidSchemaException("Invalid type: %r" % (text,))
        return cls(parts[0].lower(), parts[1] if len(parts) == 2 else None)

    @property
    def is_numeric(self):
        return self.base in NUMERIC_BASES

    def __str__(self):
        if self.unit:
            return "%s:%s" % (self.base.value, self.unit)
        return self.base.value


INTEGER = SemanticType(BaseType.INTEGER)
REAL = SemanticType(BaseType.REAL)
TEXT = SemanticType(BaseType.TEXT)
DATE = SemanticType(BaseType.DATE)
IDENTIFIER = SemanticType(BaseType.IDENTIFIER)


def _base_join(first, second):
    if first == second:
        return first
    if {first, second} == set(NUMERIC_BASES):
        return BaseType.REAL
    return BaseType.TEXT


def join_types(first, second):
    """
    Return the least common type both types coerce to. Integers widen to
    reals and anything widens to text. Two numeric types carrying different
    units have no join.

    :raises TypeMismatchException: if the units conflict.
    """
    base = _base_join(first.base, second.base)
    if base not in NUMERIC_BASES:
        return SemanticType(base)
    if first.unit and second.unit and first.unit != second.unit:
        raise TypeMismatchException(
            "Cannot join %s with %s: units differ" % (first, second))
    return SemanticType(base, first.unit or second.unit)


def join_all(types):
    types = list(types)
    if not types:
        return None
    result = types[0]
    for other in types[1:]:
        result = join_types(result, other)
    return result


def is_coercible(source, target):
    """Whether values of ``source`` type can be coerced to ``target``."""
    if target.base == BaseType.TEXT:
        return True
    if target.base in NUMERIC_BASES and source.base in NUMERIC_BASES:
        if source.unit and target.unit and source.unit != target.unit:
            return False
        return (source.base == target.base or
                (source.base, target.base) == (BaseType.INTEGER,
                                               BaseType.REAL))
    return source.base == target.base


def format_real(value):
    """Render a real without a trailing ``.0`` when it is integral."""
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def render_value(value, date_format=None):
    """
    The canonical text of a value. Dates use ``date_format`` when given,
    ISO-8601 otherwise.
    """
    if value is None:
        return None
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format_real(value)
    if isinstance(value, datetime.date):
        return value.strftime(date_format or ISO_DATE_FORMAT)
    return six.text_type(value)


def coerce_value(value, source, target):
    """
    Coerce a value of type ``source`` along the lattice to ``target``.

    :raises TypeMismatchException: if ``source`` is not coercible.
    """
    if value is None:
        return None
    if source.base == target.base:
        if target.base == BaseType.REAL:
            return float(value)
        return value
    if (source.base, target.base) == (BaseType.INTEGER, BaseType.REAL):
        return float(value)
    if target.base == BaseType.TEXT:
        return render_value(value)
    raise TypeMismatchException(
        "Cannot coerce %s to %s" % (source, target))


def convert_value_lenient(value, source, target, pivot=DEFAULT_YEAR_PIVOT):
    """
    Best-effort conversion used when a site changes the type of an
    attribute. Returns ``None`` when the value has no image in the new type.
    """
    if value is None:
        return None
    if is_coercible(source, target):
        return coerce_value(value, source, target)
    try:
        if target.base == BaseType.INTEGER:
            if isinstance(value, float):
                return int(round(value))
            return int(str(value).strip())
        if target.base == BaseType.REAL:
            return float(str(value).strip())
        if target.base == BaseType.DATE:
            return parse_date(str(value), pivot)[0]
        if target.base == BaseType.IDENTIFIER:
            text = render_value(value)
            return text if IDENTIFIER_VALUE.match(text) else None
    except (ValueError, ParseException):
        return None
    return None


def default_value(semantic_type):
    """The backfill value for a new non-nullable attribute."""
    return {
        BaseType.INTEGER: 0,
        BaseType.REAL: 0.0,
        BaseType.TEXT: "",
        BaseType.DATE: datetime.date(1970, 1, 1),
        BaseType.IDENTIFIER: "0",
    }[semantic_type.base]


def conforms(value, semantic_type):
    """Whether a non-null python value belongs to the semantic type."""
    base = semantic_type.base
    if isinstance(value, bool):
        return False
    if base == BaseType.INTEGER:
        return isinstance(value, six.integer_types)
    if base == BaseType.REAL:
        return isinstance(value, (float,) + six.integer_types)
    if base == BaseType.TEXT:
        return isinstance(value, six.string_types)
    if base == BaseType.DATE:
        return (isinstance(value, datetime.date) and
                not isinstance(value, datetime.datetime))
    if base == BaseType.IDENTIFIER:
        return (isinstance(value, six.string_types) and
                bool(IDENTIFIER_VALUE.match(value)))
    return False


_SHORT_DATE = re.compile(r"^(\d{1,2})/(\d{1,2})/(\d{2})$")
_LONG_DATE = re.compile(r"^(\d{1,2})/(\d{1,2})/(\d{4})$")
_ISO_DATE = re.compile(r"^(\d{4})-(\d{2})-(\d{2})$")


def parse_date(text, pivot=DEFAULT_YEAR_PIVOT):
    """
    Parse an ISO-8601 date or a ``DD/MM/YYYY`` or ``DD/MM/YY`` date. Two
    digit years below ``pivot`` belong to the 2000s, the others to the
    1900s.

    :rtype: ``tuple``
    :return: the date and the strftime pattern it was written in.
    """
    text = text.strip()
    try:
        match = _ISO_DATE.match(text)
        if match:
            year, month, day = (int(g) for g in match.groups())
            return datetime.date(year, month, day), ISO_DATE_FORMAT
        match = _LONG_DATE.match(text)
        if match:
            day, month, year = (int(g) for g in match.groups())
            return datetime.date(year, month, day), '%d/%m/%Y'
        match = _SHORT_DATE.match(text)
        if match:
            day, month, year = (int(g) for g in match.groups())
            year += 2000 if year < pivot else 1900
            return datetime.date(year, month, day), '%d/%m/%y'
    except ValueError as e:
        raise ParseException("Invalid date %r: %s" % (text, e))
    raise ParseException("Unrecognised date format: %r" % (text,))


def parse_value(text, semantic_type, pivot=DEFAULT_YEAR_PIVOT):
    """
    Parse the textual form of a value of ``semantic_type``.

    :rtype: ``tuple``
    :return: the value and, for dates, the format it was written in.
    """
    base = semantic_type.base
    try:
        if base == BaseType.INTEGER:
            return int(text), None
        if base == BaseType.REAL:
            return float(text), None
        if base == BaseType.DATE:
            return parse_date(text, pivot)
    except ValueError:
        raise ParseException("Invalid %s value: %r" % (base.value, text))
    if base == BaseType.IDENTIFIER and not IDENTIFIER_VALUE.match(text):
        raise ParseException("Invalid identifier value: %r" % (text,))
    return text, None


class ClassRef(namedtuple('ClassRef', 'site name')):
    """
    Reference to a class at a site. Equality ignores the case of the class
    name.
    """
    __slots__ = ()

    @classmethod
    def parse(cls, text):
        site, sep, name = text.strip().rpartition('.')
        if not sep or not site or not name:
            raise ParseException(
                "Expected <site>.<class>, got %r" % (text,))
        return cls(site, name)

    @property
    def key(self):
        return (self.site, sb_helpers.name_key(self.name))

    def __eq__(self, other):
        return isinstance(other, ClassRef) and self.key == other.key

    def __ne__(self, other):
        return not self.__eq__(other)

    def __hash__(self):
        return hash(self.key)

    def __str__(self):
        return "%s.%s" % (self.site, self.name)


class AttributeRef(namedtuple('AttributeRef', 'site cls attribute')):
    """
    Reference to an attribute of a class at a site, compared ignoring the
    case of the class and attribute names.
    """
    __slots__ = ()

    @property
    def class_ref(self):
        return ClassRef(self.site, self.cls)

    @property
    def key(self):
        return (self.site, sb_helpers.name_key(self.cls),
                sb_helpers.name_key(self.attribute))

    def __eq__(self, other):
        return isinstance(other, AttributeRef) and self.key == other.key

    def __ne__(self, other):
        return not self.__eq__(other)

    def __hash__(self):
        return hash(self.key)

    def __str__(self):
        return "%s.%s.%s" % (self.site, self.cls, self.attribute)


class Attribute(object):
    """
    A typed attribute of a local class. ``local_name`` is the name the
    component database itself uses; it differs from ``name`` only after a
    mediator-side rename.
    """

    def __init__(self, name, semantic_type, nullable=False, local_name=None):
        self.name = name
        self.type = semantic_type
        self.nullable = bool(nullable)
        self.local_name = local_name or name

    @property
    def renamed(self):
        return self.local_name != self.name

    def copy(self):
        return Attribute(self.name, self.type, self.nullable, self.local_name)

    def spec(self):
        """The ``name:type[:unit][?]`` form of the attribute."""
        return "%s:%s%s" % (self.name, self.type,
                            "?" if self.nullable else "")

    def __eq__(self, other):
        return (isinstance(other, Attribute) and
                self.name == other.name and
                self.type == other.type and
                self.nullable == other.nullable and
                self.local_name == other.local_name)

    def __ne__(self, other):
        return not self.__eq__(other)

    def __hash__(self):
        return hash((self.name, self.type, self.nullable))

    def __repr__(self):
        return "<SB-Attribute: %s>" % self.spec()


def parse_type_spec(text):
    """
    Parse ``type[:unit][?]``.

    :rtype: ``tuple``
    :return: the semantic type and the nullable flag.
    """
    text = text.strip()
    nullable = text.endswith('?')
    if nullable:
        text = text[:-1]
    return SemanticType.parse(text), nullable


def format_type_spec(semantic_type, nullable):
    return "%s%s" % (semantic_type, "?" if nullable else "")


def parse_attribute_spec(text):
    """Parse ``name:type[:unit][?]`` into an :class:`Attribute`."""
    name, sep, type_spec = text.strip().partition(':')
    if not sep:
        raise InvalidSchemaException(
            "Expected name:type[:unit][?], got %r" % (text,))
    semantic_type, nullable = parse_type_spec(type_spec)
    sb_helpers.assert_valid_name(name, "attribute name")
    return Attribute(name.strip(), semantic_type, nullable)


class LocalClass(object):
    """
    A named class at a site: typed attributes in declaration order and an
    optional identity key. ``local_name`` is the class name at the site.
    """

    def __init__(self, site, name, attributes=None, key=None,
                 local_name=None):
        self.site = site
        self.name = name
        self.attributes = list(attributes or [])
        self.key = tuple(key) if key else None
        self.local_name = local_name or name

    @property
    def ref(self):
        return ClassRef(self.site, self.name)

    @property
    def attribute_names(self):
        return [a.name for a in self.attributes]

    def attribute(self, name):
        return sb_helpers.find_named(self.attributes, name)

    def attribute_by_local_name(self, local_name):
        return sb_helpers.find_named(self.attributes, local_name,
                                     attr='local_name')

    def has_attribute(self, name):
        return self.attribute(name) is not None

    def is_key(self, attribute_name):
        """Whether the class key consists of exactly the given attribute."""
        return (self.key is not None and len(self.key) == 1 and
                sb_helpers.names_equal(self.key[0], attribute_name))

    def validate(self):
        """
        Check the class invariants.

        :raises InvalidSchemaException: on the first violation found.
        """
        sb_helpers.assert_valid_name(self.name, "class name")
        seen = set()
        for attr in self.attributes:
            sb_helpers.assert_valid_name(attr.name, "attribute name")
            sb_helpers.assert_valid_name(attr.local_name, "attribute name")
            key = sb_helpers.name_key(attr.name)
            if key in seen:
                raise InvalidSchemaException(
                    "Duplicate attribute %s in class %s.%s" %
                    (attr.name, self.site, self.name))
            seen.add(key)
        local_names = set(sb_helpers.name_key(a.local_name)
                          for a in self.attributes)
        if len(local_names) != len(self.attributes):
            raise InvalidSchemaException(
                "Duplicate local attribute names in class %s.%s" %
                (self.site, self.name))
        if self.key is not None:
            if not self.key:
                raise InvalidSchemaException(
                    "Key of %s.%s must not be empty" % (self.site, self.name))
            for name in self.key:
                attr = self.attribute(name)
                if attr is None:
                    raise InvalidSchemaException(
                        "Key attribute %s is not an attribute of %s.%s" %
                        (name, self.site, self.name))
                if attr.nullable:
                    raise InvalidSchemaException(
                        "Key attribute %s of %s.%s must not be nullable" %
                        (name, self.site, self.name))
            if len(set(sb_helpers.name_key(k) for k in self.key)) != len(
                    self.key):
                raise InvalidSchemaException(
                    "Duplicate key attribute in %s.%s" %
                    (self.site, self.name))
        return self

    def copy(self):
        return LocalClass(self.site, self.name,
                          [a.copy() for a in self.attributes], self.key,
                          self.local_name)

    def __eq__(self, other):
        return (isinstance(other, LocalClass) and
                self.site == other.site and
                self.name == other.name and
                self.local_name == other.local_name and
                self.attributes == other.attributes and
                self.key == other.key)

    def __ne__(self, other):
        return not self.__eq__(other)

    __hash__ = None

    def __repr__(self):
        return "<SB-LocalClass: %s.%s (%s)>" % (
            self.site, self.name, ", ".join(self.attribute_names))


class LocalSchema(object):
    """
    The schema of one component database: a set of uniquely named classes.
    """

    def __init__(self, site, classes=None):
        self.site = site
        self.classes = list(classes or [])

    def get(self, name):
        return sb_helpers.find_named(self.classes, name)

    def get_by_local_name(self, local_name):
        return sb_helpers.find_named(self.classes, local_name,
                                     attr='local_name')

    def find(self, pattern=None):
        return sb_helpers.filter_by_pattern(self.classes, pattern)

    @property
    def class_names(self):
        return [c.name for c in self.classes]

    def validate(self):
        sb_helpers.assert_valid_site(self.site)
        seen = set()
        local_seen = set()
        for cls in self.classes:
            if cls.site != self.site:
                raise InvalidSchemaException(
                    "Class %s belongs to site %s, not %s" %
                    (cls.name, cls.site, self.site))
            cls.validate()
            key = sb_helpers.name_key(cls.name)
            local_key = sb_helpers.name_key(cls.local_name)
            if key in seen or local_key in local_seen:
                raise InvalidSchemaException(
                    "Duplicate class %s at site %s" % (cls.name, self.site))
            seen.add(key)
            local_seen.add(local_key)
        return self

    def copy(self):
        return LocalSchema(self.site, [c.copy() for c in self.classes])

    def __eq__(self, other):
        return (isinstance(other, LocalSchema) and
                self.site == other.site and
                self.classes == other.classes)

    def __ne__(self, other):
        return not self.__eq__(other)

    __hash__ = None

    def __repr__(self):
        return "<SB-LocalSchema: %s (%s)>" % (
            self.site, ", ".join(self.class_names))


class ObjectInstance(object):
    """
    One object of a class extent: a map from attribute name to value, with
    ``None`` standing for null.
    """

    def __init__(self, class_ref, values):
        self.class_ref = class_ref
        self.values = dict(values)

    def get(self, name):
        for key, value in self.values.items():
            if sb_helpers.names_equal(key, name):
                return value
        return None

    def validate(self, local_class):
        """
        :raises InvalidSchemaException: if the object does not conform to
                                        ``local_class``.
        """
        for key in self.values:
            if not local_class.has_attribute(key):
                raise InvalidSchemaException(
                    "Object of %s has unknown attribute %s" %
                    (local_class.ref, key))
        for attr in local_class.attributes:
            value = self.values.get(attr.name)
            if value is None:
                if not attr.nullable:
                    raise InvalidSchemaException(
                        "Attribute %s of %s must not be null" %
                        (attr.name, local_class.ref))
            elif not conforms(value, attr.type):
                raise InvalidSchemaException(
                    "Value %r of %s.%s does not conform to %s" %
                    (value, local_class.ref, attr.name, attr.type))
        return self

    def copy(self):
        return ObjectInstance(self.class_ref, self.values)

    def __eq__(self, other):
        return (isinstance(other, ObjectInstance) and
                self.class_ref == other.class_ref and
                self.values == other.values)

    def __ne__(self, other):
        return not self.__eq__(other)

    __hash__ = None

    def __repr__(self):
        return "<SB-Object: %s %s>" % (self.class_ref, self.values)


def parse_schema(text, site):
    """
    Parse a schema description document::

        # comment
        class employees
          employeecode:integer
          salary:real:USD?
          key: employeecode

    A class or attribute may carry ``from <local-name>`` when the mediator
    has renamed it.

    :raises ParseException: on a syntax error.
    :raises InvalidSchemaException: if the schema violates an invariant.
    """
    classes = []
    current = None
    key = None

    def close():
        if current is not None:
            current.key = tuple(key) if key else None
            classes.append(current)

    for number, line in sb_helpers.content_lines(text):
        try:
            if line.startswith('class ') or line == 'class':
                close()
                name, local_name = _split_from(line[len('class'):], number)
                if not name:
                    raise ParseException("Missing class name", number, 1)
                current = LocalClass(site, name, local_name=local_name)
                key = None
            elif line.startswith('key:'):
                if current is None:
                    raise ParseException("key: outside of a class", number, 1)
                key = [k.strip() for k in line[4:].split(',') if k.strip()]
                if not key:
                    raise ParseException("Empty key", number, 5)
            else:
                if current is None:
                    raise ParseException(
                        "Attribute outside of a class", number, 1)
                spec, local_name = _split_from(line, number)
                attr = parse_attribute_spec(spec)
                attr.local_name = local_name or attr.name
                current.attributes.append(attr)
        except InvalidSchemaException as e:
            raise ParseException(str(e), number)
    close()
    schema = LocalSchema(site, classes)
    schema.validate()
    log.debug("Parsed schema of site %s with %d classes", site,
              len(classes))
    return schema


def _split_from(text, number):
    parts = text.split()
    if len(parts) == 1:
        return parts[0], None
    if len(parts) == 3 and parts[1] == 'from':
        return parts[0], parts[2]
    if not parts:
        return None, None
    raise ParseException("Unexpected text: %r" % text.strip(), number)


def format_schema(schema):
    """The schema description document of ``schema``."""
    lines = []
    for cls in schema.classes:
        header = "class %s" % cls.name
        if cls.local_name != cls.name:
            header += " from %s" % cls.local_name
        lines.append(header)
        for attr in cls.attributes:
            line = "  %s" % attr.spec()
            if attr.renamed:
                line += " from %s" % attr.local_name
            lines.append(line)
        if cls.key:
            lines.append("  key: %s" % ", ".join(cls.key))
    return "\n".join(lines) + ("\n" if lines else "")


_PAIR = re.compile(r'\s*([A-Za-z_][A-Za-z0-9_]*)=("(?:[^"\\]|\\.)*"|\S*)')


def _unquote(token):
    if token.startswith('"'):
        return re.sub(r'\\(.)', r'\1', token[1:-1])
    return token


def _quote(text):
    if (text and text != 'NULL' and
            re.match(r'^[^\s"\\]+$', text)):
        return text
    return '"%s"' % text.replace('\\', '\\\\').replace('"', '\\"')


def parse_extents(text, schema, pivot=DEFAULT_YEAR_PIVOT):
    """
    Parse an extent data document::

        [employees]
        employeecode=1 name=john country=NY age=25 phone=NULL

    Values containing spaces are double-quoted; the unquoted literal ``NULL``
    is null. Attributes missing from a row are null.

    :rtype: ``tuple``
    :return: a map from class name to a list of :class:`ObjectInstance` and
             a map from ``(class, attribute)`` name keys to the date format
             first seen for that attribute.
    """
    extents = dict((sb_helpers.name_key(c.name), []) for c in schema.classes)
    date_formats = {}
    current = None
    for number, line in sb_helpers.content_lines(text):
        if line.startswith('['):
            if not line.endswith(']'):
                raise ParseException("Unterminated class header", number)
            current = schema.get(line[1:-1].strip())
            if current is None:
                raise ParseException(
                    "Unknown class %s at site %s" %
                    (line[1:-1].strip(), schema.site), number, 2)
            continue
        if current is None:
            raise ParseException("Row outside of a class section", number)
        values = {}
        position = 0
        while position < len(line):
            match = _PAIR.match(line, position)
            if not match:
                raise ParseException(
                    "Expected attribute=value", number, position + 1)
            name, token = match.group(1), match.group(2)
            attr = current.attribute(name)
            if attr is None:
                raise ParseException(
                    "Unknown attribute %s of %s" % (name, current.ref),
                    number, match.start(1) + 1)
            if token == 'NULL':
                values[attr.name] = None
            else:
                try:
                    value, fmt = parse_value(_unquote(token), attr.type,
                                             pivot)
                except ParseException as e:
                    raise ParseException(str(e), number,
                                         match.start(2) + 1)
                values[attr.name] = value
                if fmt:
                    date_formats.setdefault(
                        (sb_helpers.name_key(current.name),
                         sb_helpers.name_key(attr.name)), fmt)
            position = match.end()
            while position < len(line) and line[position].isspace():
                position += 1
        obj = ObjectInstance(current.ref, values)
        for attr in current.attributes:
            obj.values.setdefault(attr.name, None)
        try:
            obj.validate(current)
        except InvalidSchemaException as e:
            raise ParseException(str(e), number)
        extents[sb_helpers.name_key(current.name)].append(obj)
    return extents, date_formats


def format_extents(schema, extents, date_formats=None):
    """The extent data document for ``extents`` of ``schema``."""
    date_formats = date_formats or {}
    lines = []
    for cls in schema.classes:
        objs = extents.get(sb_helpers.name_key(cls.name), [])
        lines.append("[%s]" % cls.name)
        for obj in objs:
            pairs = []
            for attr in cls.attributes:
                value = obj.values.get(attr.name)
                if value is None:
                    pairs.append("%s=NULL" % attr.name)
                    continue
                fmt = date_formats.get((sb_helpers.name_key(cls.name),
                                        sb_helpers.name_key(attr.name)))
                pairs.append("%s=%s" % (attr.name,
                                        _quote(render_value(value, fmt))))
            lines.append(" ".join(pairs))
    return "\n".join(lines) + ("\n" if lines else "")
