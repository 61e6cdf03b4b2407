"""
Correspondence assertions: the DBA-declared semantic relationships between
pairs of local classes, their attribute correspondences and conversion
functions, the assertion document format, and the derivation of global
attributes from a set of assertions.
"""
import ast
import logging
import re
from collections import namedtuple

from ..interfaces.exceptions import InconsistentAssertionException
from ..interfaces.exceptions import InvalidSchemaException
from ..interfaces.exceptions import ParseException
from ..interfaces.exceptions import TypeMismatchException
from ..interfaces.exceptions import UnknownReferenceException
from ..interfaces.model import BaseType
from ..interfaces.model import RelationKind
from . import helpers as sb_helpers
from .schema import AttributeRef
from .schema import ClassRef
from .schema import INTEGER
from .schema import REAL
from .schema import TEXT
from .schema import SemanticType
from .schema import is_coercible
from .schema import join_all
from .schema import render_value

log = logging.getLogger(__name__)

# Marker for built-ins whose input or output type follows the member.
SAME_TYPE = None

LEFT = 'left'
RIGHT = 'right'


class ConversionFunction(object):
    """
    A pure function mapping a local attribute's values to their global
    representation. Declared functions are arithmetic expressions over the
    single variable ``x``; affine ones can be inverted for predicate
    pushdown.
    """

    def __init__(self, name, input_type, output_type, expression=None,
                 builtin=None):
        self.name = name
        self.input_type = input_type
        self.output_type = output_type
        self.expression = expression.strip() if expression else None
        self._builtin = builtin
        self._tree = None
        self.affine = None
        if self.expression is not None:
            if not input_type.is_numeric or output_type.base not in (
                    BaseType.INTEGER, BaseType.REAL, BaseType.TEXT):
                raise ParseException(
                    "Function %s must map a numeric type to a numeric or"
                    " text type" % name)
            self._tree = _parse_expression(self.expression)
            self.affine = _affine(self._tree.body)
            if self.affine is not None and self.affine[0] == 0:
                self.affine = None

    @property
    def is_builtin(self):
        return self._builtin is not None

    @property
    def invertible(self):
        return self.affine is not None or self.name == 'identity'

    @property
    def is_identity(self):
        return self.name == 'identity' or self.affine == (1, 0)

    @property
    def exact(self):
        """Whether inverted bounds are exact rather than relaxed."""
        return self.is_identity and (
            self.output_type is SAME_TYPE or
            self.output_type.base != BaseType.INTEGER or
            self.input_type.base == BaseType.INTEGER)

    def result_type(self, member_type):
        """The type of converted values of an attribute of ``member_type``."""
        if self.output_type is SAME_TYPE:
            return member_type
        return self.output_type

    def accepts(self, member_type):
        if self.input_type is SAME_TYPE:
            return True
        return is_coercible(member_type, self.input_type)

    def __call__(self, value):
        if value is None:
            return None
        if self._builtin is not None:
            return self._builtin(value)
        result = _evaluate(self._tree.body, float(value))
        if self.output_type.base == BaseType.INTEGER:
            return int(round(result))
        if self.output_type.base == BaseType.TEXT:
            return render_value(result)
        return result

    def inverse(self, value):
        """The local value whose image is ``value``; affine functions only."""
        if self.name == 'identity':
            return value
        scale, offset = self.affine
        return (value - offset) / scale

    @property
    def increasing(self):
        return self.name == 'identity' or self.affine[0] > 0

    def declaration(self):
        return "function %s(%s) -> %s = %s" % (
            self.name, self.input_type, self.output_type, self.expression)

    def __eq__(self, other):
        return (isinstance(other, ConversionFunction) and
                self.name == other.name and
                self.input_type == other.input_type and
                self.output_type == other.output_type and
                self.expression == other.expression)

    def __ne__(self, other):
        return not self.__eq__(other)

    def __hash__(self):
        return hash(self.name)

    def __repr__(self):
        if self.is_builtin:
            return "<SB-ConversionFunction: %s (built-in)>" % self.name
        return "<SB-ConversionFunction: %s>" % self.declaration()


_ALLOWED_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div)


def _parse_expression(text):
    try:
        tree = ast.parse(text, mode='eval')
    except SyntaxError as e:
        raise ParseException("Invalid expression %r: %s" % (text, e.msg),
                             None, e.offset)
    for node in ast.walk(tree):
        if isinstance(node, (ast.Expression, ast.Load)):
            continue
        if isinstance(node, ast.BinOp):
            if not isinstance(node.op, _ALLOWED_BINOPS):
                raise ParseException(
                    "Operator not allowed in %r" % (text,))
            if isinstance(node.op, ast.Div) and _uses_x(node.right):
                raise ParseException(
                    "Division by an expression in x is not total: %r" %
                    (text,))
        elif isinstance(node, ast.UnaryOp):
            if not isinstance(node.op, (ast.USub, ast.UAdd)):
                raise ParseException("Operator not allowed in %r" % (text,))
        elif isinstance(node, ast.Name):
            if node.id != 'x':
                raise ParseException(
                    "Unknown variable %s in %r, only x is allowed" %
                    (node.id, text))
        elif isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(
                    node.value, (int, float)):
                raise ParseException(
                    "Only numeric constants are allowed in %r" % (text,))
        elif not isinstance(node, (ast.operator, ast.unaryop)):
            raise ParseException(
                "Unsupported syntax in %r" % (text,))
    return tree


def _uses_x(node):
    return any(isinstance(n, ast.Name) for n in ast.walk(node))


def _evaluate(node, x):
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        return x
    if isinstance(node, ast.UnaryOp):
        value = _evaluate(node.operand, x)
        return -value if isinstance(node.op, ast.USub) else value
    left = _evaluate(node.left, x)
    right = _evaluate(node.right, x)
    if isinstance(node.op, ast.Add):
        return left + right
    if isinstance(node.op, ast.Sub):
        return left - right
    if isinstance(node.op, ast.Mult):
        return left * right
    if right == 0:
        raise ParseException("Division by zero in conversion")
    return left / right


def _affine(node):
    """
    The ``(scale, offset)`` of an expression ``scale * x + offset``, or
    ``None`` if the expression is not affine in x.
    """
    if isinstance(node, ast.Constant):
        return 0.0, float(node.value)
    if isinstance(node, ast.Name):
        return 1.0, 0.0
    if isinstance(node, ast.UnaryOp):
        inner = _affine(node.operand)
        if inner is None or isinstance(node.op, ast.UAdd):
            return inner
        return -inner[0], -inner[1]
    left, right = _affine(node.left), _affine(node.right)
    if left is None or right is None:
        return None
    if isinstance(node.op, ast.Add):
        return left[0] + right[0], left[1] + right[1]
    if isinstance(node.op, ast.Sub):
        return left[0] - right[0], left[1] - right[1]
    if isinstance(node.op, ast.Mult):
        if left[0] and right[0]:
            return None
        if left[0]:
            return left[0] * right[1], left[1] * right[1]
        return right[0] * left[1], left[1] * right[1]
    if right[1] == 0:
        raise ParseException("Division by zero in conversion")
    return left[0] / right[1], left[1] / right[1]


def _round(value):
    return int(round(value))


BUILTIN_FUNCTIONS = {
    'identity': ConversionFunction('identity', SAME_TYPE, SAME_TYPE,
                                   builtin=lambda v: v),
    'upper': ConversionFunction('upper', TEXT, TEXT,
                                builtin=lambda v: v.upper()),
    'lower': ConversionFunction('lower', TEXT, TEXT,
                                builtin=lambda v: v.lower()),
    'strip': ConversionFunction('strip', TEXT, TEXT,
                                builtin=lambda v: v.strip()),
    'round': ConversionFunction('round', REAL, INTEGER, builtin=_round),
    'to_text': ConversionFunction('to_text', SAME_TYPE, TEXT,
                                  builtin=render_value),
}


class ConversionCatalog(object):
    """The conversion functions known to the mediator, built-ins included."""

    def __init__(self, functions=None):
        self._functions = dict(BUILTIN_FUNCTIONS)
        for fn in functions or []:
            self.define(fn)

    def define(self, fn):
        existing = self._functions.get(fn.name)
        if existing is not None and existing != fn:
            raise ParseException(
                "Conversion function %s is already defined differently" %
                fn.name)
        self._functions[fn.name] = fn
        return fn

    def get(self, name):
        fn = self._functions.get(name)
        if fn is None:
            raise UnknownReferenceException(
                "Unknown conversion function: %s" % name)
        return fn

    def __contains__(self, name):
        return name in self._functions

    def declared(self):
        """User-declared functions, sorted by name."""
        return sorted((f for f in self._functions.values()
                       if not f.is_builtin), key=lambda f: f.name)


class Member(namedtuple('Member', 'ref conversion')):
    """One side of an attribute correspondence, with its optional
    conversion function."""
    __slots__ = ()

    def spec(self):
        if self.conversion is None:
            return self.ref.attribute
        return "%s(%s)" % (self.conversion.name, self.ref.attribute)


class AttributeCorrespondence(object):
    """
    Attributes of different classes that represent one global attribute.
    ``is_key`` marks the correspondence establishing object identity.
    """

    def __init__(self, global_name, members, is_key=False):
        self.global_name = global_name
        self.members = list(members)
        self.is_key = is_key
        classes = [m.ref.class_ref for m in self.members]
        if len(set(classes)) != len(classes):
            raise InconsistentAssertionException(
                "Correspondence %s has two members in the same class" %
                global_name)

    def member_for(self, class_ref):
        for member in self.members:
            if member.ref.class_ref == class_ref:
                return member
        return None

    def copy(self):
        return AttributeCorrespondence(self.global_name, self.members,
                                       self.is_key)

    def __eq__(self, other):
        return (isinstance(other, AttributeCorrespondence) and
                self.global_name == other.global_name and
                self.members == other.members and
                self.is_key == other.is_key)

    def __ne__(self, other):
        return not self.__eq__(other)

    __hash__ = None

    def __repr__(self):
        return "<SB-AttributeCorrespondence: %s%s = %s>" % (
            "key " if self.is_key else "", self.global_name,
            " ≡ ".join(str(m.ref) for m in self.members))


class CorrespondenceAssertion(object):
    """
    A semantic relationship between two local classes. For containment,
    ``contained`` names the side (``'left'`` or ``'right'``) whose extent is
    contained in the other's.
    """

    def __init__(self, relation, left, right, correspondences=None,
                 contained=None):
        self.relation = relation
        self.left = left
        self.right = right
        self.correspondences = list(correspondences or [])
        if relation == RelationKind.CONTAINMENT:
            self.contained = contained or LEFT
        elif contained is not None:
            raise InconsistentAssertionException(
                "Only containment assertions carry a direction")
        else:
            self.contained = None
        self.key_broken = False
        if left == right:
            raise InconsistentAssertionException(
                "An assertion must relate two different classes, got %s"
                " twice" % (left,))
        if relation == RelationKind.HOMONYMY and self.correspondences:
            raise InconsistentAssertionException(
                "Homonymy assertions carry no attribute correspondences")
        if len([c for c in self.correspondences if c.is_key]) > 1:
            raise InconsistentAssertionException(
                "At most one key correspondence per assertion")

    @property
    def key_link(self):
        for corr in self.correspondences:
            if corr.is_key:
                return corr
        return None

    @property
    def classes(self):
        return (self.left, self.right)

    def relates(self, first, second):
        return {self.left, self.right} == {first, second}

    def involves(self, class_ref):
        return class_ref in (self.left, self.right)

    @property
    def container(self):
        if self.contained is None:
            return None
        return self.right if self.contained == LEFT else self.left

    @property
    def containee(self):
        if self.contained is None:
            return None
        return self.left if self.contained == LEFT else self.right

    def copy(self):
        copied = CorrespondenceAssertion(
            self.relation, self.left, self.right,
            [c.copy() for c in self.correspondences], self.contained)
        copied.key_broken = self.key_broken
        return copied

    def rename_class(self, site, old, new):
        """Rewrite references to a renamed class in place."""
        old_ref = ClassRef(site, old)

        def rewrite(ref):
            return ClassRef(site, new) if ref == old_ref else ref

        self.left, self.right = rewrite(self.left), rewrite(self.right)
        for corr in self.correspondences:
            corr.members = [
                Member(AttributeRef(site, new, m.ref.attribute),
                       m.conversion)
                if m.ref.class_ref == old_ref else m
                for m in corr.members]

    def rename_attribute(self, site, cls, old, new):
        """Rewrite references to a renamed attribute in place."""
        old_ref = AttributeRef(site, cls, old)
        for corr in self.correspondences:
            corr.members = [
                Member(AttributeRef(site, m.ref.cls, new), m.conversion)
                if m.ref == old_ref else m for m in corr.members]

    def resolved(self, lookup):
        """
        A copy of the assertion reduced to the members that still exist in
        the classes ``lookup`` returns. A correspondence left with fewer than
        two members is dropped; if it was the key correspondence the copy is
        marked ``key_broken``.
        """
        copied = self.copy()
        kept = []
        for corr in copied.correspondences:
            members = []
            for member in corr.members:
                cls = lookup(member.ref.class_ref)
                if cls is not None and cls.has_attribute(
                        member.ref.attribute):
                    attr = cls.attribute(member.ref.attribute)
                    members.append(Member(
                        AttributeRef(cls.site, cls.name, attr.name),
                        member.conversion))
            if len(members) >= 2:
                corr.members = members
                kept.append(corr)
            elif corr.is_key:
                copied.key_broken = True
        copied.correspondences = kept
        if copied.key_link is not None:
            for member in copied.key_link.members:
                cls = lookup(member.ref.class_ref)
                if not cls.is_key(member.ref.attribute):
                    copied.key_broken = True
        return copied

    def __eq__(self, other):
        return (isinstance(other, CorrespondenceAssertion) and
                self.relation == other.relation and
                self.left == other.left and
                self.right == other.right and
                self.contained == other.contained and
                self.correspondences == other.correspondences)

    def __ne__(self, other):
        return not self.__eq__(other)

    __hash__ = None

    def __repr__(self):
        return "<SB-CorrespondenceAssertion: %s %s %s %s>" % (
            self.relation.value, self.left, _DIRECTION_SYMBOL.get(
                self.contained, '~'), self.right)


_DIRECTION_SYMBOL = {LEFT: '<', RIGHT: '>'}


def schema_lookup(schemas):
    """
    Build a class lookup over a mapping of site id to
    :class:`.LocalSchema`.
    """
    def lookup(class_ref):
        schema = schemas.get(class_ref.site)
        if schema is None:
            return None
        return schema.get(class_ref.name)
    return lookup


def _contained_attributes_match(containee, container, correspondences):
    for attr in container.attributes:
        if correspondences:
            matched = any(
                c.member_for(container.ref) is not None and
                sb_helpers.names_equal(
                    c.member_for(container.ref).ref.attribute, attr.name) and
                c.member_for(containee.ref) is not None
                for c in correspondences)
        else:
            matched = containee.has_attribute(attr.name)
        if not matched:
            return attr.name
    return None


def classify_pair(c1, c2, asserted, correspondences=None, contained=LEFT):
    """
    Check that the asserted relationship is structurally consistent with the
    two classes.

    Equivalence and homonymy require the same class name, synonymy
    different names. Containment requires the contained class to carry,
    through the attribute correspondences, every attribute of its container;
    without correspondences attributes are matched by name.

    :type contained: ``str``
    :param contained: For containment, which of ``c1`` (``'left'``) or
                      ``c2`` (``'right'``) is the contained class.

    :rtype: :class:`.RelationKind`
    :return: The validated kind.

    :raises InconsistentAssertionException: naming the violated condition.
    """
    same_name = sb_helpers.names_equal(c1.name, c2.name)
    if asserted == RelationKind.EQUIVALENCE and not same_name:
        raise InconsistentAssertionException(
            "equivalence requires the same class name, got %s and %s" %
            (c1.ref, c2.ref))
    if asserted == RelationKind.SYNONYMY and same_name:
        raise InconsistentAssertionException(
            "synonymy requires different class names, got %s and %s" %
            (c1.ref, c2.ref))
    if asserted == RelationKind.HOMONYMY and not same_name:
        raise InconsistentAssertionException(
            "homonymy requires the same class name, got %s and %s" %
            (c1.ref, c2.ref))
    if asserted == RelationKind.CONTAINMENT:
        containee, container = (c1, c2) if contained == LEFT else (c2, c1)
        missing = _contained_attributes_match(containee, container,
                                              correspondences or [])
        if missing is not None:
            raise InconsistentAssertionException(
                "containment requires %s to carry every attribute of %s;"
                " %s is not matched" % (containee.ref, container.ref,
                                        missing))
    return asserted


def validate_assertion(assertion, lookup):
    """
    Check an assertion against the registered classes: references exist,
    the relationship is consistent, every correspondence type-checks after
    conversion and a key correspondence links key attributes.

    :raises UnknownReferenceException: for unregistered classes or
                                       attributes.
    :raises InconsistentAssertionException: for structural violations.
    :raises TypeMismatchException: for types without a common join.
    """
    classes = {}
    for ref in assertion.classes:
        cls = lookup(ref)
        if cls is None:
            raise UnknownReferenceException("Unknown class %s" % (ref,))
        classes[ref] = cls
    used = set()
    for corr in assertion.correspondences:
        types = []
        for member in corr.members:
            cls = classes.get(member.ref.class_ref)
            if cls is None:
                raise InconsistentAssertionException(
                    "%s is not part of the assertion between %s and %s" %
                    (member.ref, assertion.left, assertion.right))
            attr = cls.attribute(member.ref.attribute)
            if attr is None:
                raise UnknownReferenceException(
                    "Unknown attribute %s" % (member.ref,))
            if member.ref in used:
                raise InconsistentAssertionException(
                    "%s appears in more than one correspondence" %
                    (member.ref,))
            used.add(member.ref)
            if member.conversion is not None:
                if not member.conversion.accepts(attr.type):
                    raise TypeMismatchException(
                        "Conversion %s does not accept %s of type %s" %
                        (member.conversion.name, member.ref, attr.type))
                types.append(member.conversion.result_type(attr.type))
            else:
                types.append(attr.type)
        join_all(types)
        if corr.is_key:
            for member in corr.members:
                cls = classes[member.ref.class_ref]
                if not cls.is_key(member.ref.attribute):
                    raise InconsistentAssertionException(
                        "key correspondence %s: %s is not the key of %s" %
                        (corr.global_name, member.ref.attribute, cls.ref))
    classify_pair(classes[assertion.left], classes[assertion.right],
                  assertion.relation, assertion.correspondences,
                  assertion.contained or LEFT)
    return assertion


class GlobalAttributeSpec(object):
    """
    A derived global attribute: its name, joined type and, per constituent
    class, the local attribute and conversion it is computed from.
    """

    def __init__(self, name, semantic_type, sources):
        self.name = name
        self.type = semantic_type
        self.sources = sources

    def __repr__(self):
        return "<SB-GlobalAttributeSpec: %s:%s>" % (self.name, self.type)


class _Groups(object):

    def __init__(self):
        self.parent = {}

    def find(self, node):
        self.parent.setdefault(node, node)
        while self.parent[node] != node:
            self.parent[node] = self.parent[self.parent[node]]
            node = self.parent[node]
        return node

    def union(self, first, second):
        root_first, root_second = self.find(first), self.find(second)
        if root_first != root_second:
            self.parent[root_second] = root_first


def _unique(name, taken, site, warnings):
    candidate = name
    if sb_helpers.name_key(candidate) in taken:
        candidate = "%s_%s" % (name, site)
        counter = 2
        while sb_helpers.name_key(candidate) in taken:
            candidate = "%s_%s%d" % (name, site, counter)
            counter += 1
        message = ("Global attribute name %s is taken, %s.%s is exposed as"
                   " %s" % (name, site, name, candidate))
        log.warning(message)
        warnings.append(message)
    taken.add(sb_helpers.name_key(candidate))
    return candidate


def derive_global_attributes(classes, assertions, warnings=None):
    """
    Partition the attributes of ``classes`` into global attributes. Attributes
    linked, directly or transitively, by the correspondences of
    ``assertions`` form one global attribute named after the first
    correspondence; every other attribute is promoted under its local name,
    suffixed with the site id if that name is already taken.

    :type classes: ``list`` of :class:`.LocalClass`
    :param classes: The classes, in constituent order.

    :type assertions: ``list`` of :class:`.CorrespondenceAssertion`
    :param assertions: Resolved assertions between the classes.

    :rtype: ``list`` of :class:`GlobalAttributeSpec`
    :return: The global attributes in order of first appearance.

    :raises InconsistentAssertionException: if two attributes of one class
                                            end up in the same global
                                            attribute.
    :raises TypeMismatchException: if member types do not join.
    """
    warnings = warnings if warnings is not None else []
    by_ref = dict((c.ref, c) for c in classes)
    groups = _Groups()
    conversions = {}
    global_names = {}

    def node(ref):
        return ref.key

    for assertion in assertions:
        for corr in assertion.correspondences:
            members = [m for m in corr.members
                       if m.ref.class_ref in by_ref]
            if len(members) < 2:
                continue
            for member in members:
                conversions[node(member.ref)] = member.conversion
            for member in members[1:]:
                groups.union(node(members[0].ref), node(member.ref))
            for member in members:
                global_names.setdefault(node(member.ref), corr.global_name)

    order = []
    members_of = {}
    for cls in classes:
        for attr in cls.attributes:
            ref = AttributeRef(cls.site, cls.name, attr.name)
            root = groups.find(node(ref))
            if root not in members_of:
                members_of[root] = []
                order.append(root)
            for other_cls, _, other_attr in members_of[root]:
                if other_cls is cls:
                    raise InconsistentAssertionException(
                        "Attributes %s and %s of %s correspond to the same"
                        " global attribute" % (other_attr.name, attr.name,
                                               cls.ref))
            members_of[root].append((cls, ref, attr))

    taken = set()
    names = {}
    for root in order:
        named = [global_names[node(ref)] for _, ref, _ in members_of[root]
                 if node(ref) in global_names]
        if named:
            first_site = members_of[root][0][0].site
            names[root] = _unique(named[0], taken, first_site, warnings)
    for root in order:
        if root not in names:
            cls, _, attr = members_of[root][0]
            names[root] = _unique(attr.name, taken, cls.site, warnings)

    result = []
    for root in order:
        sources = {}
        types = []
        for cls, ref, attr in members_of[root]:
            conversion = conversions.get(node(ref))
            sources[cls.ref] = (attr, conversion)
            types.append(conversion.result_type(attr.type)
                         if conversion else attr.type)
        try:
            joined = join_all(types)
        except TypeMismatchException as e:
            raise TypeMismatchException(
                "Global attribute %s: %s" % (names[root], e))
        result.append(GlobalAttributeSpec(names[root], joined, sources))
    return result


def global_attribute_set(assertion, lookup):
    """
    The global attributes an assertion defines over its two classes.

    :rtype: ``list`` of ``tuple``
    :return: ``(global_name, SemanticType)`` pairs in order.
    """
    left, right = lookup(assertion.left), lookup(assertion.right)
    specs = derive_global_attributes([left, right],
                                     [assertion.resolved(lookup)])
    return [(s.name, s.type) for s in specs]


_FUNCTION = re.compile(
    r"^function\s+(?P<name>[A-Za-z_][A-Za-z0-9_]*)\s*"
    r"\(\s*(?P<input>[^)]*?)\s*\)\s*->\s*(?P<output>[^\s=]+)\s*"
    r"=\s*(?P<expr>.+)$")

_TOKEN = re.compile(r"""
    (?P<space>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<equiv>≡|==)
  | (?P<punct>[{};()~<>])
  | (?P<word>[A-Za-z0-9_][A-Za-z0-9_.\-]*)
""", re.VERBOSE)

Token = namedtuple('Token', 'kind text line column')


def _tokenize(text):
    tokens = []
    line, line_start, position = 1, 0, 0
    while position < len(text):
        match = _TOKEN.match(text, position)
        if not match:
            raise ParseException("Unexpected character %r" % text[position],
                                 line, position - line_start + 1)
        kind = match.lastgroup
        value = match.group(kind)
        if kind == 'word' or kind == 'equiv' or kind == 'punct':
            tokens.append(Token(kind, value, line,
                                position - line_start + 1))
        newlines = value.count('\n')
        if newlines:
            line += newlines
            line_start = match.start() + value.rindex('\n') + 1
        position = match.end()
    return tokens


class _Parser(object):

    def __init__(self, tokens, catalog):
        self.tokens = tokens
        self.position = 0
        self.catalog = catalog

    def peek(self):
        if self.position < len(self.tokens):
            return self.tokens[self.position]
        return None

    def next(self, expected=None):
        token = self.peek()
        if token is None:
            last = self.tokens[-1] if self.tokens else None
            raise ParseException(
                "Unexpected end of document%s" %
                (", expected %s" % expected if expected else ""),
                last.line if last else None)
        if expected is not None and token.text != expected:
            raise ParseException("Expected %r, got %r" %
                                 (expected, token.text),
                                 token.line, token.column)
        self.position += 1
        return token

    def word(self, what):
        token = self.next()
        if token.kind != 'word':
            raise ParseException("Expected %s, got %r" % (what, token.text),
                                 token.line, token.column)
        return token

    def class_ref(self):
        token = self.word("<site>.<class>")
        try:
            ref = ClassRef.parse(token.text)
            sb_helpers.assert_valid_site(ref.site)
            sb_helpers.assert_valid_name(ref.name, "class name")
        except (ParseException, InvalidSchemaException) as e:
            raise ParseException(str(e), token.line, token.column)
        return ref

    def assertions(self):
        result = []
        while self.peek() is not None:
            result.append(self.assertion())
        return result

    def assertion(self):
        token = self.word("a relationship")
        try:
            relation = RelationKind(token.text.lower())
        except ValueError:
            raise ParseException(
                "Unknown relationship %r, expected one of: %s" %
                (token.text, ", ".join(r.value for r in RelationKind)),
                token.line, token.column)
        left = self.class_ref()
        symbol = self.next()
        if symbol.text not in ('~', '<', '>'):
            raise ParseException("Expected ~, < or >, got %r" % symbol.text,
                                 symbol.line, symbol.column)
        contained = None
        if relation == RelationKind.CONTAINMENT:
            contained = RIGHT if symbol.text == '>' else LEFT
        elif symbol.text != '~':
            raise ParseException(
                "Only containment assertions take a direction",
                symbol.line, symbol.column)
        right = self.class_ref()
        items = []
        following = self.peek()
        if following is not None and following.text == '{':
            self.next('{')
            while self.peek() is not None and self.peek().text != '}':
                items.append(self.correspondence(left, right))
                if self.peek() is not None and self.peek().text == ';':
                    self.next(';')
                elif self.peek() is not None and self.peek().text != '}':
                    bad = self.peek()
                    raise ParseException("Expected ';' or '}', got %r" %
                                         bad.text, bad.line, bad.column)
            self.next('}')
        if relation == RelationKind.HOMONYMY and items:
            raise ParseException(
                "Homonymy assertions cannot carry attribute"
                " correspondences", token.line, token.column)
        try:
            return CorrespondenceAssertion(relation, left, right, items,
                                           contained)
        except InconsistentAssertionException as e:
            raise ParseException(str(e), token.line, token.column)

    def side(self, class_ref):
        token = self.word("an attribute")
        following = self.peek()
        if following is not None and following.text == '(':
            self.next('(')
            attribute = self.word("an attribute")
            self.next(')')
            conversion = self.catalog.get(token.text)
            name = attribute.text
        else:
            conversion = None
            name = token.text
        if not sb_helpers.is_valid_name(name):
            raise ParseException("Invalid attribute name %r" % name,
                                 token.line, token.column)
        return Member(AttributeRef(class_ref.site, class_ref.name, name),
                      conversion)

    def correspondence(self, left, right):
        first = self.peek()
        is_key = False
        if first.kind == 'word' and first.text == 'key':
            self.next()
            is_key = True
        left_member = self.side(left)
        equiv = self.next()
        if equiv.kind != 'equiv':
            raise ParseException("Expected ≡ or ==, got %r" % equiv.text,
                                 equiv.line, equiv.column)
        right_member = self.side(right)
        global_name = left_member.ref.attribute
        following = self.peek()
        if following is not None and following.text == 'as':
            self.next('as')
            global_name = self.word("a global attribute name").text
            if not sb_helpers.is_valid_name(global_name):
                raise ParseException("Invalid global name %r" % global_name,
                                     following.line, following.column)
        return AttributeCorrespondence(global_name,
                                       [left_member, right_member], is_key)


def parse_assertions(text, lookup=None, catalog=None):
    """
    Parse an assertion document::

        function inr_to_usd(integer:INR) -> real:USD = x * 0.012
        equivalence S1.employee ~ S2.employee {
            key empno ≡ number;
            salary ≡ inr_to_usd(salary);
        }
        containment S1.PGStudents < S2.Students
        homonymy A.bank ~ B.bank

    Function declarations take one line and are added to ``catalog``. When
    ``lookup`` is given every assertion is validated against it.

    :rtype: ``list`` of :class:`CorrespondenceAssertion`

    :raises ParseException: on a syntax error, with line and column.
    """
    catalog = catalog if catalog is not None else ConversionCatalog()
    body = []
    for number, raw in enumerate((text or "").splitlines(), start=1):
        stripped = raw.strip()
        if stripped.startswith('function ') or stripped == 'function':
            match = _FUNCTION.match(stripped)
            if not match:
                raise ParseException(
                    "Expected function <name>(<type>) -> <type> = <expr>",
                    number, 1)
            try:
                fn = ConversionFunction(
                    match.group('name'),
                    SemanticType.parse(match.group('input')),
                    SemanticType.parse(match.group('output')),
                    match.group('expr'))
            except (InvalidSchemaException, ParseException) as e:
                raise ParseException(str(e), number)
            if fn.name in BUILTIN_FUNCTIONS:
                raise ParseException(
                    "Cannot redefine built-in function %s" % fn.name, number)
            try:
                catalog.define(fn)
            except ParseException as e:
                raise ParseException(str(e), number)
            body.append("")
        else:
            body.append(raw)
    tokens = _tokenize("\n".join(body))
    assertions = _Parser(tokens, catalog).assertions()
    if lookup is not None:
        for assertion in assertions:
            validate_assertion(assertion, lookup)
    log.debug("Parsed %d assertions", len(assertions))
    return assertions


def pretty_print(assertions, catalog=None):
    """
    Render assertions as an assertion document. Conversion functions used
    by the assertions, and any declared in ``catalog``, are declared first.
    """
    functions = {}
    for fn in (catalog.declared() if catalog is not None else []):
        functions[fn.name] = fn
    for assertion in assertions:
        for corr in assertion.correspondences:
            for member in corr.members:
                fn = member.conversion
                if fn is not None and not fn.is_builtin:
                    functions[fn.name] = fn
    lines = [functions[name].declaration() for name in sorted(functions)]
    for assertion in assertions:
        symbol = _DIRECTION_SYMBOL.get(assertion.contained, '~')
        header = "%s %s %s %s" % (assertion.relation.value, assertion.left,
                                  symbol, assertion.right)
        if not assertion.correspondences:
            lines.append(header)
            continue
        lines.append(header + " {")
        for corr in assertion.correspondences:
            left = corr.member_for(assertion.left)
            right = corr.member_for(assertion.right)
            line = "    %s%s ≡ %s" % ("key " if corr.is_key else "",
                                      left.spec(), right.spec())
            if corr.global_name != left.ref.attribute:
                line += " as %s" % corr.global_name
            lines.append(line + ";")
        lines.append("}")
    return "\n".join(lines) + ("\n" if lines else "")
