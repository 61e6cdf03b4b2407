"""
Query engine: parses global queries, decomposes them into per-constituent
subqueries in local terms, pushes predicates down where that is sound, and
composes the sub-results according to the virtual class's extent semantics.
"""
import logging
import re
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor

from ..interfaces.exceptions import InvalidQueryException
from ..interfaces.exceptions import InvalidatedVirtualClassException
from ..interfaces.exceptions import ParseException
from ..interfaces.exceptions import PartialResultException
from ..interfaces.exceptions import SiteOfflineException
from ..interfaces.exceptions import TypeMismatchException
from ..interfaces.exceptions import UnknownAttributeException
from ..interfaces.model import BaseType
from ..interfaces.model import Comparator
from ..interfaces.model import MERGING_OPERATORS
from ..interfaces.model import OperatorKind
from . import helpers as sb_helpers
from .adapter import Comparison
from .adapter import SubQuery
from .adapter import evaluate_predicate
from .schema import DEFAULT_YEAR_PIVOT
from .schema import coerce_value
from .schema import parse_value
from .schema import render_value

log = logging.getLogger(__name__)

NULL_TSV = "\\N"

# Relative slack added to bounds pushed through a non-identity conversion.
BOUND_TOLERANCE = 1e-9

_QUERY = re.compile(
    r"^\s*select\s+(?P<projection>.+?)\s+from\s+(?P<vc>[A-Za-z_][A-Za-z0-9_]*)"
    r"(?:\s+where\s+(?P<where>.+?))?\s*;?\s*$",
    re.IGNORECASE | re.DOTALL)

_CONJUNCT = re.compile(
    r"""^\s*(?P<attr>[A-Za-z_][A-Za-z0-9_]*)\s*
        (?P<op>!=|<>|<=|>=|=|<|>)\s*
        (?P<literal>'(?:[^'\\]|\\.)*'|"(?:[^"\\]|\\.)*"|\S+)\s*$""",
    re.VERBOSE)

# Quoted literals, whitespace runs and bare words of a where clause.
_TOKEN = re.compile(r"""'(?:[^'\\]|\\.)*'|"(?:[^"\\]|\\.)*"|\s+|[^\s'"]+|.""",
                    re.DOTALL)


def split_conjuncts(text):
    """
    Split a where clause on its ``and`` keywords, leaving quoted literals
    whole.

    :rtype: ``list``
    :return: ``(offset, conjunct text)`` pairs.
    """
    tokens = [(m.start(), m.group()) for m in _TOKEN.finditer(text)]
    parts = []
    start = 0
    for i, (_, token) in enumerate(tokens):
        if (token.lower() == 'and' and 0 < i < len(tokens) - 1 and
                tokens[i - 1][1].isspace() and tokens[i + 1][1].isspace()):
            parts.append((start, text[start:tokens[i - 1][0]]))
            start = tokens[i + 1][0] + len(tokens[i + 1][1])
    parts.append((start, text[start:]))
    return parts


class Literal(object):
    """A query literal as written; quoted literals are always text."""

    def __init__(self, text, quoted=False):
        self.text = text
        self.quoted = quoted

    def __eq__(self, other):
        return (isinstance(other, Literal) and self.text == other.text and
                self.quoted == other.quoted)

    def __ne__(self, other):
        return not self.__eq__(other)

    __hash__ = None

    def __repr__(self):
        return repr(self.text) if self.quoted else self.text


class GlobalQuery(object):
    """
    A projection and selection against one virtual class. An empty
    projection selects every attribute.
    """

    def __init__(self, virtual_class, projection=None, predicate=None):
        self.virtual_class = virtual_class
        self.projection = list(projection or [])
        self.predicate = list(predicate or [])

    @classmethod
    def parse(cls, text):
        """
        Parse ``select <a, b | *> from <vc> [where <a> <op> <lit> [and ...]]``.

        :raises ParseException: on a syntax error.
        """
        match = _QUERY.match(text)
        if not match:
            raise ParseException(
                "Expected: select <attributes|*> from <virtual class>"
                " [where <condition> [and ...]]", 1, 1)
        projection_text = match.group('projection').strip()
        projection = []
        if projection_text != '*':
            for name in projection_text.split(','):
                name = name.strip()
                if not sb_helpers.is_valid_name(name):
                    raise ParseException("Invalid attribute %r" % name, 1,
                                         match.start('projection') + 1)
                projection.append(name)
        predicate = []
        if match.group('where'):
            where = match.group('where')
            for offset, part in split_conjuncts(where):
                conjunct = _CONJUNCT.match(part)
                if not conjunct:
                    raise ParseException(
                        "Expected <attribute> <op> <literal>, got %r" %
                        part.strip(), 1, match.start('where') + offset + 1)
                op = conjunct.group('op')
                literal = conjunct.group('literal')
                if literal[0] in "'\"":
                    value = Literal(re.sub(r'\\(.)', r'\1', literal[1:-1]),
                                    True)
                else:
                    value = Literal(literal)
                predicate.append(Comparison(
                    conjunct.group('attr'),
                    Comparator('!=' if op == '<>' else op), value))
        return cls(match.group('vc'), projection, predicate)

    def __repr__(self):
        where = ""
        if self.predicate:
            where = " where " + " and ".join(
                "%s %s %r" % (c.attribute, c.comparator.value, c.value)
                for c in self.predicate)
        return "<SB-GlobalQuery: select %s from %s%s>" % (
            ", ".join(self.projection) or "*", self.virtual_class, where)


def coerce_literal(value, semantic_type, pivot=DEFAULT_YEAR_PIVOT):
    """
    Coerce a literal to a global attribute type.

    :raises InvalidQueryException: if the literal has no value in the type.
    """
    if isinstance(value, Literal):
        if semantic_type.base == BaseType.TEXT:
            return value.text
        try:
            return parse_value(value.text, semantic_type, pivot)[0]
        except ParseException as e:
            raise InvalidQueryException(
                "Literal %r does not fit %s: %s" % (value.text,
                                                    semantic_type, e))
    try:
        if semantic_type.base == BaseType.TEXT:
            return render_value(value)
        if semantic_type.base == BaseType.REAL and isinstance(value, int):
            return float(value)
        return value
    except (TypeError, ValueError) as e:
        raise InvalidQueryException(str(e))


class ConstituentPlan(object):
    """
    The subquery sent for one constituent and how its columns map back to
    global attributes. ``exact`` holds the conjuncts the site evaluates with
    the same outcome the mediator would.
    """

    def __init__(self, class_ref, subquery, columns):
        self.class_ref = class_ref
        self.subquery = subquery
        self.columns = columns
        self.exact = []

    @property
    def site(self):
        return self.class_ref.site

    def __repr__(self):
        return "<SB-ConstituentPlan: %s %r>" % (self.class_ref,
                                                self.subquery)


class QueryPlan(object):
    """
    A decomposed query: one plan per constituent, in constituent order, and
    the predicate re-checked at the mediator.
    """

    def __init__(self, query, vc, header, needed, predicate, keyed):
        self.query = query
        self.vc = vc
        self.header = header
        self.needed = needed
        self.predicate = predicate
        self.keyed = keyed
        self.constituents = OrderedDict()

    @property
    def subqueries(self):
        return OrderedDict((ref, plan.subquery)
                           for ref, plan in self.constituents.items())

    @property
    def residual(self):
        """
        Conjuncts evaluated at the mediator: every conjunct that is not
        evaluated exactly by all constituents.
        """
        return [c for c in self.predicate
                if not all(c in p.exact for p in self.constituents.values())]


def _pushable_comparison(comparison, rule, global_type):
    """
    The local comparison to push for a conjunct over one mapping rule, and
    whether it is exact. Returns ``(None, False)`` when nothing can be
    pushed.
    """
    source = rule.source_type
    converted = rule.converted_type
    if converted.base != global_type.base and not (
            converted.base == BaseType.INTEGER and
            global_type.base == BaseType.REAL):
        return None, False
    conversion = rule.conversion
    literal = comparison.value
    if conversion is None or conversion.exact:
        if source.base != global_type.base and not (
                source.base == BaseType.INTEGER and
                global_type.base == BaseType.REAL):
            return None, False
        return Comparison(rule.local_name, comparison.comparator,
                          literal), True
    if not conversion.invertible or comparison.comparator in (
            Comparator.EQ, Comparator.NE):
        return None, False
    if not source.is_numeric or not converted.is_numeric:
        return None, False
    tolerance = BOUND_TOLERANCE * max(1.0, abs(literal))
    if converted.base == BaseType.INTEGER:
        tolerance += 0.5
    if comparison.comparator in (Comparator.GT, Comparator.GE):
        bound, comparator = literal - tolerance, Comparator.GE
    else:
        bound, comparator = literal + tolerance, Comparator.LE
    local_bound = conversion.inverse(bound)
    if not conversion.increasing:
        comparator = comparator.flipped
    return Comparison(rule.local_name, comparator, local_bound), False


def decompose(query, vc, enable_pushdown=True, pivot=DEFAULT_YEAR_PIVOT):
    """
    Split a global query into one subquery per constituent.

    Each subquery projects the local image of the requested attributes,
    the predicate attributes and, when objects are merged by key, the key.
    Conjuncts are pushed to a constituent only where the site's answer
    cannot lose qualifying objects: under key merging only conjuncts on the
    key are pushed, and conjuncts through a non-identity conversion are
    pushed as relaxed bounds that the mediator checks again.

    :rtype: :class:`QueryPlan`

    :raises InvalidatedVirtualClassException: if ``vc`` is invalidated.
    :raises UnknownAttributeException: for a name not in ``vc``.
    :raises InvalidQueryException: for a literal that does not coerce.
    """
    if not vc.is_valid:
        raise InvalidatedVirtualClassException(
            "Virtual class %s is invalidated: %s" % (vc.name, vc.reason))

    def resolve(name):
        attr = vc.attribute(name)
        if attr is None:
            raise UnknownAttributeException(
                "Virtual class %s has no attribute %s" % (vc.name, name))
        return attr

    header = [resolve(n).name for n in query.projection] or \
        vc.attribute_names
    predicate = []
    for comparison in query.predicate:
        attr = resolve(comparison.attribute)
        predicate.append(Comparison(
            attr.name, comparison.comparator,
            coerce_literal(comparison.value, attr.type, pivot)))
    keyed = vc.key is not None and vc.operator in MERGING_OPERATORS
    needed = list(header)
    for name in [c.attribute for c in predicate] + (
            [vc.key] if keyed else []):
        if name not in needed:
            needed.append(name)

    plan = QueryPlan(query, vc, header, needed, predicate, keyed)
    for ref in vc.constituents:
        columns = []
        projection = []
        for name in needed:
            rule = vc.mapping.get(name, {}).get(ref)
            if rule is not None:
                columns.append((name, rule))
                projection.append(rule.local_name)
        pushed = []
        exact = []
        if enable_pushdown:
            for comparison in predicate:
                if keyed and comparison.attribute != vc.key:
                    continue
                rule = vc.mapping.get(comparison.attribute, {}).get(ref)
                if rule is None:
                    continue
                local, is_exact = _pushable_comparison(
                    comparison, rule, vc.attribute(comparison.attribute).type)
                if local is None:
                    continue
                pushed.append(local)
                if is_exact:
                    exact.append(comparison)
        subquery = SubQuery(vc.local_class_name(ref), projection, pushed)
        constituent = ConstituentPlan(ref, subquery, columns)
        constituent.exact = exact
        plan.constituents[ref] = constituent
    log.debug("Decomposed %r into %s", query,
              ", ".join(repr(p) for p in plan.constituents.values()))
    return plan


class QueryResult(object):
    """
    Rows of a global query over a header of global attribute names. ``None``
    is null. ``date_formats`` maps an attribute to the format its dates are
    displayed in.
    """

    def __init__(self, header, rows, warnings=None, types=None,
                 date_formats=None, answered=None, missing=None):
        self.header = list(header)
        self.rows = [tuple(r) for r in rows]
        self.warnings = list(warnings or [])
        self.types = list(types or [])
        self.date_formats = dict(date_formats or {})
        self.answered = list(answered or [])
        self.missing = list(missing or [])

    def __len__(self):
        return len(self.rows)

    def column(self, name):
        index = [sb_helpers.name_key(h) for h in self.header].index(
            sb_helpers.name_key(name))
        return [row[index] for row in self.rows]

    def as_dicts(self):
        return [dict(zip(self.header, row)) for row in self.rows]

    def render_row(self, row):
        return [render_value(value, self.date_formats.get(name))
                for name, value in zip(self.header, row)]

    def rendered_rows(self):
        return [self.render_row(row) for row in self.rows]

    def canonical_rows(self):
        """Rendered rows sorted with nulls first, for order-free checks."""
        return sorted(self.rendered_rows(),
                      key=lambda r: [(v is not None, _sort_key(v))
                                     for v in r])

    def to_table(self):
        """An aligned text table; nulls are blank."""
        rendered = [[v if v is not None else "" for v in row]
                    for row in self.canonical_rows()]
        widths = [len(h) for h in self.header]
        for row in rendered:
            widths = [max(w, len(v)) for w, v in zip(widths, row)]
        lines = ["  ".join(h.ljust(w) for h, w in zip(self.header, widths)),
                 "  ".join("-" * w for w in widths)]
        for row in rendered:
            lines.append("  ".join(v.ljust(w) for v, w in zip(row, widths)))
        lines = [line.rstrip() for line in lines]
        lines.append("(%d row%s)" % (len(self.rows),
                                     "" if len(self.rows) == 1 else "s"))
        return "\n".join(lines) + "\n"

    def to_tsv(self):
        """Tab separated values with a header row and ``\\N`` for null."""
        def escape(value):
            if value is None:
                return NULL_TSV
            return (value.replace("\\", "\\\\").replace("\t", "\\t")
                    .replace("\n", "\\n"))
        lines = ["\t".join(self.header)]
        for row in self.canonical_rows():
            lines.append("\t".join(escape(v) for v in row))
        return "\n".join(lines) + "\n"

    def __repr__(self):
        return "<SB-QueryResult: %s (%d rows)>" % (", ".join(self.header),
                                                   len(self.rows))


def _sort_key(value):
    if value is None:
        return (0, 0, "")
    try:
        return (1, float(value), value)
    except ValueError:
        return (2, 0, value)


def _to_global(plan, constituent, result):
    """Convert a sub-result into global attribute dicts."""
    positions = {}
    for index, name in enumerate(result.header):
        positions[sb_helpers.name_key(name)] = index
    objects = []
    for row in result.rows:
        obj = {}
        for name, rule in constituent.columns:
            local = row[positions[sb_helpers.name_key(rule.local_name)]]
            target = plan.vc.attribute(name).type
            try:
                obj[name] = coerce_value(rule.convert(local),
                                         rule.converted_type, target)
            except TypeMismatchException as e:
                raise InvalidQueryException(str(e))
        objects.append(obj)
    return objects


def _merge(target, fragment, attributes, key_value, warnings, vc):
    log.trace("Merging a fragment of %s %s=%s", vc.name, vc.key,
              render_value(key_value))
    for name in attributes:
        value = fragment.get(name)
        current = target.get(name)
        if current is None:
            target[name] = value
        elif value is not None and value != current:
            message = ("Value conflict in %s for %s=%s on %s: kept %s,"
                       " ignored %s" % (vc.name, vc.key,
                                        render_value(key_value), name,
                                        render_value(current),
                                        render_value(value)))
            log.warning(message)
            warnings.append(message)


def compose(sub_results, plan, allow_partial=True):
    """
    Compose sub-results into the answer of a decomposed query.

    Under key merging (union or generalization with a key) fragments of one
    object are outer-merged by key, the earliest constituent winning value
    conflicts; a specialization keeps only keys present at every
    constituent. Without a key the sub-results are concatenated. The
    mediator-side predicate is applied after merging, the projection last.

    :type sub_results: ``dict``
    :param sub_results: Maps each constituent :class:`.ClassRef` to its
                        :class:`.SubResult`, or to ``None`` if the site did
                        not answer.

    :rtype: :class:`QueryResult`

    :raises PartialResultException: if a required constituent is missing.
    """
    vc = plan.vc
    warnings = list(vc.warnings)
    answered = [ref for ref in plan.constituents
                if sub_results.get(ref) is not None]
    missing = [ref for ref in plan.constituents
               if sub_results.get(ref) is None]
    if missing:
        sites = [str(r) for r in answered], [str(r) for r in missing]
        if (not answered or not allow_partial or
                vc.operator == OperatorKind.SPECIALIZE):
            raise PartialResultException(vc.name, *sites)
        message = ("Partial result for %s: no answer from %s" %
                   (vc.name, ", ".join(sites[1])))
        log.warning(message)
        warnings.append(message)

    per_constituent = [(ref, _to_global(plan, plan.constituents[ref],
                                        sub_results[ref]))
                       for ref in answered]
    if plan.keyed:
        merged = OrderedDict()
        present = []
        for ref, objects in per_constituent:
            keys = set()
            for obj in objects:
                key_value = obj.get(vc.key)
                keys.add(key_value)
                if key_value not in merged:
                    merged[key_value] = dict(obj)
                else:
                    _merge(merged[key_value], obj, plan.needed, key_value,
                           warnings, vc)
            present.append(keys)
        if vc.operator == OperatorKind.SPECIALIZE:
            common = set.intersection(*present) if present else set()
            objects = [obj for k, obj in merged.items() if k in common]
        else:
            objects = list(merged.values())
    else:
        objects = [obj for _, objs in per_constituent for obj in objs]

    residual = plan.residual
    rows = []
    for obj in objects:
        if evaluate_predicate(residual, obj.get):
            rows.append(tuple(obj.get(name) for name in plan.header))
    types = [vc.attribute(name).type for name in plan.header]
    return QueryResult(plan.header, rows, warnings, types,
                       answered=[str(r) for r in answered],
                       missing=[str(r) for r in missing])


class QueryEngine(object):
    """
    Runs decomposed queries against source adapters, fanning subqueries out
    over a thread pool of ``workers``.

    :type adapters: ``callable``
    :param adapters: Maps a site id to its :class:`.SourceAdapter`.
    """

    def __init__(self, adapters, workers=1, enable_pushdown=True,
                 allow_partial_results=True, pivot=DEFAULT_YEAR_PIVOT):
        self.adapters = adapters
        self.workers = max(1, int(workers))
        self.enable_pushdown = enable_pushdown
        self.allow_partial_results = allow_partial_results
        self.pivot = pivot

    def _run(self, constituent):
        adapter = self.adapters(constituent.site)
        try:
            return adapter.execute_subquery(constituent.subquery)
        except SiteOfflineException:
            log.info("Site %s is offline, %s not answered",
                     constituent.site, constituent.class_ref)
            return None

    def run_subqueries(self, plan):
        constituents = list(plan.constituents.values())
        if self.workers == 1 or len(constituents) < 2:
            results = [self._run(c) for c in constituents]
        else:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                results = list(pool.map(self._run, constituents))
        return OrderedDict((c.class_ref, r)
                           for c, r in zip(constituents, results))

    def display_formats(self, vc):
        formats = {}
        for attr in vc.attributes:
            if attr.type.base != BaseType.DATE:
                continue
            for ref in vc.constituents:
                rule = vc.mapping.get(attr.name, {}).get(ref)
                if rule is None or rule.conversion is not None:
                    continue
                fmt = self.adapters(ref.site).date_format(
                    vc.local_class_name(ref), rule.local_name)
                if fmt:
                    formats[attr.name] = fmt
                    break
        return formats

    def execute(self, query, vc):
        """
        Answer a global query over ``vc``: decompose, run the subqueries,
        compose.

        :rtype: :class:`QueryResult`
        """
        plan = decompose(query, vc, self.enable_pushdown, self.pivot)
        results = self.run_subqueries(plan)
        result = compose(results, plan, self.allow_partial_results)
        result.date_formats = self.display_formats(vc)
        log.info("Query %r returned %d rows", query, len(result))
        return result
