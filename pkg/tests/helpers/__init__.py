import datetime
import functools
import io
import operator
import os
import random
import shutil
import sys
import tempfile
import unittest
from collections import OrderedDict

from schemabridge.adapters.memory import MemorySourceAdapter
from schemabridge.base import BaseMediator
from schemabridge.base.query import QueryResult
from schemabridge.base.query import coerce_literal
from schemabridge.base.schema import coerce_value
from schemabridge.interfaces import OperatorKind
from schemabridge.interfaces.model import MERGING_OPERATORS


def skipIfPython(op, major, minor):
    """
    A decorator for skipping tests if the python
    version doesn't match
    """
    def stringToOperator(op):
        op_map = {
            "=": operator.eq,
            "==": operator.eq,
            "<": operator.lt,
            "<=": operator.le,
            ">": operator.gt,
            ">=": operator.ge,
        }
        return op_map.get(op)

    def wrap(func):
        """
        The actual wrapper
        """
        @functools.wraps(func)
        def wrapper(self, *args, **kwargs):
            op_func = stringToOperator(op)
            if op_func(sys.version_info, (major, minor)):
                self.skipTest(
                    "Skipping test because python version {0} is {1} expected"
                    " version {2}".format(sys.version_info[:2],
                                          op, (major, minor)))
            func(self, *args, **kwargs)
        return wrapper
    return wrap


def get_test_fixtures_folder():
    return os.path.join(os.path.dirname(__file__), '../fixtures/')


def fixture_path(*parts):
    return os.path.join(get_test_fixtures_folder(), *parts)


def read_fixture(*parts):
    with io.open(fixture_path(*parts), encoding='utf-8') as f:
        return f.read()


def fixture_adapter(example, site, pivot=None):
    """A memory site loaded from ``fixtures/<example>/<site>.*``."""
    return MemorySourceAdapter.from_text(
        site, read_fixture(example, site + '.schema'),
        read_fixture(example, site + '.data'), pivot)


def load_example(example, mediator=None, sites=('SiteA', 'SiteB')):
    """
    Register the sites of a fixture example, load its assertions and define
    its global schema.
    """
    mediator = mediator or BaseMediator({'query_workers': 1})
    for site in sites:
        mediator.registry.register_schema(site,
                                          fixture_adapter(example, site))
    mediator.correspondence.add(read_fixture(example, 'assertions.txt'))
    mediator.integration.integrate(read_fixture(example, 'global.txt'))
    return mediator


class MediatorTestBase(unittest.TestCase):
    """A fresh in-memory mediator per test."""

    mediator_config = {'query_workers': 1}

    def setUp(self):
        self.mediator = BaseMediator(dict(self.mediator_config))

    def register(self, site, schema_text, data_text=None):
        adapter = MemorySourceAdapter.from_text(site, schema_text, data_text)
        self.mediator.registry.register_schema(site, adapter)
        return adapter


class StateDirTestBase(unittest.TestCase):
    """Gives each test its own state directory."""

    def setUp(self):
        self.state_dir = tempfile.mkdtemp(prefix='sb-test-')

    def tearDown(self):
        shutil.rmtree(self.state_dir, ignore_errors=True)


EVOLVING_SITE_SCHEMA = """\
class employees
  employeecode:integer
  name:text
  country:text
  age:integer?
  key: employeecode
class persons
  pid:integer
  name:text
  city:text?
  key: pid
"""

EVOLVING_ASSERTIONS = """\
equivalence SiteA.employees ~ SiteB.employees {
    key employeecode == employeecode; name == name; country == country;
}
equivalence SiteB.employees ~ SiteC.employees {
    key employeecode == employeecode; name == name; country == country;
}
equivalence SiteA.employees ~ SiteC.employees {
    key employeecode == employeecode; name == name; country == country;
}
equivalence SiteA.persons ~ SiteB.persons {
    key pid == pid; name == name;
}
synonymy SiteC.persons ~ SiteC.employees {
    name == name;
}
"""

EVOLVING_GLOBAL = """\
union employees = SiteA.employees, SiteB.employees, SiteC.employees
specialize staff = SiteA.employees, SiteC.employees
generalize people = SiteA.persons, SiteB.persons
import cpersons = SiteC.persons
"""

EVOLVING_SITES = ('SiteA', 'SiteB', 'SiteC')


def build_evolving_federation(mediator, adapters=None):
    """
    Three sites with the same two classes, wired into a union, a
    specialization, a generalization and an import. ``adapters`` receives
    the created memory sites by id.
    """
    for index, site in enumerate(EVOLVING_SITES):
        adapter = MemorySourceAdapter.from_text(
            site, EVOLVING_SITE_SCHEMA,
            "[employees]\nemployeecode=%d name=n%d country=NY age=30\n"
            % (index + 1, index + 1))
        if adapters is not None:
            adapters[site] = adapter
        mediator.registry.register_schema(site, adapter)
    mediator.correspondence.add(EVOLVING_ASSERTIONS)
    mediator.integration.integrate(EVOLVING_GLOBAL)
    return mediator


# Global attributes a random federation draws from, with the local names
# sites may use for them.
RANDOM_ATTRIBUTES = OrderedDict([
    ('name', ('name', 'fullname')),
    ('age', ('age', 'years')),
    ('score', ('score', 'points')),
    ('joined', ('joined', 'since')),
    ('city', ('city', 'town')),
])
RANDOM_KEY_NAMES = ('id', 'pid', 'code')
RANDOM_WORDS = ('john', 'peter', 'albert', 'habib', 'mohan', 'mary', 'NY',
                'IN')
RANDOM_FUNCTIONS = "function cents(integer) -> real = x / 100\n"


class RandomSite(object):
    """The shape of one site of a random federation."""

    def __init__(self, site, class_name, key_name):
        self.site = site
        self.class_name = class_name
        self.key_name = key_name
        # global name -> (local name, type spec, conversion, date format)
        self.columns = OrderedDict()

    def member(self, global_name):
        local, _, conversion, _ = self.columns[global_name]
        return "%s(%s)" % (conversion, local) if conversion else local


class RandomFederation(object):
    """
    A seeded random federation of 2 to 4 sites, each holding one class of
    up to ``max_objects`` objects, related pairwise by equivalence or
    synonymy assertions, and one virtual class ``vc`` over them.
    """

    def __init__(self, rng, max_sites=4, max_objects=50):
        self.rng = rng
        count = rng.randint(2, max_sites)
        self.operator = rng.choice([OperatorKind.UNION,
                                    OperatorKind.GENERALIZE,
                                    OperatorKind.SPECIALIZE,
                                    OperatorKind.IMPORT])
        self.keyed = (self.operator == OperatorKind.SPECIALIZE or
                      rng.random() < 0.6)
        same_name = rng.random() < 0.5
        self.sites = []
        for index in range(count):
            site = RandomSite(
                "S%d" % (index + 1),
                'people' if same_name else 'people%d' % (index + 1),
                rng.choice(RANDOM_KEY_NAMES))
            for global_name, local_names in RANDOM_ATTRIBUTES.items():
                if global_name != 'name' and rng.random() < 0.4:
                    continue
                site.columns[global_name] = self._column(global_name,
                                                         local_names)
            self.sites.append(site)
        self.objects = dict((s.site, self._objects(s, max_objects))
                            for s in self.sites)

    def _column(self, global_name, local_names):
        local = self.rng.choice(local_names)
        nullable = self.rng.random() < 0.5
        conversion = None
        date_format = None
        if global_name == 'age':
            type_spec = 'integer'
        elif global_name == 'score':
            type_spec = self.rng.choice(['real', 'integer', 'cents'])
            if type_spec == 'cents':
                type_spec, conversion = 'integer', 'cents'
        elif global_name == 'joined':
            type_spec = 'date'
            date_format = self.rng.choice(['%Y-%m-%d', '%d/%m/%Y'])
        else:
            type_spec = 'text'
            if self.rng.random() < 0.1:
                conversion = 'upper'
        return (local, type_spec + ('?' if nullable else ''), conversion,
                date_format)

    def _value(self, global_name, column):
        local, type_spec, conversion, date_format = column
        if type_spec.endswith('?') and self.rng.random() < 0.2:
            return 'NULL'
        if global_name == 'age':
            return str(self.rng.randint(18, 70))
        if global_name == 'score':
            if type_spec.startswith('real'):
                return str(round(self.rng.uniform(0, 10), 2))
            if conversion == 'cents':
                return str(self.rng.randint(0, 1000))
            return str(self.rng.randint(0, 10))
        if global_name == 'joined':
            day = datetime.date(self.rng.randint(1990, 2020),
                                self.rng.randint(1, 12),
                                self.rng.randint(1, 28))
            return day.strftime(date_format)
        return self.rng.choice(RANDOM_WORDS)

    def _objects(self, site, max_objects):
        ids = self.rng.sample(range(1, 2 * max_objects),
                              self.rng.randint(0, max_objects))
        rows = []
        for ident in ids:
            pairs = ["%s=%d" % (site.key_name, ident)]
            for global_name, column in site.columns.items():
                pairs.append("%s=%s" % (column[0],
                                        self._value(global_name, column)))
            rows.append(" ".join(pairs))
        return rows

    def schema_text(self, site):
        lines = ["class %s" % site.class_name,
                 "  %s:integer" % site.key_name]
        for local, type_spec, _, _ in site.columns.values():
            lines.append("  %s:%s" % (local, type_spec))
        lines.append("  key: %s" % site.key_name)
        return "\n".join(lines) + "\n"

    def data_text(self, site):
        return "[%s]\n%s" % (site.class_name,
                             "".join(r + "\n"
                                     for r in self.objects[site.site]))

    def assertion_text(self):
        lines = [RANDOM_FUNCTIONS]
        relation = ('equivalence' if self.sites[0].class_name ==
                    self.sites[-1].class_name else 'synonymy')
        for index, left in enumerate(self.sites):
            for right in self.sites[index + 1:]:
                items = ["%s%s == %s as id" % ("key " if self.keyed else "",
                                               left.key_name,
                                               right.key_name)]
                for global_name in left.columns:
                    if global_name in right.columns:
                        items.append("%s == %s as %s" % (
                            left.member(global_name),
                            right.member(global_name), global_name))
                lines.append("%s %s.%s ~ %s.%s { %s; }" % (
                    relation, left.site, left.class_name, right.site,
                    right.class_name, "; ".join(items)))
        return "\n".join(lines) + "\n"

    def definition_text(self):
        refs = ["%s.%s" % (s.site, s.class_name) for s in self.sites]
        if self.operator == OperatorKind.IMPORT:
            refs = refs[:1]
        return "%s vc = %s\n" % (self.operator.value, ", ".join(refs))

    def install(self, mediator):
        """Register the sites and define ``vc`` on ``mediator``."""
        for site in self.sites:
            mediator.registry.register_schema(
                site.site, MemorySourceAdapter.from_text(
                    site.site, self.schema_text(site), self.data_text(site)))
        mediator.correspondence.add(self.assertion_text())
        mediator.integration.integrate(self.definition_text())
        return mediator


COMPARATORS = ('=', '!=', '<', '<=', '>', '>=')


def random_query(rng, vc):
    """A random ``select ... from vc where ...`` over the attributes of vc."""
    names = vc.attribute_names
    projection = []
    if rng.random() < 0.6:
        projection = rng.sample(names, rng.randint(1, len(names)))
    conjuncts = []
    for _ in range(rng.randint(0, 2)):
        attr = vc.attribute(rng.choice(names))
        base = attr.type.base.value
        if base == 'integer':
            literal = str(rng.randint(0, 70))
        elif base == 'real':
            literal = str(round(rng.uniform(0, 10), 1))
        elif base == 'date':
            literal = "'%d-%02d-01'" % (rng.randint(1990, 2020),
                                        rng.randint(1, 12))
        else:
            literal = "'%s'" % rng.choice(RANDOM_WORDS)
        conjuncts.append("%s %s %s" % (attr.name, rng.choice(COMPARATORS),
                                       literal))
    text = "select %s from %s" % (", ".join(projection) or "*", vc.name)
    if conjuncts:
        text += " where " + " and ".join(conjuncts)
    return text


def centralized_answer(mediator, query):
    """
    Answer a parsed global query by materialising every constituent extent
    at one place, merging and filtering there. Shares no code with the
    decomposition and composition under test.
    """
    vc = mediator.integration.get(query.virtual_class)
    per_constituent = []
    for ref in vc.constituents:
        adapter = mediator.adapter(ref.site)
        objects = []
        for obj in adapter.extent(vc.local_class_name(ref)):
            values = {}
            for attr in vc.attributes:
                rule = vc.mapping[attr.name].get(ref)
                if rule is not None:
                    values[attr.name] = coerce_value(
                        rule.convert(obj.get(rule.local_name)),
                        rule.converted_type, attr.type)
            objects.append(values)
        per_constituent.append(objects)

    if vc.key is not None and vc.operator in MERGING_OPERATORS:
        merged = OrderedDict()
        present = []
        for objects in per_constituent:
            present.append(set(o[vc.key] for o in objects))
            for obj in objects:
                target = merged.setdefault(obj[vc.key], {})
                for name, value in obj.items():
                    if target.get(name) is None:
                        target[name] = value
        if vc.operator == OperatorKind.SPECIALIZE:
            common = set.intersection(*present)
            merged = OrderedDict((k, v) for k, v in merged.items()
                                 if k in common)
        objects = list(merged.values())
    else:
        objects = [o for objects in per_constituent for o in objects]

    ops = {'=': operator.eq, '!=': operator.ne, '<': operator.lt,
           '<=': operator.le, '>': operator.gt, '>=': operator.ge}

    def qualifies(obj):
        for comparison in query.predicate:
            attr = vc.attribute(comparison.attribute)
            value = obj.get(attr.name)
            literal = coerce_literal(comparison.value, attr.type)
            if value is None or not ops[comparison.comparator.value](
                    value, literal):
                return False
        return True

    header = [vc.attribute(n).name for n in query.projection] or \
        vc.attribute_names
    rows = [tuple(o.get(n) for n in header) for o in objects
            if qualifies(o)]
    return QueryResult(header, rows)


def random_federations(seed, count, **kwargs):
    """``count`` seeded federations, each installed on a fresh mediator."""
    rng = random.Random(seed)
    for _ in range(count):
        federation = RandomFederation(rng, **kwargs)
        mediator = federation.install(BaseMediator({'query_workers': 1}))
        yield rng, federation, mediator
