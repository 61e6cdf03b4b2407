import collections
import itertools
import random
import unittest

from hypothesis import given
from hypothesis import settings
from hypothesis import strategies as st

from schemabridge.base import BaseMediator
from schemabridge.base.correspondence import parse_assertions
from schemabridge.base.correspondence import schema_lookup
from schemabridge.base.integration import build_virtual_class
from schemabridge.base.query import GlobalQuery
from schemabridge.base.schema import ClassRef
from schemabridge.base.schema import parse_schema
from schemabridge.interfaces import OperatorKind
from schemabridge.interfaces.exceptions import HomonymyForbiddenException
from schemabridge.interfaces.model import MERGING_OPERATORS

from .helpers import RandomFederation
from .helpers import centralized_answer
from .helpers import random_federations
from .helpers import random_query


ATTRIBUTE_POOL = ['a%d' % i for i in range(15)]

attribute_sets = st.lists(
    st.sets(st.sampled_from(ATTRIBUTE_POOL), max_size=12),
    min_size=2, max_size=5)

class_names = st.from_regex(r'\Ac[a-z0-9_]{0,8}\Z')


def equivalent_federation(sets):
    """
    One ``things`` class per site, keyed on ``k``, with the given attributes
    and an equivalence between every pair of sites asserting every shared
    attribute.
    """
    schemas = {}
    sites = ['S%d' % (i + 1) for i in range(len(sets))]
    for site, names in zip(sites, sets):
        lines = ["class things", "  k:integer"]
        lines.extend("  %s:integer" % n for n in sorted(names))
        lines.append("  key: k")
        schemas[site] = parse_schema("\n".join(lines) + "\n", site)
    text = []
    for (i, left), (j, right) in itertools.combinations(
            list(enumerate(sites)), 2):
        shared = sorted(sets[i] & sets[j])
        body = "".join("    %s == %s;\n" % (n, n) for n in shared)
        text.append("equivalence %s.things ~ %s.things {\n"
                    "    key k == k;\n%s}\n" % (left, right, body))
    lookup = schema_lookup(schemas)
    assertions = parse_assertions("".join(text), lookup)
    refs = [ClassRef(site, 'things') for site in sites]
    return refs, lookup, assertions


def expected_attributes(operator, sets):
    if operator == OperatorKind.GENERALIZE:
        return set.intersection(*[set(s) for s in sets]) | {'k'}
    return set.union(*[set(s) for s in sets]) | {'k'}


class AttributeFormulaTestCase(unittest.TestCase):

    @settings(max_examples=1000, deadline=None)
    @given(attribute_sets)
    def test_derived_attributes_follow_the_set_formula(self, sets):
        refs, lookup, assertions = equivalent_federation(sets)
        for operator in MERGING_OPERATORS:
            vc = build_virtual_class('vc', operator, refs, lookup,
                                     assertions)
            self.assertEqual(set(vc.attribute_names),
                             expected_attributes(operator, sets))
            self.assertEqual(vc.key, 'k')

    @settings(max_examples=200, deadline=None)
    @given(attribute_sets, st.randoms(use_true_random=False))
    def test_constituent_order_does_not_matter(self, sets, rng):
        refs, lookup, assertions = equivalent_federation(sets)
        shuffled = list(refs)
        rng.shuffle(shuffled)
        for operator in (OperatorKind.UNION, OperatorKind.GENERALIZE):
            ordered = build_virtual_class('vc', operator, refs, lookup,
                                          assertions)
            permuted = build_virtual_class('vc', operator, shuffled, lookup,
                                           assertions)
            self.assertEqual(set(ordered.attribute_names),
                             set(permuted.attribute_names))


class HomonymyRefusalTestCase(unittest.TestCase):

    @settings(max_examples=200, deadline=None)
    @given(class_names, st.sets(st.sampled_from(ATTRIBUTE_POOL), max_size=4))
    def test_merging_operators_refuse_homonyms(self, name, extra):
        schemas = {}
        for site in ('SiteA', 'SiteB'):
            lines = ["class %s" % name, "  k:integer"]
            lines.extend("  %s:text" % n for n in sorted(extra))
            schemas[site] = parse_schema("\n".join(lines) + "\n", site)
        lookup = schema_lookup(schemas)
        assertions = parse_assertions(
            "homonymy SiteA.%s ~ SiteB.%s\n" % (name, name), lookup)
        refs = [ClassRef('SiteA', name), ClassRef('SiteB', name)]
        for operator in MERGING_OPERATORS:
            with self.assertRaises(HomonymyForbiddenException):
                build_virtual_class('vc', operator, refs, lookup, assertions)


def rows(result):
    return collections.Counter(tuple(row) for row in result.rows)


class CentralizedOracleTestCase(unittest.TestCase):

    def test_execute_matches_the_centralized_answer(self):
        checked = 0
        for rng, federation, mediator in random_federations(20241, 200):
            vc = mediator.integration.get('vc')
            for _ in range(10):
                text = random_query(rng, vc)
                result = mediator.query.execute(text)
                expected = centralized_answer(mediator,
                                              GlobalQuery.parse(text))
                self.assertEqual(result.header, expected.header, text)
                self.assertEqual(rows(result), rows(expected), text)
                checked += 1
        self.assertEqual(checked, 2000)

    def test_pushdown_does_not_change_answers(self):
        rng = random.Random(777)
        for _ in range(200):
            federation = RandomFederation(rng)
            pushed = federation.install(BaseMediator({'query_workers': 1}))
            local = federation.install(BaseMediator(
                {'query_workers': 1, 'enable_pushdown': False}))
            vc = pushed.integration.get('vc')
            for _ in range(10):
                text = random_query(rng, vc)
                self.assertEqual(rows(pushed.query.execute(text)),
                                 rows(local.query.execute(text)), text)


if __name__ == '__main__':
    unittest.main()
