import unittest

from schemabridge.base.correspondence import parse_assertions
from schemabridge.base.correspondence import schema_lookup
from schemabridge.base.integration import build_virtual_class
from schemabridge.base.integration import format_definitions
from schemabridge.base.integration import parse_definitions
from schemabridge.base.integration import revalidate
from schemabridge.base.schema import ClassRef
from schemabridge.base.schema import INTEGER
from schemabridge.base.schema import TEXT
from schemabridge.base.schema import parse_schema
from schemabridge.interfaces import OperatorKind
from schemabridge.interfaces import VirtualClassStatus
from schemabridge.interfaces.exceptions import ArityException
from schemabridge.interfaces.exceptions import DuplicateVirtualClassException
from schemabridge.interfaces.exceptions import HomonymyForbiddenException
from schemabridge.interfaces.exceptions import MissingAssertionException
from schemabridge.interfaces.exceptions import MissingKeyLinkException
from schemabridge.interfaces.exceptions import ParseException
from schemabridge.interfaces.exceptions import UnknownClassException
from schemabridge.interfaces.exceptions import UnknownVirtualClassException

from .helpers import MediatorTestBase


SITE_A = """\
class employees
  code:integer
  name:text
  age:integer?
  key: code
class bank
  bid:integer
  city:text
  key: bid
class rooms
  rid:integer
  key: rid
"""

SITE_B = """\
class employees
  code:integer
  name:text
  phone:text?
  key: code
class bank
  bid:integer
  city:text
  key: bid
class staff
  sid:integer
  name:text
  key: sid
"""

SITE_C = """\
class employees
  code:integer
  name:text
  key: code
"""

ASSERTIONS = """\
equivalence SiteA.employees ~ SiteB.employees {
    key code == code;
    name == name;
}
equivalence SiteA.employees ~ SiteC.employees { key code == code }
homonymy SiteA.bank ~ SiteB.bank
synonymy SiteA.employees ~ SiteB.staff { name == name }
synonymy SiteA.rooms ~ SiteB.staff
"""

A_EMP = ClassRef('SiteA', 'employees')
B_EMP = ClassRef('SiteB', 'employees')
C_EMP = ClassRef('SiteC', 'employees')
B_STAFF = ClassRef('SiteB', 'staff')


def schemas(**replaced):
    texts = {'SiteA': SITE_A, 'SiteB': SITE_B, 'SiteC': SITE_C}
    texts.update(replaced)
    return dict((site, parse_schema(text, site))
                for site, text in texts.items())


class OperatorTestCase(unittest.TestCase):

    _multiprocess_can_split_ = True

    def setUp(self):
        self.lookup = schema_lookup(schemas())
        self.assertions = parse_assertions(ASSERTIONS, self.lookup)

    def build(self, operator, *constituents):
        return build_virtual_class('vc', operator, list(constituents),
                                   self.lookup, self.assertions)

    def test_union_unites_attributes(self):
        vc = self.build(OperatorKind.UNION, A_EMP, B_EMP)
        self.assertEqual(vc.attribute_names, ['code', 'name', 'age', 'phone'])
        self.assertEqual(vc.key, 'code')
        self.assertEqual(vc.attribute('AGE').type, INTEGER)
        self.assertEqual(vc.rule('phone', B_EMP).attribute, 'phone')
        self.assertIsNone(vc.rule('phone', A_EMP))
        self.assertEqual(len(vc.assertions), 1)

    def test_generalize_intersects_attributes(self):
        vc = self.build(OperatorKind.GENERALIZE, A_EMP, B_EMP)
        self.assertEqual(vc.attribute_names, ['code', 'name'])
        self.assertEqual(vc.key, 'code')

    def test_specialize_needs_key_link(self):
        vc = self.build(OperatorKind.SPECIALIZE, A_EMP, B_EMP)
        self.assertEqual(vc.attribute_names, ['code', 'name', 'age', 'phone'])
        self.assertEqual(vc.key, 'code')
        with self.assertRaises(MissingKeyLinkException):
            self.build(OperatorKind.SPECIALIZE, A_EMP, B_STAFF)

    def test_union_without_key_link_is_unkeyed(self):
        vc = self.build(OperatorKind.UNION, A_EMP, B_STAFF)
        self.assertEqual(vc.attribute_names, ['code', 'name', 'age', 'sid'])
        self.assertIsNone(vc.key)

    def test_import_is_identity(self):
        vc = self.build(OperatorKind.IMPORT, B_STAFF)
        self.assertEqual(vc.attribute_names, ['sid', 'name'])
        self.assertEqual(vc.key, 'sid')
        self.assertEqual(vc.attribute('name').type, TEXT)

    def test_homonymous_classes_are_never_merged(self):
        for operator in (OperatorKind.UNION, OperatorKind.GENERALIZE,
                         OperatorKind.SPECIALIZE):
            with self.assertRaises(HomonymyForbiddenException):
                self.build(operator, ClassRef('SiteA', 'bank'),
                           ClassRef('SiteB', 'bank'))

    def test_unrelated_classes_need_an_assertion(self):
        with self.assertRaises(MissingAssertionException):
            self.build(OperatorKind.UNION, ClassRef('SiteA', 'bank'),
                       B_STAFF)
        with self.assertRaises(MissingAssertionException):
            self.build(OperatorKind.UNION, A_EMP, B_EMP, B_STAFF, C_EMP)

    def test_arity(self):
        with self.assertRaises(ArityException):
            self.build(OperatorKind.UNION, A_EMP)
        with self.assertRaises(ArityException):
            self.build(OperatorKind.IMPORT, A_EMP, B_EMP)
        with self.assertRaises(ArityException):
            self.build(OperatorKind.UNION, A_EMP, ClassRef('SiteA',
                                                           'EMPLOYEES'))

    def test_unknown_constituent(self):
        with self.assertRaises(UnknownClassException):
            self.build(OperatorKind.UNION, A_EMP, ClassRef('SiteB', 'clerks'))

    def test_unmatched_names_are_suffixed(self):
        vc = self.build(OperatorKind.UNION, A_EMP, C_EMP)
        self.assertEqual(vc.attribute_names,
                         ['code', 'name', 'age', 'name_SiteC'])
        self.assertEqual(vc.rule('name_SiteC', C_EMP).attribute, 'name')
        self.assertEqual(len(vc.warnings), 1)

    def test_generalize_with_empty_intersection_warns(self):
        vc = self.build(OperatorKind.GENERALIZE,
                        ClassRef('SiteA', 'rooms'), B_STAFF)
        self.assertTrue(vc.is_valid)
        self.assertEqual(vc.attributes, [])
        self.assertIn('empty attribute intersection', vc.warnings[0])


class RevalidationTestCase(unittest.TestCase):

    _multiprocess_can_split_ = True

    def setUp(self):
        self.assertions = parse_assertions(ASSERTIONS,
                                           schema_lookup(schemas()))
        self.vc = build_virtual_class(
            'professor', OperatorKind.SPECIALIZE, [A_EMP, B_EMP],
            schema_lookup(schemas()), self.assertions)

    def test_missing_constituent_invalidates(self):
        lookup = schema_lookup(schemas(SiteB=SITE_B.replace(
            'class employees', 'class clerks')))
        revalidate(self.vc, lookup, self.assertions)
        self.assertEqual(self.vc.status, VirtualClassStatus.INVALIDATED)
        self.assertTrue(self.vc.reason.startswith('missing constituent'))
        self.assertEqual(self.vc.attributes, [])
        self.assertIsNone(self.vc.key)
        self.assertTrue(self.vc.status_text.startswith(
            'invalidated(missing constituent'))

    def test_dropped_key_member_breaks_the_key_link(self):
        lookup = schema_lookup(schemas(SiteB=SITE_B.replace(
            '  code:integer\n  name:text\n  phone',
            '  badge:integer\n  name:text\n  phone').replace(
            'key: code', 'key: badge')))
        revalidate(self.vc, lookup, self.assertions)
        self.assertFalse(self.vc.is_valid)
        self.assertTrue(self.vc.reason.startswith('key_link broken'))

    def test_recovers_once_preconditions_hold(self):
        broken = schema_lookup(schemas(SiteB=SITE_B.replace(
            'class employees', 'class clerks')))
        revalidate(self.vc, broken, self.assertions)
        revalidate(self.vc, schema_lookup(schemas()), self.assertions)
        self.assertTrue(self.vc.is_valid)
        self.assertIsNone(self.vc.reason)
        self.assertEqual(self.vc.key, 'code')
        self.assertEqual(self.vc.attribute_names,
                         ['code', 'name', 'age', 'phone'])


class DefinitionDocumentTestCase(unittest.TestCase):

    _multiprocess_can_split_ = True

    def test_parse_and_format(self):
        text = ("# the global schema\n"
                "union employees = SiteA.employees, SiteB.employees\n"
                "\n"
                "IMPORT ug = SiteA.UGStudents\n")
        definitions = parse_definitions(text)
        self.assertEqual([(d.operator, d.name) for d in definitions],
                         [(OperatorKind.UNION, 'employees'),
                          (OperatorKind.IMPORT, 'ug')])
        self.assertEqual(definitions[0].constituents, [A_EMP, B_EMP])
        self.assertEqual(format_definitions(definitions),
                         "union employees = SiteA.employees,"
                         " SiteB.employees\nimport ug = SiteA.UGStudents\n")

    def test_errors_carry_the_line(self):
        for text in ("union employees = SiteA.employees\nmerge x = A.b",
                     "\nunion employees",
                     "\nunion 9lives = SiteA.employees, SiteB.employees",
                     "\nunion x = SiteA.employees,"):
            with self.assertRaises(ParseException) as cm:
                parse_definitions(text)
            self.assertEqual(cm.exception.line, 2, text)


class IntegrationServiceTestCase(MediatorTestBase):

    _multiprocess_can_split_ = True

    def setUp(self):
        super(IntegrationServiceTestCase, self).setUp()
        for site, text in (('SiteA', SITE_A), ('SiteB', SITE_B),
                           ('SiteC', SITE_C)):
            self.register(site, text)
        self.mediator.correspondence.add(ASSERTIONS)
        self.integration = self.mediator.integration

    def test_integrate_document(self):
        defined = self.integration.integrate(
            "union employees = SiteA.employees, SiteB.employees\n"
            "import staff = SiteB.staff\n")
        self.assertEqual([vc.name for vc in defined], ['employees', 'staff'])
        self.assertEqual([vc.name for vc in self.integration.list()],
                         ['employees', 'staff'])
        self.integration.remove('STAFF')
        with self.assertRaises(UnknownVirtualClassException):
            self.integration.get('staff')

    def test_duplicate_names_are_refused(self):
        self.integration.union('employees', [A_EMP, B_EMP])
        with self.assertRaises(DuplicateVirtualClassException):
            self.integration.generalize('Employees', [A_EMP, B_EMP])

    def test_failed_definition_is_not_stored(self):
        with self.assertRaises(HomonymyForbiddenException):
            self.integration.union('banks', [ClassRef('SiteA', 'bank'),
                                             ClassRef('SiteB', 'bank')])
        self.assertEqual(self.integration.list(), [])

    def test_get_returns_a_copy(self):
        self.integration.union('employees', [A_EMP, B_EMP])
        copy = self.integration.get('employees')
        copy.attributes.pop()
        self.assertEqual(len(self.integration.get('employees').attributes),
                         4)

    def test_attribute_rename_rewrites_assertions(self):
        self.integration.union('employees', [A_EMP, B_EMP])
        self.mediator.registry.rename_attribute('SiteB', 'employees',
                                                'code', 'ecode')
        vc = self.integration.get('employees')
        self.assertTrue(vc.is_valid)
        self.assertEqual(vc.key, 'code')
        self.assertEqual(vc.rule('code', B_EMP).attribute, 'ecode')
        self.assertIn("key code ≡ ecode;",
                      self.mediator.correspondence.export())
        self.assertEqual(
            self.mediator.registry.get('SiteB').get('employees').key,
            ('ecode',))

    def test_class_rename_invalidates_then_recovers(self):
        self.integration.union('employees', [A_EMP, B_EMP])
        registry = self.mediator.registry
        registry.rename_class('SiteB', 'employees', 'workers')
        vc = self.integration.get('employees')
        self.assertEqual(vc.constituents,
                         [A_EMP, ClassRef('SiteB', 'workers')])
        self.assertEqual(vc.status, VirtualClassStatus.INVALIDATED)
        self.assertTrue(vc.reason.startswith('inconsistent assertion'))
        registry.rename_class('SiteB', 'workers', 'employees')
        self.assertTrue(self.integration.get('employees').is_valid)

    def test_export(self):
        self.integration.union('employees', [A_EMP, B_EMP])
        self.integration.import_class('staff', B_STAFF)
        self.assertEqual(self.integration.export(), (
            "virtual class employees\n"
            "  operator: union\n"
            "  constituents: SiteA.employees, SiteB.employees\n"
            "  status: valid\n"
            "  key: code\n"
            "  attribute code: integer <- SiteA.employees.code,"
            " SiteB.employees.code\n"
            "  attribute name: text <- SiteA.employees.name,"
            " SiteB.employees.name\n"
            "  attribute age: integer <- SiteA.employees.age\n"
            "  attribute phone: text <- SiteB.employees.phone\n"
            "\n"
            "virtual class staff\n"
            "  operator: import\n"
            "  constituents: SiteB.staff\n"
            "  status: valid\n"
            "  key: sid\n"
            "  attribute sid: integer <- SiteB.staff.sid\n"
            "  attribute name: text <- SiteB.staff.name\n"))


if __name__ == '__main__':
    unittest.main()
