import os
import unittest

from schemabridge.base import BaseMediator
from schemabridge.base import helpers as sb_helpers
from schemabridge.base import mediator as sb_mediator
from schemabridge.base.schema import parse_schema
from schemabridge.interfaces.exceptions import InvalidSchemaException

from .helpers import StateDirTestBase


class BaseHelpersTestCase(unittest.TestCase):

    _multiprocess_can_split_ = True

    def test_cleanup_action_body_has_no_exception(self):
        invoke_order = [""]

        def cleanup_func():
            invoke_order[0] += "cleanup"

        with sb_helpers.cleanup_action(lambda: cleanup_func()):
            invoke_order[0] += "body_"
        self.assertEqual(invoke_order[0], "body_cleanup")

    def test_cleanup_action_body_has_exception(self):
        invoke_order = [""]

        def cleanup_func():
            invoke_order[0] += "cleanup"

        class CustomException(Exception):
            pass

        with self.assertRaises(CustomException):
            with sb_helpers.cleanup_action(lambda: cleanup_func()):
                invoke_order[0] += "body_"
                raise CustomException()
        self.assertEqual(invoke_order[0], "body_cleanup")

    def test_cleanup_action_cleanup_has_exception(self):
        invoke_order = [""]

        def cleanup_func():
            invoke_order[0] += "cleanup"
            raise Exception("test")

        with sb_helpers.cleanup_action(lambda: cleanup_func()):
            invoke_order[0] += "body_"
        self.assertEqual(invoke_order[0], "body_cleanup")

    def test_cleanup_action_body_and_cleanup_has_exception(self):
        invoke_order = [""]

        def cleanup_func():
            invoke_order[0] += "cleanup"
            raise Exception("test")

        class CustomException(Exception):
            pass

        with self.assertRaises(CustomException):
            with sb_helpers.cleanup_action(lambda: cleanup_func()):
                invoke_order[0] += "body_"
                raise CustomException()
        self.assertEqual(invoke_order[0], "body_cleanup")

    def test_names_compare_ignoring_case(self):
        self.assertTrue(sb_helpers.names_equal('EmployeeCode',
                                               'employeecode'))
        self.assertFalse(sb_helpers.names_equal('name', 'names'))
        schema = parse_schema("class Employees\n  id:integer\n"
                              "class persons\n  id:integer\n", 'SiteA')
        self.assertIs(sb_helpers.find_named(schema.classes, 'EMPLOYEES'),
                      schema.classes[0])
        self.assertIsNone(sb_helpers.find_named(schema.classes, 'staff'))
        self.assertEqual([c.name for c in schema.find('emp*')],
                         ['Employees'])
        self.assertEqual(len(schema.find()), 2)

    def test_name_validation(self):
        for name in ('employees', '_tmp', 'DOB', 'name_S2'):
            sb_helpers.assert_valid_name(name)
        for name in ('', '9lives', 'first name', 'a-b', None):
            with self.assertRaises(InvalidSchemaException):
                sb_helpers.assert_valid_name(name)
        sb_helpers.assert_valid_site('site-b.eu')
        with self.assertRaises(InvalidSchemaException):
            sb_helpers.assert_valid_site('site b')

    def test_content_lines_skip_comments_and_blanks(self):
        text = "# header\n\nregister SiteA a b\n   \n  relay --all  \n"
        self.assertEqual(list(sb_helpers.content_lines(text)),
                         [(3, "register SiteA a b"), (5, "relay --all")])
        self.assertEqual(list(sb_helpers.content_lines(None)), [])


class FileHelpersTestCase(StateDirTestBase):

    def test_atomic_write_replaces_content(self):
        path = os.path.join(self.state_dir, 'nested', 'applied.hwm')
        sb_helpers.atomic_write(path, "site=SiteA applied=1\n")
        sb_helpers.atomic_write(path, "site=SiteA applied=2\n")
        self.assertEqual(sb_helpers.read_text(path),
                         "site=SiteA applied=2\n")
        self.assertEqual(os.listdir(os.path.dirname(path)), ['applied.hwm'])

    def test_append_line_and_missing_files(self):
        path = os.path.join(self.state_dir, 'outbound.log')
        self.assertEqual(sb_helpers.read_text(path, default=""), "")
        sb_helpers.append_line(path, "seq=1 kind=DropClass class=c\n")
        sb_helpers.append_line(path, "seq=2 kind=DropClass class=d")
        self.assertEqual(sb_helpers.read_text(path),
                         "seq=1 kind=DropClass class=c\n"
                         "seq=2 kind=DropClass class=d\n")


class MediatorConfigurationTestCase(StateDirTestBase):

    def use_config_file(self, text):
        path = os.path.join(self.state_dir, 'schemabridge.ini')
        sb_helpers.atomic_write(path, text)
        saved = list(sb_mediator.SchemaBridgeConfigLocations)
        sb_mediator.SchemaBridgeConfigLocations[:] = [path]

        def restore():
            sb_mediator.SchemaBridgeConfigLocations[:] = saved
        self.addCleanup(restore)

    def test_dict_values_win_over_the_config_file(self):
        self.use_config_file("[mediator]\n"
                             "query_workers = 2\n"
                             "enable_pushdown = no\n"
                             "allow_partial_results = yes\n")
        config = BaseMediator({'query_workers': 3}).config
        self.assertEqual(config.query_workers, 3)
        self.assertFalse(config.enable_pushdown)
        self.assertTrue(config.allow_partial_results)
        self.assertEqual(config.two_digit_year_pivot, 50)

    def test_missing_section_leaves_the_defaults(self):
        self.use_config_file("[unrelated]\nquery_workers = 9\n")
        config = BaseMediator().config
        self.assertEqual(config.query_workers, 4)
        self.assertTrue(config.enable_pushdown)
