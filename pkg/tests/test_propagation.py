import os
import unittest

from schemabridge.base import helpers as sb_helpers
from schemabridge.base.propagation import ChangeLogEntry
from schemabridge.base.propagation import HighWaterMarks
from schemabridge.base.propagation import Mailbox
from schemabridge.base.propagation import SchemaChange
from schemabridge.base.state import StateStore
from schemabridge.interfaces import ChangeKind
from schemabridge.interfaces.exceptions import GapBufferedException
from schemabridge.interfaces.exceptions import InvalidChangeException
from schemabridge.interfaces.exceptions import \
    InvalidatedVirtualClassException
from schemabridge.interfaces.exceptions import ParseException
from schemabridge.interfaces.exceptions import SchemaBridgeBaseException
from schemabridge.interfaces.exceptions import StaleEntryException
from schemabridge.mediator import SchemaMediator

from .helpers import StateDirTestBase
from .helpers import build_evolving_federation
from .helpers import load_example


def change(line):
    return SchemaChange.parse(line)


ADD_FAX = "kind=AddAttribute class=employees attr=fax type=text?"
ADD_EMAIL = "kind=AddAttribute class=employees attr=email type=text?"
PHONE_TO_MOBILE = "kind=RenameAttribute class=employees attr=phone new=mobile"


class ChangeFormatTestCase(unittest.TestCase):

    _multiprocess_can_split_ = True

    def test_change_vocabulary(self):
        parsed = change("kind=ChangeAttributeType class=c attr=a type=real?")
        self.assertEqual(parsed.kind, ChangeKind.CHANGE_ATTRIBUTE_TYPE)
        self.assertTrue(parsed.nullable)
        self.assertEqual(str(parsed.type), 'real')
        added = change("kind=AddClass class=c attrs=k:integer,v:date? key=k")
        self.assertEqual([a.name for a in added.attributes], ['k', 'v'])
        self.assertEqual(added.key, ('k',))

    def test_malformed_changes(self):
        for line in ("kind=Explode class=c",
                     "class=c attr=a",
                     "kind=AddAttribute class=c",
                     "kind=DropClass class=c attr=a",
                     "kind=RenameClass class=c new=9c",
                     "kind=DropClass class=c colour=red"):
            with self.assertRaises(InvalidChangeException):
                change(line)

    def test_log_line_flags_and_wire_form(self):
        entry = ChangeLogEntry.parse(
            'SiteB', "seq=3 kind=DropAttribute class=employees"
            " attr=employeecode flags=key_dropped")
        self.assertEqual(entry.seq, 3)
        self.assertEqual(entry.flags, ['key_dropped'])
        self.assertEqual(entry.to_wire(),
                         "site=SiteB seq=3 kind=DropAttribute"
                         " class=employees attr=employeecode"
                         " flags=key_dropped")
        self.assertEqual(ChangeLogEntry.from_wire(entry.to_wire()), entry)
        with self.assertRaises(ParseException):
            ChangeLogEntry.parse('SiteB', "kind=DropClass class=c")
        with self.assertRaises(ParseException):
            ChangeLogEntry.from_wire("seq=1 kind=DropClass class=c")


class RelayTestCase(unittest.TestCase):

    _multiprocess_can_split_ = True

    def setUp(self):
        self.mediator = load_example('employees')
        self.site = self.mediator.adapter('SiteB')
        self.propagation = self.mediator.propagation

    def registry_attributes(self):
        return self.mediator.registry.get('SiteB').get(
            'employees').attribute_names

    def test_relay_waits_for_the_link(self):
        self.site.set_connectivity(False)
        self.site.apply_local_change(change(ADD_FAX))
        report = self.propagation.relay('SiteB')
        self.assertFalse(report.link_up)
        self.assertEqual(report.delivered, 0)
        self.assertNotIn('fax', self.registry_attributes())

        self.site.set_connectivity(True)
        report = self.propagation.relay('SiteB')
        self.assertEqual(report.delivered, 1)
        self.assertEqual(report.affected_virtual_classes,
                         [('employees', 'valid')])
        self.assertIn('fax', self.registry_attributes())
        self.assertIn('fax',
                      self.mediator.integration.get('employees')
                      .attribute_names)
        self.assertEqual(self.propagation.high_water_marks.get('SiteB'), 1)
        self.assertTrue(self.site.outbound_log[0].applied)

    def test_lost_acknowledgements_cause_skipped_duplicates(self):
        self.propagation.mailbox = Mailbox(lose_acks=True)
        self.site.apply_local_change(change(ADD_FAX))
        self.assertEqual(self.propagation.relay('SiteB').delivered, 1)
        self.assertFalse(self.site.outbound_log[0].applied)
        report = self.propagation.relay('SiteB')
        self.assertEqual((report.delivered, report.skipped_duplicates),
                         (0, 1))

        self.propagation.mailbox = Mailbox()
        self.assertEqual(self.propagation.relay('SiteB').skipped_duplicates,
                         1)
        self.assertTrue(self.site.outbound_log[0].applied)
        report = self.propagation.relay('SiteB')
        self.assertEqual((report.delivered, report.skipped_duplicates),
                         (0, 0))
        self.assertEqual(self.registry_attributes().count('fax'), 1)

    def test_reordered_batch_is_applied_in_sequence(self):
        self.propagation.mailbox = Mailbox(reorder=True, seed=7)
        for line in (ADD_FAX, ADD_EMAIL, PHONE_TO_MOBILE):
            self.site.apply_local_change(change(line))
        report = self.propagation.relay('SiteB')
        self.assertEqual(report.delivered, 3)
        self.assertEqual(self.propagation.high_water_marks.get('SiteB'), 3)
        self.assertEqual(self.registry_attributes(),
                         ['employeecode', 'name', 'country', 'age',
                          'mobile', 'fax', 'email'])
        self.assertTrue(self.propagation.convergence_check().equal)

    def test_mediator_apply_buffers_gaps_and_skips_stale_entries(self):
        first = ChangeLogEntry('SiteB', 1, change(ADD_FAX))
        second = ChangeLogEntry('SiteB', 2, change(PHONE_TO_MOBILE))
        with self.assertRaises(GapBufferedException) as cm:
            self.propagation.mediator_apply(second)
        self.assertEqual(cm.exception.expected, 1)
        self.assertNotIn('mobile', self.registry_attributes())
        affected = self.propagation.mediator_apply(first)
        self.assertEqual(affected, [('employees', 'valid')])
        self.assertEqual(self.propagation.high_water_marks.get('SiteB'), 2)
        self.assertIn('mobile',
                      self.mediator.integration.get('employees')
                      .attribute_names)
        with self.assertRaises(StaleEntryException):
            self.propagation.mediator_apply(first)

    def test_refused_entry_is_reported(self):
        unknown = ChangeLogEntry('SiteB', 1, change(
            "kind=DropClass class=contractors"))
        self.propagation.mailbox.post('SiteB', unknown.to_wire())
        report = self.propagation.relay('SiteB')
        self.assertEqual((report.delivered, report.skipped_duplicates),
                         (0, 0))
        (seq, reason), = report.rejected
        self.assertEqual(seq, 1)
        self.assertIn('contractors', reason)
        self.assertEqual(self.propagation.rejected_entries,
                         [('SiteB', 1, reason)])
        self.assertIn('rejected=1', repr(report))
        self.assertEqual(self.propagation.high_water_marks.get('SiteB'), 1)
        self.assertTrue(self.propagation.convergence_check().equal)

    def test_attribute_rename_follows_into_assertions(self):
        self.site.apply_local_change(change(
            "kind=RenameAttribute class=employees attr=employeecode"
            " new=code"))
        self.propagation.relay('SiteB')
        self.assertIn("key employeecode ≡ code;",
                      self.mediator.correspondence.export())
        vc = self.mediator.integration.get('employees')
        self.assertTrue(vc.is_valid)
        self.assertEqual(vc.key, 'employeecode')
        result = self.mediator.query.execute(
            "select employeecode from employees where employeecode > 4")
        self.assertEqual(result.canonical_rows(), [['5'], ['6']])

    def test_class_rename_invalidates_the_union(self):
        self.site.apply_local_change(change(
            "kind=RenameClass class=employees new=workers"))
        report = self.propagation.relay('SiteB')
        (name, status), = report.affected_virtual_classes
        self.assertEqual(name, 'employees')
        self.assertTrue(status.startswith(
            'invalidated(inconsistent assertion'))
        with self.assertRaises(InvalidatedVirtualClassException):
            self.mediator.query.execute("select * from employees")

    def test_dropped_key_leaves_an_unkeyed_union(self):
        self.site.apply_local_change(change(
            "kind=DropAttribute class=employees attr=employeecode"))
        self.propagation.relay('SiteB')
        vc = self.mediator.integration.get('employees')
        self.assertTrue(vc.is_valid)
        self.assertIsNone(vc.key)
        result = self.mediator.query.execute("select name from employees")
        self.assertEqual(len(result), 6)

    def test_convergence_check_reports_pending_changes(self):
        self.assertTrue(self.propagation.convergence_check().equal)
        self.site.apply_local_change(change(ADD_FAX))
        report = self.propagation.convergence_check()
        self.assertFalse(report.equal)
        self.assertTrue(any('fax' in line for line in report.diff
                            if line.startswith('+')))
        self.mediator.propagation.relay_all()
        self.assertTrue(self.propagation.convergence_check())


class HighWaterMarksTestCase(StateDirTestBase):

    def test_marks_are_persisted(self):
        path = os.path.join(self.state_dir, 'applied.hwm')
        marks = HighWaterMarks(path)
        marks.set('SiteB', 2)
        marks.set('SiteA', 1)
        with open(path) as f:
            self.assertEqual(f.read(),
                             "site=SiteA applied=1\nsite=SiteB applied=2\n")
        reloaded = HighWaterMarks(path)
        self.assertEqual(reloaded.get('SiteB'), 2)
        self.assertEqual(reloaded.get('SiteC'), 0)
        reloaded.set('SiteA', 5, save=False)
        self.assertEqual(HighWaterMarks(path).items(),
                         [('SiteA', 1), ('SiteB', 2)])
        reloaded.save()
        self.assertEqual(HighWaterMarks(path).get('SiteA'), 5)

    def test_corrupt_marks_are_reported(self):
        path = os.path.join(self.state_dir, 'applied.hwm')
        with open(path, 'w') as f:
            f.write("site=SiteA applied=many\n")
        with self.assertRaises(ParseException):
            HighWaterMarks(path)


class MediatorRestartTestCase(StateDirTestBase):

    def config(self):
        return {'state_dir': self.state_dir, 'query_workers': 1}

    def test_restart_restores_state_and_applies_nothing_twice(self):
        adapters = {}
        first = SchemaMediator(self.config())
        build_evolving_federation(first, adapters)
        adapters['SiteA'].apply_local_change(change(
            "kind=RenameAttribute class=persons attr=city new=town"))
        adapters['SiteA'].apply_local_change(change(
            "kind=AddAttribute class=employees attr=fax type=text?"))
        first.propagation.relay('SiteA')
        adapters['SiteC'].apply_local_change(change(
            "kind=DropAttribute class=employees attr=age"))

        second = SchemaMediator(self.config(), adapters=adapters)
        self.assertEqual(second.export(), first.export())
        self.assertEqual(second.propagation.high_water_marks.get('SiteA'), 2)
        self.assertEqual(second.correspondence.export(),
                         first.correspondence.export())
        self.assertEqual(second.propagation.relay('SiteA').delivered, 0)
        self.assertEqual(second.propagation.relay('SiteC').delivered, 1)
        self.assertTrue(second.propagation.convergence_check().equal)
        self.assertTrue(os.path.exists(os.path.join(
            self.state_dir, 'mediator', 'registry', 'SiteA.schema')))


class FailingStateStore(StateStore):

    def save(self, mediator):
        raise OSError("disk full")


class UnflushedMarks(HighWaterMarks):

    def save(self):
        raise OSError("disk full")


class InterruptedSaveTestCase(StateDirTestBase):
    """
    A relay whose state save fails part way is completed by the next relay
    of a restarted mediator, without applying any change twice.
    """

    def config(self):
        return {'state_dir': self.state_dir, 'query_workers': 1}

    def federation(self):
        mediator = load_example('employees', SchemaMediator(self.config()))
        adapters = dict((site, mediator.adapter(site))
                        for site in mediator.registry.sites)
        adapters['SiteB'].apply_local_change(change(PHONE_TO_MOBILE))
        return mediator, adapters

    def attributes(self, mediator):
        return mediator.registry.get('SiteB').get('employees').attribute_names

    def relay_failing(self, mediator):
        with self.assertRaises(SchemaBridgeBaseException) as cm:
            mediator.propagation.relay('SiteB')
        self.assertIsInstance(cm.exception.__cause__, OSError)

    def test_failed_save_reapplies_the_entry_after_restart(self):
        first, adapters = self.federation()
        first._store = FailingStateStore(self.state_dir)
        self.relay_failing(first)
        self.assertFalse(adapters['SiteB'].outbound_log[0].applied)

        second = SchemaMediator(self.config(), adapters=adapters)
        self.assertEqual(second.propagation.high_water_marks.get('SiteB'), 0)
        self.assertIn('phone', self.attributes(second))
        report = second.propagation.relay('SiteB')
        self.assertEqual((report.delivered, report.skipped_duplicates),
                         (1, 0))
        self.assertIn('mobile', self.attributes(second))
        self.assertNotIn('phone', self.attributes(second))
        self.assertTrue(adapters['SiteB'].outbound_log[0].applied)
        self.assertTrue(second.propagation.convergence_check().equal)

    def test_marks_behind_the_registry_copy_are_corrected(self):
        first, adapters = self.federation()
        first.propagation.high_water_marks = UnflushedMarks(
            first.store.hwm_path)
        self.relay_failing(first)
        self.assertIn("site=SiteB applied=0",
                      sb_helpers.read_text(first.store.hwm_path))

        second = SchemaMediator(self.config(), adapters=adapters)
        self.assertEqual(second.propagation.high_water_marks.get('SiteB'), 1)
        self.assertIn("site=SiteB applied=1",
                      sb_helpers.read_text(second.store.hwm_path))
        self.assertEqual(self.attributes(second).count('mobile'), 1)
        report = second.propagation.relay('SiteB')
        self.assertEqual((report.delivered, report.skipped_duplicates),
                         (0, 1))
        self.assertTrue(adapters['SiteB'].outbound_log[0].applied)
        self.assertEqual(second.correspondence.export(),
                         first.correspondence.export())
        self.assertTrue(second.propagation.convergence_check().equal)


if __name__ == '__main__':
    unittest.main()
