"""
Scenario replay: scripts of command lines, fault scripts merged into them
by step number, and seeded random schema evolution across the sites of a
federation.
"""
import io
import logging
import os
import shlex

from .base import helpers as sb_helpers
from .base.propagation import SchemaChange
from .base.propagation import parse_fields
from .base.schema import Attribute
from .base.schema import DATE
from .base.schema import INTEGER
from .base.schema import REAL
from .base.schema import TEXT
from .interfaces.exceptions import ParseException
from .interfaces.exceptions import SchemaBridgeBaseException
from .interfaces.model import ChangeKind

log = logging.getLogger(__name__)

FAULT_ACTIONS = ('online', 'offline', 'change')


class ScenarioStep(object):

    def __init__(self, argv, line_number=None):
        self.argv = list(argv)
        self.line_number = line_number

    @property
    def command(self):
        return self.argv[0] if self.argv else None

    def __eq__(self, other):
        return isinstance(other, ScenarioStep) and self.argv == other.argv

    def __ne__(self, other):
        return not self.__eq__(other)

    __hash__ = None

    def __repr__(self):
        return "<SB-ScenarioStep: %s>" % " ".join(self.argv)


class ScenarioScript(object):
    """
    An ordered list of command lines, one per step. File arguments are
    resolved relative to ``base_dir``::

        register SiteA siteA.schema siteA.data
        link SiteA down
        change SiteA kind=AddAttribute class=employees attr=fax type=text?
        random-changes 50 0.2
        relay --all
        check-convergence
    """

    def __init__(self, steps, base_dir=None):
        self.steps = list(steps)
        self.base_dir = base_dir

    @classmethod
    def parse(cls, text, base_dir=None):
        steps = []
        for number, line in sb_helpers.content_lines(text):
            try:
                steps.append(ScenarioStep(shlex.split(line), number))
            except ValueError as e:
                raise ParseException("Unreadable step: %s" % e, number)
        return cls(steps, base_dir)

    @classmethod
    def load(cls, path):
        with io.open(path, encoding='utf-8') as f:
            text = f.read()
        return cls.parse(text, os.path.dirname(os.path.abspath(path)))

    def resolve(self, path):
        if self.base_dir and not os.path.isabs(path):
            return os.path.join(self.base_dir, path)
        return path

    def merge_faults(self, faults):
        """
        A new script with each fault inserted before the step it names.
        Steps count from 1; faults past the end run after the last step.
        """
        by_step = {}
        for fault in faults:
            by_step.setdefault(fault.step, []).append(fault)
        steps = []
        for index, step in enumerate(self.steps, start=1):
            steps.extend(f.to_step() for f in by_step.pop(index, []))
            steps.append(step)
        for index in sorted(by_step):
            steps.extend(f.to_step() for f in by_step[index])
        return ScenarioScript(steps, self.base_dir)

    def __len__(self):
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)


class FaultEvent(object):
    """
    One line of a fault script: ``t=<step> site=<id> online``,
    ``t=<step> site=<id> offline`` or
    ``t=<step> site=<id> change kind=... class=...``.
    """

    def __init__(self, step, site, action, change=None):
        self.step = step
        self.site = site
        self.action = action
        self.change = change

    @classmethod
    def parse(cls, line, line_number=None):
        head = line.split(None, 3)
        if len(head) < 3:
            raise ParseException("Expected t=<step> site=<id> <action>",
                                 line_number)
        fields = dict(parse_fields(" ".join(head[:2]), line_number))
        try:
            step = int(fields['t'])
            site = fields['site']
        except (KeyError, ValueError):
            raise ParseException("Expected t=<step> site=<id> <action>",
                                 line_number)
        action = head[2]
        if action not in FAULT_ACTIONS:
            raise ParseException(
                "Unknown fault action %r, expected one of: %s" %
                (action, ", ".join(FAULT_ACTIONS)), line_number)
        change = None
        if action == 'change':
            if len(head) < 4:
                raise ParseException("change needs a change line",
                                     line_number)
            change = SchemaChange.parse(head[3])
        return cls(step, site, action, change)

    def to_step(self):
        if self.action == 'change':
            return ScenarioStep(['change', self.site] +
                                self.change.to_line().split())
        return ScenarioStep(['link', self.site,
                             'up' if self.action == 'online' else 'down'])

    def __repr__(self):
        return "<SB-FaultEvent: t=%d site=%s %s>" % (self.step, self.site,
                                                     self.action)


def parse_faults(text):
    """:rtype: ``list`` of :class:`FaultEvent`"""
    return [FaultEvent.parse(line, number)
            for number, line in sb_helpers.content_lines(text)]


CLASS_NAMES = ('employees', 'persons', 'teachers', 'students', 'staff',
               'courses', 'projects')
ATTRIBUTE_NAMES = ('id', 'name', 'country', 'age', 'phone', 'salary', 'dob',
                   'city', 'grade', 'fax')
RANDOM_TYPES = (INTEGER, REAL, TEXT, DATE)

_KIND_WEIGHTS = (
    (ChangeKind.ADD_ATTRIBUTE, 5),
    (ChangeKind.DROP_ATTRIBUTE, 3),
    (ChangeKind.RENAME_ATTRIBUTE, 4),
    (ChangeKind.CHANGE_ATTRIBUTE_TYPE, 4),
    (ChangeKind.RENAME_CLASS, 2),
    (ChangeKind.ADD_CLASS, 2),
    (ChangeKind.DROP_CLASS, 1),
)


class EvolutionReport(object):

    def __init__(self):
        self.applied = 0
        self.refused = 0
        self.relays = 0
        self.outages = 0

    def __repr__(self):
        return ("<SB-EvolutionReport: applied=%d refused=%d relays=%d"
                " outages=%d>" % (self.applied, self.refused, self.relays,
                                  self.outages))


class RandomEvolution(object):
    """
    Seeded random local schema evolution. Each step picks a site, may flip
    its link, applies a random change the site accepts and may relay a
    random site. Changes a site refuses are redrawn.

    :type rng: ``random.Random``
    :param rng: The only source of randomness.
    """

    def __init__(self, rng, offline_probability=0.0, relay_probability=0.25,
                 max_attempts=20):
        self.rng = rng
        self.offline_probability = offline_probability
        self.relay_probability = relay_probability
        self.max_attempts = max_attempts

    def _fresh(self, pool, taken):
        name = self.rng.choice(pool)
        if self.rng.random() < 0.3:
            name = "%s%d" % (name, self.rng.randint(1, 9))
        return name if sb_helpers.find_named(taken, name) is None else None

    def _kind(self, schema):
        if not schema.classes:
            return ChangeKind.ADD_CLASS
        total = sum(w for _, w in _KIND_WEIGHTS)
        pick = self.rng.uniform(0, total)
        for kind, weight in _KIND_WEIGHTS:
            pick -= weight
            if pick <= 0:
                return kind
        return _KIND_WEIGHTS[-1][0]

    def _attribute(self, taken):
        name = self._fresh(ATTRIBUTE_NAMES, taken)
        if name is None:
            return None
        return Attribute(name, self.rng.choice(RANDOM_TYPES),
                         nullable=self.rng.random() < 0.5)

    def random_change(self, schema):
        """
        A random change against ``schema``, or None when the draw does not
        fit it. The change may still be refused by the site.

        :rtype: :class:`.SchemaChange`
        """
        kind = self._kind(schema)
        if kind == ChangeKind.ADD_CLASS:
            name = self._fresh(CLASS_NAMES, schema.classes)
            if name is None:
                return None
            attributes = []
            for _ in range(self.rng.randint(1, 3)):
                attr = self._attribute(attributes)
                if attr is not None:
                    attributes.append(attr)
            if not attributes:
                return None
            key = None
            if not attributes[0].nullable and self.rng.random() < 0.5:
                key = [attributes[0].name]
            return SchemaChange(kind, name, attributes=attributes, key=key)
        cls = self.rng.choice(schema.classes)
        if kind == ChangeKind.DROP_CLASS:
            return SchemaChange(kind, cls.name)
        if kind == ChangeKind.RENAME_CLASS:
            name = self._fresh(CLASS_NAMES, schema.classes)
            return SchemaChange(kind, cls.name, new_name=name) if name \
                else None
        if kind == ChangeKind.ADD_ATTRIBUTE:
            attr = self._attribute(cls.attributes)
            if attr is None:
                return None
            return SchemaChange(kind, cls.name, attribute=attr.name,
                                semantic_type=attr.type,
                                nullable=attr.nullable)
        if len(cls.attributes) < 2 and kind == ChangeKind.DROP_ATTRIBUTE:
            return None
        attr = self.rng.choice(cls.attributes)
        if kind == ChangeKind.DROP_ATTRIBUTE:
            return SchemaChange(kind, cls.name, attribute=attr.name)
        if kind == ChangeKind.RENAME_ATTRIBUTE:
            name = self._fresh(ATTRIBUTE_NAMES, cls.attributes)
            return SchemaChange(kind, cls.name, attribute=attr.name,
                                new_name=name) if name else None
        return SchemaChange(kind, cls.name, attribute=attr.name,
                            semantic_type=self.rng.choice(RANDOM_TYPES),
                            nullable=attr.nullable or self.rng.random() < 0.3)

    def apply_random_change(self, adapter):
        """
        Apply one random change the site accepts.

        :rtype: :class:`.SchemaChange` or ``None``
        :return: The applied change, None if every draw was refused.
        """
        for _ in range(self.max_attempts):
            change = self.random_change(adapter.schema)
            if change is None:
                continue
            try:
                adapter.apply_local_change(change)
                return change
            except SchemaBridgeBaseException as e:
                log.debug("Site %s refused %s: %s", adapter.site_id,
                          change.to_line(), e)
        return None

    def step(self, mediator, report):
        sites = mediator.registry.sites
        adapter = mediator.adapter(self.rng.choice(sites))
        if self.rng.random() < self.offline_probability:
            adapter.set_connectivity(not adapter.online)
            report.outages += 0 if adapter.online else 1
        if self.apply_random_change(adapter) is None:
            report.refused += 1
        else:
            report.applied += 1
        if self.rng.random() < self.relay_probability:
            mediator.propagation.relay(self.rng.choice(sites))
            report.relays += 1

    def run(self, mediator, count):
        """
        Apply ``count`` random changes across the sites of ``mediator``.

        :rtype: :class:`EvolutionReport`
        """
        report = EvolutionReport()
        if not mediator.registry.sites:
            return report
        for _ in range(count):
            self.step(mediator, report)
        log.info("Random evolution finished: %r", report)
        return report
