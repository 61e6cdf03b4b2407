"""
Layout of a federation state directory::

    <state>/sites/<id>/...               the directory adapters
    <state>/mediator/registry/<id>.schema
    <state>/mediator/assertions.txt
    <state>/mediator/global.txt
    <state>/mediator/applied.hwm
    <state>/mediator/adapters.txt

Each registry copy starts with an ``# applied=<n>`` line, the sequence number
of the last site change it reflects, so a copy and its mark are written in
one atomic replace. ``applied.hwm`` is written last and a stale one is
corrected from the registry copies on load.
"""
import logging
import os
import re

from ..interfaces.exceptions import ParseException
from . import helpers as sb_helpers
from .integration import format_definitions
from .propagation import parse_fields
from .schema import format_schema
from .schema import parse_schema

log = logging.getLogger(__name__)

REGISTRY_SUFFIX = '.schema'

_APPLIED = re.compile(r"^#\s*applied=(\d+)\s*$")


class AdapterRecord(object):
    """Which adapter implementation serves a site, and where it lives."""

    def __init__(self, site, adapter_id, path=None):
        self.site = site
        self.adapter_id = adapter_id
        self.path = path or None

    def to_line(self):
        line = "site=%s adapter=%s" % (self.site, self.adapter_id)
        if self.path:
            line += " path=%s" % self.path
        return line

    @classmethod
    def parse(cls, line, line_number=None):
        fields = dict(parse_fields(line, line_number))
        if 'site' not in fields or 'adapter' not in fields:
            raise ParseException("Expected site=<id> adapter=<id>",
                                 line_number)
        return cls(fields['site'], fields['adapter'], fields.get('path'))

    def __repr__(self):
        return "<SB-AdapterRecord: %s>" % self.to_line()


class StateStore(object):

    def __init__(self, root):
        self.root = os.path.abspath(root)

    @property
    def mediator_dir(self):
        return os.path.join(self.root, 'mediator')

    @property
    def registry_dir(self):
        return os.path.join(self.mediator_dir, 'registry')

    @property
    def assertions_path(self):
        return os.path.join(self.mediator_dir, 'assertions.txt')

    @property
    def global_path(self):
        return os.path.join(self.mediator_dir, 'global.txt')

    @property
    def hwm_path(self):
        return os.path.join(self.mediator_dir, 'applied.hwm')

    @property
    def adapters_path(self):
        return os.path.join(self.mediator_dir, 'adapters.txt')

    def site_dir(self, site):
        return os.path.join(self.root, 'sites', site)

    def exists(self):
        return os.path.isdir(self.mediator_dir)

    def adapter_records(self):
        text = sb_helpers.read_text(self.adapters_path, "")
        return [AdapterRecord.parse(line, number)
                for number, line in sb_helpers.content_lines(text)]

    def registry_schemas(self):
        """
        The persisted registry copies, as ``(schema, applied)`` pairs;
        ``applied`` is None for a copy without a mark.
        """
        if not os.path.isdir(self.registry_dir):
            return []
        schemas = []
        for filename in sorted(os.listdir(self.registry_dir)):
            if not filename.endswith(REGISTRY_SUFFIX):
                continue
            site = filename[:-len(REGISTRY_SUFFIX)]
            text = sb_helpers.read_text(
                os.path.join(self.registry_dir, filename))
            match = _APPLIED.match(text.split("\n", 1)[0])
            applied = int(match.group(1)) if match else None
            schemas.append((parse_schema(text, site), applied))
        return schemas

    def save(self, mediator):
        """
        Write the mediator's assertions, definitions, adapters and registry
        copies, then its high-water marks. Renames already applied to the
        assertions and definitions are no-ops when an entry is applied again,
        so a save cut short leaves a state the next relay completes.
        """
        marks = mediator.propagation.high_water_marks
        sb_helpers.atomic_write(self.assertions_path,
                                mediator.correspondence.export())
        sb_helpers.atomic_write(
            self.global_path,
            format_definitions(mediator.integration.definitions()))
        records = [AdapterRecord(site, getattr(adapter, 'ADAPTER_ID',
                                               'memory'),
                                 getattr(adapter, 'path', None))
                   for site, adapter in sorted(mediator.adapters.items())]
        sb_helpers.atomic_write(
            self.adapters_path, "".join(r.to_line() + "\n" for r in records))
        for schema in mediator.registry.list():
            sb_helpers.atomic_write(
                os.path.join(self.registry_dir,
                             schema.site + REGISTRY_SUFFIX),
                "# applied=%d\n%s" % (marks.get(schema.site),
                                      format_schema(schema)))
        marks.save()
        log.debug("Saved mediator state to %s", self.mediator_dir)

    def load(self, mediator):
        """
        Restore a mediator's state. Virtual classes are rebuilt from their
        definitions against the persisted registry copies.
        """
        marks = mediator.propagation.high_water_marks
        corrected = False
        for schema, applied in self.registry_schemas():
            mediator.registry.restore(schema)
            if applied is not None and applied != marks.get(schema.site):
                log.warning("Site %s: registry copy reflects entry %d,"
                            " applied.hwm says %d", schema.site, applied,
                            marks.get(schema.site))
                marks.set(schema.site, applied, save=False)
                corrected = True
        mediator.correspondence.restore(
            sb_helpers.read_text(self.assertions_path, ""))
        mediator.integration.restore(
            sb_helpers.read_text(self.global_path, ""))
        if corrected:
            marks.save()
        log.info("Loaded mediator state from %s", self.mediator_dir)
