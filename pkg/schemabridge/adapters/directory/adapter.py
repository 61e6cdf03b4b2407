"""
A component database persisted to a directory, so that separate command
line invocations see the same site::

    <path>/schema.txt    the local schema
    <path>/data.txt      the extents
    <path>/changes.log   the schema update log, append-only
    <path>/acked         the highest acknowledged sequence number
    <path>/link          ``up`` or ``down``
"""
import logging
import os

from ...base import helpers as sb_helpers
from ...base.adapter import BaseSourceAdapter
from ...base.propagation import parse_log
from ...base.schema import DEFAULT_YEAR_PIVOT
from ...base.schema import format_extents
from ...base.schema import format_schema
from ...base.schema import parse_extents
from ...base.schema import parse_schema
from ...interfaces.exceptions import ParseException

log = logging.getLogger(__name__)

SCHEMA_FILE = 'schema.txt'
DATA_FILE = 'data.txt'
LOG_FILE = 'changes.log'
ACK_FILE = 'acked'
LINK_FILE = 'link'


class DirectorySourceAdapter(BaseSourceAdapter):
    ADAPTER_ID = 'directory'

    def __init__(self, path, site_id, pivot=None):
        self.path = os.path.abspath(path)
        schema = parse_schema(self._read(SCHEMA_FILE), site_id)
        extents, date_formats = parse_extents(
            self._read(DATA_FILE), schema,
            DEFAULT_YEAR_PIVOT if pivot is None else pivot)
        entries = parse_log(site_id, self._read(LOG_FILE))
        acked = self._read_acked()
        for entry in entries:
            entry.applied = entry.seq <= acked
        super(DirectorySourceAdapter, self).__init__(
            site_id, schema, extents, date_formats, entries, pivot)
        self._online = self._read(LINK_FILE).strip() != 'down'
        log.debug("Loaded site %s from %s at version %d", site_id,
                  self.path, self.version)

    @classmethod
    def create(cls, path, site_id, schema_text, data_text=None, pivot=None):
        """
        Initialise a site directory from a schema description document and
        an extent document, and open it.

        :rtype: :class:`DirectorySourceAdapter`
        """
        schema = parse_schema(schema_text, site_id)
        extents, date_formats = parse_extents(
            data_text or "", schema,
            DEFAULT_YEAR_PIVOT if pivot is None else pivot)
        sb_helpers.atomic_write(os.path.join(path, SCHEMA_FILE),
                                format_schema(schema))
        sb_helpers.atomic_write(os.path.join(path, DATA_FILE),
                                format_extents(schema, extents, date_formats))
        sb_helpers.atomic_write(os.path.join(path, LOG_FILE), "")
        sb_helpers.atomic_write(os.path.join(path, ACK_FILE), "0\n")
        sb_helpers.atomic_write(os.path.join(path, LINK_FILE), "up\n")
        return cls(path, site_id, pivot)

    def _file(self, name):
        return os.path.join(self.path, name)

    def _read(self, name):
        return sb_helpers.read_text(self._file(name), "")

    def _read_acked(self):
        text = self._read(ACK_FILE).strip()
        try:
            return int(text) if text else 0
        except ValueError:
            raise ParseException("Expected a sequence number in %s" %
                                 self._file(ACK_FILE), 1)

    def _persist_change(self, entry, schema, extents, date_formats):
        sb_helpers.atomic_write(self._file(SCHEMA_FILE),
                                format_schema(schema))
        sb_helpers.atomic_write(self._file(DATA_FILE),
                                format_extents(schema, extents, date_formats))
        sb_helpers.append_line(self._file(LOG_FILE), entry.to_line())

    def _persist_ack(self, seq):
        sb_helpers.atomic_write(self._file(ACK_FILE), "%d\n" % seq)

    def _persist_connectivity(self, online):
        sb_helpers.atomic_write(self._file(LINK_FILE),
                                "up\n" if online else "down\n")
