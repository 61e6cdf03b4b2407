"""
A simulated component database kept entirely in memory. Useful for tests
and for scenario replay, where nothing has to survive the process.
"""
from ...base.adapter import BaseSourceAdapter
from ...base.schema import DEFAULT_YEAR_PIVOT
from ...base.schema import parse_extents
from ...base.schema import parse_schema


class MemorySourceAdapter(BaseSourceAdapter):
    ADAPTER_ID = 'memory'

    @classmethod
    def from_text(cls, site_id, schema_text, data_text=None, pivot=None):
        """
        Build a site from a schema description document and an optional
        extent document.

        :rtype: :class:`MemorySourceAdapter`
        """
        schema = parse_schema(schema_text, site_id)
        extents, date_formats = parse_extents(
            data_text or "", schema,
            DEFAULT_YEAR_PIVOT if pivot is None else pivot)
        return cls(site_id, schema, extents, date_formats, pivot=pivot)
