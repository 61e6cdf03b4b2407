"""The mediator wired to a federation state directory."""
import logging

from .base import BaseMediator
from .base.propagation import HighWaterMarks
from .base.state import StateStore
from .factory import AdapterFactory

log = logging.getLogger(__name__)


class SchemaMediator(BaseMediator):
    """
    A mediator whose registry copies, assertions, global schema definitions
    and high-water marks live in ``config.state_dir``. Constructing it over
    an existing state directory restores the previous session; virtual
    classes are rebuilt from their definitions.

    Adapters recorded with a directory are reopened through the
    :class:`.AdapterFactory`. Adapters without one, such as in-memory sites,
    have to be passed in through ``adapters``, keyed by site id.
    """

    def __init__(self, config=None, adapters=None, mailbox=None):
        super(SchemaMediator, self).__init__(config)
        self._store = StateStore(self.config.state_dir)
        self._loading = True
        try:
            self.propagation.high_water_marks = HighWaterMarks(
                self._store.hwm_path)
            if mailbox is not None:
                self.propagation.mailbox = mailbox
            self._attach_recorded(adapters or {})
            self._store.load(self)
        finally:
            self._loading = False

    def _attach_recorded(self, given):
        factory = AdapterFactory()
        for record in self._store.adapter_records():
            adapter = given.get(record.site)
            if adapter is None and record.path:
                adapter = factory.create_adapter(
                    record.adapter_id, record.path, record.site,
                    pivot=self.config.two_digit_year_pivot)
            if adapter is None:
                log.warning("No adapter available for site %s (%s)",
                            record.site, record.adapter_id)
                continue
            self.attach_adapter(record.site, adapter)
        for site, adapter in given.items():
            if site not in self.adapters:
                self.attach_adapter(site, adapter)

    @property
    def store(self):
        return self._store

    def site_dir(self, site):
        return self._store.site_dir(site)

    def persist(self):
        if self._loading:
            return
        with self.lock:
            self._store.save(self)
