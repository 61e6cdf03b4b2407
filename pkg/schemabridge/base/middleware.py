"""
Middleware every mediator installs on its event manager. Service operations
are dispatched as ``mediator.<service>.<operation>`` events, so these see
registration, integration, queries and relays alike.
"""
import logging

from pyeventsystem.middleware import dispatch as pyevent_dispatch
from pyeventsystem.middleware import intercept
from pyeventsystem.middleware import observe

import six

from ..interfaces.exceptions import SchemaBridgeBaseException

log = logging.getLogger(__name__)


# Decorator for service operations
dispatch = pyevent_dispatch


class EventDebugLoggingMiddleware(object):
    """
    Logs each mediator event with its arguments before the handler runs and
    its result afterwards, at DEBUG on this module's logger. Installed when
    the configuration sets ``sb_debug`` or the environment ``SB_DEBUG``;
    query results and schema copies make for long lines.
    """
    @observe(event_pattern="*", priority=100)
    def pre_log_event(self, event_args, *args, **kwargs):
        log.debug("Event: {0}, args: {1} kwargs: {2}".format(
            event_args.get("event"), args, kwargs))

    @observe(event_pattern="*", priority=4900)
    def post_log_event(self, event_args, *args, **kwargs):
        log.debug("Event: {0}, result: {1}".format(
            event_args.get("event"), event_args.get("result")))


class ExceptionWrappingMiddleware(object):
    """
    Turns any error escaping a mediator operation that is not a
    :class:`.SchemaBridgeBaseException` into one, chaining the original as
    ``__cause__``. The command line follows that chain to tell I/O failures
    (exit 2) from validation errors (exit 1).
    """
    @intercept(event_pattern="*", priority=1050)
    def wrap_exception(self, event_args, *args, **kwargs):
        next_handler = event_args.pop("next_handler")
        if not next_handler:
            return
        try:
            return next_handler.invoke(event_args, *args, **kwargs)
        except SchemaBridgeBaseException:
            raise
        except Exception as e:
            log.debug("Wrapping %s raised by %s", type(e).__name__,
                      event_args.get("event"))
            sb_ex = SchemaBridgeBaseException(
                "{0} failed: {1}: {2}".format(
                    event_args.get("event"), type(e).__name__, e))
            six.raise_from(sb_ex, e)
