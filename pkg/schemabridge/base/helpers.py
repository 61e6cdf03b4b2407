import fnmatch
import io
import logging
import os
import re
import sys
import tempfile
from contextlib import contextmanager

import six

import tenacity

from ..interfaces.exceptions import InvalidSchemaException

log = logging.getLogger(__name__)

# Class, attribute and virtual class names: a letter or underscore followed
# by letters, digits or underscores.
NAME_PATTERN = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")

# Site ids may additionally contain dashes and dots.
SITE_PATTERN = re.compile(r"^[A-Za-z0-9_][A-Za-z0-9_.-]*$")


def name_key(name):
    """
    Return the comparison key of a schema name. Names are compared
    case-insensitively but stored as given.
    """
    return name.casefold() if name is not None else None


def names_equal(first, second):
    return name_key(first) == name_key(second)


def find_named(objs, name, attr='name'):
    """
    Return the first object whose ``attr`` equals ``name`` ignoring case, or
    ``None`` if there is no such object.
    """
    key = name_key(name)
    for obj in objs:
        if name_key(getattr(obj, attr)) == key:
            return obj
    return None


def filter_by_pattern(objs, pattern, attr='name'):
    """
    Filter a list of objects by a case-insensitive shell-style pattern on the
    given attribute. A ``None`` pattern returns the list as is.
    """
    if not pattern:
        return list(objs)
    regex = re.compile(fnmatch.translate(pattern), re.IGNORECASE)
    return [o for o in objs if regex.match(getattr(o, attr))]


def is_valid_name(name):
    if not name or not isinstance(name, six.string_types):
        return False
    return True if NAME_PATTERN.match(name) else False


def assert_valid_name(name, what="name"):
    if not is_valid_name(name):
        log.debug("InvalidSchemaException raised on %s", name)
        raise InvalidSchemaException(
            u"Invalid %s: %r. Names must start with a letter or underscore"
            " and contain only letters, digits or underscores." % (what, name))


def assert_valid_site(site):
    if not site or not SITE_PATTERN.match(site):
        raise InvalidSchemaException(
            u"Invalid site id: %r. Site ids may contain letters, digits,"
            " underscores, dots or dashes." % (site,))


@contextmanager
def cleanup_action(cleanup_func):
    """
    Context manager to carry out a given
    cleanup action after carrying out a set
    of tasks, or when an exception occurs.
    If any errors occur during the cleanup
    action, those are ignored, and the original
    traceback is preserved.

    :params func: This function is called if
    an exception occurs or at the end of the
    context block. If any exceptions raised
        by func are ignored.
    Usage:
        with cleanup_action(lambda e: print("Oops!")):
            do_something()
    """
    try:
        yield
    except Exception:
        ex_class, ex_val, ex_traceback = sys.exc_info()
        try:
            cleanup_func()
        except Exception:
            log.exception("Error during exception cleanup: ")
        six.reraise(ex_class, ex_val, ex_traceback)
    try:
        cleanup_func()
    except Exception:
        log.exception("Error during exception cleanup: ")


@tenacity.retry(stop=tenacity.stop_after_attempt(3),
                retry=tenacity.retry_if_exception_type(OSError),
                wait=tenacity.wait_fixed(0.1),
                reraise=True)
def atomic_write(path, content):
    """
    Replace the file at ``path`` with ``content`` atomically: the text is
    written to a temporary file in the same directory, which is then moved
    over the target. Transient OS errors are retried.
    """
    directory = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(directory):
        os.makedirs(directory)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix='.tmp-')

    def remove_tmp():
        if os.path.exists(tmp_path):
            os.remove(tmp_path)

    with cleanup_action(remove_tmp):
        with io.open(fd, 'w', encoding='utf-8') as f:
            f.write(content)
        os.replace(tmp_path, path)
    log.debug("Wrote %s", path)


def append_line(path, line):
    """Append a single line to a file, creating it if required."""
    directory = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(directory):
        os.makedirs(directory)
    with io.open(path, 'a', encoding='utf-8') as f:
        f.write(line.rstrip("\n") + "\n")


def read_text(path, default=None):
    """Return the content of ``path`` or ``default`` if it does not exist."""
    if not os.path.exists(path):
        return default
    with io.open(path, encoding='utf-8') as f:
        return f.read()


def content_lines(text):
    """
    Yield ``(line_number, stripped_line)`` for each non-blank line of a
    line-oriented document, skipping ``#`` comment lines.
    """
    for number, raw in enumerate((text or "").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith('#'):
            continue
        yield number, line
