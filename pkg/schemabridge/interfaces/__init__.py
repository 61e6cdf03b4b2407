"""
Public interface exports
"""
from .adapter import SourceAdapter  # noqa
from .mediator import Configuration  # noqa
from .mediator import Mediator  # noqa
from .model import BaseType  # noqa
from .model import ChangeKind  # noqa
from .model import Comparator  # noqa
from .model import OperatorKind  # noqa
from .model import RelationKind  # noqa
from .model import VirtualClassStatus  # noqa
