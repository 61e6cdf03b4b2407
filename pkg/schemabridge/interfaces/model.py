"""
Vocabulary shared by the mediator, its services and the source adapters.
"""
from enum import Enum


class BaseType(Enum):
    """
    The five kinds of value in the common data model.
    """
    INTEGER = 'integer'
    REAL = 'real'
    TEXT = 'text'
    DATE = 'date'
    IDENTIFIER = 'identifier'


class RelationKind(Enum):
    """
    Semantic relationship that a correspondence assertion declares between
    two local classes.
    """
    EQUIVALENCE = 'equivalence'
    SYNONYMY = 'synonymy'
    CONTAINMENT = 'containment'
    HOMONYMY = 'homonymy'


class OperatorKind(Enum):
    """
    Integration operator that defines a virtual class.
    """
    UNION = 'union'
    GENERALIZE = 'generalize'
    SPECIALIZE = 'specialize'
    IMPORT = 'import'


MERGING_OPERATORS = (OperatorKind.UNION, OperatorKind.GENERALIZE,
                     OperatorKind.SPECIALIZE)


class ChangeKind(Enum):
    """
    Local schema modifications relayed from a site to the mediator.
    """
    ADD_CLASS = 'AddClass'
    DROP_CLASS = 'DropClass'
    RENAME_CLASS = 'RenameClass'
    ADD_ATTRIBUTE = 'AddAttribute'
    DROP_ATTRIBUTE = 'DropAttribute'
    RENAME_ATTRIBUTE = 'RenameAttribute'
    CHANGE_ATTRIBUTE_TYPE = 'ChangeAttributeType'


class Comparator(Enum):
    """
    Comparison operators allowed in query and subquery predicates.
    """
    EQ = '='
    NE = '!='
    LT = '<'
    LE = '<='
    GT = '>'
    GE = '>='

    @property
    def flipped(self):
        """
        The comparator obtained by swapping both sides of the comparison.
        """
        return _FLIPPED[self]


_FLIPPED = {
    Comparator.EQ: Comparator.EQ,
    Comparator.NE: Comparator.NE,
    Comparator.LT: Comparator.GT,
    Comparator.LE: Comparator.GE,
    Comparator.GT: Comparator.LT,
    Comparator.GE: Comparator.LE,
}


class VirtualClassStatus(object):

    """
    Standard states for a virtual class.

    :cvar VALID: The attribute formula holds against the current local
                 schemas and the class can be queried.
    :cvar INVALIDATED: A constituent vanished or a governing assertion broke.
                       The reason is kept alongside the status.
    """
    VALID = "valid"
    INVALIDATED = "invalidated"
