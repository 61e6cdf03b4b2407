"""
Specification for exceptions raised by the mediator and its adapters
"""


class SchemaBridgeBaseException(Exception):
    """
    Base class for all schemabridge exceptions
    """
    pass


class InvalidSchemaException(SchemaBridgeBaseException):
    """
    Marker interface for malformed schemas, extents or schema files.
    Thrown when a LocalSchema, LocalClass or ObjectInstance violates one of
    its invariants, for example duplicate attribute names within a class.
    """
    pass


class DuplicateSiteException(SchemaBridgeBaseException):
    """
    Marker interface for an attempt to register a site that is already
    part of the federation.
    """
    pass


class UnknownSiteException(SchemaBridgeBaseException):
    """
    Marker interface for a reference to a site that is not registered.
    """
    pass


class UnknownClassException(SchemaBridgeBaseException):
    """
    Marker interface for a reference to a class that does not exist at the
    given site.
    """
    pass


class UnknownAttributeException(SchemaBridgeBaseException):
    """
    Marker interface for a reference to an attribute that does not exist in
    the given class, local or virtual.
    """
    pass


class NameCollisionException(SchemaBridgeBaseException):
    """
    Marker interface for a rename whose target name is already taken by a
    sibling class or attribute.
    """
    pass


class SiteOfflineException(SchemaBridgeBaseException):
    """
    Marker interface for an operation that needs a site which has been
    toggled offline.
    """

    def __init__(self, site):
        super(SiteOfflineException, self).__init__(
            "Site %s is offline" % (site,))
        self.site = site


class InvalidChangeException(SchemaBridgeBaseException):
    """
    Marker interface for a schema change that cannot be applied to the
    current local schema, e.g. dropping a class that does not exist.
    """
    pass


class ParseException(SchemaBridgeBaseException):
    """
    Marker interface for syntax errors in any of the text formats: schema
    and extent files, the assertion DSL, global schema definitions, queries,
    change lines and scenario scripts. Carries the 1-based line and column.
    """

    def __init__(self, msg, line=None, column=None):
        location = ""
        if line is not None:
            location = " (line %s" % line
            if column is not None:
                location += ", column %s" % column
            location += ")"
        super(ParseException, self).__init__(msg + location)
        self.line = line
        self.column = column


class UnknownReferenceException(SchemaBridgeBaseException):
    """
    Marker interface for an assertion that references a site, class,
    attribute or conversion function that is not registered.
    """
    pass


class TypeMismatchException(SchemaBridgeBaseException):
    """
    Marker interface for attribute correspondences whose post-conversion
    types cannot be joined into a common global type.
    """
    pass


class InconsistentAssertionException(SchemaBridgeBaseException):
    """
    Marker interface for an assertion that is structurally inconsistent with
    the classes it relates. The message names the violated condition.
    """
    pass


class HomonymyForbiddenException(SchemaBridgeBaseException):
    """
    Marker interface for an attempt to merge homonymous classes. Homonymous
    classes cannot be merged into a common virtual class.
    """
    pass


class MissingAssertionException(SchemaBridgeBaseException):
    """
    Marker interface for a merging operator applied to a pair of classes
    that no correspondence assertion relates.
    """
    pass


class ArityException(SchemaBridgeBaseException):
    """
    Marker interface for an operator applied to the wrong number of
    constituent classes.
    """
    pass


class MissingKeyLinkException(SchemaBridgeBaseException):
    """
    Marker interface for a specialization whose constituents are not all
    linked by a key correspondence.
    """
    pass


class UnknownVirtualClassException(SchemaBridgeBaseException):
    """
    Marker interface for a reference to a virtual class that is not part of
    the global schema.
    """
    pass


class DuplicateVirtualClassException(SchemaBridgeBaseException):
    """
    Marker interface for an attempt to define a virtual class under a name
    that the global schema already uses.
    """
    pass


class InvalidatedVirtualClassException(SchemaBridgeBaseException):
    """
    Marker interface for a query against a virtual class whose status is
    invalidated.
    """
    pass


class InvalidQueryException(SchemaBridgeBaseException):
    """
    Marker interface for a query that is well formed but cannot be evaluated,
    for example a literal that does not coerce to the attribute type.
    """
    pass


class PartialResultException(SchemaBridgeBaseException):
    """
    Marker interface for a query that could not reach every constituent
    site. ``answered`` lists the sites that returned a sub-result and
    ``missing`` the ones that did not.
    """

    def __init__(self, virtual_class, answered, missing):
        super(PartialResultException, self).__init__(
            "Query on %s is missing sub-results from %s (answered: %s)" %
            (virtual_class, ", ".join(missing) or "-",
             ", ".join(answered) or "-"))
        self.virtual_class = virtual_class
        self.answered = list(answered)
        self.missing = list(missing)


class StaleEntryException(SchemaBridgeBaseException):
    """
    Marker interface for a change log entry that the mediator has already
    applied. The entry is a duplicate and is ignored.
    """

    def __init__(self, site, seq):
        super(StaleEntryException, self).__init__(
            "Entry %s of site %s has already been applied" % (seq, site))
        self.site = site
        self.seq = seq


class GapBufferedException(SchemaBridgeBaseException):
    """
    Informational marker for a change log entry that arrived ahead of its
    predecessors. The entry is buffered until the gap is closed.
    """

    def __init__(self, site, seq, expected):
        super(GapBufferedException, self).__init__(
            "Entry %s of site %s buffered, expecting %s" %
            (seq, site, expected))
        self.site = site
        self.seq = seq
        self.expected = expected
