"""Exception hierarchy shared by every sysmodel module."""


class ModelError(Exception):
    """Base class for all errors raised by sysmodel."""


class UnknownClass(ModelError):
    pass


class UnknownObject(ModelError):
    pass


class ConflictingInheritedMember(ModelError):
    pass


class InheritanceCycle(ModelError):
    pass


class InvalidModel(ModelError):
    """A SystemModel invariant was violated at construction time."""


class EvaluationError(ModelError):
    """Expression evaluation failed (type mismatch, unbound name, division by zero)."""


class ExprTypeError(ModelError):
    """Static type checking of an expression failed."""


class ExplosionLimit(ModelError):
    """A bounded enumeration exceeded its node cap."""

    def __init__(self, cap, what="enumeration"):
        super().__init__(f"{what} exceeded the cap of {cap} nodes")
        self.cap = cap


class ParseError(ModelError):
    """Base class for document parsing failures."""

    def __init__(self, message, line=None, col=None, doc=None):
        self.line = line
        self.col = col
        self.doc = doc
        where = f"{doc or '<string>'}:{line}:{col}: " if line is not None else ""
        super().__init__(where + message)
        self.bare_message = message


class DslSyntaxError(ParseError):
    def __init__(self, message, line, col, expected=(), doc=None):
        self.expected = frozenset(expected)
        if self.expected:
            message = f"{message} (expected one of: {', '.join(sorted(self.expected))})"
        super().__init__(message, line, col, doc)


class DuplicateName(ParseError):
    pass


class UnknownKind(ParseError):
    pass


class ElaborationError(ModelError):
    """Raised when documents fail their context conditions; carries the report."""

    def __init__(self, report):
        self.report = report
        super().__init__(f"elaboration failed with {len(report.errors)} error finding(s)")


class UnsupportedKind(ModelError):
    pass


class InvalidStimulus(ModelError):
    pass


class CreationViolation(ModelError):
    pass


class MessageNotAccepted(ModelError):
    pass


class MappingError(ModelError):
    pass


class SynthesisError(ModelError):
    pass


class ProjectionEmpty(SynthesisError):
    pass


class LabelConflict(SynthesisError):
    pass


class AmbiguousLifeline(ModelError):
    pass


class GraphError(ModelError):
    pass


class DuplicatePath(GraphError):
    pass


class UnknownNode(GraphError):
    pass


class CycleError(GraphError):
    pass


class UnsupportedTransformShape(GraphError):
    pass


class ManifestFormatError(GraphError):
    def __init__(self, message, line):
        super().__init__(f"manifest line {line}: {message}")
        self.line = line
