"""Exception types shared across the engine."""


class TutorkitError(Exception):
    pass


class StructuralMismatchError(TutorkitError):
    """Tutor state names a field the layout does not contain."""


class FieldNotFoundError(TutorkitError):
    pass


class StateError(TutorkitError):
    """Operation invoked on an object in the wrong state (e.g. matching an
    unclosed working memory)."""


class PatternCompileError(TutorkitError):
    """Pattern violates the negation-safety invariant."""


class StructuralError(TutorkitError):
    """Layout/knowledge-base structure violation (leaf parent, cycles,
    decomposition runaway)."""


class NameConflictError(TutorkitError):
    pass


class NotFoundError(TutorkitError):
    pass


class OperatorFailure(TutorkitError):
    """An operator was applied to arguments outside its domain; planning and
    explanation search skip the instantiation silently."""


class ProtocolError(TutorkitError):
    """Teacher message illegal for the current session phase."""

    def __init__(self, message: str, expected: tuple = ()):
        super().__init__(message)
        self.expected = tuple(expected)


class SetupIncompleteError(TutorkitError):
    pass
