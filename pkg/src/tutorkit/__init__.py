"""tutorkit: build tutor interfaces and teach an HTN agent to solve them.

Core pieces: working memory over tutor state (wm), a rete-style pattern
matcher (rete), HTN knowledge (htn), the planner that acts one step at a
time (planner), the demonstration/feedback learner (learner), the nested
row/column interface model (layout), the training protocol state machine
(session), the scripted-teacher harness and metrics (evalsim), and the HTTP
service plus persistence (service).
"""

from .errors import (
    FieldNotFoundError,
    NameConflictError,
    NotFoundError,
    OperatorFailure,
    PatternCompileError,
    ProtocolError,
    SetupIncompleteError,
    StateError,
    StructuralError,
    StructuralMismatchError,
    TutorkitError,
)
from .wm import Value, WorkingMemory, close_relations, from_tutor_state, lookup
from .htn import KnowledgeBase, Method, Operator, standard_operator_library
from .layout import LayoutTree
from .session import Session
from .evalsim import evaluate, generate, scripted_teacher, train

__all__ = [
    "Value",
    "WorkingMemory",
    "close_relations",
    "from_tutor_state",
    "lookup",
    "KnowledgeBase",
    "Method",
    "Operator",
    "standard_operator_library",
    "LayoutTree",
    "Session",
    "evaluate",
    "generate",
    "scripted_teacher",
    "train",
    "TutorkitError",
    "StructuralMismatchError",
    "FieldNotFoundError",
    "StateError",
    "PatternCompileError",
    "StructuralError",
    "NameConflictError",
    "NotFoundError",
    "OperatorFailure",
    "ProtocolError",
    "SetupIncompleteError",
]
