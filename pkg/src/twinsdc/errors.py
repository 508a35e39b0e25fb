"""Exception hierarchy shared by the tracking, detection and replay layers."""


class TwinError(Exception):
    """Base class for every error raised by this package."""


class PathError(TwinError):
    """An error tied to a specific task position."""

    def __init__(self, path, message=None):
        self.path = tuple(path)
        from .trace import format_path

        text = f"task {format_path(self.path)}"
        if message:
            text = f"{text}: {message}"
        super().__init__(text)


class UnknownParent(PathError):
    pass


class UnknownPath(PathError):
    pass


class NonContiguousChild(PathError):
    pass


class DoubleWrite(PathError):
    pass


class ChildrenIncomplete(PathError):
    pass


class Incomplete(TwinError):
    """A query needing a finished trace was issued on an unfinished one."""


class TaskPanicked(PathError):
    """A task body raised; ``__cause__`` carries the original exception."""


class PositionOutOfRange(TwinError):
    pass


class TargetPathInvalid(PathError):
    """An explicitly targeted task never ran in the replica it names."""


class ChildCountMismatch(PathError):
    """The two replicas disagree on how many children a task spawned."""


class SpawnShapeDiverged(PathError):
    """A recomputed task spawned a different number of children than recorded."""


class ReuseConflict(PathError):
    """A reused child result is not identical across both recorded replicas."""


class RoundsExhausted(TwinError):
    def __init__(self, rounds, unresolved):
        from .trace import format_path

        self.rounds = rounds
        self.unresolved = frozenset(unresolved)
        shown = ", ".join(format_path(p) for p in sorted(self.unresolved)[:5])
        super().__init__(
            f"{len(self.unresolved)} task(s) still unresolved after {rounds} "
            f"round(s): {shown}"
        )


class DepthOutOfRange(TwinError):
    pass
