"""Exception hierarchy shared by the package."""


class VmgaError(Exception):
    """Base class for all package errors."""


class DataError(VmgaError):
    """Malformed or unusable input data (trace files, instance files)."""


class InfeasibleError(VmgaError):
    """A VM cannot be hosted by any PM of the instance."""

    def __init__(self, vm_id: int, message: str | None = None):
        self.vm_id = vm_id
        super().__init__(message or f"VM {vm_id} does not fit on any PM")


class LiteralSyntaxError(DataError):
    """Malformed literal text; ``offset`` is the byte offset of the problem."""

    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} at offset {offset}")
