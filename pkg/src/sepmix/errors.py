"""Exception types shared across the toolkit."""


class SepmixError(Exception):
    """Base class for all toolkit errors."""


class AudioFormatError(SepmixError):
    """Unsupported or malformed audio file."""


class SilentSignalError(SepmixError):
    """Loudness requested on a signal whose blocks are all gated."""


class ConvergenceError(SepmixError):
    """Iterative refinement failed to reach tolerance."""


class InfeasiblePartitionError(SepmixError):
    """No SPL bin edges / split assignment satisfies the constraints."""


class PlanningError(SepmixError):
    """Mixture planning could not produce a valid specification."""


class VerificationError(SepmixError):
    """Rendered output disagrees with its manifest."""
