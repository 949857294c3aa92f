"""Exception hierarchy.

Validation problems (bad files, bad shapes, bad labels) derive from
:class:`ValidationError`; numeric or protocol failures that only show up
while computing derive from :class:`ComputationError`. The CLI maps the
former to exit code 1 and the latter to exit code 2.
"""


class ActsError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(ActsError, ValueError):
    """Input rejected before any work was done."""


class ComputationError(ActsError, RuntimeError):
    """Failure while computing a result from valid inputs."""


class DimensionMismatchError(ValidationError):
    pass


class InvalidLabelError(ValidationError):
    pass


class NonFiniteValueError(ValidationError):
    pass


class SchemaError(ValidationError):
    """Model or report document does not follow the expected layout."""


class ConfigError(ValidationError):
    pass


class InconsistentInputError(ValidationError):
    """Scores and class label disagree (e.g. label is not the argmin)."""


class DegenerateDatasetError(ValidationError):
    pass


class IncompleteRecordError(ValidationError):
    pass


class TrainingDivergedError(ComputationError):
    pass


class DegeneratePerturbationError(ComputationError):
    """Every perturbation handed to a speed estimate had zero norm."""


class EmptyCohortError(ComputationError):
    """No sample survived the correctly-classified filter."""


class UndefinedOverlapError(ComputationError):
    pass


class UndefinedMeanError(ComputationError):
    pass
