"""
Exception hierarchy for the viewquality package.

Library code raises these; the command layer maps `exit_code` to the process exit status:
0 success, 1 IO/parse, 2 configuration, 3 internal invariant violation.
"""


class ViewQualityError(Exception):
    """Base class for all package errors"""

    exit_code = 3


# ----- INPUT / IO ERRORS (exit 1) -----


class InputError(ViewQualityError):
    exit_code = 1


class MeshFileNotFoundError(InputError):
    pass


class MeshParseError(InputError):
    pass


class EmptyMeshError(InputError):
    """No valid triangle left after sanitization"""


class ArtifactNotFoundError(InputError):
    """A VQF, trajectory or other JSON artefact does not exist"""


class ArtifactFormatError(InputError):
    """A JSON artefact could not be parsed"""


class VQFFormatError(ArtifactFormatError):
    pass


class VQFSchemaError(VQFFormatError):
    pass


class VQFShapeError(VQFFormatError):
    pass


class VQFValueError(VQFFormatError):
    """Non-finite or out-of-range value; the message names the viewpoint index"""


class ProviderError(InputError):
    """A VQF provider could not deliver the field for a step"""


# ----- CONFIGURATION ERRORS (exit 2) -----


class ConfigError(ViewQualityError):
    exit_code = 2


class InvalidGridError(ConfigError):
    pass


class InvalidParameterError(ConfigError):
    pass


class GridMismatchError(ConfigError):
    pass


# ----- INTERNAL ERRORS (exit 3) -----


class InternalError(ViewQualityError):
    exit_code = 3


class DegenerateFaceError(InternalError):
    pass


class InvariantViolation(InternalError):
    pass
