"""Exception hierarchy. Every error carries a short machine-readable ``code``."""


class I3DError(Exception):
    code = "error"

    def to_dict(self):
        return {"error": self.code, "message": str(self)}


class ArgumentError(I3DError, ValueError):
    code = "invalid_argument"


class DomainError(I3DError, ValueError):
    code = "domain_error"


class NoNeighborsError(I3DError):
    code = "no_neighbors"


class ScaleTooSmallError(I3DError):
    code = "scale_too_small"


class DimensionOutOfRangeError(I3DError):
    code = "dimension_out_of_range"


class UndefinedError(I3DError):
    code = "undefined"


class DegenerateFitError(I3DError):
    code = "degenerate_fit"


class GenerationError(I3DError):
    code = "generation_error"


class FastaFormatError(I3DError, ValueError):
    code = "fasta_format"


class EmptyResultError(I3DError):
    code = "empty_result"


class GridRangeWarning(UserWarning):
    """Posterior mass close to the edge of the evaluation grid."""
