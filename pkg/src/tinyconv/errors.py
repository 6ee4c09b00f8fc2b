"""Exception hierarchy shared across the package.

Every error carries a ``module`` and ``code`` tag so the CLI can print a
single machine-parsable line (``E:<module>:<code>:<detail>``).
"""


class TinyconvError(Exception):
    module = "tinyconv"
    code = "error"

    def __init__(self, detail: str = ""):
        self.detail = detail
        super().__init__(detail)


class CalibrationFormatError(TinyconvError):
    module = "reference_oracle"
    code = "bad_calibration"


class DegenerateCalibrationError(TinyconvError):
    module = "reference_oracle"
    code = "degenerate_calibration"


class NoRootError(TinyconvError):
    module = "reference_oracle"
    code = "no_root"


class ConstantSequenceError(TinyconvError):
    module = "datagen"
    code = "constant_sequence"


class FactorizationError(TinyconvError):
    module = "datagen"
    code = "not_positive_definite"


class RankDeficiencyError(TinyconvError):
    module = "surrogates"
    code = "rank_deficient"


class NonGridDataError(TinyconvError):
    module = "surrogates"
    code = "non_grid_data"


class DivergenceError(TinyconvError):
    module = "training"
    code = "divergence"


class UnsupportedConstructError(TinyconvError):
    module = "ir_cost"
    code = "unsupported_construct"


class LengthMismatchError(TinyconvError):
    module = "evaluation"
    code = "length_mismatch"


class EmptyRosterError(TinyconvError):
    module = "evaluation"
    code = "empty_roster"


class UnknownFamilyError(TinyconvError):
    module = "cli"
    code = "unknown_family"


class NameCollisionError(TinyconvError):
    module = "codegen"
    code = "name_collision"
