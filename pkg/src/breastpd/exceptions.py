"""Exception hierarchy shared by all pipeline stages."""


class BreastPDError(ValueError):
    """Base class for contracted pipeline errors."""


class ImageFormatError(BreastPDError):
    pass


class MaskError(BreastPDError):
    pass


class SegmentationError(BreastPDError):
    pass


class SuperpixelError(BreastPDError):
    pass


class FeatureError(BreastPDError):
    pass


class CalibrationError(BreastPDError):
    pass


class SelectionError(BreastPDError):
    pass


class ConvergenceError(BreastPDError):
    """SMO or Newton iterations hit their cap.

    ``residual`` carries the KKT violation (or gradient norm) reached.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class SeparationError(BreastPDError):
    pass


class ModelFormatError(BreastPDError):
    pass


class VersionMismatchError(BreastPDError):
    pass


class DomainError(BreastPDError):
    pass
