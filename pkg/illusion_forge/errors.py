"""Exception hierarchy shared by the library modules.

Library code raises these and never exits; the CLI turns them into exit code 1.
"""


class ForgeError(Exception):
    """Base class for every expected failure."""


# geometry / illusions / raster
class InvalidGeometry(ForgeError):
    pass


class InvalidParams(ForgeError):
    pass


class InvalidScene(ForgeError):
    def __init__(self, violations):
        self.violations = list(violations)
        preview = "; ".join(str(v) for v in self.violations[:3])
        more = f" (+{len(self.violations) - 3} more)" if len(self.violations) > 3 else ""
        super().__init__(f"Scene is not renderable: {preview}{more}")


class IncompatibleSize(ForgeError):
    pass


# dataset
class InvalidSpec(ForgeError):
    pass


class DatasetIOError(ForgeError):
    pass


class UnbinnableSample(ForgeError):
    pass


class InsufficientSamples(ForgeError):
    pass


class InvalidFraction(ForgeError):
    pass


class EmptyManifest(ForgeError):
    pass


# fusion
class InvalidClass(ForgeError):
    pass


class IndexOutOfRange(ForgeError):
    pass


class ShapeMismatch(ForgeError):
    pass


class LabelMismatch(ForgeError):
    pass


class EmptyBatch(ForgeError):
    pass


# analysis
class EmptyInput(ForgeError):
    pass


class Degenerate(ForgeError):
    pass


class TooFewPoints(ForgeError):
    pass
