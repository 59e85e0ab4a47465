"""Exception hierarchy.

Validation failures (bad documents, bad annotations, precondition
violations) are kept distinct from numerical failures so the CLI can map
them to exit codes.
"""


class GarmentUvError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(GarmentUvError):
    """A document or input value violates its contract."""


class SchemaError(ValidationError):
    """Garment schema document is malformed or inconsistent."""


class AnnotationError(ValidationError):
    """Annotation document is malformed or inconsistent with its schema."""


class MaskError(ValidationError):
    """Segmentation mask file is malformed."""


class SingularFitError(GarmentUvError):
    """The spline system is singular (collinear or duplicated control points)."""


class InsufficientLandmarksError(ValidationError):
    """Fewer than three visible landmarks are available for a panel."""

    def __init__(self, panel_name: str, visible: int):
        super().__init__(
            f"insufficient landmarks for panel '{panel_name}': "
            f"{visible} visible, need at least 3"
        )
        self.panel_name = panel_name
        self.visible = visible


class InpaintError(GarmentUvError):
    """Hole filling cannot proceed (e.g. no valid pixels to anchor on)."""


class ExtentMismatchError(ValidationError):
    """A panel texture's pixel extent disagrees with the schema layout."""


class MeshError(ValidationError):
    """Mesh or skeleton file is malformed or violates skinning invariants."""
