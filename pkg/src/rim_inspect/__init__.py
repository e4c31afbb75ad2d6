"""Automated car-wheel inspection pipeline.

Detects wheels, classifies rim designs, estimates rim size from the bolt
pitch-circle geometry, tracks wheels across frames and checks that all four
wheels of a car agree in class and diameter.
"""

__version__ = "0.1.0"

from .core import BBox, Circle, Conic, Detection, Ellipse, Label, iou

__all__ = [
    "BBox",
    "Circle",
    "Conic",
    "Detection",
    "Ellipse",
    "Label",
    "iou",
    "__version__",
]
