"""Cell-shape classification from noisy contours.

Pipeline: label maps or JSONL contours -> normalization and rotational
registration -> shape descriptors (scalar, curvature, radii, Fourier,
wavelet, Zernike, PCA shape modes) -> gradient-boosted-tree classification
with cross-validated evaluation and gain-based feature importance.
"""

__version__ = "0.1.0"

from .contour_io import Contour, FeatureMatrix, LabelMap, ShapeClass

__all__ = ["Contour", "FeatureMatrix", "LabelMap", "ShapeClass", "__version__"]
