"""Language-guided zero-annotation segmentation with classifier saliency."""

__version__ = "0.1.0"
