"""segadapt: cross-domain binary segmentation with multi-level adversarial adaptation."""

__version__ = "0.1.0"
