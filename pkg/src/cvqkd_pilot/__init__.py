"""Physical-layer simulator for Gaussian-modulated CV-QKD with RF heterodyne
detection, comparing electrically and optically generated pilot tones."""

__version__ = "0.1.0"
