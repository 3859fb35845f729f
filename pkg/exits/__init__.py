"""
Pseudo point labels and pseudo masks from extreme-point annotations

Extreme points seed a random walk over a patch-level transition matrix; the
retrieved points supervise a segmentation network and the dense CRF turns
them into pseudo masks.
"""

from . import (
    ablation, config, crf, exceptions, formats, geometry, helpers, losses, metrics, pipeline, retrieval, synth,
    tpm
)
