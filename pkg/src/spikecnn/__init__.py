"""Spiking convolutional network with layer-wise unsupervised learning.

Pipeline: sparse-coding-trained convolutional filters -> spiking
convolution and max pooling -> probabilistic-STDP feature discovery ->
one-vs-rest SVM head.
"""

from .errors import SpikeCnnError

__all__ = ["SpikeCnnError"]
__version__ = "0.1.0"
