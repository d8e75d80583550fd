"""fccgan: a self-contained GAN architecture laboratory.

Builds fully-connected+convolutional hybrid generators/discriminators and
their all-convolutional baselines on a from-scratch tensor engine, trains
them under the standard and Wasserstein objectives, and scores runs with a
locally trained evaluation classifier.
"""

__version__ = "0.1.0"
