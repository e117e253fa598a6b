"""spectab: conditional tabular GAN with spectral generator/discriminator.

Synthesizes CSV tables from a user-declared schema and evaluates the result
with statistical-similarity and ML-utility metrics, including a column-order
stability study.
"""

__version__ = "0.1.0"
