"""Anti-money-laundering risk scoring pipeline.

Subpackages cover the full desk-scale pipeline: synthetic data generation
(datagen), the embedded relational feature store (store), categorical
encoding (encode), splitting and resampling (sampling), from-scratch tree
learners (trees), metrics and statistics (metrics), experiment protocols
(harness), Shapley explanations (explain), the persisted-model scoring
service (service), and the command-line front end (cli).
"""

__version__ = "0.1.0"

from . import (  # noqa: F401
    datagen,
    encode,
    errors,
    explain,
    harness,
    metrics,
    sampling,
    service,
    store,
    trees,
)
