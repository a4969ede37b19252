"""Intrinsic dimension of discrete datasets from neighbor counts in two nested L1 balls."""
__version__ = "0.1.0"

from i3d.census import DiscretePointSet, NeighborCensus, census, read_points
from i3d.errors import I3DError
from i3d.estimators import IdEstimate, PosteriorGrid, bayes_discrete, estimate, mle_discrete, scan
from i3d.validation import ks_validate, multiplier_pvalue
from i3d.volumes import volume_int, volume_ratio, volume_real

__all__ = [
    "DiscretePointSet", "I3DError", "IdEstimate", "NeighborCensus", "PosteriorGrid",
    "bayes_discrete", "census", "estimate", "ks_validate", "mle_discrete", "multiplier_pvalue",
    "read_points", "scan", "volume_int", "volume_ratio", "volume_real", "__version__",
]
