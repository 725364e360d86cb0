"""
swarmrec - hypergraph social recommendation with consensus-dynamics verification
"""

from .core.pipeline import RecommendationPipeline, run_pipeline
from .models.config import RunConfig

__version__ = "0.1.0"
__all__ = ["RecommendationPipeline", "RunConfig", "run_pipeline"]
