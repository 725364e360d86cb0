"""
Configuration models for swarmrec
"""

import math
import os
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from pydantic import Field, ValidationError, field_validator, model_validator

from ..exceptions import ConfigurationError
from .base import BaseConfigModel
from .graph import DedupRule


class Variant(str, Enum):
    """Message-passing variants"""
    ATTENTION = "gat"
    CONVOLUTION = "gcn"
    ISOMORPHISM = "gin"
    ISOMORPHISM_SELF_LOOPS = "gin-sl"

    @classmethod
    def _missing_(cls, value: Any) -> Optional["Variant"]:
        aliases = {
            "attention": cls.ATTENTION,
            "convolution": cls.CONVOLUTION,
            "isomorphism": cls.ISOMORPHISM,
            "isomorphism-self-loops": cls.ISOMORPHISM_SELF_LOOPS,
        }
        if isinstance(value, str):
            return aliases.get(value.lower().replace("_", "-"))
        return None


class Activation(str, Enum):
    RELU = "relu"
    LEAKY_RELU = "leaky-relu"
    IDENTITY = "identity"
    SIGMOID = "sigmoid"
    TANH = "tanh"


class AttentionForm(str, Enum):
    """Logit input: both features and transformed features, or features only"""
    FULL = "full"
    PAIRWISE = "pairwise"


class Metric(str, Enum):
    EUCLIDEAN = "euclidean"
    JACCARD = "jaccard"
    COSINE = "cosine"


class JaccardBasis(str, Enum):
    ITEM_SETS = "item-sets"
    NONZERO_FEATURES = "nonzero-features"


class SplitMode(str, Enum):
    BY_TIME = "leave-one-out-by-time"
    RANDOM = "leave-one-out-random"

    @classmethod
    def _missing_(cls, value: Any) -> Optional["SplitMode"]:
        aliases = {"by-time": cls.BY_TIME, "time": cls.BY_TIME, "random": cls.RANDOM}
        if isinstance(value, str):
            return aliases.get(value.lower())
        return None


def _split_list(value: Any) -> Any:
    if isinstance(value, str):
        return [part for part in value.replace(";", ",").split(",") if part.strip()]
    return value


def _parse_strategy_list(value: Any) -> Tuple[Tuple[float, float], ...]:
    """Parse "p:q,p:q" text or a sequence of (p, q) pairs"""
    parsed = []
    for item in _split_list(value) or ():
        if isinstance(item, str):
            p, _, q = item.strip().partition(":")
            item = (float(p), float(q))
        p, q = item
        if p <= 0 or q <= 0:
            raise ValueError("walk strategy p and q must be positive")
        parsed.append((float(p), float(q)))
    return tuple(parsed)


class EmbeddingConfig(BaseConfigModel):
    """Random-walk and skip-gram settings"""

    dimension: int = Field(64, ge=1)
    walk_length: int = Field(20, ge=2)
    walks_per_node: int = Field(10, ge=1)
    p: float = Field(1.0, gt=0)
    q: float = Field(1.0, gt=0)
    walk_strategies: Tuple[Tuple[float, float], ...] = ()
    window: int = Field(5, ge=1)
    negatives: int = Field(5, ge=0)
    epochs: int = Field(5, ge=1)
    learning_rate: float = Field(0.025, gt=0)
    seed: int = 42
    workers: int = Field(1, ge=1)

    @field_validator("dimension", mode="before")
    @classmethod
    def _positive_dimension(cls, value: Any) -> Any:
        if value is not None and int(value) < 1:
            raise ConfigurationError("embedding dimension must be at least 1")
        return value

    @field_validator("walk_strategies", mode="before")
    @classmethod
    def _parse_strategies(cls, value: Any) -> Any:
        return _parse_strategy_list(value)

    def strategies(self) -> Tuple[Tuple[float, float], ...]:
        """(p, q) pairs to walk with; the single (p, q) when none are listed"""
        return self.walk_strategies or ((self.p, self.q),)


class PropagationConfig(BaseConfigModel):
    """Message-passing layer settings"""

    variant: Variant = Variant.ATTENTION
    layers: int = Field(2, ge=1)
    activation: Activation = Activation.LEAKY_RELU
    negative_slope: float = Field(0.2, ge=0)
    alpha: float = Field(1.0, ge=0)
    bias: float = 0.0
    epsilon: float = 0.0
    attention_form: AttentionForm = AttentionForm.FULL
    normalize_attention: bool = True
    # None: on for the attention variant only
    normalize_residual: Optional[bool] = None
    use_trust: bool = False
    seed: int = 42

    @property
    def residual_normalized(self) -> bool:
        if self.normalize_residual is None:
            return self.variant == Variant.ATTENTION
        return self.normalize_residual


class SimilarityConfig(BaseConfigModel):
    """Peer similarity and neighborhood settings"""

    metric: Metric = Metric.COSINE
    neighbors: int = Field(50, ge=1)
    jaccard_basis: JaccardBasis = JaccardBasis.ITEM_SETS
    rating_floor: float = Field(1.0, ge=0, le=5)
    social_fallback: bool = True


class EvalProtocol(BaseConfigModel):
    """Train/test protocol and cutoffs"""

    split: SplitMode = SplitMode.BY_TIME
    negatives: int = Field(99, ge=0)
    k_list: Tuple[int, ...] = (1, 5, 10, 15, 20)
    graded_relevance: bool = False
    seed: int = 42

    @field_validator("k_list", mode="before")
    @classmethod
    def _parse_k_list(cls, value: Any) -> Any:
        values = tuple(int(k) for k in _split_list(value))
        if not values:
            raise ValueError("at least one cutoff K is required")
        if min(values) < 1:
            raise ValueError("cutoffs K must be at least 1")
        return tuple(sorted(set(values)))


# keys that do not influence results and stay out of the report echo
NON_RESULT_KEYS = frozenset({"workers", "out_dir", "results_db", "data_dir"})


class RunConfig(BaseConfigModel):
    """Every knob of the recommendation pipeline

    Values arrive from defaults, ``SWARMREC_*`` environment variables, a flat
    config file and CLI flags, in increasing precedence (see ``from_sources``).
    """

    # data
    ratings_path: Optional[Path] = None
    social_path: Optional[Path] = None
    data_dir: Optional[Path] = None
    out_dir: Path = Path("swarmrec-out")
    results_db: Optional[str] = None

    # preprocessing
    dedup: DedupRule = DedupRule.KEEP_MAX
    threshold: float = Field(1.0, ge=0, le=5)
    phi: float = Field(0.9, ge=0)
    exclude_anomalies: bool = True
    min_user_interactions: int = Field(1, ge=1)
    min_item_interactions: int = Field(1, ge=1)
    trust_window: Optional[float] = Field(None, gt=0)

    # hypergraph
    gamma: float = Field(0.7, gt=0, le=1)
    time_window: Optional[float] = Field(None, gt=0)
    use_social: bool = True
    co_preference: bool = True

    # centrality and features
    use_centrality: bool = True
    normalize_centrality: bool = True
    concat_weights: Tuple[float, float] = (1.0, 1.0)

    # embedding
    dim: int = Field(64, ge=1)
    walk_len: int = Field(20, ge=2)
    walks_per_node: int = Field(10, ge=1)
    p: float = Field(1.0, gt=0)
    q: float = Field(1.0, gt=0)
    walk_strategies: Tuple[Tuple[float, float], ...] = ()
    context_window: int = Field(5, ge=1)
    sg_negatives: int = Field(5, ge=0)
    epochs: int = Field(5, ge=1)
    lr: float = Field(0.025, gt=0)

    # propagation
    variant: Variant = Variant.ATTENTION
    layers: int = Field(2, ge=1)
    activation: Activation = Activation.LEAKY_RELU
    alpha: float = Field(1.0, ge=0)
    attention_form: AttentionForm = AttentionForm.FULL
    normalize_attention: bool = True
    normalize_residual: Optional[bool] = None
    use_trust: bool = False

    # recommendation
    metric: Metric = Metric.COSINE
    neighbors: int = Field(50, ge=1)
    jaccard_basis: JaccardBasis = JaccardBasis.ITEM_SETS
    rating_floor: Optional[float] = Field(None, ge=0, le=5)
    k_list: Tuple[int, ...] = (1, 5, 10, 15, 20)

    # evaluation
    split: SplitMode = SplitMode.BY_TIME
    eval_negatives: int = Field(99, ge=0)
    graded_relevance: bool = False

    # preference dynamics
    lambdas: Tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    eta: float = Field(0.5, gt=0, le=1)

    # batch processing
    batch_size: int = Field(128, ge=1)
    n_batches: Optional[int] = Field(None, ge=1)
    max_iter: int = Field(1, ge=0)
    epsilon: float = Field(1e-4, gt=0)

    seed: int = 42
    workers: int = Field(default_factory=lambda: os.cpu_count() or 1, ge=1)

    @field_validator("concat_weights", "lambdas", mode="before")
    @classmethod
    def _parse_float_tuple(cls, value: Any) -> Any:
        return tuple(float(v) for v in _split_list(value))

    @field_validator("k_list", mode="before")
    @classmethod
    def _parse_k_list(cls, value: Any) -> Any:
        values = tuple(int(k) for k in _split_list(value))
        if not values or min(values) < 1:
            raise ValueError("cutoffs K must be positive integers")
        return tuple(sorted(set(values)))

    @field_validator("walk_strategies", mode="before")
    @classmethod
    def _parse_strategies(cls, value: Any) -> Any:
        return _parse_strategy_list(value)

    @field_validator("dim", mode="before")
    @classmethod
    def _positive_dim(cls, value: Any) -> Any:
        if value is not None and int(value) < 1:
            raise ConfigurationError("embedding dimension must be at least 1")
        return value

    @field_validator("lambdas")
    @classmethod
    def _check_lambdas(cls, value: Tuple[float, float, float]) -> Tuple[float, float, float]:
        if any(v < 0 or not math.isfinite(v) for v in value):
            raise ValueError("lambda weights must be finite and nonnegative")
        return value

    @model_validator(mode="before")
    @classmethod
    def _resolve_paths(cls, values: Any) -> Any:
        if not isinstance(values, dict):
            return values
        values = dict(values)
        data_dir = values.get("data_dir")
        for key in ("ratings_path", "social_path"):
            raw = values.get(key)
            if raw in (None, ""):
                values[key] = None
                continue
            path = Path(raw)
            if not path.exists() and data_dir and not path.is_absolute():
                path = Path(data_dir) / path
            if not path.exists():
                raise ConfigurationError(f"{key} does not exist: {raw}")
            values[key] = path
        return values

    @classmethod
    def from_sources(
        cls,
        overrides: Optional[Dict[str, Any]] = None,
        config_path: Optional[Path] = None,
        environment: Optional[Dict[str, str]] = None,
    ) -> "RunConfig":
        """
        Build a config from environment, config file and explicit overrides

        Args:
            overrides: Highest-precedence values (CLI flags); None values ignored
            config_path: Optional flat ``key = value`` file
            environment: Environment values; read through python-dotenv when None

        Returns:
            Validated RunConfig

        Raises:
            ConfigurationError: Unknown keys or invalid values
        """
        from ..settings import load_environment, merge_sources, read_config_file

        env = load_environment() if environment is None else environment
        file_values = read_config_file(config_path) if config_path else {}
        for key in file_values:
            if key not in cls.model_fields:
                raise ConfigurationError(f"unknown config key: {key}")
        merged = merge_sources(env, file_values, overrides or {})
        try:
            return cls(**merged)
        except ValidationError as e:
            raise ConfigurationError(f"invalid configuration: {e}") from e

    @property
    def effective_rating_floor(self) -> float:
        return self.threshold if self.rating_floor is None else self.rating_floor

    def embedding_config(self) -> EmbeddingConfig:
        return EmbeddingConfig(
            dimension=self.dim,
            walk_length=self.walk_len,
            walks_per_node=self.walks_per_node,
            p=self.p,
            q=self.q,
            walk_strategies=self.walk_strategies,
            window=self.context_window,
            negatives=self.sg_negatives,
            epochs=self.epochs,
            learning_rate=self.lr,
            seed=self.seed,
            workers=self.workers,
        )

    def propagation_config(self) -> PropagationConfig:
        return PropagationConfig(
            variant=self.variant,
            layers=self.layers,
            activation=self.activation,
            alpha=self.alpha,
            attention_form=self.attention_form,
            normalize_attention=self.normalize_attention,
            normalize_residual=self.normalize_residual,
            use_trust=self.use_trust,
            seed=self.seed,
        )

    def similarity_config(self) -> SimilarityConfig:
        return SimilarityConfig(
            metric=self.metric,
            neighbors=self.neighbors,
            jaccard_basis=self.jaccard_basis,
            rating_floor=self.effective_rating_floor,
            social_fallback=self.use_social,
        )

    def eval_protocol(self) -> EvalProtocol:
        return EvalProtocol(
            split=self.split,
            negatives=self.eval_negatives,
            k_list=self.k_list,
            graded_relevance=self.graded_relevance,
            seed=self.seed,
        )

    def echo(self) -> Dict[str, Any]:
        """Result-relevant settings as JSON-ready values"""
        return self.model_dump(mode="json", exclude=set(NON_RESULT_KEYS))
