"""
Message passing over node features: attention, convolution and isomorphism variants
"""

import logging
from typing import List, Optional

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from ..exceptions import ConfigurationError, NumericError
from ..models.config import Activation, AttentionForm, PropagationConfig, Variant
from ..models.features import AttentionParameters, LayerState
from ..models.graph import FeatureMatrix, SimpleGraph

logger = logging.getLogger(__name__)


def init_parameters(dimension: int, cfg: PropagationConfig) -> AttentionParameters:
    """Seeded attention vector and transform, unit-normalized (rows of the transform)"""
    rng = np.random.default_rng(cfg.seed)
    transform = rng.standard_normal((dimension, dimension))
    transform /= np.linalg.norm(transform, axis=1, keepdims=True)
    length = 4 * dimension if cfg.attention_form == AttentionForm.FULL else 2 * dimension
    attention = rng.standard_normal(length)
    attention /= np.linalg.norm(attention)
    return AttentionParameters(attention=attention, transform=transform)


def _row_labels(adjacency: sp.csr_matrix) -> np.ndarray:
    return np.repeat(np.arange(adjacency.shape[0]), np.diff(adjacency.indptr))


def _segment_sum(values: np.ndarray, indptr: np.ndarray) -> np.ndarray:
    """Per-row sums of CSR-ordered edge values (0 for empty rows)"""
    totals = np.zeros(len(indptr) - 1)
    nonempty = np.flatnonzero(np.diff(indptr) > 0)
    if len(nonempty):
        totals[nonempty] = np.add.reduceat(values, indptr[nonempty])
    return totals


def _segment_max(values: np.ndarray, indptr: np.ndarray) -> np.ndarray:
    maxima = np.zeros(len(indptr) - 1)
    nonempty = np.flatnonzero(np.diff(indptr) > 0)
    if len(nonempty):
        maxima[nonempty] = np.maximum.reduceat(values, indptr[nonempty])
    return maxima


def attention_coefficients(
    h: FeatureMatrix,
    g: SimpleGraph,
    cfg: PropagationConfig,
    params: Optional[AttentionParameters] = None,
    trust: Optional[sp.csr_matrix] = None,
) -> np.ndarray:
    """
    Per-edge coefficients alpha_ij in CSR order of ``g.adjacency``

    The attention variant scores edge (i, j) with a . [h_i | h_j | W h_i | W h_j]
    (or a . [h_i | h_j] for the pairwise form) and normalizes each row with a
    softmax. The other variants get uniform coefficients 1/|N(i)|. Nodes
    without neighbors own no coefficients.

    Args:
        h: Current features
        g: Graph
        cfg: Layer settings
        params: Attention vector and transform; seeded from ``cfg`` when omitted
        trust: Optional trust matrix over ``g``'s nodes; coefficients are
            weighted by it and renormalized when ``cfg.use_trust`` is set

    Returns:
        Coefficient per stored edge
    """
    adjacency = g.adjacency
    indptr = adjacency.indptr
    rows = _row_labels(adjacency)
    cols = adjacency.indices
    degree = np.diff(indptr)

    if cfg.variant != Variant.ATTENTION:
        return 1.0 / degree[rows].astype(np.float64)

    params = params or init_parameters(h.dimension, cfg)
    if params.dimension != h.dimension:
        raise ConfigurationError(
            f"attention parameters have dimension {params.dimension}, features {h.dimension}"
        )
    d = h.dimension
    a = params.attention
    values = h.values
    source = values @ a[:d]
    target = values @ a[d:2 * d]
    if cfg.attention_form == AttentionForm.FULL:
        transformed = values @ params.transform.T
        source = source + transformed @ a[2 * d:3 * d]
        target = target + transformed @ a[3 * d:]
    logits = source[rows] + target[cols]

    if cfg.normalize_attention:
        weights = np.exp(logits - _segment_max(logits, indptr)[rows])
        coefficients = weights / _segment_sum(weights, indptr)[rows]
    else:
        coefficients = np.exp(logits)

    if cfg.use_trust and trust is not None:
        tau = np.asarray(trust[rows, cols]).ravel() if len(rows) else np.zeros(0)
        weighted = coefficients * tau
        totals = _segment_sum(weighted, indptr)
        trusted_rows = totals > 0
        if not trusted_rows.all():
            logger.debug(f"{int((~trusted_rows & (degree > 0)).sum())} nodes trust no neighbor")
        if cfg.normalize_attention:
            renormalized = weighted / np.where(trusted_rows, totals, 1.0)[rows]
        else:
            renormalized = weighted
        coefficients = np.where(trusted_rows[rows], renormalized, coefficients)
    return coefficients


def aggregate(
    h: FeatureMatrix,
    g: SimpleGraph,
    coeffs: np.ndarray,
    cfg: PropagationConfig,
) -> np.ndarray:
    """
    Neighbor messages per node

    attention: sum_j alpha_ij h_j; convolution: sum_j h_j / sqrt(deg_i deg_j);
    isomorphism: sum_j h_j; isomorphism with self-loops: (1 + eps) h_i + sum_j h_j.
    Nodes without neighbors receive a zero message.
    """
    adjacency = g.adjacency
    n = g.n_nodes
    values = h.values
    degree = np.diff(adjacency.indptr).astype(np.float64)

    if cfg.variant == Variant.ATTENTION:
        weights = sp.csr_matrix((coeffs, adjacency.indices, adjacency.indptr), shape=(n, n))
        return weights @ values
    binary = g.binary()
    if cfg.variant == Variant.CONVOLUTION:
        scale = np.divide(1.0, np.sqrt(degree), out=np.zeros_like(degree), where=degree > 0)
        return scale[:, None] * (binary @ (scale[:, None] * values))
    messages = binary @ values
    if cfg.variant == Variant.ISOMORPHISM_SELF_LOOPS:
        has_neighbors = degree > 0
        messages[has_neighbors] += (1.0 + cfg.epsilon) * values[has_neighbors]
    return messages


def activate(x: np.ndarray, cfg: PropagationConfig) -> np.ndarray:
    if cfg.activation == Activation.RELU:
        return np.maximum(x, 0.0)
    if cfg.activation == Activation.LEAKY_RELU:
        return np.where(x >= 0, x, cfg.negative_slope * x)
    if cfg.activation == Activation.SIGMOID:
        return expit(x)
    if cfg.activation == Activation.TANH:
        return np.tanh(x)
    return x


def update(
    h: FeatureMatrix,
    messages: np.ndarray,
    coeffs: np.ndarray,
    cfg: PropagationConfig,
    bias: Optional[np.ndarray] = None,
    degree: Optional[np.ndarray] = None,
) -> FeatureMatrix:
    """
    Residual update h' = act(h + alpha * m + b)

    With a normalized residual (the attention default) the pre-activation is
    (h + alpha * m) / (1 + alpha) + b, a convex combination of the node and its
    neighbors. Nodes of zero ``degree`` are not rescaled.

    Raises:
        NumericError: A node's new features are not finite
    """
    if messages.shape != h.values.shape:
        raise ConfigurationError("messages and features must have the same shape")
    b = cfg.bias if bias is None else np.asarray(bias, dtype=np.float64).reshape(-1, 1)
    combined = h.values + cfg.alpha * messages
    if cfg.residual_normalized:
        scale = np.full(len(combined), 1.0 + cfg.alpha)
        if degree is not None:
            scale[np.asarray(degree) == 0] = 1.0
        combined = combined / scale[:, None]
    with np.errstate(over="ignore", invalid="ignore"):
        new_values = activate(combined + b, cfg)
    finite = np.isfinite(new_values).all(axis=1)
    if not finite.all():
        node = h.node_ids[int(np.flatnonzero(~finite)[0])]
        raise NumericError(f"propagation produced non-finite features at node {node}")
    return FeatureMatrix(node_ids=h.node_ids, values=new_values)


def propagate(
    h0: FeatureMatrix,
    g: SimpleGraph,
    cfg: PropagationConfig,
    params: Optional[AttentionParameters] = None,
    trust: Optional[sp.csr_matrix] = None,
    bias: Optional[np.ndarray] = None,
) -> List[LayerState]:
    """
    Run ``cfg.layers`` message-passing layers

    Each layer reads the previous snapshot only and writes a new one.

    Returns:
        States h(0) ... h(L)
    """
    if cfg.layers < 1:
        raise ConfigurationError("at least one propagation layer is required")
    if h0.node_ids != g.node_ids:
        raise ConfigurationError("features and graph must share the node order")
    if cfg.variant == Variant.ATTENTION and params is None:
        params = init_parameters(h0.dimension, cfg)
    states = [LayerState(layer=0, features=h0)]
    current = h0
    degree = np.diff(g.adjacency.indptr)
    for layer in range(1, cfg.layers + 1):
        coeffs = attention_coefficients(current, g, cfg, params=params, trust=trust)
        messages = aggregate(current, g, coeffs, cfg)
        current = update(current, messages, coeffs, cfg, bias=bias, degree=degree)
        states.append(LayerState(layer=layer, features=current))
    logger.info(f"Propagated {g.n_nodes} nodes through {cfg.layers} {cfg.variant.value} layers")
    return states
