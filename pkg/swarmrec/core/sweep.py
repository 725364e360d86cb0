"""
Full-factorial parameter sweeps over the pipeline
"""

import itertools
import logging
import uuid
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

import pandas as pd
from pydantic import ValidationError
from tqdm import tqdm

from ..database.connection import ResultsStore
from ..exceptions import ConfigurationError, SwarmRecError
from ..models.config import RunConfig
from ..models.reports import MetricsReport, SweepRow, SweepStatus
from .dynamics import LAMBDA_LEVELS, lambda_grid
from .pipeline import RecommendationPipeline

logger = logging.getLogger(__name__)

# axis name -> RunConfig field
SWEEP_AXES = {
    "centrality": "use_centrality",
    "variant": "variant",
    "threshold": "threshold",
    "metric": "metric",
    "batch_size": "batch_size",
    "dim": "dim",
    "lambdas": "lambdas",
}


def _axis_values(axis: str, raw: str) -> List[Any]:
    if axis == "lambdas":
        if raw.strip().lower() == "grid":
            return lambda_grid(LAMBDA_LEVELS)
        return [tuple(float(v) for v in part.split(":")) for part in raw.split(",") if part.strip()]
    if axis == "centrality":
        return [part.strip().lower() in ("1", "true", "on", "yes") for part in raw.split(",") if part.strip()]
    return [part.strip() for part in raw.split(",") if part.strip()]


def parse_grid(specs: Sequence[str]) -> Dict[str, List[Any]]:
    """
    Parse ``axis=v1,v2,...`` strings into a grid

    ``lambdas`` values are ``a:b:c`` triples, or ``grid`` for every
    combination of the default levels; ``centrality`` takes on/off.

    Raises:
        ConfigurationError: Malformed entry or unknown axis
    """
    grid: Dict[str, List[Any]] = {}
    for spec in specs:
        axis, sep, raw = spec.partition("=")
        axis = axis.strip().replace("-", "_")
        if not sep:
            raise ConfigurationError(f"sweep axis must look like name=v1,v2: {spec!r}")
        if axis not in SWEEP_AXES:
            raise ConfigurationError(f"unknown sweep axis {axis!r}; choose from {', '.join(SWEEP_AXES)}")
        grid[axis] = _axis_values(axis, raw)
    return grid


def grid_cells(grid: Mapping[str, Sequence[Any]]) -> List[Dict[str, Any]]:
    """Every combination of axis values, axes in grid order; empty for an empty grid"""
    if not grid or any(len(values) == 0 for values in grid.values()):
        return []
    axes = list(grid)
    return [dict(zip(axes, combo)) for combo in itertools.product(*(grid[a] for a in axes))]


def _flat_metrics(report: Optional[MetricsReport]) -> Dict[str, float]:
    if report is None:
        return {}
    flat = {}
    for k, values in report.metrics.items():
        for name, value in values.model_dump().items():
            flat[f"{name}@{k}"] = value
    return flat


def _cell_config(base: RunConfig, settings: Mapping[str, Any], out_dir: Path) -> RunConfig:
    values = base.model_dump()
    values.update({SWEEP_AXES[axis]: value for axis, value in settings.items()})
    values["out_dir"] = out_dir
    try:
        return RunConfig(**values)
    except ValidationError as e:
        raise ConfigurationError(f"invalid sweep cell: {e}") from e


def sweep(
    base: RunConfig,
    grid: Mapping[str, Sequence[Any]],
    results: Optional[ResultsStore] = None,
    sweep_id: Optional[str] = None,
    progress: bool = True,
) -> List[SweepRow]:
    """
    Run the pipeline once per grid cell

    A failing cell is recorded with its error and the sweep moves on.

    Args:
        base: Settings shared by every cell
        grid: Axis name -> values (see SWEEP_AXES)
        results: Optional store every cell is persisted to
        sweep_id: Identifier of the sweep in the store
        progress: Show a tqdm progress bar

    Returns:
        One SweepRow per cell, in grid order
    """
    unknown = [axis for axis in grid if axis not in SWEEP_AXES]
    if unknown:
        raise ConfigurationError(f"unknown sweep axes: {', '.join(unknown)}")
    cells = grid_cells(grid)
    sweep_id = sweep_id or uuid.uuid4().hex
    rows: List[SweepRow] = []
    for cell, settings in enumerate(tqdm(cells, desc="sweep", disable=not progress)):
        out_dir = Path(base.out_dir) / f"cell-{cell:04d}"
        try:
            cfg = _cell_config(base, settings, out_dir)
            report = RecommendationPipeline(cfg).run()
            row = SweepRow(
                cell=cell,
                settings=settings,
                status=SweepStatus.OK,
                metrics=_flat_metrics(report.metrics),
            )
        except SwarmRecError as e:
            logger.warning(f"Sweep cell {cell} failed: {str(e)}")
            row = SweepRow(cell=cell, settings=settings, status=SweepStatus.ERROR, error=str(e))
        rows.append(row)
        if results is not None:
            results.save_sweep_cell(sweep_id, row)
    logger.info(f"Sweep finished: {sum(r.status == SweepStatus.OK for r in rows)} of {len(rows)} cells ok")
    return rows


def sweep_table(rows: Sequence[SweepRow]) -> pd.DataFrame:
    """One row per cell; settings and metrics as columns"""
    if not rows:
        return pd.DataFrame(columns=["cell", "status", "error"])
    return pd.DataFrame([row.flat() for row in rows])


def write_sweep(rows: Sequence[SweepRow], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    sweep_table(rows).to_csv(path, index=False)
    return path
