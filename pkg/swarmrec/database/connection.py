"""
Results database for swarmrec run reports and sweep cells
"""

import json
import logging
import uuid
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional

from sqlalchemy import (
    Column,
    DateTime,
    Float,
    Integer,
    MetaData,
    String,
    Table,
    Text,
    create_engine,
    insert,
    select,
)
from sqlalchemy.exc import SQLAlchemyError

from ..exceptions import ConfigurationError
from ..models.reports import RunReport, SweepRow

logger = logging.getLogger(__name__)

metadata = MetaData()

runs_table = Table(
    "runs",
    metadata,
    Column("id", String(36), primary_key=True),
    Column("created_at", DateTime(timezone=True), nullable=False),
    Column("seed", Integer),
    Column("status", String(16), nullable=False),
    Column("hr_at_10", Float),
    Column("report", Text, nullable=False),
)

sweep_cells_table = Table(
    "sweep_cells",
    metadata,
    Column("id", Integer, primary_key=True, autoincrement=True),
    Column("sweep_id", String(36), nullable=False, index=True),
    Column("cell", Integer, nullable=False),
    Column("status", String(16), nullable=False),
    Column("settings", Text, nullable=False),
    Column("metrics", Text, nullable=False),
    Column("error", Text),
)


class ResultsStore:
    """
    SQLAlchemy-backed store for run reports and sweep results

    Tables are created on first use.
    """

    def __init__(self, connection_string: str):
        """
        Initialize a results store

        Args:
            connection_string: SQLAlchemy database URL, e.g. ``sqlite:///results.db``

        Raises:
            ConfigurationError: Invalid URL or unreachable database
        """
        try:
            self.engine = create_engine(connection_string)
            metadata.create_all(self.engine)
        except (SQLAlchemyError, ValueError) as e:
            raise ConfigurationError(f"cannot open results database {connection_string!r}: {str(e)}")

    def close(self):
        """Release pooled connections"""
        self.engine.dispose()

    def __enter__(self) -> "ResultsStore":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def save_run(self, report: RunReport, run_id: Optional[str] = None) -> str:
        """
        Persist a run report

        Args:
            report: Report to store
            run_id: Explicit id; a new UUID when omitted

        Returns:
            The run id
        """
        run_id = run_id or str(uuid.uuid4())
        hr10 = None
        if report.metrics is not None and "10" in report.metrics.metrics:
            hr10 = report.metrics.metrics["10"].hr
        values = {
            "id": run_id,
            "created_at": datetime.now(timezone.utc),
            "seed": report.config.get("seed"),
            "status": "failed" if report.error else "ok",
            "hr_at_10": hr10,
            "report": report.to_json(),
        }
        with self.engine.begin() as conn:
            conn.execute(insert(runs_table).values(**values))
        logger.info(f"Stored run {run_id}")
        return run_id

    def list_runs(self, limit: Optional[int] = None) -> List[Dict[str, Any]]:
        """Run summaries, newest first"""
        query = select(
            runs_table.c.id,
            runs_table.c.created_at,
            runs_table.c.seed,
            runs_table.c.status,
            runs_table.c.hr_at_10,
        ).order_by(runs_table.c.created_at.desc(), runs_table.c.id)
        if limit is not None:
            query = query.limit(limit)
        with self.engine.connect() as conn:
            return [dict(row._mapping) for row in conn.execute(query)]

    def get_run(self, run_id: str) -> Optional[RunReport]:
        """Stored report, or None for an unknown id"""
        query = select(runs_table.c.report).where(runs_table.c.id == run_id)
        with self.engine.connect() as conn:
            row = conn.execute(query).fetchone()
        if row is None:
            return None
        return RunReport.model_validate_json(row.report)

    def save_sweep_cell(self, sweep_id: str, row: SweepRow) -> None:
        values = {
            "sweep_id": sweep_id,
            "cell": row.cell,
            "status": row.status.value,
            "settings": json.dumps(row.settings, sort_keys=True),
            "metrics": json.dumps(row.metrics, sort_keys=True),
            "error": row.error,
        }
        with self.engine.begin() as conn:
            conn.execute(insert(sweep_cells_table).values(**values))

    def list_sweep_cells(self, sweep_id: str) -> List[SweepRow]:
        """Cells of one sweep in cell order"""
        query = (
            select(sweep_cells_table)
            .where(sweep_cells_table.c.sweep_id == sweep_id)
            .order_by(sweep_cells_table.c.cell)
        )
        with self.engine.connect() as conn:
            rows = conn.execute(query).fetchall()
        return [
            SweepRow(
                cell=row.cell,
                status=row.status,
                settings=json.loads(row.settings),
                metrics=json.loads(row.metrics),
                error=row.error,
            )
            for row in rows
        ]
