"""
Decorator functions for swarmrec pipeline stages
"""

import logging
import time
from functools import wraps

from ...exceptions import StageError, SwarmRecError
from ...models.reports import StageRecord, StageStatus

# Configure logger
logger = logging.getLogger(__name__)


def pipeline_stage(name):
    """
    Decorator marking a pipeline method as a named stage.

    The wrapped method's owner must expose ``timings`` (stage -> seconds) and
    ``stages`` (stage -> StageRecord) dicts. Start, end and wall time are
    logged; any failure is recorded on the owner and re-raised as a
    StageError carrying the stage name, so partial reports can still be
    written by the caller.

    Usage:
        @pipeline_stage("centrality")
        def compute_centrality(self, graph):
            ...

    Args:
        name: Stage name used in logs and in the run report

    Returns:
        Decorator producing the wrapped method

    Raises:
        StageError: When the stage raises anything
    """
    def decorator(method):
        @wraps(method)
        def wrapper(self, *args, **kwargs):
            logger.info(f"Stage {name} started")
            started = time.perf_counter()
            try:
                result = method(self, *args, **kwargs)
            except StageError:
                raise
            except SwarmRecError as e:
                logger.error(f"Stage {name} failed: {str(e)}")
                self.stages[name] = StageRecord(status=StageStatus.FAILED, reason=str(e))
                raise StageError(name, e) from e
            except Exception as e:
                logger.exception(f"Unexpected error in stage {name}")
                self.stages[name] = StageRecord(status=StageStatus.FAILED, reason=str(e))
                raise StageError(name, e) from e
            finally:
                self.timings[name] = time.perf_counter() - started
            self.stages[name] = StageRecord(status=StageStatus.OK)
            logger.info(f"Stage {name} finished in {self.timings[name]:.2f}s")
            return result

        return wrapper

    return decorator


def skip_stage(owner, name, reason):
    """Record a stage as skipped"""
    logger.info(f"Stage {name} skipped: {reason}")
    owner.stages[name] = StageRecord(status=StageStatus.SKIPPED, reason=reason)
