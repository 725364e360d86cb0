"""
Base models for swarmrec
"""

from pydantic import BaseModel as PydanticBaseModel, ConfigDict


class BaseModel(PydanticBaseModel):
    """Base model for all swarmrec data types

    Instances are immutable after construction so they can be shared
    read-only between workers.
    """

    model_config = ConfigDict(
        frozen=True,
        arbitrary_types_allowed=True,  # numpy arrays and scipy matrices
    )


class BaseConfigModel(PydanticBaseModel):
    """Base model for configuration objects"""

    model_config = ConfigDict(
        frozen=True,
        extra="forbid",
        validate_default=True,
    )


class BaseReportModel(PydanticBaseModel):
    """Base model for serializable reports"""

    model_config = ConfigDict(extra="forbid")
