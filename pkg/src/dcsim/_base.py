from pydantic import BaseModel, ConfigDict


class Params(BaseModel):
    """Immutable parameter block; unknown keys are rejected."""

    model_config = ConfigDict(extra="forbid", frozen=True)
