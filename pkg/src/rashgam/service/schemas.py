"""Request/response models for the HTTP facade.

The wire format always carries full-bin coefficient vectors (one value per
bin, plus the intercept); the server reduces them to the support's run
coordinates and rejects vectors that break within-run equality.
"""

from pydantic import BaseModel, Field


class FeatureShape(BaseModel):
    name: str
    edges: list[float]
    coefficients: list[float]
    run_lengths: list[int]
    pi: list[float]


class ModelResponse(BaseModel):
    feature_names: list[str]
    omega0: float
    lambda2: float
    lambda_s: float
    features: list[FeatureShape]


class EllipsoidMeta(BaseModel):
    dim: int
    theta: float | None
    lambda2: float | None
    lambda_s: float | None
    log_volume: float
    loss_at_center: float | None


class OmegaVector(BaseModel):
    omega0: float
    omega: list[float]


class ContainsResponse(BaseModel):
    q: float
    inside: bool


class ProjectResponse(BaseModel):
    omega0: float
    omega: list[float]
    distance: float
    inside_already: bool


class MonotoneConstraint(BaseModel):
    feature: str
    direction: str = Field(pattern="^(increasing|decreasing)$")


class MonotoneRequest(BaseModel):
    constraints: list[MonotoneConstraint]
    fixed: dict[str, float] | None = None  # flat coordinate index -> value


class MonotoneResponse(BaseModel):
    omega0: float
    omega: list[float]
    q: float
    feasible: bool


class ViRow(BaseModel):
    feature: str
    vi_minus: float
    vi_plus: float
    vi_center: float
    mode: str


class ViResponse(BaseModel):
    rows: list[ViRow]


class SampleRequest(BaseModel):
    n: int = Field(ge=1, le=100_000)
    seed: int = 42


class SampleResponse(BaseModel):
    omega0s: list[float]
    omegas: list[list[float]]


class JumpsRequest(BaseModel):
    feature: str
    k: int
    n: int = Field(default=10_000, ge=1, le=1_000_000)
    tau: float = 0.0
    seed: int = 42


class JumpsResponse(BaseModel):
    feature: str
    boundary: int
    n_samples: int
    fraction_down: float
    fraction_up: float
    fraction_flat: float
    tau: float


class ErrorBody(BaseModel):
    code: str
    detail: str
