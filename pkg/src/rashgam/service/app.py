"""Read-mostly HTTP facade over a loaded model + ellipsoid.

Requests are served from an immutable session snapshot; a reload swaps the
whole snapshot atomically.  All randomness comes from request-supplied
seeds, so every response is reproducible.
"""

from dataclasses import dataclass

import numpy as np
from fastapi import FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from ..apps import CoordLayout, jump_analysis, monotone_fit, project_edit, vi_range
from ..ellipsoid import Ellipsoid
from ..errors import DimensionMismatchError, RashgamError
from ..gam import GamModel, expand_support, reduce_support
from . import schemas

RUN_MISMATCH_TOL = 1e-8


@dataclass(frozen=True)
class SessionState:
    model: GamModel
    ellipsoid: Ellipsoid
    layout: CoordLayout

    @property
    def feature_index(self) -> dict:
        return {name: j for j, name in enumerate(self.model.feature_names)}


def load_session(model_path, ellipsoid_path) -> SessionState:
    model = GamModel.load(model_path)
    ell = Ellipsoid.load(ellipsoid_path)
    layout = CoordLayout.from_model(model)
    if ell.dim != layout.dim:
        raise DimensionMismatchError(
            f"ellipsoid dimension {ell.dim} does not match the model's "
            f"{layout.dim} run coordinates"
        )
    return SessionState(model=model, ellipsoid=ell, layout=layout)


def create_app(session: SessionState) -> FastAPI:
    app = FastAPI(title="rashgam service", openapi_url="/api/spec")
    app.state.session = session
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(RequestValidationError)
    async def malformed(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400, content={"code": "malformed_body", "detail": str(exc)}
        )

    @app.exception_handler(DimensionMismatchError)
    async def dim_mismatch(request: Request, exc: DimensionMismatchError):
        return JSONResponse(
            status_code=409, content={"code": "dimension_mismatch", "detail": str(exc)}
        )

    @app.exception_handler(RashgamError)
    async def domain_error(request: Request, exc: RashgamError):
        code = getattr(exc, "code", "domain_error")
        return JSONResponse(status_code=422, content={"code": code, "detail": str(exc)})

    def state() -> SessionState:
        return app.state.session

    def to_run_coords(body: schemas.OmegaVector) -> np.ndarray:
        s = state()
        beta = np.concatenate([[body.omega0], np.asarray(body.omega, dtype=float)])
        if beta.size != 1 + s.model.m:
            raise DimensionMismatchError(
                f"expected {s.model.m} bin coefficients, got {beta.size - 1}"
            )
        v, dev = reduce_support(s.model.support, beta)
        if dev > RUN_MISMATCH_TOL:
            raise RashgamError(
                f"coefficients differ within a support run by {dev:.3e}; "
                "edits must move whole steps"
            )
        return v

    def to_bins(v: np.ndarray) -> tuple[float, list[float]]:
        beta = expand_support(state().model.support, v)
        return float(beta[0]), beta[1:].tolist()

    def feature_id(name: str) -> int:
        idx = state().feature_index.get(name)
        if idx is None:
            raise RashgamError(f"unknown feature {name!r}")
        return idx

    @app.get("/api/model", response_model=schemas.ModelResponse)
    def get_model():
        m = state().model
        feats = []
        start = 0
        for j, name in enumerate(m.feature_names):
            b = m.edges[j].size - 1
            feats.append(
                schemas.FeatureShape(
                    name=name,
                    edges=m.edges[j].tolist(),
                    coefficients=m.omega[start : start + b].tolist(),
                    run_lengths=m.support.runs[j].tolist(),
                    pi=m.pi[j].tolist(),
                )
            )
            start += b
        return schemas.ModelResponse(
            feature_names=list(m.feature_names),
            omega0=m.omega0,
            lambda2=m.lambda2,
            lambda_s=m.lambda_s,
            features=feats,
        )

    @app.get("/api/ellipsoid/meta", response_model=schemas.EllipsoidMeta)
    def get_meta():
        e = state().ellipsoid
        return schemas.EllipsoidMeta(
            dim=e.dim,
            theta=e.meta.get("theta"),
            lambda2=e.meta.get("lambda2"),
            lambda_s=e.meta.get("lambda_s"),
            log_volume=e.log_volume(),
            loss_at_center=e.meta.get("loss_at_center"),
        )

    @app.post("/api/contains", response_model=schemas.ContainsResponse)
    def post_contains(body: schemas.OmegaVector):
        v = to_run_coords(body)
        inside, q = state().ellipsoid.contains(v)
        return schemas.ContainsResponse(q=float(q), inside=bool(inside))

    @app.post("/api/project", response_model=schemas.ProjectResponse)
    def post_project(body: schemas.OmegaVector):
        v = to_run_coords(body)
        w, dist, inside_already = project_edit(state().ellipsoid, v)
        omega0, omega = to_bins(w)
        return schemas.ProjectResponse(
            omega0=omega0, omega=omega, distance=dist, inside_already=inside_already
        )

    @app.post("/api/monotone", response_model=schemas.MonotoneResponse)
    def post_monotone(body: schemas.MonotoneRequest):
        s = state()
        constraints = [(feature_id(c.feature), c.direction) for c in body.constraints]
        fixed = None
        if body.fixed:
            try:
                fixed = [(int(k), float(val)) for k, val in body.fixed.items()]
            except ValueError as exc:
                raise RashgamError(f"fixed keys must be coordinate indices: {exc}") from exc
            if any(not 0 <= i < s.ellipsoid.dim for i, _ in fixed):
                raise RashgamError("fixed coordinate index out of range")
        w, q, feasible = monotone_fit(s.ellipsoid, s.layout, constraints, fixed)
        omega0, omega = to_bins(w)
        return schemas.MonotoneResponse(omega0=omega0, omega=omega, q=q, feasible=feasible)

    @app.get("/api/vi", response_model=schemas.ViResponse)
    def get_vi(fix_others: bool = Query(default=False)):
        s = state()
        rows = []
        for j, name in enumerate(s.model.feature_names):
            r = vi_range(s.ellipsoid, s.layout, j, fix_others)
            blk = s.layout.block(j)
            center_vi = float(
                np.abs(s.ellipsoid.center[blk]) @ s.layout.pi[blk]
            )
            rows.append(
                schemas.ViRow(
                    feature=name,
                    vi_minus=r.vi_minus,
                    vi_plus=r.vi_plus,
                    vi_center=center_vi,
                    mode="fix-others" if fix_others else "free",
                )
            )
        return schemas.ViResponse(rows=rows)

    @app.post("/api/sample", response_model=schemas.SampleResponse)
    def post_sample(body: schemas.SampleRequest):
        s = state()
        rng = np.random.default_rng(body.seed)
        V = s.ellipsoid.sample(rng, body.n)
        omega0s = []
        omegas = []
        for row in V:
            o0, om = to_bins(row)
            omega0s.append(o0)
            omegas.append(om)
        return schemas.SampleResponse(omega0s=omega0s, omegas=omegas)

    @app.post("/api/jumps", response_model=schemas.JumpsResponse)
    def post_jumps(body: schemas.JumpsRequest):
        s = state()
        j = feature_id(body.feature)
        rng = np.random.default_rng(body.seed)
        rep = jump_analysis(s.ellipsoid, s.layout, j, body.k, body.n, body.tau, rng)
        return schemas.JumpsResponse(
            feature=body.feature,
            boundary=rep.boundary,
            n_samples=rep.n_samples,
            fraction_down=rep.fraction_down,
            fraction_up=rep.fraction_up,
            fraction_flat=rep.fraction_flat,
            tau=rep.tau,
        )

    return app
