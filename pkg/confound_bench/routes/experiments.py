"""routes/experiments.py – POST /experiments, POST /experiments/preset/{name}"""
from typing import Any, Optional

from fastapi import APIRouter, Body, HTTPException, Query

from ..core.harness import MonteCarloReport
from ..core.presets import expand_preset
from ..deps import get_experiment_handler
from ..models import ExperimentResponse, ExperimentRowOut, ExperimentSpec

router = APIRouter(prefix="/experiments", tags=["Experiments"])


def _response(spec: ExperimentSpec, report: MonteCarloReport) -> ExperimentResponse:
    rows = [
        ExperimentRowOut(
            scenario_axis=r.scenario_axis,
            axis_value=r.axis_value,
            method=r.method,
            mean_bias=r.mean_bias,
            mc_se=r.mc_se,
            analytic_bias=r.analytic_bias,
            agreement=r.agreement,
            reps=r.reps,
            truncations=r.truncations,
            weak_iv_count=r.weak_iv_count,
        )
        for r in report.rows
    ]
    return ExperimentResponse(
        name=spec.name,
        analytic_only=report.analytic_only,
        all_agree=report.all_agree,
        rows=rows,
        grid_note=spec.grid_note,
    )


@router.post("", response_model=ExperimentResponse)
async def run_experiment(payload: dict[str, Any] = Body(...)):
    """Run an experiment object (same schema as a config file). Nothing is written to disk."""
    handler = get_experiment_handler()
    try:
        spec = handler.parse_payload(payload)
        report = await handler.build_report_async(spec)
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))
    return _response(spec, report)


@router.post("/preset/{name}", response_model=ExperimentResponse)
async def run_preset(
    name: str,
    reps: Optional[int] = Query(default=None, ge=2),
    empirical: bool = Query(default=False),
):
    try:
        spec = expand_preset(name, reps=reps, empirical=empirical)
    except ValueError as e:
        raise HTTPException(status_code=404, detail=str(e))
    try:
        report = await get_experiment_handler().build_report_async(spec)
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))
    return _response(spec, report)
