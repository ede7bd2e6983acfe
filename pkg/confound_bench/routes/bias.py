"""routes/bias.py – POST /table"""
from fastapi import APIRouter, HTTPException

from ..deps import get_experiment_handler
from ..models import BiasCellOut, TableRequest, TableResponse

router = APIRouter(tags=["Bias"])


@router.post("/table", response_model=TableResponse)
async def table(req: TableRequest):
    """All 24 analytic bias cells at req.base.n. LMM constants are those of the base scenario."""
    try:
        out = await get_experiment_handler().table_async(req.base, req.policy, req.calibration)
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))
    base_plims = out.plims.get(req.base.confounder_mode) if req.base.confounder_mode != "none" else None
    return TableResponse(
        cells=[BiasCellOut(**c.__dict__) for c in out.cells],
        sigma_de2=base_plims.sigma_de2 if base_plims else 0.0,
        sigma_chie2=base_plims.sigma_chie2 if base_plims else 0.0,
    )
