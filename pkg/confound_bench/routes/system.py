"""routes/system.py – /health, /presets"""
from datetime import datetime
from fastapi import APIRouter

from .. import __version__
from ..core.presets import preset_names

router = APIRouter(tags=["System"])


@router.get("/health")
async def health():
    return {"status": "ok", "time": datetime.now().isoformat(), "version": __version__}


@router.get("/presets")
async def presets():
    return {"presets": preset_names()}
