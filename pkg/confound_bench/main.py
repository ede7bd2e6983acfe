"""
main.py – FastAPI app entry point (slim wire-up only).
Only routes and lifespan. No business logic.
"""
import logging
from contextlib import asynccontextmanager
from dotenv import load_dotenv
load_dotenv()

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from . import __version__
from .routes import bias, experiments, system
from .deps import get_harness

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    logger.info("confound-bench API ready (workers=%s)", get_harness().workers)
    yield
    logger.info("Shutdown.")


app = FastAPI(
    title="confound-bench API",
    description="Analytic and Monte Carlo bias of OLS, FE, LMM and preference-based IV under unmeasured confounding.",
    version=__version__,
    lifespan=lifespan,
)

app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"])

app.include_router(system.router)
app.include_router(bias.router)
app.include_router(experiments.router)
