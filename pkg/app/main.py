"""
DP Federated Training API
FastAPI application exposing the privacy accountant, frontier selection and
grid-search jobs
"""
import logging
from contextlib import asynccontextmanager

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from app.core.config import settings, create_directories
from app.api.routes import experiments, health, privacy

logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    """
    Application lifespan events
    Runs on startup and shutdown
    """
    logger.info(f"Starting {settings.APP_NAME} v{settings.APP_VERSION}")
    create_directories()
    mode = "in-process (eager)" if settings.CELERY_TASK_ALWAYS_EAGER else f"workers via {settings.celery_broker_url}"
    logger.info(f"Grid searches run {mode}; frontier default {settings.frontier_path}")

    yield

    logger.info("Shutting down API")


# Create FastAPI app
app = FastAPI(
    title=settings.APP_NAME,
    version=settings.APP_VERSION,
    description="Differentially private two-client federated training: accountant, frontier selection, grid search",
    lifespan=lifespan,
    docs_url="/docs",
    redoc_url="/redoc"
)

# CORS Configuration
app.add_middleware(
    CORSMiddleware,
    allow_origins=settings.cors_origins_list,
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# Include routers
app.include_router(health.router)
app.include_router(privacy.router)
app.include_router(experiments.router)


@app.get("/", tags=["root"])
def root():
    """Root endpoint"""
    return {
        "message": f"{settings.APP_NAME} is running",
        "version": settings.APP_VERSION,
        "docs": "/docs",
        "health": "/health"
    }
