"""
Application Configuration
Centralized configuration management using Pydantic Settings
"""
from pydantic_settings import BaseSettings
from typing import List, Tuple
from pathlib import Path


class Settings(BaseSettings):
    """Application settings loaded from environment variables"""

    # Application
    APP_NAME: str = "DP Federated Training Toolkit"
    APP_VERSION: str = "1.0.0"
    DEBUG: bool = False

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "%(asctime)s %(levelname)s %(name)s: %(message)s"

    # Storage Paths
    BASE_DIR: Path = Path(__file__).resolve().parent.parent.parent
    DATASET_DIR: str = "storage/datasets"
    OUTPUT_DIR: str = "storage/outputs"
    FRONTIER_FILENAME: str = "frontier.csv"

    @property
    def dataset_path(self) -> Path:
        """Get absolute dataset directory path"""
        return self.BASE_DIR / self.DATASET_DIR

    @property
    def output_path(self) -> Path:
        """Get absolute output directory path"""
        return self.BASE_DIR / self.OUTPUT_DIR

    @property
    def frontier_path(self) -> Path:
        """Default frontier CSV location"""
        return self.output_path / self.FRONTIER_FILENAME

    # Accountant
    # Empty means the built-in default grid (see app.services.accountant.DEFAULT_ALPHA_ORDERS)
    ALPHA_GRID: str = ""
    SERIES_TOLERANCE: float = 1e-12
    SERIES_MAX_TERMS: int = 10_000
    NEGATIVE_LOG_SLACK: float = 1e-12

    @property
    def alpha_grid_list(self) -> List[float]:
        """Get configured Renyi orders (empty list = use the default grid)"""
        return [float(a) for a in self.ALPHA_GRID.split(",") if a.strip()]

    # Models
    MLP_HIDDEN_DIM: int = 16
    CLASSIFICATION_THRESHOLD: float = 0.5

    # Experiment harness
    DELTA_GRID: str = "1e-5,1e-4,1e-3"
    DEFAULT_DELTA: float = 1e-5
    N_SEEDS: int = 50
    BASE_SEED: int = 0
    N_JOBS: int = -1  # joblib workers for the in-process (point x seed) map; -1 = every core
    SPLIT_FRACTIONS: str = "client1:0.4,client2:0.4,validation:0.2"
    HOLDOUT_FRACTION: float = 0.1
    PLOT_EPSILON_GRID: str = "0.1,0.2,0.3,0.5,0.75,1,1.5,2,3,5,7.5,10,15,20,30,50,100"

    @property
    def delta_grid_list(self) -> List[float]:
        """Get list of failure probabilities attached to frontier records"""
        return [float(d) for d in self.DELTA_GRID.split(",") if d.strip()]

    @property
    def split_fractions_list(self) -> List[Tuple[str, float]]:
        """Get (part name, fraction) pairs of the per-seed split"""
        pairs = []
        for item in self.SPLIT_FRACTIONS.split(","):
            name, fraction = item.split(":")
            pairs.append((name.strip(), float(fraction)))
        return pairs

    @property
    def plot_epsilon_grid_list(self) -> List[float]:
        """Get epsilon grid used for plot data"""
        return [float(e) for e in self.PLOT_EPSILON_GRID.split(",") if e.strip()]

    # CORS
    CORS_ORIGINS: str = "http://localhost:3000,http://localhost:5173"

    @property
    def cors_origins_list(self) -> List[str]:
        """Get list of allowed CORS origins"""
        return [origin.strip() for origin in self.CORS_ORIGINS.split(",")]

    # Redis & Celery Configuration
    REDIS_URL: str = "redis://localhost:6379/0"
    CELERY_BROKER_URL: str = ""
    CELERY_RESULT_BACKEND: str = ""

    @property
    def celery_broker_url(self) -> str:
        """Get Celery broker URL (defaults to REDIS_URL)"""
        return self.CELERY_BROKER_URL or self.REDIS_URL

    @property
    def celery_result_backend(self) -> str:
        """Get Celery result backend URL (defaults to REDIS_URL)"""
        return self.CELERY_RESULT_BACKEND or self.REDIS_URL

    # Celery Task Configuration
    CELERY_TASK_ALWAYS_EAGER: bool = True  # run tasks in-process unless workers are deployed
    DISTRIBUTE_GRID_POINTS: bool = False
    CELERY_TASK_TRACK_STARTED: bool = True
    CELERY_TASK_TIME_LIMIT: int = 6 * 3600
    CELERY_TASK_SOFT_TIME_LIMIT: int = 5 * 3600
    CELERY_RESULT_EXPIRES: int = 86400  # 24 hours
    CELERY_TASK_SERIALIZER: str = "json"
    CELERY_RESULT_SERIALIZER: str = "json"
    CELERY_ACCEPT_CONTENT: List[str] = ["json"]

    class Config:
        env_file = ".env"
        case_sensitive = True
        extra = "ignore"  # Ignore extra fields from .env


# Global settings instance
settings = Settings()


def create_directories():
    """Create storage directories if they don't exist"""
    settings.dataset_path.mkdir(parents=True, exist_ok=True)
    settings.output_path.mkdir(parents=True, exist_ok=True)
