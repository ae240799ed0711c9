"""
Shared fixtures: small synthetic datasets and their files on disk.
"""
import os

# Tasks run in-process during tests; must be set before app.core.config is imported
os.environ.setdefault("CELERY_TASK_ALWAYS_EAGER", "true")
os.environ.setdefault("DISTRIBUTE_GRID_POINTS", "false")
os.environ.setdefault("N_JOBS", "2")

import pytest  # noqa: E402

from app.services.data import GeneSignature, synthesize_dataset  # noqa: E402
from app.services.frontier import HyperParams  # noqa: E402
from app.services.harness import ExperimentDataset  # noqa: E402
from app.services.models.base import ModelKind  # noqa: E402
from app.utils.file_handler import write_matrix, write_signature  # noqa: E402

SIGNATURE_NAME = "toy"


@pytest.fixture(scope="session")
def toy_signature():
    return GeneSignature(name=SIGNATURE_NAME, genes=("SIG00000", "SIG00001", "SIG00002", "SIG00003", "SIG00004"))


@pytest.fixture(scope="session")
def toy_matrix(toy_signature):
    """60 samples (20 normal, 40 tumor), 12 genes, strong signal on the 5 signature genes"""
    return synthesize_dataset(
        n_normal=20,
        n_tumor=40,
        n_genes=12,
        signal_genes=toy_signature,
        effect_size=4.0,
        missing_rate=0.0,
        seed=7,
    )


@pytest.fixture(scope="session")
def toy_dataset(toy_matrix, toy_signature):
    return ExperimentDataset(matrix=toy_matrix, signatures={toy_signature.name: toy_signature})


@pytest.fixture
def toy_files(tmp_path, toy_matrix, toy_signature):
    """(matrix path, signature path) written to a temporary directory"""
    matrix_path = write_matrix(toy_matrix, tmp_path / "toy.csv")
    signature_path = write_signature(toy_signature, tmp_path / f"{SIGNATURE_NAME}.txt")
    return matrix_path, signature_path


@pytest.fixture
def toy_hyperparams():
    return HyperParams(
        signature=SIGNATURE_NAME,
        arch=ModelKind.LOGISTIC_REGRESSION,
        q=0.5,
        eta=0.5,
        sigma=1.0,
        clip_c=1.0,
        n_rounds=2,
        local_steps=3,
    )
