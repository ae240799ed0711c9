"""
File Handling Utilities
Expression matrix, gene signature and model parameter files, plus
job-scoped output paths for the API.
"""
import io
import logging
import os
import re
import uuid
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import pandas as pd

from app.core.config import settings
from app.core.exceptions import (
    DataError,
    DuplicateGeneError,
    MalformedHeaderError,
    NonNumericCellError,
    ParamsFormatError,
    RaggedRowError,
    SignatureFormatError,
    UnknownLabelError,
)
from app.services.classifier import ModelParams
from app.services.data import ExpressionMatrix, GeneSignature
from app.services.models.base import ArchitectureSpec, ModelKind

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

LABEL_COLUMN = "label"
MISSING_TOKENS = ("", "NA")

# Parameter file: packed little-endian header followed by n_params float64 values
PARAMS_MAGIC = b"DPFLPRM1"
PARAMS_HEADER = np.dtype([
    ("magic", "S8"),
    ("kind", "u1"),
    ("input_dim", "<u4"),
    ("hidden_dim", "<u4"),
    ("n_params", "<u8"),
])
_KIND_CODES = {ModelKind.LOGISTIC_REGRESSION: 0, ModelKind.SHALLOW_MLP: 1}


def generate_job_id() -> str:
    """Generate a unique job ID using UUID4"""
    return str(uuid.uuid4())


def sanitize_filename(filename: str) -> str:
    """
    Sanitize filename to prevent directory traversal and special characters

    Args:
        filename: Original filename

    Returns:
        Sanitized filename safe for filesystem
    """
    filename = os.path.basename(filename)
    filename = re.sub(r'[^\w\s\.\-]', '', filename)
    return filename.replace(' ', '_')


def get_output_file_path(job_id: str, suffix: str = "frontier.csv") -> Path:
    """
    Output location of a job's artifact

    Args:
        job_id: Unique job identifier
        suffix: File name after the job prefix

    Returns:
        Path under the configured output directory
    """
    return settings.output_path / f"{job_id}_{sanitize_filename(suffix)}"


def resolve_dataset_path(name: PathLike) -> Path:
    """Absolute paths pass through; bare names resolve under the dataset directory"""
    path = Path(name)
    return path if path.is_absolute() or path.exists() else settings.dataset_path / path


def _sniff_delimiter(header_line: str) -> str:
    return "\t" if "\t" in header_line else ","


def _check_header(header: List[str]) -> None:
    if header.count(LABEL_COLUMN) != 1:
        raise MalformedHeaderError(f"header must contain exactly one '{LABEL_COLUMN}' column", line=1)
    if any(not name for name in header):
        raise MalformedHeaderError("empty column name in header", line=1)
    if len(header) < 2:
        raise MalformedHeaderError("header names no gene column", line=1)
    duplicated = pd.Index(header).duplicated()
    if duplicated.any():
        raise DuplicateGeneError(f"duplicate gene name '{header[int(np.argmax(duplicated))]}'", line=1)


def _read_cells(rows: pd.Series, delimiter: str, n_fields: int) -> pd.DataFrame:
    """Stripped string cells of the data rows, indexed by 1-based file line"""
    try:
        cells = pd.read_csv(
            io.StringIO("\n".join(rows)),
            sep=delimiter,
            header=None,
            dtype=str,
            keep_default_na=False,
        )
    except pd.errors.ParserError as exc:
        raise DataError(f"unreadable matrix rows: {str(exc).strip()}") from exc
    if cells.shape != (len(rows), n_fields):
        raise DataError("quoted fields and embedded line breaks are not supported")
    cells.index = rows.index + 1
    return cells.apply(lambda column: column.str.strip())


def load_matrix(path: PathLike) -> ExpressionMatrix:
    """
    Load a labeled expression matrix

    Header: gene names plus one 'label' column; comma or tab separated.
    Empty cells and NA mark missing entries, kept as NaN.

    Args:
        path: Matrix file

    Returns:
        ExpressionMatrix with sample_ids 0..n-1 in file order
    """
    path = Path(path)
    lines = pd.Series(path.read_text().splitlines(), dtype=object)
    if lines.empty or not lines.iloc[0].strip():
        raise MalformedHeaderError("missing header row", line=1)
    delimiter = _sniff_delimiter(lines.iloc[0])
    header = [name.strip() for name in lines.iloc[0].split(delimiter)]
    _check_header(header)

    rows = lines.iloc[1:]
    rows = rows[rows.str.strip() != ""]
    if rows.empty:
        raise DataError(f"{path} contains no samples")

    n_fields = rows.str.count(re.escape(delimiter)) + 1
    ragged = n_fields != len(header)
    if ragged.any():
        first = ragged.idxmax()
        raise RaggedRowError(f"expected {len(header)} fields, found {int(n_fields.loc[first])}", line=int(first) + 1)

    cells = _read_cells(rows, delimiter, len(header))
    cells.columns = header

    labels = cells.pop(LABEL_COLUMN)
    bad_label = ~labels.isin(["0", "1"])
    if bad_label.any():
        line = int(bad_label.idxmax())
        raise UnknownLabelError(f"label must be 0 or 1, found '{labels.loc[line]}'", line=line)

    missing = cells.isin(MISSING_TOKENS)
    numeric = cells.mask(missing).apply(pd.to_numeric, errors="coerce").to_numpy(dtype=float)
    bad_cell = ~missing.to_numpy() & ~np.isfinite(numeric)
    if bad_cell.any():
        row, col = np.argwhere(bad_cell)[0]
        kind = "non-numeric" if np.isnan(numeric[row, col]) else "non-finite"
        raise NonNumericCellError(
            f"{kind} value '{cells.iat[row, col]}' in column '{cells.columns[col]}'",
            line=int(cells.index[row]),
        )

    # exact per-token parse: write_matrix output reads back bit for bit
    values = cells.mask(missing, "nan").astype(float).to_numpy()
    logger.info(f"Loaded {values.shape[0]} samples x {values.shape[1]} genes from {path}")
    return ExpressionMatrix(
        values=values,
        gene_names=tuple(cells.columns),
        labels=labels.astype(int).to_numpy(),
    )


def write_matrix(matrix: ExpressionMatrix, path: PathLike) -> Path:
    """Write a matrix in the comma-separated load_matrix format; missing entries become NA"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(matrix.values, columns=list(matrix.gene_names))
    frame = frame.map(lambda value: repr(float(value))).mask(frame.isna(), "NA")
    frame[LABEL_COLUMN] = matrix.labels.astype(int)
    frame.to_csv(path, index=False, lineterminator="\n")
    return path


def load_signature(path: PathLike, name: Optional[str] = None) -> GeneSignature:
    """
    Load a gene signature: one gene per line, '#' starts a comment

    Args:
        path: Signature file
        name: Signature name (defaults to the file stem)

    Returns:
        GeneSignature in file order
    """
    path = Path(path)
    genes: List[str] = []
    seen = set()
    with open(path) as handle:
        for line, text in enumerate(handle, start=1):
            gene = text.split("#", 1)[0].strip()
            if not gene:
                continue
            if len(gene.split()) != 1:
                raise SignatureFormatError(f"expected one gene name, found '{gene}'", line=line)
            if gene in seen:
                raise SignatureFormatError(f"duplicate gene '{gene}'", line=line)
            seen.add(gene)
            genes.append(gene)
    if not genes:
        raise SignatureFormatError(f"{path} lists no genes")
    return GeneSignature(name=name or path.stem, genes=tuple(genes))


def write_signature(signature: GeneSignature, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(f"# {signature.name}\n" + "".join(f"{gene}\n" for gene in signature.genes))
    return path


def save_params(params: ModelParams, path: PathLike) -> Path:
    """
    Write model parameters

    Layout: magic 'DPFLPRM1' (8 bytes), kind u8 (0 = logistic regression,
    1 = shallow MLP), input_dim u32, hidden_dim u32 (0 when absent),
    n_params u64, then n_params float64; all little-endian.
    """
    spec = params.spec
    header = np.array(
        [(PARAMS_MAGIC, _KIND_CODES[spec.kind], spec.input_dim, spec.hidden_dim or 0, spec.n_params)],
        dtype=PARAMS_HEADER,
    )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(header.tobytes() + params.theta.astype("<f8").tobytes())
    return path


def load_params(path: PathLike) -> ModelParams:
    """Read a save_params file back"""
    data = Path(path).read_bytes()
    if len(data) < PARAMS_HEADER.itemsize:
        raise ParamsFormatError(f"{path}: truncated header")
    header = np.frombuffer(data[:PARAMS_HEADER.itemsize], dtype=PARAMS_HEADER)[0]
    if bytes(header["magic"]) != PARAMS_MAGIC:
        raise ParamsFormatError(f"{path}: not a parameter file")

    kinds = {code: kind for kind, code in _KIND_CODES.items()}
    kind_code = int(header["kind"])
    if kind_code not in kinds:
        raise ParamsFormatError(f"{path}: unknown model kind {kind_code}")
    hidden_dim = int(header["hidden_dim"]) or None
    spec = ArchitectureSpec(kind=kinds[kind_code], input_dim=int(header["input_dim"]), hidden_dim=hidden_dim)

    n_params = int(header["n_params"])
    if n_params != spec.n_params:
        raise ParamsFormatError(f"{path}: header declares {n_params} parameters, architecture needs {spec.n_params}")
    body = data[PARAMS_HEADER.itemsize:]
    if len(body) != 8 * n_params:
        raise ParamsFormatError(f"{path}: expected {8 * n_params} bytes of parameters, found {len(body)}")
    return ModelParams(theta=np.frombuffer(body, dtype="<f8").astype(float), spec=spec)
