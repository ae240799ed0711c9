"""
Command Line Interface
Subcommands: accountant, train, synth, grid, select, plot-data.

Run with ``python -m app.cli <subcommand> --help``. Tables go to standard
output as CSV; logs go to standard error.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import pandas as pd
from pydantic import ValidationError

from app.core.config import settings
from app.core.exceptions import DpFlError
from app.services.accountant import AlphaGrid, SgmParams, best_dp_budget, budget_table
from app.services.classifier import evaluate_accuracy
from app.services.data import GeneSignature, holdout_split, impute_zeros, select_features, synthesize_dataset
from app.services.dp_sgd import DpSgdConfig
from app.services.federated import FlConfig, run_cyclic_fl
from app.services.frontier import FRONTIER_COLUMNS, BudgetTarget, select_params
from app.services.harness import ExperimentDataset, emit_plot_data, grid_search, run_from_budget
from app.services.models.base import ArchitectureSpec, ModelKind
from app.utils.file_handler import load_matrix, load_signature, save_params, write_matrix, write_signature
from app.utils.frontier_store import load_grid_config, read_frontier

logger = logging.getLogger(__name__)

PLANTED_GENE_FORMAT = "SIG{:05d}"


def _float_list(text: str) -> List[float]:
    return [float(item) for item in text.split(",") if item.strip()]


def _path_list(text: str) -> List[Path]:
    return [Path(item.strip()) for item in text.split(",") if item.strip()]


def _print_frame(frame: pd.DataFrame) -> None:
    frame.to_csv(sys.stdout, index=False, lineterminator="\n", float_format="%.10g")


def cmd_accountant(args: argparse.Namespace) -> int:
    grid = AlphaGrid.parse(args.alpha_grid) if args.alpha_grid else None
    params = SgmParams(q=args.q, sigma=args.sigma)
    point, alpha = best_dp_budget(params, args.steps, args.delta, grid)
    table = budget_table(params, args.steps, args.delta, grid)

    _print_frame(pd.DataFrame([{"epsilon": point.epsilon, "delta": point.delta, "alpha": alpha}]))
    sys.stdout.write("\n")
    _print_frame(pd.DataFrame(
        [{"alpha": r.alpha, "rdp_epsilon": r.rdp_epsilon, "dp_epsilon": r.dp_epsilon} for r in table],
        columns=["alpha", "rdp_epsilon", "dp_epsilon"],
    ))
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    client_files = _path_list(args.clients)
    if len(client_files) != 2:
        raise argparse.ArgumentTypeError("--clients takes exactly two files")
    signature = load_signature(args.signature)
    clients = [impute_zeros(select_features(load_matrix(path), signature)) for path in client_files]

    if args.sigma == 0.0:
        logger.warning("sigma=0 is a non-private run; reporting epsilon=inf")
    cfg = FlConfig(
        n_rounds=args.rounds,
        local_steps=args.local_steps,
        dp=DpSgdConfig(q=args.q, eta=args.eta, sigma=args.sigma, clip_c=args.clip),
        arch=ArchitectureSpec(kind=args.arch, input_dim=clients[0].n_genes, hidden_dim=args.hidden_dim),
        master_seed=args.seed,
    )
    result = run_cyclic_fl(
        cfg,
        clients[0].to_samples(keep_ids=False),
        clients[1].to_samples(keep_ids=False),
        args.delta,
    )

    row = {}
    if args.test:
        test = impute_zeros(select_features(load_matrix(args.test), signature))
        row["accuracy"] = evaluate_accuracy(result.final_params, test.to_samples())
    row["epsilon"] = result.per_client_budget.epsilon
    row["delta"] = result.per_client_budget.delta
    _print_frame(pd.DataFrame([row]))

    if args.save_params:
        save_params(result.final_params, args.save_params)
        logger.info(f"Saved parameters to {args.save_params}")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    if args.signature:
        signature = load_signature(args.signature)
    else:
        signature = GeneSignature(
            name="planted",
            genes=tuple(PLANTED_GENE_FORMAT.format(i) for i in range(args.n_signal)),
        )
    matrix = synthesize_dataset(
        n_normal=args.n_normal,
        n_tumor=args.n_tumor,
        n_genes=args.n_genes,
        signal_genes=signature,
        effect_size=args.effect_size,
        missing_rate=args.missing_rate,
        seed=args.seed,
    )
    if args.test_out:
        train, test = holdout_split(matrix, args.test_fraction, seed=args.seed)
        write_matrix(train, args.out)
        write_matrix(test, args.test_out)
        logger.info(f"Wrote {train.n_samples} training and {test.n_samples} holdout samples")
    else:
        write_matrix(matrix, args.out)
        logger.info(f"Wrote {matrix.n_samples} samples x {matrix.n_genes} genes to {args.out}")
    if args.signature_out:
        write_signature(signature, args.signature_out)
    return 0


def cmd_grid(args: argparse.Namespace) -> int:
    dataset = ExperimentDataset.from_files(args.dataset, _path_list(args.signatures))
    records = grid_search(
        load_grid_config(args.grid_file),
        dataset,
        n_seeds=args.seeds,
        base_seed=args.base_seed,
        out_path=args.out,
        deltas=_float_list(args.deltas) if args.deltas else None,
        distribute=args.distribute or None,
    )
    logger.info(f"{len(records)} frontier record(s) written to {args.out}")
    return 0


def cmd_select(args: argparse.Namespace) -> int:
    target = BudgetTarget(epsilon_t=args.eps, delta_t=args.delta)
    if args.dataset:
        dataset = ExperimentDataset.from_files(args.dataset, _path_list(args.signatures or ""))
        run = run_from_budget(target, args.frontier, dataset, n_seeds=args.seeds, base_seed=args.base_seed)
        _print_frame(pd.DataFrame([{
            **run.hyperparams.model_dump(mode="json"),
            "epsilon": run.budget.epsilon,
            "delta": run.budget.delta,
            "mean_accuracy": run.accuracy,
            "std_accuracy": run.std_accuracy,
        }]))
        return 0

    record = select_params(read_frontier(args.frontier), target)
    _print_frame(pd.DataFrame([record.model_dump(mode="json")], columns=FRONTIER_COLUMNS))
    return 0


def cmd_plot_data(args: argparse.Namespace) -> int:
    rows = emit_plot_data(
        read_frontier(args.frontier),
        deltas=_float_list(args.deltas) if args.deltas else None,
        out_path=args.out,
        epsilon_grid=_float_list(args.eps_grid) if args.eps_grid else None,
    )
    logger.info(f"{len(rows)} plot row(s) written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="python -m app.cli",
        description="Differentially private two-client federated training toolkit",
    )
    parser.add_argument("--log-level", default=settings.LOG_LEVEL, help="Logging level")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("accountant", help="Best (epsilon, delta) and the per-order budget table")
    p.add_argument("--q", type=float, required=True, help="Sampling rate")
    p.add_argument("--sigma", type=float, required=True, help="Noise multiplier")
    p.add_argument("--steps", type=int, required=True, help="Number of composed steps")
    p.add_argument("--delta", type=float, default=settings.DEFAULT_DELTA)
    p.add_argument("--alpha-grid", default=None, help="Comma-separated Renyi orders")
    p.set_defaults(func=cmd_accountant)

    p = sub.add_parser("train", help="One cyclic federated run")
    p.add_argument("--clients", required=True, help="Client 1 and client 2 matrix files, comma-separated")
    p.add_argument("--signature", required=True, help="Gene signature file")
    p.add_argument("--arch", type=ModelKind, default=ModelKind.LOGISTIC_REGRESSION,
                   choices=list(ModelKind), help="Model family")
    p.add_argument("--hidden-dim", type=int, default=None, help="MLP hidden units")
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--clip", type=float, required=True)
    p.add_argument("--rounds", type=int, required=True)
    p.add_argument("--local-steps", type=int, required=True)
    p.add_argument("--seed", type=int, default=settings.BASE_SEED)
    p.add_argument("--delta", type=float, default=settings.DEFAULT_DELTA)
    p.add_argument("--test", default=None, help="Test matrix for the reported accuracy")
    p.add_argument("--save-params", default=None, help="Write the final parameters to this file")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("synth", help="Write a synthetic expression dataset")
    p.add_argument("--n-normal", type=int, default=61)
    p.add_argument("--n-tumor", type=int, default=529)
    p.add_argument("--n-genes", type=int, default=1000)
    p.add_argument("--n-signal", type=int, default=69, help="Planted signal genes when --signature is absent")
    p.add_argument("--signature", default=None, help="Use this signature's genes as the signal genes")
    p.add_argument("--effect-size", type=float, default=1.0)
    p.add_argument("--missing-rate", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=settings.BASE_SEED)
    p.add_argument("--out", required=True, help="Matrix file (training part when --test-out is given)")
    p.add_argument("--test-out", default=None, help="Also write a stratified holdout to this file")
    p.add_argument("--test-fraction", type=float, default=settings.HOLDOUT_FRACTION)
    p.add_argument("--signature-out", default=None, help="Write the signal gene signature to this file")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("grid", help="Grid search writing a frontier CSV")
    p.add_argument("--grid-file", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--signatures", required=True, help="Signature files, comma-separated")
    p.add_argument("--seeds", type=int, default=settings.N_SEEDS)
    p.add_argument("--base-seed", type=int, default=settings.BASE_SEED)
    p.add_argument("--deltas", default=None, help="Comma-separated delta grid")
    p.add_argument("--out", default=str(settings.frontier_path))
    p.add_argument("--distribute", action="store_true", help="Send grid points to Celery workers")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("select", help="Frontier record for a budget target")
    p.add_argument("--frontier", default=str(settings.frontier_path))
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--dataset", default=None, help="Re-train the selected configuration on this matrix")
    p.add_argument("--signatures", default=None, help="Signature files for the re-run, comma-separated")
    p.add_argument("--seeds", type=int, default=None)
    p.add_argument("--base-seed", type=int, default=None)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("plot-data", help="Best accuracy per (delta, epsilon, signature)")
    p.add_argument("--frontier", default=str(settings.frontier_path))
    p.add_argument("--deltas", default=None, help="Comma-separated delta grid")
    p.add_argument("--eps-grid", default=None, help="Comma-separated epsilon grid")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot_data)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format=settings.LOG_FORMAT, stream=sys.stderr)
    try:
        return args.func(args)
    except (DpFlError, ValidationError, argparse.ArgumentTypeError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
