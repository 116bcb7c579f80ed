# This file is part of topolearn.
#
# See the COPYRIGHT file at the top-level directory of this distribution
# for details of code ownership.
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <https://www.gnu.org/licenses/>.

"""Command line interface.

Every command writes its artifacts to an output directory together with
``run.json``, the `RunConfig` that produced them.
"""

__all__ = [
    "RUN_CONFIG_NAME",
    "SPLITS",
    "RunConfig",
    "make_parser",
    "load_split",
    "cmd_generate",
    "cmd_tune",
    "cmd_solve",
    "cmd_train",
    "cmd_infer",
    "cmd_eval",
    "cmd_compare",
    "main",
    "run",
]

import argparse
import csv
import enum
import json
import logging
import pathlib
import sys
import typing

import numpy as np

from . import __version__, graph_core
from .batch import map_ordered
from .container import FORMAT_VERSION, dump_json, load_container, save_container
from .datagen import (
    DEFAULT_N_SIGNALS,
    DEFAULT_SIGMA,
    Dataset,
    GraphFamilySpec,
    build_dataset,
    distances_from_csv,
    read_dataset,
    write_dataset,
)
from .enums import EdgeWeighting, ExitCode, GraphFamily, ModelKind, SolverKind
from .errors import (
    ConfigurationError,
    ContractError,
    DataError,
    MetricError,
    NumericError,
    ValidationError,
)
from .metrics import (
    EvalReport,
    evaluate_estimates,
    gmse,
    layer_gmse,
    spearman_stability,
    write_degree_histogram_csv,
    write_heatmap_csv,
    write_layer_curve_csv,
)
from .schema_registry import validate
from .solvers import (
    DEFAULT_ALPHA_GRID,
    DEFAULT_BETA_GRID,
    SolverConfig,
    grid_scores,
    select_grid_point,
    solve_batch,
)
from .trainer import TrainConfig, train
from .unroll_net import DEFAULT_INIT, DEFAULT_LAYERS, Checkpoint, build_model, forward, infer

RUN_CONFIG_NAME = "run.json"
SOLVER_CONFIG_NAME = "solver_config.json"
SPLITS = ("train", "val", "test")
MODEL_NAMES = ("pds", "admm", "unroll", "recurrent", "l2g")

log = logging.getLogger(__name__)


class RunConfig:
    """Provenance record of a command run.

    Parameters
    ----------
    command : `str`
        Subcommand name.
    arguments : `dict`
        Parsed arguments, enough to rerun the command.
    version : `str`
        Package version.
    """

    def __init__(
        self, command: str, arguments: typing.Dict[str, typing.Any], version: str = __version__
    ) -> None:
        self.command = command
        self.arguments = arguments
        self.version = version

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        arguments = {}
        for key, value in sorted(vars(args).items()):
            if key in ("func", "command"):
                continue
            arguments[key] = _jsonable(value)
        return cls(args.command, arguments)

    def as_dict(self) -> typing.Dict[str, typing.Any]:
        return dict(command=self.command, arguments=self.arguments, version=self.version)

    @classmethod
    def from_dict(cls, data: typing.Dict[str, typing.Any]) -> "RunConfig":
        validate(data, "run_config")
        return cls(data["command"], data["arguments"], data["version"])

    def write(self, out: pathlib.Path) -> pathlib.Path:
        validate(self.as_dict(), "run_config")
        path = out / RUN_CONFIG_NAME
        _write_text(path, dump_json(self.as_dict()))
        return path


def _jsonable(value: typing.Any) -> typing.Any:
    if isinstance(value, pathlib.Path):
        return str(value)
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, (list, tuple)):
        return [_jsonable(item) for item in value]
    return value


def _write_text(path: pathlib.Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as e:
        raise DataError(f"Could not write {str(path)!r}: {e}") from e


def _read_json(path: pathlib.Path) -> typing.Dict[str, typing.Any]:
    try:
        data = json.loads(pathlib.Path(path).read_text())
    except (OSError, json.decoder.JSONDecodeError) as e:
        raise DataError(f"Could not read {str(path)!r}: {e}") from e
    if not isinstance(data, dict):
        raise DataError(f"{str(path)!r} is not a json-encoded dict.")
    return data


def _float_list(text: str) -> typing.List[float]:
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"Expected comma separated numbers; got {text!r}.") from e


def _key_path(text: str) -> typing.Tuple[str, pathlib.Path]:
    key, sep, path = text.partition("=")
    if not sep or not key or not path:
        raise argparse.ArgumentTypeError(f"Expected NAME=PATH; got {text!r}.")
    return key, pathlib.Path(path)


def _key_value(text: str) -> typing.Tuple[str, typing.Any]:
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"Expected NAME=VALUE; got {text!r}.")
    try:
        return key, json.loads(value)
    except json.decoder.JSONDecodeError:
        return key, value


def load_split(root: pathlib.Path, split: str) -> Dataset:
    """Read split ``split`` of a generated dataset directory, or ``root``
    itself if it is a single dataset container."""
    root = pathlib.Path(root)
    if (root / "manifest.json").exists():
        return read_dataset(root)
    return read_dataset(root / split)


def _load_solver_config(path: pathlib.Path) -> SolverConfig:
    return SolverConfig.from_dict(_read_json(path))


def cmd_generate(args: argparse.Namespace) -> None:
    """Generate the train, validation and test splits of a dataset."""
    spec = GraphFamilySpec(
        args.family,
        args.num_nodes,
        dict(args.param),
        args.density,
        args.weighting,
    )
    counts = dict(train=args.train, val=args.val, test=args.test)
    for split_id, split in enumerate(SPLITS):
        dataset = build_dataset(
            spec,
            counts[split],
            args.n_signals,
            args.sigma,
            args.seed,
            split,
            split_id,
            args.threads,
        )
        write_dataset(dataset, args.out / split)
    log.info(f"Wrote {spec!r} splits {counts} to {str(args.out)!r}.")


def cmd_tune(args: argparse.Namespace) -> None:
    """Grid search (alpha, beta) of a solver on the training split."""
    dataset = load_split(args.dataset, args.split)
    base = SolverConfig(tol=args.tol, max_iter=args.max_iter)
    alphas = np.sort(np.asarray(args.alphas, dtype=np.float64))
    betas = np.sort(np.asarray(args.betas, dtype=np.float64))
    scores = grid_scores(dataset.samples, alphas, betas, args.solver, base, args.threads)
    cfg = select_grid_point(scores, alphas, betas, base)
    args.out.mkdir(parents=True, exist_ok=True)
    _write_text(args.out / SOLVER_CONFIG_NAME, dump_json(cfg.as_dict()))
    try:
        with open(args.out / "grid.csv", "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["alpha", "beta", "gmse"])
            for i, alpha in enumerate(alphas):
                for j, beta in enumerate(betas):
                    writer.writerow(
                        [repr(float(alpha)), repr(float(beta)), repr(float(scores[i, j]))]
                    )
    except OSError as e:
        raise DataError(f"Could not write grid report: {e}") from e
    log.info(f"Tuned {args.solver.value}: {cfg!r}")


def _solver_estimates(
    dataset: Dataset, cfg: SolverConfig, kind: SolverKind, threads: int
) -> typing.Tuple[typing.List[np.ndarray], typing.List[int]]:
    results = solve_batch([s.y for s in dataset], cfg, kind, threads)
    unconverged = sum(not r.converged for r in results)
    if unconverged:
        log.warning(
            f"{kind.value}: {unconverged} of {len(results)} samples hit "
            f"max_iter={cfg.max_iter} before tol={cfg.tol}."
        )
    return [r.w for r in results], [r.iterations for r in results]


def cmd_solve(args: argparse.Namespace) -> None:
    """Solve every sample of a split with a classical solver."""
    dataset = load_split(args.dataset, args.split)
    if args.config is not None:
        cfg = _load_solver_config(args.config)
    else:
        cfg = SolverConfig(args.alpha, args.beta, tol=args.tol, max_iter=args.max_iter)
    estimates, iterations = _solver_estimates(dataset, cfg, args.solver, args.threads)
    groundtruths = [s.w for s in dataset]
    try:
        score: typing.Optional[float] = gmse(estimates, groundtruths)
    except MetricError as e:
        log.warning(f"No GMSE for {args.split}: {e}")
        score = None
    manifest = dict(
        format_version=FORMAT_VERSION,
        kind="estimates",
        source=f"{args.solver.value}:{args.dataset}/{args.split}",
        num_nodes=dataset.num_nodes,
        count=len(dataset),
        config=cfg.as_dict(),
        iterations=iterations,
        gmse=score,
    )
    k = graph_core.num_edges(dataset.num_nodes)
    save_container(
        args.out,
        manifest,
        dict(w=np.array(estimates).reshape(len(dataset), k)),
        "estimates_manifest",
    )
    log.info(f"{args.solver.value} GMSE on {args.split}: {score}")


def cmd_train(args: argparse.Namespace) -> None:
    """Train an unrolled model and save the selected checkpoint."""
    train_set = load_split(args.dataset, "train")
    val_set = load_split(args.dataset, "val")
    init = DEFAULT_INIT
    if args.init_config is not None:
        tuned = _load_solver_config(args.init_config)
        init = (tuned.alpha, tuned.beta, tuned.step_size(train_set.num_nodes))
    config = TrainConfig(
        lr0=args.lr0,
        lr_decay=args.lr_decay,
        batch_size=args.batch_size,
        epochs=args.epochs,
        patience=args.patience,
        tau=args.tau,
        beta_kl=args.beta_kl,
        seed=args.seed,
        eta=args.eta,
    )
    model = build_model(
        args.model,
        layers=args.layers,
        num_nodes=train_set.num_nodes,
        enhance=args.enhance,
        seed=args.seed,
        init=init,
        eta=args.eta,
    )
    args.out.mkdir(parents=True, exist_ok=True)
    result = train(
        train_set.samples,
        val_set.samples,
        model,
        config,
        log_path=args.out / "train_log.jsonl",
        threads=args.threads,
        audit=not args.no_audit,
    )
    result.checkpoint.save(args.out / "checkpoint")
    if result.audit is not None:
        _write_text(args.out / "audit.json", dump_json(result.audit.as_dict()))


def _checkpoint_model(path: pathlib.Path) -> Checkpoint:
    checkpoint = Checkpoint.load(path)
    log.info(
        f"Loaded {checkpoint.model.kind.value} checkpoint from epoch {checkpoint.epoch} "
        f"(validation GMSE {checkpoint.val_gmse})."
    )
    return checkpoint


def _write_edges(path: pathlib.Path, names: typing.Sequence[str], w: np.ndarray, eta: float) -> None:
    rows, cols = graph_core.edge_indices(len(names))
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["source", "target", "weight"])
            for i, j, value in zip(rows, cols, w):
                if value > eta:
                    writer.writerow([names[i], names[j], repr(float(value))])
    except OSError as e:
        raise DataError(f"Could not write {str(path)!r}: {e}") from e


def cmd_infer(args: argparse.Namespace) -> None:
    """Estimate graphs from time-series CSV files with a trained model."""
    checkpoint = _checkpoint_model(args.checkpoint)
    model = checkpoint.model
    samples = args.samples if args.stochastic else 0
    estimates = []
    for index, path in enumerate(args.input):
        names, y = distances_from_csv(path, args.header)
        rng = np.random.default_rng(np.random.SeedSequence([args.seed, index]))
        w = infer(y, model, samples, rng)
        estimates.append(w)
        name = "edges.csv" if len(args.input) == 1 else f"edges_{index}.csv"
        _write_edges(args.out / name, names, w, model.eta)
        log.info(f"{str(path)!r}: {int(np.sum(w > model.eta))} edges.")
    if len(estimates) > 1:
        stability = spearman_stability(estimates)
        _write_text(
            args.out / "stability.json",
            dump_json(dict(inputs=[str(p) for p in args.input], spearman=stability)),
        )
        log.info(f"Mean pairwise Spearman correlation {stability:.4f}.")


def _model_estimates(
    checkpoint: Checkpoint, dataset: Dataset, threads: int
) -> typing.Tuple[typing.List[np.ndarray], np.ndarray]:
    traces = map_ordered(lambda s: forward(s.y, checkpoint.model), dataset.samples, threads)
    estimates = [trace.estimate for trace in traces]
    curve = layer_gmse([trace.layer_estimates() for trace in traces], [s.w for s in dataset])
    return estimates, curve


def _write_plots(
    out: pathlib.Path, estimates: typing.Sequence[np.ndarray], dataset: Dataset, count: int, eta: float
) -> None:
    plots = out / "plots"
    try:
        plots.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise DataError(f"Could not create {str(plots)!r}: {e}") from e
    for index in range(min(count, len(estimates))):
        write_heatmap_csv(estimates[index], plots / f"heatmap_{index}.csv", dataset[index].partition)
        write_degree_histogram_csv(
            graph_core.binarize(estimates[index], eta), plots / f"degrees_{index}.csv"
        )


def _evaluate(
    estimates: typing.Sequence[np.ndarray],
    dataset: Dataset,
    source: str,
    args: argparse.Namespace,
    eta: float = graph_core.DEFAULT_ETA,
) -> EvalReport:
    return evaluate_estimates(
        estimates,
        [s.w for s in dataset],
        source,
        partitions=dataset.partitions(),
        eta=eta,
        seed=args.seed,
        n_boot=args.n_boot,
        threads=args.threads,
    )


def cmd_eval(args: argparse.Namespace) -> None:
    """Evaluate solver estimates, a checkpoint or the groundtruth on a
    split."""
    dataset = load_split(args.dataset, args.split)
    eta = graph_core.DEFAULT_ETA
    if args.estimates is not None:
        manifest, arrays = load_container(args.estimates, "estimates_manifest")
        if manifest["count"] != len(dataset) or manifest["num_nodes"] != dataset.num_nodes:
            raise DataError(
                f"Estimates {str(args.estimates)!r} do not match split {args.split!r}."
            )
        estimates = list(arrays["w"])
        source = manifest["source"]
    elif args.checkpoint is not None:
        checkpoint = _checkpoint_model(args.checkpoint)
        eta = checkpoint.model.eta
        estimates, curve = _model_estimates(checkpoint, dataset, args.threads)
        write_layer_curve_csv(curve, _mkdir(args.out) / "layer_gmse.csv")
        source = f"{checkpoint.model.kind.value}:{args.checkpoint}"
    else:
        estimates = [s.w for s in dataset]
        source = "groundtruth"
    report = _evaluate(estimates, dataset, source, args, eta)
    report.write(args.out)
    _write_plots(args.out, estimates, dataset, args.plots, eta)
    sys.stdout.write(report.to_text())


def _mkdir(path: pathlib.Path) -> pathlib.Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise DataError(f"Could not create {str(path)!r}: {e}") from e
    return path


COMPARE_METRICS = ("gmse", "auc", "ks_score", "clustering", "shortest_path", "community")


def cmd_compare(args: argparse.Namespace) -> None:
    """Evaluate several methods side by side on the test split.

    Nothing is trained or tuned here: classical solvers need a tuned
    configuration and learned models a checkpoint.
    """
    models = [name.strip() for name in args.models.split(",") if name.strip()]
    unknown = sorted(set(models) - set(MODEL_NAMES))
    if unknown:
        raise ConfigurationError(f"Unknown models {unknown}; expected some of {MODEL_NAMES}.")
    configs = dict(args.solver_config)
    checkpoints = dict(args.checkpoint)
    missing = [
        name
        for name in models
        if (name in ("pds", "admm") and name not in configs)
        or (name not in ("pds", "admm") and name not in checkpoints)
    ]
    if missing:
        raise ConfigurationError(
            f"No tuned config or checkpoint for {missing}; run tune/train first and pass "
            "--solver-config NAME=PATH or --checkpoint NAME=PATH."
        )
    # Load everything before any expensive evaluation.
    solver_configs = {name: _load_solver_config(configs[name]) for name in models if name in configs}
    loaded = {name: _checkpoint_model(checkpoints[name]) for name in models if name in checkpoints}
    for name, checkpoint in loaded.items():
        if checkpoint.model.kind != ModelKind(name):
            raise ConfigurationError(
                f"Checkpoint for {name} holds a {checkpoint.model.kind.value} model."
            )
    dataset = load_split(args.dataset, args.split)

    rows: typing.Dict[str, typing.Dict[str, typing.Any]] = {}
    reports = {"groundtruth": _evaluate([s.w for s in dataset], dataset, "groundtruth", args)}
    iterations: typing.Dict[str, float] = {}
    for name in models:
        if name in solver_configs:
            estimates, its = _solver_estimates(
                dataset, solver_configs[name], SolverKind(name), args.threads
            )
            iterations[name] = float(np.mean(its))
            reports[name] = _evaluate(estimates, dataset, name, args)
        else:
            checkpoint = loaded[name]
            estimates, curve = _model_estimates(checkpoint, dataset, args.threads)
            write_layer_curve_csv(curve, _mkdir(args.out / name) / "layer_gmse.csv")
            reports[name] = _evaluate(estimates, dataset, name, args, checkpoint.model.eta)
    for name, report in reports.items():
        report.write(args.out / name)
        row: typing.Dict[str, typing.Any] = {}
        for metric in COMPARE_METRICS:
            if metric in report.metrics:
                try:
                    mean, ci95 = report.summary(metric)
                except MetricError:
                    mean, ci95 = None, None
                row[metric] = dict(mean=mean, ci95=ci95)
        if name in iterations:
            row["iterations"] = dict(mean=iterations[name], ci95=None)
        rows[name] = row
    _write_text(args.out / "compare.json", dump_json(rows))
    _write_compare_csv(args.out / "compare.csv", rows)
    sys.stdout.write(_compare_table(rows))


def _compare_columns(rows: typing.Dict[str, typing.Dict[str, typing.Any]]) -> typing.List[str]:
    return [m for m in COMPARE_METRICS + ("iterations",) if any(m in row for row in rows.values())]


def _write_compare_csv(path: pathlib.Path, rows: typing.Dict[str, typing.Dict[str, typing.Any]]) -> None:
    columns = _compare_columns(rows)
    try:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["model"] + [f"{c}_{s}" for c in columns for s in ("mean", "ci95")])
            for name, row in rows.items():
                cells = [name]
                for column in columns:
                    entry = row.get(column, dict(mean=None, ci95=None))
                    cells += ["" if entry[s] is None else repr(entry[s]) for s in ("mean", "ci95")]
                writer.writerow(cells)
    except OSError as e:
        raise DataError(f"Could not write {str(path)!r}: {e}") from e


def _compare_table(rows: typing.Dict[str, typing.Dict[str, typing.Any]]) -> str:
    columns = _compare_columns(rows)
    lines = ["model".ljust(12) + "".join(c.rjust(22) for c in columns)]
    for name, row in rows.items():
        cells = []
        for column in columns:
            entry = row.get(column)
            if entry is None or entry["mean"] is None:
                cells.append("-".rjust(22))
            elif entry["ci95"] is None:
                cells.append(f"{entry['mean']:.4f}".rjust(22))
            else:
                cells.append(f"{entry['mean']:.4f} +- {entry['ci95']:.4f}".rjust(22))
        lines.append(name.ljust(12) + "".join(cells))
    return "\n".join(lines) + "\n"


def make_parser() -> argparse.ArgumentParser:
    """Build the argument parser of all subcommands."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=1, help="Worker cap.")
    common.add_argument("--verbose", action="store_true", help="Log at DEBUG level.")

    parser = argparse.ArgumentParser(
        prog="run_topolearn", description="Learn graph topologies from smooth signals."
    )
    parser.add_argument("--version", action="version", version=__version__)
    subparsers = parser.add_subparsers(dest="command", required=True)

    sub = subparsers.add_parser("generate", parents=[common], help=cmd_generate.__doc__)
    sub.add_argument("--family", type=GraphFamily, choices=list(GraphFamily), required=True)
    sub.add_argument("--num-nodes", "--m", dest="num_nodes", type=int, default=20)
    sub.add_argument("--train", type=int, default=4000)
    sub.add_argument("--val", type=int, default=1000)
    sub.add_argument("--test", type=int, default=64)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--n-signals", type=int, default=DEFAULT_N_SIGNALS)
    sub.add_argument("--sigma", type=float, default=DEFAULT_SIGMA)
    sub.add_argument(
        "--weighting", type=EdgeWeighting, choices=list(EdgeWeighting), default=EdgeWeighting.LOGNORMAL
    )
    sub.add_argument(
        "--param", type=_key_value, action="append", default=[], help="Family parameter NAME=VALUE."
    )
    sub.add_argument("--density", type=float, nargs=2, default=None, metavar=("LO", "HI"))
    sub.add_argument("--out", type=pathlib.Path, required=True)
    sub.set_defaults(func=cmd_generate)

    sub = subparsers.add_parser("tune", parents=[common], help=cmd_tune.__doc__)
    sub.add_argument("--solver", type=SolverKind, choices=list(SolverKind), required=True)
    sub.add_argument("--dataset", type=pathlib.Path, required=True)
    sub.add_argument("--split", default="train")
    sub.add_argument("--alphas", type=_float_list, default=DEFAULT_ALPHA_GRID.tolist())
    sub.add_argument("--betas", type=_float_list, default=DEFAULT_BETA_GRID.tolist())
    sub.add_argument("--tol", type=float, default=1e-6)
    sub.add_argument("--max-iter", type=int, default=10000)
    sub.add_argument("--out", type=pathlib.Path, required=True)
    sub.set_defaults(func=cmd_tune)

    sub = subparsers.add_parser("solve", parents=[common], help=cmd_solve.__doc__)
    sub.add_argument("--solver", type=SolverKind, choices=list(SolverKind), required=True)
    sub.add_argument("--dataset", type=pathlib.Path, required=True)
    sub.add_argument("--split", default="test")
    sub.add_argument("--config", type=pathlib.Path, default=None, help="Tuned solver config.")
    sub.add_argument("--alpha", type=float, default=1.0)
    sub.add_argument("--beta", type=float, default=1.0)
    sub.add_argument("--tol", type=float, default=1e-6)
    sub.add_argument("--max-iter", type=int, default=10000)
    sub.add_argument("--out", type=pathlib.Path, required=True)
    sub.set_defaults(func=cmd_solve)

    sub = subparsers.add_parser("train", parents=[common], help=cmd_train.__doc__)
    sub.add_argument("--model", type=ModelKind, choices=list(ModelKind), required=True)
    sub.add_argument("--dataset", type=pathlib.Path, required=True)
    sub.add_argument("--layers", type=int, default=DEFAULT_LAYERS)
    sub.add_argument("--enhance", default="last", help="last, all, none or layer numbers 1,5,...")
    sub.add_argument("--init-config", type=pathlib.Path, default=None, help="Tuned solver config.")
    sub.add_argument("--lr0", type=float, default=1e-2)
    sub.add_argument("--lr-decay", type=float, default=0.95)
    sub.add_argument("--batch-size", type=int, default=32)
    sub.add_argument("--epochs", type=int, default=200)
    sub.add_argument("--patience", type=int, default=20)
    sub.add_argument("--tau", type=float, default=0.9)
    sub.add_argument("--beta-kl", type=float, default=1.0)
    sub.add_argument("--eta", type=float, default=graph_core.DEFAULT_ETA)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--no-audit", action="store_true", help="Skip the gradient audit.")
    sub.add_argument("--out", type=pathlib.Path, required=True)
    sub.set_defaults(func=cmd_train)

    sub = subparsers.add_parser("infer", parents=[common], help=cmd_infer.__doc__)
    sub.add_argument("--checkpoint", type=pathlib.Path, required=True)
    sub.add_argument("--input", type=pathlib.Path, nargs="+", required=True)
    sub.add_argument(
        "--header",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="First row is a header; detected from non-numeric cells if omitted.",
    )
    sub.add_argument("--stochastic", action="store_true", help="Sample latent codes.")
    sub.add_argument("--samples", type=int, default=16)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--out", type=pathlib.Path, required=True)
    sub.set_defaults(func=cmd_infer)

    sub = subparsers.add_parser("eval", parents=[common], help=cmd_eval.__doc__)
    sub.add_argument("--dataset", type=pathlib.Path, required=True)
    sub.add_argument("--split", default="test")
    source = sub.add_mutually_exclusive_group()
    source.add_argument("--estimates", type=pathlib.Path, default=None)
    source.add_argument("--checkpoint", type=pathlib.Path, default=None)
    sub.add_argument("--n-boot", type=int, default=200)
    sub.add_argument("--plots", type=int, default=1, help="Samples to emit plot data for.")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--out", type=pathlib.Path, required=True)
    sub.set_defaults(func=cmd_eval)

    sub = subparsers.add_parser("compare", parents=[common], help=cmd_compare.__doc__)
    sub.add_argument("--dataset", type=pathlib.Path, required=True)
    sub.add_argument("--split", default="test")
    sub.add_argument("--models", default=",".join(MODEL_NAMES))
    sub.add_argument(
        "--solver-config", type=_key_path, action="append", default=[], help="NAME=PATH"
    )
    sub.add_argument("--checkpoint", type=_key_path, action="append", default=[], help="NAME=PATH")
    sub.add_argument("--n-boot", type=int, default=200)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--out", type=pathlib.Path, required=True)
    sub.set_defaults(func=cmd_compare)
    return parser


def _exit_code(error: Exception) -> ExitCode:
    if isinstance(error, NumericError):
        return ExitCode.NUMERIC
    if isinstance(error, (ConfigurationError, ContractError)):
        return ExitCode.USAGE
    return ExitCode.DATA


def main(argv: typing.Optional[typing.Sequence[str]] = None) -> int:
    """Run one subcommand and return its exit code."""
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(
        format="%(asctime)s:%(levelname)s:%(name)s:%(message)s",
        level=logging.DEBUG if args.verbose else logging.INFO,
    )
    if args.threads < 1:
        log.error(f"--threads={args.threads} must be positive.")
        return ExitCode.USAGE
    try:
        args.out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        log.error(f"Could not create output directory {str(args.out)!r}: {e}")
        return ExitCode.DATA
    try:
        args.func(args)
        RunConfig.from_args(args).write(args.out)
    except (
        ConfigurationError,
        ContractError,
        DataError,
        ValidationError,
        MetricError,
        NumericError,
    ) as e:
        log.exception(f"{args.command} failed: {e}")
        return _exit_code(e)
    return ExitCode.OK


def run() -> None:
    """Entry point of the ``run_topolearn`` script."""
    sys.exit(main())
