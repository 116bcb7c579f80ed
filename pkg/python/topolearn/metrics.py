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

__all__ = [
    "KS_BOOTSTRAP_SAMPLES",
    "KS_SIGNIFICANCE",
    "PathLength",
    "PowerLawFit",
    "EvalReport",
    "normalized_sq_error",
    "gmse",
    "gmse_values",
    "layer_gmse",
    "auc",
    "fit_powerlaw",
    "powerlaw_test",
    "ks_powerlaw_passes",
    "ks_powerlaw_score",
    "community_score",
    "clustering_coefficient",
    "avg_shortest_path",
    "spearman_stability",
    "summarize",
    "evaluate_estimates",
    "write_heatmap_csv",
    "write_degree_histogram_csv",
    "write_layer_curve_csv",
]

import csv
import logging
import math
import pathlib
import typing

import networkx as nx
import numpy as np
import numpy.typing as npt
from networkx.algorithms import community
from scipy import optimize, special, stats

from . import graph_core
from .batch import map_ordered
from .container import dump_json
from .errors import DataError, MetricError, ValidationError
from .schema_registry import validate

# Bootstrap resamples of the power-law goodness-of-fit test.
KS_BOOTSTRAP_SAMPLES = 200
# A degree sequence passes when the bootstrap p-value exceeds this.
KS_SIGNIFICANCE = 0.05
# Bounds of the power-law exponent search.
EXPONENT_BOUNDS = (1.01, 10.0)
# Half-width of a 95% normal confidence interval, in standard errors.
CI_Z = 1.96

log = logging.getLogger(__name__)

PathOrStr = typing.Union[str, pathlib.Path]


class PathLength(typing.NamedTuple):
    """Average shortest path length of a graph.

    ``value`` is computed on the largest connected component when the
    graph is not connected; ``connected`` tells which case applies.
    """

    value: float
    connected: bool
    component_size: int


class PowerLawFit(typing.NamedTuple):
    """Result of the discrete power-law goodness-of-fit test."""

    exponent: float
    distance: float
    p_value: float


def normalized_sq_error(estimate: npt.ArrayLike, groundtruth: npt.ArrayLike) -> float:
    """Return ||estimate - groundtruth||^2 / ||groundtruth||^2.

    Raises
    ------
    ValidationError
        If the shapes differ or the groundtruth is zero.
    """
    estimate = np.asarray(estimate, dtype=np.float64)
    groundtruth = np.asarray(groundtruth, dtype=np.float64)
    if estimate.shape != groundtruth.shape:
        raise ValidationError(
            f"Estimate shape {estimate.shape} != groundtruth shape {groundtruth.shape}."
        )
    norm = float(np.dot(groundtruth, groundtruth))
    if norm == 0.0:
        raise ValidationError("Groundtruth edge vector has zero norm.")
    diff = estimate - groundtruth
    return float(np.dot(diff, diff)) / norm


def gmse_values(
    estimates: typing.Sequence[npt.ArrayLike],
    groundtruths: typing.Sequence[npt.ArrayLike],
) -> typing.List[typing.Optional[float]]:
    """Per-sample normalized squared errors; `None` marks a sample whose
    groundtruth is zero."""
    if len(estimates) != len(groundtruths):
        raise ValidationError(
            f"{len(estimates)} estimates for {len(groundtruths)} groundtruths."
        )
    values: typing.List[typing.Optional[float]] = []
    for index, (estimate, groundtruth) in enumerate(zip(estimates, groundtruths)):
        if not np.any(np.asarray(groundtruth)):
            log.warning(f"Sample {index} has a zero groundtruth; excluded from GMSE.")
            values.append(None)
            continue
        values.append(normalized_sq_error(estimate, groundtruth))
    return values


def gmse(
    estimates: typing.Sequence[npt.ArrayLike],
    groundtruths: typing.Sequence[npt.ArrayLike],
) -> float:
    """Graph mean squared error: the mean over samples of
    ||w_hat - w||^2 / ||w||^2.

    Samples with a zero groundtruth are excluded with a warning.

    Raises
    ------
    MetricError
        If no sample is left.
    """
    values = [v for v in gmse_values(estimates, groundtruths) if v is not None]
    if not values:
        raise MetricError("No sample with a nonzero groundtruth.")
    return float(np.mean(values))


def layer_gmse(
    layer_estimates: typing.Sequence[typing.Sequence[npt.ArrayLike]],
    groundtruths: typing.Sequence[npt.ArrayLike],
) -> np.ndarray:
    """GMSE of every layer output of an unrolled model.

    Parameters
    ----------
    layer_estimates : `list` [`list` [`numpy.ndarray`]]
        For each sample, the estimates of layers 1 to T.
    groundtruths : `list` [`numpy.ndarray`]
        Groundtruth edge vectors.

    Returns
    -------
    curve : `numpy.ndarray`
        Length T; entry t is the GMSE of the layer t+1 outputs.
    """
    if not layer_estimates:
        raise MetricError("No samples.")
    num_layers = len(layer_estimates[0])
    return np.array(
        [
            gmse([layers[t] for layers in layer_estimates], groundtruths)
            for t in range(num_layers)
        ]
    )


def auc(scores: npt.ArrayLike, labels: npt.ArrayLike) -> float:
    """Area under the ROC curve of edge scores against binary labels.

    Computed as the Mann-Whitney U statistic over average ranks, so tied
    scores count one half.

    Raises
    ------
    MetricError
        If the labels are all positive or all negative.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels) > 0
    if scores.shape != labels.shape:
        raise ValidationError(f"Scores shape {scores.shape} != labels shape {labels.shape}.")
    num_pos = int(labels.sum())
    num_neg = labels.size - num_pos
    if num_pos == 0 or num_neg == 0:
        raise MetricError(
            f"AUC needs both classes; got {num_pos} positive and {num_neg} negative labels."
        )
    ranks = stats.rankdata(scores)
    u_statistic = ranks[labels].sum() - num_pos * (num_pos + 1) / 2.0
    return float(u_statistic / (num_pos * num_neg))


def fit_powerlaw(degrees: npt.ArrayLike) -> float:
    """Maximum likelihood exponent of a discrete power law with x_min = 1.

    Parameters
    ----------
    degrees : `numpy.ndarray`
        Positive integer degrees.

    Returns
    -------
    exponent : `float`
        The exponent a of p(k) = k^-a / zeta(a), within `EXPONENT_BOUNDS`.
    """
    degrees = np.asarray(degrees, dtype=np.float64)
    log_sum = float(np.log(degrees).sum())
    n = degrees.size

    def neg_log_likelihood(exponent: float) -> float:
        return exponent * log_sum + n * math.log(special.zeta(exponent, 1.0))

    result = optimize.minimize_scalar(
        neg_log_likelihood, bounds=EXPONENT_BOUNDS, method="bounded"
    )
    return float(result.x)


def _ks_distance(degrees: np.ndarray, exponent: float) -> float:
    support = np.arange(1, int(degrees.max()) + 1, dtype=np.float64)
    empirical = np.searchsorted(np.sort(degrees), support, side="right") / degrees.size
    model = 1.0 - special.zeta(exponent, support + 1.0) / special.zeta(exponent, 1.0)
    return float(np.max(np.abs(empirical - model)))


def powerlaw_test(
    degrees: npt.ArrayLike,
    rng: np.random.Generator,
    n_boot: int = KS_BOOTSTRAP_SAMPLES,
) -> PowerLawFit:
    """Kolmogorov-Smirnov goodness of fit of a discrete power law.

    The exponent is fitted by maximum likelihood with x_min = 1. The
    p-value is the fraction of ``n_boot`` synthetic sequences, drawn from
    the fitted law and refitted, whose KS distance is at least the
    observed one. Synthetic degrees are drawn from the law truncated at
    max(1000, 10 * max degree).

    Parameters
    ----------
    degrees : `numpy.ndarray`
        Positive degrees.
    rng : `numpy.random.Generator`
        Source of the bootstrap draws.
    n_boot : `int`
        Number of bootstrap resamples.

    Returns
    -------
    fit : `PowerLawFit`
        Exponent, observed distance and p-value.
    """
    degrees = np.asarray(degrees, dtype=np.float64)
    if degrees.size == 0 or np.any(degrees < 1):
        raise MetricError("Power-law test needs a nonempty sequence of degrees >= 1.")
    exponent = fit_powerlaw(degrees)
    distance = _ks_distance(degrees, exponent)
    cutoff = max(1000, 10 * int(degrees.max()))
    support = np.arange(1, cutoff + 1, dtype=np.float64)
    pmf = support**-exponent
    pmf /= pmf.sum()
    exceed = 0
    for _ in range(n_boot):
        synthetic = rng.choice(support, size=degrees.size, p=pmf)
        if _ks_distance(synthetic, fit_powerlaw(synthetic)) >= distance:
            exceed += 1
    return PowerLawFit(exponent, distance, exceed / n_boot)


def _degrees(A: npt.ArrayLike) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError(f"Expected a square adjacency; got shape {A.shape}.")
    return A.sum(axis=1)


def ks_powerlaw_passes(
    graphs: typing.Sequence[npt.ArrayLike],
    seed: int = 0,
    n_boot: int = KS_BOOTSTRAP_SAMPLES,
    threads: int = 1,
) -> typing.List[typing.Optional[bool]]:
    """Per-graph outcome of `powerlaw_test`; `None` for graphs without
    edges. Graph i draws its bootstrap from the stream keyed by
    (seed, i)."""

    def one(item: typing.Tuple[int, npt.ArrayLike]) -> typing.Optional[bool]:
        index, A = item
        degrees = _degrees(A)
        degrees = degrees[degrees >= 1]
        if degrees.size == 0:
            log.warning(f"Graph {index} has no edges; excluded from the KS score.")
            return None
        rng = np.random.default_rng(np.random.SeedSequence([seed, index]))
        return powerlaw_test(degrees, rng, n_boot).p_value > KS_SIGNIFICANCE

    return map_ordered(one, list(enumerate(graphs)), threads)


def ks_powerlaw_score(
    graphs: typing.Sequence[npt.ArrayLike],
    seed: int = 0,
    n_boot: int = KS_BOOTSTRAP_SAMPLES,
    threads: int = 1,
) -> float:
    """Percentage of graphs whose degree sequence is not rejected as power
    law distributed.

    Raises
    ------
    MetricError
        If the list is empty or no graph has an edge.
    """
    if len(graphs) == 0:
        raise MetricError("KS score of an empty list of graphs.")
    passes = [p for p in ks_powerlaw_passes(graphs, seed, n_boot, threads) if p is not None]
    if not passes:
        raise MetricError("No graph with edges to test.")
    return 100.0 * sum(passes) / len(passes)


def _to_graph(A: npt.ArrayLike) -> nx.Graph:
    A = np.asarray(A, dtype=np.float64)
    _degrees(A)
    return nx.from_numpy_array((A > 0).astype(np.float64))


def community_score(A: npt.ArrayLike, partition: npt.ArrayLike) -> float:
    """Newman modularity of a graph under a node partition.

    Parameters
    ----------
    A : `numpy.ndarray`
        Binary adjacency matrix.
    partition : `numpy.ndarray`
        Community label of every node.

    Raises
    ------
    MetricError
        If the partition does not label every node or the graph has no
        edges.
    """
    graph = _to_graph(A)
    partition = np.asarray(partition)
    if partition.shape != (graph.number_of_nodes(),):
        raise MetricError(
            f"Partition of {partition.size} labels for {graph.number_of_nodes()} nodes."
        )
    if graph.number_of_edges() == 0:
        raise MetricError("Modularity of a graph without edges is undefined.")
    communities = [
        set(np.flatnonzero(partition == label).tolist()) for label in np.unique(partition)
    ]
    return float(community.modularity(graph, communities))


def clustering_coefficient(A: npt.ArrayLike) -> float:
    """Mean local clustering coefficient of an unweighted graph."""
    return float(nx.average_clustering(_to_graph(A)))


def avg_shortest_path(A: npt.ArrayLike) -> PathLength:
    """Average shortest path length of an unweighted graph.

    Raises
    ------
    MetricError
        If every connected component is a single node.
    """
    graph = _to_graph(A)
    largest = max(nx.connected_components(graph), key=len)
    if len(largest) < 2:
        raise MetricError("Graph has only singleton components.")
    connected = len(largest) == graph.number_of_nodes()
    if not connected:
        log.warning(
            f"Graph is not connected; path length computed on the largest "
            f"component ({len(largest)} of {graph.number_of_nodes()} nodes)."
        )
        graph = graph.subgraph(largest)
    return PathLength(
        float(nx.average_shortest_path_length(graph)), connected, len(largest)
    )


def spearman_stability(estimates: typing.Sequence[npt.ArrayLike]) -> float:
    """Mean Spearman rank correlation over all unordered pairs of
    estimates.

    Constant estimates have no ranking; pairs involving one are skipped
    with a warning.

    Raises
    ------
    MetricError
        If fewer than two estimates are given, or no pair is usable.
    """
    if len(estimates) < 2:
        raise MetricError("Spearman stability needs at least two estimates.")
    vectors = [np.asarray(e, dtype=np.float64) for e in estimates]
    if len({v.shape for v in vectors}) != 1:
        raise ValidationError("Estimates differ in length.")
    correlations = []
    for i in range(len(vectors)):
        for j in range(i + 1, len(vectors)):
            if np.ptp(vectors[i]) == 0 or np.ptp(vectors[j]) == 0:
                log.warning(f"Estimate {i} or {j} is constant; pair skipped.")
                continue
            correlations.append(float(stats.spearmanr(vectors[i], vectors[j])[0]))
    if not correlations:
        raise MetricError("No pair of non-constant estimates.")
    return float(np.mean(correlations))


def summarize(
    values: typing.Sequence[typing.Optional[float]],
) -> typing.Tuple[typing.Optional[float], typing.Optional[float]]:
    """Mean and 95% confidence half-width, 1.96 * std(ddof=1) / sqrt(n),
    of the values that are not `None`.

    The half-width is `None` with fewer than two values; both are `None`
    without values.
    """
    kept = np.array([v for v in values if v is not None], dtype=np.float64)
    if kept.size == 0:
        return None, None
    mean = float(kept.mean())
    if kept.size < 2:
        return mean, None
    return mean, float(CI_Z * kept.std(ddof=1) / math.sqrt(kept.size))


class EvalReport:
    """Per-sample metric values with their means and confidence
    intervals.

    Parameters
    ----------
    source : `str`
        What was evaluated, e.g. a dataset or estimates path.
    count : `int`
        Number of evaluated samples.

    Attributes
    ----------
    metrics : `dict` [`str`, `list` [`float` or `None`]]
        Per-sample values by metric name; `None` marks an excluded sample.
    notes : `list` [`str`]
        How reconstructed metrics were computed, and exclusions.
    """

    def __init__(self, source: str, count: int) -> None:
        self.source = source
        self.count = count
        self.metrics: typing.Dict[str, typing.List[typing.Optional[float]]] = {}
        self.notes: typing.List[str] = []

    def add(self, name: str, values: typing.Sequence[typing.Optional[float]]) -> None:
        self.metrics[name] = [None if v is None else float(v) for v in values]

    def summary(self, name: str) -> typing.Tuple[typing.Optional[float], typing.Optional[float]]:
        return summarize(self.metrics[name])

    def as_dict(self) -> typing.Dict[str, typing.Any]:
        metrics = {}
        for name, values in self.metrics.items():
            mean, ci95 = self.summary(name)
            metrics[name] = dict(mean=mean, ci95=ci95, values=values)
        return dict(source=self.source, count=self.count, metrics=metrics, notes=self.notes)

    @classmethod
    def from_dict(cls, data: typing.Dict[str, typing.Any]) -> "EvalReport":
        validate(data, "eval_report")
        report = cls(data["source"], data["count"])
        for name, entry in data["metrics"].items():
            report.add(name, entry["values"])
        report.notes = list(data["notes"])
        return report

    def to_text(self) -> str:
        """Key/value lines, one per statistic."""
        lines = [f"source: {self.source}", f"count: {self.count}"]
        for name in sorted(self.metrics):
            mean, ci95 = self.summary(name)
            lines.append(f"{name}.mean: {_fmt(mean)}")
            lines.append(f"{name}.ci95: {_fmt(ci95)}")
        lines.extend(f"note: {note}" for note in self.notes)
        return "\n".join(lines) + "\n"

    def write(self, path: PathOrStr) -> None:
        """Write ``report.json``, ``report.txt`` and ``per_sample.csv``
        into a directory."""
        path = pathlib.Path(path)
        try:
            path.mkdir(parents=True, exist_ok=True)
            (path / "report.json").write_text(dump_json(self.as_dict()))
            (path / "report.txt").write_text(self.to_text())
            names = sorted(n for n, v in self.metrics.items() if len(v) == self.count)
            with open(path / "per_sample.csv", "w", newline="") as f:
                writer = csv.writer(f)
                writer.writerow(["sample"] + names)
                for index in range(self.count):
                    writer.writerow(
                        [index] + [_fmt(self.metrics[name][index]) for name in names]
                    )
        except OSError as e:
            raise DataError(f"Could not write report to {str(path)!r}: {e}") from e


def _fmt(value: typing.Optional[float]) -> str:
    return "nan" if value is None else repr(float(value))


def _safe(func: typing.Callable[[], float], label: str) -> typing.Optional[float]:
    try:
        return func()
    except MetricError as e:
        log.warning(f"{label}: {e}")
        return None


def evaluate_estimates(
    estimates: typing.Sequence[npt.ArrayLike],
    groundtruths: typing.Sequence[npt.ArrayLike],
    source: str,
    partitions: typing.Optional[typing.Sequence[npt.ArrayLike]] = None,
    eta: float = graph_core.DEFAULT_ETA,
    seed: int = 0,
    n_boot: int = KS_BOOTSTRAP_SAMPLES,
    threads: int = 1,
) -> EvalReport:
    """Evaluate estimated edge vectors against their groundtruths.

    Reports GMSE, AUC, the power-law KS pass rate, clustering coefficient
    and average shortest path of the binarized estimates, and, when
    partitions are given, their community score.

    Parameters
    ----------
    estimates, groundtruths : `list` [`numpy.ndarray`]
        Paired edge vectors.
    source : `str`
        Label of the evaluated set.
    partitions : `list` [`numpy.ndarray`], optional
        Generating node partition of every sample.
    eta : `float`
        Binarization threshold of the estimates.
    seed : `int`
        Seed of the KS bootstrap.
    n_boot : `int`
        Bootstrap resamples of the KS test.
    threads : `int`
        Worker cap.

    Returns
    -------
    report : `EvalReport`
        The report.
    """
    count = len(estimates)
    report = EvalReport(source, count)
    report.add("gmse", gmse_values(estimates, groundtruths))
    binaries = [graph_core.binarize(e, eta) for e in estimates]

    def per_sample(index: int) -> typing.Dict[str, typing.Optional[float]]:
        A = binaries[index]
        labels = graph_core.binarize_vector(groundtruths[index], 0.0)
        values = dict(
            auc=_safe(lambda: auc(estimates[index], labels), f"Sample {index} AUC"),
            clustering=clustering_coefficient(A),
            shortest_path=_safe(
                lambda: avg_shortest_path(A).value, f"Sample {index} path length"
            ),
        )
        if partitions is not None:
            values["community"] = _safe(
                lambda: community_score(A, partitions[index]),
                f"Sample {index} community score",
            )
        return values

    rows = map_ordered(per_sample, range(count), threads)
    for name in ("auc", "clustering", "shortest_path", "community"):
        if rows and name in rows[0]:
            report.add(name, [row[name] for row in rows])
    passes = ks_powerlaw_passes(binaries, seed, n_boot, threads)
    report.add("ks_score", [None if p is None else 100.0 * p for p in passes])
    report.notes.append(
        f"ks_score: discrete power law, x_min=1, MLE exponent, "
        f"{n_boot} bootstrap resamples, p > {KS_SIGNIFICANCE}, seed {seed}"
    )
    if partitions is not None:
        report.notes.append(
            "community: Newman modularity against the generating partition "
            "(reconstructed definition)"
        )
    report.notes.append(
        "shortest_path: largest connected component of disconnected estimates"
    )
    report.notes.append(f"binarization threshold eta={eta}")
    return report


def write_heatmap_csv(
    w: npt.ArrayLike,
    path: PathOrStr,
    partition: typing.Optional[npt.ArrayLike] = None,
) -> None:
    """Write the adjacency matrix of an edge vector as CSV, optionally with
    nodes grouped by partition label."""
    W = graph_core.unhalfvec(w)
    if partition is not None:
        order = np.argsort(np.asarray(partition), kind="stable")
        W = W[np.ix_(order, order)]
    try:
        np.savetxt(path, W, delimiter=",", fmt="%.10g")
    except OSError as e:
        raise DataError(f"Could not write heatmap {str(path)!r}: {e}") from e


def write_degree_histogram_csv(A: npt.ArrayLike, path: PathOrStr) -> None:
    """Write ``degree,count`` rows for the degrees of a binary graph."""
    degrees = _degrees(A).astype(np.int64)
    counts = np.bincount(degrees)
    try:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["degree", "count"])
            writer.writerows(enumerate(counts.tolist()))
    except OSError as e:
        raise DataError(f"Could not write histogram {str(path)!r}: {e}") from e


def write_layer_curve_csv(curve: npt.ArrayLike, path: PathOrStr) -> None:
    """Write ``layer,gmse`` rows of a per-layer GMSE curve."""
    try:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["layer", "gmse"])
            for layer, value in enumerate(np.asarray(curve).tolist(), start=1):
                writer.writerow([layer, repr(value)])
    except OSError as e:
        raise DataError(f"Could not write curve {str(path)!r}: {e}") from e
