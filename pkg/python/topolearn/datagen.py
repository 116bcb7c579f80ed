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

"""Synthetic graphs, smooth signals and datasets.

A sample is produced in three stages, each with its own random stream
spawned from ``SeedSequence([seed, split_id, index])``: the topology, the
edge weights, and the signals. The distance vector of the sample is
computed from the signals.
"""

__all__ = [
    "DEFAULT_FAMILY_PARAMS",
    "DEFAULT_DENSITY_INTERVAL",
    "DEFAULT_N_SIGNALS",
    "DEFAULT_SIGMA",
    "GraphFamilySpec",
    "GraphSample",
    "Dataset",
    "gen_topology",
    "assign_weights",
    "gen_signals",
    "generate_sample",
    "build_dataset",
    "write_dataset",
    "read_dataset",
    "load_timeseries_csv",
    "distances_from_csv",
]

import copy
import csv
import logging
import pathlib
import typing

import networkx as nx
import numpy as np
import numpy.typing as npt
from scipy import linalg

from . import graph_core
from .batch import map_ordered
from .container import FORMAT_VERSION, load_container, save_container
from .enums import EdgeWeighting, GraphFamily
from .errors import ConfigurationError, DataError, NumericError, ValidationError

DEFAULT_FAMILY_PARAMS: typing.Dict[GraphFamily, typing.Dict[str, typing.Any]] = {
    GraphFamily.BA: dict(attachment=1),
    GraphFamily.ER: dict(p=0.075),
    GraphFamily.SBM: dict(blocks=4, target_density=0.075, intra_share=0.85),
    GraphFamily.WS: dict(k=4, p=0.2),
}

DEFAULT_DENSITY_INTERVAL: typing.Dict[GraphFamily, typing.Tuple[float, float]] = {
    GraphFamily.BA: (0.05, 0.1),
    GraphFamily.ER: (0.05, 0.1),
    GraphFamily.SBM: (0.05, 0.1),
    # A ring lattice of degree 4 on 20 nodes already has density 0.21.
    GraphFamily.WS: (0.05, 0.25),
}

DEFAULT_N_SIGNALS = 1000
DEFAULT_SIGMA = 0.01
DEFAULT_MAX_RETRIES = 100
LOG_WEIGHT_STD = 0.1

SeedLike = typing.Union[None, int, np.random.SeedSequence, np.random.Generator]

log = logging.getLogger(__name__)


class GraphFamilySpec:
    """Random graph model, its parameters and the accepted edge density.

    Parameters
    ----------
    family : `GraphFamily` or `str`
        Graph model.
    num_nodes : `int`
        Node count m.
    params : `dict`, optional
        Overrides of `DEFAULT_FAMILY_PARAMS`:

        - ba: ``attachment``, edges added per new node.
        - er: ``p``, edge probability.
        - sbm: ``blocks``, number of equal blocks; ``target_density``;
          ``intra_share``, expected share of edges inside blocks.
        - ws: ``k``, ring degree; ``p``, rewiring probability.
    density_interval : `tuple` [`float`, `float`], optional
        Accepted closed interval of edge density.
    weighting : `EdgeWeighting` or `str`
        Edge weight distribution.
    max_retries : `int`
        Draws attempted before the density target is declared unreachable.

    Raises
    ------
    ConfigurationError
        If a parameter is unknown or out of range.
    """

    def __init__(
        self,
        family: typing.Union[GraphFamily, str],
        num_nodes: int = 20,
        params: typing.Optional[typing.Dict[str, typing.Any]] = None,
        density_interval: typing.Optional[typing.Sequence[float]] = None,
        weighting: typing.Union[EdgeWeighting, str] = EdgeWeighting.LOGNORMAL,
        max_retries: int = DEFAULT_MAX_RETRIES,
    ) -> None:
        try:
            self.family = GraphFamily(family)
            self.weighting = EdgeWeighting(weighting)
        except ValueError as e:
            raise ConfigurationError(str(e)) from e
        self.num_nodes = int(num_nodes)
        if self.num_nodes < 2:
            raise ConfigurationError(f"num_nodes={num_nodes} must be at least 2.")
        defaults = DEFAULT_FAMILY_PARAMS[self.family]
        params = dict(params or {})
        unknown = sorted(set(params) - set(defaults))
        if unknown:
            raise ConfigurationError(
                f"Unknown {self.family.value} parameters {unknown}; "
                f"expected a subset of {sorted(defaults)}."
            )
        self.params = dict(defaults, **params)
        if density_interval is None:
            density_interval = DEFAULT_DENSITY_INTERVAL[self.family]
        lo, hi = (float(value) for value in density_interval)
        if not 0.0 <= lo <= hi <= 1.0:
            raise ConfigurationError(f"Invalid density interval [{lo}, {hi}].")
        self.density_interval = (lo, hi)
        self.max_retries = int(max_retries)
        if self.max_retries < 1:
            raise ConfigurationError(f"max_retries={max_retries} must be positive.")
        self._check_params()

    def _check_params(self) -> None:
        p = self.params
        m = self.num_nodes
        if self.family == GraphFamily.BA:
            if not 1 <= p["attachment"] < m:
                raise ConfigurationError(
                    f"BA attachment={p['attachment']} must be in [1, {m - 1}]."
                )
        elif self.family == GraphFamily.ER:
            if not 0.0 <= p["p"] <= 1.0:
                raise ConfigurationError(f"ER p={p['p']} must be in [0, 1].")
        elif self.family == GraphFamily.SBM:
            if not 1 <= p["blocks"] <= m // 2:
                raise ConfigurationError(
                    f"SBM blocks={p['blocks']} must be in [1, {m // 2}] for m={m}."
                )
            if not 0.0 < p["intra_share"] <= 1.0:
                raise ConfigurationError(f"SBM intra_share={p['intra_share']} must be in (0, 1].")
            if not 0.0 <= p["target_density"] <= 1.0:
                raise ConfigurationError(
                    f"SBM target_density={p['target_density']} must be in [0, 1]."
                )
        else:
            if not 2 <= p["k"] < m:
                raise ConfigurationError(f"WS k={p['k']} must be in [2, {m - 1}].")
            if not 0.0 <= p["p"] <= 1.0:
                raise ConfigurationError(f"WS p={p['p']} must be in [0, 1].")

    def block_sizes(self) -> typing.List[int]:
        """Sizes of the SBM blocks; earlier blocks take the remainder."""
        blocks = self.params["blocks"]
        base, extra = divmod(self.num_nodes, blocks)
        return [base + (1 if b < extra else 0) for b in range(blocks)]

    def sbm_probabilities(self) -> typing.Tuple[float, float]:
        """Intra- and inter-block edge probabilities that give the target
        density in expectation, up to clipping at 1."""
        sizes = self.block_sizes()
        pairs = graph_core.num_edges(self.num_nodes)
        intra = sum(graph_core.num_edges(s) for s in sizes)
        inter = pairs - intra
        target_edges = self.params["target_density"] * pairs
        share = self.params["intra_share"]
        p_in = min(1.0, share * target_edges / intra)
        p_out = min(1.0, (1.0 - share) * target_edges / inter) if inter > 0 else 0.0
        return p_in, p_out

    def partition(self) -> typing.Optional[np.ndarray]:
        """Block label of every node for SBM, else None."""
        if self.family != GraphFamily.SBM:
            return None
        sizes = self.block_sizes()
        return np.repeat(np.arange(len(sizes)), sizes).astype(np.float64)

    def as_dict(self) -> typing.Dict[str, typing.Any]:
        return dict(
            family=self.family.value,
            num_nodes=self.num_nodes,
            params=copy.deepcopy(self.params),
            density_interval=list(self.density_interval),
            weighting=self.weighting.value,
            max_retries=self.max_retries,
        )

    @classmethod
    def from_dict(cls, data: typing.Dict[str, typing.Any]) -> "GraphFamilySpec":
        try:
            return cls(**data)
        except TypeError as e:
            raise ConfigurationError(f"Invalid graph family spec {data!r}: {e}") from e

    def __repr__(self) -> str:
        return (
            f"GraphFamilySpec({self.family.value}, m={self.num_nodes}, "
            f"params={self.params}, density={self.density_interval})"
        )


class GraphSample:
    """A groundtruth edge vector and the distance vector of its signals.

    Attributes
    ----------
    w : `numpy.ndarray`
        Groundtruth edge vector.
    y : `numpy.ndarray`
        Squared distances of the generated signals.
    family : `str`
        Tag of the generating family.
    seed : `int`
        Dataset seed.
    n_signals : `int`
        Number of signals.
    sigma : `float`
        Diagonal perturbation of the signal precision.
    index : `int`
        Position in the dataset.
    partition : `numpy.ndarray` or `None`
        Generating block labels, if any.
    disconnected : `bool`
        Whether the groundtruth topology is disconnected.
    """

    def __init__(
        self,
        w: npt.ArrayLike,
        y: npt.ArrayLike,
        family: str,
        seed: int,
        n_signals: int,
        sigma: float,
        index: int = 0,
        partition: typing.Optional[np.ndarray] = None,
        disconnected: bool = False,
    ) -> None:
        self.w = np.asarray(w, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.float64)
        if self.w.shape != self.y.shape:
            raise ValidationError(
                f"w and y must have equal shapes; got {self.w.shape} and {self.y.shape}."
            )
        self.family = str(family)
        self.seed = seed
        self.n_signals = n_signals
        self.sigma = sigma
        self.index = index
        self.partition = partition
        self.disconnected = disconnected

    @property
    def num_nodes(self) -> int:
        return graph_core.num_nodes_from_length(self.w.size)


def _draw(spec: GraphFamilySpec, seed: int) -> nx.Graph:
    m = spec.num_nodes
    p = spec.params
    if spec.family == GraphFamily.BA:
        return nx.barabasi_albert_graph(m, p["attachment"], seed=seed)
    if spec.family == GraphFamily.ER:
        return nx.gnp_random_graph(m, p["p"], seed=seed)
    if spec.family == GraphFamily.SBM:
        sizes = spec.block_sizes()
        p_in, p_out = spec.sbm_probabilities()
        probs = [[p_in if a == b else p_out for b in range(len(sizes))] for a in range(len(sizes))]
        graph = nx.stochastic_block_model(sizes, probs, seed=seed)
        return nx.Graph(graph)
    return nx.watts_strogatz_graph(m, p["k"], p["p"], seed=seed)


def gen_topology(spec: GraphFamilySpec, seed: SeedLike = None) -> graph_core.BinaryAdjacency:
    """Draw a binary topology whose density lies in the family's interval.

    Draws are repeated up to ``spec.max_retries`` times. Disconnected
    draws are accepted.

    Parameters
    ----------
    spec : `GraphFamilySpec`
        Graph model.
    seed : `int`, `numpy.random.SeedSequence` or `numpy.random.Generator`
        Source of randomness.

    Returns
    -------
    A : `numpy.ndarray`
        Symmetric 0/1 adjacency matrix with zero diagonal.

    Raises
    ------
    ConfigurationError
        If no draw reaches the density interval.
    """
    rng = np.random.default_rng(seed)
    pairs = graph_core.num_edges(spec.num_nodes)
    lo, hi = spec.density_interval
    density = 0.0
    for attempt in range(spec.max_retries):
        try:
            graph = _draw(spec, int(rng.integers(2**32)))
        except nx.NetworkXError as e:
            raise ConfigurationError(f"Cannot draw from {spec!r}: {e}") from e
        A = nx.to_numpy_array(graph, nodelist=list(range(spec.num_nodes)), dtype=np.float64)
        density = graph.number_of_edges() / pairs
        if lo - 1e-12 <= density <= hi + 1e-12:
            if attempt > 0:
                log.debug(f"Accepted {spec.family.value} topology after {attempt + 1} draws.")
            return A
    raise ConfigurationError(
        f"No draw of {spec!r} reached density in [{lo}, {hi}] after "
        f"{spec.max_retries} attempts (last {density:.4f})."
    )


def assign_weights(
    A: npt.ArrayLike,
    seed: SeedLike = None,
    weighting: typing.Union[EdgeWeighting, str] = EdgeWeighting.LOGNORMAL,
    log_std: float = LOG_WEIGHT_STD,
) -> graph_core.EdgeVector:
    """Put weights on the edges of a binary topology.

    With log-normal weighting every present edge gets exp(g) with
    g ~ N(0, log_std**2); one draw is made per node pair so the stream
    does not depend on the topology. Binary weighting gives every edge
    weight 1. Absent edges stay exactly 0.
    """
    present = graph_core.halfvec(A) > 0
    if EdgeWeighting(weighting) == EdgeWeighting.BINARY:
        return present.astype(np.float64)
    rng = np.random.default_rng(seed)
    g = rng.normal(0.0, log_std, present.size)
    return np.where(present, np.exp(g), 0.0)


def gen_signals(
    w: npt.ArrayLike,
    n: int,
    sigma: float = DEFAULT_SIGMA,
    seed: SeedLike = None,
) -> np.ndarray:
    """Draw n signals from N(0, (L + sigma^2 I)^-1).

    With K = C C^T the Cholesky factorization, X = C^-T Z for standard
    normal Z has covariance K^-1.

    Parameters
    ----------
    w : `numpy.ndarray`
        Edge vector of the graph.
    n : `int`
        Number of signals.
    sigma : `float`
        Diagonal perturbation; must be positive.
    seed : `int`, `numpy.random.SeedSequence` or `numpy.random.Generator`
        Source of randomness.

    Returns
    -------
    X : `numpy.ndarray`
        m x n data matrix.

    Raises
    ------
    ValidationError
        If ``sigma`` or ``n`` is not positive.
    NumericError
        If the precision matrix cannot be factorized.
    """
    if not sigma > 0:
        raise ValidationError(f"sigma={sigma} must be positive.")
    if n < 1:
        raise ValidationError(f"n={n} must be positive.")
    L = graph_core.laplacian(w)
    K = L + sigma**2 * np.eye(L.shape[0])
    try:
        C = linalg.cholesky(K, lower=True)
    except linalg.LinAlgError as e:
        raise NumericError(f"Cholesky factorization of L + sigma^2 I failed: {e}") from e
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((L.shape[0], n))
    return linalg.solve_triangular(C, Z, lower=True, trans="T")


def generate_sample(
    spec: GraphFamilySpec,
    index: int,
    n_signals: int = DEFAULT_N_SIGNALS,
    sigma: float = DEFAULT_SIGMA,
    seed: int = 0,
    split_id: int = 0,
) -> GraphSample:
    """Generate sample ``index`` of a split; see the module docstring."""
    topology_ss, weight_ss, signal_ss = np.random.SeedSequence([seed, split_id, index]).spawn(3)
    A = gen_topology(spec, topology_ss)
    w = assign_weights(A, weight_ss, spec.weighting)
    X = gen_signals(w, n_signals, sigma, signal_ss)
    disconnected = not nx.is_connected(nx.from_numpy_array(A))
    return GraphSample(
        w,
        graph_core.pairwise_sq_dist(X),
        spec.family.value,
        seed,
        n_signals,
        sigma,
        index=index,
        partition=spec.partition(),
        disconnected=disconnected,
    )


class Dataset:
    """A split of generated samples with its generation parameters.

    Parameters
    ----------
    spec : `GraphFamilySpec`
        Graph model of every sample.
    samples : `list` [`GraphSample`]
        Samples in index order.
    n_signals : `int`
        Signals per sample.
    sigma : `float`
        Diagonal perturbation.
    seed : `int`
        Dataset seed.
    split : `str`
        Split name, e.g. ``train``.
    split_id : `int`
        Split number mixed into the per-sample seeds.
    """

    def __init__(
        self,
        spec: GraphFamilySpec,
        samples: typing.List[GraphSample],
        n_signals: int,
        sigma: float,
        seed: int,
        split: str = "train",
        split_id: int = 0,
    ) -> None:
        self.spec = spec
        self.samples = samples
        self.n_signals = n_signals
        self.sigma = sigma
        self.seed = seed
        self.split = split
        self.split_id = split_id

    def __len__(self) -> int:
        return len(self.samples)

    def __getitem__(self, index: int) -> GraphSample:
        return self.samples[index]

    def __iter__(self) -> typing.Iterator[GraphSample]:
        return iter(self.samples)

    @property
    def num_nodes(self) -> int:
        return self.spec.num_nodes

    def partitions(self) -> typing.Optional[typing.List[np.ndarray]]:
        if self.spec.partition() is None:
            return None
        return [sample.partition for sample in self.samples]

    def manifest(self) -> typing.Dict[str, typing.Any]:
        return dict(
            format_version=FORMAT_VERSION,
            kind="dataset",
            family=self.spec.family.value,
            num_nodes=self.spec.num_nodes,
            count=len(self.samples),
            n_signals=self.n_signals,
            sigma=self.sigma,
            seed=self.seed,
            split=self.split,
            split_id=self.split_id,
            weighting=self.spec.weighting.value,
            family_params=copy.deepcopy(self.spec.params),
            density_interval=list(self.spec.density_interval),
            disconnected=[bool(sample.disconnected) for sample in self.samples],
            has_partition=self.spec.partition() is not None,
        )

    def arrays(self) -> typing.Dict[str, np.ndarray]:
        k = graph_core.num_edges(self.spec.num_nodes)
        arrays = dict(
            w=np.array([s.w for s in self.samples]).reshape(len(self.samples), k),
            y=np.array([s.y for s in self.samples]).reshape(len(self.samples), k),
        )
        if self.spec.partition() is not None:
            arrays["partition"] = np.array([s.partition for s in self.samples]).reshape(
                len(self.samples), self.spec.num_nodes
            )
        return arrays


def build_dataset(
    spec: GraphFamilySpec,
    count: int,
    n_signals: int = DEFAULT_N_SIGNALS,
    sigma: float = DEFAULT_SIGMA,
    seed: int = 0,
    split: str = "train",
    split_id: int = 0,
    threads: int = 1,
) -> Dataset:
    """Generate ``count`` samples of one split.

    Raises
    ------
    ConfigurationError
        If a topology misses the density interval or a value is invalid.
    """
    if count < 0:
        raise ConfigurationError(f"count={count} must be nonnegative.")
    if n_signals < 1:
        raise ConfigurationError(f"n_signals={n_signals} must be positive.")
    if not sigma > 0:
        raise ConfigurationError(f"sigma={sigma} must be positive.")
    samples = map_ordered(
        lambda index: generate_sample(spec, index, n_signals, sigma, seed, split_id),
        range(count),
        threads,
    )
    dataset = Dataset(spec, samples, n_signals, sigma, seed, split, split_id)
    flagged = sum(sample.disconnected for sample in samples)
    log.info(
        f"Generated {count} {spec.family.value} samples for split {split!r} "
        f"({flagged} disconnected)."
    )
    return dataset


def write_dataset(dataset: Dataset, path: typing.Union[str, pathlib.Path]) -> pathlib.Path:
    """Write a dataset container; see `container.save_container`."""
    return save_container(path, dataset.manifest(), dataset.arrays(), "dataset_manifest")


def read_dataset(path: typing.Union[str, pathlib.Path]) -> Dataset:
    """Read a dataset written by `write_dataset`.

    Raises
    ------
    DataError
        If the container is missing, invalid or inconsistent.
    """
    manifest, arrays = load_container(path, "dataset_manifest")
    try:
        spec = GraphFamilySpec(
            manifest["family"],
            manifest["num_nodes"],
            manifest["family_params"],
            manifest["density_interval"],
            manifest["weighting"],
        )
    except ConfigurationError as e:
        raise DataError(f"Dataset {str(path)!r} has an invalid family spec: {e}") from e
    count = manifest["count"]
    k = graph_core.num_edges(manifest["num_nodes"])
    expected = {"w": (count, k), "y": (count, k)}
    if manifest["has_partition"]:
        expected["partition"] = (count, manifest["num_nodes"])
    for name, shape in expected.items():
        if name not in arrays or arrays[name].shape != shape:
            found = arrays[name].shape if name in arrays else None
            raise DataError(
                f"Dataset {str(path)!r}: array {name!r} has shape {found}; expected {shape}."
            )
    if len(manifest["disconnected"]) != count:
        raise DataError(f"Dataset {str(path)!r}: disconnected flags do not match count.")
    samples = [
        GraphSample(
            arrays["w"][i],
            arrays["y"][i],
            manifest["family"],
            manifest["seed"],
            manifest["n_signals"],
            manifest["sigma"],
            index=i,
            partition=arrays["partition"][i] if "partition" in arrays else None,
            disconnected=manifest["disconnected"][i],
        )
        for i in range(count)
    ]
    return Dataset(
        spec,
        samples,
        manifest["n_signals"],
        manifest["sigma"],
        manifest["seed"],
        manifest["split"],
        manifest["split_id"],
    )


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def load_timeseries_csv(
    path: typing.Union[str, pathlib.Path],
    header: typing.Optional[bool] = None,
) -> typing.Tuple[typing.List[str], np.ndarray]:
    """Read a time-series table with one row per entity.

    With ``header=None`` a first row with a non-numeric cell is taken as a
    header and skipped; a header of numeric time stamps needs
    ``header=True``. ``header=False`` reads every row as an entity.
    A first column with non-numeric cells holds entity names; otherwise
    entities are named by row number.

    Returns
    -------
    names : `list` [`str`]
        Entity names.
    X : `numpy.ndarray`
        m x n data matrix.

    Raises
    ------
    DataError
        If the file cannot be read or the table is ragged, non-numeric or
        has fewer than two entities.
    """
    try:
        with open(path, newline="") as f:
            rows = [row for row in csv.reader(f) if row and any(cell.strip() for cell in row)]
    except OSError as e:
        raise DataError(f"Could not read {str(path)!r}: {e}") from e
    if header is None:
        header = bool(rows) and not all(_is_number(cell) for cell in rows[0][1:])
    if header:
        rows = rows[1:]
    if len(rows) < 2:
        raise DataError(f"{str(path)!r} must hold at least two entities; got {len(rows)}.")
    labelled = not all(_is_number(row[0]) for row in rows)
    if labelled:
        names = [row[0].strip() for row in rows]
        rows = [row[1:] for row in rows]
    else:
        names = [str(i) for i in range(len(rows))]
    widths = {len(row) for row in rows}
    if len(widths) != 1 or 0 in widths:
        raise DataError(f"{str(path)!r} has rows of unequal or zero length {sorted(widths)}.")
    try:
        X = np.array([[float(cell) for cell in row] for row in rows])
    except ValueError as e:
        raise DataError(f"{str(path)!r} has non-numeric values: {e}") from e
    if not np.all(np.isfinite(X)):
        raise DataError(f"{str(path)!r} has non-finite values.")
    return names, X


def distances_from_csv(
    path: typing.Union[str, pathlib.Path],
    header: typing.Optional[bool] = None,
) -> typing.Tuple[typing.List[str], graph_core.DistanceVector]:
    """Entity names and the squared distance vector of a time-series CSV."""
    names, X = load_timeseries_csv(path, header)
    return names, graph_core.pairwise_sq_dist(X)
