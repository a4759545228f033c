"""Dataset ingestion and feature binning.

Raw tabular data is converted to a one-hot binned design where every
continuous feature is cut into half-open intervals (lo, hi].  The binned
dataset stores, per feature, the bin index of every sample plus the bin
occupancy fractions pi used by the weighted l2 penalty.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import BinningSpecError, DataError, OutOfRangeError


@dataclass(frozen=True, eq=False)
class RawDataset:
    """Feature matrix (n, p) with binary labels (n,)."""

    x: np.ndarray
    y: np.ndarray
    feature_names: list[str]

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y)
        if x.ndim != 2 or x.shape[0] < 1:
            raise DataError("feature matrix must be 2-d with at least one row")
        if y.shape != (x.shape[0],):
            raise DataError("labels must be a vector with one entry per row")
        if not np.isin(y, (0, 1)).all():
            raise DataError("labels must be 0 or 1")
        if len(self.feature_names) != x.shape[1]:
            raise DataError("feature_names length must equal the number of columns")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y.astype(np.int8))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True, eq=False)
class BinningSpec:
    """Strictly increasing bin edges per feature; bins are (edges[k], edges[k+1]]."""

    edges: list[np.ndarray]

    def __post_init__(self):
        clean = []
        for j, e in enumerate(self.edges):
            e = np.asarray(e, dtype=float)
            if e.ndim != 1 or e.size < 2:
                raise BinningSpecError(f"feature {j}: need at least two edges")
            if not (np.diff(e) > 0).all():
                raise BinningSpecError(f"feature {j}: edges must be strictly increasing")
            clean.append(e)
        object.__setattr__(self, "edges", clean)

    def n_bins(self, j: int) -> int:
        return self.edges[j].size - 1


@dataclass(frozen=True, eq=False)
class BinnedDataset:
    """One-hot binned design with occupancy weights.

    bin_index[i, j] is the bin of sample i under feature j.  Columns of the
    implied one-hot matrix are laid out feature-block by feature-block; the
    flat column of bin k of feature j is ``block_starts[j] + k``.
    """

    feature_names: list[str]
    edges: list[np.ndarray]
    bin_index: np.ndarray
    pi: list[np.ndarray]
    y: np.ndarray
    _onehot_cache: list = field(default_factory=list, repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.bin_index.shape[0]

    @property
    def p(self) -> int:
        return self.bin_index.shape[1]

    @property
    def bins_per_feature(self) -> list[int]:
        return [e.size - 1 for e in self.edges]

    @property
    def m(self) -> int:
        return sum(self.bins_per_feature)

    @property
    def block_starts(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.bins_per_feature)])[:-1]

    @property
    def pi_flat(self) -> np.ndarray:
        return np.concatenate(self.pi)

    @property
    def flat_cols(self) -> np.ndarray:
        """(n, p) flat column index of the active bin per sample and feature."""
        return self.bin_index + self.block_starts[None, :]

    def onehot(self) -> sp.csr_matrix:
        """Sparse one-hot design (n, m); built lazily and cached."""
        if not self._onehot_cache:
            n, p = self.bin_index.shape
            rows = np.repeat(np.arange(n), p)
            cols = self.flat_cols.ravel()
            data = np.ones(n * p)
            self._onehot_cache.append(
                sp.csr_matrix((data, (rows, cols)), shape=(n, self.m))
            )
        return self._onehot_cache[0]


def bin_dataset(raw: RawDataset, spec: BinningSpec, clip: bool = False) -> BinnedDataset:
    """One-hot encode ``raw`` under ``spec`` with half-open (lo, hi] bins.

    With ``clip`` out-of-range values fall into the nearest end bin instead
    of raising; use it to bin held-out data under training edges.
    """
    if len(spec.edges) != raw.p:
        raise BinningSpecError("spec must provide edges for every feature")
    n = raw.n
    bin_index = np.empty((n, raw.p), dtype=np.int64)
    pi = []
    for j in range(raw.p):
        e = spec.edges[j]
        v = raw.x[:, j]
        bad = (v <= e[0]) | (v > e[-1])
        if bad.any() and clip:
            mid0 = 0.5 * (e[0] + e[1])
            v = np.clip(v, mid0, e[-1])
            bad = np.zeros_like(bad)
        if bad.any():
            row = int(np.argmax(bad))
            raise OutOfRangeError(raw.feature_names[j], row, float(v[row]))
        # searchsorted with side='left' puts x = edge into the lower bin,
        # matching the right-closed interval convention
        idx = np.searchsorted(e, v, side="left") - 1
        bin_index[:, j] = idx
        pi.append(np.bincount(idx, minlength=e.size - 1) / n)
    return BinnedDataset(
        feature_names=list(raw.feature_names),
        edges=list(spec.edges),
        bin_index=bin_index,
        pi=pi,
        y=raw.y.copy(),
    )


def make_quantile_spec(raw: RawDataset, max_bins_per_feature: int) -> BinningSpec:
    """Equal-frequency edges with duplicate quantiles collapsed.

    The leftmost edge sits strictly below the observed minimum so every
    observation lands in some half-open bin.  A constant feature yields a
    single bin.
    """
    if max_bins_per_feature < 1:
        raise BinningSpecError("max_bins_per_feature must be >= 1")
    edges = []
    for j in range(raw.p):
        v = raw.x[:, j]
        # inverted-CDF quantiles are data values, so duplicated mass can
        # never produce an empty interpolated bin
        qs = np.quantile(v, np.linspace(0, 1, max_bins_per_feature + 1), method="inverted_cdf")
        inner = np.unique(qs[1:])  # right edges; duplicates collapse
        lo = v.min()
        span = max(v.max() - lo, abs(lo), 1.0)
        left = lo - 1e-9 * span
        edges.append(np.concatenate([[left], inner]))
    return BinningSpec(edges)


def read_csv(path) -> RawDataset:
    """Load a dataset CSV: header of feature names, last column the 0/1 label."""
    with open(path, encoding="utf-8") as f:
        header = f.readline().strip().split(",")
        if len(header) < 2:
            raise DataError("CSV needs at least one feature column and a label column")
        try:
            body = np.loadtxt(f, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise DataError(f"could not parse numeric CSV body: {exc}") from exc
    if body.shape[1] != len(header):
        raise DataError("CSV rows do not match the header arity")
    return RawDataset(x=body[:, :-1], y=body[:, -1], feature_names=header[:-1])
