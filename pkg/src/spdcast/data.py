"""Realized-covariance series: construction, supervised assembly, synthesis, I/O.

File formats
------------
Binary container (``.matbin``): magic ``SPDS``, version u32, side length u32,
record count u64, then per record a little-endian i64 key (days since the
Unix epoch) and the row-major float64 matrix.  Lossless round trip.

Long CSV (``.csv``): columns ``date,row,col,value`` with ``row <= col``
(upper symmetric half), values written with 17 significant digits.

Intraday CSV: columns ``date,time,ticker,price``; the loader resamples each
day on a fixed-spacing grid (last observation carried forward) before
differencing log prices.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .exceptions import DimensionMismatchError, SeriesFormatError
from .frechet import (
    METRIC_LOG_EUCLIDEAN,
    METRIC_PROCRUSTES,
    FrechetConfig,
    frechet_mean,
)
from .spd import SpdMatrix, _symmetrize, expm

__all__ = [
    "FORMAT_MATBIN",
    "FORMAT_CSVLONG",
    "CovSeries",
    "ReturnPanel",
    "SupervisedSet",
    "realized_cov",
    "log_returns",
    "blockdiag_spd",
    "build_lagged_inputs",
    "build_geohar_inputs",
    "rolling_windows",
    "simulate_series",
    "simulate_market",
    "save_series",
    "load_series",
    "load_intraday_csv",
    "realized_series",
]

FORMAT_MATBIN = "matbin"
FORMAT_CSVLONG = "csvlong"

_EPOCH = np.datetime64("1970-01-01", "D")


def _as_dates(dates: Sequence) -> np.ndarray:
    arr = np.asarray(dates, dtype="datetime64[D]")
    if arr.ndim != 1:
        raise SeriesFormatError(f"dates must be one-dimensional, got shape {arr.shape}")
    return arr


@dataclass
class CovSeries:
    """Dated sequence of same-dimension SPD matrices, strictly increasing dates."""

    dates: np.ndarray
    matrices: list[SpdMatrix]

    def __post_init__(self) -> None:
        self.dates = _as_dates(self.dates)
        self.matrices = list(self.matrices)
        if len(self.dates) != len(self.matrices):
            raise SeriesFormatError(
                f"{len(self.dates)} dates but {len(self.matrices)} matrices"
            )
        if len(self.matrices) == 0:
            raise SeriesFormatError("empty series")
        if len(self.dates) > 1 and not np.all(self.dates[1:] > self.dates[:-1]):
            raise SeriesFormatError("dates must be strictly increasing")
        dim = self.matrices[0].dim
        for m in self.matrices:
            if m.dim != dim:
                raise DimensionMismatchError(
                    f"series is not dimension-uniform: {m.dim} vs {dim}"
                )

    def __len__(self) -> int:
        return len(self.matrices)

    @property
    def dim(self) -> int:
        return self.matrices[0].dim

    def subseries(self, sl: slice) -> "CovSeries":
        return CovSeries(self.dates[sl], self.matrices[sl])


@dataclass
class ReturnPanel:
    """Per-day intraday return matrices over a fixed, alphabetical ticker set."""

    dates: np.ndarray
    returns: list[np.ndarray]
    tickers: list[str]

    def __post_init__(self) -> None:
        self.dates = _as_dates(self.dates)
        if len(self.dates) != len(self.returns):
            raise SeriesFormatError("dates and returns length mismatch")
        n = len(self.tickers)
        for r in self.returns:
            if r.ndim != 2 or r.shape[1] != n:
                raise DimensionMismatchError(
                    f"return block of shape {r.shape} does not match {n} tickers"
                )


@dataclass
class SupervisedSet:
    """One-step supervised pairs: block-assembled input, next-day target."""

    inputs: list[SpdMatrix]
    targets: list[SpdMatrix]
    dates: np.ndarray
    mode: str
    lags: int | None = None
    metric: str | None = None

    def __post_init__(self) -> None:
        self.dates = _as_dates(self.dates)
        if not (len(self.inputs) == len(self.targets) == len(self.dates)):
            raise SeriesFormatError("inputs, targets, and dates must be equal length")

    def __len__(self) -> int:
        return len(self.inputs)

    @property
    def pairs(self) -> list[tuple[SpdMatrix, SpdMatrix, np.datetime64]]:
        return list(zip(self.inputs, self.targets, self.dates))


def realized_cov(day_returns: np.ndarray) -> SpdMatrix:
    """Sum of return cross products over one day's observations."""
    r = np.asarray(day_returns, dtype=float)
    if r.ndim != 2 or r.shape[0] < 1:
        raise DimensionMismatchError(
            f"expected an (observations, assets) block, got shape {r.shape}"
        )
    if not np.all(np.isfinite(r)):
        raise ValueError("returns must be finite")
    return SpdMatrix(r.T @ r)


def log_returns(prices: np.ndarray) -> np.ndarray:
    """Log price differences along axis 0; prices must be strictly positive."""
    p = np.asarray(prices, dtype=float)
    if p.ndim != 2 or p.shape[0] < 2:
        raise DimensionMismatchError(
            f"expected at least two rows of prices, got shape {p.shape}"
        )
    if not np.all(p > 0.0):
        raise ValueError("prices must be strictly positive")
    return np.log(p[1:] / p[:-1])


def blockdiag_spd(blocks: Sequence[SpdMatrix]) -> SpdMatrix:
    """Block-diagonal composition; the spectrum is the union of block spectra."""
    if len(blocks) == 0:
        raise ValueError("need at least one block")
    dims = [b.dim for b in blocks]
    total = sum(dims)
    values = np.concatenate([b.eig.values for b in blocks])
    vectors = np.zeros((total, total))
    offset = 0
    for b, d in zip(blocks, dims):
        vectors[offset : offset + d, offset : offset + d] = b.eig.vectors
        offset += d
    return SpdMatrix._from_eig(values, vectors)


def build_lagged_inputs(series: CovSeries, lags: int) -> SupervisedSet:
    """Inputs stack the ``lags`` most recent matrices block-diagonally.

    The target at position t is the matrix at t; the input stacks positions
    t-1 (top-left) through t-lags.  Yields ``len(series) - lags`` pairs.
    """
    if lags < 1:
        raise ValueError(f"lags must be at least 1, got {lags}")
    if len(series) <= lags:
        raise ValueError(f"series of length {len(series)} too short for {lags} lags")
    inputs, targets = [], []
    for t in range(lags, len(series)):
        inputs.append(blockdiag_spd([series.matrices[t - j] for j in range(1, lags + 1)]))
        targets.append(series.matrices[t])
    return SupervisedSet(inputs, targets, series.dates[lags:], mode="lags", lags=lags)


def build_geohar_inputs(
    series: CovSeries,
    metric: str = METRIC_LOG_EUCLIDEAN,
    cfg: FrechetConfig | None = None,
    weekly_window: int = 5,
    monthly_window: int = 22,
) -> SupervisedSet:
    """Heterogeneous inputs: yesterday, weekly mean, monthly mean, stacked.

    The 3n x 3n input at position t block-stacks the matrix at t-1, the
    Fréchet mean of the ``weekly_window`` most recent matrices, and the mean
    of the ``monthly_window`` most recent, under the chosen metric.
    """
    if metric not in (METRIC_LOG_EUCLIDEAN, METRIC_PROCRUSTES):
        raise ValueError(f"unknown metric {metric!r}")
    if not (1 <= weekly_window <= monthly_window):
        raise ValueError("windows must satisfy 1 <= weekly <= monthly")
    if len(series) <= monthly_window:
        raise ValueError(
            f"series of length {len(series)} too short for a {monthly_window}-day window"
        )
    if cfg is None:
        cfg = FrechetConfig(metric=metric)
    elif cfg.metric != metric:
        raise ValueError("cfg.metric disagrees with the metric argument")
    inputs, targets = [], []
    for t in range(monthly_window, len(series)):
        daily = series.matrices[t - 1]
        weekly = frechet_mean(series.matrices[t - weekly_window : t], cfg)
        monthly = frechet_mean(series.matrices[t - monthly_window : t], cfg)
        inputs.append(blockdiag_spd([daily, weekly, monthly]))
        targets.append(series.matrices[t])
    return SupervisedSet(
        inputs, targets, series.dates[monthly_window:], mode="geohar", metric=metric
    )


def rolling_windows(series: CovSeries, window: int) -> Iterator[tuple[slice, int]]:
    """One-step-ahead evaluation tasks: (training slice, test position).

    Yields ``len(series) - window`` tasks; task j trains on positions
    ``[j - window, j)`` and is scored against position j.  The training
    slice never touches the test position or anything after it.
    """
    if window < 1:
        raise ValueError(f"window must be positive, got {window}")
    if window >= len(series):
        raise ValueError(
            f"window {window} leaves no test observations in a series of "
            f"length {len(series)}"
        )
    for t in range(window, len(series)):
        yield slice(t - window, t), t


def _symmetric_noise(rng: np.random.Generator, n: int, scale: float) -> np.ndarray:
    upper = np.zeros((n, n))
    idx = np.triu_indices(n)
    upper[idx] = rng.standard_normal(len(idx[0]))
    return scale * _symmetrize(upper + np.triu(upper, 1).T)


def simulate_market(
    n: int,
    n_days: int,
    persistence: float,
    df: int,
    seed: int,
    base: SpdMatrix | None = None,
    vol: float = 0.5,
) -> tuple[CovSeries, np.ndarray]:
    """Synthetic realized covariances plus consistent daily returns.

    The latent log-covariance follows a stationary matrix AR(1) with the
    given persistence around ``logm(base)`` (base defaults to the identity);
    each day ``df`` intraday return vectors are drawn with covariance
    ``Sigma_t / df``, so the realized covariance is Wishart with ``df``
    degrees of freedom and mean ``Sigma_t``, and the day's return is their
    sum, distributed N(0, Sigma_t).
    """
    if n < 1 or n_days < 1:
        raise ValueError("n and n_days must be positive")
    if not (0.0 <= persistence < 1.0):
        raise ValueError(f"persistence must be in [0, 1), got {persistence}")
    if int(df) != df or df < n:
        raise ValueError(f"df must be an integer >= n (got df={df}, n={n})")
    df = int(df)
    if not (vol > 0.0):
        raise ValueError("vol must be positive")
    rng = np.random.default_rng(seed)
    if base is None:
        center = np.zeros((n, n))
    else:
        if base.dim != n:
            raise DimensionMismatchError(f"base dim {base.dim} != n {n}")
        from .spd import logm as _logm

        center = _logm(base)

    innovation = vol * np.sqrt(1.0 - persistence**2)
    state = center + _symmetric_noise(rng, n, vol)
    dates = np.datetime64("2000-01-03", "D") + np.arange(n_days)
    matrices: list[SpdMatrix] = []
    daily_returns = np.zeros((n_days, n))
    for t in range(n_days):
        if t > 0:
            state = center + persistence * (state - center) + _symmetric_noise(
                rng, n, innovation
            )
        sigma = expm(state)
        root = np.linalg.cholesky(sigma.data / df)
        intraday = rng.standard_normal((df, n)) @ root.T
        matrices.append(SpdMatrix(intraday.T @ intraday))
        daily_returns[t] = intraday.sum(axis=0)
    return CovSeries(dates, matrices), daily_returns


def simulate_series(
    n: int, n_days: int, persistence: float, df: int, seed: int, **kwargs
) -> CovSeries:
    """The covariance half of :func:`simulate_market`."""
    return simulate_market(n, n_days, persistence, df, seed, **kwargs)[0]


# ---------------------------------------------------------------------------
# Binary container

_MAGIC = b"SPDS"
_VERSION = 1
_HEADER = struct.Struct("<4sIIQ")


def _write_matrix_records(path: str | Path, keys: np.ndarray, records: np.ndarray) -> None:
    records = np.ascontiguousarray(records, dtype="<f8")
    keys = np.ascontiguousarray(keys, dtype="<i8")
    count, side, side2 = records.shape
    if side != side2 or len(keys) != count:
        raise DimensionMismatchError("records must be (count, side, side) with matching keys")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, side, count))
        for key, rec in zip(keys, records):
            fh.write(struct.pack("<q", int(key)))
            fh.write(rec.tobytes())


def _read_matrix_records(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise SeriesFormatError(f"{path}: truncated header")
    magic, version, side, count = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise SeriesFormatError(f"{path}: bad magic {magic!r}")
    if version != _VERSION:
        raise SeriesFormatError(f"{path}: unsupported version {version}")
    record_bytes = 8 + 8 * side * side
    expected = _HEADER.size + count * record_bytes
    if len(raw) != expected:
        raise SeriesFormatError(
            f"{path}: expected {expected} bytes for {count} records, found {len(raw)}"
        )
    keys = np.zeros(count, dtype=np.int64)
    records = np.zeros((count, side, side))
    offset = _HEADER.size
    for i in range(count):
        (keys[i],) = struct.unpack_from("<q", raw, offset)
        offset += 8
        records[i] = np.frombuffer(raw, dtype="<f8", count=side * side, offset=offset).reshape(
            side, side
        )
        offset += 8 * side * side
    return keys, records


def save_series(series: CovSeries, path: str | Path, fmt: str = FORMAT_MATBIN) -> None:
    """Write a series; ``matbin`` round-trips bitwise, ``csvlong`` to 17 digits."""
    if fmt == FORMAT_MATBIN:
        keys = (series.dates - _EPOCH).astype(np.int64)
        _write_matrix_records(path, keys, np.stack([m.data for m in series.matrices]))
    elif fmt == FORMAT_CSVLONG:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["date", "row", "col", "value"])
            n = series.dim
            for date, mat in zip(series.dates, series.matrices):
                for i in range(n):
                    for j in range(i, n):
                        writer.writerow([str(date), i, j, f"{mat.data[i, j]:.17g}"])
    else:
        raise ValueError(f"unknown format {fmt!r}")


def load_series(path: str | Path, fmt: str = FORMAT_MATBIN) -> CovSeries:
    """Read a series written by :func:`save_series`; validates as it builds."""
    if fmt == FORMAT_MATBIN:
        keys, records = _read_matrix_records(path)
        dates = _EPOCH + keys
        return CovSeries(dates, [SpdMatrix(r) for r in records])
    if fmt == FORMAT_CSVLONG:
        per_date: dict[str, dict[tuple[int, int], float]] = {}
        order: list[str] = []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["date", "row", "col", "value"]:
                raise SeriesFormatError(f"{path}: bad header {header}")
            for lineno, rec in enumerate(reader, start=2):
                if len(rec) != 4:
                    raise SeriesFormatError(f"{path}:{lineno}: expected 4 fields")
                date, row, col, value = rec
                try:
                    i, j, v = int(row), int(col), float(value)
                except ValueError as exc:
                    raise SeriesFormatError(f"{path}:{lineno}: {exc}") from None
                if i > j or i < 0:
                    raise SeriesFormatError(
                        f"{path}:{lineno}: need 0 <= row <= col, got ({i}, {j})"
                    )
                if date not in per_date:
                    per_date[date] = {}
                    order.append(date)
                if (i, j) in per_date[date]:
                    raise SeriesFormatError(f"{path}:{lineno}: duplicate entry ({i}, {j})")
                per_date[date][(i, j)] = v
        if not order:
            raise SeriesFormatError(f"{path}: no records")
        n = 1 + max(j for (_, j) in per_date[order[0]])
        matrices = []
        for date in order:
            entries = per_date[date]
            if len(entries) != n * (n + 1) // 2:
                raise SeriesFormatError(
                    f"{path}: date {date} has {len(entries)} entries, "
                    f"expected {n * (n + 1) // 2}"
                )
            mat = np.zeros((n, n))
            for (i, j), v in entries.items():
                if j >= n:
                    raise SeriesFormatError(f"{path}: date {date} exceeds dimension {n}")
                mat[i, j] = v
                mat[j, i] = v
            matrices.append(SpdMatrix(mat))
        return CovSeries(np.array(order, dtype="datetime64[D]"), matrices)
    raise ValueError(f"unknown format {fmt!r}")


# ---------------------------------------------------------------------------
# Intraday ingestion


def load_intraday_csv(path: str | Path, grid_seconds: int = 300) -> ReturnPanel:
    """Load ``date,time,ticker,price`` rows into a gridded return panel.

    Tickers are ordered alphabetically.  Each day is resampled on a
    ``grid_seconds``-spaced grid spanning the interval where every ticker has
    traded, carrying the last observation forward; log returns are taken
    between consecutive grid points.
    """
    if grid_seconds < 1:
        raise ValueError("grid_seconds must be positive")
    by_day: dict[str, dict[str, list[tuple[int, float]]]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["date", "time", "ticker", "price"]:
            raise SeriesFormatError(f"{path}: bad header {header}")
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != 4:
                raise SeriesFormatError(f"{path}:{lineno}: expected 4 fields")
            date, time_s, ticker, price_s = rec
            parts = time_s.split(":")
            if len(parts) not in (2, 3):
                raise SeriesFormatError(f"{path}:{lineno}: bad time {time_s!r}")
            try:
                seconds = int(parts[0]) * 3600 + int(parts[1]) * 60 + (
                    int(parts[2]) if len(parts) == 3 else 0
                )
                price = float(price_s)
            except ValueError as exc:
                raise SeriesFormatError(f"{path}:{lineno}: {exc}") from None
            if price <= 0.0:
                raise SeriesFormatError(f"{path}:{lineno}: nonpositive price")
            by_day.setdefault(date, {}).setdefault(ticker, []).append((seconds, price))
    if not by_day:
        raise SeriesFormatError(f"{path}: no records")
    tickers = sorted({t for day in by_day.values() for t in day})
    dates = sorted(by_day)
    blocks = []
    for date in dates:
        day = by_day[date]
        missing = [t for t in tickers if t not in day]
        if missing:
            raise SeriesFormatError(f"{path}: date {date} missing tickers {missing}")
        series = {t: sorted(day[t]) for t in tickers}
        start = max(obs[0][0] for obs in series.values())
        stop = min(obs[-1][0] for obs in series.values())
        grid = np.arange(start, stop + 1, grid_seconds)
        if len(grid) < 2:
            raise SeriesFormatError(
                f"{path}: date {date} has fewer than two grid points at "
                f"{grid_seconds}s spacing"
            )
        prices = np.zeros((len(grid), len(tickers)))
        for k, t in enumerate(tickers):
            obs = series[t]
            times = np.array([o[0] for o in obs])
            vals = np.array([o[1] for o in obs])
            pos = np.searchsorted(times, grid, side="right") - 1
            prices[:, k] = vals[pos]
        blocks.append(log_returns(prices))
    return ReturnPanel(np.array(dates, dtype="datetime64[D]"), blocks, tickers)


def realized_series(panel: ReturnPanel) -> CovSeries:
    """Daily realized covariances from a gridded return panel."""
    return CovSeries(panel.dates, [realized_cov(r) for r in panel.returns])
