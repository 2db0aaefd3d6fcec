"""Config-driven forecasting runs: data resolution, model roster, artifacts.

Every command takes a :class:`RunConfig` parsed from an INI-style file,
writes its artifacts under the run's output directory, records a manifest
(config hash, seed, timestamp), and reports which requested artifacts
failed.  Forecast files are byte-reproducible given (config, seed) on a
fixed platform: all randomness flows from the run seed through named
per-model streams.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import json
import logging
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .baselines import default_factor_count, favar_fit, favar_forecast, forecast_rw
from .data import (
    FORMAT_CSVLONG,
    FORMAT_MATBIN,
    CovSeries,
    blockdiag_spd,
    build_geohar_inputs,
    build_lagged_inputs,
    frechet_mean,
    load_intraday_csv,
    load_series,
    realized_series,
    save_series,
    simulate_market,
)
from .evaluation import (
    METRICS,
    ForecastRun,
    LossPanel,
    McsResult,
    default_block_len,
    loss_panel,
    mcs,
    regime_split,
)
from .exceptions import ConfigError, SpdcastError
from .frechet import METRIC_LOG_EUCLIDEAN, METRIC_PROCRUSTES, FrechetConfig
from .network import Network, NetworkSpec
from .optim import LOSS_LOG_EUCLIDEAN, LOSS_MSE, TrainConfig, train
from .portfolio import (
    WeightPath,
    evaluate_portfolio,
    gmv_long_only,
    gmv_weights,
    naive_weights,
)
from .spd import SpdMatrix

log = logging.getLogger(__name__)

_LOSS_TAGS = {"mse": LOSS_MSE, "log_euclidean": LOSS_LOG_EUCLIDEAN}
_METRIC_TAGS = {"log_euclidean": METRIC_LOG_EUCLIDEAN, "procrustes": METRIC_PROCRUSTES}
_SHORT = {"log_euclidean": "le", "mse": "mse", "procrustes": "pro"}


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    name: str
    params: dict


@dataclass
class RunConfig:
    seed: int
    out_dir: Path
    workers: int
    source: str
    data_path: Path | None
    sim_n: int
    sim_days: int
    sim_persistence: float
    sim_df: int
    returns_path: Path | None
    grid_seconds: int
    roster: list[ModelSpec]
    window: int
    refit_every: int
    epochs: int
    batch_size: int
    learning_rate: float
    lr_decay: float
    eps_rectify: float
    eig_gap_floor: float
    hidden: tuple[int, ...] | None
    metrics: list[str]
    alpha: float
    replicates: int
    block_len: int | None
    regime_quantile: float
    market_variance: str
    portfolio_enabled: bool
    portfolio_long_only: bool
    raw_text: str = field(repr=False, default="")

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.raw_text.encode()).hexdigest()


def _parse_roster(raw: str) -> list[ModelSpec]:
    specs: list[ModelSpec] = []
    for chunk in raw.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(":")
        kind = parts[0].strip().lower()
        params: dict = {}
        for part in parts[1:]:
            if "=" not in part:
                raise ConfigError(
                    f"[models] roster: expected key=value in {chunk!r}, got {part!r}"
                )
            key, value = part.split("=", 1)
            params[key.strip()] = value.strip()
        if kind == "rw":
            name = params.pop("name", "rw")
        elif kind == "favar":
            factors = params.pop("factors", "auto")
            if factors != "auto":
                try:
                    params["factors"] = int(factors)
                except ValueError:
                    raise ConfigError(
                        f"[models] roster: favar factors must be an integer or "
                        f"'auto', got {factors!r}"
                    ) from None
            name = params.pop("name", "favar")
        elif kind == "respdnet":
            try:
                params["lags"] = int(params.get("lags", 3))
            except ValueError:
                raise ConfigError("[models] roster: respdnet lags must be an integer") from None
            if params["lags"] < 1:
                raise ConfigError("[models] roster: respdnet lags must be >= 1")
            loss = params.get("loss", "log_euclidean")
            if loss not in _LOSS_TAGS:
                raise ConfigError(
                    f"[models] roster: unknown loss {loss!r} (mse, log_euclidean)"
                )
            params["loss"] = loss
            name = params.pop("name", f"respdnet{params['lags']}_{_SHORT[loss]}")
        elif kind == "geohar":
            metric = params.get("metric", "log_euclidean")
            if metric not in _METRIC_TAGS:
                raise ConfigError(
                    f"[models] roster: unknown metric {metric!r} "
                    f"(log_euclidean, procrustes)"
                )
            loss = params.get("loss", "log_euclidean")
            if loss not in _LOSS_TAGS:
                raise ConfigError(
                    f"[models] roster: unknown loss {loss!r} (mse, log_euclidean)"
                )
            params["metric"] = metric
            params["loss"] = loss
            name = params.pop("name", f"geohar_{_SHORT[metric]}_{_SHORT[loss]}")
        else:
            raise ConfigError(
                f"[models] roster: unknown model kind {kind!r} "
                f"(rw, favar, respdnet, geohar)"
            )
        specs.append(ModelSpec(kind, name, params))
    if not specs:
        raise ConfigError("[models] roster: no models specified")
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ConfigError(f"[models] roster: duplicate model names {names}")
    return specs


class _Section:
    """Typed, error-annotated access to one config section."""

    def __init__(self, parser: configparser.ConfigParser, name: str):
        self.name = name
        self.raw = dict(parser[name]) if parser.has_section(name) else {}
        self.seen: set[str] = set()

    def _get(self, key: str, default):
        self.seen.add(key)
        value = self.raw.get(key, None)
        if value is None or value == "":
            return default
        return value

    def text(self, key: str, default: str) -> str:
        value = self._get(key, default)
        return value if isinstance(value, str) else default

    def integer(self, key: str, default: int | None) -> int | None:
        value = self._get(key, default)
        if value is default:
            return default
        try:
            return int(str(value))
        except ValueError:
            raise ConfigError(f"[{self.name}] {key}: expected an integer, got {value!r}") from None

    def real(self, key: str, default: float) -> float:
        value = self._get(key, default)
        if value is default:
            return default
        try:
            return float(str(value))
        except ValueError:
            raise ConfigError(f"[{self.name}] {key}: expected a number, got {value!r}") from None

    def flag(self, key: str, default: bool) -> bool:
        value = self._get(key, default)
        if value is default:
            return default
        lowered = str(value).strip().lower()
        if lowered in ("true", "yes", "1", "on"):
            return True
        if lowered in ("false", "no", "0", "off"):
            return False
        raise ConfigError(f"[{self.name}] {key}: expected a boolean, got {value!r}")

    def unknown(self) -> list[str]:
        return sorted(set(self.raw) - self.seen)


def load_config(
    path: str | Path,
    seed_override: int | None = None,
    out_override: str | None = None,
    workers_override: int | None = None,
) -> RunConfig:
    """Parse and validate a run configuration file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    raw_text = path.read_text()
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(raw_text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{exc}") from exc

    known_sections = {"run", "data", "models", "forecast", "train", "evaluate", "portfolio"}
    extra = set(parser.sections()) - known_sections
    if extra:
        raise ConfigError(f"unknown config sections: {sorted(extra)}")

    run = _Section(parser, "run")
    data = _Section(parser, "data")
    models = _Section(parser, "models")
    forecast = _Section(parser, "forecast")
    train_s = _Section(parser, "train")
    evaluate = _Section(parser, "evaluate")
    portfolio = _Section(parser, "portfolio")

    seed = run.integer("seed", 0)
    out_dir = Path(run.text("out", "runs/out"))
    workers = run.integer("workers", 1)
    if workers < 1:
        raise ConfigError(f"[run] workers: must be >= 1, got {workers}")

    source = data.text("source", "simulate").lower()
    if source not in ("simulate", "matbin", "csvlong", "intraday"):
        raise ConfigError(
            f"[data] source: expected simulate, matbin, csvlong, or intraday, "
            f"got {source!r}"
        )
    data_path = data.text("path", "")
    if source != "simulate" and not data_path:
        raise ConfigError(f"[data] path: required for source={source}")
    sim_n = data.integer("n", 5)
    sim_days = data.integer("days", 800)
    sim_persistence = data.real("persistence", 0.95)
    sim_df = data.integer("df", 12)
    if source == "simulate":
        if sim_n < 1:
            raise ConfigError(f"[data] n: must be >= 1, got {sim_n}")
        if sim_days < 2:
            raise ConfigError(f"[data] days: must be >= 2, got {sim_days}")
        if not (0.0 <= sim_persistence < 1.0):
            raise ConfigError(
                f"[data] persistence: must be in [0, 1), got {sim_persistence}"
            )
        if sim_df < sim_n:
            raise ConfigError(f"[data] df: must be >= n = {sim_n}, got {sim_df}")
    returns_path = data.text("returns", "")
    grid_seconds = data.integer("grid_seconds", 300)
    if grid_seconds < 1:
        raise ConfigError(f"[data] grid_seconds: must be >= 1, got {grid_seconds}")

    roster = _parse_roster(models.text("roster", "rw"))

    window = forecast.integer("window", 500)
    if window < 2:
        raise ConfigError(f"[forecast] window: must be >= 2, got {window}")
    refit_every = forecast.integer("refit_every", 0)
    if refit_every < 0:
        raise ConfigError(f"[forecast] refit_every: must be >= 0, got {refit_every}")

    epochs = train_s.integer("epochs", 30)
    batch_size = train_s.integer("batch_size", 32)
    learning_rate = train_s.real("learning_rate", 1e-2)
    lr_decay = train_s.real("lr_decay", 0.95)
    eps_rectify = train_s.real("eps_rectify", 1e-4)
    eig_gap_floor = train_s.real("eig_gap_floor", 1e-6)
    hidden_raw = train_s.text("hidden", "auto")
    if hidden_raw == "auto":
        hidden: tuple[int, ...] | None = None
    else:
        try:
            hidden = tuple(int(x) for x in hidden_raw.split(",") if x.strip())
        except ValueError:
            raise ConfigError(
                f"[train] hidden: expected 'auto' or comma-separated integers, "
                f"got {hidden_raw!r}"
            ) from None
        if not hidden or any(h < 1 for h in hidden):
            raise ConfigError(f"[train] hidden: dims must be positive, got {hidden_raw!r}")

    metric_list = [
        m.strip() for m in evaluate.text("metrics", ", ".join(METRICS)).split(",") if m.strip()
    ]
    for m in metric_list:
        if m not in METRICS:
            raise ConfigError(f"[evaluate] metrics: unknown metric {m!r} (known: {METRICS})")
    alpha = evaluate.real("alpha", 0.25)
    if not (0.0 < alpha < 1.0):
        raise ConfigError(f"[evaluate] alpha: must be in (0, 1), got {alpha}")
    replicates = evaluate.integer("replicates", 10_000)
    block_raw = evaluate.text("block_len", "auto")
    if block_raw == "auto":
        block_len = None
    else:
        try:
            block_len = int(block_raw)
        except ValueError:
            raise ConfigError(
                f"[evaluate] block_len: expected 'auto' or an integer, got {block_raw!r}"
            ) from None
    regime_quantile = evaluate.real("regime_quantile", 0.90)
    if not (0.0 < regime_quantile < 1.0):
        raise ConfigError(
            f"[evaluate] regime_quantile: must be in (0, 1), got {regime_quantile}"
        )
    market_variance = evaluate.text("market_variance", "trace")

    portfolio_enabled = portfolio.flag("enabled", True)
    portfolio_long_only = portfolio.flag("long_only", True)

    for section in (run, data, models, forecast, train_s, evaluate, portfolio):
        bad = section.unknown()
        if bad:
            raise ConfigError(f"[{section.name}] unknown keys: {bad}")

    cfg = RunConfig(
        seed=seed if seed_override is None else seed_override,
        out_dir=Path(out_override) if out_override is not None else out_dir,
        workers=workers if workers_override is None else workers_override,
        source=source,
        data_path=Path(data_path) if data_path else None,
        sim_n=sim_n,
        sim_days=sim_days,
        sim_persistence=sim_persistence,
        sim_df=sim_df,
        returns_path=Path(returns_path) if returns_path else None,
        grid_seconds=grid_seconds,
        roster=roster,
        window=window,
        refit_every=refit_every,
        epochs=epochs,
        batch_size=batch_size,
        learning_rate=learning_rate,
        lr_decay=lr_decay,
        eps_rectify=eps_rectify,
        eig_gap_floor=eig_gap_floor,
        hidden=hidden,
        metrics=metric_list,
        alpha=alpha,
        replicates=replicates,
        block_len=block_len,
        regime_quantile=regime_quantile,
        market_variance=market_variance,
        portfolio_enabled=portfolio_enabled,
        portfolio_long_only=portfolio_long_only,
        raw_text=raw_text,
    )
    return cfg


# ---------------------------------------------------------------------------
# Data resolution


def _model_seed(run_seed: int, model_name: str, fit_index: int = 0) -> int:
    mixed = np.random.SeedSequence(
        [run_seed & 0x7FFFFFFF, zlib.crc32(model_name.encode()), fit_index]
    )
    return int(mixed.generate_state(1)[0])


def resolve_series(cfg: RunConfig) -> tuple[CovSeries, np.ndarray | None, list[str]]:
    """Load or synthesize the covariance series; returns (series, daily returns, tickers)."""
    if cfg.source == "simulate":
        series, returns = simulate_market(
            cfg.sim_n, cfg.sim_days, cfg.sim_persistence, cfg.sim_df, cfg.seed
        )
        tickers = [f"A{i:02d}" for i in range(cfg.sim_n)]
        return series, returns, tickers
    if cfg.source in (FORMAT_MATBIN, FORMAT_CSVLONG):
        series = load_series(cfg.data_path, cfg.source)
        returns, tickers = None, [f"A{i:02d}" for i in range(series.dim)]
        if cfg.returns_path is not None:
            dates, returns, tickers = _read_returns_csv(cfg.returns_path)
            lookup = {d: i for i, d in enumerate(dates)}
            rows = []
            for d in series.dates:
                if d not in lookup:
                    raise ConfigError(f"[data] returns: no return row for date {d}")
                rows.append(returns[lookup[d]])
            returns = np.asarray(rows)
        return series, returns, tickers
    panel = load_intraday_csv(cfg.data_path, cfg.grid_seconds)
    series = realized_series(panel)
    daily = np.stack([r.sum(axis=0) for r in panel.returns])
    return series, daily, list(panel.tickers)


def _write_returns_csv(path: Path, dates: np.ndarray, returns: np.ndarray, tickers: list[str]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date"] + list(tickers))
        for d, row in zip(dates, returns):
            writer.writerow([str(d)] + [f"{x:.17g}" for x in row])


def _read_returns_csv(path: Path) -> tuple[np.ndarray, np.ndarray, list[str]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "date" or len(header) < 2:
            raise ConfigError(f"returns file {path}: expected header date,<tickers>")
        tickers = header[1:]
        dates, rows = [], []
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != len(header):
                raise ConfigError(f"returns file {path}:{lineno}: wrong field count")
            dates.append(rec[0])
            try:
                rows.append([float(x) for x in rec[1:]])
            except ValueError as exc:
                raise ConfigError(f"returns file {path}:{lineno}: {exc}") from None
    return np.array(dates, dtype="datetime64[D]"), np.asarray(rows), tickers


# ---------------------------------------------------------------------------
# Forecasters


class _Forecaster:
    """One model's fit/predict protocol over rolling windows."""

    name: str
    min_history: int

    def fit(self, series: CovSeries, train_slice: slice, seed: int) -> None:
        pass

    def predict(self, series: CovSeries, t: int) -> SpdMatrix:
        raise NotImplementedError

    def trace_rows(self) -> list[tuple[int, np.ndarray, np.ndarray, np.ndarray]]:
        """(fit_index, losses, grad_norms, min_gaps) per completed fit."""
        return []


class _RwForecaster(_Forecaster):
    min_history = 1

    def __init__(self, name: str):
        self.name = name

    def predict(self, series: CovSeries, t: int) -> SpdMatrix:
        return forecast_rw(series, t)


class _FavarForecaster(_Forecaster):
    min_history = 3

    def __init__(self, name: str, factors):
        self.name = name
        self.factors = factors
        self.model = None

    def fit(self, series: CovSeries, train_slice: slice, seed: int) -> None:
        n_factors = None if self.factors == "auto" or self.factors is None else self.factors
        self.model = favar_fit(series, n_factors, train_slice)

    def predict(self, series: CovSeries, t: int) -> SpdMatrix:
        return favar_forecast(self.model, series, t)


class _NetForecaster(_Forecaster):
    def __init__(self, name: str, cfg: RunConfig, loss: str):
        self.name = name
        self.run_cfg = cfg
        self.loss = loss
        self.net: Network | None = None
        self.fits: list[tuple[int, np.ndarray, np.ndarray, np.ndarray]] = []
        self.fit_count = 0

    def _build_supervised(self, series: CovSeries, train_slice: slice):
        raise NotImplementedError

    def _build_input(self, series: CovSeries, t: int) -> SpdMatrix:
        raise NotImplementedError

    def _input_dim(self, n: int) -> int:
        raise NotImplementedError

    def fit(self, series: CovSeries, train_slice: slice, seed: int) -> None:
        cfg = self.run_cfg
        n = series.dim
        input_dim = self._input_dim(n)
        if cfg.hidden is None:
            spec = NetworkSpec.default(input_dim, n, cfg.eps_rectify)
        else:
            spec = NetworkSpec(input_dim, (*cfg.hidden, n), cfg.eps_rectify)
        supervised = self._build_supervised(series, train_slice)
        net = Network.init_random(spec, seed)
        tc = TrainConfig(
            learning_rate=cfg.learning_rate,
            epochs=cfg.epochs,
            batch_size=cfg.batch_size,
            loss=self.loss,
            seed=seed,
            eig_gap_floor=cfg.eig_gap_floor,
            lr_decay=cfg.lr_decay,
        )
        result = train(net, supervised.inputs, supervised.targets, tc)
        self.net = net
        self.fits.append(
            (self.fit_count, result.epoch_losses, result.grad_norms, result.min_eig_gaps)
        )
        self.fit_count += 1

    def predict(self, series: CovSeries, t: int) -> SpdMatrix:
        return self.net.forward(self._build_input(series, t))

    def trace_rows(self):
        return self.fits


class _RespdnetForecaster(_NetForecaster):
    def __init__(self, name: str, cfg: RunConfig, lags: int, loss: str):
        super().__init__(name, cfg, loss)
        self.lags = lags
        self.min_history = lags

    def _input_dim(self, n: int) -> int:
        return self.lags * n

    def _build_supervised(self, series: CovSeries, train_slice: slice):
        return build_lagged_inputs(series.subseries(train_slice), self.lags)

    def _build_input(self, series: CovSeries, t: int) -> SpdMatrix:
        return blockdiag_spd([series.matrices[t - j] for j in range(1, self.lags + 1)])


class _GeoharForecaster(_NetForecaster):
    min_history = 22

    def __init__(self, name: str, cfg: RunConfig, metric: str, loss: str):
        super().__init__(name, cfg, loss)
        self.metric = metric
        self.frechet_cfg = FrechetConfig(metric=metric)

    def _input_dim(self, n: int) -> int:
        return 3 * n

    def _build_supervised(self, series: CovSeries, train_slice: slice):
        return build_geohar_inputs(series.subseries(train_slice), self.metric, self.frechet_cfg)

    def _build_input(self, series: CovSeries, t: int) -> SpdMatrix:
        daily = series.matrices[t - 1]
        weekly = frechet_mean(series.matrices[t - 5 : t], self.frechet_cfg)
        monthly = frechet_mean(series.matrices[t - 22 : t], self.frechet_cfg)
        return blockdiag_spd([daily, weekly, monthly])


def _make_forecaster(spec: ModelSpec, cfg: RunConfig) -> _Forecaster:
    if spec.kind == "rw":
        return _RwForecaster(spec.name)
    if spec.kind == "favar":
        return _FavarForecaster(spec.name, spec.params.get("factors", "auto"))
    if spec.kind == "respdnet":
        return _RespdnetForecaster(
            spec.name, cfg, spec.params["lags"], _LOSS_TAGS[spec.params["loss"]]
        )
    if spec.kind == "geohar":
        return _GeoharForecaster(
            spec.name, cfg, _METRIC_TAGS[spec.params["metric"]], _LOSS_TAGS[spec.params["loss"]]
        )
    raise ConfigError(f"unknown model kind {spec.kind!r}")


@dataclass
class ModelRunResult:
    name: str
    dates: list[np.datetime64]
    predictions: list[SpdMatrix]
    failures: list[tuple[str, str]]
    traces: list[tuple[int, np.ndarray, np.ndarray, np.ndarray]]


def run_model(spec: ModelSpec, cfg: RunConfig, series: CovSeries) -> ModelRunResult:
    """All rolling one-step forecasts for one model.

    Trainable models fit on the first window and re-fit every
    ``cfg.refit_every`` windows (0 = never re-fit).  A window where
    prediction fails is dropped and recorded; a failed fit fails the model
    from that point until the next scheduled fit succeeds.
    """
    forecaster = _make_forecaster(spec, cfg)
    if cfg.window <= forecaster.min_history:
        raise ConfigError(
            f"[forecast] window: {cfg.window} leaves no training pairs for model "
            f"{spec.name!r} (needs more than {forecaster.min_history})"
        )
    dates: list[np.datetime64] = []
    predictions: list[SpdMatrix] = []
    failures: list[tuple[str, str]] = []
    trainable = not isinstance(forecaster, _RwForecaster)
    fitted = False
    for window_index, (train_slice, t) in enumerate(
        ((slice(t0 - cfg.window, t0), t0) for t0 in range(cfg.window, len(series)))
    ):
        refit_due = (
            not fitted
            or isinstance(forecaster, _FavarForecaster)
            or (cfg.refit_every > 0 and window_index % cfg.refit_every == 0)
        )
        if trainable and refit_due:
            try:
                forecaster.fit(
                    series, train_slice, _model_seed(cfg.seed, spec.name, forecaster_fit_count(forecaster))
                )
                fitted = True
            except SpdcastError as exc:
                log.warning("model %s fit failed at window %d: %s", spec.name, window_index, exc)
                failures.append((str(series.dates[t]), f"fit: {exc}"))
                fitted = False
                continue
        if trainable and not fitted:
            failures.append((str(series.dates[t]), "fit unavailable"))
            continue
        try:
            predictions.append(forecaster.predict(series, t))
            dates.append(series.dates[t])
        except SpdcastError as exc:
            log.warning("model %s failed at %s: %s", spec.name, series.dates[t], exc)
            failures.append((str(series.dates[t]), str(exc)))
    return ModelRunResult(spec.name, dates, predictions, failures, forecaster.trace_rows())


def forecaster_fit_count(forecaster: _Forecaster) -> int:
    return getattr(forecaster, "fit_count", 0)


def _run_model_job(args: tuple) -> ModelRunResult:
    spec, cfg, series = args
    return run_model(spec, cfg, series)


# ---------------------------------------------------------------------------
# Commands


def _write_manifest(cfg: RunConfig, command: str, artifacts: dict[str, str]) -> None:
    manifest = {
        "command": command,
        "config_sha256": cfg.config_hash,
        "seed": cfg.seed,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "numpy_version": np.__version__,
        "spdcast_version": __version__,
        "source": cfg.source,
        "persistence": cfg.sim_persistence if cfg.source == "simulate" else None,
        "artifacts": artifacts,
    }
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    path = cfg.out_dir / f"manifest_{command.replace('-', '_')}.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")


def cmd_simulate(cfg: RunConfig) -> int:
    """Materialize a synthetic covariance series and its daily returns."""
    if cfg.source != "simulate":
        raise ConfigError("[data] source: cmd_simulate requires source = simulate")
    series, returns, tickers = resolve_series(cfg)
    data_dir = cfg.out_dir / "data"
    data_dir.mkdir(parents=True, exist_ok=True)
    save_series(series, data_dir / "series.matbin", FORMAT_MATBIN)
    _write_returns_csv(data_dir / "returns.csv", series.dates, returns, tickers)
    _write_manifest(cfg, "simulate", {
        "series": "data/series.matbin", "returns": "data/returns.csv",
    })
    log.info("simulated %d days of %dx%d covariances", len(series), series.dim, series.dim)
    return 0


def cmd_ingest(cfg: RunConfig) -> int:
    """Intraday prices to realized covariances plus daily returns."""
    if cfg.source != "intraday":
        raise ConfigError("[data] source: cmd_ingest requires source = intraday")
    series, returns, tickers = resolve_series(cfg)
    data_dir = cfg.out_dir / "data"
    data_dir.mkdir(parents=True, exist_ok=True)
    save_series(series, data_dir / "series.matbin", FORMAT_MATBIN)
    _write_returns_csv(data_dir / "returns.csv", series.dates, returns, tickers)
    _write_manifest(cfg, "ingest", {
        "series": "data/series.matbin", "returns": "data/returns.csv",
    })
    log.info("ingested %d days over tickers %s", len(series), ",".join(tickers))
    return 0


def cmd_train_forecast(cfg: RunConfig) -> int:
    """Fit the roster and emit aligned one-step forecasts per model.

    Artifacts: ``data/realized.matbin`` (test-date truth), one
    ``forecasts/<model>.matbin`` per model, per-fit loss traces, a failure
    log, and the manifest.  Returns nonzero iff a requested model produced
    no forecasts at all.
    """
    series, returns, tickers = resolve_series(cfg)
    if cfg.window >= len(series):
        raise ConfigError(
            f"[forecast] window: {cfg.window} must be below the series length "
            f"{len(series)}"
        )
    out = cfg.out_dir
    (out / "forecasts").mkdir(parents=True, exist_ok=True)
    (out / "data").mkdir(parents=True, exist_ok=True)
    (out / "train").mkdir(parents=True, exist_ok=True)

    test_positions = list(range(cfg.window, len(series)))
    realized = CovSeries(series.dates[cfg.window :], [series.matrices[t] for t in test_positions])
    save_series(realized, out / "data" / "realized.matbin", FORMAT_MATBIN)
    if returns is not None:
        _write_returns_csv(out / "data" / "returns.csv", series.dates, returns, tickers)

    jobs = [(spec, cfg, series) for spec in cfg.roster]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_model_job, jobs))
    else:
        results = [_run_model_job(job) for job in jobs]

    artifacts: dict[str, str] = {"realized": "data/realized.matbin"}
    failed_models: list[str] = []
    failure_rows: list[tuple[str, str, str]] = []
    for result in results:
        for date, reason in result.failures:
            failure_rows.append((result.name, date, reason))
        if not result.dates:
            failed_models.append(result.name)
            log.error("model %s produced no forecasts", result.name)
            continue
        run_series = CovSeries(np.array(result.dates, dtype="datetime64[D]"),
                               result.predictions)
        save_series(run_series, out / "forecasts" / f"{result.name}.matbin", FORMAT_MATBIN)
        artifacts[result.name] = f"forecasts/{result.name}.matbin"
        for fit_index, losses, norms, gaps in result.traces:
            trace_path = out / "train" / f"{result.name}_fit{fit_index}.csv"
            with open(trace_path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["epoch", "mean_loss", "grad_norm", "min_eig_gap"])
                for e in range(len(losses)):
                    writer.writerow(
                        [e, f"{losses[e]:.17g}", f"{norms[e]:.17g}", f"{gaps[e]:.17g}"]
                    )
    if failure_rows:
        with open(out / "train" / "failures.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["model", "date", "reason"])
            writer.writerows(failure_rows)
        log.warning("%d window failures recorded", len(failure_rows))
    _write_manifest(cfg, "train-forecast", artifacts)
    return 1 if failed_models else 0


def _load_forecast_runs(cfg: RunConfig) -> tuple[list[ForecastRun], CovSeries]:
    realized_path = cfg.out_dir / "data" / "realized.matbin"
    if not realized_path.exists():
        raise ConfigError(f"no realized series at {realized_path}; run train-forecast first")
    realized = load_series(realized_path, FORMAT_MATBIN)
    runs = []
    available: list[tuple[str, CovSeries]] = []
    for spec in cfg.roster:
        path = cfg.out_dir / "forecasts" / f"{spec.name}.matbin"
        if not path.exists():
            log.warning("no forecasts for model %s at %s; dropping it", spec.name, path)
            continue
        available.append((spec.name, load_series(path, FORMAT_MATBIN)))
    if not available:
        raise ConfigError("no forecast files found; run train-forecast first")
    common = set(str(d) for d in realized.dates)
    for _, fseries in available:
        common &= set(str(d) for d in fseries.dates)
    if not common:
        raise ConfigError("forecast files share no common dates")
    common_dates = np.array(sorted(common), dtype="datetime64[D]")
    realized_lookup = {str(d): m for d, m in zip(realized.dates, realized.matrices)}
    realized_mats = [realized_lookup[str(d)] for d in common_dates]
    for name, fseries in available:
        lookup = {str(d): m for d, m in zip(fseries.dates, fseries.matrices)}
        runs.append(
            ForecastRun(name, common_dates, [lookup[str(d)] for d in common_dates], realized_mats)
        )
        dropped = len(fseries) - len(common_dates)
        if dropped:
            log.info("model %s: %d dates outside the common panel", name, dropped)
    return runs, CovSeries(common_dates, realized_mats)


def _write_loss_table(path: Path, panel, result) -> None:
    order = {name: i for i, name in enumerate(result.elimination_order)}
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "avg_loss", "mcs_pvalue", "in_ssm", "eliminated_rank"])
        means = panel.losses.mean(axis=0)
        for i, name in enumerate(panel.models):
            writer.writerow([
                name,
                f"{means[i]:.17g}",
                f"{result.p_values[name]:.6g}",
                int(name in result.surviving),
                order.get(name, ""),
            ])


def _mcs_or_trivial(panel, cfg: RunConfig, seed: int):
    n_obs = panel.losses.shape[0]
    block = cfg.block_len if cfg.block_len is not None else default_block_len(n_obs)
    if len(panel.models) == 1 or n_obs <= block:
        return McsResult(
            set(panel.models), {m: 1.0 for m in panel.models}, cfg.alpha,
            cfg.replicates, block, [],
        )
    return mcs(panel, cfg.alpha, cfg.replicates, cfg.block_len, seed)


def cmd_evaluate(cfg: RunConfig) -> int:
    """Score forecasts per metric, run the confidence set, split by regime."""
    runs, realized = _load_forecast_runs(cfg)
    eval_dir = cfg.out_dir / "eval"
    eval_dir.mkdir(parents=True, exist_ok=True)

    if cfg.market_variance == "trace":
        proxy = np.array([float(np.trace(m.data)) for m in realized.matrices])
    else:
        proxy_path = Path(cfg.market_variance)
        if not proxy_path.exists():
            raise ConfigError(
                f"[evaluate] market_variance: expected 'trace' or a CSV path, "
                f"got {cfg.market_variance!r}"
            )
        lookup = {}
        with open(proxy_path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["date", "value"]:
                raise ConfigError(f"{proxy_path}: expected header date,value")
            for lineno, rec in enumerate(reader, start=2):
                try:
                    lookup[rec[0]] = float(rec[1])
                except (IndexError, ValueError) as exc:
                    raise ConfigError(f"{proxy_path}:{lineno}: {exc}") from None
        missing = [str(d) for d in realized.dates if str(d) not in lookup]
        if missing:
            raise ConfigError(
                f"[evaluate] market_variance: {len(missing)} evaluation dates missing "
                f"from {proxy_path} (first: {missing[0]})"
            )
        proxy = np.array([lookup[str(d)] for d in realized.dates])

    calm, turbulent = regime_split(proxy, realized.dates, cfg.regime_quantile)
    with open(eval_dir / "regime_labels.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "label"])
        turbulent_set = set(str(d) for d in turbulent)
        for d in realized.dates:
            writer.writerow([str(d), "turbulent" if str(d) in turbulent_set else "calm"])

    artifacts = {"regime_labels": "eval/regime_labels.csv"}
    for metric in cfg.metrics:
        panel = loss_panel(runs, metric)
        result = _mcs_or_trivial(panel, cfg, cfg.seed)
        _write_loss_table(eval_dir / f"losses_{metric}.csv", panel, result)
        artifacts[f"losses_{metric}"] = f"eval/losses_{metric}.csv"
        for label, dates in (("calm", calm), ("turbulent", turbulent)):
            mask = np.isin(panel.dates, dates)
            if not mask.any():
                log.info("regime %s is empty under metric %s", label, metric)
                continue
            sub = LossPanel(list(panel.models), panel.dates[mask], panel.losses[mask])
            sub_result = _mcs_or_trivial(sub, cfg, cfg.seed)
            _write_loss_table(eval_dir / f"losses_{metric}_{label}.csv", sub, sub_result)
            artifacts[f"losses_{metric}_{label}"] = f"eval/losses_{metric}_{label}.csv"
    _write_manifest(cfg, "evaluate", artifacts)
    return 0


def _portfolio_returns_matrix(cfg: RunConfig, dates: np.ndarray) -> np.ndarray:
    candidates = []
    if cfg.returns_path is not None:
        candidates.append(cfg.returns_path)
    candidates.append(cfg.out_dir / "data" / "returns.csv")
    for path in candidates:
        if Path(path).exists():
            rdates, returns, _ = _read_returns_csv(Path(path))
            lookup = {str(d): i for i, d in enumerate(rdates)}
            missing = [str(d) for d in dates if str(d) not in lookup]
            if missing:
                raise ConfigError(
                    f"returns file {path} is missing {len(missing)} forecast dates "
                    f"(first: {missing[0]})"
                )
            return np.stack([returns[lookup[str(d)]] for d in dates])
    raise ConfigError(
        "no daily returns available: set [data] returns or run a source that "
        "produces data/returns.csv"
    )


def cmd_portfolio(cfg: RunConfig) -> int:
    """Weight paths and the volatility/turnover report per model."""
    if not cfg.portfolio_enabled:
        log.info("portfolio disabled in config; nothing to do")
        return 0
    runs, realized = _load_forecast_runs(cfg)
    returns = _portfolio_returns_matrix(cfg, realized.dates)
    port_dir = cfg.out_dir / "portfolio"
    port_dir.mkdir(parents=True, exist_ok=True)

    variants = [("gmv", gmv_weights)]
    if cfg.portfolio_long_only:
        variants.append(("gmv_long", gmv_long_only))

    rows = []
    artifacts = {}
    for run in runs:
        for variant, builder in variants:
            weights = np.stack([builder(pred) for pred in run.predicted])
            path = WeightPath(realized.dates, weights)
            report = evaluate_portfolio(path, returns)
            rows.append((run.model, variant, report.annualized_std, report.avg_turnover))
            weight_file = port_dir / f"weights_{run.model}_{variant}.csv"
            with open(weight_file, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["date"] + [f"w_{i}" for i in range(weights.shape[1])])
                for d, w in zip(realized.dates, weights):
                    writer.writerow([str(d)] + [f"{x:.17g}" for x in w])
            artifacts[f"weights_{run.model}_{variant}"] = str(
                weight_file.relative_to(cfg.out_dir)
            )
    n_assets = realized.dim
    naive = np.tile(naive_weights(n_assets), (len(realized.dates), 1))
    naive_report = evaluate_portfolio(WeightPath(realized.dates, naive), returns)
    rows.append(("naive", "static", naive_report.annualized_std, naive_report.avg_turnover))

    with open(port_dir / "report.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "portfolio_type", "sigma_p", "tau_p"])
        for model, variant, sigma, tau in rows:
            writer.writerow([model, variant, f"{sigma:.17g}", f"{tau:.17g}"])
    artifacts["report"] = "portfolio/report.csv"
    _write_manifest(cfg, "portfolio", artifacts)
    return 0


def _read_csv_table(path: Path) -> list[list[str]]:
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def _markdown_table(rows: list[list[str]]) -> str:
    if not rows:
        return "(empty)\n"
    header, *body = rows
    out = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    for row in body:
        out.append("| " + " | ".join(row) + " |")
    return "\n".join(out) + "\n"


def cmd_report(cfg: RunConfig) -> int:
    """Assemble eval and portfolio artifacts into one markdown summary."""
    lines = [
        "# Forecast evaluation report",
        "",
        f"- config: `{cfg.config_hash[:16]}`",
        f"- seed: {cfg.seed}",
        f"- models: {', '.join(s.name for s in cfg.roster)}",
        "",
    ]
    found = False
    for metric in cfg.metrics:
        for suffix, title in (("", "all days"), ("_calm", "calm days"),
                              ("_turbulent", "turbulent days")):
            path = cfg.out_dir / "eval" / f"losses_{metric}{suffix}.csv"
            if path.exists():
                found = True
                lines.append(f"## {metric} ({title})")
                lines.append("")
                lines.append(_markdown_table(_read_csv_table(path)))
    port = cfg.out_dir / "portfolio" / "report.csv"
    if port.exists():
        found = True
        lines.append("## Portfolios")
        lines.append("")
        lines.append(_markdown_table(_read_csv_table(port)))
    if not found:
        raise ConfigError(
            f"nothing to report under {cfg.out_dir}; run evaluate or portfolio first"
        )
    report_path = cfg.out_dir / "report.md"
    report_path.write_text("\n".join(lines))
    _write_manifest(cfg, "report", {"report": "report.md"})
    print(report_path)
    return 0
