"""Core records, CSV loaders/writers and the seeded synthetic universe.

All numeric arrays held by the records are copied and flagged read-only, so
records can be shared between threads and processes without defensive copies.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    GapInSeries,
    InvalidFundamental,
    MissingData,
    MissingFile,
    ParseError,
    ShareSumError,
)

SHARE_TOLERANCE = 1e-6
SIMPLEX_TOLERANCE = 1e-9
CONTINENTS = ("Africa", "Asia", "Europe", "North America", "Oceania", "South America")


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class RegionId:
    name: str
    index: int


def make_regions(names: Iterable[str]) -> tuple[RegionId, ...]:
    names = list(names)
    if len(set(names)) != len(names):
        raise ParseError(f"duplicate region names in {names}")
    return tuple(RegionId(n, i) for i, n in enumerate(names))


@dataclass(frozen=True, order=True)
class MonthStamp:
    year: int
    month: int

    def __post_init__(self):
        if not 1 <= self.month <= 12:
            raise ValueError(f"month must be in 1..12, got {self.month}")

    @classmethod
    def parse(cls, text: str) -> "MonthStamp":
        """Parse ``YYYY-MM`` (a trailing ``-DD`` is tolerated and ignored)."""
        parts = text.strip().split("-")
        if len(parts) < 2:
            raise ValueError(f"not a year-month: {text!r}")
        return cls(int(parts[0]), int(parts[1]))

    @classmethod
    def from_ordinal(cls, n: int) -> "MonthStamp":
        y, m = divmod(int(n), 12)
        return cls(y, m + 1)

    @classmethod
    def from_datetime64(cls, d) -> "MonthStamp":
        n = np.datetime64(d, "M").astype(int)  # months since 1970-01
        return cls.from_ordinal(n + 1970 * 12)

    @property
    def ordinal(self) -> int:
        return self.year * 12 + self.month - 1

    def to_datetime64(self) -> np.datetime64:
        return np.datetime64(f"{self.year:04d}-{self.month:02d}", "M")

    def __add__(self, months: int) -> "MonthStamp":
        return MonthStamp.from_ordinal(self.ordinal + int(months))

    def __sub__(self, other):
        if isinstance(other, MonthStamp):
            return self.ordinal - other.ordinal
        return self + (-int(other))

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"


def month_range(start: MonthStamp, end: MonthStamp) -> tuple[MonthStamp, ...]:
    """Inclusive range of months."""
    return tuple(MonthStamp.from_ordinal(n) for n in range(start.ordinal, end.ordinal + 1))


def _check_contiguous(months: Sequence[MonthStamp]) -> None:
    for a, b in zip(months, months[1:]):
        if b.ordinal - a.ordinal != 1:
            raise GapInSeries(f"months not contiguous between {a} and {b}")


@dataclass(frozen=True)
class TemperaturePanel:
    regions: tuple[RegionId, ...]
    months: tuple[MonthStamp, ...]
    values: np.ndarray  # K x T, degrees C

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))
        object.__setattr__(self, "months", tuple(self.months))
        values = _frozen(self.values)
        if values.shape != (len(self.regions), len(self.months)):
            raise ValueError(
                f"values shape {values.shape} does not match "
                f"{len(self.regions)} regions x {len(self.months)} months"
            )
        bad = np.argwhere(~np.isfinite(values))
        if bad.size:
            k, t = bad[0]
            raise MissingData(self.regions[k].name, str(self.months[t]))
        if [r.index for r in self.regions] != list(range(len(self.regions))):
            raise ValueError("region indices must be 0..K-1 in order")
        _check_contiguous(self.months)
        object.__setattr__(self, "values", values)

    @property
    def region_names(self) -> list[str]:
        return [r.name for r in self.regions]

    @property
    def month_of_year(self) -> np.ndarray:
        return np.array([m.month for m in self.months])

    def month_index(self, month: MonthStamp) -> int:
        return month.ordinal - self.months[0].ordinal


@dataclass(frozen=True)
class FirmProfile:
    firm_id: str
    tangible_assets: float
    revenue: float
    revenue_shares: np.ndarray

    def __post_init__(self):
        if not (self.revenue > 0 and math.isfinite(self.revenue)):
            raise InvalidFundamental(f"firm {self.firm_id}: revenue must be > 0, got {self.revenue}")
        if not (self.tangible_assets >= 0 and math.isfinite(self.tangible_assets)):
            raise InvalidFundamental(
                f"firm {self.firm_id}: tangible assets must be >= 0, got {self.tangible_assets}"
            )
        shares = _frozen(self.revenue_shares)
        if np.any(shares < 0) or abs(shares.sum() - 1.0) > SIMPLEX_TOLERANCE:
            raise ShareSumError(f"firm {self.firm_id}: revenue shares {shares} do not form a simplex")
        object.__setattr__(self, "revenue_shares", shares)

    @property
    def asset_intensity(self) -> float:
        return self.tangible_assets / self.revenue


@dataclass(frozen=True)
class ReturnPanel:
    firm_ids: tuple[str, ...]
    dates: np.ndarray  # datetime64[D]
    returns: np.ndarray  # N x T simple returns
    frequency: str = "monthly"

    def __post_init__(self):
        if self.frequency not in ("daily", "monthly"):
            raise ValueError(f"frequency must be daily or monthly, got {self.frequency!r}")
        object.__setattr__(self, "firm_ids", tuple(self.firm_ids))
        dates = np.array(self.dates, dtype="datetime64[D]")
        dates.setflags(write=False)
        returns = _frozen(self.returns)
        if returns.shape != (len(self.firm_ids), len(dates)):
            raise ValueError(f"returns shape {returns.shape} does not match firms x dates")
        if not np.all(np.isfinite(returns)):
            raise ParseError("non-finite return")
        if np.any(returns <= -1):
            raise ValueError("returns must exceed -1")
        if np.any(np.diff(dates.astype(np.int64)) <= 0):
            raise ValueError("dates must be strictly increasing")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "returns", returns)

    @property
    def months(self) -> np.ndarray:
        return self.dates.astype("datetime64[M]")

    def window(self, start: MonthStamp, end: MonthStamp) -> np.ndarray:
        """Columns whose month lies in ``[start, end)``."""
        months = self.months
        return (months >= start.to_datetime64()) & (months < end.to_datetime64())


def check_simplex(w, lb: float = 0.0, ub: float = 1.0, tol: float = SIMPLEX_TOLERANCE) -> bool:
    w = np.asarray(w, dtype=float)
    return bool(
        np.all(w >= lb - tol) and np.all(w <= ub + tol) and np.all(np.abs(w.sum(axis=-1) - 1) <= tol)
    )


# --------------------------------------------------------------------------- csv


def _read_rows(path) -> list[list[str]]:
    path = Path(path)
    if not path.exists():
        raise MissingFile(f"file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise ParseError(f"{path}: empty file", row=0)
    return rows


def _parse_float(text: str, row: int, col: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"cannot parse {text!r} as a number", row=row, col=col) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite value {text!r}", row=row, col=col)
    return value


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


def load_temperature_panel(path) -> TemperaturePanel:
    rows = _read_rows(path)
    header = [h.strip() for h in rows[0]]
    regions = make_regions(header[1:])
    months, values = [], []
    for r, row in enumerate(rows[1:], start=1):
        try:
            month = MonthStamp.parse(row[0])
        except (ValueError, IndexError):
            raise ParseError(f"bad year-month {row[0]!r}", row=r, col=0) from None
        if len(row) < len(header):
            row = row + [""] * (len(header) - len(row))
        cells = []
        for c, region in enumerate(regions, start=1):
            text = row[c].strip()
            if text == "":
                raise MissingData(region.name, str(month))
            cells.append(_parse_float(text, r, c))
        months.append(month)
        values.append(cells)
    _check_contiguous(months)
    return TemperaturePanel(regions, tuple(months), np.array(values, dtype=float).T.reshape(len(regions), -1))


def write_temperature_panel(panel: TemperaturePanel, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["year_month", *panel.region_names])
        for t, month in enumerate(panel.months):
            w.writerow([str(month), *(_fmt(v) for v in panel.values[:, t])])


def load_firm_profiles(path, regions: Sequence[RegionId]) -> list[FirmProfile]:
    rows = _read_rows(path)
    header = [h.strip() for h in rows[0]]
    required = ["firm_id", "tangible_assets", "revenue"]
    missing = [c for c in required if c not in header]
    share_cols = [f"share_{r.name}" for r in regions]
    missing += [c for c in share_cols if c not in header]
    if missing:
        raise ParseError(f"firms file lacks columns {missing}", row=0)
    pos = {h: i for i, h in enumerate(header)}
    firms = []
    for r, row in enumerate(rows[1:], start=1):
        row = row + [""] * (len(header) - len(row))
        firm_id = row[pos["firm_id"]].strip()
        assets = _parse_float(row[pos["tangible_assets"]], r, pos["tangible_assets"])
        revenue = _parse_float(row[pos["revenue"]], r, pos["revenue"])
        if revenue <= 0:
            raise InvalidFundamental(f"firm {firm_id}: revenue must be > 0, got {revenue}")
        if assets < 0:
            raise InvalidFundamental(f"firm {firm_id}: tangible assets must be >= 0, got {assets}")
        shares = []
        for col in share_cols:
            text = row[pos[col]].strip()
            if text == "":
                raise ShareSumError(f"firm {firm_id}: missing {col}")
            shares.append(_parse_float(text, r, pos[col]))
        shares = np.array(shares)
        total = shares.sum()
        if np.any(shares < 0) or abs(total - 1.0) > SHARE_TOLERANCE:
            raise ShareSumError(f"firm {firm_id}: revenue shares sum to {total!r}")
        firms.append(FirmProfile(firm_id, assets, revenue, shares / total))
    return firms


def write_firm_profiles(firms: Sequence[FirmProfile], regions: Sequence[RegionId], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["firm_id", "tangible_assets", "revenue", *(f"share_{r.name}" for r in regions)])
        for f in firms:
            w.writerow([f.firm_id, _fmt(f.tangible_assets), _fmt(f.revenue), *(_fmt(s) for s in f.revenue_shares)])


def load_return_panel(path, frequency: str = "monthly") -> ReturnPanel:
    rows = _read_rows(path)
    header = [h.strip() for h in rows[0]]
    firm_ids = header[1:]
    dates, values = [], []
    for r, row in enumerate(rows[1:], start=1):
        row = row + [""] * (len(header) - len(row))
        text = row[0].strip()
        try:
            date = np.datetime64(text if len(text) > 7 else text + "-01", "D")
        except ValueError:
            raise ParseError(f"bad date {text!r}", row=r, col=0) from None
        cells = []
        for c, firm in enumerate(firm_ids, start=1):
            if row[c].strip() == "":
                raise MissingData(firm, text)
            cells.append(_parse_float(row[c], r, c))
        dates.append(date)
        values.append(cells)
    return ReturnPanel(tuple(firm_ids), np.array(dates), np.array(values, dtype=float).T.reshape(len(firm_ids), -1), frequency)


def write_return_panel(panel: ReturnPanel, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", *panel.firm_ids])
        for t, d in enumerate(panel.dates):
            w.writerow([str(d), *(_fmt(v) for v in panel.returns[:, t])])


def load_monthly_table(path) -> tuple[tuple[MonthStamp, ...], tuple[str, ...], np.ndarray]:
    """Generic ``year_month,<col1>,...`` table; returns (months, columns, T x C values)."""
    rows = _read_rows(path)
    header = tuple(h.strip() for h in rows[0][1:])
    months, values = [], []
    for r, row in enumerate(rows[1:], start=1):
        try:
            months.append(MonthStamp.parse(row[0]))
        except (ValueError, IndexError):
            raise ParseError(f"bad year-month {row[0]!r}", row=r, col=0) from None
        row = row + [""] * (len(header) + 1 - len(row))
        cells = []
        for c, name in enumerate(header, start=1):
            if row[c].strip() == "":
                raise MissingData(name, row[0])
            cells.append(_parse_float(row[c], r, c))
        values.append(cells)
    _check_contiguous(months)
    return tuple(months), header, np.array(values, dtype=float).reshape(len(months), len(header))


def write_monthly_table(months: Sequence[MonthStamp], columns: Sequence[str], values, path) -> None:
    values = np.asarray(values, dtype=float)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["year_month", *columns])
        for m, row in zip(months, values):
            w.writerow([str(m), *(_fmt(v) for v in row)])


def compound_to_monthly(daily: ReturnPanel) -> ReturnPanel:
    """Compound daily simple returns within each calendar month."""
    months = daily.months
    uniq, start = np.unique(months, return_index=True)
    growth = np.multiply.reduceat(1.0 + daily.returns, start, axis=1)
    return ReturnPanel(daily.firm_ids, uniq.astype("datetime64[D]"), growth - 1.0, "monthly")


# --------------------------------------------------------------------- synthetic


@dataclass(frozen=True)
class SyntheticBundle:
    temperatures: TemperaturePanel
    firms: list[FirmProfile]
    daily_returns: ReturnPanel
    monthly_returns: ReturnPanel
    caps: np.ndarray = field(repr=False)  # T_ret x N, market caps at the start of each month

    @property
    def regions(self) -> tuple[RegionId, ...]:
        return self.temperatures.regions

    @property
    def return_months(self) -> tuple[MonthStamp, ...]:
        return tuple(MonthStamp.from_datetime64(d) for d in self.monthly_returns.dates)


def _region_names(k: int) -> list[str]:
    if k <= len(CONTINENTS):
        return list(CONTINENTS[:k])
    return [f"R{i + 1}" for i in range(k)]


def generate_synthetic_bundle(
    seed: int,
    n_firms: int,
    k_regions: int,
    t_months: int,
    *,
    start: MonthStamp = MonthStamp(1940, 1),
    return_months: int | None = None,
    warming: float = 2.5,
    noise_std: float = 0.6,
    common_share: float = 0.35,
) -> SyntheticBundle:
    """Seeded synthetic temperatures, fundamentals and returns.

    Temperatures follow a seasonal sine baseline plus a linear-plus-quadratic
    warming drift (``warming`` degrees over the whole span) and Gaussian noise,
    part of which (``common_share`` of the variance) is shared across regions so
    extreme-event indicators are positively correlated. Returns come from a
    one-factor daily model on business days and cover the last
    ``return_months`` months of the temperature span.
    """
    if min(n_firms, k_regions, t_months) < 1:
        raise ValueError("counts must be >= 1")
    return_months = t_months if return_months is None else int(return_months)
    if not 1 <= return_months <= t_months:
        raise ValueError("return_months must be in 1..t_months")
    temp_ss, firm_ss, ret_ss = np.random.SeedSequence(seed).spawn(3)

    rng = np.random.default_rng(temp_ss)
    months = month_range(start, start + (t_months - 1))
    moy = np.array([m.month for m in months])
    tau = np.arange(t_months) / max(t_months - 1, 1)
    base = rng.uniform(-5.0, 25.0, size=(k_regions, 1))
    amp = rng.uniform(2.0, 12.0, size=(k_regions, 1))
    phase = rng.uniform(0.0, 2 * np.pi, size=(k_regions, 1))
    scale = noise_std * rng.uniform(0.7, 1.3, size=(k_regions, 1))
    drift = warming * (tau / 3.0 + 2.0 * tau**2 / 3.0)
    common = rng.standard_normal(t_months)
    own = rng.standard_normal((k_regions, t_months))
    eps = math.sqrt(common_share) * common + math.sqrt(1.0 - common_share) * own
    temps = base + amp * np.sin(2 * np.pi * (moy - 1) / 12.0 + phase) + drift + scale * eps
    regions = make_regions(_region_names(k_regions))
    panel = TemperaturePanel(regions, months, temps)

    rng = np.random.default_rng(firm_ss)
    assets = rng.lognormal(mean=3.0, sigma=1.0, size=n_firms)
    revenue = rng.lognormal(mean=3.0, sigma=0.6, size=n_firms)
    shares = rng.dirichlet(np.full(k_regions, 0.8), size=n_firms)
    firms = [
        FirmProfile(f"F{i + 1:03d}", float(assets[i]), float(revenue[i]), shares[i] / shares[i].sum())
        for i in range(n_firms)
    ]

    rng = np.random.default_rng(ret_ss)
    ret_start = months[t_months - return_months]
    first_day = ret_start.to_datetime64().astype("datetime64[D]")
    last_day = (months[-1] + 1).to_datetime64().astype("datetime64[D]")
    days = np.arange(first_day, last_day, dtype="datetime64[D]")
    days = days[np.is_busday(days)]
    beta = rng.uniform(0.5, 1.5, size=(n_firms, 1))
    idio = rng.uniform(0.008, 0.022, size=(n_firms, 1))
    alpha = rng.normal(0.0002, 0.0003, size=(n_firms, 1))
    market = rng.normal(0.0003, 0.009, size=days.size)
    daily = alpha + beta * market + idio * rng.standard_normal((n_firms, days.size))
    daily = np.maximum(daily, -0.5)
    daily_panel = ReturnPanel(tuple(f.firm_id for f in firms), days, daily, "daily")
    monthly_panel = compound_to_monthly(daily_panel)

    caps = np.empty((return_months, n_firms))
    caps[0] = rng.lognormal(mean=10.0, sigma=1.0, size=n_firms)
    for t in range(1, return_months):
        caps[t] = caps[t - 1] * (1.0 + monthly_panel.returns[:, t - 1])
    caps.setflags(write=False)
    return SyntheticBundle(panel, firms, daily_panel, monthly_panel, caps)


def generate_synthetic_universe(
    seed: int, n_firms: int, k_regions: int, t_months: int, **kwargs
) -> tuple[TemperaturePanel, list[FirmProfile], ReturnPanel]:
    """Temperatures, firm profiles and monthly returns from the synthetic bundle."""
    b = generate_synthetic_bundle(seed, n_firms, k_regions, t_months, **kwargs)
    return b.temperatures, b.firms, b.monthly_returns
