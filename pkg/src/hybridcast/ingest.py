"""CSV ingestion and cross-region date alignment.

Daily case counts arrive as long-format CSV (one row per region per day). This
module parses that into per-region time series sharing a single date axis:
any date that is absent or flagged missing in one region is dropped from all
regions, so downstream positional indexing lines up across regions.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import AlignmentError, DataFormatError, RowParseError

DATE_FORMAT = "%Y-%m-%d"


@dataclass(frozen=True)
class RawObservation:
    """One parsed CSV row: a case count for a region on a calendar date."""

    date: dt.date
    region: str
    cases: float

    def __post_init__(self):
        if not np.isfinite(self.cases) or self.cases < 0:
            raise ValueError(f"cases must be finite and >= 0, got {self.cases!r}")


@dataclass(frozen=True)
class MissingValue:
    """A row whose cases field was empty or unparseable."""

    date: dt.date
    region: str
    line: int
    raw: str


@dataclass
class TimeSeries:
    """Values for one region on a strictly increasing date axis."""

    region: str
    dates: tuple[dt.date, ...]
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if len(self.dates) != len(self.values):
            raise ValueError(
                f"{self.region}: {len(self.dates)} dates vs {len(self.values)} values"
            )
        for a, b in zip(self.dates, self.dates[1:]):
            if a >= b:
                raise ValueError(f"{self.region}: dates not strictly increasing at {b}")

    def __len__(self) -> int:
        return len(self.values)


@dataclass
class AlignedPanel:
    """Aligned per-region series plus the dates alignment discarded."""

    regions: dict[str, TimeSeries]
    dropped_dates: tuple[dt.date, ...] = field(default_factory=tuple)

    @property
    def dates(self) -> tuple[dt.date, ...]:
        first = next(iter(self.regions.values()))
        return first.dates

    @property
    def region_names(self) -> list[str]:
        return list(self.regions)


def parse_csv(
    text: str,
    date_col: str = "date",
    region_col: str = "area",
    cases_col: str = "cases",
) -> tuple[list[RawObservation], list[MissingValue]]:
    """Parse long-format CSV text into observations and missing-value records.

    Args:
        text: full CSV document, header row first.
        date_col / region_col / cases_col: header names to read from.

    Returns:
        (observations, missing): rows whose cases field is empty or does not
        parse as a number land in `missing`; a bad date or a negative count is
        a hard RowParseError carrying the 1-based line number.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise DataFormatError("no data rows") from None
    header = [h.strip() for h in header]
    try:
        i_date = header.index(date_col)
        i_region = header.index(region_col)
        i_cases = header.index(cases_col)
    except ValueError:
        raise DataFormatError(
            f"header {header!r} lacks required columns "
            f"({date_col!r}, {region_col!r}, {cases_col!r})"
        ) from None

    observations: list[RawObservation] = []
    missing: list[MissingValue] = []
    width = max(i_date, i_region, i_cases) + 1
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) < width:
            raise RowParseError(line_no, f"expected at least {width} columns, got {len(row)}")
        date_text = row[i_date].strip()
        try:
            date = dt.datetime.strptime(date_text, DATE_FORMAT).date()
        except ValueError:
            raise RowParseError(line_no, f"bad date {date_text!r}") from None
        region = row[i_region].strip()
        if not region:
            raise RowParseError(line_no, "empty region name")
        cases_text = row[i_cases].strip()
        try:
            cases = float(cases_text)
        except ValueError:
            missing.append(MissingValue(date, region, line_no, cases_text))
            continue
        if np.isnan(cases):
            # NaN markers written by dataframe tooling mean "absent", not corrupt
            missing.append(MissingValue(date, region, line_no, cases_text))
            continue
        if np.isinf(cases) or cases < 0:
            raise RowParseError(line_no, f"cases must be finite and >= 0, got {cases_text!r}")
        observations.append(RawObservation(date, region, cases))
    return observations, missing


def to_csv(
    observations: list[RawObservation],
    date_col: str = "date",
    region_col: str = "area",
    cases_col: str = "cases",
) -> str:
    """Serialize observations back to CSV at full float precision.

    parse_csv(to_csv(rows)) reproduces the rows exactly; used by tests and by
    the CLI when re-emitting cleaned data.
    """
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow([date_col, region_col, cases_col])
    for obs in observations:
        writer.writerow([obs.date.strftime(DATE_FORMAT), obs.region, repr(obs.cases)])
    return out.getvalue()


def align_regions(
    observations: list[RawObservation],
    missing: list[MissingValue] | None = None,
) -> AlignedPanel:
    """Build per-region series on the intersection of all regions' dates.

    Dates flagged in `missing` are removed everywhere, as are dates any region
    lacks entirely. Raises AlignmentError when no observations survive for
    some region (naming it) or when the regions share no dates at all.
    """
    if not observations:
        raise AlignmentError("no observations to align")
    by_region: dict[str, dict[dt.date, float]] = {}
    for obs in observations:
        slot = by_region.setdefault(obs.region, {})
        if obs.date in slot:
            raise AlignmentError(f"{obs.region}: duplicate observation for {obs.date}")
        slot[obs.date] = obs.cases

    common: set[dt.date] | None = None
    for dates in by_region.values():
        common = set(dates) if common is None else common & set(dates)
    assert common is not None
    flagged = {m.date for m in (missing or [])}
    keep = sorted(common - flagged)
    if not keep:
        raise AlignmentError("regions share no usable dates after alignment")

    all_dates = set()
    for dates in by_region.values():
        all_dates |= set(dates)
    dropped = tuple(sorted((all_dates | flagged) - set(keep)))

    regions = {
        name: TimeSeries(name, tuple(keep), np.array([by_region[name][d] for d in keep]))
        for name in sorted(by_region)
    }
    for name, series in regions.items():
        if len(series) == 0:
            raise AlignmentError(f"region {name} has no observations left after alignment")
    return AlignedPanel(regions=regions, dropped_dates=dropped)
