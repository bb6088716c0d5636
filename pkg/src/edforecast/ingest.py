"""Loading and alignment of attendance, holiday, weather, and search-volume data.

File formats:
  attendance CSV: ``date,attendances`` (ISO date, non-negative integer)
  weather CSV:    ``date,precip_mm,temp_max_c,temp_min_c`` (days may be missing)
  trends:         one CSV per daily frame ``date,score`` plus a monthly CSV
                  ``month,score`` (month as YYYY-MM)
  calendar JSON:  named date ranges and recurrence rules, see ``load_calendar``
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from datetime import date, timedelta

import numpy as np

from .errors import ContractError, CoverageError, DataQualityError, ParseError
from .series import DailySeries

MAX_FRAME_DAYS = 190          # a daily trends frame spans at most ~6 months
MAX_WEATHER_GAP = 7           # longest tolerated run of missing weather days


def _parse_date(text: str, path=None, line=None) -> date:
    try:
        return date.fromisoformat(text.strip())
    except ValueError:
        raise ParseError(f"{path}:{line}: invalid ISO date {text!r}")


def _read_csv(path, expected_header):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file")
        if [h.strip() for h in header] != expected_header:
            raise ParseError(f"{path}:1: expected header {','.join(expected_header)!r}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(expected_header):
                raise ParseError(f"{path}:{lineno}: expected {len(expected_header)} fields")
            rows.append((lineno, row))
    return rows


def load_attendance_csv(path) -> DailySeries:
    """Load a gap-free attendance series.

    One-day gaps are filled with the mean of their neighbours (and counted);
    longer gaps and duplicate dates are fatal.
    """
    rows = _read_csv(path, ["date", "attendances"])
    if not rows:
        raise DataQualityError(f"{path}: no attendance rows")
    records = {}
    for lineno, (d_txt, v_txt) in rows:
        d = _parse_date(d_txt, path, lineno)
        try:
            v = float(v_txt)
        except ValueError:
            raise ParseError(f"{path}:{lineno}: invalid attendance count {v_txt!r}")
        if v < 0:
            raise DataQualityError(f"{path}:{lineno}: negative attendance on {d}")
        if d in records:
            raise DataQualityError(f"{path}: duplicate date {d}")
        records[d] = v
    days = sorted(records)
    start, end = days[0], days[-1]
    n = (end - start).days + 1
    values = np.empty(n)
    filled = []
    for i in range(n):
        d = start + timedelta(days=i)
        if d in records:
            values[i] = records[d]
        else:
            prev_d, next_d = d - timedelta(days=1), d + timedelta(days=1)
            if prev_d in records and next_d in records:
                values[i] = 0.5 * (records[prev_d] + records[next_d])
                filled.append(d)
            else:
                raise DataQualityError(f"{path}: gap longer than one day around {d}")
    series = DailySeries(start, values, "raw")
    object.__setattr__(series, "filled_dates", tuple(filled))
    return series


# ---------------------------------------------------------------------------
# Holiday / event calendar
# ---------------------------------------------------------------------------

def _dates_for_rule(rule: dict, year: int) -> list[date]:
    kind = rule.get("kind")
    if kind == "annual":
        s_m, s_d = (int(x) for x in rule["start"].split("-"))
        e_m, e_d = (int(x) for x in rule["end"].split("-"))
        start = date(year, s_m, s_d)
        end = date(year if (e_m, e_d) >= (s_m, s_d) else year + 1, e_m, e_d)
        return [start + timedelta(days=i) for i in range((end - start).days + 1)]
    if kind in ("last_weekday", "nth_weekday"):
        month = int(rule["month"])
        weekday = int(rule["weekday"])  # Monday=1 .. Sunday=7
        span = int(rule.get("span_days", 1))
        if kind == "last_weekday":
            d = date(year + 1, 1, 1) if month == 12 else date(year, month + 1, 1)
            d -= timedelta(days=1)
            while d.isoweekday() != weekday:
                d -= timedelta(days=1)
        else:
            nth = int(rule["n"])
            d = date(year, month, 1)
            while d.isoweekday() != weekday:
                d += timedelta(days=1)
            d += timedelta(days=7 * (nth - 1))
        return [d + timedelta(days=i) for i in range(span)]
    raise ParseError(f"unknown calendar rule kind {kind!r}")


def _entry_dates(entry: dict, years) -> set[date]:
    out: set[date] = set()
    if "dates" in entry:
        out.update(_parse_date(t) for t in entry["dates"])
    if "start" in entry:
        start = _parse_date(entry["start"])
        end = _parse_date(entry.get("end", entry["start"]))
        if end < start:
            raise ParseError(f"calendar range ends before it starts: {entry}")
        out.update(start + timedelta(days=i) for i in range((end - start).days + 1))
    if "rule" in entry:
        for year in years:
            out.update(_dates_for_rule(entry["rule"], year))
    if not out:
        raise ParseError(f"calendar entry defines no dates: {entry}")
    return out


@dataclass(frozen=True)
class Calendar:
    """Evaluated holiday/event calendar over a year span."""

    bank_holidays: frozenset
    school_holidays: frozenset
    events: dict  # name -> frozenset of dates

    def flags(self, dates):
        bank = np.array([d in self.bank_holidays for d in dates])
        school = np.array([d in self.school_holidays for d in dates])
        ev = {name: np.array([d in days for d in dates]) for name, days in self.events.items()}
        return bank, school, ev


def calendar_from_dict(doc: dict, years) -> Calendar:
    years = list(years)
    bank: set[date] = set()
    for entry in doc.get("bank_holidays", []):
        bank |= _entry_dates(entry, years)
    school: set[date] = set()
    for entry in doc.get("school_holidays", []):
        school |= _entry_dates(entry, years)
    events = {}
    for entry in doc.get("events", []):
        name = entry.get("name")
        if not name:
            raise ParseError("event entry missing a name")
        events[name] = frozenset(_entry_dates(entry, years))
    return Calendar(frozenset(bank), frozenset(school), events)


def load_calendar(path, years) -> Calendar:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise ParseError(f"{path}: invalid JSON ({e})")
    return calendar_from_dict(doc, years)


# ---------------------------------------------------------------------------
# Weather
# ---------------------------------------------------------------------------

def load_weather_csv(path) -> dict:
    """Map date -> (precip_mm, temp_max, temp_min); missing days simply absent."""
    rows = _read_csv(path, ["date", "precip_mm", "temp_max_c", "temp_min_c"])
    out = {}
    for lineno, (d_txt, p_txt, tx_txt, tn_txt) in rows:
        d = _parse_date(d_txt, path, lineno)
        try:
            p, tx, tn = float(p_txt), float(tx_txt), float(tn_txt)
        except ValueError:
            raise ParseError(f"{path}:{lineno}: non-numeric weather value")
        if tx < tn:
            raise DataQualityError(f"{path}:{lineno}: temp_max < temp_min on {d}")
        if d in out:
            raise DataQualityError(f"{path}: duplicate weather date {d}")
        out[d] = (p, tx, tn)
    return out


# ---------------------------------------------------------------------------
# Search-volume trends
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrendsFrames:
    """Daily relative-volume frames plus a monthly relative-volume series.

    ``daily_frames`` are in download order; where frames overlap, the
    later-downloaded frame wins. ``monthly`` maps (year, month) -> score.
    """

    daily_frames: tuple  # of (start_date, np.ndarray)
    monthly: dict

    def __post_init__(self):
        for start, vals in self.daily_frames:
            if len(vals) == 0:
                raise ContractError("empty trends frame")
            if len(vals) > MAX_FRAME_DAYS:
                raise DataQualityError(f"trends frame starting {start} spans {len(vals)} days (> ~6 months)")


def load_trends(daily_paths, monthly_path) -> TrendsFrames:
    frames = []
    for path in daily_paths:
        rows = _read_csv(path, ["date", "score"])
        if not rows:
            raise DataQualityError(f"{path}: empty trends frame")
        days = {}
        for lineno, (d_txt, s_txt) in rows:
            d = _parse_date(d_txt, path, lineno)
            try:
                days[d] = float(s_txt)
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-numeric score")
        start, end = min(days), max(days)
        if len(days) != (end - start).days + 1:
            raise DataQualityError(f"{path}: trends frame has gaps")
        vals = np.array([days[start + timedelta(days=i)] for i in range(len(days))])
        frames.append((start, vals))
    monthly = {}
    rows = _read_csv(monthly_path, ["month", "score"])
    for lineno, (m_txt, s_txt) in rows:
        try:
            y, m = (int(x) for x in m_txt.strip().split("-"))
            monthly[(y, m)] = float(s_txt)
        except ValueError:
            raise ParseError(f"{monthly_path}:{lineno}: invalid month or score")
    return TrendsFrames(tuple(frames), monthly)


def adjust_trends(frames: TrendsFrames):
    """Rescale stitched daily trends so every month's mean matches the
    monthly series. Returns (start_date, adjusted_values).
    """
    if not frames.daily_frames:
        raise ContractError("no daily frames")
    start = min(s for s, _ in frames.daily_frames)
    end = max(s + timedelta(days=len(v) - 1) for s, v in frames.daily_frames)
    n = (end - start).days + 1
    daily = np.full(n, np.nan)
    for f_start, vals in frames.daily_frames:  # later frame wins on overlap
        i0 = (f_start - start).days
        daily[i0:i0 + len(vals)] = vals
    missing = np.flatnonzero(np.isnan(daily))
    if missing.size:
        raise CoverageError(f"daily trends frames leave {start + timedelta(days=int(missing[0]))} uncovered")

    adjusted = np.empty(n)
    dates = [start + timedelta(days=i) for i in range(n)]
    months = sorted({(d.year, d.month) for d in dates})
    for ym in months:
        if ym not in frames.monthly:
            raise CoverageError(f"no monthly trends value for {ym[0]}-{ym[1]:02d}")
        idx = np.array([i for i, d in enumerate(dates) if (d.year, d.month) == ym])
        target = frames.monthly[ym]
        m = daily[idx].mean()
        if target == 0.0:
            adjusted[idx] = 0.0
        elif m == 0.0:
            raise DataQualityError(f"daily trends are all zero in {ym[0]}-{ym[1]:02d} but monthly value is {target}")
        else:
            adjusted[idx] = daily[idx] * (target / m)
    return start, adjusted


# ---------------------------------------------------------------------------
# Covariate table
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CovariateTable:
    """Per-date covariates aligned to an attendance series' date range."""

    start: date
    bank_holiday: np.ndarray
    school_holiday: np.ndarray
    precipitation: np.ndarray
    temp_max: np.ndarray
    temp_min: np.ndarray
    flu: np.ndarray
    events: dict  # name -> bool array
    fill_counts: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.bank_holiday)
        for name in ("school_holiday", "precipitation", "temp_max", "temp_min", "flu"):
            if len(getattr(self, name)) != n:
                raise ContractError(f"covariate column {name} misaligned")
        for name, col in self.events.items():
            if len(col) != n:
                raise ContractError(f"event column {name} misaligned")
        if np.any(self.temp_max < self.temp_min):
            raise DataQualityError("temp_max < temp_min in covariate table")

    def __len__(self):
        return len(self.bank_holiday)

    def dates(self):
        return [self.start + timedelta(days=i) for i in range(len(self))]

    def event_names(self):
        return sorted(self.events)


def build_covariate_table(series: DailySeries, calendar: Calendar, weather: dict,
                          flu_start: date, flu_values) -> CovariateTable:
    """Align all covariate sources to the attendance series' date range.

    Missing weather days are filled by last observation carried forward
    (leading gaps take the first later observation); per-field fill counts
    are reported on the returned table.
    """
    dates = series.dates()
    bank, school, events = calendar.flags(dates)

    flu_values = np.asarray(flu_values, dtype=float)
    flu_end = flu_start + timedelta(days=len(flu_values) - 1)
    if flu_start > series.start or flu_end < series.end:
        raise CoverageError("adjusted trends do not cover the attendance date range")
    i0 = (series.start - flu_start).days
    flu = flu_values[i0:i0 + len(dates)].copy()

    precip = np.empty(len(dates))
    tmax = np.empty(len(dates))
    tmin = np.empty(len(dates))
    fills = 0
    run = 0
    last = None
    pending = []  # leading dates before the first observation
    for i, d in enumerate(dates):
        if d in weather:
            precip[i], tmax[i], tmin[i] = weather[d]
            if pending:
                for j in pending:
                    precip[j], tmax[j], tmin[j] = weather[d]
                fills += len(pending)
                pending = []
            last = weather[d]
            run = 0
        else:
            run += 1
            if run > MAX_WEATHER_GAP:
                raise DataQualityError(f"more than {MAX_WEATHER_GAP} consecutive missing weather days at {d}")
            if last is None:
                pending.append(i)
            else:
                precip[i], tmax[i], tmin[i] = last
                fills += 1
    if pending:
        raise DataQualityError("no weather observations in the attendance range")

    return CovariateTable(
        start=series.start, bank_holiday=bank, school_holiday=school,
        precipitation=precip, temp_max=tmax, temp_min=tmin, flu=flu,
        events=events, fill_counts={"weather": fills},
    )
