"""Synthetic daily ED-attendance generator with a fully known data-generating
process; stands in for the private hospital data in end-to-end tests.

value(t) = base + trend(t) + weekly[dow(t)]
         + yearly_amplitude * sin(2*pi*doy(t)/365.25)
         + holiday/event effects + flu bump + noise
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from datetime import date, timedelta
from importlib import resources

import numpy as np

from .errors import ContractError, DataQualityError
from .ingest import Calendar, CovariateTable, calendar_from_dict
from .seeds import derive_rng
from .series import DailySeries

MAX_CLAMP_RATE = 0.001

DEFAULT_CALENDAR_DOC = {
    "schema_version": 1,
    "bank_holidays": [
        {"rule": {"kind": "annual", "start": "01-01", "end": "01-01"}},
        {"rule": {"kind": "nth_weekday", "month": 5, "weekday": 1, "n": 1}},
        {"rule": {"kind": "last_weekday", "month": 5, "weekday": 1}},
        {"rule": {"kind": "last_weekday", "month": 8, "weekday": 1}},
        {"rule": {"kind": "annual", "start": "12-25", "end": "12-26"}},
    ],
    "school_holidays": [
        {"rule": {"kind": "annual", "start": "12-20", "end": "01-03"}},
        {"rule": {"kind": "annual", "start": "02-14", "end": "02-20"}},
        {"rule": {"kind": "annual", "start": "04-05", "end": "04-18"}},
        {"rule": {"kind": "annual", "start": "07-20", "end": "08-31"}},
        {"rule": {"kind": "annual", "start": "10-25", "end": "10-31"}},
    ],
}

# Rules for event names the bundled specs know about.
KNOWN_EVENT_RULES = {
    "notting_hill_carnival": {"kind": "last_weekday", "month": 8, "weekday": 7, "span_days": 2},
    "christmas": {"kind": "annual", "start": "12-24", "end": "12-26"},
    "new_year": {"kind": "annual", "start": "12-31", "end": "01-01"},
}


@dataclass(frozen=True)
class DgpSpec:
    base_level: float
    trend_segments: tuple = ((0, 0.0),)          # (start_day, slope/day), sorted
    weekly_profile: tuple = (0.0,) * 7           # Monday..Sunday additive offsets
    yearly_amplitude: float = 0.0
    holiday_effect: dict = field(default_factory=dict)   # {"bank": x, "school": y}
    event_effects: dict = field(default_factory=dict)    # name -> offset
    event_rules: dict = field(default_factory=dict)      # name -> rule (optional)
    flu_gain: float = 0.0
    flu_level: float = 5.0
    flu_winter_amplitude: float = 45.0
    noise_sd: float = 0.0
    noise_kind: str = "gaussian"                 # or "poisson"
    seed: int = 0
    start: date = date(2011, 4, 1)

    def __post_init__(self):
        if len(self.weekly_profile) != 7:
            raise ContractError("weekly_profile needs exactly 7 offsets")
        if self.noise_kind not in ("gaussian", "poisson"):
            raise ContractError(f"unknown noise kind {self.noise_kind!r}")
        if self.noise_sd < 0:
            raise ContractError("noise_sd must be >= 0")
        segs = tuple((int(s), float(v)) for s, v in self.trend_segments)
        if segs != tuple(sorted(segs)) or (segs and segs[0][0] != 0):
            raise ContractError("trend_segments must be sorted and start at day 0")
        object.__setattr__(self, "trend_segments", segs)
        object.__setattr__(self, "weekly_profile", tuple(float(v) for v in self.weekly_profile))
        for name in self.event_effects:
            if name not in self.event_rules and name not in KNOWN_EVENT_RULES:
                raise ContractError(f"no calendar rule for event {name!r}")

    def to_json_dict(self) -> dict:
        doc = asdict(self)
        doc["start"] = self.start.isoformat()
        doc["schema_version"] = 1
        return doc

    @classmethod
    def from_json_dict(cls, doc: dict) -> "DgpSpec":
        doc = dict(doc)
        doc.pop("schema_version", None)
        if "start" in doc:
            doc["start"] = date.fromisoformat(doc["start"])
        if "trend_segments" in doc:
            doc["trend_segments"] = tuple(tuple(seg) for seg in doc["trend_segments"])
        if "weekly_profile" in doc:
            doc["weekly_profile"] = tuple(doc["weekly_profile"])
        return cls(**doc)


def load_bundled_spec(name: str) -> DgpSpec:
    path = resources.files("edforecast").joinpath(f"specs/{name}.json")
    return DgpSpec.from_json_dict(json.loads(path.read_text()))


def _trend(spec: DgpSpec, n: int) -> np.ndarray:
    t = np.arange(n, dtype=float)
    out = np.zeros(n)
    segs = list(spec.trend_segments) + [(n, 0.0)]
    for (s0, slope), (s1, _) in zip(segs[:-1], segs[1:]):
        out += slope * np.clip(t - s0, 0.0, max(s1 - s0, 0))
    return out


def make_calendar(spec: DgpSpec, years) -> Calendar:
    doc = dict(DEFAULT_CALENDAR_DOC)
    doc = json.loads(json.dumps(doc))
    doc["events"] = []
    for name in sorted(spec.event_effects):
        rule = spec.event_rules.get(name, KNOWN_EVENT_RULES.get(name))
        doc["events"].append({"name": name, "rule": rule})
    return calendar_from_dict(doc, years)


def flu_signal(spec: DgpSpec, dates, rng) -> np.ndarray:
    doy = np.array([d.timetuple().tm_yday for d in dates], dtype=float)
    winter = np.clip(-np.cos(2 * np.pi * doy / 365.25), 0.0, None) ** 2
    sig = spec.flu_level + spec.flu_winter_amplitude * winter + rng.normal(0.0, 1.5, len(dates))
    return np.clip(sig, 0.0, None)


def weather_signal(dates, rng):
    doy = np.array([d.timetuple().tm_yday for d in dates], dtype=float)
    tmax = 14.0 + 8.0 * np.sin(2 * np.pi * (doy - 100) / 365.25) + rng.normal(0.0, 2.0, len(dates))
    spread = 5.0 + np.abs(rng.normal(0.0, 1.5, len(dates)))
    tmin = tmax - spread
    wet = rng.random(len(dates)) < 0.45
    precip = np.where(wet, rng.exponential(3.0, len(dates)), 0.0)
    return precip, tmax, tmin


def generate(spec: DgpSpec, n_days: int):
    """Generate (DailySeries, CovariateTable, ground-truth components).

    Ground-truth components sum exactly to the pre-clamp series; the clamp
    rate must stay below 0.1% or the spec is rejected.
    """
    if n_days < 15:
        raise ContractError("n_days too small to be useful")
    dates = [spec.start + timedelta(days=i) for i in range(n_days)]
    years = range(dates[0].year, dates[-1].year + 2)
    calendar = make_calendar(spec, years)
    bank, school, events = calendar.flags(dates)

    rng_noise = derive_rng(spec.seed, "dgp", "noise")
    rng_flu = derive_rng(spec.seed, "dgp", "flu")
    rng_weather = derive_rng(spec.seed, "dgp", "weather")

    doy = np.array([d.timetuple().tm_yday for d in dates], dtype=float)
    comp = {
        "base": np.full(n_days, float(spec.base_level)),
        "trend": _trend(spec, n_days),
        "weekly": np.array([spec.weekly_profile[d.isoweekday() - 1] for d in dates]),
        "yearly": spec.yearly_amplitude * np.sin(2 * np.pi * doy / 365.25),
        "holiday": (bank * float(spec.holiday_effect.get("bank", 0.0))
                    + school * float(spec.holiday_effect.get("school", 0.0))),
    }
    ev = np.zeros(n_days)
    for name, effect in spec.event_effects.items():
        ev += events[name] * float(effect)
    comp["event"] = ev

    flu = flu_signal(spec, dates, rng_flu)
    comp["flu_bump"] = spec.flu_gain * flu

    mean = sum(comp.values())
    if spec.noise_kind == "poisson":
        drawn = rng_noise.poisson(np.clip(mean, 0.0, None)).astype(float)
        comp["noise"] = drawn - mean
    else:
        comp["noise"] = rng_noise.normal(0.0, spec.noise_sd, n_days) if spec.noise_sd > 0 else np.zeros(n_days)
    pre_clamp = mean + comp["noise"]

    values = np.clip(pre_clamp, 0.0, None)
    clamp_rate = float(np.mean(pre_clamp < 0.0))
    if clamp_rate >= MAX_CLAMP_RATE:
        raise DataQualityError(f"spec rejected: clamp rate {clamp_rate:.2%} >= {MAX_CLAMP_RATE:.2%}")

    precip, tmax, tmin = weather_signal(dates, rng_weather)
    series = DailySeries(spec.start, values, "raw")
    cov = CovariateTable(
        start=spec.start, bank_holiday=bank, school_holiday=school,
        precipitation=precip, temp_max=tmax, temp_min=tmin,
        flu=flu, events=events,
    )
    truth = dict(comp)
    truth["pre_clamp"] = pre_clamp
    truth["clamp_rate"] = clamp_rate
    return series, cov, truth


def _month_frames(dates):
    """Split a date range into frames that break only at month boundaries
    and stay within the ingest module's maximum frame span."""
    month_starts = [0] + [i for i in range(1, len(dates)) if dates[i].day == 1]
    month_bounds = list(zip(month_starts, month_starts[1:] + [len(dates)]))
    frames = []
    i = 0
    while i < len(month_bounds):
        start_idx = month_bounds[i][0]
        j = i
        while (j + 1 < len(month_bounds)
               and month_bounds[j + 1][1] - start_idx <= 184):
            j += 1
        frames.append((start_idx, month_bounds[j][1] - 1))
        i = j + 1
    return frames


def emit_csv_bundle(spec: DgpSpec, n_days: int, out_dir) -> dict:
    """Write the generated data in the ingest module's file formats.

    The flu signal is emitted as month-aligned daily trends frames, each
    rescaled like a relative-volume download, plus the monthly series whose
    per-month means invert the rescaling exactly. Returns the written paths.
    """
    import os

    series, cov, truth = generate(spec, n_days)
    dates = series.dates()
    os.makedirs(out_dir, exist_ok=True)

    def write(name, text):
        path = os.path.join(out_dir, name)
        tmp = path + ".tmp"
        with open(tmp, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
        return path

    paths = {}
    lines = ["date,attendances"]
    lines += [f"{d.isoformat()},{float(v)!r}" for d, v in zip(dates, series.values)]
    paths["attendance"] = write("attendance.csv", "\n".join(lines) + "\n")

    lines = ["date,precip_mm,temp_max_c,temp_min_c"]
    lines += [f"{d.isoformat()},{float(p)!r},{float(tx)!r},{float(tn)!r}"
              for d, p, tx, tn in zip(dates, cov.precipitation,
                                      cov.temp_max, cov.temp_min)]
    paths["weather"] = write("weather.csv", "\n".join(lines) + "\n")

    doc = json.loads(json.dumps(DEFAULT_CALENDAR_DOC))
    doc["events"] = []
    for name in sorted(spec.event_effects):
        rule = spec.event_rules.get(name, KNOWN_EVENT_RULES.get(name))
        doc["events"].append({"name": name, "rule": rule})
    paths["calendar"] = write("calendar.json", json.dumps(doc, indent=2) + "\n")

    daily_paths = []
    for k, (i, j) in enumerate(_month_frames(dates)):
        chunk = cov.flu[i:j + 1]
        peak = float(chunk.max())
        scale = 100.0 / peak if peak > 0 else 1.0
        lines = ["date,score"]
        lines += [f"{d.isoformat()},{float(v * scale)!r}"
                  for d, v in zip(dates[i:j + 1], chunk)]
        daily_paths.append(write(f"trends_daily_{k:02d}.csv", "\n".join(lines) + "\n"))
    paths["trends_daily"] = daily_paths

    months: dict = {}
    for d, v in zip(dates, cov.flu):
        months.setdefault((d.year, d.month), []).append(v)
    lines = ["month,score"]
    lines += [f"{y}-{m:02d},{float(np.mean(vs))!r}"
              for (y, m), vs in sorted(months.items())]
    paths["trends_monthly"] = write("trends_monthly.csv", "\n".join(lines) + "\n")

    truth_doc = {"schema_version": 1, "spec": spec.to_json_dict(),
                 "clamp_rate": truth["clamp_rate"],
                 "components": {k: [float(x) for x in v]
                                for k, v in truth.items()
                                if isinstance(v, np.ndarray)}}
    paths["truth"] = write("truth.json", json.dumps(truth_doc) + "\n")
    return paths
