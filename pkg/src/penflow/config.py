"""JSON run configuration: strict parsing, defaults with provenance, round-trip.

The document is a single JSON object with one section per model component.
Unknown keys are rejected anywhere in the tree, every invariant of the
domain types is enforced at parse time, and each resolved leaf is recorded
with an ``explicit`` or ``default`` flag.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

from .control import Bounds, Horizon, UpdateSchedule, default_update_schedule
from .demand import MeanFunction, OUParams, Sinusoid
from .errors import PenflowError, ValidationError
from .montecarlo import MCConfig
from .objective import PenaltyParams
from .transport import GridSpec

DEFAULT_SEED = 20260809
DEFAULT_BAND_LEVELS = (0.5, 0.9, 0.99)
DEFAULT_QUANTILE_LEVELS = (0.05, 0.5, 0.95)
DEFAULT_OUT_DIR = "artifacts"
DEFAULT_N_UPDATES = 5

_MISSING = object()

_REQUIRED = (
    ("demand", "kappa"), ("demand", "sigma"), ("demand", "y0"), ("demand", "mean"),
    ("transport", "dx"), ("transport", "lambda"), ("transport", "T"),
    ("penalty", "alpha"),
)


@dataclass(frozen=True)
class RunConfig:
    """Fully validated run configuration."""

    ou: OUParams
    grid: GridSpec
    horizon: Horizon
    pen: PenaltyParams
    bounds: Bounds
    updates: UpdateSchedule
    mc: MCConfig
    band_levels: tuple[float, ...]
    out_dir: str
    provenance: tuple[tuple[str, Any, str], ...] = field(compare=False, repr=False,
                                                         default=())

    def defaulted(self) -> list[tuple[str, Any]]:
        """(key path, value) of every field that fell back to its default."""
        return [(k, v) for k, v, src in self.provenance if src == "default"]


class _Section:
    """One object level of the document: typed getters plus provenance."""

    def __init__(self, doc: Any, path: str, provenance: list):
        if not isinstance(doc, dict):
            raise ValidationError(f"{path}: expected an object, got {type(doc).__name__}")
        self.doc = doc
        self.path = path
        self.provenance = provenance
        self.seen: set[str] = set()

    def _record(self, key: str, value: Any, source: str) -> Any:
        self.provenance.append((f"{self.path}.{key}", value, source))
        return value

    def has(self, key: str) -> bool:
        return key in self.doc

    def raw(self, key: str) -> Any:
        self.seen.add(key)
        return self.doc[key]

    def number(self, key: str, default: Any = _MISSING) -> Any:
        if key not in self.doc:
            if default is _MISSING:
                raise ValidationError(f"{self.path}.{key}: required key missing")
            return self._record(key, default, "default")
        v = self.raw(key)
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ValidationError(f"{self.path}.{key}: expected a number, got {v!r}")
        if not math.isfinite(float(v)):
            raise ValidationError(f"{self.path}.{key}: must be finite, got {v}")
        return self._record(key, float(v), "explicit")

    def number_or_null(self, key: str, default: Any = _MISSING) -> Any:
        if key in self.doc and self.doc[key] is None:
            self.seen.add(key)
            return self._record(key, None, "explicit")
        return self.number(key, default)

    def integer(self, key: str, default: Any = _MISSING) -> Any:
        if key not in self.doc:
            if default is _MISSING:
                raise ValidationError(f"{self.path}.{key}: required key missing")
            return self._record(key, default, "default")
        v = self.raw(key)
        if isinstance(v, bool) or not isinstance(v, int):
            raise ValidationError(f"{self.path}.{key}: expected an integer, got {v!r}")
        return self._record(key, v, "explicit")

    def string(self, key: str, default: Any = _MISSING) -> Any:
        if key not in self.doc:
            if default is _MISSING:
                raise ValidationError(f"{self.path}.{key}: required key missing")
            return self._record(key, default, "default")
        v = self.raw(key)
        if not isinstance(v, str):
            raise ValidationError(f"{self.path}.{key}: expected a string, got {v!r}")
        return self._record(key, v, "explicit")

    def number_list(self, key: str, default: Any = _MISSING) -> Any:
        if key not in self.doc:
            if default is _MISSING:
                raise ValidationError(f"{self.path}.{key}: required key missing")
            return self._record(key, tuple(default), "default")
        v = self.raw(key)
        if not isinstance(v, list) or any(
                isinstance(x, bool) or not isinstance(x, (int, float)) for x in v):
            raise ValidationError(f"{self.path}.{key}: expected a list of numbers, got {v!r}")
        return self._record(key, tuple(float(x) for x in v), "explicit")

    def section(self, key: str) -> "_Section":
        self.seen.add(key)
        return _Section(self.doc.get(key, {}), f"{self.path}.{key}", self.provenance)

    def finish(self) -> None:
        unknown = set(self.doc) - self.seen
        if unknown:
            raise ValidationError(f"{self.path}: unknown key(s) {sorted(unknown)}")


def _parse_mean(sec: _Section) -> MeanFunction:
    if sec.has("knots"):
        raw = sec.raw("knots")
        if not isinstance(raw, list) or any(
                not isinstance(k, list) or len(k) != 2 for k in raw):
            raise ValidationError(f"{sec.path}.knots: expected a list of [time, value] pairs")
        sec._record("knots", raw, "explicit")
        sec.finish()
        return MeanFunction(knots=tuple((float(t), float(v)) for t, v in raw))
    offset = sec.number("offset", default=0.0)
    sinusoids: list[Sinusoid] = []
    if sec.has("sinusoids"):
        raw = sec.raw("sinusoids")
        if not isinstance(raw, list):
            raise ValidationError(f"{sec.path}.sinusoids: expected a list")
        sec._record("sinusoids", raw, "explicit")
        for i, item in enumerate(raw):
            s = _Section(item, f"{sec.path}.sinusoids[{i}]", sec.provenance)
            sinusoids.append(Sinusoid(amplitude=s.number("amplitude"),
                                      frequency=s.number("frequency"),
                                      phase=s.number("phase", default=0.0)))
            s.finish()
    sec.finish()
    return MeanFunction(offset=offset, sinusoids=tuple(sinusoids))


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON configuration document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"configuration is not valid JSON: {exc}") from exc
    return build_config(doc)


def build_config(doc: Any) -> RunConfig:
    """Validate an already-decoded configuration document."""
    if not isinstance(doc, dict):
        raise ValidationError("configuration root must be a JSON object")
    missing = [".".join(path) for path in _REQUIRED
               if not isinstance(doc.get(path[0]), dict) or path[1] not in doc[path[0]]]
    if missing:
        raise ValidationError("required key(s) missing: " + ", ".join(missing))

    provenance: list[tuple[str, Any, str]] = []
    root = _Section(doc, "config", provenance)
    try:
        dem = root.section("demand")
        mean = _parse_mean(dem.section("mean"))
        ou = OUParams(kappa=dem.number("kappa"), sigma=dem.number("sigma"),
                      y0=dem.number("y0"), mu=mean)
        dem.finish()

        tr = root.section("transport")
        dx = tr.number("dx")
        lam = tr.number("lambda")
        T = tr.number("T")
        if lam <= 0.0:
            raise ValidationError("config.transport.lambda: must be positive")
        dt = tr.number("dt", default=dx / lam)
        tr.finish()
        grid = GridSpec(dx=dx, lam=lam, dt=dt, T=T)
        horizon = Horizon(T=T, lam=lam)

        pen_sec = root.section("penalty")
        pen = PenaltyParams(alpha=pen_sec.number("alpha"))
        pen_sec.finish()

        b = root.section("bounds")
        bounds = Bounds(u_min=b.number("u_min", default=0.0),
                        u_max=b.number_or_null("u_max", default=None))
        b.finish()

        up = root.section("updates")
        if up.has("times"):
            if up.has("count"):
                raise ValidationError(
                    "config.updates: give either 'times' or 'count', not both")
            updates = UpdateSchedule(times=up.number_list("times"))
        else:
            n_up = up.integer("count", default=DEFAULT_N_UPDATES)
            if n_up < 1:
                raise ValidationError("config.updates.count: must be at least 1")
            updates = default_update_schedule(grid, horizon, n_up)
            up._record("times", updates.times, "default")
        updates.step_indices(grid, horizon)
        up.finish()

        mc_sec = root.section("mc")
        seed = mc_sec.integer("seed", default=DEFAULT_SEED)
        n_paths = mc_sec.integer("n_paths", default=1000)
        policy = mc_sec.string("policy", default="cm1").lower()
        mc_sec.finish()

        out = root.section("output")
        band_levels = out.number_list("band_levels", default=DEFAULT_BAND_LEVELS)
        quantile_levels = out.number_list("quantile_levels",
                                          default=DEFAULT_QUANTILE_LEVELS)
        out_dir = out.string("directory", default=DEFAULT_OUT_DIR)
        out.finish()
        if any(not 0.0 < q < 1.0 for q in band_levels):
            raise ValidationError("config.output.band_levels: levels must lie in (0, 1)")
        mc = MCConfig(seed=seed, n_paths=n_paths, policy=policy,
                      updates=updates, quantile_levels=quantile_levels)
        root.finish()
    except PenflowError:
        raise
    except (TypeError, ValueError) as exc:
        raise ValidationError(str(exc)) from exc

    return RunConfig(ou=ou, grid=grid, horizon=horizon, pen=pen, bounds=bounds,
                     updates=updates, mc=mc, band_levels=tuple(band_levels),
                     out_dir=out_dir, provenance=tuple(provenance))


def to_doc(cfg: RunConfig) -> dict:
    """Serialize a RunConfig back to the document form (all fields explicit)."""
    mean: dict[str, Any]
    if cfg.ou.mu.knots is not None:
        mean = {"knots": [[t, v] for t, v in cfg.ou.mu.knots]}
    else:
        mean = {"offset": cfg.ou.mu.offset,
                "sinusoids": [{"amplitude": s.amplitude, "frequency": s.frequency,
                               "phase": s.phase} for s in cfg.ou.mu.sinusoids]}
    return {
        "demand": {"kappa": cfg.ou.kappa, "sigma": cfg.ou.sigma, "y0": cfg.ou.y0,
                   "mean": mean},
        "transport": {"dx": cfg.grid.dx, "lambda": cfg.grid.lam, "dt": cfg.grid.dt,
                      "T": cfg.grid.T},
        "penalty": {"alpha": cfg.pen.alpha},
        "bounds": {"u_min": cfg.bounds.u_min, "u_max": cfg.bounds.u_max},
        "updates": {"times": list(cfg.updates.times)},
        "mc": {"seed": cfg.mc.seed, "n_paths": cfg.mc.n_paths, "policy": cfg.mc.policy},
        "output": {"band_levels": list(cfg.band_levels),
                   "quantile_levels": list(cfg.mc.quantile_levels),
                   "directory": cfg.out_dir},
    }


def apply_overrides(doc: Any, overrides: list[str]) -> Any:
    """Apply ``key.path=value`` overrides to the raw document.

    Values are decoded as JSON scalars where possible and fall back to
    plain strings; the result still goes through full validation.
    """
    if not isinstance(doc, dict):
        raise ValidationError("configuration root must be a JSON object")
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ValidationError(f"override {item!r} is not of the form key.path=value")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        parts = key.split(".")
        node = doc
        for part in parts[:-1]:
            nxt = node.setdefault(part, {})
            if not isinstance(nxt, dict):
                raise ValidationError(f"override {key!r} descends into a non-object")
            node = nxt
        node[parts[-1]] = value
    return doc
