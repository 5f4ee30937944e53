"""Scoring functions mapping task metrics to match scores, plus metric helpers.

Registry ids accepted by :func:`get_scoring`:

``identity``
    metric already in [0, 1] (Acc@1, AP, PassAll, PDMS).
``affine:<scale>:<offset>``
    ``S = M * scale + offset``, e.g. ``affine:0.01:0`` for percentages.
``pdm``, ``pass_all``, ``mean``
    aliases of ``identity`` for the aggregated metrics those helpers produce.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .exceptions import ArgumentError, DomainError

CLAMP_TOLERANCE = 1e-6


@dataclass(frozen=True)
class ScoringFunction:
    id: str
    forward: Callable[[float], float]
    inverse: Callable[[float], float]
    metric_name: str = "metric"
    bijective: bool = True


def _identity(x: float) -> float:
    return x


IDENTITY = ScoringFunction("identity", _identity, _identity, "Acc@1")

_ALIASES = {
    "identity": IDENTITY,
    "pdm": ScoringFunction("pdm", _identity, _identity, "PDM Score"),
    "pass_all": ScoringFunction("pass_all", _identity, _identity, "PassAll"),
    "mean": ScoringFunction("mean", _identity, _identity, "mAP"),
}


def affine(scale: float, offset: float = 0.0, metric_name: str = "metric") -> ScoringFunction:
    if not (math.isfinite(scale) and math.isfinite(offset)) or scale <= 0:
        raise DomainError(f"affine scoring needs finite scale > 0, got scale={scale!r} offset={offset!r}")
    return ScoringFunction(
        f"affine:{scale:g}:{offset:g}",
        lambda m: m * scale + offset,
        lambda s: (s - offset) / scale,
        metric_name,
    )


def get_scoring(fn_id: str | ScoringFunction) -> ScoringFunction:
    """Resolve a registry id to a :class:`ScoringFunction`."""
    if isinstance(fn_id, ScoringFunction):
        return fn_id
    key = str(fn_id).strip()
    if key in _ALIASES:
        return _ALIASES[key]
    if key.startswith("affine:"):
        parts = key.split(":")
        if len(parts) != 3:
            raise DomainError(f"affine scoring id must be 'affine:<scale>:<offset>', got {key!r}")
        try:
            scale, offset = float(parts[1]), float(parts[2])
        except ValueError:
            raise DomainError(f"non-numeric affine parameters in {key!r}") from None
        return affine(scale, offset)
    raise DomainError(f"unknown scoring function {key!r}")


def apply_scoring(fn: ScoringFunction | str, m: float) -> float:
    """Map metric ``m`` to a match score, clamping float overshoot up to 1e-6."""
    fn = get_scoring(fn)
    if not math.isfinite(m):
        raise DomainError(f"metric must be finite, got {m!r}")
    s = fn.forward(m)
    if s < -CLAMP_TOLERANCE or s > 1.0 + CLAMP_TOLERANCE:
        raise DomainError(f"metric {m!r} maps to score {s!r} outside [0, 1] under {fn.id!r}")
    return min(1.0, max(0.0, s))


def invert_scoring(fn: ScoringFunction | str, s: float) -> float:
    fn = get_scoring(fn)
    if not (0.0 <= s <= 1.0):
        raise DomainError(f"match score must lie in [0, 1], got {s!r}")
    return fn.inverse(s)


def _nonempty(values: Iterable, what: str) -> list:
    values = list(values)
    if not values:
        raise ArgumentError(f"{what} needs at least one value")
    return values


def accuracy_at_1(correct_flags: Iterable[int | bool]) -> float:
    flags = _nonempty(correct_flags, "accuracy_at_1")
    for f in flags:
        if f not in (0, 1):
            raise DomainError(f"correctness flags must be 0 or 1, got {f!r}")
    return sum(int(f) for f in flags) / len(flags)


def mean_of_components(values: Iterable[float]) -> float:
    """Average per-threshold or per-bucket APs (COCO AP, Waymo mAP)."""
    vals = _nonempty(values, "mean_of_components")
    arr = np.asarray(vals, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("mean_of_components got a non-finite value")
    return math.fsum(vals) / len(vals)


def pass_all(test_results: Iterable[bool | str]) -> int:
    results = _nonempty(test_results, "pass_all")
    ok = []
    for r in results:
        if isinstance(r, str):
            if r.lower() not in ("pass", "fail"):
                raise DomainError(f"test result must be 'pass' or 'fail', got {r!r}")
            ok.append(r.lower() == "pass")
        else:
            ok.append(bool(r))
    return int(all(ok))


@dataclass(frozen=True)
class PdmComponents:
    nc: float
    dac: float
    ep: float
    ttc: float
    c: float

    def __post_init__(self):
        for name in ("nc", "dac", "ep", "ttc", "c"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise DomainError(f"PDM component {name} must lie in [0, 1], got {v!r}")


def pdm_score(components: PdmComponents) -> float:
    """NAVSIM PDM score: multiplicative gates times weighted sub-scores."""
    p = components
    return p.nc * p.dac * (5 * p.ep + 5 * p.ttc + 2 * p.c) / 12
