"""Constraint functionals and conservation audits.

A constraint is *lawlike* when a trajectory that satisfies it at one time keeps
satisfying it under the equations of motion.  This module knows nothing about
any particular dynamical system: hosts (the wave solver, the particle
integrator) hand over a :class:`TrajectoryProbe` of opaque states and a
:class:`ConstraintFunctional` that knows how to score them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

from .errors import NumericalError, UsageError

DEFAULT_THRESHOLD = 1e-9
DEFAULT_SAMPLES = 64
# Below this state magnitude a residual is reported un-normalized.
MAGNITUDE_FLOOR = 1e-12

CONSERVED = "conserved"
NOT_CONSERVED = "not-conserved"


@dataclass(frozen=True)
class ConstraintFunctional:
    """A non-negative residual on host states; 0 means the constraint holds.

    ``raw`` measures the violation in the host's units.  When ``scale`` is
    given the residual is ``raw / scale``, unless the scale drops below
    :data:`MAGNITUDE_FLOOR`, in which case the raw value is used and the
    evaluation is flagged as absolute.
    """

    label: str
    raw: Callable[[Any], float]
    scale: Callable[[Any], float] | None = None

    def evaluate_flagged(self, state) -> tuple[float, bool]:
        value = float(self.raw(state))
        if self.scale is None:
            return value, False
        magnitude = float(self.scale(state))
        if not magnitude >= MAGNITUDE_FLOOR:
            return value, True
        return value / magnitude, False

    def evaluate(self, state) -> float:
        return self.evaluate_flagged(state)[0]

    __call__ = evaluate


@dataclass(frozen=True)
class TrajectoryProbe:
    times: tuple[float, ...]
    states: tuple[Any, ...]

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        states = tuple(self.states)
        if len(times) != len(states):
            raise UsageError(f"probe has {len(times)} times but {len(states)} states")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise UsageError("probe times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    def __len__(self):
        return len(self.times)


@dataclass(frozen=True)
class ConservationReport:
    label: str
    threshold: float
    residuals: tuple[tuple[float, float], ...]
    max_residual: float
    verdict: str
    absolute_times: tuple[float, ...] = field(default=())

    @property
    def conserved(self) -> bool:
        return self.verdict == CONSERVED

    def with_threshold(self, threshold: float) -> "ConservationReport":
        """Re-judge the same residuals against another threshold."""
        _check_threshold(threshold)
        verdict = CONSERVED if self.max_residual <= threshold else NOT_CONSERVED
        return ConservationReport(self.label, float(threshold), self.residuals,
                                  self.max_residual, verdict, self.absolute_times)

    def to_dict(self) -> dict:
        out = {
            "label": self.label,
            "threshold": self.threshold,
            "verdict": self.verdict,
            "max_residual": self.max_residual,
            "residuals": [[t, r] for t, r in self.residuals],
        }
        if self.absolute_times:
            out["absolute_times"] = list(self.absolute_times)
        return out

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: dict) -> "ConservationReport":
        return cls(
            label=data["label"],
            threshold=float(data["threshold"]),
            residuals=tuple((float(t), float(r)) for t, r in data["residuals"]),
            max_residual=float(data["max_residual"]),
            verdict=data["verdict"],
            absolute_times=tuple(data.get("absolute_times", ())),
        )


def _check_threshold(threshold):
    if not (math.isfinite(threshold) and threshold > 0):
        raise UsageError(f"threshold must be a positive finite number, got {threshold!r}")


def check_conservation(probe: TrajectoryProbe, constraint: ConstraintFunctional,
                       threshold: float = DEFAULT_THRESHOLD) -> ConservationReport:
    """Evaluate ``constraint`` at every probe time and judge preservation.

    The verdict is ``"conserved"`` iff the largest residual along the probe is
    at most ``threshold``.
    """
    if len(probe) == 0:
        raise UsageError("cannot audit an empty trajectory probe")
    _check_threshold(threshold)

    residuals = []
    absolute = []
    for t, state in zip(probe.times, probe.states):
        r, is_absolute = constraint.evaluate_flagged(state)
        if not math.isfinite(r):
            raise NumericalError(f"constraint {constraint.label!r} is non-finite at t={t!r}")
        if r < 0:
            raise NumericalError(f"constraint {constraint.label!r} is negative at t={t!r}")
        residuals.append((t, r))
        if is_absolute:
            absolute.append(t)

    max_residual = max(r for _, r in residuals)
    verdict = CONSERVED if max_residual <= threshold else NOT_CONSERVED
    return ConservationReport(constraint.label, float(threshold), tuple(residuals),
                              max_residual, verdict, tuple(absolute))


def uniform_times(t_end: float, samples: int = DEFAULT_SAMPLES) -> list[float]:
    """``samples`` evenly spaced probe times covering ``[0, t_end]``."""
    if samples < 1:
        raise UsageError("need at least one sample")
    if samples == 1 or t_end == 0:
        return [0.0]
    return [t_end * i / (samples - 1) for i in range(samples)]


def probe_from(states: Sequence, times: Sequence[float]) -> TrajectoryProbe:
    return TrajectoryProbe(tuple(times), tuple(states))


def two_point_equality_constraint(x0: float, d: float) -> ConstraintFunctional:
    """Residual of the instantaneous equality ``phi(x0) == phi(x0 + d)``.

    States must provide ``sample(x)`` (field value at an arbitrary position,
    positions wrapped onto the periodic domain) and a ``phi`` sample array.
    The difference is normalized by the RMS of the field.  Unlike a local
    constraint, this one relates two separated points and is generally not
    preserved by the wave equation.
    """
    x0 = float(x0)
    d = float(d)
    if not (math.isfinite(x0) and math.isfinite(d)):
        raise UsageError("two-point constraint needs finite x0 and d")

    def raw(state):
        return abs(state.sample(x0) - state.sample(x0 + d))

    def rms(state):
        phi = state.phi
        return math.sqrt(float((phi * phi).mean()))

    return ConstraintFunctional(f"two-point-equality(x0={x0!r}, d={d!r})", raw, rms)
