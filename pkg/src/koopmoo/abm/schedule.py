"""Control schedules with closed-form derivatives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError


@dataclass(frozen=True)
class ControlSchedule:
    """Constant or logistic control ``u(t)``.

    ``form="ramp"`` is ``A / (1 + Q exp(-B t))``, rising from ``A/(1+Q)`` to
    ``A``.  ``form="literal"`` is ``A Q / (1 + exp(B t))``.
    """

    kind: str = "constant"
    value: tuple = (0.0,)
    A: float = 0.5
    Q: float = 1000.0
    B: float = 0.1
    form: str = "ramp"
    channels: int = 1

    def __post_init__(self):
        if self.kind not in ("constant", "logistic"):
            raise ConfigurationError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "logistic":
            if self.A <= 0 or self.Q <= 0:
                raise ConfigurationError("logistic schedule needs A > 0 and Q > 0")
            if self.form not in ("ramp", "literal"):
                raise ConfigurationError(f"unknown logistic form {self.form!r}")
        object.__setattr__(self, "value", tuple(float(v) for v in np.atleast_1d(self.value)))

    @classmethod
    def constant(cls, value) -> "ControlSchedule":
        return cls(kind="constant", value=tuple(np.atleast_1d(value)))

    @classmethod
    def logistic(cls, A=0.5, Q=1000.0, B=0.1, form="ramp", channels=1) -> "ControlSchedule":
        return cls(kind="logistic", A=A, Q=Q, B=B, form=form, channels=channels)

    @property
    def dim(self) -> int:
        return len(self.value) if self.kind == "constant" else self.channels

    def __call__(self, t) -> np.ndarray:
        return logistic_control(self, t)[0] if self.kind == "logistic" else np.array(self.value)

    def derivative(self, t) -> np.ndarray:
        if self.kind == "constant":
            return np.zeros(self.dim)
        return logistic_control(self, t)[1]

    def law(self, u):
        """Derivative expressed through the current value, ``udot = f(u)``."""
        u = np.asarray(u, dtype=float)
        if self.kind == "constant":
            return np.zeros_like(u)
        if self.form == "ramp":
            return self.B * u * (1.0 - u / self.A)
        return -self.B * u + self.B / (self.A * self.Q) * u**2


def logistic_control(schedule: ControlSchedule, t):
    """Value and time derivative of a logistic schedule at ``t >= 0``."""
    t = np.asarray(t, dtype=float)
    A, Q, B = schedule.A, schedule.Q, schedule.B
    if schedule.form == "ramp":
        u = A / (1.0 + Q * np.exp(-B * t))
        udot = B * u * (1.0 - u / A)
    else:
        u = A * Q / (1.0 + np.exp(B * t))
        udot = -B * u + B / (A * Q) * u**2
    if schedule.channels > 1:
        u = np.full(schedule.channels, u)
        udot = np.full(schedule.channels, udot)
    return u, udot
