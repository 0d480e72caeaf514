"""Reference-trajectory generation for the tracking experiments."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

__all__ = ["AxisWaveform", "TrajectorySpec", "sample_axis", "generate"]

_KINDS = ("step", "sine", "triangle", "ramp_plus_sine", "composite")


@dataclass(frozen=True)
class AxisWaveform:
    """Single-axis reference shape in mrad.

    ``composite`` is an alias of ``ramp_plus_sine`` used by the combined
    experiments (the bundled configs pair a ramp with a 100 Hz sine).
    ``step_time`` delays the step edge; ``slope`` only applies to the
    ramp-bearing kinds.
    """

    kind: str = "sine"
    amplitude: float = 0.8
    frequency: float = 100.0
    phase: float = 0.0
    offset: float = 0.0
    slope: float = 0.0
    step_time: float = 0.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown trajectory kind {self.kind!r}")
        if self.kind in ("sine", "triangle", "ramp_plus_sine", "composite") and not self.frequency > 0:
            raise ValueError("periodic trajectories need frequency > 0")


def sample_axis(wf: AxisWaveform, t: np.ndarray) -> np.ndarray:
    """Evaluate one axis waveform on a time grid (seconds -> mrad)."""
    t = np.asarray(t, dtype=float)
    if wf.kind == "step":
        return wf.offset + wf.amplitude * (t >= wf.step_time)
    w = 2.0 * np.pi * wf.frequency
    if wf.kind == "sine":
        return wf.offset + wf.amplitude * np.sin(w * t + wf.phase)
    if wf.kind == "triangle":
        # odd, zero-mean triangle with the sine's phase convention and peak A
        return wf.offset + wf.amplitude * (2.0 / np.pi) * np.arcsin(np.sin(w * t + wf.phase))
    # ramp_plus_sine, with "composite" an alias used by the combined experiments
    return wf.offset + wf.slope * t + wf.amplitude * np.sin(w * t + wf.phase)


@dataclass(frozen=True)
class TrajectorySpec:
    """Dual-axis reference: one waveform per axis plus the run duration."""

    x: AxisWaveform
    y: AxisWaveform
    duration: float = 0.5

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("duration must be positive")

    @staticmethod
    def both(wf: AxisWaveform, duration: float) -> "TrajectorySpec":
        return TrajectorySpec(x=wf, y=replace(wf), duration=duration)


def generate(spec: TrajectorySpec, dt: float) -> np.ndarray:
    """Sample the dual-axis reference; returns an array of shape (steps, 2)."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    steps = int(spec.duration / dt)
    t = np.arange(steps) * dt
    return np.column_stack([sample_axis(spec.x, t), sample_axis(spec.y, t)])
