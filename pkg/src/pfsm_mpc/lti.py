"""Rational transfer functions, Tustin discretization, and MIMO plant assembly.

The steering-mirror electromechanics are identified as four continuous
single-input channels (direct and cross-axis per drive input).  This module
discretizes each channel with the bilinear transform, realizes it in
controllable canonical form, and stacks the realizations into one discrete
2-in / 2-out state-space model, optionally with a creep stage cascaded in
front of each drive input.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction
from math import comb

import numpy as np

__all__ = [
    "TransferFunction",
    "StateSpaceModel",
    "MimoPlantModel",
    "tustin_discretize",
    "to_ccf",
    "assemble_mimo",
    "simulate_ss",
    "default_mirror_model",
    "default_creep",
]

UNIT_CIRCLE_TOL = 1e-9  # modulus slack when classifying discrete poles


@dataclass(frozen=True)
class TransferFunction:
    """Proper rational function, coefficients in descending powers.

    ``dt == 0`` marks a continuous-time (s-domain) function; ``dt > 0`` a
    discrete-time (z-domain) one.
    """

    num: tuple
    den: tuple
    dt: float = 0.0

    def __post_init__(self):
        num = tuple(float(c) for c in np.atleast_1d(self.num))
        den = tuple(float(c) for c in np.atleast_1d(self.den))
        # strip leading zeros so degree comparisons are meaningful
        num = _strip(num)
        den = _strip(den)
        if den[0] == 0.0:
            raise ValueError("leading denominator coefficient must be nonzero")
        if len(num) > len(den):
            raise ValueError("transfer function must be proper")
        if not all(np.isfinite(num)) or not all(np.isfinite(den)):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    @property
    def order(self) -> int:
        return len(self.den) - 1

    def __call__(self, x: complex) -> complex:
        """Evaluate at a point of the complex plane (s or z)."""
        return np.polyval(self.num, x) / np.polyval(self.den, x)

    def dc_gain(self) -> float:
        """Gain at zero frequency (s = 0 continuous, z = 1 discrete)."""
        return float(np.real(self(1.0 if self.dt > 0 else 0.0)))

    def poles(self) -> np.ndarray:
        return np.roots(self.den)

    def is_zero(self) -> bool:
        return all(c == 0.0 for c in self.num)


def _strip(coeffs: tuple) -> tuple:
    i = 0
    while i < len(coeffs) - 1 and coeffs[i] == 0.0:
        i += 1
    return coeffs[i:]


@dataclass(frozen=True)
class StateSpaceModel:
    """Linear state-space model x+ = Ax + Bu, y = Cx + Du (dt=0: continuous)."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    dt: float = 0.0

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        D = np.atleast_2d(np.asarray(self.D, dtype=float))
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError("A must be square")
        if B.shape[0] != n or C.shape[1] != n:
            raise ValueError("A, B, C dimensions disagree")
        if D.shape != (C.shape[0], B.shape[1]):
            raise ValueError("D shape must be (outputs, inputs)")
        for name, m in (("A", A), ("B", B), ("C", C), ("D", D)):
            if not np.all(np.isfinite(m)):
                raise ValueError(f"{name} contains non-finite entries")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.C.shape[0]


@dataclass(frozen=True)
class MimoPlantModel:
    """Continuous dual-axis plant: four electromechanical channels plus
    optional per-input creep stages.

    Channel naming follows input-to-output order: ``g_xy`` maps the x drive
    input to the y-axis angle.  ``input_gain`` is the differential-drive
    factor applied to every channel (2 for the push-pull actuator pair).
    """

    g_xx: TransferFunction
    g_yy: TransferFunction
    g_xy: TransferFunction
    g_yx: TransferFunction
    creep_x: TransferFunction | None = None
    creep_y: TransferFunction | None = None
    input_gain: float = 2.0

    def channels(self) -> dict:
        return {"xx": self.g_xx, "xy": self.g_xy, "yx": self.g_yx, "yy": self.g_yy}


def tustin_discretize(tf: TransferFunction, dt: float) -> TransferFunction:
    """Bilinear (trapezoidal) discretization s -> (2/dt)(z-1)/(z+1).

    The substitution is carried out in exact rational arithmetic so that
    zero-frequency gain is preserved to rounding even for the badly scaled
    identified mirror polynomials (coefficients spanning ~16 decades).

    Parameters
    ----------
    tf : TransferFunction
        Proper continuous-time function.
    dt : float
        Sample period, > 0.  The denominator must not vanish at s = 2/dt
        (that point maps to z = infinity).

    Returns
    -------
    TransferFunction
        Discrete-time function with the same order and ``dt`` attached.
    """
    if tf.dt != 0.0:
        raise ValueError("input must be continuous-time (dt == 0)")
    if not dt > 0:
        raise ValueError("dt must be positive")
    d = tf.order
    w = Fraction(2) / Fraction(dt)
    num = _bilinear_lift(tf.num, d, w)
    den = _bilinear_lift(tf.den, d, w)
    if den[0] == 0:
        raise ValueError("denominator has a root at s = 2/dt; Tustin image is singular")
    lead = den[0]
    return TransferFunction(
        tuple(float(c / lead) for c in num),
        tuple(float(c / lead) for c in den),
        dt=dt,
    )


def _bilinear_lift(coeffs, d: int, w: Fraction) -> list:
    """Expand sum_k c_k * w^k * (z-1)^k * (z+1)^(d-k) as z-polynomial coefficients."""
    out = [Fraction(0)] * (d + 1)
    dd = len(coeffs) - 1
    for i, c in enumerate(coeffs):
        k = dd - i  # power of s carried by this coefficient
        cf = Fraction(c) * w**k
        if cf == 0:
            continue
        for a in range(k + 1):
            ca = comb(k, a) * (-1) ** (k - a)
            for b in range(d - k + 1):
                out[d - (a + b)] += cf * ca * comb(d - k, b)
    return out


def to_ccf(tf: TransferFunction) -> StateSpaceModel:
    """Controllable-canonical-form realization of a discrete transfer function.

    Returns the companion-matrix realization whose impulse response equals the
    long division of ``tf``; a pure gain realizes with zero states.
    """
    if tf.dt <= 0:
        raise ValueError("to_ccf expects a discrete-time transfer function")
    den = np.asarray(tf.den, dtype=float)
    if den[0] == 0.0:
        raise ValueError("leading denominator coefficient is zero")
    a = den / den[0]
    num = np.concatenate([np.zeros(len(a) - len(tf.num)), np.asarray(tf.num) / den[0]])
    d = len(a) - 1
    b0 = num[0]
    if d == 0:
        return StateSpaceModel(
            np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), [[b0]], dt=tf.dt
        )
    beta = num[1:] - b0 * a[1:]
    A = np.zeros((d, d))
    A[0, :] = -a[1:]
    A[1:, :-1] = np.eye(d - 1)
    B = np.zeros((d, 1))
    B[0, 0] = 1.0
    return StateSpaceModel(A, B, beta.reshape(1, -1), [[b0]], dt=tf.dt)


def simulate_ss(model: StateSpaceModel, u_seq: np.ndarray, x0=None) -> np.ndarray:
    """Drive a discrete model with an input sequence; returns the output sequence.

    ``u_seq`` has one row per step.  The output row k is C x(k) + D u(k).
    """
    u_seq = np.atleast_2d(np.asarray(u_seq, dtype=float))
    if u_seq.shape[1] != model.n_inputs:
        raise ValueError("input sequence width does not match model inputs")
    x = np.zeros(model.n_states) if x0 is None else np.asarray(x0, dtype=float).copy()
    y = np.empty((u_seq.shape[0], model.n_outputs))
    A, B, C, D = model.A, model.B, model.C, model.D
    for k, u in enumerate(u_seq):
        y[k] = C @ x + D @ u
        x = A @ x + B @ u
    return y


def assemble_mimo(plant: MimoPlantModel, dt: float, include_creep: bool = False) -> StateSpaceModel:
    """Discretize and stack the dual-axis plant into one state-space model.

    Each channel is scaled by ``input_gain``, discretized with the Tustin
    method, and realized in controllable canonical form.  When creep is
    enabled, a single creep realization per drive input feeds both channels
    of that column, so a first-order creep pair adds exactly two states.

    Channels whose discrete poles land outside the unit circle (beyond the
    classification tolerance) trigger a warning but are still assembled.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    gain = plant.input_gain

    def realize(tf: TransferFunction, scale: float) -> StateSpaceModel:
        scaled = TransferFunction(tuple(scale * c for c in tf.num), tf.den)
        tfd = tustin_discretize(scaled, dt)
        mods = np.abs(np.roots(tfd.den))
        if mods.size and mods.max() > 1.0 + UNIT_CIRCLE_TOL:
            warnings.warn(
                f"channel poles outside the unit circle (max modulus {mods.max():.6g})",
                RuntimeWarning,
                stacklevel=3,
            )
        return to_ccf(tfd)

    creeps = {}
    if include_creep:
        for axis, ctf in (("x", plant.creep_x), ("y", plant.creep_y)):
            creeps[axis] = realize(ctf, 1.0) if ctf is not None else None

    # column x drives channels xx (-> theta_x) and xy (-> theta_y); column y
    # drives yx and yy.  State order: [creep_x, xx, xy, creep_y, yx, yy].
    columns = [("x", 0, [("xx", 0), ("xy", 1)]), ("y", 1, [("yx", 0), ("yy", 1)])]
    chans = plant.channels()

    blocks = []  # (A, rows of B contribution, C rows), assembled below
    n_total = 0
    entries = []
    for axis, j, outs in columns:
        creep = creeps.get(axis) if include_creep else None
        if creep is not None:
            entries.append(("creep", axis, j, None, creep, n_total))
            n_total += creep.n_states
        for name, i in outs:
            blk = realize(chans[name], gain)
            entries.append(("chan", axis, j, i, blk, n_total))
            n_total += blk.n_states

    A = np.zeros((n_total, n_total))
    B = np.zeros((n_total, 2))
    C = np.zeros((2, n_total))
    D = np.zeros((2, 2))
    creep_pos = {}
    for kind, axis, j, i, blk, pos in entries:
        n = blk.n_states
        A[pos : pos + n, pos : pos + n] = blk.A
        if kind == "creep":
            B[pos : pos + n, j] = blk.B[:, 0]
            creep_pos[axis] = (pos, blk)
            continue
        if axis in creep_pos:
            cpos, cblk = creep_pos[axis]
            cn = cblk.n_states
            # channel input is the creep output: x_ch+ = A x_ch + B (Cc x_c + Dc v_j)
            A[pos : pos + n, cpos : cpos + cn] = blk.B @ cblk.C
            B[pos : pos + n, j] = (blk.B * cblk.D[0, 0])[:, 0]
            C[i, cpos : cpos + cn] += blk.D[0, 0] * cblk.C[0, :]
            D[i, j] += blk.D[0, 0] * cblk.D[0, 0]
        else:
            B[pos : pos + n, j] = blk.B[:, 0]
            D[i, j] += blk.D[0, 0]
        C[i, pos : pos + n] = blk.C[0, :]
    return StateSpaceModel(A, B, C, D, dt=dt)


# Bundled fourth-order electromechanical model of a dual-axis piezo steering
# mirror (reduced identified coefficients; angle in mrad, drive in volts).
_EM_XX = TransferFunction(
    (1.509e13, 2.03e12), (1.0, 1.135e8, 7.095e11, 1.13e15, 7.04e8)
)
_EM_YY = TransferFunction(
    (1.737e14, 5.441e13), (1.0, 1.14e9, 8.011e12, 1.247e16, 4.259e11)
)
_EM_XY = TransferFunction(
    (3.728e4, -7.692e6, 4.68e11), (1.0, 5.633e4, 1.234e9, 3.369e12, 4.755e15)
)
_EM_YX = TransferFunction(
    (1.537e5, 1.543e8, 1.749e12), (1.0, 5.103e4, 8.02e8, 2.18e12, 2.77e15)
)


def default_creep() -> TransferFunction:
    """Synthetic near-DC creep stage (z = 0.8, p = 0.5 rad/s), unity at high frequency."""
    return TransferFunction((1.0, 0.8), (1.0, 0.5))


def default_mirror_model(include_creep_stages: bool = False) -> MimoPlantModel:
    """Bundled identified mirror model; creep stages attached only on request."""
    creep = default_creep() if include_creep_stages else None
    return MimoPlantModel(
        g_xx=_EM_XX,
        g_yy=_EM_YY,
        g_xy=_EM_XY,
        g_yx=_EM_YX,
        creep_x=creep,
        creep_y=creep,
        input_gain=2.0,
    )
