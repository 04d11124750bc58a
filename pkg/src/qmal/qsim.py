"""Dense statevector simulator, batched over samples.

Bit convention: in a basis index ``b`` of an n-qubit register, qubit ``q``
lives in bit ``n - 1 - q``, so qubit 0 is the most significant bit. A state
may hold a single vector of shape ``(2**n,)`` or a batch of shape
``(B, 2**n)``; every gate acts on all batch rows at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AngleOutOfRange, QubitOutOfRange, SameQubit

MAX_QUBITS = 12
_ANGLE_SLACK = 1e-12


@dataclass(frozen=True)
class Rotation:
    axis: str
    theta: float

    def matrix(self) -> np.ndarray:
        c, s = np.cos(self.theta / 2), np.sin(self.theta / 2)
        if self.axis == "X":
            return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
        if self.axis == "Y":
            return np.array([[c, -s], [s, c]], dtype=complex)
        if self.axis == "Z":
            return np.array([[np.exp(-0.5j * self.theta), 0], [0, np.exp(0.5j * self.theta)]],
                            dtype=complex)
        raise ValueError(f"unknown rotation axis {self.axis!r}")


def RX(theta):
    return Rotation("X", theta)


def RY(theta):
    return Rotation("Y", theta)


def RZ(theta):
    return Rotation("Z", theta)


class StateVector:
    """Amplitudes of an n-qubit register, mutated in place by gates."""

    def __init__(self, amps, n: int):
        if not 1 <= n <= MAX_QUBITS:
            raise ValueError(f"qubit count must be in [1, {MAX_QUBITS}], got {n}")
        amps = np.asarray(amps, dtype=complex)
        if amps.shape[-1] != 2**n or amps.ndim > 2:
            raise ValueError(f"amplitude shape {amps.shape} does not fit {n} qubits")
        self.amps = amps
        self.n = n

    @classmethod
    def zero(cls, n: int, batch: int | None = None) -> "StateVector":
        shape = (2**n,) if batch is None else (batch, 2**n)
        amps = np.zeros(shape, dtype=complex)
        amps[..., 0] = 1.0
        return cls(amps, n)

    def copy(self) -> "StateVector":
        return StateVector(self.amps.copy(), self.n)

    def norm_sq(self):
        return np.sum(np.abs(self.amps) ** 2, axis=-1)

    def _tensor(self) -> np.ndarray:
        # view with one length-2 axis per qubit, after any batch axis
        return self.amps.reshape(self.amps.shape[:-1] + (2,) * self.n)

    def _axis(self, q: int) -> int:
        return self.amps.ndim - 1 + q

    def _check(self, *qubits: int) -> None:
        for q in qubits:
            if not 0 <= q < self.n:
                raise QubitOutOfRange(f"qubit {q} outside register of {self.n}")
        if len(set(qubits)) != len(qubits):
            raise SameQubit(f"gate qubits must differ, got {qubits}")

    def _index(self, fixed: dict[int, int]) -> tuple:
        idx = [slice(None)] * (self.amps.ndim - 1 + self.n)
        for q, v in fixed.items():
            idx[self._axis(q)] = v
        return tuple(idx)

    def _apply_1q(self, matrix: np.ndarray, target: int, fixed: dict[int, int]) -> None:
        t = self._tensor()
        i0 = self._index({**fixed, target: 0})
        i1 = self._index({**fixed, target: 1})
        a0 = t[i0].copy()
        a1 = t[i1]
        t[i0] = matrix[0, 0] * a0 + matrix[0, 1] * a1
        t[i1] = matrix[1, 0] * a0 + matrix[1, 1] * a1

    def rotate(self, q: int, rotation: Rotation) -> "StateVector":
        self._check(q)
        self._apply_1q(rotation.matrix(), q, {})
        return self

    def apply_matrix(self, q: int, matrix) -> "StateVector":
        self._check(q)
        self._apply_1q(np.asarray(matrix, dtype=complex), q, {})
        return self

    def cnot(self, control: int, target: int) -> "StateVector":
        self._check(control, target)
        t = self._tensor()
        i0 = self._index({control: 1, target: 0})
        i1 = self._index({control: 1, target: 1})
        swap = t[i0].copy()
        t[i0] = t[i1]
        t[i1] = swap
        return self

    def controlled_rotate(self, control: int, control_value: int, target: int,
                          rotation: Rotation) -> "StateVector":
        self._check(control, target)
        if control_value not in (0, 1):
            raise ValueError(f"control_value must be 0 or 1, got {control_value!r}")
        self._apply_1q(rotation.matrix(), target, {control: control_value})
        return self

    def expect_z(self, q: int):
        self._check(q)
        probs = np.abs(self._tensor()) ** 2
        ax = self._axis(q)
        p0 = np.take(probs, 0, axis=ax)
        p1 = np.take(probs, 1, axis=ax)
        lead = self.amps.ndim - 1
        axes = tuple(range(lead, p0.ndim))
        z = np.sum(p0, axis=axes) - np.sum(p1, axis=axes)
        return float(z) if lead == 0 else z


def encode(angles) -> StateVector:
    """Product-state encoding: qubit i -> cos(x_i)|0> + sin(x_i)|1>.

    Accepts one angle vector or a (B, n) batch. Angles must lie in [0, pi/2].
    """
    x = np.asarray(angles, dtype=float)
    if x.ndim not in (1, 2) or x.shape[-1] < 1:
        raise ValueError(f"angles must be 1-D or 2-D, got shape {x.shape}")
    if np.any(~np.isfinite(x)) or np.any(x < -_ANGLE_SLACK) or np.any(x > np.pi / 2 + _ANGLE_SLACK):
        raise AngleOutOfRange("encoding angles must lie in [0, pi/2]")
    batch = np.clip(x.reshape(-1, x.shape[-1]), 0.0, np.pi / 2)
    cos, sin = np.cos(batch), np.sin(batch)
    # cos(pi/2) is 6e-17 in floating point; make the basis-state endpoints exact
    edge = batch == np.pi / 2
    cos[edge], sin[edge] = 0.0, 1.0
    amps = np.ones((batch.shape[0], 1), dtype=float)
    for i in range(batch.shape[1]):
        factor = np.stack([cos[:, i], sin[:, i]], axis=1)
        amps = (amps[:, :, None] * factor[:, None, :]).reshape(batch.shape[0], -1)
    amps = amps.astype(complex)
    if x.ndim == 1:
        amps = amps[0]
    return StateVector(amps, x.shape[-1])


def apply_rotation(state: StateVector, q: int, r: Rotation) -> StateVector:
    return state.rotate(q, r)


def apply_cnot(state: StateVector, control: int, target: int) -> StateVector:
    return state.cnot(control, target)


def apply_controlled_rotation(state: StateVector, control: int, control_value: int,
                              target: int, r: Rotation) -> StateVector:
    return state.controlled_rotate(control, control_value, target, r)


def expect_z(state: StateVector, q: int):
    return state.expect_z(q)
