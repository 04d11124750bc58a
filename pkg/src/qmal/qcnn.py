"""Layered QCNN: RY/RY/CNOT convolutions, controlled RZ/RX pooling, Z readout."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import BIT_CONVENTION
from .qsim import RX, RY, RZ, StateVector, encode

N_QUBITS = 8
POOL_ORDER = "rz_on_1_then_rx_on_0"
LABEL_CONVENTION = "p_malware=(1-<Z>)/2"


@dataclass(frozen=True)
class Layer:
    conv_pairs: tuple[tuple[int, int], ...]
    pool_pairs: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class LayerPlan:
    """Wiring of the circuit.

    ``input_qubits[i]`` is the qubit that encodes feature ``i``. Features come
    in descending PCA variance, so the default places them readout-first: the
    measured qubit, then the controls pooled in the last layer, and so on back
    to the first layer.
    """

    layers: tuple[Layer, ...]
    measured_qubit: int
    n_qubits: int
    input_qubits: tuple[int, ...] = ()

    def __post_init__(self):
        if not self.input_qubits:
            object.__setattr__(self, "input_qubits", self.readout_first())
        if sorted(self.input_qubits) != list(range(self.n_qubits)):
            raise ValueError(f"input_qubits {self.input_qubits} is not a permutation")

    def readout_first(self) -> tuple[int, ...]:
        order = [self.measured_qubit]
        for layer in reversed(self.layers):
            order.extend(ctl for ctl, _ in layer.pool_pairs)
        return tuple(order)

    @property
    def identity_inputs(self) -> bool:
        return self.input_qubits == tuple(range(self.n_qubits))

    def place(self, angles):
        """Reorder feature-ordered angles into qubit order."""
        angles = np.asarray(angles, dtype=float)
        if self.identity_inputs:
            return angles
        placed = np.empty_like(angles)
        placed[..., list(self.input_qubits)] = angles
        return placed

    @classmethod
    def build(cls, n_qubits: int = N_QUBITS) -> "LayerPlan":
        """Halve the active register each layer: pair neighbours, pool the first into the second."""
        if n_qubits < 2 or n_qubits & (n_qubits - 1):
            raise ValueError(f"qubit count must be a power of two >= 2, got {n_qubits}")
        active = list(range(n_qubits))
        layers = []
        while len(active) > 1:
            pairs = tuple((active[i], active[i + 1]) for i in range(0, len(active), 2))
            layers.append(Layer(conv_pairs=pairs, pool_pairs=pairs))
            active = [b for _, b in pairs]
        return cls(tuple(layers), measured_qubit=active[0], n_qubits=n_qubits)

    @classmethod
    def identity(cls, n_qubits: int = N_QUBITS) -> "LayerPlan":
        """Same wiring with feature i encoded on qubit i."""
        plan = cls.build(n_qubits)
        return cls(plan.layers, plan.measured_qubit, n_qubits, tuple(range(n_qubits)))

    def n_params(self, shared: bool) -> int:
        if shared:
            return 4 * len(self.layers)
        return 4 * sum(len(layer.conv_pairs) for layer in self.layers)

    def to_dict(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "measured_qubit": self.measured_qubit,
            "input_qubits": list(self.input_qubits),
            "layers": [
                {"conv_pairs": [list(p) for p in layer.conv_pairs],
                 "pool_pairs": [list(p) for p in layer.pool_pairs]}
                for layer in self.layers
            ],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "LayerPlan":
        layers = tuple(
            Layer(tuple(tuple(p) for p in layer["conv_pairs"]),
                  tuple(tuple(p) for p in layer["pool_pairs"]))
            for layer in obj["layers"]
        )
        return cls(layers, int(obj["measured_qubit"]), int(obj["n_qubits"]),
                   tuple(int(q) for q in obj.get("input_qubits", ())))


@dataclass
class QcnnModel:
    params: np.ndarray
    plan: LayerPlan = field(default_factory=LayerPlan.build)
    shared: bool = True
    section: str | None = None
    seed: int | None = None

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=float)
        expected = self.plan.n_params(self.shared)
        if self.params.shape != (expected,):
            raise ValueError(f"expected {expected} parameters, got shape {self.params.shape}")

    def to_dict(self) -> dict:
        return {
            "kind": "qcnn",
            "section": self.section,
            "params": self.params.tolist(),
            "shared_params": self.shared,
            "plan": self.plan.to_dict(),
            "bit_convention": BIT_CONVENTION,
            "label_convention": LABEL_CONVENTION,
            "pool_order": POOL_ORDER,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "QcnnModel":
        if obj.get("bit_convention", BIT_CONVENTION) != BIT_CONVENTION:
            raise ValueError(f"unsupported bit convention {obj['bit_convention']!r}")
        return cls(
            params=np.asarray(obj["params"], dtype=float),
            plan=LayerPlan.from_dict(obj["plan"]),
            shared=bool(obj["shared_params"]),
            section=obj.get("section"),
            seed=obj.get("seed"),
        )


def conv_unit(state: StateVector, qa: int, qb: int, theta1: float, theta2: float) -> StateVector:
    state.rotate(qa, RY(theta1))
    state.rotate(qb, RY(theta2))
    return state.cnot(qa, qb)


def pool_unit(state: StateVector, control: int, target: int,
              theta1: float, theta2: float) -> StateVector:
    """RZ on the target when the control is 1, then RX on it when the control is 0.

    The control is never touched again afterwards; since the only observable
    is Z on a surviving qubit, that is equivalent to tracing it out.
    """
    state.controlled_rotate(control, 1, target, RZ(theta1))
    return state.controlled_rotate(control, 0, target, RX(theta2))


def _unit_params(params: np.ndarray, plan: LayerPlan, shared: bool):
    """Yield (layer, [(ca, cb, pa, pb) per unit]) following the serialized ordering."""
    offset = 0
    for layer in plan.layers:
        units = len(layer.conv_pairs)
        if shared:
            block = params[offset:offset + 4]
            per_unit = [tuple(block)] * units
            offset += 4
        else:
            per_unit = [tuple(params[offset + 4 * u:offset + 4 * u + 4]) for u in range(units)]
            offset += 4 * units
        yield layer, per_unit


def run_circuit(params, angles, plan: LayerPlan | None = None, shared: bool = True) -> StateVector:
    plan = plan or LayerPlan.build(np.shape(angles)[-1])
    if np.shape(angles)[-1] != plan.n_qubits:
        raise ValueError(f"{np.shape(angles)[-1]} angles for a {plan.n_qubits}-qubit plan")
    state = encode(plan.place(angles))
    for layer, per_unit in _unit_params(np.asarray(params, dtype=float), plan, shared):
        for (qa, qb), (ca, cb, _, _) in zip(layer.conv_pairs, per_unit):
            conv_unit(state, qa, qb, ca, cb)
        for (ctl, tgt), (_, _, pa, pb) in zip(layer.pool_pairs, per_unit):
            pool_unit(state, ctl, tgt, pa, pb)
    return state


def forward_batch(params, angles, plan: LayerPlan | None = None, shared: bool = True):
    """Malware probability (1 - <Z>)/2 for each row of `angles` (or one vector)."""
    plan = plan or LayerPlan.build(np.shape(angles)[-1])
    z = run_circuit(params, angles, plan, shared).expect_z(plan.measured_qubit)
    return (1.0 - z) / 2.0


def forward(model: QcnnModel, angles) -> float:
    angles = np.asarray(angles, dtype=float)
    if angles.ndim != 1:
        raise ValueError("forward takes a single angle vector; use forward_batch for batches")
    return float(forward_batch(model.params, angles, model.plan, model.shared))


def predict_labels(model: QcnnModel, angles) -> np.ndarray:
    p = forward_batch(model.params, np.atleast_2d(angles), model.plan, model.shared)
    return (np.asarray(p) >= 0.5).astype(int)
