"""Independent reference implementations used only by the tests.

Nothing here imports the code paths it checks: gates are dense Kronecker-lifted
matrices, pooling is an explicit partial trace on a density matrix, chunk
means are plain Python loops.
"""

from __future__ import annotations

from functools import reduce

import numpy as np

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
P0 = np.array([[1, 0], [0, 0]], dtype=complex)
P1 = np.array([[0, 0], [0, 1]], dtype=complex)


def rx(t):
    c, s = np.cos(t / 2), np.sin(t / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def ry(t):
    c, s = np.cos(t / 2), np.sin(t / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(t):
    return np.diag([np.exp(-0.5j * t), np.exp(0.5j * t)])


def kron_all(mats):
    return reduce(np.kron, mats)


def _lift(factors, n):
    """Kronecker product over n qubits; `factors` maps qubit -> 2x2, others are identity.

    Runs of identities are merged into one eye() block (qubit 0 = leftmost factor = MSB).
    """
    mats, run = [], 0
    for i in range(n):
        if i in factors:
            if run:
                mats.append(np.eye(2**run, dtype=complex))
                run = 0
            mats.append(factors[i])
        else:
            run += 1
    if run:
        mats.append(np.eye(2**run, dtype=complex))
    return kron_all(mats)


def lift1(u, q, n):
    """u on qubit q of n."""
    return _lift({q: u}, n)


def lift_controlled(u, control, target, n, control_value=1):
    # |on><on| (x) u + |off><off| (x) 1  ==  1 + |on><on| (x) (u - 1)
    on = P1 if control_value == 1 else P0
    out = _lift({control: on, target: u - I2}, n)
    out[np.diag_indices(2**n)] += 1
    return out


def cnot(control, target, n):
    return lift_controlled(X, control, target, n, 1)


def product_state(angles):
    return kron_all([np.array([np.cos(a), np.sin(a)], dtype=complex) for a in angles])


def qcnn_gate_list(params, n=8, shared=True, input_qubits=None):
    """Dense gate matrices of the QCNN, in application order, plus the measured qubit."""
    active = list(range(n))
    gates = []
    offset = 0
    while len(active) > 1:
        pairs = [(active[i], active[i + 1]) for i in range(0, len(active), 2)]
        for u, (a, b) in enumerate(pairs):
            k = offset if shared else offset + 4 * u
            # RY on a and RY on b commute; one Kronecker product carries both
            gates += [_lift({a: ry(params[k]), b: ry(params[k + 1])}, n), cnot(a, b, n)]
        for u, (a, b) in enumerate(pairs):
            k = offset if shared else offset + 4 * u
            gates += [lift_controlled(rz(params[k + 2]), a, b, n, 1),
                      lift_controlled(rx(params[k + 3]), a, b, n, 0)]
        offset += 4 if shared else 4 * len(pairs)
        active = [b for _, b in pairs]
    return gates, active[0]


def default_inputs(n):
    """Readout-first placement computed by hand from the pairing rule."""
    active = list(range(n))
    pooled = []
    while len(active) > 1:
        pairs = [(active[i], active[i + 1]) for i in range(0, len(active), 2)]
        pooled.append([a for a, _ in pairs])
        active = [b for _, b in pairs]
    order = [active[0]]
    for layer in reversed(pooled):
        order += layer
    return order


def placed_angles(angles, input_qubits):
    out = [0.0] * len(angles)
    for feature, qubit in enumerate(input_qubits):
        out[qubit] = angles[feature]
    return out


def qcnn_expect_z_dense(params, angles, shared=True, input_qubits=None, product=False):
    n = len(angles)
    input_qubits = default_inputs(n) if input_qubits is None else input_qubits
    psi = product_state(placed_angles(angles, input_qubits))
    gates, measured = qcnn_gate_list(params, n, shared)
    if product:
        psi = reduce(lambda acc, g: g @ acc, gates, np.eye(2**n, dtype=complex)) @ psi
    else:
        for g in gates:
            psi = g @ psi
    return float(np.real(np.conj(psi) @ lift1(Z, measured, n) @ psi))


def partial_trace(rho, keep_axes_qubits, n):
    """Trace out every qubit not in `keep_axes_qubits` (sorted) of an n-qubit density matrix."""
    t = rho.reshape([2] * (2 * n))
    traced = [q for q in range(n) if q not in keep_axes_qubits]
    # trace highest qubits first so axis numbers stay valid
    for q in sorted(traced, reverse=True):
        m = t.ndim // 2
        t = np.trace(t, axis1=q, axis2=q + m)
    k = len(keep_axes_qubits)
    return t.reshape(2**k, 2**k)


def qcnn_expect_z_density(params, angles, shared=True, input_qubits=None):
    """QCNN on a density matrix that literally discards each pooled control qubit."""
    n = len(angles)
    input_qubits = default_inputs(n) if input_qubits is None else input_qubits
    psi = product_state(placed_angles(angles, input_qubits))
    rho = np.outer(psi, np.conj(psi))
    labels = list(range(n))  # original qubit id of each register position
    offset = 0
    while len(labels) > 1:
        m = len(labels)
        pairs = [(i, i + 1) for i in range(0, m, 2)]  # register positions
        for u, (a, b) in enumerate(pairs):
            k = offset if shared else offset + 4 * u
            for g in (lift1(ry(params[k]), a, m), lift1(ry(params[k + 1]), b, m), cnot(a, b, m)):
                rho = g @ rho @ g.conj().T
        for u, (a, b) in enumerate(pairs):
            k = offset if shared else offset + 4 * u
            for g in (lift_controlled(rz(params[k + 2]), a, b, m, 1),
                      lift_controlled(rx(params[k + 3]), a, b, m, 0)):
                rho = g @ rho @ g.conj().T
        keep = [b for _, b in pairs]
        rho = partial_trace(rho, keep, m)
        labels = [labels[b] for b in keep]
        offset += 4 if shared else 4 * len(pairs)
    return float(np.real(np.trace(rho @ Z)))


def chunk_mean_image(span: bytes, side: int):
    """Pure-Python chunk means with zero padding."""
    n = side * side
    data = list(span) + [0] * max(0, n - len(span))
    q, r = divmod(len(data), n)
    pixels, pos = [], 0
    for k in range(n):
        length = q + 1 if k < r else q
        chunk = data[pos:pos + length]
        pos += length
        pixels.append(sum(chunk) // length)
    return pixels


def brute_confusion(preds, labels):
    tp = fp = fn = tn = 0
    for p, y in zip(preds, labels):
        if p == 1 and y == 1:
            tp += 1
        elif p == 1 and y == 0:
            fp += 1
        elif p == 0 and y == 1:
            fn += 1
        else:
            tn += 1
    return tp, fp, fn, tn
