"""Exact state-vector simulator for small qubit registers.

Supports exactly what two-party comparison protocols need: Bell-pair and
Z-basis qubit preparation, register merging (tensor product), partial
Z-basis measurement, and Bell-basis measurement of an arbitrary qubit pair.

Conventions:
    - Amplitude index bit k (most significant first) is register qubit k,
      so a 2-qubit register orders its amplitudes as |00>, |01>, |10>, |11>.
    - All measurement randomness comes from a single stream owned by the
      Simulator; each projection consumes exactly one uniform draw.
    - Measured qubits stay in their register, collapsed. Custody of qubits
      is the caller's bookkeeping; handles stay valid across merges.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

MAX_REGISTER_QUBITS = 4

_SQRT2_INV = 1.0 / np.sqrt(2.0)


class QsimError(Exception):
    """Base error for register operations."""


class InvalidHandle(QsimError):
    """Handle does not address a qubit of this simulator."""


class CapacityExceeded(QsimError):
    """Merge would exceed the register size limit."""


class SameRegister(QsimError):
    """Merge of a register with itself."""


class BellKind(Enum):
    """The four Bell states, in the fixed measurement/selection order."""

    PHI_PLUS = 0   # (|00> + |11>)/sqrt(2)
    PHI_MINUS = 1  # (|00> - |11>)/sqrt(2)
    PSI_PLUS = 2   # (|01> + |10>)/sqrt(2)
    PSI_MINUS = 3  # (|01> - |10>)/sqrt(2)

    @property
    def parity(self) -> int:
        """XOR of Z outcomes on the two halves: 0 for Phi, 1 for Psi."""
        return 0 if self in (BellKind.PHI_PLUS, BellKind.PHI_MINUS) else 1


_BELL_AMPLITUDES = {
    BellKind.PHI_PLUS: (_SQRT2_INV, 0.0, 0.0, _SQRT2_INV),
    BellKind.PHI_MINUS: (_SQRT2_INV, 0.0, 0.0, -_SQRT2_INV),
    BellKind.PSI_PLUS: (0.0, _SQRT2_INV, _SQRT2_INV, 0.0),
    BellKind.PSI_MINUS: (0.0, _SQRT2_INV, -_SQRT2_INV, 0.0),
}

# Rows are Bell bras over the |ab> basis (00, 01, 10, 11), in BellKind order.
_BELL_BASIS = np.array([_BELL_AMPLITUDES[k] for k in BellKind], dtype=complex)


@dataclass(frozen=True)
class QubitHandle:
    """Address of one qubit: register id plus position at creation time."""

    register_id: int
    index: int


class _Register:
    __slots__ = ("num_qubits", "amplitudes")

    def __init__(self, num_qubits: int, amplitudes: np.ndarray):
        self.num_qubits = num_qubits
        self.amplitudes = amplitudes


def _bit_indices(num_qubits: int, qubit: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Amplitude indices where `qubit` (MSB-first) is 0 resp. 1."""
    shift = num_qubits - 1 - qubit
    zeros = tuple(i for i in range(1 << num_qubits) if not (i >> shift) & 1)
    ones = tuple(i for i in range(1 << num_qubits) if (i >> shift) & 1)
    return zeros, ones


_BIT_INDEX_CACHE = {
    (n, q): _bit_indices(n, q)
    for n in range(1, MAX_REGISTER_QUBITS + 1)
    for q in range(n)
}


class Simulator:
    """Owner of all registers and of the single measurement-outcome stream.

    One Simulator per protocol run; identical seed and operation sequence
    reproduce identical outcomes.
    """

    def __init__(
        self,
        seed: int | None = None,
        rng: np.random.Generator | None = None,
        max_qubits: int = MAX_REGISTER_QUBITS,
    ):
        self._rng = rng if rng is not None else np.random.default_rng(seed)
        self._max_qubits = max_qubits
        self._registers: dict[int, _Register] = {}
        # old register id -> (surviving register id, qubit index offset)
        self._forwards: dict[int, tuple[int, int]] = {}
        self._next_id = 0

    # -- creation ---------------------------------------------------------

    def prepare_basis(self, bit: int) -> QubitHandle:
        """Fresh qubit in |0> or |1>."""
        if bit not in (0, 1):
            raise ValueError(f"bit must be 0 or 1, got {bit!r}")
        amps = np.zeros(2, dtype=complex)
        amps[bit] = 1.0
        return self._new_register(1, amps)

    def prepare_bell(self, kind: BellKind) -> tuple[QubitHandle, QubitHandle]:
        """Fresh Bell pair; returns the (first, second) half handles."""
        amps = np.array(_BELL_AMPLITUDES[kind], dtype=complex)
        first = self._new_register(2, amps)
        return first, QubitHandle(first.register_id, 1)

    # -- structure --------------------------------------------------------

    def merge(self, a: QubitHandle, b: QubitHandle) -> None:
        """Replace the registers of `a` and `b` by their tensor product.

        Qubits of `a`'s register keep their indices; qubits of `b`'s
        register are appended after them. Existing handles stay valid.
        """
        rid_a, reg_a, _ = self._resolve(a)
        rid_b, reg_b, _ = self._resolve(b)
        if rid_a == rid_b:
            raise SameRegister(f"qubits already share register {rid_a}")
        combined = reg_a.num_qubits + reg_b.num_qubits
        if combined > self._max_qubits:
            raise CapacityExceeded(
                f"merge would create a {combined}-qubit register "
                f"(limit {self._max_qubits})"
            )
        reg_a.amplitudes = np.kron(reg_a.amplitudes, reg_b.amplitudes)
        offset = reg_a.num_qubits
        reg_a.num_qubits = combined
        del self._registers[rid_b]
        self._forwards[rid_b] = (rid_a, offset)
        self._check_norm(reg_a)

    # -- measurement ------------------------------------------------------

    def measure_z(self, q: QubitHandle) -> int:
        """Z-basis measurement of one qubit; collapses the register.

        Probabilities are normalized from the two branch weights, so
        measuring an eigenstate (or re-measuring a collapsed qubit) is
        exactly deterministic.
        """
        _, reg, pos = self._resolve(q)
        zeros, ones = _BIT_INDEX_CACHE[(reg.num_qubits, pos)]
        amps = reg.amplitudes
        s0 = 0.0
        for i in zeros:
            c = amps.item(i)
            s0 += c.real * c.real + c.imag * c.imag
        s1 = 0.0
        for i in ones:
            c = amps.item(i)
            s1 += c.real * c.real + c.imag * c.imag
        outcome = 1 if self._rng.random() < s1 / (s0 + s1) else 0
        killed = zeros if outcome == 1 else ones
        for i in killed:
            amps[i] = 0.0
        amps *= 1.0 / np.sqrt(s1 if outcome == 1 else s0)
        self._check_norm(reg)
        return outcome

    def measure_bell(self, a: QubitHandle, b: QubitHandle) -> BellKind:
        """Bell-basis measurement of the ordered pair (a, b).

        Merges the registers first when the qubits live apart.
        """
        if self._resolve(a)[0] != self._resolve(b)[0]:
            self.merge(a, b)
        _, reg, pos_a = self._resolve(a)
        pos_b = self._resolve(b)[2]
        if pos_a == pos_b:
            raise InvalidHandle("Bell measurement needs two distinct qubits")
        n = reg.num_qubits
        rest = [i for i in range(n) if i not in (pos_a, pos_b)]
        perm = [pos_a, pos_b] + rest
        tensor = reg.amplitudes.reshape([2] * n).transpose(perm).reshape(4, -1)
        overlaps = _BELL_BASIS @ tensor  # rows: residual vector per Bell kind
        probs = (overlaps.real**2 + overlaps.imag**2).sum(axis=1)
        total = probs.sum()
        draw = self._rng.random() * total
        cumulative = 0.0
        chosen = len(probs) - 1
        for k, p in enumerate(probs):
            cumulative += p
            if draw < cumulative:
                chosen = k
                break
        post = np.outer(
            _BELL_BASIS[chosen], overlaps[chosen] / np.sqrt(probs[chosen])
        )
        inverse = np.argsort(perm)
        reg.amplitudes = (
            post.reshape([2] * n).transpose(inverse).reshape(-1)
        )
        self._check_norm(reg)
        return BellKind(chosen)

    # -- inspection (tests and diagnostics) -------------------------------

    def amplitudes(self, q: QubitHandle) -> np.ndarray:
        """Copy of the amplitude vector of the register holding `q`."""
        return self._resolve(q)[1].amplitudes.copy()

    def register_size(self, q: QubitHandle) -> int:
        return self._resolve(q)[1].num_qubits

    def qubit_index(self, q: QubitHandle) -> int:
        """Current position of `q` inside its (possibly merged) register."""
        return self._resolve(q)[2]

    def same_register(self, a: QubitHandle, b: QubitHandle) -> bool:
        return self._resolve(a)[0] == self._resolve(b)[0]

    # -- internals --------------------------------------------------------

    def _new_register(self, num_qubits: int, amps: np.ndarray) -> QubitHandle:
        rid = self._next_id
        self._next_id += 1
        self._registers[rid] = _Register(num_qubits, amps)
        return QubitHandle(rid, 0)

    def _resolve(self, q: QubitHandle) -> tuple[int, _Register, int]:
        if not isinstance(q, QubitHandle):
            raise InvalidHandle(f"not a qubit handle: {q!r}")
        rid, pos = q.register_id, q.index
        while rid in self._forwards:
            rid, off = self._forwards[rid]
            pos += off
        reg = self._registers.get(rid)
        if reg is None or not 0 <= pos < reg.num_qubits:
            raise InvalidHandle(f"unknown qubit {q!r}")
        return rid, reg, pos

    @staticmethod
    def _check_norm(reg: _Register) -> None:
        norm_sq = float(np.vdot(reg.amplitudes, reg.amplitudes).real)
        if abs(norm_sq - 1.0) > 1e-9:
            raise QsimError(f"state norm drifted: |psi|^2 = {norm_sq!r}")
