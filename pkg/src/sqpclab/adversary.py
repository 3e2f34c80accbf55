"""Channel interception strategies between TP and the participants.

Every qubit transmission passes through a strategy's `transmit` hook, which
returns whatever the downstream side actually receives: the original qubit,
a stored one, or a forgery. Strategies also get the public classical flow
(choice announcements, end-of-protocol publications) so participant-grade
adversaries can exploit it.

Knowledge model: an outside eavesdropper sees only qubits in transit; a
malicious participant (Bob) additionally knows the pre-shared key and all
public announcements. Nobody colludes with TP.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .protocol import ChannelEvent, Choice, Leg, Publication, RunContext, Variant
from .qsim import QubitHandle

_FORWARD_LEGS = (Leg.FORWARD_TP_TO_ALICE, Leg.FORWARD_TP_TO_BOB)

_RETURN_TO_FORWARD = {
    Leg.RETURN_ALICE_TO_TP: Leg.FORWARD_TP_TO_ALICE,
    Leg.RETURN_BOB_TO_TP: Leg.FORWARD_TP_TO_BOB,
}


@dataclass
class AdversaryState:
    """What an adversary holds at the end of a run."""

    stored_qubits: dict[tuple[Leg, int], QubitHandle] = field(default_factory=dict)
    learned_bits: dict[int, int] = field(default_factory=dict)
    recovered_secret: tuple[int, ...] | None = None


class ChannelStrategy:
    """Base strategy: an untouched channel."""

    name = "none"

    def __init__(self):
        self.ctx: RunContext | None = None

    def bind(self, ctx: RunContext) -> None:
        self.ctx = ctx

    def transmit(self, event: ChannelEvent) -> QubitHandle:
        return event.qubit

    def observe_choices(
        self, alice_choices: Sequence[Choice], bob_choices: Sequence[Choice]
    ) -> None:
        pass

    def observe_publication(self, publication: Publication) -> None:
        pass

    def state(self) -> AdversaryState:
        return AdversaryState()

    # shared helper for forging Z-basis qubits
    def _fake_qubit(self) -> tuple[QubitHandle, int]:
        bit = int(self.ctx.rng.integers(2))
        return self.ctx.sim.prepare_basis(bit), bit


class OutsideAttackStrategy(ChannelStrategy):
    """Full swap attack by an outside eavesdropper.

    Forward legs: store the genuine halves, hand the participants random
    Z-basis forgeries. Return legs: retain whatever the participants send and
    deliver the stored genuine halves, so TP's Bell check sees intact pairs.
    """

    name = "outside"

    def __init__(self):
        super().__init__()
        self._stored: dict[tuple[Leg, int], QubitHandle] = {}
        self._retained: dict[tuple[Leg, int], QubitHandle] = {}

    def transmit(self, event: ChannelEvent) -> QubitHandle:
        if event.leg in _FORWARD_LEGS:
            self._stored[(event.leg, event.round_index)] = event.qubit
            fake, _ = self._fake_qubit()
            return fake
        # Retained returns are never measured; Eve has no use for them.
        self._retained[(event.leg, event.round_index)] = event.qubit
        forward = _RETURN_TO_FORWARD[event.leg]
        return self._stored.pop((forward, event.round_index))

    def state(self) -> AdversaryState:
        return AdversaryState(stored_qubits=dict(self._retained))


class ParticipantAttackStrategy(ChannelStrategy):
    """Malicious Bob: swap attack on Alice's legs plus secret extraction.

    Bob keeps Alice's returned qubits, swaps the genuine halves back to TP,
    measures the kept qubits from her announced SIFT rounds to learn her
    encoded bits, and decodes her secret once she publishes her raw key.
    """

    name = "participant"

    def __init__(self, shared_key: tuple[int, ...]):
        super().__init__()
        self.shared_key = shared_key
        self._stored: dict[tuple[Leg, int], QubitHandle] = {}
        self._retained: dict[tuple[Leg, int], QubitHandle] = {}
        self.learned_bits: dict[int, int] = {}
        self.recovered_secret: tuple[int, ...] | None = None

    def transmit(self, event: ChannelEvent) -> QubitHandle:
        if event.leg is Leg.FORWARD_TP_TO_ALICE:
            self._stored[(event.leg, event.round_index)] = event.qubit
            fake, _ = self._fake_qubit()
            return fake
        if event.leg is Leg.RETURN_ALICE_TO_TP:
            self._retained[(event.leg, event.round_index)] = event.qubit
            return self._stored.pop((Leg.FORWARD_TP_TO_ALICE, event.round_index))
        return event.qubit  # Bob's own legs run clean

    def observe_choices(self, alice_choices, bob_choices) -> None:
        ordinal = 0
        for i, choice in enumerate(alice_choices):
            if choice is Choice.CTRL:
                continue
            kept = self._retained.get((Leg.RETURN_ALICE_TO_TP, i))
            if kept is None:
                continue
            bit = self.ctx.sim.measure_z(kept)
            if choice is Choice.SIFT_CALCULATE:
                ordinal += 1
                self.learned_bits[ordinal] = bit

    def observe_publication(self, publication: Publication) -> None:
        if publication.variant is not Variant.JIANG:
            return  # only raw-key publication admits the decoding below
        ra = publication.alice_values
        bits = []
        for j in range(1, len(ra) + 1):
            if j not in self.learned_bits:
                break
            bits.append(self.learned_bits[j] ^ ra[j - 1] ^ self.shared_key[j - 1])
        if bits:
            self.recovered_secret = tuple(bits)

    def state(self) -> AdversaryState:
        return AdversaryState(
            stored_qubits=dict(self._retained),
            learned_bits=dict(self.learned_bits),
            recovered_secret=self.recovered_secret,
        )


class ParticipantForwardOnlyStrategy(ChannelStrategy):
    """Bob forges only the TP-to-Alice leg and leaves all returns untouched.

    Probes whether trap checks alone would catch a participant: Alice's
    calculate measurements become Bob-known, her traps travel clean, and
    double-CTRL rounds give TP a forgery paired with a live Bell half.
    """

    name = "participant-forward"

    def __init__(self, shared_key: tuple[int, ...]):
        super().__init__()
        self.shared_key = shared_key
        self._stored: dict[tuple[Leg, int], QubitHandle] = {}
        self._fake_bits: dict[int, int] = {}
        self.learned_bits: dict[int, int] = {}

    def transmit(self, event: ChannelEvent) -> QubitHandle:
        if event.leg is Leg.FORWARD_TP_TO_ALICE:
            self._stored[(event.leg, event.round_index)] = event.qubit
            fake, bit = self._fake_qubit()
            self._fake_bits[event.round_index] = bit
            return fake
        return event.qubit

    def observe_choices(self, alice_choices, bob_choices) -> None:
        if self.ctx.variant is not Variant.IMPROVED:
            return  # jiang encodes classically; forged qubits teach nothing
        ordinal = 0
        for i, choice in enumerate(alice_choices):
            if choice is Choice.SIFT_CALCULATE:
                ordinal += 1
                # Alice Z-measured Bob's Z-basis forgery, so he knows the result.
                self.learned_bits[ordinal] = self._fake_bits[i]

    def state(self) -> AdversaryState:
        return AdversaryState(
            stored_qubits=dict(self._stored),
            learned_bits=dict(self.learned_bits),
        )


class InterceptResendStrategy(ChannelStrategy):
    """Replace both forward legs with random Z-basis qubits; keep the
    originals unmeasured; leave return legs alone."""

    name = "intercept-resend"

    def __init__(self):
        super().__init__()
        self._stored: dict[tuple[Leg, int], QubitHandle] = {}

    def transmit(self, event: ChannelEvent) -> QubitHandle:
        if event.leg in _FORWARD_LEGS:
            self._stored[(event.leg, event.round_index)] = event.qubit
            fake, _ = self._fake_qubit()
            return fake
        return event.qubit

    def state(self) -> AdversaryState:
        return AdversaryState(stored_qubits=dict(self._stored))


class MeasureResendStrategy(ChannelStrategy):
    """Z-measure each forward-leg qubit in transit and pass it on collapsed."""

    name = "measure-resend"

    def __init__(self):
        super().__init__()
        self.learned_bits: dict[int, int] = {}

    def transmit(self, event: ChannelEvent) -> QubitHandle:
        if event.leg in _FORWARD_LEGS:
            bit = self.ctx.sim.measure_z(event.qubit)
            key = event.round_index * 2 + (0 if event.leg is _FORWARD_LEGS[0] else 1)
            self.learned_bits[key] = bit
        return event.qubit

    def state(self) -> AdversaryState:
        return AdversaryState(learned_bits=dict(self.learned_bits))


# -- construction ------------------------------------------------------------


def honest_strategy() -> ChannelStrategy:
    return ChannelStrategy()


def outside_attack_strategy() -> OutsideAttackStrategy:
    return OutsideAttackStrategy()


def participant_attack_strategy(shared_key: tuple[int, ...]) -> ParticipantAttackStrategy:
    return ParticipantAttackStrategy(shared_key)


def participant_forward_only_strategy(
    shared_key: tuple[int, ...],
) -> ParticipantForwardOnlyStrategy:
    return ParticipantForwardOnlyStrategy(shared_key)


def intercept_resend_strategy() -> InterceptResendStrategy:
    return InterceptResendStrategy()


def measure_resend_strategy() -> MeasureResendStrategy:
    return MeasureResendStrategy()


ATTACK_NAMES = (
    "none",
    "outside",
    "participant",
    "participant-forward",
    "intercept-resend",
    "measure-resend",
)

_PARTICIPANT_ATTACKS = ("participant", "participant-forward")


def make_strategy(name: str, shared_key: tuple[int, ...] | None = None):
    """Build a fresh strategy instance by CLI name; None for an honest channel."""
    if name == "none":
        return None
    if name == "outside":
        return outside_attack_strategy()
    if name == "participant":
        return participant_attack_strategy(shared_key)
    if name == "participant-forward":
        return participant_forward_only_strategy(shared_key)
    if name == "intercept-resend":
        return intercept_resend_strategy()
    if name == "measure-resend":
        return measure_resend_strategy()
    raise ValueError(f"unknown attack {name!r}")
