"""Shared machinery for building annotated measurement circuits.

Builders walk a lattice through a measurement schedule, emitting gadget
instructions into a `CircuitWriter` that keeps three kinds of books:

* record indices, so checks can be wired into detectors and observables;
* a `FrameLedger` of deferred Pauli corrections per physical qubit (the
  feedforward of the teleporting measurement styles is never applied as a
  gate — it is folded into the interpretation of later records);
* a `PlaquetteTracker` holding the latest known value of each plaquette in
  each basis, from which detectors fall out as consecutive-inference pairs.

The six-step measurement cycle interleaves colors and bases so that every
hexagon alternates between being readable and being scrambled; the tracker
models exactly that: a step's checks either cover a plaquette ring (a new
inference, paired into a detector with the previous one) or overlap it on
an odd number of qubits in the other basis (knowledge killed).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal

from ..circuit import (
    GATES_1Q,
    GATES_2Q,
    MEASUREMENTS,
    RESETS,
    Circuit,
    parity_gadget,
)
from ..lattice import Edge, Lattice, PatchSpec

Coord = tuple[int, int]

#: The six-step cycle: color measured and check basis, in order.
CYCLE: tuple[tuple[str, str], ...] = (
    ("red", "X"),
    ("green", "Z"),
    ("blue", "X"),
    ("red", "Z"),
    ("green", "X"),
    ("blue", "Z"),
)

_MEAS_BASIS = {"MX": "X", "MY": "Y", "MZ": "Z"}
_RESET_BASIS = {"RX": "X", "RZ": "Z"}


@dataclass(frozen=True)
class LRSchedule:
    """Edges measured in the leakage-reducing style, per cycle step.

    ``steps[s]`` holds edge positions (the odd-coordinate midpoints) that
    step ``s`` measures with vertex readout and re-preparation instead of
    the plain ancilla-mediated check.  Only interior edges of the step's
    own color are eligible.
    """

    steps: tuple[frozenset[Coord], ...] = tuple(frozenset() for _ in range(6))
    name: str = "custom"

    def __post_init__(self):
        if len(self.steps) != 6:
            raise ValueError("a schedule names edge sets for exactly six steps")

    def validate(self, lattice: Lattice) -> None:
        interior = {e.pos: e for e in lattice.interior_edges()}
        for s, chosen in enumerate(self.steps):
            color = CYCLE[s][0]
            for pos in chosen:
                edge = interior.get(pos)
                if edge is None:
                    raise ValueError(f"schedule step {s} names a missing edge {pos}")
                if edge.color != color:
                    raise ValueError(
                        f"schedule step {s} measures {color} edges, "
                        f"but {pos} is {edge.color}"
                    )

    def resets_per_cycle(self) -> int:
        """Vertex re-preparations implied by one cycle of the schedule."""
        return 2 * sum(len(s) for s in self.steps)


@dataclass(frozen=True)
class ExperimentSpec:
    """One memory or gate experiment, fully determined.

    ``rounds`` counts full measurement cycles between preparation and
    transversal readout, and ``basis`` fixes both.  ``schedule`` is an
    `LRSchedule` or the name of a stock one (resolved against the built
    lattice).  ``patch``, ``torus`` and ``variant``/``size`` select the
    lattice, depending on the protocol.
    """

    protocol: str = "css-floquet"
    patch: PatchSpec | None = None
    torus: tuple[int, int] | None = None
    variant: str | None = None
    size: int | None = None
    rounds: int = 1
    basis: Literal["X", "Z"] = "Z"
    schedule: "LRSchedule | str" = "none"

    def __post_init__(self):
        if self.rounds < 0:
            raise ValueError("rounds must be nonnegative")
        if self.basis not in ("X", "Z"):
            raise ValueError("memory basis is X or Z")


@dataclass
class BuiltExperiment:
    """A builder's output: the annotated circuit plus its lattice context."""

    spec: ExperimentSpec
    lattice: Lattice
    circuit: Circuit
    meta: dict = field(default_factory=dict)


PROTOCOLS: dict[str, Callable[[ExperimentSpec], BuiltExperiment]] = {}


def register(name: str):
    def deco(fn):
        PROTOCOLS[name] = fn
        return fn

    return deco


def build_experiment(spec: ExperimentSpec) -> BuiltExperiment:
    """Dispatch to the registered builder for ``spec.protocol``."""
    try:
        builder = PROTOCOLS[spec.protocol]
    except KeyError:
        known = ", ".join(sorted(PROTOCOLS))
        raise ValueError(f"unknown protocol {spec.protocol!r} (have: {known})")
    return builder(spec)


# ---------------------------------------------------------------------------
# frame ledger


class FrameLedger:
    """Deferred Pauli corrections, one X and one Z record-mask per qubit.

    A set bit in ``fx[q]`` means: qubit q carries a virtual X exactly when
    that measurement record came out 1.  Gates conjugate the masks,
    measurements report the anticommuting part as a record flip, resets
    drop both (the physical qubit is re-prepared; pending fictions die).
    """

    def __init__(self, n: int):
        self.fx = [0] * n
        self.fz = [0] * n

    def gate(self, name: str, targets: tuple[int, ...]) -> None:
        fx, fz = self.fx, self.fz
        if name in ("I", "X", "Y", "Z"):
            return
        if name == "H":
            for q in targets:
                fx[q], fz[q] = fz[q], fx[q]
        elif name in ("S", "SDG", "XS", "XSDG"):
            for q in targets:
                fz[q] ^= fx[q]
        elif name == "CX":
            for c, t in zip(targets[::2], targets[1::2]):
                fx[t] ^= fx[c]
                fz[c] ^= fz[t]
        elif name == "CZ":
            for a, b in zip(targets[::2], targets[1::2]):
                fz[b] ^= fx[a]
                fz[a] ^= fx[b]
        elif name == "SWAP":
            for a, b in zip(targets[::2], targets[1::2]):
                fx[a], fx[b] = fx[b], fx[a]
                fz[a], fz[b] = fz[b], fz[a]
        else:
            raise ValueError(f"cannot track frames through {name}")

    def flips(self, q: int, basis: str) -> int:
        """Records whose flips toggle a `basis` measurement of qubit q."""
        if basis == "X":
            return self.fz[q]
        if basis == "Z":
            return self.fx[q]
        if basis == "Y":
            return self.fx[q] ^ self.fz[q]
        raise ValueError(basis)

    def clear(self, q: int) -> None:
        self.fx[q] = 0
        self.fz[q] = 0

    def add(self, pauli: str, q: int, mask: int) -> None:
        if pauli in ("X", "Y"):
            self.fx[q] ^= mask
        if pauli in ("Z", "Y"):
            self.fz[q] ^= mask


def mask_records(mask: int) -> tuple[int, ...]:
    """Bit positions of a record mask, ascending."""
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask &= mask - 1
    return tuple(out)


# ---------------------------------------------------------------------------
# circuit writer


class CircuitWriter:
    """Appends instructions while keeping records and frames in sync.

    All emission goes through this class so that every measurement's
    *effective* value (raw record xor pending-frame flips) is available to
    the caller as a record mask; detectors and observables are then plain
    xors of effective masks, valid under the flip semantics of sampling.
    """

    def __init__(self, lattice: Lattice):
        self.lattice = lattice
        self.circuit = Circuit()
        self.nrec = 0
        self.ledger = FrameLedger(lattice.n_qubits)
        for coord, q in sorted(lattice.qubit_map.items(), key=lambda kv: kv[1]):
            self.circuit.append("QUBIT_COORDS", q, args=(float(coord[0]), float(coord[1])))

    def q(self, coord: Coord) -> int:
        return self.lattice.qubit_map[coord]

    def tick(self) -> None:
        self.circuit.tick()

    # -- primitive emission, ledger-aware --------------------------------

    def gate(self, name: str, targets, ledger: FrameLedger | None = None) -> None:
        if isinstance(targets, int):
            targets = (targets,)
        targets = tuple(targets)
        self.circuit.append(name, targets)
        (ledger or self.ledger).gate(name, targets)

    def measure(self, q: int, basis: str, ledger: FrameLedger | None = None) -> int:
        """Measure one qubit; returns the effective record mask."""
        led = ledger or self.ledger
        self.circuit.append("M" + basis, q)
        rec = self.nrec
        self.nrec += 1
        return (1 << rec) ^ led.flips(q, basis)

    def reset(self, q: int, basis: str, ledger: FrameLedger | None = None) -> None:
        self.circuit.append("R" + basis, q)
        (ledger or self.ledger).clear(q)

    # -- gadgets ----------------------------------------------------------

    def measure_edge(
        self,
        edge: Edge,
        basis: str,
        style: str = "standard",
        ledger: FrameLedger | None = None,
    ) -> int:
        """Emit a two-body check on an interior edge; returns its effective mask.

        The teleporting styles leave deferred corrections behind; those are
        written into the ledger conditioned on the effective sign records,
        so later measurements read correctly without any applied feedback.
        """
        led = ledger or self.ledger
        q0, q1 = (self.q(v) for v in edge.endpoints)
        anc = self.q(edge.pos)
        layers, meta = parity_gadget(q0, q1, anc, basis, style)
        local_masks: list[int] = []
        for layer in layers:
            for name, tgt in layer:
                if name in MEASUREMENTS:
                    local_masks.append(self.measure(tgt, _MEAS_BASIS[name], led))
                elif name in RESETS:
                    self.reset(tgt, _RESET_BASIS[name], led)
                else:
                    self.gate(name, tgt, led)
        assert len(local_masks) == meta.n_meas
        parity = 0
        for i in meta.parity:
            parity ^= local_masks[i]
        for pauli, q, i in meta.frames:
            led.add(pauli, q, local_masks[i])
        return parity

    # -- annotations -------------------------------------------------------

    def detector(self, mask: int, args: tuple[float, ...] = ()) -> None:
        recs = mask_records(mask)
        if not recs:
            raise ValueError("a detector needs at least one record")
        self.circuit.append(
            "DETECTOR", args=args, rec=tuple(r - self.nrec for r in recs)
        )

    def observable(self, mask: int, index: int = 0) -> None:
        recs = mask_records(mask)
        self.circuit.append(
            "OBSERVABLE_INCLUDE",
            args=(float(index),),
            rec=tuple(r - self.nrec for r in recs),
        )


# ---------------------------------------------------------------------------
# step decomposition of the cycle


@dataclass(frozen=True)
class StepItem:
    """One measured thing at a cycle step: an edge check or a boundary single."""

    support: frozenset[Coord]
    edge: Edge | None = None
    vertex: Coord | None = None


def step_items(lattice: Lattice, step: int) -> tuple[str, str, list[StepItem]]:
    """What a cycle step measures: (color, basis, items).

    Items are the interior edges of the step's color plus, on the boundary,
    the single data qubits of dangling edges whose color and fixed basis
    match the step.
    """
    color, basis = CYCLE[step % 6]
    items: list[StepItem] = []
    for e in lattice.edges:
        if e.color != color:
            continue
        if e.role == "interior":
            items.append(StepItem(support=frozenset(e.endpoints), edge=e))
        elif e.basis == basis:
            (v,) = e.endpoints
            items.append(StepItem(support=frozenset((v,)), vertex=v))
    return color, basis, items


# ---------------------------------------------------------------------------
# plaquette knowledge tracking


@dataclass
class DetectorEvent:
    """A freshly closed deterministic parity: two consecutive inferences."""

    mask: int
    center: Coord
    basis: str


class PlaquetteTracker:
    """Latest known value of every plaquette in both bases.

    ``slots[(center, basis)]`` is None (unknown) or the record mask whose
    xor equals the plaquette's value.  A step updates all slots at once:
    same-basis coverage becomes a new inference (and a detector, when an
    old one was live), any odd-overlap measurement in the other basis
    wipes the slot.
    """

    def __init__(self, lattice: Lattice):
        self.ring: dict[Coord, frozenset[Coord]] = {
            p.center: frozenset(p.vertices) for p in lattice.plaquettes
        }
        self.slots: dict[tuple[Coord, str], int | None] = {
            (c, b): None for c in self.ring for b in ("X", "Z")
        }

    def prime(self, basis: str) -> None:
        """Transversal preparation: every plaquette is +1 in `basis`."""
        for center in self.ring:
            self.slots[(center, basis)] = 0

    def consume(
        self, basis: str, measured: list[tuple[frozenset[Coord], int]]
    ) -> list[DetectorEvent]:
        """Apply one step's measurements; returns the detectors it closes.

        ``measured`` pairs each item's data-qubit support with its
        effective record mask.  All items carry the step basis.
        """
        events: list[DetectorEvent] = []
        for (center, b), slot in list(self.slots.items()):
            ring = self.ring[center]
            if b != basis:
                if slot is not None and any(
                    len(sup & ring) % 2 for sup, _ in measured
                ):
                    self.slots[(center, b)] = None
                continue
            cover = [(sup, m) for sup, m in measured if sup <= ring]
            if not cover:
                continue
            covered: set[Coord] = set()
            size = 0
            mask = 0
            for sup, m in cover:
                covered |= sup
                size += len(sup)
                mask ^= m
            if covered != set(ring) or size != len(ring):
                continue
            if slot is not None:
                events.append(DetectorEvent(mask=slot ^ mask, center=center, basis=b))
            self.slots[(center, b)] = mask
        return events


# ---------------------------------------------------------------------------
# transversal blocks


def prep_data(writer: CircuitWriter, basis: str, tracker: PlaquetteTracker) -> None:
    """Reset every data qubit in `basis` and prime the tracker."""
    for v in writer.lattice.vertices:
        writer.reset(writer.q(v), basis)
    tracker.prime(basis)


def readout_data(writer: CircuitWriter, basis: str) -> dict[Coord, int]:
    """Measure every data qubit in `basis`; returns effective masks by coord."""
    return {
        v: writer.measure(writer.q(v), basis) for v in writer.lattice.vertices
    }


def final_detectors(
    tracker: PlaquetteTracker, readout: dict[Coord, int], basis: str
) -> list[DetectorEvent]:
    """Close every live same-basis slot against the transversal readout."""
    measured = [(frozenset((v,)), m) for v, m in readout.items()]
    return tracker.consume(basis, measured)
