"""Symbolic circuit execution: which record parities are deterministic?

Runs a Clifford+measurement circuit once, tracking every measurement sign as
a GF(2) combination of earlier outcomes.  A measurement whose observable lies
in the current stabilizer span yields a linear relation among records; after
eliminating the hidden variables introduced by resets, the surviving
relations generate every record parity that is constant in the absence of
noise — the circuit's full detector space.

The same machinery completes logical observables: a Pauli that stabilizes
the initial state is carried through the circuit (multiplied by stabilizer
rows whenever a measurement would otherwise anticommute with it, which is
exactly the feedforward bookkeeping) and its final eigenvalue is read off
as a record combination.

Outcome variables are bit positions in arbitrary-precision ints.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..circuit import (
    ANNOTATIONS,
    GATES_1Q,
    GATES_2Q,
    MEASUREMENTS,
    NOISE,
    RESETS,
    Circuit,
)
from ..sim import Pauli

_BASIS_OF = {"MX": "X", "MY": "Y", "MZ": "Z", "RX": "X", "RZ": "Z"}
_FLIP_OF = {"X": "Z", "Z": "X"}  # Pauli that toggles the named basis


class _Row:
    """A Pauli times (-1)**(parity of the masked outcome variables)."""

    __slots__ = ("p", "mask")

    def __init__(self, p: Pauli, mask: int = 0):
        self.p = p
        self.mask = mask

    def mul(self, other: "_Row") -> None:
        self.p = self.p.mul(other.p)
        self.mask ^= other.mask


class SymbolicState:
    """Stabilizer tableau whose row signs are linear in measurement outcomes.

    Destabilizer rows are kept alongside the stabilizers so a deterministic
    measurement can be expressed as a product of stabilizer rows without
    solving a linear system: the product runs over the rows whose
    destabilizer partner anticommutes with the measured observable.
    """

    def __init__(self, n: int):
        self.n = n
        self.destab = [_Row(Pauli(n, x=1 << i)) for i in range(n)]
        self.stab = [_Row(Pauli(n, z=1 << i)) for i in range(n)]
        self.next_var = 0
        self.hidden_mask = 0

    def fresh_var(self, hidden: bool = False) -> int:
        v = self.next_var
        self.next_var += 1
        if hidden:
            self.hidden_mask |= 1 << v
        return v

    def conj_gate(self, name: str, targets: tuple[int, ...]) -> None:
        for row in self.destab:
            row.p.conj_gate(name, targets)
        for row in self.stab:
            row.p.conj_gate(name, targets)

    def stab_anticommuting(self, op: Pauli) -> _Row | None:
        for row in self.stab:
            if not row.p.commutes(op):
                return row
        return None

    def project(self, op: Pauli, var: int):
        """Measure the Hermitian Pauli `op`, outcome variable `var`.

        Returns None when the outcome is random (the state is collapsed and
        the new stabilizer carries variable `var`), else (const, mask): the
        outcome equals const xor the parity of the masked variables.
        """
        anti = [i for i, row in enumerate(self.stab) if not row.p.commutes(op)]
        if anti:
            p = anti[0]
            pivot = self.stab[p]
            for i in anti[1:]:
                self.stab[i].mul(pivot)
            for i, row in enumerate(self.destab):
                if i != p and not row.p.commutes(op):
                    row.mul(pivot)
            self.destab[p] = pivot
            self.stab[p] = _Row(op.copy(), 1 << var)
            return None
        acc = _Row(Pauli(self.n))
        for i, row in enumerate(self.destab):
            if not row.p.commutes(op):
                acc.mul(self.stab[i])
        diff = (acc.p.phase - op.phase) % 4
        if acc.p.x != op.x or acc.p.z != op.z or diff % 2:
            raise AssertionError("deterministic outcome not reproduced by the tableau")
        return (diff // 2) % 2, acc.mask

    def conditional_flip(self, q: int, flip: str, const: int, mask: int) -> None:
        """Conjugate by the flip Pauli on q, applied when const xor <mask> is 1.

        Only signs move: stabilizer rows anticommuting with the flip absorb
        the condition into their phase and mask.  Destabilizer signs are
        never read, so those rows are left alone.
        """
        m = 1 << q
        for row in self.stab:
            hit = (row.p.z & m) if flip == "X" else (row.p.x & m)
            if hit:
                row.p.phase = (row.p.phase + 2 * const) % 4
                row.mask ^= mask

    def value_of(self, op: Pauli):
        """(const, mask) for a Pauli in the stabilizer span, else None."""
        if any(not row.p.commutes(op) for row in self.stab):
            return None
        acc = _Row(Pauli(self.n))
        for i, row in enumerate(self.destab):
            if not row.p.commutes(op):
                acc.mul(self.stab[i])
        diff = (acc.p.phase - op.phase) % 4
        if acc.p.x != op.x or acc.p.z != op.z or diff % 2:
            return None
        return (diff // 2) % 2, acc.mask


@dataclass(frozen=True)
class Relation:
    """One deterministic record parity: xor of `records` equals `const`."""

    records: tuple[int, ...]
    const: int


class _Eliminator:
    """Forward GF(2) elimination of hidden (reset-outcome) variables.

    Pivot rows are keyed by their lowest hidden bit, so every pivot's other
    hidden bits lie strictly above its key; reduction therefore terminates,
    and the surviving rows span exactly the hidden-free part of the span.
    """

    def __init__(self, hidden_mask: int):
        self.hidden = hidden_mask
        self.pivots: dict[int, tuple[int, int]] = {}

    def reduce(self, mask: int, const: int) -> tuple[int, int]:
        """Reduce against the pivots collected so far."""
        while True:
            hm = mask & self.hidden
            if not hm:
                return mask, const
            v = (hm & -hm).bit_length() - 1
            if v not in self.pivots:
                return mask, const
            pm, pc = self.pivots[v]
            mask ^= pm
            const ^= pc

    def feed(self, mask: int, const: int):
        """Add one equation; returns it if it survives hidden-free, else None."""
        mask, const = self.reduce(mask, const)
        hm = mask & self.hidden
        if hm:
            self.pivots[(hm & -hm).bit_length() - 1] = (mask, const)
            return None
        if mask == 0:
            if const:
                raise AssertionError("inconsistent outcome relations")
            return None
        return mask, const


def _run_symbolic(
    circuit: Circuit,
    riders: list[Pauli] | None = None,
    board_at: list[int | None] | None = None,
):
    """Execute symbolically.

    Returns (relations, n_records, rider_values); each rider value is a
    (const, records) pair giving the rider's final eigenvalue.

    Riders board after the leading preparation block (the maximal initial
    run of resets and annotations) and must stabilize the state there: a
    memory experiment tracks the logical of its preparation basis.  A
    rider may instead carry an explicit boarding position via `board_at`
    (parallel to `riders`): the number of flat instructions executed
    before it boards, for logicals that only come into existence after a
    mid-circuit preparation.
    """
    n = circuit.num_qubits
    state = SymbolicState(n)
    riders = riders or []
    board_at = board_at or [None] * len(riders)
    rows: dict[int, _Row] = {}  # rider index -> live row
    equations: list[tuple[int, int]] = []  # (variable mask, const)
    var_of_record: list[int] = []

    def repair_riders(op: Pauli) -> None:
        for r in rows.values():
            if not r.p.commutes(op):
                stab = state.stab_anticommuting(op)
                if stab is None:
                    raise ValueError(
                        "a tracked logical anticommutes with a measurement whose "
                        "outcome is already determined; the circuit destroys it"
                    )
                r.mul(stab)

    def board(i: int) -> None:
        val = state.value_of(riders[i])
        if val != (0, 0):
            raise ValueError(
                "a tracked logical does not stabilize the prepared state"
            )
        rows[i] = _Row(riders[i].copy())

    in_prefix = True
    order: dict[int, list[int]] = {}
    for i, pos in enumerate(board_at):
        if pos is not None:
            order.setdefault(pos, []).append(i)
    position = 0
    for position, ins in enumerate(circuit.iter_flat()):
        for i in order.get(position, ()):
            board(i)
        name = ins.name
        if in_prefix and name not in RESETS and name not in ANNOTATIONS:
            in_prefix = False
            for i, pos in enumerate(board_at):
                if pos is None:
                    board(i)
        if name in GATES_1Q or name in GATES_2Q:
            state.conj_gate(name, ins.targets)
            for r in rows.values():
                r.p.conj_gate(name, ins.targets)
        elif name in MEASUREMENTS:
            b = _BASIS_OF[name]
            for q in ins.targets:
                op = Pauli.from_ops(n, {q: b})
                repair_riders(op)
                var = state.fresh_var()
                var_of_record.append(var)
                out = state.project(op, var)
                if out is not None:
                    const, mask = out
                    equations.append(((1 << var) ^ mask, const))
        elif name in RESETS:
            b = _BASIS_OF[name]
            for q in ins.targets:
                op = Pauli.from_ops(n, {q: b})
                repair_riders(op)
                var = state.fresh_var(hidden=True)
                out = state.project(op, var)
                const, mask = (0, 1 << var) if out is None else out
                flip = _FLIP_OF[b]
                state.conditional_flip(q, flip, const, mask)
                fop = Pauli.from_ops(n, {q: flip})
                for r in rows.values():
                    if not r.p.commutes(fop):
                        r.p.phase = (r.p.phase + 2 * const) % 4
                        r.mask ^= mask
        elif name in NOISE or name in ANNOTATIONS:
            continue
        else:
            raise ValueError(f"cannot run {name} symbolically")
    if in_prefix:
        for i, pos in enumerate(board_at):
            if pos is None:
                board(i)
    for i in order.get(position + 1, ()):
        board(i)
    assert len(rows) == len(riders), "a rider's boarding position was never reached"

    elim = _Eliminator(state.hidden_mask)
    survivors = []
    for mask, const in equations:
        kept = elim.feed(mask, const)
        if kept is not None:
            survivors.append(kept)

    record_of_var = {v: r for r, v in enumerate(var_of_record)}

    def to_records(mask: int) -> tuple[int, ...]:
        out = []
        while mask:
            low = mask & -mask
            out.append(record_of_var[low.bit_length() - 1])
            mask &= mask - 1
        return tuple(sorted(out))

    relations = [Relation(to_records(mask), const) for mask, const in survivors]

    rider_values = []
    for i in range(len(riders)):
        r = rows[i]
        val = state.value_of(Pauli(n, r.p.x, r.p.z, r.p.phase % 4))
        if val is None:
            raise ValueError(
                "a tracked logical is undetermined at the end of the circuit"
            )
        const, mask = val
        mask, const = elim.reduce(mask ^ r.mask, const)
        if mask & state.hidden_mask:
            raise ValueError("a tracked logical depends on a hidden reset outcome")
        rider_values.append((const, to_records(mask)))
    return relations, len(var_of_record), rider_values


def deterministic_relations(circuit: Circuit) -> list[Relation]:
    """All measurement-record parities forced to a constant at p=0.

    The returned relations generate, over GF(2), every record parity that is
    deterministic for the noiseless circuit.
    """
    rels, _, _ = _run_symbolic(circuit)
    return rels


def observable_records(
    circuit: Circuit,
    logicals: list[Pauli],
    board_at: list[int | None] | None = None,
) -> list[tuple[int, tuple[int, ...]]]:
    """Record combinations measuring each initial logical Pauli.

    Each Pauli must stabilize the state at the point it starts being tracked
    (a memory experiment tracks the logical of its preparation basis).  By
    default tracking starts once the leading reset block has executed;
    ``board_at[k]`` instead gives the number of flat instructions executed
    before logical ``k`` boards — used when a logical only comes into
    existence at a mid-circuit preparation.  Returns one (const, records) per
    logical: at p=0 the xor of those records always equals const.
    """
    _, _, values = _run_symbolic(circuit, riders=logicals, board_at=board_at)
    return values


def synthesize_detectors(circuit: Circuit) -> Circuit:
    """Copy of `circuit` with a DETECTOR appended for each forced parity.

    The appended detectors form a generating set: any deterministic record
    parity of the input circuit is a GF(2) combination of them.  Record
    references are emitted relative to the end of the circuit.
    """
    rels, n_records, _ = _run_symbolic(circuit)
    out = circuit.copy()
    for rel in rels:
        out.append("DETECTOR", rec=tuple(r - n_records for r in rel.records))
    return out
