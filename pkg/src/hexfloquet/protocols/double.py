"""Two interleaved teleporting memories sharing one open patch.

While one code rests on the edge qubits of a single color, the other
advances from its own color through the (momentarily free) vertices onto
the next color.  Each slot therefore moves exactly one code by one cycle
step; the resting code is never touched, which is asserted instruction by
instruction during construction.  Boundary vertices whose step edge is a
dangling slot either get measured (matching fixed basis) or are swapped
out onto the dangling slot's physical qubit, so the vertices really are
vacated every slot -- this is why the builder insists on
``include_dangling``.

The module also provides the entangling segment between the two resting
codes: measure out one boundary row of carriers per code, bring the
remaining carrier pairs next to each other with three swap layers, apply
a transversal CX, and undo the swaps.  ``aligned_code`` reconstructs the
instantaneous two-logical stabilizer code at the insertion point so the
segment's induced logical map can be verified exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..circuit import Circuit
from ..lattice import Coord, Edge, Lattice, PatchSpec, build_hh_patch
from ..sim import (
    CliffordMap,
    Pauli,
    StabilizerCode,
    logical_action,
    tableau_run,
)
from .base import (
    CYCLE,
    BuiltExperiment,
    CircuitWriter,
    ExperimentSpec,
    FrameLedger,
    PlaquetteTracker,
    final_detectors,
    register,
    step_items,
)
from .floquet import _append_observables, memory_chain

_BASIS_FLAG = {"X": 0.0, "Z": 1.0, "mixed": 2.0}

#: phase lead of the trailing code; two steps keep the step bases aligned
#: so the vertices are always re-prepared in the basis the next flush needs
PHASE_OFFSET = 2


def _conjugate(basis: str) -> str:
    return "Z" if basis == "X" else "X"


@dataclass
class _CodeState:
    """Where one code's state currently rests, and its bookkeeping."""

    ledger: FrameLedger
    tracker: PlaquetteTracker
    prep_basis: str
    parked_edges: list[Edge]
    relocated: list[Edge]
    parked_basis: str | None = None

    def occupancy(self) -> set[Coord]:
        return {e.pos for e in self.parked_edges} | {e.pos for e in self.relocated}


def _slot_targets(writer: CircuitWriter, start: int) -> set[int]:
    """Qubits touched by instructions appended since ``start``."""
    touched: set[int] = set()
    for ins in writer.circuit.instructions[start:]:
        name = getattr(ins, "name", None)
        if name in ("DETECTOR", "OBSERVABLE_INCLUDE", "QUBIT_COORDS", "TICK"):
            continue
        touched.update(getattr(ins, "targets", ()))
    return touched


# -- the entangling segment ---------------------------------------------
#
# At an aligned resting point code 0 holds red carriers (cycle step 0) and
# code 1 holds blue carriers (cycle step 2).  Removing one boundary row
# from each makes the kept sets exact translates of one another by _SHIFT,
# which is what lets a transversal CX act pairwise.  The tables below are
# written for the 14x5 patch with corner "A"; other shapes need their own
# cut rows and routing.

_SHIFT = (2, 2)

#: boundary carriers measured out before routing, per code
_CUT = (
    ((3, 4), (9, 4), (12, 5)),  # code 0: top red row
    ((2, -1), (5, 0), (11, 0)),  # code 1: bottom blue row
)

#: three rounds of disjoint swaps; a swap of two occupied carriers is legal
#: and shows up where the routes of the two codes cross
_SWAP_LAYERS = (
    (
        ((6, -1), (6, 0)),
        ((8, 1), (8, 0)),
        ((3, 0), (4, 0)),
        ((5, 2), (4, 2)),
        ((9, 0), (10, 0)),
        ((11, 2), (12, 2)),
        ((0, 1), (0, 2)),
        ((14, 3), (14, 2)),
        ((3, 2), (2, 2)),
        ((5, 4), (4, 4)),
        ((9, 2), (10, 2)),
        ((11, 4), (10, 4)),
        ((6, 3), (6, 4)),
        ((8, 5), (8, 4)),
    ),
    (
        ((6, 0), (7, 0)),
        ((4, 0), (4, 1)),
        ((10, 0), (11, 0)),
        ((12, 1), (12, 2)),
        ((0, 2), (1, 2)),
        ((2, 2), (2, 3)),
        ((4, 4), (3, 4)),
        ((10, 2), (10, 3)),
        ((6, 4), (7, 4)),
    ),
    (
        ((12, 2), (13, 2)),
        ((12, 1), (12, 0)),
        ((2, 3), (2, 4)),
    ),
)


def _routed_pairs(
    kept_red: list[Coord], kept_blue: list[Coord]
) -> list[tuple[Coord, Coord]]:
    """(control, target) positions after routing; checks the tables as it goes."""
    occupant: dict[Coord, Coord | None] = {p: p for p in (*kept_red, *kept_blue)}
    for layer in _SWAP_LAYERS:
        used = [q for pair in layer for q in pair]
        assert len(used) == len(set(used)), "swap layer reuses a qubit"
        for a, b in layer:
            occupant[a], occupant[b] = occupant.get(b), occupant.get(a)
    final = {orig: pos for pos, orig in occupant.items() if orig is not None}
    assert len(final) == len(kept_red) + len(kept_blue)
    pairs = []
    for origin in kept_red:
        image = (origin[0] + _SHIFT[0], origin[1] + _SHIFT[1])
        assert image in final, f"no translated partner for carrier {origin}"
        a, b = final[origin], final[image]
        assert abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1, f"pair {a},{b} not adjacent"
        pairs.append((a, b))
    return pairs


class _Interleaver:
    """Runs the two codes slot by slot over one shared writer."""

    def __init__(self, lattice: Lattice, writer: CircuitWriter, bases: tuple[str, str]):
        if not lattice.include_dangling:
            raise ValueError(
                "interleaved codes collide on boundary vertices unless the "
                "dangling edge qubits are included"
            )
        self.lattice = lattice
        self.writer = writer
        self.sink = FrameLedger(lattice.n_qubits)
        self.codes = tuple(
            _CodeState(
                ledger=FrameLedger(lattice.n_qubits),
                tracker=PlaquetteTracker(lattice),
                prep_basis=b,
                parked_edges=[],
                relocated=[],
            )
            for b in bases
        )
        self.vertex_basis: str | None = None
        self.t = 0
        self.detectors_on = True
        #: flat position right after each code's preparation resets; the
        #: code's logical only exists from that instruction onwards
        self.board_pos: dict[int, int] = {}

    # -- slot pieces -----------------------------------------------------

    def prep(self, m: int) -> None:
        code = self.codes[m]
        for v in self.lattice.vertices:
            self.writer.reset(self.writer.q(v), code.prep_basis, code.ledger)
        code.tracker.prime(code.prep_basis)
        self.vertex_basis = code.prep_basis
        self.board_pos[m] = len(self.writer.circuit.instructions)

    def flush(self, m: int) -> None:
        """Bring code ``m`` back from its carriers onto the vertices."""
        code = self.codes[m]
        if not code.parked_edges and not code.relocated:
            return
        if self.vertex_basis != code.parked_basis:
            for v in self.lattice.vertices:
                self.writer.reset(self.writer.q(v), code.parked_basis, self.sink)
        for e in code.parked_edges:
            self.writer.measure_edge(e, code.parked_basis, "reset_out", code.ledger)
        for e in code.relocated:
            (v,) = e.endpoints
            self.writer.gate("SWAP", (self.writer.q(v), self.writer.q(e.pos)), code.ledger)
        code.parked_edges = []
        code.relocated = []

    def advance(self, m: int, phase: int) -> None:
        """Measure code ``m`` onto the edges of the phase's color."""
        code = self.codes[m]
        w = self.writer
        color, basis, items = step_items(self.lattice, phase)
        measured: list[tuple[frozenset[Coord], int]] = []
        for item in items:
            if item.edge is not None:
                mask = w.measure_edge(item.edge, basis, "measure_in", code.ledger)
            else:
                q = w.q(item.vertex)
                mask = w.measure(q, basis, code.ledger)
                w.reset(q, basis, code.ledger)
                code.ledger.add(_conjugate(basis), q, mask)
            measured.append((item.support, mask))
        relocated = []
        for e in self.lattice.dangling_edges():
            if e.color != color or e.basis == basis:
                continue
            (v,) = e.endpoints
            w.gate("SWAP", (w.q(v), w.q(e.pos)), code.ledger)
            w.reset(w.q(v), basis, code.ledger)
            relocated.append(e)
        code.parked_edges = [i.edge for i in items if i.edge is not None]
        code.relocated = relocated
        code.parked_basis = basis
        self.vertex_basis = basis
        if self.detectors_on:
            for ev in code.tracker.consume(basis, measured):
                w.detector(
                    ev.mask,
                    args=(
                        float(ev.center[0]),
                        float(ev.center[1]),
                        float(self.t),
                        _BASIS_FLAG[ev.basis],
                    ),
                )

    def slot(self, m: int, phase: int, first: bool = False) -> None:
        self.t += 1
        start = len(self.writer.circuit.instructions)
        if first:
            self.prep(m)
        else:
            self.flush(m)
        self.advance(m, phase)
        resting = self.codes[1 - m].occupancy()
        touched = _slot_targets(self.writer, start)
        overlap = touched & {self.writer.q(c) for c in resting}
        assert not overlap, f"slot touched the resting code's qubits: {sorted(overlap)}"
        assert not (self.codes[0].occupancy() & self.codes[1].occupancy())
        self.writer.tick()

    def _both(self, name: str, targets: tuple[int, ...]) -> None:
        """Append a gate conjugating both codes' ledgers (gadget layers only)."""
        self.writer.circuit.append(name, targets)
        for code in self.codes:
            code.ledger.gate(name, targets)

    def entangle(self) -> None:
        """Cut, route, transversal CX from code 0 onto code 1, route back.

        Measuring out one boundary row per code leaves two carrier sets that
        are exact translates; three swap layers bring each translated pair
        side by side for the CX and are then undone.  Detectors stay off from
        here on: the cut re-gauges plaquette signs, so comparisons against
        pre-gate values are no longer deterministic (the logical content is
        still tracked exactly, and the observables remain deterministic).
        """
        self.detectors_on = False
        w = self.writer
        for m, cut in enumerate(_CUT):
            missing = set(cut) - self.codes[m].occupancy()
            assert not missing, f"cut row not held by code {m}: {sorted(missing)}"
            for pos in cut:
                w.measure(w.q(pos), "Z", self.codes[m].ledger)
        w.tick()
        kept = tuple(
            sorted(self.codes[m].occupancy() - set(_CUT[m])) for m in (0, 1)
        )
        pairs = _routed_pairs(kept[0], kept[1])
        local = {
            frozenset((e.pos, v))
            for e in self.lattice.edges
            for v in e.endpoints
        }
        for a, b in [p for layer in _SWAP_LAYERS for p in layer] + pairs:
            assert frozenset((a, b)) in local, f"{a},{b} is not lattice-local"
        for layer in _SWAP_LAYERS:
            for a, b in layer:
                self._both("SWAP", (w.q(a), w.q(b)))
            w.tick()
        for a, b in pairs:
            self._both("CX", (w.q(a), w.q(b)))
        w.tick()
        for layer in reversed(_SWAP_LAYERS):
            for a, b in layer:
                self._both("SWAP", (w.q(a), w.q(b)))
            w.tick()

    def read_out(self, m: int) -> dict[Coord, int]:
        """Flush code ``m`` and measure every vertex in its memory basis."""
        code = self.codes[m]
        self.t += 1
        self.flush(m)
        masks = {
            v: self.writer.measure(self.writer.q(v), code.prep_basis, code.ledger)
            for v in self.lattice.vertices
        }
        self.vertex_basis = None  # vertices end in post-measurement states
        if self.detectors_on:
            for ev in final_detectors(code.tracker, masks, code.prep_basis):
                self.writer.detector(
                    ev.mask,
                    args=(
                        float(ev.center[0]),
                        float(ev.center[1]),
                        float(self.t),
                        _BASIS_FLAG[ev.basis],
                    ),
                )
        self.writer.tick()
        return masks


def _double_lattice(spec: ExperimentSpec) -> Lattice:
    patch = spec.patch or PatchSpec.from_distance(4, include_dangling=True)
    if not patch.include_dangling:
        raise ValueError(
            "the interleaved pair needs dangling edge qubits; "
            "build the patch with include_dangling=True"
        )
    return build_hh_patch(patch)


def _run_memory(
    inter: _Interleaver, rounds: int, extra_aligned: bool = False
) -> None:
    """Drive `rounds` full cycles of both codes (plus an aligned slot pair)."""
    steps = 6 * rounds + (1 if extra_aligned else 0)
    for k in range(steps):
        inter.slot(0, k % 6, first=(k == 0))
        inter.slot(1, (k + PHASE_OFFSET) % 6, first=(k == 0))


def _emit_memory_observables(inter: _Interleaver) -> None:
    """Observables 0 and 1: the codes' memory-basis logicals.

    The logicals live on different instants of the same qubits, so each
    rider boards right after its own code's preparation resets.
    """
    writer, lattice = inter.writer, inter.lattice
    riders = []
    for m in (0, 1):
        basis = inter.codes[m].prep_basis
        chain = memory_chain(lattice, basis)
        riders.append(
            Pauli.from_ops(lattice.n_qubits, {writer.q(v): basis for v in chain})
        )
    _append_observables(
        writer, riders, board_at=[inter.board_pos[0], inter.board_pos[1]]
    )


@register("double")
def double_floquet(
    spec: ExperimentSpec, bases: tuple[str, str] | None = None
) -> BuiltExperiment:
    """Memory experiment for the interleaved pair of teleporting codes.

    Both codes are prepared, cycled ``rounds`` times and read out
    transversally; observables 0 and 1 are the two codes' memory-basis
    logicals.  ``bases`` overrides the per-code preparation bases.
    """
    lattice = _double_lattice(spec)
    writer = CircuitWriter(lattice)
    bases = bases or (spec.basis, spec.basis)
    inter = _Interleaver(lattice, writer, bases)
    _run_memory(inter, spec.rounds)
    for m in (0, 1):
        if spec.rounds == 0:  # degenerate: the codes never leave the vertices
            inter.prep(m)
            writer.tick()
        inter.read_out(m)
    _emit_memory_observables(inter)
    meta = {
        "slots": 12 * spec.rounds,
        "bases": bases,
        "carriers": {m: sorted(inter.codes[m].occupancy()) for m in (0, 1)},
    }
    return BuiltExperiment(spec=spec, lattice=lattice, circuit=writer.circuit, meta=meta)


def _check_gadget_shape(lattice: Lattice) -> None:
    if lattice.shape != (14, 4) or lattice.corner != "A":
        raise ValueError(
            "the entangling segment's cut rows and swap schedule are written "
            "for the base 14x4 corner-A patch; larger patches need their own "
            "routing tables"
        )


@register("double-cnot")
def double_cnot(
    spec: ExperimentSpec, bases: tuple[str, str] | None = None
) -> BuiltExperiment:
    """Interleaved memory with one transversal entangling segment inserted.

    After ``rounds`` full cycles plus one aligned slot pair the segment runs
    (cut, route, CX with code 0 controlling, route back); the interleave then
    resumes for one more full cycle before transversal readout.  Observables
    are the two initial memory-basis logicals; under the gate one of them
    becomes a product of both codes' logicals, which the record synthesis
    resolves across the two readouts automatically.
    """
    built, _ = _build_entangled(spec, bases, with_gate=True)
    return built


def _build_entangled(
    spec: ExperimentSpec,
    bases: tuple[str, str] | None,
    with_gate: bool,
) -> tuple[BuiltExperiment, tuple[int, int]]:
    lattice = _double_lattice(spec)
    _check_gadget_shape(lattice)
    writer = CircuitWriter(lattice)
    bases = bases or (spec.basis, spec.basis)
    inter = _Interleaver(lattice, writer, bases)
    _run_memory(inter, spec.rounds, extra_aligned=True)
    seg_start = len(writer.circuit.instructions)
    if with_gate:
        inter.entangle()
    else:
        inter.detectors_on = False  # keep the control segment comparable
    first_resumed = 6 * spec.rounds + 1
    for k in range(first_resumed, first_resumed + 6):
        inter.slot(0, k % 6)
        inter.slot(1, (k + PHASE_OFFSET) % 6)
    seg_end = len(writer.circuit.instructions)
    for m in (0, 1):
        inter.read_out(m)
    _emit_memory_observables(inter)
    meta = {
        "bases": bases,
        "segment": (seg_start, seg_end),
        "carriers": {m: sorted(inter.codes[m].occupancy()) for m in (0, 1)},
    }
    built = BuiltExperiment(
        spec=spec, lattice=lattice, circuit=writer.circuit, meta=meta
    )
    return built, (seg_start, seg_end)


# -- exact certification of the segment's logical action -----------------


def _pauli_vec(p: Pauli, n: int) -> int:
    return p.x | (p.z << n)


class _Span:
    """GF(2) row space with bitmask rows and highest-bit pivots."""

    def __init__(self) -> None:
        self.rows: dict[int, int] = {}

    def reduce(self, v: int) -> int:
        while v:
            row = self.rows.get(v.bit_length() - 1)
            if row is None:
                return v
            v ^= row
        return 0

    def add(self, v: int) -> bool:
        v = self.reduce(v)
        if v:
            self.rows[v.bit_length() - 1] = v
            return True
        return False

    def contains(self, v: int) -> bool:
        return self.reduce(v) == 0


def _nullspace(rows: list[int], width: int) -> list[int]:
    """Basis of {x : parity(row & x) == 0 for every row}."""
    piv: dict[int, int] = {}
    for r in rows:
        while r:
            c = r.bit_length() - 1
            if c in piv:
                r ^= piv[c]
            else:
                piv[c] = r
                break
    for c in sorted(piv):  # back-substitute into reduced echelon form
        for c2, row in piv.items():
            if c2 != c and (row >> c) & 1:
                piv[c2] = row ^ piv[c]
    basis = []
    for free in range(width):
        if free in piv:
            continue
        v = 1 << free
        for c, row in piv.items():
            if (row >> free) & 1:
                v |= 1 << c
        basis.append(v)
    return basis


def _compose(gens: list[Pauli], picks: int, n: int) -> Pauli:
    out = Pauli(n)
    i = 0
    while picks:
        if picks & 1:
            out = out.mul(gens[i])
        picks >>= 1
        i += 1
    return out


def _carrier_logical(
    gens: list[Pauli], outside: list[int], stab_span: _Span, n: int
) -> Pauli:
    """Element of span(gens) supported inside one carrier set, not a stabilizer."""
    vecs = [_pauli_vec(p, n) for p in gens]
    cons = []
    for q in outside:
        for t in (q, q + n):
            row = 0
            for i, v in enumerate(vecs):
                row |= ((v >> t) & 1) << i
            if row:
                cons.append(row)
    for picks in _nullspace(cons, len(gens)):
        p = _compose(gens, picks, n)
        vec = _pauli_vec(p, n)
        if vec and not stab_span.contains(vec):
            return p
    raise ValueError("no logical representative inside the carrier set")


def _aligned_prefix(
    lattice: Lattice, bases: tuple[str, str], rounds: int
) -> tuple[Circuit, _Interleaver]:
    writer = CircuitWriter(lattice)
    inter = _Interleaver(lattice, writer, bases)
    _run_memory(inter, rounds, extra_aligned=True)
    return writer.circuit, inter


def aligned_code(lattice: Lattice, rounds: int = 1) -> StabilizerCode:
    """Signed stabilizer description of the aligned resting point.

    Runs the interleave prefix once per memory basis and intersects the two
    final stabilizer groups: the common span is the stabilizer group proper,
    and the leftover direction supported on each code's own carriers is that
    code's logical representative in the run's basis.
    """
    n = lattice.n_qubits
    groups: dict[str, list[Pauli]] = {}
    carriers: dict[int, set[int]] = {}
    for b in ("Z", "X"):
        circ, inter = _aligned_prefix(lattice, (b, b), rounds)
        res = tableau_run(circ, seed=0, with_noise=False)
        groups[b] = res.tableau.stabilizers()
        carriers = {
            m: {lattice.qubit_map[c] for c in inter.codes[m].occupancy()}
            for m in (0, 1)
        }
    gz, gx = groups["Z"], groups["X"]
    vz = [_pauli_vec(p, n) for p in gz]
    vx = [_pauli_vec(p, n) for p in gx]
    cons = []
    for t in range(2 * n):
        row = 0
        for i, v in enumerate(vz):
            row |= ((v >> t) & 1) << i
        for j, v in enumerate(vx):
            row |= ((v >> t) & 1) << (len(vz) + j)
        if row:
            cons.append(row)
    stab_span = _Span()
    stabilizers = []
    for sol in _nullspace(cons, len(vz) + len(vx)):
        p = _compose(gz, sol & ((1 << len(vz)) - 1), n)
        if stab_span.add(_pauli_vec(p, n)):
            stabilizers.append(p)
    if len(stabilizers) != n - 2:
        raise ValueError(
            f"aligned point holds {n - len(stabilizers)} logicals, expected 2"
        )
    logical_x, logical_z = [], []
    for m in (0, 1):
        outside = [q for q in range(n) if q not in carriers[m]]
        logical_z.append(_carrier_logical(gz, outside, stab_span, n))
        logical_x.append(_carrier_logical(gx, outside, stab_span, n))
    for m in (0, 1):
        assert not logical_x[m].commutes(logical_z[m])
        assert logical_x[m].commutes(logical_z[1 - m])
        assert logical_x[m].commutes(logical_x[1 - m])
    return StabilizerCode(
        n=n, stabilizers=stabilizers, logical_x=logical_x, logical_z=logical_z
    )


def double_floquet_cnot_gadget(spec: ExperimentSpec) -> Circuit:
    """The entangling stretch alone, as a standalone circuit segment.

    Starts at the aligned resting point reached after ``spec.rounds`` full
    cycles plus one aligned slot pair, and contains the cut measurements,
    the three swap layers, the transversal CX, the inverse swap layers, and
    the slot pairs carrying both codes to the next aligned resting point.
    """
    built, (a, b) = _build_entangled(spec, None, with_gate=True)
    return Circuit(built.circuit.instructions[a:b])


def entangling_action(rounds: int = 1, with_gate: bool = True) -> CliffordMap:
    """Exact logical map induced by the entangling segment.

    The analyzed stretch runs from one aligned resting point to the next
    (the gate plus the six slot pairs completing the cycle).  With
    ``with_gate=False`` the same stretch of plain interleaved memory is
    analyzed instead and must come out as the identity.
    """
    spec = ExperimentSpec(protocol="double-cnot", rounds=rounds)
    built, (a, b) = _build_entangled(spec, None, with_gate=with_gate)
    segment = Circuit(built.circuit.instructions[a:b])
    code = aligned_code(built.lattice, rounds)
    return logical_action(segment, code, code)
