"""Switching color code on the heavy-hex grid.

The patch cycles through its three plaquette colors; for each color it
measures the X stabilizers of every plaquette of that color, then the Z
stabilizers.  A phase expands the plaquettes onto their boundary edge
qubits with a depth-two CX pair, reads all their vertices transversally
(the plaquette value is the parity of those records), re-prepares the
vertices and contracts back.  Every outcome-conditioned sign lives in the
Pauli frame, so detectors simply compare consecutive effective plaquette
values; full plaquettes additionally yield a deterministic bridge-parity
check per phase.

Between phases the data is back on the vertices, which is where the
transversal layers of `color_transversal_gate` act.
"""

from __future__ import annotations

from ..circuit import Circuit, MEASUREMENTS, RESETS, plaquette_gadget
from ..lattice import Coord, Lattice, Plaquette, build_color_patch, vertex_parity
from ..sim import CliffordMap, Pauli, StabilizerCode, logical_action
from .base import (
    BuiltExperiment,
    CircuitWriter,
    ExperimentSpec,
    FrameLedger,
    register,
)
from .floquet import _BASIS_FLAG, _append_observables

_PHASES = (
    ("red", "X"),
    ("red", "Z"),
    ("green", "X"),
    ("green", "Z"),
    ("blue", "X"),
    ("blue", "Z"),
)
_MEAS = {"MX": "X", "MY": "Y", "MZ": "Z"}
_RESET = {"RX": "X", "RZ": "Z"}


def _patch(spec: ExperimentSpec) -> Lattice:
    kind = spec.variant or "triangle"
    size = spec.size or (4 if kind == "square" else 3)
    return build_color_patch(kind, size)


def _ring_qubits(
    lattice: Lattice, p: Plaquette, edge_of: dict[frozenset, Coord]
) -> tuple[list[Coord], list[Coord], bool]:
    """Ring-ordered vertices plus the edge ancilla between consecutive pairs.

    A truncated plaquette is rotated so its missing boundary edge sits at the
    wrap position and runs the open variant of the gadget.
    """
    verts = list(p.vertices)
    k = len(verts)
    gaps = [
        i for i in range(k) if frozenset((verts[i], verts[(i + 1) % k])) not in edge_of
    ]
    if gaps:
        assert p.truncated and len(gaps) == 1, (p.center, gaps)
        cut = gaps[0]
        verts = verts[cut + 1 :] + verts[: cut + 1]
    pairs = [(verts[i], verts[i + 1]) for i in range(k - 1)]
    if not gaps:
        pairs.append((verts[-1], verts[0]))
    return verts, [edge_of[frozenset(pr)] for pr in pairs], not gaps


def measure_color_phase(
    writer: CircuitWriter,
    color: str,
    basis: str,
    ledger: FrameLedger | None = None,
) -> list[tuple[Plaquette, int, int]]:
    """Measure all `color` plaquettes in `basis`, interleaved layer by layer.

    Returns (plaquette, value mask, bridge mask) triples.  The bridge mask is
    nonzero only for full plaquettes, where the parity of the contraction
    records is deterministic and usable as a consistency detector.
    """
    led = ledger or writer.ledger
    lattice = writer.lattice
    edge_of = {frozenset(e.endpoints): e.pos for e in lattice.edges}
    jobs = []
    for p in lattice.plaquettes:
        if p.color != color:
            continue
        verts, ancs, closed = _ring_qubits(lattice, p, edge_of)
        layers, meta = plaquette_gadget(
            [writer.q(v) for v in verts],
            [writer.q(a) for a in ancs],
            basis,
            closed,
        )
        jobs.append((p, layers, meta, closed, []))
    depths = {len(j[1]) for j in jobs}
    assert len(depths) == 1, "phase gadgets must advance in lockstep"
    for li in range(depths.pop()):
        for _, layers, _, _, masks in jobs:
            for name, tgt in layers[li]:
                if name in MEASUREMENTS:
                    masks.append(writer.measure(tgt, _MEAS[name], led))
                elif name in RESETS:
                    writer.reset(tgt, _RESET[name], led)
                else:
                    writer.gate(name, tgt, led)
        writer.tick()
    out = []
    for p, _, meta, closed, masks in jobs:
        assert len(masks) == meta.n_meas
        value = 0
        for i in meta.parity:
            value ^= masks[i]
        for pauli, q, i in meta.frames:
            led.add(pauli, q, masks[i])
        bridge = 0
        if closed:
            for m in masks[len(p.vertices) :]:
                bridge ^= m
        out.append((p, value, bridge))
    return out


def logical_chains(lattice: Lattice, basis: str) -> tuple[tuple[Coord, ...], ...]:
    """Fixed representatives of the encoded operators, one chain per qubit.

    Triangle patches use the transversal (all-vertex) representative.  The
    square patch pairs a horizontal chain (row y=4 minus its centre vertex —
    full rows fail to commute with the stub-row plaquettes) with the x=8
    column; each X chain overlaps its own Z partner in exactly one vertex,
    the other partner evenly.
    """
    if lattice.kind == "triangle":
        return (lattice.vertices,)
    horiz = tuple(v for v in lattice.vertices if v[1] == 4 and v[0] != 6)
    vert = tuple(v for v in lattice.vertices if v[0] == 8)
    if basis == "Z":
        return (horiz, vert)
    return (vert, horiz)


@register("color-switch")
def switching_color_code(spec: ExperimentSpec) -> BuiltExperiment:
    """Memory experiment for the switching color code."""
    lattice = _patch(spec)
    w = CircuitWriter(lattice)
    for v in lattice.vertices:
        w.reset(w.q(v), spec.basis)
    w.tick()

    slots: dict[tuple[Coord, str], int] = {}
    t = 0
    for phase in range(6 * spec.rounds):
        color, basis = _PHASES[phase % 6]
        for p, value, bridge in measure_color_phase(w, color, basis):
            cx, cy = float(p.center[0]), float(p.center[1])
            if bridge:
                w.detector(bridge, args=(cx, cy, float(t), _BASIS_FLAG["mixed"]))
            prev = slots.get((p.center, basis))
            if prev is not None:
                w.detector(prev ^ value, args=(cx, cy, float(t), _BASIS_FLAG[basis]))
            elif basis == spec.basis:
                w.detector(value, args=(cx, cy, float(t), _BASIS_FLAG[basis]))
            slots[(p.center, basis)] = value
        t += 1

    readout = {v: w.measure(w.q(v), spec.basis) for v in lattice.vertices}
    for p in lattice.plaquettes:
        mask = 0
        for v in p.vertices:
            mask ^= readout[v]
        prev = slots.get((p.center, spec.basis))
        if prev is not None:
            mask ^= prev
        w.detector(
            mask,
            args=(float(p.center[0]), float(p.center[1]), float(t), _BASIS_FLAG[spec.basis]),
        )

    riders = [
        Pauli.from_ops(lattice.n_qubits, {w.q(v): spec.basis for v in chain})
        for chain in logical_chains(lattice, spec.basis)
    ]
    _append_observables(w, riders)
    return BuiltExperiment(
        spec,
        lattice,
        w.circuit,
        meta={"chains": logical_chains(lattice, spec.basis)},
    )


# --------------------------------------------------------------------------
# transversal gates


_GATE_SETS = {"triangle": ("H", "S", "XS"), "square": ("H", "XS")}


def color_code(lattice: Lattice) -> StabilizerCode:
    """The static code the patch realizes between phases (edge qubits in |0>)."""
    n = lattice.n_qubits
    q = lattice.qubit_map
    stabs = []
    for p in lattice.plaquettes:
        for b in ("X", "Z"):
            stabs.append(Pauli.from_ops(n, {q[v]: b for v in p.vertices}))
    for e in lattice.edges:
        stabs.append(Pauli.from_ops(n, {q[e.pos]: "Z"}))
    lx = [
        Pauli.from_ops(n, {q[v]: "X" for v in chain})
        for chain in logical_chains(lattice, "X")
    ]
    lz = [
        Pauli.from_ops(n, {q[v]: "Z" for v in chain})
        for chain in logical_chains(lattice, "Z")
    ]
    return StabilizerCode(n=n, stabilizers=stabs, logical_x=lx, logical_z=lz)


def color_transversal_gate(patch: Lattice, gate: str) -> Circuit:
    """One transversal layer on the patch's data vertices, as a segment.

    `H` and `S` act uniformly; `XS` applies XS to up vertices and XS† to
    down vertices, which sends each plaquette's X check to its Y check with
    a sign fixed by half the vertex count — a stabilizer either way.
    """
    allowed = _GATE_SETS.get(patch.kind)
    if allowed is None or gate not in allowed:
        raise ValueError(f"gate {gate!r} is not transversal on {patch.kind!r} patches")
    seg = Circuit()
    if gate == "XS":
        ups = tuple(
            patch.qubit_map[v] for v in patch.vertices if vertex_parity(v) == "up"
        )
        downs = tuple(
            patch.qubit_map[v] for v in patch.vertices if vertex_parity(v) == "down"
        )
        seg.append("XS", ups)
        seg.append("XSDG", downs)
    else:
        seg.append(gate, tuple(patch.qubit_map[v] for v in patch.vertices))
    return seg


def transversal_action(patch: Lattice, gate: str) -> CliffordMap:
    """Logical action of a transversal layer on the patch's encoded qubits."""
    code = color_code(patch)
    return logical_action(color_transversal_gate(patch, gate), code, code)
