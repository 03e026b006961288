"""Builders for the hexagonal-lattice memory experiments.

Three families share the machinery in `base`:

* ``css-floquet`` — the six-step cycle on the open patch, alternating
  colors and bases so the patch hosts one logical qubit; scheduled edges
  use the in-place leakage-reducing measurement.
* ``dancing`` / ``dancing-swap`` — the same cycle, but scheduled edges
  split their leakage-reducing measurement across two steps: the data is
  measured onto the edge qubit and teleported back at the start of the
  next step.  The swapped variant relocates the to-be-measured vertex
  remnants onto idle neighbouring edge qubits first, so the vertices can
  be re-prepared without waiting for measurement results.
* ``hh-floquet`` — the three-step X/Y/Z cycle on the torus with two
  tracked logicals.

Observables are emitted by symbolically tracing a documented logical
string through the finished circuit (`synth.observable_records`), which
yields the record set that deterministically reads it out.
"""

from __future__ import annotations

from ..lattice import Edge, Lattice, PatchSpec, build_hh_patch, build_hh_torus
from ..sim import Pauli
from .base import (
    CYCLE,
    BuiltExperiment,
    CircuitWriter,
    DetectorEvent,
    ExperimentSpec,
    LRSchedule,
    PlaquetteTracker,
    final_detectors,
    prep_data,
    readout_data,
    register,
    step_items,
)
from .synth import observable_records

Coord = tuple[int, int]

_SUCC = {"red": "green", "green": "blue", "blue": "red"}
_BASIS_FLAG = {"X": 0.0, "Z": 1.0, "mixed": 2.0}


# ---------------------------------------------------------------------------
# leakage-reduction schedules


def named_schedule(name: str, lattice: Lattice) -> LRSchedule:
    """Stock schedules, named by how often they re-prepare each data qubit.

    * ``none`` — every check is a plain ancilla-mediated measurement.
    * ``once`` — all edges of one color at its X step; each bulk vertex
      is re-prepared once per cycle.
    * ``twice`` — horizontal edges at the X steps; each vertex has two
      horizontal edges, of two different colors.
    * ``four-times`` — every edge at the X steps plus vertical edges at
      the Z steps: one vertical and two horizontal slots plus the
      vertical edge's second slot makes four per bulk vertex.
    * ``all`` — every edge at every step.
    """
    interior = list(lattice.interior_edges())

    def sel(step: int, pred) -> frozenset[Coord]:
        color = CYCLE[step][0]
        return frozenset(e.pos for e in interior if e.color == color and pred(e))

    horiz = lambda e: e.horizontal
    vert = lambda e: not e.horizontal
    every = lambda e: True
    empty = frozenset()

    if name == "none":
        steps = (empty,) * 6
    elif name == "once":
        steps = (sel(0, every), empty, empty, empty, empty, empty)
    elif name == "twice":
        steps = (sel(0, horiz), empty, sel(2, horiz), empty, sel(4, horiz), empty)
    elif name == "four-times":
        steps = (
            sel(0, every),
            sel(1, vert),
            sel(2, every),
            sel(3, vert),
            sel(4, every),
            sel(5, vert),
        )
    elif name == "all":
        steps = tuple(sel(s, every) for s in range(6))
    else:
        raise ValueError(f"unknown schedule name {name!r}")
    return LRSchedule(steps=steps, name=name)


def _resolve_schedule(spec: ExperimentSpec, lattice: Lattice) -> LRSchedule:
    sched = spec.schedule
    if isinstance(sched, str):
        sched = named_schedule(sched, lattice)
    sched.validate(lattice)
    return sched


# ---------------------------------------------------------------------------
# logical strings on the open patch


def memory_chain(lattice: Lattice, basis: str) -> tuple[Coord, ...]:
    """The documented boundary-to-boundary logical string.

    The Z string runs down the column x=2 between the two horizontal
    (Z-type) boundaries; the X string runs along the row y=2 between the
    vertical (X-type) boundaries.  They cross once, at (2, 2).
    """
    xmax, ymax = lattice.shape
    if basis == "Z":
        return tuple((2, y) for y in range(0, ymax + 1, 2))
    if basis == "X":
        return tuple((x, 2) for x in range(0, xmax + 1, 2))
    raise ValueError(basis)


def _chain_pauli(lattice: Lattice, basis: str) -> Pauli:
    ops = {lattice.qubit_map[v]: basis for v in memory_chain(lattice, basis)}
    return Pauli.from_ops(lattice.n_qubits, ops)


def _append_observables(
    writer: CircuitWriter,
    riders: list[Pauli],
    board_at: list[int | None] | None = None,
) -> None:
    """Trace each rider through the circuit; emit its deterministic records."""
    records_per = observable_records(writer.circuit, riders, board_at=board_at)
    for k, (_, records) in enumerate(records_per):
        mask = 0
        for r in records:
            mask |= 1 << r
        writer.observable(mask, k)


def _det_args(ev: DetectorEvent, t: int) -> tuple[float, ...]:
    return (
        float(ev.center[0]),
        float(ev.center[1]),
        float(t),
        _BASIS_FLAG[ev.basis],
    )


# ---------------------------------------------------------------------------
# the open-patch builders


@register("css-floquet")
def css_floquet(spec: ExperimentSpec) -> BuiltExperiment:
    """Six-step memory; scheduled edges use the one-shot teleporting style."""
    return _patch_memory(spec, dancing=False, swapped=False)


def dancing_floquet(spec: ExperimentSpec, swapped: bool = False) -> BuiltExperiment:
    """Six-step memory with the teleporting style split across steps.

    Scheduled edges are measured onto their edge qubit (which holds the
    fused state for one step) and expanded back onto the vertices at the
    start of the following step.  With ``swapped`` the vertex remnants
    are first relocated onto idle neighbouring edge qubits, one sublattice
    to the next color's edge and the other to the previous color's, and
    re-preparation always targets the plus state of the measured basis
    with corrections deferred to the frame ledger.
    """
    return _patch_memory(spec, dancing=True, swapped=swapped)


@register("dancing")
def _dancing(spec: ExperimentSpec) -> BuiltExperiment:
    return dancing_floquet(spec, swapped=False)


@register("dancing-swap")
def _dancing_swap(spec: ExperimentSpec) -> BuiltExperiment:
    return dancing_floquet(spec, swapped=True)


def _incident_interior(lattice: Lattice) -> dict[Coord, dict[str, Edge]]:
    out: dict[Coord, dict[str, Edge]] = {v: {} for v in lattice.vertices}
    for e in lattice.interior_edges():
        for v in e.endpoints:
            out[v][e.color] = e
    return out


def _patch_memory(spec: ExperimentSpec, dancing: bool, swapped: bool) -> BuiltExperiment:
    patch = spec.patch if spec.patch is not None else PatchSpec()
    lattice = build_hh_patch(patch)
    schedule = _resolve_schedule(spec, lattice)
    writer = CircuitWriter(lattice)
    tracker = PlaquetteTracker(lattice)
    incident = _incident_interior(lattice) if swapped else None

    prep_data(writer, spec.basis, tracker)
    writer.tick()

    parked: list[tuple[Edge, str]] = []
    t = 0
    for _ in range(spec.rounds):
        for s in range(6):
            t += 1
            color, sbasis, items = step_items(lattice, s)
            lr = schedule.steps[s]
            for edge, ebasis in parked:
                writer.measure_edge(edge, ebasis, "reset_out")
            parked = []
            measured: list[tuple[frozenset[Coord], int]] = []
            for item in items:
                if item.edge is None:
                    mask = writer.measure(writer.q(item.vertex), sbasis)
                elif item.edge.pos not in lr:
                    mask = writer.measure_edge(item.edge, sbasis, "standard")
                elif not dancing:
                    mask = writer.measure_edge(item.edge, sbasis, "leakage_reducing")
                else:
                    if swapped:
                        mask = _swapped_measure_in(
                            writer, item.edge, sbasis, color, incident
                        )
                    else:
                        mask = writer.measure_edge(item.edge, sbasis, "measure_in")
                    parked.append((item.edge, sbasis))
                measured.append((item.support, mask))
            for ev in tracker.consume(sbasis, measured):
                writer.detector(ev.mask, args=_det_args(ev, t))
            writer.tick()
    for edge, ebasis in parked:
        writer.measure_edge(edge, ebasis, "reset_out")
    if parked:
        writer.tick()
    parked = []

    readout = readout_data(writer, spec.basis)
    t += 1
    for ev in final_detectors(tracker, readout, spec.basis):
        writer.detector(ev.mask, args=_det_args(ev, t))
    _append_observables(writer, [_chain_pauli(lattice, spec.basis)])

    built = BuiltExperiment(spec=spec, lattice=lattice, circuit=writer.circuit)
    built.meta["schedule"] = schedule
    return built


def _swapped_measure_in(
    writer: CircuitWriter,
    edge: Edge,
    basis: str,
    color: str,
    incident: dict[Coord, dict[str, Edge]],
) -> int:
    """Teleporting measurement with the vertex remnants relocated first.

    An up-sublattice vertex swaps with the qubit of its edge of the next
    color, a down-sublattice vertex with the previous color's; both are
    idle during this step.  Vertices without that neighbour (boundary)
    are measured in place.  Re-preparation is unconditional, with the
    sign corrections landing in the frame ledger as usual.
    """
    v0, v1 = edge.endpoints
    anc = writer.q(edge.pos)
    writer.reset(anc, "Z" if basis == "X" else "X")
    for v in (v0, v1):
        q = writer.q(v)
        if basis == "X":
            writer.gate("CX", (q, anc))
        else:
            writer.gate("CX", (anc, q))
    homes = []
    for v in (v0, v1):
        q = writer.q(v)
        up = ((v[0] + v[1]) // 2) % 2 == 0
        want = _SUCC[color] if up else _SUCC[_SUCC[color]]
        parking = incident[v].get(want)
        if parking is None:
            homes.append(q)
            continue
        p = writer.q(parking.pos)
        writer.gate("SWAP", (q, p))
        homes.append(p)
    masks = [writer.measure(h, basis) for h in homes]
    frame = "Z" if basis == "X" else "X"
    for v, m in zip((v0, v1), masks):
        q = writer.q(v)
        writer.reset(q, basis)
        writer.ledger.add(frame, q, m)
    return masks[0] ^ masks[1]


# ---------------------------------------------------------------------------
# the torus builder

HH_CYCLE: tuple[tuple[str, str], ...] = (("red", "X"), ("green", "Y"), ("blue", "Z"))

#: a plaquette's ring value is read in two *adjacent* steps: the first
#: half's records would be scrambled by any intervening step, since that
#: step's checks share single vertices with them.  Listed per plaquette
#: color as (first ring color, second ring color); green straddles the
#: cycle boundary.
_HH_WINDOW = {"blue": ("red", "green"), "red": ("green", "blue"), "green": ("blue", "red")}


@register("hh-floquet")
def hastings_haah_floquet(spec: ExperimentSpec) -> BuiltExperiment:
    """Three-step memory on the torus: XX on red, YY on green, ZZ on blue.

    Every plaquette's ring consists of the other two colors' edges; its
    value is the parity of those six checks taken from two back-to-back
    steps, and detectors compare consecutive readings.  The two
    observables are a horizontal and a vertical homology string in the
    memory basis.
    """
    lx, ly = spec.torus if spec.torus is not None else (12, 4)
    lattice = build_hh_torus(lx, ly)
    writer = CircuitWriter(lattice)
    for v in lattice.vertices:
        writer.reset(writer.q(v), spec.basis)
    writer.tick()

    by_pair = {frozenset(e.endpoints): e for e in lattice.edges}
    rings: dict[Coord, list[Edge]] = {}
    color_of: dict[Coord, str] = {}
    for p in lattice.plaquettes:
        ring = p.vertices
        rings[p.center] = [
            by_pair[frozenset((ring[i], ring[(i + 1) % len(ring)]))]
            for i in range(len(ring))
        ]
        color_of[p.center] = p.color

    prev_value: dict[Coord, int | None] = {c: None for c in rings}
    half: dict[Coord, int | None] = {c: None for c in rings}
    last_edge_mask: dict[Coord, int] = {}

    def close(center: Coord, value: int, t: int) -> None:
        if prev_value[center] is not None:
            writer.detector(
                prev_value[center] ^ value,
                args=(float(center[0]), float(center[1]), float(t), _BASIS_FLAG["mixed"]),
            )
        prev_value[center] = value

    t = 0
    for cycle in range(spec.rounds):
        for s, (color, sbasis) in enumerate(HH_CYCLE):
            t += 1
            for e in lattice.edges:
                if e.color != color:
                    continue
                mask = writer.measure_edge(e, sbasis)
                last_edge_mask[e.pos] = mask
                if cycle == 0 and s == 0 and sbasis == spec.basis:
                    writer.detector(
                        mask, args=(float(e.pos[0]), float(e.pos[1]), float(t), _BASIS_FLAG[sbasis])
                    )
            for c, pc in color_of.items():
                first, second = _HH_WINDOW[pc]
                if color == first:
                    half[c] = _ring_mask(rings[c], color, last_edge_mask)
                elif color == second and half[c] is not None:
                    close(c, half[c] ^ _ring_mask(rings[c], color, last_edge_mask), t)
                    half[c] = None
            writer.tick()

    readout = {v: writer.measure(writer.q(v), spec.basis) for v in lattice.vertices}
    t += 1
    if spec.rounds == 0:
        for v in lattice.vertices:
            writer.detector(
                readout[v], args=(float(v[0]), float(v[1]), float(t), _BASIS_FLAG[spec.basis])
            )
    elif spec.basis == "Z":
        for e in lattice.edges:
            if e.color != "blue":
                continue
            u, v = e.endpoints
            writer.detector(
                last_edge_mask[e.pos] ^ readout[u] ^ readout[v],
                args=(float(e.pos[0]), float(e.pos[1]), float(t), _BASIS_FLAG["Z"]),
            )
    else:
        # the transversal X readout supplies the red half that the green
        # plaquettes' straddling window was still waiting for
        for c, pc in color_of.items():
            if pc != "green" or half[c] is None:
                continue
            mask = half[c]
            for e in rings[c]:
                if e.color == "red":
                    u, v = e.endpoints
                    mask ^= readout[u] ^ readout[v]
            close(c, mask, t)
    _append_observables(writer, _torus_strings(lattice, spec.basis))

    built = BuiltExperiment(spec=spec, lattice=lattice, circuit=writer.circuit)
    return built


def _ring_mask(ring: list[Edge], color: str, masks: dict[Coord, int]) -> int:
    out = 0
    for e in ring:
        if e.color == color:
            out ^= masks[e.pos]
    return out


def _torus_strings(lattice: Lattice, basis: str) -> list[Pauli]:
    """A horizontal loop (the y=0 row) and a vertical zigzag loop."""
    lx, ly = lattice.shape
    n = lattice.n_qubits
    row = {lattice.qubit_map[(x, 0)]: basis for x in range(0, lx, 2)}
    zig: dict[int, str] = {}
    for y in range(0, ly, 4):
        zig[lattice.qubit_map[(0, y)]] = basis
        zig[lattice.qubit_map[(0, (y + 2) % ly)]] = basis
        zig[lattice.qubit_map[(2, (y + 2) % ly)]] = basis
        zig[lattice.qubit_map[(2, (y + 4) % ly)]] = basis
    return [Pauli.from_ops(n, row), Pauli.from_ops(n, zig)]
