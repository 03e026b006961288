"""Stabilizer simulation: exact tableau runs, bit-packed Pauli-frame sampling,
determinism checking, and logical-action extraction for Clifford segments.

Two engines cover different needs.  `tableau_run` is the exact reference
(Gottesman–Knill, Aaronson–Gottesman tableau) used for oracles and as the
reference pass of the frame sampler.  `frame_sample` propagates Pauli frames
through the circuit 64 shots per machine word; its marginal detector and
observable statistics are exactly those of tableau Monte Carlo because random
measurement outcomes are re-randomized per shot by injecting the recorded
collapse operator.  A numba-compiled tableau kernel (`tableau_mc`) provides an
independent Monte-Carlo cross-check of the frame sampler.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circuit import (
    GATES_1Q,
    GATES_2Q,
    MEASUREMENTS,
    RESETS,
    Circuit,
)

# ---------------------------------------------------------------------------
# Pauli strings as integer bitmasks


def _popcount(x: int) -> int:
    return bin(x).count("1")


@dataclass
class Pauli:
    """An n-qubit Pauli as X/Z bitmasks with a phase i**phase (phase mod 4).

    The bit pair (x=1, z=1) denotes the Hermitian Y, so Hermitian Paulis have
    even phase (0 -> +1, 2 -> -1).  Odd phases appear transiently in group
    products such as X*Y = iZ.
    """

    n: int
    x: int = 0
    z: int = 0
    phase: int = 0

    @property
    def sign(self) -> int:
        """0 for +1, 1 for -1; raises on non-Hermitian phase."""
        if self.phase % 2:
            raise ValueError("Pauli has imaginary phase")
        return (self.phase // 2) % 2

    @classmethod
    def from_ops(cls, n: int, ops: dict[int, str], sign: int = 0) -> "Pauli":
        p = cls(n, phase=2 * sign)
        for q, kind in ops.items():
            if kind in ("X", "Y"):
                p.x |= 1 << q
            if kind in ("Z", "Y"):
                p.z |= 1 << q
        return p

    def commutes(self, other: "Pauli") -> bool:
        return (_popcount(self.x & other.z) + _popcount(self.z & other.x)) % 2 == 0

    def mul(self, other: "Pauli") -> "Pauli":
        """Group product self*other with exact i-power tracking."""
        x1, z1, x2, z2 = self.x, self.z, other.x, other.z
        px, py, pz = x1 & ~z1, x1 & z1, ~x1 & z1
        qx, qy, qz = x2 & ~z2, x2 & z2, ~x2 & z2
        plus = (px & qy) | (py & qz) | (pz & qx)
        minus = (px & qz) | (py & qx) | (pz & qy)
        phase = (self.phase + other.phase + _popcount(plus) - _popcount(minus)) % 4
        return Pauli(self.n, x1 ^ x2, z1 ^ z2, phase)

    def weight(self) -> int:
        return _popcount(self.x | self.z)

    def is_identity(self) -> bool:
        return self.x == 0 and self.z == 0

    def key(self) -> tuple[int, int]:
        return (self.x, self.z)

    def __str__(self) -> str:
        head = {0: "+", 1: "+i", 2: "-", 3: "-i"}[self.phase % 4]
        body = "".join(
            "IXZY"[((self.x >> q) & 1) + 2 * ((self.z >> q) & 1)] for q in range(self.n)
        )
        return head + body

    def conj_gate(self, name: str, targets: tuple[int, ...]) -> None:
        """Conjugate in place by the named gate: P -> U P U†."""
        x, z = self.x, self.z
        if name == "H":
            for q in targets:
                m = 1 << q
                if (x & m) and (z & m):
                    self.phase = (self.phase + 2) % 4
                xb, zb = x & m, z & m
                x = (x & ~m) | (m if zb else 0)
                z = (z & ~m) | (m if xb else 0)
        elif name in ("S", "SDG", "XS", "XSDG"):
            s_like = name in ("S", "XS")
            for q in targets:
                m = 1 << q
                if name in ("XS", "XSDG") and (z & m):
                    self.phase = (self.phase + 2) % 4  # leading X: Z->-Z, Y->-Y
                if x & m:
                    zb = bool(z & m)
                    if (s_like and zb) or (not s_like and not zb):
                        self.phase = (self.phase + 2) % 4  # S: Y->-X; S†: X->-Y
                    z ^= m
        elif name == "X":
            for q in targets:
                if z & (1 << q):
                    self.phase = (self.phase + 2) % 4
        elif name == "Z":
            for q in targets:
                if x & (1 << q):
                    self.phase = (self.phase + 2) % 4
        elif name == "Y":
            for q in targets:
                m = 1 << q
                if bool(x & m) ^ bool(z & m):
                    self.phase = (self.phase + 2) % 4
        elif name == "I":
            pass
        elif name == "CX":
            for c, t in zip(targets[::2], targets[1::2]):
                mc, mt = 1 << c, 1 << t
                if (x & mc) and (z & mt) and (bool(x & mt) == bool(z & mc)):
                    self.phase = (self.phase + 2) % 4
                if x & mc:
                    x ^= mt
                if z & mt:
                    z ^= mc
        elif name == "CZ":
            self.x, self.z = x, z
            for c, t in zip(targets[::2], targets[1::2]):
                self.conj_gate("H", (t,))
                self.conj_gate("CX", (c, t))
                self.conj_gate("H", (t,))
            x, z = self.x, self.z
        elif name == "SWAP":
            for a, b in zip(targets[::2], targets[1::2]):
                ma, mb = 1 << a, 1 << b
                xa, xb = bool(x & ma), bool(x & mb)
                za, zb = bool(z & ma), bool(z & mb)
                x = (x & ~(ma | mb)) | (ma if xb else 0) | (mb if xa else 0)
                z = (z & ~(ma | mb)) | (ma if zb else 0) | (mb if za else 0)
        else:
            raise ValueError(f"cannot conjugate by {name}")
        self.x, self.z = x, z

    def copy(self) -> "Pauli":
        return Pauli(self.n, self.x, self.z, self.phase)


@dataclass
class StabilizerCode:
    """A stabilizer group with chosen logical generators."""

    n: int
    stabilizers: list[Pauli]
    logical_x: list[Pauli] = field(default_factory=list)
    logical_z: list[Pauli] = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.logical_x)


# ---------------------------------------------------------------------------
# interactive tableau simulator (Aaronson–Gottesman CHP, numpy-vectorized rows)

_PHASE_TABLE = None


def _phase_table():
    """g(x1,z1,x2,z2): power of i from multiplying Pauli (x1,z1) by (x2,z2), in {-1,0,1}."""
    global _PHASE_TABLE
    if _PHASE_TABLE is None:
        t = np.zeros((2, 2, 2, 2), dtype=np.int8)
        for x1 in range(2):
            for z1 in range(2):
                for x2 in range(2):
                    for z2 in range(2):
                        if x1 == 0 and z1 == 0:
                            g = 0
                        elif x1 == 1 and z1 == 1:
                            g = z2 - x2
                        elif x1 == 1 and z1 == 0:
                            g = z2 * (2 * x2 - 1)
                        else:
                            g = x2 * (1 - 2 * z2)
                        t[x1, z1, x2, z2] = g
        _PHASE_TABLE = t
    return _PHASE_TABLE


class TableauSimulator:
    """Exact stabilizer-state simulator over n qubits.

    Rows 0..n-1 are destabilizers, n..2n-1 stabilizers; measurement follows
    the standard random/deterministic split with rowsum phase bookkeeping.
    """

    def __init__(self, n: int, rng=None):
        self.n = n
        self.x = np.zeros((2 * n, n), dtype=bool)
        self.z = np.zeros((2 * n, n), dtype=bool)
        self.r = np.zeros(2 * n, dtype=bool)
        self.x[np.arange(n), np.arange(n)] = True
        self.z[np.arange(n, 2 * n), np.arange(n)] = True
        self.rng = rng if rng is not None else np.random.default_rng()

    # -- gates ------------------------------------------------------------
    def h(self, q):
        self.r ^= self.x[:, q] & self.z[:, q]
        self.x[:, q], self.z[:, q] = self.z[:, q].copy(), self.x[:, q].copy()

    def s(self, q):
        self.r ^= self.x[:, q] & self.z[:, q]
        self.z[:, q] ^= self.x[:, q]

    def sdg(self, q):
        self.r ^= self.x[:, q]  # Z
        self.s(q)

    def cx(self, c, t):
        xc, zc = self.x[:, c], self.z[:, c]
        xt, zt = self.x[:, t], self.z[:, t]
        self.r ^= xc & zt & (xt ^ zc ^ True)
        xt ^= xc
        zc ^= zt

    def gate(self, name, targets):
        if name == "H":
            for q in targets:
                self.h(q)
        elif name == "S":
            for q in targets:
                self.s(q)
        elif name == "SDG":
            for q in targets:
                self.sdg(q)
        elif name == "X":
            for q in targets:
                self.r ^= self.z[:, q]
        elif name == "Z":
            for q in targets:
                self.r ^= self.x[:, q]
        elif name == "Y":
            for q in targets:
                self.r ^= self.x[:, q] ^ self.z[:, q]
        elif name == "I":
            pass
        elif name == "XS":
            for q in targets:
                self.r ^= self.z[:, q]
                self.s(q)
        elif name == "XSDG":
            for q in targets:
                self.r ^= self.z[:, q]
                self.sdg(q)
        elif name == "CX":
            for c, t in zip(targets[::2], targets[1::2]):
                self.cx(c, t)
        elif name == "CZ":
            for c, t in zip(targets[::2], targets[1::2]):
                self.h(t)
                self.cx(c, t)
                self.h(t)
        elif name == "SWAP":
            for a, b in zip(targets[::2], targets[1::2]):
                for arr in (self.x, self.z):
                    arr[:, [a, b]] = arr[:, [b, a]]
        else:
            raise ValueError(f"non-Clifford or unknown gate {name!r}")

    # -- rowsum -----------------------------------------------------------
    def _rowsum_into(self, xh, zh, rh, i):
        """(xh,zh,rh) *= row i in place; returns the new sign bit."""
        g = _phase_table()
        tot = int(
            g[
                self.x[i].astype(np.int8),
                self.z[i].astype(np.int8),
                xh.astype(np.int8),
                zh.astype(np.int8),
            ].sum()
        )
        phase = (2 * int(rh) + 2 * int(self.r[i]) + tot) % 4
        xh ^= self.x[i]
        zh ^= self.z[i]
        return phase // 2

    def _rowsum(self, h, i):
        self.r[h] = self._rowsum_into(self.x[h], self.z[h], self.r[h], i)

    # -- measurement ------------------------------------------------------
    def measure(self, q, basis="Z", bias=None):
        """Measure qubit q in the given basis; returns (outcome, was_random).

        `bias` forces the outcome of a random measurement (no rng draw).
        """
        if basis == "X":
            self.h(q)
            out = self.measure(q, "Z", bias)
            self.h(q)
            return out
        if basis == "Y":
            self.sdg(q)
            self.h(q)
            out = self.measure(q, "Z", bias)
            self.h(q)
            self.s(q)
            return out
        n = self.n
        hits = np.flatnonzero(self.x[n:, q])
        if hits.size:
            p = n + int(hits[0])
            for h in np.flatnonzero(self.x[:, q]):
                if h != p:
                    self._rowsum(int(h), p)
            self.x[p - n] = self.x[p]
            self.z[p - n] = self.z[p]
            self.r[p - n] = self.r[p]
            self.x[p] = False
            self.z[p] = False
            self.z[p, q] = True
            outcome = bool(self.rng.integers(2)) if bias is None else bool(bias)
            self.r[p] = outcome
            return int(outcome), True
        xh = np.zeros(n, dtype=bool)
        zh = np.zeros(n, dtype=bool)
        rh = 0
        for i in range(n):
            if self.x[i, q]:
                rh = self._rowsum_into(xh, zh, rh, n + i)
        return int(rh), False

    def reset(self, q, basis="Z"):
        if basis == "X":
            self.h(q)
            self.reset(q, "Z")
            self.h(q)
            return
        m, _ = self.measure(q, "Z")
        if m:
            self.r ^= self.z[:, q]  # X flip back to |0>

    def measure_pauli(self, p: Pauli, bias=None):
        """Measure an arbitrary Hermitian Pauli; returns (outcome, was_random, pivot or None)."""
        n = self.n
        px = _mask_to_bools(p.x, n)
        pz = _mask_to_bools(p.z, n)
        anti = ((self.x & pz).sum(axis=1) + (self.z & px).sum(axis=1)) % 2 == 1
        stab_anti = np.flatnonzero(anti[n:])
        if stab_anti.size:
            piv = n + int(stab_anti[0])
            for h in np.flatnonzero(anti):
                if h != piv:
                    self._rowsum(int(h), piv)
            self.x[piv - n] = self.x[piv]
            self.z[piv - n] = self.z[piv]
            self.r[piv - n] = self.r[piv]
            outcome = bool(self.rng.integers(2)) if bias is None else bool(bias)
            self.x[piv] = px
            self.z[piv] = pz
            self.r[piv] = bool(outcome) ^ bool(p.sign)
            return int(outcome), True, piv
        xh = np.zeros(n, dtype=bool)
        zh = np.zeros(n, dtype=bool)
        rh = 0
        for i in np.flatnonzero(anti[:n]):
            rh = self._rowsum_into(xh, zh, rh, n + int(i))
        if not (np.array_equal(xh, px) and np.array_equal(zh, pz)):
            raise ValueError("measured Pauli commutes with but lies outside the stabilizer group")
        return int(rh) ^ p.sign, False, None

    def apply_pauli(self, p: Pauli):
        """Apply a Pauli operator (flips signs of anticommuting rows)."""
        px = _mask_to_bools(p.x, self.n)
        pz = _mask_to_bools(p.z, self.n)
        anti = ((self.x & pz).sum(axis=1) + (self.z & px).sum(axis=1)) % 2 == 1
        self.r ^= anti

    def stabilizers(self) -> list[Pauli]:
        return [
            Pauli(
                self.n,
                _bools_to_mask(self.x[i]),
                _bools_to_mask(self.z[i]),
                2 * int(self.r[i]),
            )
            for i in range(self.n, 2 * self.n)
        ]


def _mask_to_bools(mask: int, n: int) -> np.ndarray:
    return np.array([(mask >> i) & 1 for i in range(n)], dtype=bool)


def _bools_to_mask(bits: np.ndarray) -> int:
    out = 0
    for i in np.flatnonzero(bits):
        out |= 1 << int(i)
    return out


def tableau_from_stabilizers(n: int, gens: list[Pauli], rng=None) -> TableauSimulator:
    """Prepare a stabilizer state with every generator forced to its stated sign."""
    sim = TableauSimulator(n, rng=rng or np.random.default_rng(0))
    for g in gens:
        out, _, piv = sim.measure_pauli(g)
        if out:
            if piv is None:
                raise ValueError("inconsistent stabilizer generators")
            flip = Pauli(
                n,
                _bools_to_mask(sim.x[piv - n]),
                _bools_to_mask(sim.z[piv - n]),
            )
            sim.apply_pauli(flip)
    return sim


# ---------------------------------------------------------------------------
# full-circuit tableau execution

_BASIS_OF = {"MX": "X", "MY": "Y", "MZ": "Z", "RX": "X", "RZ": "Z"}


@dataclass
class RunResult:
    records: np.ndarray  # bool, one bit per measurement
    record_random: np.ndarray  # bool, whether the outcome was a fresh coin flip
    detectors: np.ndarray  # bool detector values (not events)
    observables: np.ndarray  # bool observable values
    tableau: TableauSimulator


def tableau_run(circuit: Circuit, seed=None, with_noise=True) -> RunResult:
    """Execute the circuit exactly; noise channels are Monte-Carlo sampled per seed."""
    rng = np.random.default_rng(seed)
    sim = TableauSimulator(circuit.num_qubits, rng=rng)
    records: list[int] = []
    record_random: list[bool] = []
    detectors: list[int] = []
    observables = np.zeros(circuit.num_observables, dtype=bool)
    for ins in circuit.iter_flat():
        name = ins.name
        if name in GATES_1Q or name in GATES_2Q:
            sim.gate(name, ins.targets)
        elif name in MEASUREMENTS:
            for q in ins.targets:
                m, was_random = sim.measure(q, _BASIS_OF[name])
                records.append(m)
                record_random.append(was_random)
        elif name in RESETS:
            for q in ins.targets:
                sim.reset(q, _BASIS_OF[name])
        elif name == "DEPOLARIZE1":
            if with_noise:
                p = ins.args[0]
                for q in ins.targets:
                    if rng.random() < p:
                        sim.gate("XZY"[rng.integers(3)], (q,))
        elif name == "DEPOLARIZE2":
            if with_noise:
                p = ins.args[0]
                for a, b in zip(ins.targets[::2], ins.targets[1::2]):
                    if rng.random() < p:
                        k = int(rng.integers(15)) + 1
                        pa, pb = k % 4, k // 4
                        if pa:
                            sim.gate("IXZY"[pa], (a,))
                        if pb:
                            sim.gate("IXZY"[pb], (b,))
        elif name in ("X_ERROR", "Z_ERROR"):
            if with_noise:
                p = ins.args[0]
                for q in ins.targets:
                    if rng.random() < p:
                        sim.gate(name[0], (q,))
        elif name == "FLIP_MEAS":
            if with_noise:
                p = ins.args[0]
                for r in ins.rec:
                    if rng.random() < p:
                        records[r] ^= 1
        elif name == "DETECTOR":
            v = 0
            for r in ins.rec:
                v ^= records[r]
            detectors.append(v)
        elif name == "OBSERVABLE_INCLUDE":
            k = int(ins.args[0])
            for r in ins.rec:
                observables[k] ^= records[r]
        elif name in ("QUBIT_COORDS", "TICK"):
            pass
        else:
            raise ValueError(f"cannot execute {name}")
    return RunResult(
        records=np.array(records, dtype=bool),
        record_random=np.array(record_random, dtype=bool),
        detectors=np.array(detectors, dtype=bool),
        observables=observables,
        tableau=sim,
    )


# ---------------------------------------------------------------------------
# sample batches


@dataclass
class SampleBatch:
    """Detector events and observable flips for a block of shots, bit-packed.

    Row-major: one row per shot, little-endian bit order within each byte
    (bit j of byte k of a row is detector 8k+j).  Detector bits are events
    (value XOR noiseless value); observable bits are flips.
    """

    shots: int
    num_detectors: int
    num_observables: int
    detectors: np.ndarray  # uint8 [shots, ceil(D/8)]
    observables: np.ndarray  # uint8 [shots, ceil(K/8)]

    MAGIC = b"HXFQSB01"

    def detector_bits(self) -> np.ndarray:
        """Unpack to bool [shots, D]."""
        return _unpack_rows(self.detectors, self.num_detectors)

    def observable_bits(self) -> np.ndarray:
        return _unpack_rows(self.observables, self.num_observables)

    def save(self, path) -> None:
        with open(path, "wb") as f:
            f.write(self.MAGIC)
            np.array(
                [self.shots, self.num_detectors, self.num_observables], dtype="<u8"
            ).tofile(f)
            f.write(self.detectors.tobytes())
            f.write(self.observables.tobytes())

    @classmethod
    def load(cls, path) -> "SampleBatch":
        with open(path, "rb") as f:
            if f.read(8) != cls.MAGIC:
                raise ValueError("not a sample batch file")
            shots, nd, nk = (int(v) for v in np.fromfile(f, dtype="<u8", count=3))
            det = np.fromfile(f, dtype=np.uint8, count=shots * ((nd + 7) // 8))
            obs = np.fromfile(f, dtype=np.uint8, count=shots * ((nk + 7) // 8))
        return cls(
            shots,
            nd,
            nk,
            det.reshape(shots, (nd + 7) // 8),
            obs.reshape(shots, (nk + 7) // 8),
        )


def _unpack_rows(packed: np.ndarray, width: int) -> np.ndarray:
    if width == 0:
        return np.zeros((packed.shape[0], 0), dtype=bool)
    bits = np.unpackbits(packed, axis=1, bitorder="little")
    return bits[:, :width].astype(bool)


def _pack_planes(planes: np.ndarray, shots: int) -> np.ndarray:
    """uint64 planes [rows, words] -> uint8 [shots, ceil(rows/8)] row-major."""
    rows = planes.shape[0]
    if rows == 0:
        return np.zeros((shots, 0), dtype=np.uint8)
    bytes_ = planes.view(np.uint8).reshape(rows, -1)
    bits = np.unpackbits(bytes_, axis=1, bitorder="little")[:, :shots]
    return np.packbits(bits.T, axis=1, bitorder="little")


def _pack_bools(bits: np.ndarray) -> np.ndarray:
    """bool [shots, D] -> uint8 [shots, ceil(D/8)]."""
    if bits.shape[1] == 0:
        return np.zeros((bits.shape[0], 0), dtype=np.uint8)
    return np.packbits(bits, axis=1, bitorder="little")


# ---------------------------------------------------------------------------
# frame sampler


class _FrameEngine:
    """Pauli-frame propagation, 64 shots per uint64 word.

    Planes hold flips relative to a fixed noiseless reference tableau run.
    At every measurement the reference pass recorded whether the outcome was
    a fresh coin flip; if so, each shot re-flips it independently and the
    recorded collapse operator (the stabilizer row consumed by the collapse)
    is injected into the frame.  That injection is what makes the per-shot
    statistics exactly those of tableau Monte Carlo — flipping only the
    measured qubit would mispropagate the deviation whenever the consumed
    stabilizer had weight > 1.
    """

    def __init__(self, circuit: Circuit, shots: int, seed=None, randomize=True):
        self.circuit = circuit
        self.shots = shots
        self.W = (shots + 63) // 64
        self.rng = np.random.default_rng(seed)
        self.randomize = randomize
        self.ref = tableau_run(circuit, seed=0, with_noise=False)
        self._collapse_ops = self._record_collapse_ops()

    def _record_collapse_ops(self):
        """Replay the reference pass, capturing each random measurement's collapse operator."""
        circuit = self.circuit
        n = circuit.num_qubits
        sim = TableauSimulator(n, rng=np.random.default_rng(0))
        ops: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        idx = 0
        for ins in circuit.iter_flat():
            if ins.name in GATES_1Q or ins.name in GATES_2Q:
                sim.gate(ins.name, ins.targets)
            elif ins.name in MEASUREMENTS:
                basis = _BASIS_OF[ins.name]
                for q in ins.targets:
                    if basis == "X":
                        sim.h(q)
                    elif basis == "Y":
                        sim.sdg(q)
                        sim.h(q)
                    hits = np.flatnonzero(sim.x[n:, q])
                    if hits.size:
                        piv = n + int(hits[0])
                        p = Pauli(n, _bools_to_mask(sim.x[piv]), _bools_to_mask(sim.z[piv]))
                        # rotate the collapse operator back to the original frame
                        if basis == "X":
                            p.conj_gate("H", (q,))
                        elif basis == "Y":
                            p.conj_gate("H", (q,))
                            p.conj_gate("S", (q,))
                        ops[idx] = (_mask_to_bools(p.x, n), _mask_to_bools(p.z, n))
                    sim.measure(q, "Z", bias=bool(self.ref.records[idx]))
                    if basis == "X":
                        sim.h(q)
                    elif basis == "Y":
                        sim.h(q)
                        sim.s(q)
                    idx += 1
            elif ins.name in RESETS:
                for q in ins.targets:
                    sim.reset(q, _BASIS_OF[ins.name])
        return ops

    def _positions(self, p: float) -> np.ndarray:
        """Indices of shots hit by an event of probability p (geometric gaps when sparse)."""
        if p <= 0:
            return np.zeros(0, dtype=np.int64)
        if p >= 0.05:
            return np.flatnonzero(self.rng.random(self.shots) < p)
        chunks = []
        last = -1
        est = max(16, int(self.shots * p * 2 + 32))
        while True:
            gaps = self.rng.geometric(p, size=est)
            pos = last + np.cumsum(gaps)
            inside = pos[pos < self.shots]
            chunks.append(inside)
            if inside.size < pos.size:
                break
            last = int(pos[-1])
        return np.concatenate(chunks)

    def _bernoulli_words(self, p: float) -> np.ndarray:
        out = np.zeros(self.W, dtype=np.uint64)
        self._scatter(out, self._positions(p))
        return out

    def _rand_words(self) -> np.ndarray:
        w = self.rng.integers(0, 1 << 32, size=self.W, dtype=np.uint64)
        w |= self.rng.integers(0, 1 << 32, size=self.W, dtype=np.uint64) << np.uint64(32)
        if self.shots % 64:
            w[-1] &= (np.uint64(1) << np.uint64(self.shots % 64)) - np.uint64(1)
        return w

    @staticmethod
    def _scatter(row: np.ndarray, pos: np.ndarray) -> None:
        if pos.size:
            np.bitwise_xor.at(
                row, pos >> 6, np.uint64(1) << (pos & 63).astype(np.uint64)
            )

    def run(self):
        circuit = self.circuit
        n = circuit.num_qubits
        W = self.W
        fx = np.zeros((n, W), dtype=np.uint64)
        fz = np.zeros((n, W), dtype=np.uint64)
        rec = np.zeros((len(self.ref.records), W), dtype=np.uint64)
        det_rows: list[np.ndarray] = []
        obs = np.zeros((circuit.num_observables, W), dtype=np.uint64)
        idx = 0

        for ins in circuit.iter_flat():
            name = ins.name
            if name == "H":
                for q in ins.targets:
                    fx[q], fz[q] = fz[q].copy(), fx[q].copy()
            elif name in ("S", "SDG", "XS", "XSDG"):
                for q in ins.targets:
                    fz[q] ^= fx[q]
            elif name in ("X", "Y", "Z", "I"):
                pass
            elif name == "CX":
                for c, t in zip(ins.targets[::2], ins.targets[1::2]):
                    fx[t] ^= fx[c]
                    fz[c] ^= fz[t]
            elif name == "CZ":
                for c, t in zip(ins.targets[::2], ins.targets[1::2]):
                    fz[t] ^= fx[c]
                    fz[c] ^= fx[t]
            elif name == "SWAP":
                for a, b in zip(ins.targets[::2], ins.targets[1::2]):
                    fx[[a, b]] = fx[[b, a]]
                    fz[[a, b]] = fz[[b, a]]
            elif name in MEASUREMENTS:
                for q in ins.targets:
                    if name == "MZ":
                        flips = fx[q].copy()
                    elif name == "MX":
                        flips = fz[q].copy()
                    else:
                        flips = fx[q] ^ fz[q]
                    if self.randomize and idx in self._collapse_ops:
                        fresh = self._rand_words()
                        flips ^= fresh
                        ox, oz = self._collapse_ops[idx]
                        for j in np.flatnonzero(ox):
                            fx[j] ^= fresh
                        for j in np.flatnonzero(oz):
                            fz[j] ^= fresh
                    rec[idx] = flips
                    if name == "MZ":
                        fz[q] = 0
                    elif name == "MX":
                        fx[q] = 0
                    idx += 1
            elif name in RESETS:
                for q in ins.targets:
                    fx[q] = 0
                    fz[q] = 0
            elif name == "DEPOLARIZE1":
                p = ins.args[0]
                for q in ins.targets:
                    pos = self._positions(p)
                    if pos.size == 0:
                        continue
                    kind = self.rng.integers(1, 4, size=pos.size)
                    self._scatter(fx[q], pos[(kind & 1) != 0])
                    self._scatter(fz[q], pos[(kind & 2) != 0])
            elif name == "DEPOLARIZE2":
                p = ins.args[0]
                for a, b in zip(ins.targets[::2], ins.targets[1::2]):
                    pos = self._positions(p)
                    if pos.size == 0:
                        continue
                    kind = self.rng.integers(1, 16, size=pos.size)
                    ka, kb = kind & 3, kind >> 2
                    self._scatter(fx[a], pos[(ka & 1) != 0])
                    self._scatter(fz[a], pos[(ka & 2) != 0])
                    self._scatter(fx[b], pos[(kb & 1) != 0])
                    self._scatter(fz[b], pos[(kb & 2) != 0])
            elif name == "X_ERROR":
                for q in ins.targets:
                    fx[q] ^= self._bernoulli_words(ins.args[0])
            elif name == "Z_ERROR":
                for q in ins.targets:
                    fz[q] ^= self._bernoulli_words(ins.args[0])
            elif name == "FLIP_MEAS":
                for r in ins.rec:
                    rec[idx + r] ^= self._bernoulli_words(ins.args[0])
            elif name == "DETECTOR":
                row = np.zeros(W, dtype=np.uint64)
                for r in ins.rec:
                    row ^= rec[idx + r]
                det_rows.append(row)
            elif name == "OBSERVABLE_INCLUDE":
                k = int(ins.args[0])
                for r in ins.rec:
                    obs[k] ^= rec[idx + r]
            elif name in ("QUBIT_COORDS", "TICK"):
                pass
            else:
                raise ValueError(f"cannot sample {name}")
        det = np.stack(det_rows) if det_rows else np.zeros((0, W), dtype=np.uint64)
        return det, obs, rec


def frame_sample(circuit: Circuit, shots: int, seed=None) -> SampleBatch:
    """Sample detector events and observable flips via Pauli-frame propagation."""
    eng = _FrameEngine(circuit, shots, seed=seed)
    det, obs, _ = eng.run()
    return SampleBatch(
        shots=shots,
        num_detectors=det.shape[0],
        num_observables=circuit.num_observables,
        detectors=_pack_planes(det, shots),
        observables=_pack_planes(obs, shots),
    )


# ---------------------------------------------------------------------------
# numba-compiled tableau Monte Carlo (independent cross-check of the sampler)

_OP_H, _OP_S, _OP_SDG, _OP_X, _OP_Y, _OP_Z = 0, 1, 2, 3, 4, 5
_OP_CX, _OP_CZ, _OP_SWAP = 6, 7, 8
_OP_MZ, _OP_MX, _OP_MY = 9, 10, 11
_OP_RZ, _OP_RX = 12, 13
_OP_DEP1, _OP_DEP2, _OP_XERR, _OP_ZERR, _OP_FLIP = 14, 15, 16, 17, 18

_1Q_CODE = {"H": _OP_H, "S": _OP_S, "SDG": _OP_SDG, "X": _OP_X, "Y": _OP_Y, "Z": _OP_Z}


def _compile_ops(circuit: Circuit):
    """Flatten a circuit into (opcode, a, b) rows plus per-row probabilities."""
    ops: list[tuple[int, int, int]] = []
    probs: list[float] = []
    det_masks: list[list[int]] = []
    obs_masks: list[list[int]] = [[] for _ in range(circuit.num_observables)]
    nrec = 0

    def push(code, a=0, b=0, p=0.0):
        ops.append((code, a, b))
        probs.append(p)

    for ins in circuit.iter_flat():
        name = ins.name
        if name in _1Q_CODE:
            for q in ins.targets:
                push(_1Q_CODE[name], q)
        elif name == "I":
            pass
        elif name == "XS":
            for q in ins.targets:
                push(_OP_X, q)
                push(_OP_S, q)
        elif name == "XSDG":
            for q in ins.targets:
                push(_OP_X, q)
                push(_OP_SDG, q)
        elif name in ("CX", "CZ", "SWAP"):
            code = {"CX": _OP_CX, "CZ": _OP_CZ, "SWAP": _OP_SWAP}[name]
            for a, b in zip(ins.targets[::2], ins.targets[1::2]):
                push(code, a, b)
        elif name in MEASUREMENTS:
            code = {"MZ": _OP_MZ, "MX": _OP_MX, "MY": _OP_MY}[name]
            for q in ins.targets:
                push(code, q, nrec)
                nrec += 1
        elif name in RESETS:
            for q in ins.targets:
                push(_OP_RZ if name == "RZ" else _OP_RX, q)
        elif name == "DEPOLARIZE1":
            for q in ins.targets:
                push(_OP_DEP1, q, 0, ins.args[0])
        elif name == "DEPOLARIZE2":
            for a, b in zip(ins.targets[::2], ins.targets[1::2]):
                push(_OP_DEP2, a, b, ins.args[0])
        elif name == "X_ERROR":
            for q in ins.targets:
                push(_OP_XERR, q, 0, ins.args[0])
        elif name == "Z_ERROR":
            for q in ins.targets:
                push(_OP_ZERR, q, 0, ins.args[0])
        elif name == "FLIP_MEAS":
            for r in ins.rec:
                push(_OP_FLIP, nrec + r, 0, ins.args[0])
        elif name == "DETECTOR":
            det_masks.append([nrec + r for r in ins.rec])
        elif name == "OBSERVABLE_INCLUDE":
            for r in ins.rec:
                obs_masks[int(ins.args[0])].append(nrec + r)
        elif name in ("QUBIT_COORDS", "TICK"):
            pass
        else:
            raise ValueError(f"cannot compile {name}")
    op_arr = np.array(ops, dtype=np.int64).reshape(-1, 3) if ops else np.zeros((0, 3), dtype=np.int64)
    return op_arr, np.array(probs, dtype=np.float64), nrec, det_masks, obs_masks


_CHP_KERNEL = None


def _get_chp_kernel():
    global _CHP_KERNEL
    if _CHP_KERNEL is not None:
        return _CHP_KERNEL
    import numba

    @numba.njit(cache=True)
    def kernel(ops, probs, n, shots, seed, out):  # pragma: no cover - compiled
        np.random.seed(seed)
        for shot in range(shots):
            x = np.zeros((2 * n, n), dtype=np.uint8)
            z = np.zeros((2 * n, n), dtype=np.uint8)
            r = np.zeros(2 * n, dtype=np.uint8)
            for i in range(n):
                x[i, i] = 1
                z[n + i, i] = 1
            rec = out[shot]
            for k in range(ops.shape[0]):
                code = ops[k, 0]
                a = ops[k, 1]
                b = ops[k, 2]
                if code == _OP_H:
                    for i in range(2 * n):
                        r[i] ^= x[i, a] & z[i, a]
                        t = x[i, a]
                        x[i, a] = z[i, a]
                        z[i, a] = t
                elif code == _OP_S:
                    for i in range(2 * n):
                        r[i] ^= x[i, a] & z[i, a]
                        z[i, a] ^= x[i, a]
                elif code == _OP_SDG:
                    for i in range(2 * n):
                        r[i] ^= x[i, a]
                        r[i] ^= x[i, a] & z[i, a]
                        z[i, a] ^= x[i, a]
                elif code == _OP_X:
                    for i in range(2 * n):
                        r[i] ^= z[i, a]
                elif code == _OP_Y:
                    for i in range(2 * n):
                        r[i] ^= x[i, a] ^ z[i, a]
                elif code == _OP_Z:
                    for i in range(2 * n):
                        r[i] ^= x[i, a]
                elif code == _OP_CX:
                    for i in range(2 * n):
                        r[i] ^= x[i, a] & z[i, b] & (x[i, b] ^ z[i, a] ^ 1)
                        x[i, b] ^= x[i, a]
                        z[i, a] ^= z[i, b]
                elif code == _OP_CZ:
                    for i in range(2 * n):
                        # H(b); CX(a,b); H(b) fused
                        r[i] ^= x[i, b] & z[i, b]
                        t = x[i, b]
                        x[i, b] = z[i, b]
                        z[i, b] = t
                        r[i] ^= x[i, a] & z[i, b] & (x[i, b] ^ z[i, a] ^ 1)
                        x[i, b] ^= x[i, a]
                        z[i, a] ^= z[i, b]
                        r[i] ^= x[i, b] & z[i, b]
                        t = x[i, b]
                        x[i, b] = z[i, b]
                        z[i, b] = t
                elif code == _OP_SWAP:
                    for i in range(2 * n):
                        t = x[i, a]
                        x[i, a] = x[i, b]
                        x[i, b] = t
                        t = z[i, a]
                        z[i, a] = z[i, b]
                        z[i, b] = t
                elif code <= _OP_RX:  # MZ, MX, MY, RZ, RX share the collapse core
                    q = a
                    if code == _OP_MX or code == _OP_RX:
                        for i in range(2 * n):
                            r[i] ^= x[i, q] & z[i, q]
                            t = x[i, q]
                            x[i, q] = z[i, q]
                            z[i, q] = t
                    elif code == _OP_MY:
                        for i in range(2 * n):
                            r[i] ^= x[i, q]
                            r[i] ^= x[i, q] & z[i, q]
                            z[i, q] ^= x[i, q]
                            r[i] ^= x[i, q] & z[i, q]
                            t = x[i, q]
                            x[i, q] = z[i, q]
                            z[i, q] = t
                    piv = -1
                    for i in range(n, 2 * n):
                        if x[i, q] == 1:
                            piv = i
                            break
                    if piv >= 0:
                        for h in range(2 * n):
                            if h != piv and x[h, q] == 1:
                                tot = 2 * np.int64(r[h]) + 2 * np.int64(r[piv])
                                for j in range(n):
                                    x1 = np.int64(x[piv, j])
                                    z1 = np.int64(z[piv, j])
                                    x2 = np.int64(x[h, j])
                                    z2 = np.int64(z[h, j])
                                    if x1 == 1 and z1 == 1:
                                        tot += z2 - x2
                                    elif x1 == 1 and z1 == 0:
                                        tot += z2 * (2 * x2 - 1)
                                    elif x1 == 0 and z1 == 1:
                                        tot += x2 * (1 - 2 * z2)
                                    x[h, j] ^= x[piv, j]
                                    z[h, j] ^= z[piv, j]
                                r[h] = np.uint8((tot % 4) // 2)
                        for j in range(n):
                            x[piv - n, j] = x[piv, j]
                            z[piv - n, j] = z[piv, j]
                            x[piv, j] = 0
                            z[piv, j] = 0
                        r[piv - n] = r[piv]
                        z[piv, q] = 1
                        m = np.uint8(1) if np.random.random() < 0.5 else np.uint8(0)
                        r[piv] = m
                    else:
                        sx = np.zeros(n, dtype=np.uint8)
                        sz = np.zeros(n, dtype=np.uint8)
                        sr = np.int64(0)
                        for i in range(n):
                            if x[i, q] == 1:
                                tot = 2 * sr + 2 * np.int64(r[n + i])
                                for j in range(n):
                                    x1 = np.int64(x[n + i, j])
                                    z1 = np.int64(z[n + i, j])
                                    x2 = np.int64(sx[j])
                                    z2 = np.int64(sz[j])
                                    if x1 == 1 and z1 == 1:
                                        tot += z2 - x2
                                    elif x1 == 1 and z1 == 0:
                                        tot += z2 * (2 * x2 - 1)
                                    elif x1 == 0 and z1 == 1:
                                        tot += x2 * (1 - 2 * z2)
                                    sx[j] ^= x[n + i, j]
                                    sz[j] ^= z[n + i, j]
                                sr = (tot % 4) // 2
                        m = np.uint8(sr)
                    if code == _OP_RZ or code == _OP_RX:
                        if m == 1:
                            for i in range(2 * n):
                                r[i] ^= z[i, q]
                    if code == _OP_MX or code == _OP_RX:
                        for i in range(2 * n):
                            r[i] ^= x[i, q] & z[i, q]
                            t = x[i, q]
                            x[i, q] = z[i, q]
                            z[i, q] = t
                    elif code == _OP_MY:
                        for i in range(2 * n):
                            r[i] ^= x[i, q] & z[i, q]
                            t = x[i, q]
                            x[i, q] = z[i, q]
                            z[i, q] = t
                            r[i] ^= x[i, q] & z[i, q]
                            z[i, q] ^= x[i, q]
                    if code == _OP_MZ or code == _OP_MX or code == _OP_MY:
                        rec[b] = m
                elif code == _OP_DEP1:
                    if np.random.random() < probs[k]:
                        w = np.random.randint(1, 4)
                        if w == 1 or w == 3:
                            for i in range(2 * n):
                                r[i] ^= z[i, a]
                        if w == 2 or w == 3:
                            for i in range(2 * n):
                                r[i] ^= x[i, a]
                elif code == _OP_DEP2:
                    if np.random.random() < probs[k]:
                        w = np.random.randint(1, 16)
                        wa = w % 4
                        wb = w // 4
                        if wa == 1 or wa == 3:
                            for i in range(2 * n):
                                r[i] ^= z[i, a]
                        if wa == 2 or wa == 3:
                            for i in range(2 * n):
                                r[i] ^= x[i, a]
                        if wb == 1 or wb == 3:
                            for i in range(2 * n):
                                r[i] ^= z[i, b]
                        if wb == 2 or wb == 3:
                            for i in range(2 * n):
                                r[i] ^= x[i, b]
                elif code == _OP_XERR:
                    if np.random.random() < probs[k]:
                        for i in range(2 * n):
                            r[i] ^= z[i, a]
                elif code == _OP_ZERR:
                    if np.random.random() < probs[k]:
                        for i in range(2 * n):
                            r[i] ^= x[i, a]
                elif code == _OP_FLIP:
                    if np.random.random() < probs[k]:
                        rec[a] ^= 1

    _CHP_KERNEL = kernel
    return kernel


def tableau_mc(circuit: Circuit, shots: int, seed: int = 0) -> SampleBatch:
    """Tableau Monte Carlo: one exact stabilizer run per shot (compiled kernel).

    Returns detector events and observable flips relative to the same
    noiseless reference as `frame_sample`, so the two are directly comparable.
    """
    ops, probs, nrec, det_masks, obs_masks = _compile_ops(circuit)
    records = np.zeros((shots, nrec), dtype=np.uint8)
    kernel = _get_chp_kernel()
    kernel(ops, probs, circuit.num_qubits, shots, seed, records)
    ref = tableau_run(circuit, seed=0, with_noise=False)
    det = np.zeros((shots, len(det_masks)), dtype=bool)
    for d, mask in enumerate(det_masks):
        det[:, d] = (records[:, mask].sum(axis=1) % 2).astype(bool)
    det ^= ref.detectors[np.newaxis, :]
    obs = np.zeros((shots, len(obs_masks)), dtype=bool)
    for kk, mask in enumerate(obs_masks):
        if mask:
            obs[:, kk] = (records[:, mask].sum(axis=1) % 2).astype(bool)
    obs ^= ref.observables[np.newaxis, :]
    return SampleBatch(
        shots=shots,
        num_detectors=len(det_masks),
        num_observables=len(obs_masks),
        detectors=_pack_bools(det),
        observables=_pack_bools(obs),
    )


# ---------------------------------------------------------------------------
# determinism checking


@dataclass
class DeterminismReport:
    ok: bool
    bad_detectors: list[int]
    bad_observables: list[int]
    n_seeds: int
    engine: str

    def __bool__(self):
        return self.ok


def check_determinism(circuit: Circuit, seeds=1000, engine="auto") -> DeterminismReport:
    """Check that every detector parity and observable is seed-independent.

    engine="tableau" runs a full tableau pass per seed and compares detector
    and observable values pairwise.  engine="frame" runs the frame engine once
    with per-shot re-randomized measurement outcomes — one shot per seed —
    which samples exactly the same distribution (the collapse-operator
    injection makes the equivalence exact, not approximate).  "auto" uses the
    frame engine for the full seed count plus a small tableau cross-check.
    """
    n_seeds = seeds if isinstance(seeds, int) else len(seeds)
    seed_list = range(n_seeds) if isinstance(seeds, int) else list(seeds)
    bad_det: set[int] = set()
    bad_obs: set[int] = set()
    if engine in ("frame", "auto"):
        eng = _FrameEngine(circuit, n_seeds, seed=0)
        det, obs, _ = eng.run()
        bad_det |= set(np.flatnonzero(det.any(axis=1)).tolist())
        bad_obs |= set(np.flatnonzero(obs.any(axis=1)).tolist())
    if engine in ("tableau", "auto"):
        todo = list(seed_list) if engine == "tableau" else list(seed_list)[:3]
        base = None
        for s in todo:
            res = tableau_run(circuit, seed=s)
            if base is None:
                base = (res.detectors, res.observables)
            else:
                bad_det |= set(np.flatnonzero(base[0] ^ res.detectors).tolist())
                bad_obs |= set(np.flatnonzero(base[1] ^ res.observables).tolist())
    return DeterminismReport(
        ok=not bad_det and not bad_obs,
        bad_detectors=sorted(bad_det),
        bad_observables=sorted(bad_obs),
        n_seeds=n_seeds,
        engine=engine,
    )


# ---------------------------------------------------------------------------
# logical action of a Clifford segment


@dataclass
class CliffordMap:
    """Action of a segment on logical generators.

    `image_of_x[i]` / `image_of_z[i]` give, for each input logical generator,
    the GF(2) coefficient vector over (out logical X's + out logical Z's).
    `phases_x` / `phases_z` record the residual i-power of each image against
    the matching product of target generators (0 -> +1, 2 -> -1; odd values
    occur when the image is a Y-type combination).  Phases depend on the +1
    measurement-outcome gauge and are reported, not normalized.
    """

    k_in: int
    k_out: int
    image_of_x: np.ndarray  # bool [k_in, 2*k_out]
    image_of_z: np.ndarray
    phases_x: list[int]
    phases_z: list[int]

    def symplectic(self) -> np.ndarray:
        """Rows: images of X1..Xk then Z1..Zk over columns X'1..X'k, Z'1..Z'k."""
        return np.vstack([self.image_of_x, self.image_of_z]).astype(np.uint8)

    def is_identity(self) -> bool:
        if self.k_in != self.k_out:
            return False
        return np.array_equal(self.symplectic(), np.eye(2 * self.k_in, dtype=np.uint8))


class _StabilizerFlow:
    """Stabilizer group (no destabilizers) evolved through a Clifford+measurement segment."""

    def __init__(self, n: int, stabilizers: list[Pauli]):
        self.n = n
        self.rows: list[Pauli] = [s.copy() for s in stabilizers]

    def conj_gate(self, name, targets):
        for row in self.rows:
            row.conj_gate(name, targets)

    def measure(self, m: Pauli, riders: list[Pauli]):
        """Project onto m (outcome fixed to the +1 gauge); repair anticommuting riders."""
        anti = [i for i, row in enumerate(self.rows) if not row.commutes(m)]
        if anti:
            piv = anti[0]
            g = self.rows[piv]
            for i in anti[1:]:
                self.rows[i] = self.rows[i].mul(g)
            for r in riders:
                if not r.commutes(m):
                    rr = r.mul(g)
                    r.x, r.z, r.phase = rr.x, rr.z, rr.phase
            self.rows[piv] = m.copy()
        else:
            for r in riders:
                if not r.commutes(m):
                    raise ValueError(
                        "segment measures an operator anticommuting with a logical "
                        "while no gauge freedom remains (leaves the codespace)"
                    )
            if not self._in_span(m):
                self.rows.append(m.copy())

    def _in_span(self, p: Pauli) -> bool:
        rows = [_sympl_vec(r, self.n) for r in self.rows]
        return _gf2_solve(rows, _sympl_vec(p, self.n)) is not None

    def contains_group(self, gens: list[Pauli]) -> bool:
        rows = [_sympl_vec(r, self.n) for r in self.rows]
        return all(_gf2_solve(rows, _sympl_vec(g, self.n)) is not None for g in gens)


def _sympl_vec(p: Pauli, n: int) -> np.ndarray:
    v = np.zeros(2 * n, dtype=np.uint8)
    for i in range(n):
        if (p.x >> i) & 1:
            v[i] = 1
        if (p.z >> i) & 1:
            v[n + i] = 1
    return v


def _gf2_solve(rows: list[np.ndarray], target: np.ndarray):
    """Coefficients c with sum(c_i * rows_i) == target over GF(2), or None."""
    m = len(rows)
    if m == 0:
        return None if target.any() else np.zeros(0, dtype=bool)
    a = np.array(rows, dtype=np.uint8).T.copy()  # [dim, m]
    b = target.astype(np.uint8).copy()
    row = 0
    pivots: list[tuple[int, int]] = []
    for col in range(m):
        hit = np.flatnonzero(a[row:, col])
        if hit.size == 0:
            continue
        rr = row + int(hit[0])
        if rr != row:
            a[[row, rr]] = a[[rr, row]]
            b[[row, rr]] = b[[rr, row]]
        for other in np.flatnonzero(a[:, col]):
            if other != row:
                a[other] ^= a[row]
                b[other] ^= b[row]
        pivots.append((row, col))
        row += 1
        if row == a.shape[0]:
            break
    coeffs = np.zeros(m, dtype=bool)
    for r, c in pivots:
        coeffs[c] = bool(b[r])
    acc = np.zeros_like(target, dtype=np.uint8)
    arr = np.array(rows, dtype=np.uint8)
    for i in np.flatnonzero(coeffs):
        acc ^= arr[i]
    if not np.array_equal(acc, target.astype(np.uint8)):
        return None
    return coeffs


def logical_action(
    segment: Circuit, code_in: StabilizerCode, code_out: StabilizerCode
) -> CliffordMap:
    """Induced Clifford map on logical generators of a measurement-assisted segment.

    Measurement outcomes are fixed to the +1 gauge; phases of the images under
    other outcome conventions differ by stabilizer signs only.  Raises if the
    segment destroys a logical or fails to land in the target codespace.
    """
    n = max(segment.num_qubits, code_in.n, code_out.n)
    flow = _StabilizerFlow(n, code_in.stabilizers)
    riders = [p.copy() for p in code_in.logical_x] + [p.copy() for p in code_in.logical_z]
    for ins in segment.iter_flat():
        name = ins.name
        if name in GATES_1Q or name in GATES_2Q:
            flow.conj_gate(name, ins.targets)
            for r in riders:
                r.conj_gate(name, ins.targets)
        elif name in MEASUREMENTS or name in RESETS:
            b = _BASIS_OF[name]
            for q in ins.targets:
                flow.measure(Pauli.from_ops(n, {q: b}), riders)
        elif name in (
            "QUBIT_COORDS",
            "TICK",
            "DETECTOR",
            "OBSERVABLE_INCLUDE",
            "DEPOLARIZE1",
            "DEPOLARIZE2",
            "X_ERROR",
            "Z_ERROR",
            "FLIP_MEAS",
        ):
            pass  # verification is noiseless; annotations carry no state
        else:
            raise ValueError(f"cannot propagate through {name}")
    if not flow.contains_group(code_out.stabilizers):
        raise ValueError("segment output does not stabilize the target codespace")
    basis_paulis = list(code_out.stabilizers) + code_out.logical_x + code_out.logical_z
    basis_rows = [_sympl_vec(p, n) for p in basis_paulis]
    nstab = len(code_out.stabilizers)
    k_in = len(code_in.logical_x)
    k_out = len(code_out.logical_x)
    img_x = np.zeros((k_in, 2 * k_out), dtype=bool)
    img_z = np.zeros((k_in, 2 * k_out), dtype=bool)
    phases_x: list[int] = []
    phases_z: list[int] = []
    for i, rider in enumerate(riders):
        coeffs = _gf2_solve(basis_rows, _sympl_vec(rider, n))
        if coeffs is None:
            raise ValueError("propagated logical falls outside the target code's operator span")
        prod = Pauli(n)
        for j in np.flatnonzero(coeffs):
            prod = prod.mul(basis_paulis[j])
        phase = (rider.phase - prod.phase) % 4
        if i < k_in:
            img_x[i] = coeffs[nstab:]
            phases_x.append(phase)
        else:
            img_z[i - k_in] = coeffs[nstab:]
            phases_z.append(phase)
    return CliffordMap(k_in, k_out, img_x, img_z, phases_x, phases_z)
