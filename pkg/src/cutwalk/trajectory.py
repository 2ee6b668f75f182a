"""Realized paths and their on-disk formats.

Two containers are provided: :class:`ScalarTrajectory` for paths in
``[0, inf)`` and :class:`VectorTrajectory` for paths in ``R^d``.  Both are
immutable (their arrays are flagged read-only) and carry the seed and the
identifier of the spec that generated them.

Binary format (``.cutl``)::

    b"CUTL" | u16 version | u16 dimension | u64 count | count*dimension f64

all little-endian, coordinates row-major.  CSV uses the header ``n,x`` for
scalar paths and ``n,x1,...,xd`` for vector paths.
"""
from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"CUTL"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHHQ")


def _frozen(arr):
    arr = np.array(arr, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ScalarTrajectory:
    """A finite path ``X_0, ..., X_N`` of nonnegative reals.

    Parameters
    ----------
    positions : array_like of float
        The visited positions, in time order.  Must be nonempty and ``>= 0``.
    seed : int or None
        Seed of the run that produced the path (``None`` for ingested data).
    spec_id : str
        Identifier of the generating spec.
    jump_bound : float or None
        If given, ``|X_{n+1} - X_n| <= jump_bound`` is enforced.
    """

    positions: np.ndarray
    seed: int | None = None
    spec_id: str = "external"
    jump_bound: float | None = None
    lattice: bool = False

    def __post_init__(self):
        pos = _frozen(np.ravel(self.positions))
        if pos.size == 0:
            raise ValueError("a trajectory needs at least one position")
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions must be finite")
        if np.any(pos < 0):
            raise ValueError("scalar positions must be nonnegative")
        if self.jump_bound is not None and pos.size > 1:
            big = np.max(np.abs(np.diff(pos)))
            if big > self.jump_bound * (1 + 1e-12):
                raise ValueError(
                    f"increment {big} exceeds declared jump bound {self.jump_bound}")
        object.__setattr__(self, "positions", pos)

    @property
    def dimension(self):
        return 1

    @property
    def horizon(self):
        """N, the index of the last position."""
        return self.positions.size - 1

    def __len__(self):
        return self.positions.size

    @property
    def increments(self):
        return np.diff(self.positions)

    @property
    def lattice_positions(self):
        """Integer coordinates for lattice specs (exact equality tests)."""
        if not self.lattice:
            raise AttributeError("trajectory was not generated on a lattice")
        return np.rint(self.positions).astype(np.int64)

    def __eq__(self, other):
        if not isinstance(other, ScalarTrajectory):
            return NotImplemented
        return (self.seed == other.seed and self.spec_id == other.spec_id
                and np.array_equal(self.positions, other.positions))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class VectorTrajectory:
    """A finite path ``xi_0, ..., xi_N`` in ``R^d`` (``d >= 2``).

    ``positions`` has shape ``(N + 1, d)``.
    """

    positions: np.ndarray
    seed: int | None = None
    spec_id: str = "external"
    jump_bound: float | None = None
    lattice: bool = False

    def __post_init__(self):
        pos = np.array(self.positions, dtype=np.float64, copy=True)
        if pos.ndim != 2 or pos.shape[0] == 0:
            raise ValueError("vector positions must have shape (N+1, d) with N+1 >= 1")
        if pos.shape[1] < 2:
            raise ValueError("vector trajectories need dimension d >= 2")
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions must be finite")
        if self.jump_bound is not None and pos.shape[0] > 1:
            big = np.max(np.linalg.norm(np.diff(pos, axis=0), axis=1))
            if big > self.jump_bound * (1 + 1e-12):
                raise ValueError(
                    f"increment norm {big} exceeds declared jump bound {self.jump_bound}")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @property
    def dimension(self):
        return self.positions.shape[1]

    @property
    def horizon(self):
        return self.positions.shape[0] - 1

    def __len__(self):
        return self.positions.shape[0]

    @property
    def increments(self):
        return np.diff(self.positions, axis=0)

    def norms(self):
        """The radial process ``||xi_n||`` as a :class:`ScalarTrajectory`."""
        return ScalarTrajectory(np.linalg.norm(self.positions, axis=1),
                                seed=self.seed, spec_id=f"norm({self.spec_id})",
                                jump_bound=self.jump_bound)

    def __eq__(self, other):
        if not isinstance(other, VectorTrajectory):
            return NotImplemented
        return (self.seed == other.seed and self.spec_id == other.spec_id
                and np.array_equal(self.positions, other.positions))

    __hash__ = None


def as_trajectory(obj):
    """Coerce arrays to trajectories: 1-D → scalar, 2-D with d ≥ 2 → vector."""
    if isinstance(obj, (ScalarTrajectory, VectorTrajectory)):
        return obj
    arr = np.asarray(obj, dtype=np.float64)
    if arr.ndim == 1:
        return ScalarTrajectory(arr)
    if arr.ndim == 2 and arr.shape[1] == 1:
        return ScalarTrajectory(arr[:, 0])
    if arr.ndim == 2:
        return VectorTrajectory(arr)
    raise ValueError(f"cannot interpret array of shape {arr.shape} as a trajectory")


def _coords(traj):
    return traj.positions.reshape(len(traj), traj.dimension)


def _from_coords(coords, seed=None, spec_id="external"):
    if coords.shape[1] == 1:
        return ScalarTrajectory(coords[:, 0], seed=seed, spec_id=spec_id)
    return VectorTrajectory(coords, seed=seed, spec_id=spec_id)


def write_cutl(traj, path):
    """Write ``traj`` in the binary ``CUTL`` format."""
    coords = np.ascontiguousarray(_coords(traj), dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, coords.shape[1], coords.shape[0]))
        fh.write(coords.tobytes())


def read_cutl(path):
    """Read a ``CUTL`` file written by :func:`write_cutl`."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise ValueError("file too short for a CUTL header")
        magic, version, dim, count = _HEADER.unpack(head)
        if magic != MAGIC:
            raise ValueError(f"bad magic {magic!r}; not a CUTL file")
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported CUTL version {version}")
        if dim < 1:
            raise ValueError("CUTL dimension must be >= 1")
        payload = fh.read()
    need = 8 * dim * count
    if len(payload) != need:
        raise ValueError(f"CUTL payload has {len(payload)} bytes, expected {need}")
    coords = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(count, dim)
    return _from_coords(coords)


def format_float(v):
    """Shortest round-trip text for a float; integral values print without '.0'."""
    v = float(v)
    if v.is_integer() and abs(v) < 2**53:
        return str(int(v))
    return repr(v)


def trajectory_to_csv(traj):
    """Render ``traj`` as CSV text."""
    coords = _coords(traj)
    d = coords.shape[1]
    header = ["n", "x"] if d == 1 else ["n"] + [f"x{i + 1}" for i in range(d)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for n, row in enumerate(coords):
        w.writerow([n] + [format_float(v) for v in row])
    return buf.getvalue()


def write_csv(traj, path):
    Path(path).write_text(trajectory_to_csv(traj))


def read_csv(path):
    """Read a trajectory CSV with header ``n,x`` or ``n,x1,...,xd``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError("empty CSV file")
    header = [h.strip() for h in rows[0]]
    if header[:1] != ["n"] or len(header) < 2:
        raise ValueError(f"unexpected CSV header {header}")
    if len(header) == 2 and header[1] != "x":
        raise ValueError(f"unexpected CSV header {header}")
    if len(header) > 2 and header[1:] != [f"x{i + 1}" for i in range(len(header) - 1)]:
        raise ValueError(f"unexpected CSV header {header}")
    body = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=np.float64)
    if body.size == 0:
        raise ValueError("CSV contains no positions")
    order = body[:, 0]
    if not np.array_equal(order, np.arange(body.shape[0])):
        raise ValueError("column n must enumerate 0..N in order")
    return _from_coords(body[:, 1:])


def load_trajectory(path):
    """Load ``.cutl`` or ``.csv`` by extension (binary magic is also sniffed)."""
    p = Path(path)
    with open(p, "rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        return read_cutl(p)
    return read_csv(p)


def save_trajectory(traj, path):
    p = Path(path)
    if p.suffix.lower() == ".csv":
        write_csv(traj, p)
    else:
        write_cutl(traj, p)
