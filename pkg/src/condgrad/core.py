"""Shared data model for the conditional-gradient solver family.

Atoms are extreme points of a feasible region, active sets hold the
current convex combination together with a cached ambient iterate, and
traces record one entry per solver step for later analysis, invariant
checking, and CSV export.

Atom payloads are immutable after construction and safe to share between
concurrent runs; an ActiveSet or RunTrace belongs to exactly one run.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

# Weights below this floor are considered phantom mass and removed.
WEIGHT_FLOOR = 1e-14
# A pairwise step with lambda >= lambda_max - DROP_TOLERANCE is a drop step.
DROP_TOLERANCE = 1e-14
# The cached iterate is recomputed from the convex combination this often.
REANCHOR_PERIOD = 100

CSV_COLUMNS = (
    "iteration",
    "elapsed_ns",
    "step_kind",
    "lambda",
    "primal",
    "fw_gap",
    "pairwise_gap",
    "phi",
    "support_size",
    "lmo_calls_cumulative",
)


class ContractViolation(ValueError):
    """A caller broke a documented precondition."""


class ConfigurationError(ValueError):
    """A run or component was configured inconsistently."""


def inner(a, b) -> float:
    """Euclidean inner product between two arrays of the same shape."""
    return float(np.dot(np.ravel(a), np.ravel(b)))


class Atom:
    """One extreme point of a feasible region.

    Payload conventions, by ``kind``:

    - ``"vector"``: a dense point (simplex vertex, lp-ball boundary point).
    - ``"permutation"``: sigma as an integer array; the ambient form is the
      permutation matrix ``P[i, sigma[i]] = 1``.
    - ``"psd_factor"``: a unit vector ``u`` standing for the rank-one
      matrix ``u u^T`` on the trace-one PSD set.
    - ``"point"``: a domain point, used as a Dirac location in herding.

    Two atoms compare equal iff their kinds match and their payloads are
    element-exact equal; there is no geometric tolerance.
    """

    __slots__ = ("kind", "payload", "_ambient", "_key", "_id")

    def __init__(self, payload, kind: str = "vector"):
        payload = np.array(payload, copy=True)
        if payload.size == 0:
            raise ContractViolation("atom payload must be non-empty")
        if not np.all(np.isfinite(payload)):
            raise ContractViolation("atom payload must be finite")
        if kind == "psd_factor":
            nrm = float(np.linalg.norm(payload))
            if abs(nrm - 1.0) > 1e-12:
                raise ContractViolation(
                    f"psd_factor payload must have unit norm, got {nrm!r}"
                )
        payload.setflags(write=False)
        self.kind = kind
        self.payload = payload
        self._ambient = None
        self._key = None
        self._id = None

    @property
    def key(self):
        """Exact dedup identity: kind, dtype, shape and raw payload bytes."""
        if self._key is None:
            self._key = (
                self.kind,
                self.payload.dtype.str,
                self.payload.shape,
                self.payload.tobytes(),
            )
        return self._key

    @property
    def id(self) -> str:
        """Opaque stable identifier derived from the payload."""
        if self._id is None:
            h = hashlib.blake2b(digest_size=8)
            h.update(repr(self.key[:3]).encode())
            h.update(self.key[3])
            self._id = h.hexdigest()
        return self._id

    def ambient(self) -> np.ndarray:
        """Ambient-space representation used in inner products and updates."""
        if self._ambient is None:
            if self.kind == "permutation":
                n = self.payload.shape[0]
                mat = np.zeros((n, n))
                mat[np.arange(n), self.payload] = 1.0
            elif self.kind == "psd_factor":
                mat = np.outer(self.payload, self.payload)
            else:
                mat = self.payload.astype(float, copy=True)
            mat.setflags(write=False)
            self._ambient = mat
        return self._ambient

    def __eq__(self, other):
        if not isinstance(other, Atom):
            return NotImplemented
        return self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __repr__(self):
        return f"Atom(kind={self.kind!r}, id={self.id})"


class StepKind(str, Enum):
    FW = "fw"
    DESCENT = "descent"
    DROP = "drop"
    GAP = "gap"


@dataclass
class StepRecord:
    """One solver step.

    ``pairwise_gap`` is the away/local-FW gap over the active set where the
    solver computes one (for the global-pairwise baseline it is the gap
    along the actual pairwise direction); ``fw_gap`` is the global
    Frank-Wolfe gap and is absent on lazy iterations that skip the LMO.
    ``primal`` and ``support_size`` describe the post-step iterate.

    ``dir_gap``, ``dir_norm_sq`` and ``away_global_gap`` are diagnostic
    fields used by the trace invariant checks; they are not serialized.
    """

    kind: StepKind
    lam: float
    lam_max: float
    primal: float
    support_size: int
    lmo_called: bool
    pairwise_gap: Optional[float] = None
    fw_gap: Optional[float] = None
    phi: Optional[float] = None
    dir_gap: Optional[float] = None
    dir_norm_sq: Optional[float] = None
    away_global_gap: Optional[float] = None


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, StepKind):
        return value.value
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


@dataclass
class RunTrace:
    """Per-iteration records of one solver run plus step-type counters.

    ``wall_times`` holds the cumulative monotonic-clock nanoseconds at the
    end of each recorded iteration.
    """

    primal_start: float = float("nan")
    phi_start: Optional[float] = None
    records: list = field(default_factory=list)
    wall_times: list = field(default_factory=list)
    t_fw: int = 0
    t_desc: int = 0
    t_drop: int = 0
    t_gap: int = 0
    lmo_calls: int = 0
    max_incremental_drift: float = 0.0
    meta: dict = field(default_factory=dict)
    _lmo_cumulative: list = field(default_factory=list)

    def add(self, record: StepRecord, elapsed_ns: int) -> None:
        self.records.append(record)
        self.wall_times.append(int(elapsed_ns))
        self._lmo_cumulative.append(self.lmo_calls)
        if record.kind is StepKind.FW:
            self.t_fw += 1
        elif record.kind is StepKind.DESCENT:
            self.t_desc += 1
        elif record.kind is StepKind.DROP:
            self.t_drop += 1
        elif record.kind is StepKind.GAP:
            self.t_gap += 1
        else:  # pragma: no cover
            raise ContractViolation(f"unknown step kind {record.kind!r}")

    def __len__(self):
        return len(self.records)

    @property
    def primals(self) -> np.ndarray:
        return np.array([r.primal for r in self.records])

    def drop_leq_fw_at_every_prefix(self) -> bool:
        drops = fws = 0
        for rec in self.records:
            if rec.kind is StepKind.DROP:
                drops += 1
            elif rec.kind is StepKind.FW:
                fws += 1
            if drops > fws:
                return False
        return True

    def to_csv(self, path, include_timing: bool = True) -> None:
        """Write the trace in the standard schema; absent values are empty.

        With ``include_timing=False`` the elapsed_ns column is left blank,
        which makes re-runs of a seeded experiment byte-identical.
        """
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for i, rec in enumerate(self.records):
                writer.writerow(
                    [
                        str(i),
                        str(self.wall_times[i]) if include_timing else "",
                        rec.kind.value,
                        _fmt(rec.lam),
                        _fmt(rec.primal),
                        _fmt(rec.fw_gap),
                        _fmt(rec.pairwise_gap),
                        _fmt(rec.phi),
                        str(rec.support_size),
                        str(self._lmo_cumulative[i]),
                    ]
                )


def load_trace_rows(path) -> list[dict]:
    """Read a trace CSV back as a list of per-row dicts (None for blanks)."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_COLUMNS:
            raise ContractViolation(f"unexpected trace columns in {path}")
        for raw in reader:
            row = {}
            for col in CSV_COLUMNS:
                val = raw[col]
                if val == "":
                    row[col] = None
                elif col == "step_kind":
                    row[col] = val
                elif col in ("iteration", "support_size", "lmo_calls_cumulative", "elapsed_ns"):
                    row[col] = int(val)
                else:
                    row[col] = float(val)
            rows.append(row)
    return rows


class ActiveSet:
    """Atoms with strictly positive weights summing to one.

    Maintains the cached ambient iterate ``x = sum_i c_i v_i`` alongside
    the combination, re-anchoring it from the explicit sum periodically to
    bound floating-point drift.
    """

    def __init__(self, atoms, weights, iterate: Optional[np.ndarray] = None):
        atoms = list(atoms)
        weights = [float(w) for w in weights]
        if len(atoms) != len(weights):
            raise ContractViolation("atoms and weights must have equal length")
        if not atoms:
            raise ContractViolation("active set must be non-empty")
        if any(w <= 0.0 for w in weights):
            raise ContractViolation("active-set weights must be strictly positive")
        if abs(sum(weights) - 1.0) > 1e-12:
            raise ContractViolation("active-set weights must sum to one")
        self.atoms = atoms
        self.weights = weights
        self._index = {atom.key: i for i, atom in enumerate(atoms)}
        if len(self._index) != len(atoms):
            raise ContractViolation("active-set atoms must be pairwise distinct")
        self._rows = None  # (capacity, ambient size) score matrix buffer
        self._ops_since_anchor = 0
        if iterate is None:
            iterate = self._combination()
        else:
            iterate = np.array(iterate, dtype=float)
            err = np.max(np.abs(iterate - self._combination()))
            if err > 1e-9:
                raise ContractViolation(
                    f"cached iterate inconsistent with combination (inf-norm {err:.2e})"
                )
        self.iterate = iterate

    @classmethod
    def singleton(cls, atom: Atom) -> "ActiveSet":
        return cls([atom], [1.0])

    def __len__(self):
        return len(self.atoms)

    def __contains__(self, atom: Atom):
        return atom.key in self._index

    def index_of(self, atom: Atom) -> int:
        try:
            return self._index[atom.key]
        except KeyError:
            raise ContractViolation("atom is not in the active set") from None

    def weight_of(self, atom: Atom) -> float:
        return self.weights[self.index_of(atom)]

    def _combination(self) -> np.ndarray:
        out = self.weights[0] * self.atoms[0].ambient()
        for atom, w in zip(self.atoms[1:], self.weights[1:]):
            out = out + w * atom.ambient()
        return out

    def _rows_rebuild(self):
        dim = self.atoms[0].ambient().size
        cap = max(8, 2 * len(self.atoms))
        self._rows = np.empty((cap, dim))
        for i, atom in enumerate(self.atoms):
            self._rows[i] = atom.ambient().ravel()

    def _row_append(self, atom: Atom):
        if self._rows is None:
            self._rows_rebuild()
            return
        n = len(self.atoms)
        if n > self._rows.shape[0]:
            grown = np.empty((2 * n, self._rows.shape[1]))
            grown[: n - 1] = self._rows[: n - 1]
            self._rows = grown
        self._rows[n - 1] = atom.ambient().ravel()

    def _rows_remove(self, idx: int):
        if self._rows is None:
            return
        n = len(self.atoms) + 1  # length before the removal
        self._rows[idx : n - 1] = self._rows[idx + 1 : n]

    def _rows_select(self, keep):
        if self._rows is None:
            return
        m = len(keep)
        self._rows[:m] = self._rows[keep]

    def _reindex(self):
        self._index = {atom.key: i for i, atom in enumerate(self.atoms)}

    def scores(self, grad) -> np.ndarray:
        """Inner products of ``grad`` with every active atom, in order."""
        if self._rows is None:
            self._rows_rebuild()
        return self._rows[: len(self.atoms)] @ np.ravel(grad)

    def away_and_local_fw(self, grad):
        """Away vertex, local FW vertex and their gap for a gradient.

        Ties are broken toward the lowest insertion index.  Returns
        ``(away_atom, local_atom, pairwise_gap)``.
        """
        if not np.all(np.isfinite(np.ravel(grad))):
            raise ContractViolation("gradient must be finite")
        s = self.scores(grad)
        away_i = int(np.argmax(s))
        local_i = int(np.argmin(s))
        return self.atoms[away_i], self.atoms[local_i], float(s[away_i] - s[local_i])

    def consistency_error(self) -> float:
        """Inf-norm distance between the cached iterate and the combination."""
        return float(np.max(np.abs(self.iterate - self._combination())))

    def _bump(self):
        self._ops_since_anchor += 1
        if self._ops_since_anchor >= REANCHOR_PERIOD:
            self.iterate = self._combination()
            self._ops_since_anchor = 0

    def _cleanup(self):
        if all(w >= WEIGHT_FLOOR for w in self.weights):
            return
        keep = [i for i, w in enumerate(self.weights) if w >= WEIGHT_FLOOR]
        if not keep:
            raise ContractViolation("cleanup removed every atom")
        self.atoms = [self.atoms[i] for i in keep]
        kept = [self.weights[i] for i in keep]
        total = sum(kept)
        self.weights = [w / total for w in kept]
        self._rows_select(keep)
        self._reindex()

    def apply_pairwise(self, away: Atom, target: Atom, lam: float) -> StepKind:
        """Move weight ``lam`` from the away atom onto ``target``.

        Returns DROP when the away weight is exhausted (the atom is then
        removed), DESCENT otherwise.  ``target`` is inserted if it is not
        already active, which only happens for the global-pairwise
        baseline; the blended solver always passes the local FW atom.
        """
        away_i = self.index_of(away)
        lam = float(lam)
        lam_max = self.weights[away_i]
        if lam < 0.0 or lam > lam_max + 1e-12:
            raise ContractViolation(
                f"pairwise step size {lam!r} outside [0, {lam_max!r}]"
            )
        if away.key == target.key:
            # Zero direction; nothing moves.
            return StepKind.DESCENT
        drop = lam >= lam_max - DROP_TOLERANCE
        if lam > 0.0:
            self.iterate = self.iterate - lam * (away.ambient() - target.ambient())
            moved = lam_max if drop else lam
            target_i = self._index.get(target.key)
            if target_i is None:
                self.atoms.append(target)
                self.weights.append(moved)
                self._row_append(target)
                self._index[target.key] = len(self.atoms) - 1
            else:
                self.weights[target_i] += moved
            if drop:
                del self.atoms[away_i]
                del self.weights[away_i]
                self._rows_remove(away_i)
                self._reindex()
            else:
                self.weights[away_i] = lam_max - lam
            self._bump()
        elif drop:
            # lam == 0 with lam_max at the floor: still a weight transfer.
            drop = False
        return StepKind.DROP if drop else StepKind.DESCENT

    def apply_fw(self, w: Atom, lam: float) -> None:
        """Blend toward atom ``w``: scale all weights by (1-lam), add lam on w."""
        lam = float(lam)
        if lam < 0.0 or lam > 1.0:
            raise ContractViolation(f"FW step size {lam!r} outside [0, 1]")
        if lam == 1.0:
            self.atoms = [w]
            self.weights = [1.0]
            self.iterate = w.ambient().astype(float, copy=True)
            self._rows = None
            self._reindex()
            self._ops_since_anchor = 0
            return
        if lam == 0.0:
            return
        self.iterate = (1.0 - lam) * self.iterate + lam * w.ambient()
        self.weights = [(1.0 - lam) * c for c in self.weights]
        w_i = self._index.get(w.key)
        if w_i is None:
            self.atoms.append(w)
            self.weights.append(lam)
            self._row_append(w)
            self._index[w.key] = len(self.atoms) - 1
        else:
            self.weights[w_i] += lam
        self._cleanup()
        self._bump()

    def apply_away(self, away: Atom, lam: float, lam_max: float) -> StepKind:
        """Away step for the away-step baseline: move from ``away`` past x."""
        away_i = self.index_of(away)
        lam = float(lam)
        if lam < 0.0 or lam > lam_max + 1e-12:
            raise ContractViolation(
                f"away step size {lam!r} outside [0, {lam_max!r}]"
            )
        if lam == 0.0:
            return StepKind.DESCENT
        self.iterate = self.iterate - lam * (away.ambient() - self.iterate)
        drop = lam >= lam_max - DROP_TOLERANCE
        if drop and len(self.atoms) == 1:
            raise ContractViolation("cannot drop the only active atom")
        self.weights = [(1.0 + lam) * c for c in self.weights]
        if drop:
            del self.atoms[away_i]
            del self.weights[away_i]
            total = sum(self.weights)
            self.weights = [c / total for c in self.weights]
            self._rows_remove(away_i)
            self._reindex()
        else:
            self.weights[away_i] -= lam
        self._cleanup()
        self._bump()
        return StepKind.DROP if drop else StepKind.DESCENT


def away_and_local_fw(active_set: ActiveSet, grad):
    """Functional form of :meth:`ActiveSet.away_and_local_fw`."""
    return active_set.away_and_local_fw(grad)


def apply_pairwise(active_set: ActiveSet, away: Atom, local_fw: Atom, lam: float):
    """Functional form of :meth:`ActiveSet.apply_pairwise`."""
    return active_set.apply_pairwise(away, local_fw, lam)


def apply_fw(active_set: ActiveSet, w: Atom, lam: float) -> ActiveSet:
    """Functional form of :meth:`ActiveSet.apply_fw`; returns the set."""
    active_set.apply_fw(w, lam)
    return active_set
