"""Open-addressing hash table with random probing and pluggable disciplines.

A ``Table`` stores opaque 64-bit keys in a fixed-size slot array.  Each key
owns an unbounded probe stream of i.i.d. slot indices (positions may repeat),
derived deterministically from (table seed, key, probe counter).  The probe
counter at which a key currently rests is its age, which equals its standard
successful-search cost.  Collisions during insertion are resolved by the
table's discipline; deletions mark slots rather than emptying them, and
marked slots are reusable by later insertions.

The table never hashes user data: it exists to study placement dynamics, so
keys are abstract identifiers supplied (or generated) by the caller.
"""

from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np

from rhlab import _kernels as k

__all__ = [
    "Discipline",
    "InsertionReceipt",
    "Table",
    "probe_index",
    "CapacityError",
    "LivelockError",
    "DuplicateKeyError",
    "EmptyTableError",
    "KeyNotFoundError",
]

_MASK64 = (1 << 64) - 1


class CapacityError(RuntimeError):
    """Insertion attempted on a full table."""


class LivelockError(RuntimeError):
    """An operation inspected more than 64*m slots; impossible under the
    probing model, so treated as a defect."""


class DuplicateKeyError(ValueError):
    """A key was inserted twice into a duplicate-checking table."""


class EmptyTableError(ValueError):
    """Deletion or measurement attempted on a table with no occupied slot."""


class KeyNotFoundError(KeyError):
    """Search failed: an empty slot ended the walk or a guard was exhausted."""


class Discipline(enum.IntEnum):
    """Collision resolution rule: who keeps a contested slot.

    FCFS keeps the incumbent, LCFS favors the incoming key, and RH (Robin
    Hood) favors whichever key is farthest from its home position, that is,
    the one with the larger age (ties keep the incumbent)."""

    FCFS = 0
    LCFS = 1
    RH = 2

    @classmethod
    def parse(cls, name: Union[str, "Discipline"]) -> "Discipline":
        if isinstance(name, Discipline):
            return name
        try:
            return cls[str(name).upper().replace("-", "_")]
        except KeyError:
            raise ValueError(f"unknown discipline {name!r}; expected fcfs, lcfs, or rh") from None


@dataclass(frozen=True)
class InsertionReceipt:
    """What an insertion did: the resting age of the inserted key, the total
    slots inspected across all carried tokens, and how many evictions the
    collision rule triggered."""

    final_age: int
    slots_inspected: int
    displacements: int


def _as_key(key: int) -> int:
    key = int(key)
    if not 0 <= key <= _MASK64:
        raise ValueError(f"keys are 64-bit identifiers; got {key!r}")
    return key


def probe_index(seed: int, key: int, j: int, m: int) -> int:
    """The j-th slot (j >= 1) on `key`'s probe stream in a table of size m."""
    if j < 1:
        raise ValueError("probe counters start at 1")
    if m < 1:
        raise ValueError("table size must be positive")
    return int(k.probe(np.uint64(seed & _MASK64), np.uint64(_as_key(key)), np.uint64(j), np.uint64(m)))


class Table:
    """Fixed-capacity open-addressing table. Single-writer; reads may be shared.

    ``check_duplicates=True`` adds a Python-side key registry that rejects
    duplicate insertion (the model forbids duplicates, so the check is a
    debugging aid, not a hot-path feature; bulk drivers skip it).
    """

    def __init__(
        self,
        m: int,
        discipline: Discipline = Discipline.RH,
        seed: int = 0,
        check_duplicates: bool = False,
    ):
        m = int(m)
        if m < 1:
            raise ValueError("table size must be at least 1")
        self.m = m
        self.discipline = Discipline.parse(discipline)
        self.seed = int(seed) & _MASK64
        self._state = np.zeros(m, dtype=np.uint8)
        self._key = np.zeros(m, dtype=np.uint64)
        self._age = np.zeros(m, dtype=np.int64)
        self._live = np.zeros(m, dtype=np.int64)
        self._live_pos = np.full(m, -1, dtype=np.int64)
        self._n = 0
        # mix64 called from Python boxes its result to a plain int; keep the
        # state as np.uint64 so kernel calls always type it unsigned.
        self._rng_state = np.uint64(k.mix64(np.uint64(self.seed) ^ k.DELETE_STREAM_SALT))
        self._seen: Optional[set] = set() if check_duplicates else None

    # -- bookkeeping views ---------------------------------------------------

    @property
    def n(self) -> int:
        """Number of occupied slots."""
        return self._n

    def __len__(self) -> int:
        return self._n

    @property
    def load_factor(self) -> float:
        return self._n / self.m

    @property
    def deleted_count(self) -> int:
        return int(np.count_nonzero(self._state == k.DELETED))

    def occupied_slots(self) -> np.ndarray:
        """Slot indices of all occupied slots (registry order)."""
        return self._live[: self._n].copy()

    def stored_keys(self) -> np.ndarray:
        """Keys currently stored, in registry order."""
        return self._key[self._live[: self._n]].copy()

    def ages(self) -> np.ndarray:
        """Stored ages of all occupied slots, in registry order."""
        return self._age[self._live[: self._n]].copy()

    def age_histogram(self) -> Dict[int, int]:
        """Counts of occupied slots by age; totals to n."""
        ages = self.ages()
        if not ages.size:
            return {}
        counts = np.bincount(ages)
        return {int(a): int(c) for a, c in enumerate(counts) if c}

    def slot(self, index: int):
        """(state, key, age) of one slot; key/age are None unless occupied."""
        st = int(self._state[index])
        if st != k.OCCUPIED:
            return ("empty" if st == k.EMPTY else "deleted", None, None)
        return ("occupied", int(self._key[index]), int(self._age[index]))

    # -- mutations -----------------------------------------------------------

    def insert(self, key: int) -> InsertionReceipt:
        """Place `key` per the table's discipline; returns the receipt.

        The caller must not insert a key that is already present (checked
        only when the table was built with ``check_duplicates``)."""
        key = _as_key(key)
        if self._n >= self.m:
            raise CapacityError(f"table of size {self.m} is full")
        if self._seen is not None:
            if key in self._seen:
                raise DuplicateKeyError(f"key {key} already inserted")
            self._seen.add(key)
        n, final_age, inspected, displaced, err = k.insert(
            self._state,
            self._key,
            self._age,
            self._live,
            self._live_pos,
            np.int64(self._n),
            np.int64(self.m),
            np.uint64(self.seed),
            np.int64(self.discipline),
            np.uint64(key),
        )
        if err == k.ERR_LIVELOCK:
            raise LivelockError(f"insertion inspected more than {64 * self.m} slots")
        self._n = int(n)
        return InsertionReceipt(int(final_age), int(inspected), int(displaced))

    def delete_random(self) -> int:
        """Mark a uniformly random occupied slot deleted; returns its key.

        Draws come from the table's own seeded stream, so the op sequence
        alone determines which key goes."""
        if self._n < 1:
            raise EmptyTableError("cannot delete from an empty table")
        n, rng_state, key = k.delete_random(
            self._state, self._key, self._live, self._live_pos, np.int64(self._n), self._rng_state
        )
        self._n = int(n)
        self._rng_state = np.uint64(rng_state)
        key = int(key)
        if self._seen is not None:
            self._seen.discard(key)
        return key

    # -- searches ------------------------------------------------------------

    def search_standard(self, key: int) -> int:
        """Probes to reach `key` walking its stream from age 1 (equals the
        stored age).  Deleted and mismatching slots are stepped over; an
        empty slot means the key is absent."""
        res = int(
            k.search_standard(
                self._state, self._key, np.uint64(self.seed), np.int64(self.m), np.uint64(_as_key(key))
            )
        )
        if res == -1:
            raise KeyNotFoundError(f"key {key} not found (empty slot on its probe path)")
        if res == -2:
            raise KeyNotFoundError(f"key {key} not found within {64 * self.m} probes")
        return res

    def search_mean_centered(self, key: int, center: float) -> int:
        """Slot inspections to reach `key` trying ages outward from `center`
        (candidate order j0, j0+1, j0-1, j0+2, ... with j0 = round(center),
        nonpositive ages skipped, ages capped at 64*m)."""
        center = float(center)
        if not center >= 1.0:
            raise ValueError("center must be at least 1")
        # a start beyond the age cap behaves exactly like starting just past
        # it (everything above the cap is skipped), so clamp to keep indices
        # in int64 range
        j0 = max(1, min(int(math.floor(center + 0.5)), 64 * self.m + 1))
        res = int(
            k.search_centered(
                self._state,
                self._key,
                np.uint64(self.seed),
                np.int64(self.m),
                np.uint64(_as_key(key)),
                np.int64(j0),
            )
        )
        if res == -2:
            raise KeyNotFoundError(f"key {key} not found within the {64 * self.m} age cap")
        return res

    # -- snapshot ------------------------------------------------------------

    def snapshot_csv(self, destination: Union[str, Path, io.TextIOBase]) -> None:
        """Dump all slots as CSV rows ``index,state,key,age`` with state one
        of E/D/O; key and age fields are left empty for E and D rows."""
        if isinstance(destination, (str, Path)):
            with open(destination, "w", encoding="utf-8", newline="\n") as fh:
                self._write_snapshot(fh)
        else:
            self._write_snapshot(destination)

    def _write_snapshot(self, fh) -> None:
        fh.write("index,state,key,age\n")
        letters = ("E", "D", "O")
        state = self._state
        keyv = self._key
        agev = self._age
        for i in range(self.m):
            st = state[i]
            if st == k.OCCUPIED:
                fh.write(f"{i},O,{keyv[i]},{agev[i]}\n")
            else:
                fh.write(f"{i},{letters[st]},,\n")

    # -- bulk drivers (used by the simulator) ---------------------------------

    def _bulk_fill(self, count: int, key_counter: int, key_salt: np.uint64) -> int:
        if self._n + count > self.m:
            raise CapacityError(f"cannot place {count} more keys in a table of size {self.m}")
        n, key_counter, err = k.fill(
            self._state,
            self._key,
            self._age,
            self._live,
            self._live_pos,
            np.int64(self._n),
            np.int64(self.m),
            np.uint64(self.seed),
            np.int64(self.discipline),
            np.int64(count),
            np.int64(key_counter),
            np.uint64(key_salt),
        )
        self._n = int(n)
        if err == k.ERR_LIVELOCK:
            raise LivelockError(f"insertion inspected more than {64 * self.m} slots")
        return int(key_counter)

    def _bulk_churn(self, cycles: int, key_counter: int, key_salt: np.uint64) -> int:
        if self._n < 1:
            raise EmptyTableError("churn needs at least one occupied slot")
        n, key_counter, rng_state, err = k.churn(
            self._state,
            self._key,
            self._age,
            self._live,
            self._live_pos,
            np.int64(self._n),
            np.int64(self.m),
            np.uint64(self.seed),
            np.int64(self.discipline),
            np.int64(cycles),
            np.int64(key_counter),
            np.uint64(key_salt),
            self._rng_state,
        )
        self._n = int(n)
        self._rng_state = np.uint64(rng_state)
        if err == k.ERR_LIVELOCK:
            raise LivelockError(f"insertion inspected more than {64 * self.m} slots")
        return int(key_counter)

    def _bulk_search_standard(self, keys: np.ndarray) -> np.ndarray:
        out = np.empty(keys.size, dtype=np.int64)
        k.search_standard_many(
            self._state, self._key, np.uint64(self.seed), np.int64(self.m), keys.astype(np.uint64), out
        )
        if np.any(out < 0):
            raise KeyNotFoundError("bulk standard search hit an absent key")
        return out

    def _bulk_search_centered(self, keys: np.ndarray, center: float) -> np.ndarray:
        j0 = max(1, int(math.floor(float(center) + 0.5)))
        out = np.empty(keys.size, dtype=np.int64)
        k.search_centered_many(
            self._state,
            self._key,
            np.uint64(self.seed),
            np.int64(self.m),
            keys.astype(np.uint64),
            np.int64(j0),
            out,
        )
        if np.any(out < 0):
            raise KeyNotFoundError("bulk centered search hit an absent key")
        return out
