"""Shared test fixtures: a pure-Python reference table used as a
differential oracle against the compiled kernels, plus grid constants.

The reference implementation mirrors the documented construction (splitmix64
finalizer over seed/key/counter, multiply-shift reduction, salted deletion
and key streams) in plain big-int arithmetic, written independently of the
numba code paths.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
DELETE_STREAM_SALT = 0xE7037ED1A0B428DB
KEY_STREAM_SALT = 0xA0761D6478BD642F

ALPHA_GRID = (0.1, 0.5, 0.9, 0.99, 0.999, 1 - 1e-6)

FCFS, LCFS, RH = 0, 1, 2


def mix64_py(z: int) -> int:
    z &= MASK64
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & MASK64
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & MASK64
    z ^= z >> 31
    return z


def probe_py(seed: int, key: int, j: int, m: int) -> int:
    z = mix64_py(seed ^ key ^ ((j * GOLDEN) & MASK64))
    return (z * m) >> 64


def make_key_py(key_salt: int, counter: int) -> int:
    return mix64_py((key_salt + counter * GOLDEN) & MASK64)


def key_salt_py(seed: int) -> int:
    return mix64_py((seed & MASK64) ^ KEY_STREAM_SALT)


DELETED = "DELETED"


class ReferenceTable:
    """Slow, obviously-correct model of the production table semantics."""

    def __init__(self, m: int, discipline: int, seed: int):
        self.m = m
        self.discipline = discipline
        self.seed = seed & MASK64
        self.slots = [None] * m  # None | DELETED | (key, age)
        self.live = []
        self.live_pos = {}
        self.n = 0
        self.rng = mix64_py(self.seed ^ DELETE_STREAM_SALT)
        self.rh_collisions = []  # (slot, winner_age, loser_age) per RH contest

    def insert(self, key: int):
        assert self.n < self.m
        carry_key, carry_age = key, 1
        final_age = None
        inspected = 0
        displaced = 0
        while True:
            s = probe_py(self.seed, carry_key, carry_age, self.m)
            inspected += 1
            assert inspected <= 64 * self.m, "livelock"
            slot = self.slots[s]
            if slot is None or slot is DELETED:
                self.slots[s] = (carry_key, carry_age)
                self.live_pos[s] = len(self.live)
                self.live.append(s)
                self.n += 1
                if carry_key == key:
                    final_age = carry_age
                return final_age, inspected, displaced
            other_key, other_age = slot
            if self.discipline == FCFS:
                carry_age += 1
            elif self.discipline == LCFS:
                self.slots[s] = (carry_key, carry_age)
                if carry_key == key:
                    final_age = carry_age
                carry_key, carry_age = other_key, other_age + 1
                displaced += 1
            else:  # RH
                if carry_age > other_age:
                    self.rh_collisions.append((s, carry_age, other_age))
                    self.slots[s] = (carry_key, carry_age)
                    if carry_key == key:
                        final_age = carry_age
                    carry_key, carry_age = other_key, other_age + 1
                    displaced += 1
                else:
                    self.rh_collisions.append((s, other_age, carry_age))
                    carry_age += 1

    def delete_random(self) -> int:
        assert self.n >= 1
        self.rng = (self.rng + GOLDEN) & MASK64
        r = mix64_py(self.rng)
        pos = (r * self.n) >> 64
        s = self.live[pos]
        key, _ = self.slots[s]
        self.slots[s] = DELETED
        last = self.live[-1]
        self.live[pos] = last
        self.live_pos[last] = pos
        self.live.pop()
        del self.live_pos[s]
        if last == s and pos < len(self.live):  # pragma: no cover - safety net
            raise AssertionError("registry corrupted")
        self.n -= 1
        return key

    def fill(self, count: int, key_counter: int = 0) -> int:
        salt = key_salt_py(self.seed)
        for _ in range(count):
            self.insert(make_key_py(salt, key_counter))
            key_counter += 1
        return key_counter

    def churn(self, cycles: int, key_counter: int) -> int:
        salt = key_salt_py(self.seed)
        for _ in range(cycles):
            self.insert(make_key_py(salt, key_counter))
            key_counter += 1
            self.delete_random()
        return key_counter

    def search_standard(self, key: int) -> int:
        j = 1
        while j <= 64 * self.m:
            s = probe_py(self.seed, key, j, self.m)
            slot = self.slots[s]
            if slot is None:
                raise KeyError(key)
            if slot is not DELETED and slot[0] == key:
                return j
            j += 1
        raise KeyError(key)

    def ages(self):
        return sorted(age for slot in self.slots if slot not in (None, DELETED) for _, age in [slot])

    def stored(self):
        """(state_code, key, age) triples in slot order, kernels' encoding."""
        out = []
        for slot in self.slots:
            if slot is None:
                out.append((0, 0, 0))
            elif slot is DELETED:
                out.append((1, None, None))  # stale key/age values unspecified
            else:
                out.append((2, slot[0], slot[1]))
        return out
