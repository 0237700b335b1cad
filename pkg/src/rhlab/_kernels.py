"""Compiled hot paths for the hash table: probing, insertion, churn, search.

Everything here works on the raw slot arrays owned by ``rhlab.hashtable.Table``
so that bulk experiments (millions of operations) run at native speed.  The
single-operation kernels are the same code the bulk loops call, which keeps
the Python-level API and the bulk drivers bit-for-bit consistent.

Slot state codes: 0 = empty, 1 = deleted (marker), 2 = occupied.

The probe stream is a keyed counter construction: seed, key, and the probe
counter are folded together and pushed through a 64-bit avalanche mixer
(the splitmix64 finalizer), then reduced to [0, m) by multiply-shift.
Draws for random deletions and fresh-key generation reuse the same mixer on
their own salted streams.
"""

import numpy as np
from numba import njit

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX_A = np.uint64(0xBF58476D1CE4E5B9)
_MIX_B = np.uint64(0x94D049BB133111EB)
_U27 = np.uint64(27)
_U30 = np.uint64(30)
_U31 = np.uint64(31)
_U32 = np.uint64(32)
_LO32 = np.uint64(0xFFFFFFFF)

# Stream salts keep probe positions, deletion draws, and key generation
# statistically independent for a shared table seed.
DELETE_STREAM_SALT = np.uint64(0xE7037ED1A0B428DB)
KEY_STREAM_SALT = np.uint64(0xA0761D6478BD642F)

EMPTY = 0
DELETED = 1
OCCUPIED = 2

ERR_LIVELOCK = 1


@njit(cache=True, nogil=True, inline="always")
def mix64(z):
    """splitmix64 finalizer: full-avalanche bijection on 64-bit words."""
    z ^= z >> _U30
    z *= _MIX_A
    z ^= z >> _U27
    z *= _MIX_B
    z ^= z >> _U31
    return z


@njit(cache=True, nogil=True, inline="always")
def _mulhi64(a, b):
    """High 64 bits of the 128-bit product a*b (multiply-shift reduction)."""
    alo = a & _LO32
    ahi = a >> _U32
    blo = b & _LO32
    bhi = b >> _U32
    ll = alo * blo
    hl = ahi * blo
    lh = alo * bhi
    hh = ahi * bhi
    cross = (ll >> _U32) + (hl & _LO32) + lh
    return hh + (hl >> _U32) + (cross >> _U32)


@njit(cache=True, nogil=True, inline="always")
def probe(seed, key, j, m):
    """Slot index in [0, m) of the j-th probe of `key` under `seed`."""
    z = mix64(seed ^ key ^ (j * GOLDEN))
    return np.int64(_mulhi64(z, m))


@njit(cache=True, nogil=True)
def probe_grid(seed, num_keys, num_probes, m, out):
    """Probe indices for keys 0..num_keys-1, probe counters 1..num_probes."""
    t = 0
    for key in range(num_keys):
        for j in range(1, num_probes + 1):
            out[t] = probe(seed, np.uint64(key), np.uint64(j), np.uint64(m))
            t += 1


@njit(cache=True, nogil=True, inline="always")
def make_key(key_salt, counter):
    """Fresh synthetic key from a monotone counter (bijective, duplicate-free)."""
    return mix64(key_salt + np.uint64(counter) * GOLDEN)


@njit(cache=True, nogil=True)
def insert(state, keyv, agev, live, live_pos, n, m, seed, disc, new_key):
    """Insert `new_key`, resolving collisions per discipline code `disc`
    (0 = FCFS, 1 = LCFS, 2 = RH; RH ties keep the incumbent).

    Any carried token (incoming or evicted) settles at the first slot on its
    own probe stream that is not occupied, whether empty or deleted.

    Returns (n, final_age, slots_inspected, displacements, err); err is
    ERR_LIVELOCK when more than 64*m slots were inspected.
    """
    guard = 64 * m
    carry_key = new_key
    carry_age = np.int64(1)
    final_age = np.int64(0)
    inspected = np.int64(0)
    displaced = np.int64(0)
    while True:
        s = probe(seed, carry_key, np.uint64(carry_age), np.uint64(m))
        inspected += 1
        if inspected > guard:
            return n, np.int64(0), inspected, displaced, np.int64(ERR_LIVELOCK)
        if state[s] != OCCUPIED:
            state[s] = OCCUPIED
            keyv[s] = carry_key
            agev[s] = carry_age
            live[n] = s
            live_pos[s] = n
            n += 1
            if carry_key == new_key:
                final_age = carry_age
            return n, final_age, inspected, displaced, np.int64(0)
        if disc == 0:  # FCFS: incumbent keeps the slot, token probes on
            carry_age += 1
        elif disc == 1:  # LCFS: incoming takes the slot, incumbent is evicted
            evicted_key = keyv[s]
            evicted_age = agev[s]
            keyv[s] = carry_key
            agev[s] = carry_age
            if carry_key == new_key:
                final_age = carry_age
            carry_key = evicted_key
            carry_age = evicted_age + 1
            displaced += 1
        else:  # RH: the smaller age moves on
            if carry_age > agev[s]:
                evicted_key = keyv[s]
                evicted_age = agev[s]
                keyv[s] = carry_key
                agev[s] = carry_age
                if carry_key == new_key:
                    final_age = carry_age
                carry_key = evicted_key
                carry_age = evicted_age + 1
                displaced += 1
            else:
                carry_age += 1


@njit(cache=True, nogil=True, inline="always")
def _rand_step(rng_state):
    rng_state += GOLDEN
    return rng_state, mix64(rng_state)


@njit(cache=True, nogil=True)
def delete_random(state, keyv, live, live_pos, n, rng_state):
    """Mark a uniformly random occupied slot deleted.  Caller ensures n >= 1.

    Returns (n, rng_state, deleted_key)."""
    rng_state, r = _rand_step(rng_state)
    pos = np.int64(_mulhi64(r, np.uint64(n)))
    s = live[pos]
    state[s] = DELETED
    last = live[n - 1]
    live[pos] = last
    live_pos[last] = pos
    live_pos[s] = -1
    n -= 1
    return n, rng_state, keyv[s]


@njit(cache=True, nogil=True)
def fill(state, keyv, agev, live, live_pos, n, m, seed, disc, count, key_counter, key_salt):
    """Insert `count` generated keys.  Returns (n, key_counter, err)."""
    for _ in range(count):
        k = make_key(key_salt, key_counter)
        key_counter += 1
        n, _, _, _, err = insert(state, keyv, agev, live, live_pos, n, m, seed, disc, k)
        if err != 0:
            return n, key_counter, err
    return n, key_counter, np.int64(0)


@njit(cache=True, nogil=True)
def churn(state, keyv, agev, live, live_pos, n, m, seed, disc, cycles, key_counter, key_salt, rng_state):
    """Alternate fresh-key insertion and random deletion for `cycles` rounds.

    Returns (n, key_counter, rng_state, err)."""
    for _ in range(cycles):
        k = make_key(key_salt, key_counter)
        key_counter += 1
        n, _, _, _, err = insert(state, keyv, agev, live, live_pos, n, m, seed, disc, k)
        if err != 0:
            return n, key_counter, rng_state, err
        n, rng_state, _ = delete_random(state, keyv, live, live_pos, n, rng_state)
    return n, key_counter, rng_state, np.int64(0)


@njit(cache=True, nogil=True)
def search_standard(state, keyv, seed, m, key):
    """Probes to find `key` walking its stream in age order.

    Returns the age if found, -1 if an empty slot ends the walk, -2 if the
    64*m guard is exhausted."""
    guard = 64 * m
    j = np.int64(1)
    while j <= guard:
        s = probe(seed, key, np.uint64(j), np.uint64(m))
        st = state[s]
        if st == EMPTY:
            return np.int64(-1)
        if st == OCCUPIED and keyv[s] == key:
            return j
        j += 1
    return np.int64(-2)


@njit(cache=True, nogil=True)
def search_centered(state, keyv, seed, m, key, j0):
    """Inspections to find `key` trying ages j0, j0+1, j0-1, j0+2, ...

    Nonpositive candidate ages are skipped; candidates stop at the 64*m age
    cap.  Returns the inspection count, or -2 if the cap exhausts both
    directions without a match."""
    cap = 64 * m
    inspections = np.int64(0)
    d = np.int64(0)
    while True:
        j = j0 + d
        if j <= cap:
            inspections += 1
            s = probe(seed, key, np.uint64(j), np.uint64(m))
            if state[s] == OCCUPIED and keyv[s] == key:
                return inspections
        if d > 0:
            j = j0 - d
            if 1 <= j <= cap:
                inspections += 1
                s = probe(seed, key, np.uint64(j), np.uint64(m))
                if state[s] == OCCUPIED and keyv[s] == key:
                    return inspections
        if j0 + d > cap and j0 - d < 1:  # both directions exhausted for good
            return np.int64(-2)
        d += 1


@njit(cache=True, nogil=True)
def search_standard_many(state, keyv, seed, m, queries, out):
    for t in range(queries.size):
        out[t] = search_standard(state, keyv, seed, m, queries[t])


@njit(cache=True, nogil=True)
def search_centered_many(state, keyv, seed, m, queries, j0, out):
    for t in range(queries.size):
        out[t] = search_centered(state, keyv, seed, m, queries[t], j0)
