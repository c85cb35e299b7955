"""Numba kernels for the Tsetlin Machine.

Automaton states live in an ``int16`` array of shape
``(n_classes, n_clauses, 2 * n_features)``. Literal ``k < d`` is ``x_k``,
literal ``d + k`` is ``NOT x_k``. A state ``> N`` means *include*.

Randomness comes from xoshiro256** seeded through splitmix64, so the
trained model depends only on the seed and not on numpy's global RNG or
the platform.
"""

import numba
import numpy as np
from numba import njit, prange

# omp first: it tolerates concurrent calls from several Python threads
numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]

_U1 = np.uint64(1)
_INV_2_53 = 1.0 / 9007199254740992.0


@njit(cache=True)
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@njit(cache=True)
def seed_state(seed):
    """Expand a 64-bit seed into a xoshiro256** state with splitmix64."""
    state = np.empty(4, dtype=np.uint64)
    z = np.uint64(seed)
    for i in range(4):
        z = z + np.uint64(0x9E3779B97F4A7C15)
        r = z
        r = (r ^ (r >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        r = (r ^ (r >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        state[i] = r ^ (r >> np.uint64(31))
    return state


@njit(cache=True)
def next_u64(state):
    result = _rotl(state[1] * np.uint64(5), 7) * np.uint64(9)
    t = state[1] << np.uint64(17)
    state[2] ^= state[0]
    state[3] ^= state[1]
    state[1] ^= state[2]
    state[0] ^= state[3]
    state[2] ^= t
    state[3] = _rotl(state[3], 45)
    return result


@njit(cache=True)
def next_float(state):
    return np.float64(next_u64(state) >> np.uint64(11)) * _INV_2_53


@njit(cache=True)
def next_below(state, n):
    return np.int64(next_float(state) * n)


@njit(cache=True)
def shuffled_order(n, state):
    order = np.arange(n)
    for i in range(n - 1, 0, -1):
        j = next_below(state, i + 1)
        tmp = order[i]
        order[i] = order[j]
        order[j] = tmp
    return order


@njit(cache=True)
def _literals(x):
    d = x.shape[0]
    lit = np.empty(2 * d, dtype=np.uint8)
    for k in range(d):
        lit[k] = x[k]
        lit[d + k] = 1 - x[k]
    return lit


@njit(cache=True)
def _learning_outputs(states_c, lit, N, out):
    m, L = states_c.shape
    for j in range(m):
        fired = 1
        for k in range(L):
            if states_c[j, k] > N and lit[k] == 0:
                fired = 0
                break
        out[j] = fired


@njit(cache=True)
def _type_i(row, lit, fired, thr_inc, thr_dec, N, rng):
    # per-literal coins use 16-bit lanes of one 64-bit draw; thresholds are
    # probabilities scaled by 2**16
    L = row.shape[0]
    top = 2 * N
    buf = np.uint64(0)
    left = 0
    for k in range(L):
        if left == 0:
            buf = next_u64(rng)
            left = 4
        r = np.int64(buf & np.uint64(0xFFFF))
        buf = buf >> np.uint64(16)
        left -= 1
        if fired and lit[k] == 1:
            if r < thr_inc and row[k] < top:
                row[k] += 1
        elif r < thr_dec and row[k] > 1:
            row[k] -= 1


@njit(cache=True)
def _type_ii(row, lit, fired, N):
    if not fired:
        return
    for k in range(row.shape[0]):
        if lit[k] == 0 and row[k] <= N:
            row[k] += 1


@njit(cache=True)
def _update_class(states, c, lit, T, s, N, toward_positive, rng, out):
    states_c = states[c]
    m = states_c.shape[0]
    half = m // 2
    _learning_outputs(states_c, lit, N, out)
    v = 0
    for j in range(half):
        v += out[j]
    for j in range(half, m):
        v -= out[j]
    if v > T:
        v = T
    elif v < -T:
        v = -T
    if toward_positive:
        p = (T - v) / (2.0 * T)
    else:
        p = (T + v) / (2.0 * T)
    thr_inc = np.int64(round((s - 1.0) / s * 65536.0))
    thr_dec = np.int64(round(1.0 / s * 65536.0))
    for j in range(m):
        if next_float(rng) >= p:
            continue
        positive = j < half
        if positive == toward_positive:
            _type_i(states_c[j], lit, out[j], thr_inc, thr_dec, N, rng)
        else:
            _type_ii(states_c[j], lit, out[j], N)


@njit(cache=True)
def train_sample(states, x, y, T, s, N, rng):
    """One feedback round for a single sample.

    Returns the sampled non-target class (or -1 when there is only one
    class) so callers can check update locality.
    """
    C, m, _ = states.shape
    lit = _literals(x)
    out = np.empty(m, dtype=np.uint8)
    _update_class(states, y, lit, T, s, N, True, rng, out)
    if C < 2:
        return -1
    q = next_below(rng, C - 1)
    if q >= y:
        q += 1
    _update_class(states, q, lit, T, s, N, False, rng, out)
    return q


@njit(cache=True)
def train_epoch(states, X, y, T, s, N, shuffle, rng):
    n = X.shape[0]
    if shuffle:
        order = shuffled_order(n, rng)
    else:
        order = np.arange(n)
    for i in range(n):
        e = order[i]
        train_sample(states, X[e], y[e], T, s, N, rng)


# -- inference ---------------------------------------------------------------


@njit(cache=True)
def pack_masks(states, N):
    """Bit-pack include decisions into ``(C, m, W)`` uint64 words."""
    C, m, L = states.shape
    W = (L + 63) // 64
    masks = np.zeros((C, m, W), dtype=np.uint64)
    nonempty = np.zeros((C, m), dtype=np.uint8)
    for c in range(C):
        for j in range(m):
            for k in range(L):
                if states[c, j, k] > N:
                    masks[c, j, k >> 6] |= _U1 << np.uint64(k & 63)
                    nonempty[c, j] = 1
    return masks, nonempty


@njit(cache=True)
def _pack_literals(x, W, buf):
    d = x.shape[0]
    for w in range(W):
        buf[w] = 0
    for k in range(d):
        if x[k]:
            buf[k >> 6] |= _U1 << np.uint64(k & 63)
        else:
            kk = d + k
            buf[kk >> 6] |= _U1 << np.uint64(kk & 63)


@njit(cache=True)
def _fires(mask, lit):
    for w in range(mask.shape[0]):
        if mask[w] & ~lit[w]:
            return False
    return True


@njit(cache=True)
def _votes_one(masks, nonempty, lit, votes):
    C, m, _ = masks.shape
    half = m // 2
    for c in range(C):
        v = 0
        for j in range(m):
            if nonempty[c, j] and _fires(masks[c, j], lit):
                if j < half:
                    v += 1
                else:
                    v -= 1
        votes[c] = v


@njit(cache=True)
def predict_one(masks, nonempty, x):
    C, _, W = masks.shape
    lit = np.empty(W, dtype=np.uint64)
    _pack_literals(x, W, lit)
    best = 0
    best_v = -(1 << 30)
    half = masks.shape[1] // 2
    for c in range(C):
        v = 0
        for j in range(masks.shape[1]):
            if nonempty[c, j] and _fires(masks[c, j], lit):
                if j < half:
                    v += 1
                else:
                    v -= 1
        if v > best_v:
            best_v = v
            best = c
    return best


@njit(cache=True, parallel=True)
def class_votes(masks, nonempty, X):
    n = X.shape[0]
    C, _, W = masks.shape
    votes = np.empty((n, C), dtype=np.int32)
    for i in prange(n):
        lit = np.empty(W, dtype=np.uint64)
        _pack_literals(X[i], W, lit)
        _votes_one(masks, nonempty, lit, votes[i])
    return votes


@njit(cache=True, parallel=True)
def clause_outputs(masks, nonempty, X):
    """Inference-mode outputs of every clause, shape ``(n, C, m)``."""
    n = X.shape[0]
    C, m, W = masks.shape
    res = np.zeros((n, C, m), dtype=np.uint8)
    for i in prange(n):
        lit = np.empty(W, dtype=np.uint64)
        _pack_literals(X[i], W, lit)
        for c in range(C):
            for j in range(m):
                if nonempty[c, j] and _fires(masks[c, j], lit):
                    res[i, c, j] = 1
    return res


@njit(cache=True)
def clause_fire_counts(masks, nonempty, X):
    n = X.shape[0]
    C, m, W = masks.shape
    counts = np.zeros((C, m), dtype=np.int64)
    lit = np.empty(W, dtype=np.uint64)
    for i in range(n):
        _pack_literals(X[i], W, lit)
        for c in range(C):
            for j in range(m):
                if nonempty[c, j] and _fires(masks[c, j], lit):
                    counts[c, j] += 1
    return counts
