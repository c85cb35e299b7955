import itertools
import pickle

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tmids import _kernels as K
from tmids.baseline import MajorityClassifier
from tmids.exceptions import DimensionError, UsageError
from tmids.tsetlin import Clause, TsetlinMachineClassifier, build_empty, evaluate_clause

N = 128


def make_clause(d, include=(), negate=(), polarity=1, N=N):
    automata = np.full(2 * d, N, dtype=np.int16)
    automata[list(include)] = N + 1
    automata[[d + k for k in negate]] = N + 1
    return Clause(automata=automata, polarity=polarity, class_id=0, states_per_action=N)


def brute_force(include, negate, x):
    return int(all(x[i] == 1 for i in include) and all(x[k] == 0 for k in negate))


def noisy_xor(n, noise, rng):
    X = rng.integers(0, 2, size=(n, 4), dtype=np.uint8)
    y = X[:, 0] ^ X[:, 1]
    flip = rng.random(n) < noise
    y = np.where(flip, 1 - y, y)
    return X, y.astype(np.int64)


# -- clause evaluation -----------------------------------------------------------


def test_clause_examples():
    c = make_clause(2, include=[0], negate=[1])
    assert evaluate_clause(c, np.array([1, 0])) == 1
    assert evaluate_clause(c, np.array([1, 1])) == 0


def test_empty_clause_modes():
    c = make_clause(3)
    for x in itertools.product([0, 1], repeat=3):
        assert evaluate_clause(c, np.array(x), "inference") == 0
        assert evaluate_clause(c, np.array(x), "learning") == 1


def test_clause_dimension_mismatch():
    with pytest.raises(DimensionError):
        evaluate_clause(make_clause(3, include=[0]), np.array([1, 0]))


def test_clause_oracle_exhaustive():
    for d in range(1, 7):
        literals = range(2 * d)
        inputs = np.array(list(itertools.product([0, 1], repeat=d)), dtype=np.uint8)
        for r in range(0, 4):
            for chosen in itertools.combinations(literals, r):
                inc = [k for k in chosen if k < d]
                neg = [k - d for k in chosen if k >= d]
                c = make_clause(d, inc, neg)
                for x in inputs:
                    want = brute_force(inc, neg, x) if chosen else 0
                    assert evaluate_clause(c, x) == want


def _model_with_includes(d, C, m, rng, p=0.15):
    tm = build_empty(d, C, n_clauses=m)
    states = np.where(rng.random(tm.states_.shape) < p, N + 1 + rng.integers(0, N, tm.states_.shape), 1 + rng.integers(0, N, tm.states_.shape))
    tm.set_states(states)
    return tm


def test_kernel_votes_match_clause_evaluation():
    rng = np.random.default_rng(3)
    d, C, m = 70, 3, 10  # 140 literals: spans three 64-bit words
    tm = _model_with_includes(d, C, m, rng, p=0.02)
    X = rng.integers(0, 2, size=(200, d), dtype=np.uint8)
    votes = tm.decision_function(X)
    outs = tm.clause_outputs(X)
    for i in range(0, 200, 7):
        for c in range(C):
            fired = [evaluate_clause(tm.clause(c, j), X[i]) for j in range(m)]
            assert outs[i, c].tolist() == fired
            assert votes[i, c] == sum(f * p for f, p in zip(fired, tm.polarity_))
        assert tm.predict_one(X[i]) == tm.predict(X[i:i + 1])[0]


def test_class_score_examples():
    tm = build_empty(2, 2, n_clauses=4)
    states = tm.states_.copy()
    states[0, 0, 0] = N + 1  # positive clause: x0
    states[0, 1, 0] = N + 1  # positive clause: x0
    states[0, 2, 1] = N + 1  # negative clause: x1
    tm.set_states(states)
    x = np.array([1, 0], dtype=np.uint8)
    assert tm.decision_function([x])[0].tolist() == [2, 0]


def test_polarity_flip_negates_score():
    rng = np.random.default_rng(4)
    tm = _model_with_includes(8, 3, 6, rng, p=0.1)
    X = rng.integers(0, 2, size=(300, 8), dtype=np.uint8)
    flipped = build_empty(8, 3, n_clauses=6)
    half = 3
    s = tm.states_
    flipped.set_states(np.concatenate([s[:, half:], s[:, :half]], axis=1))
    np.testing.assert_array_equal(flipped.decision_function(X), -tm.decision_function(X))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.data())
def test_adding_literal_never_turns_clause_on(d, data):
    lits = data.draw(st.sets(st.integers(0, 2 * d - 1), min_size=1, max_size=2 * d))
    extra = data.draw(st.integers(0, 2 * d - 1))
    x = np.array(data.draw(st.lists(st.integers(0, 1), min_size=d, max_size=d)), dtype=np.uint8)
    base = make_clause(d, [k for k in lits if k < d], [k - d for k in lits if k >= d])
    more = lits | {extra}
    bigger = make_clause(d, [k for k in more if k < d], [k - d for k in more if k >= d])
    if evaluate_clause(base, x) == 0:
        assert evaluate_clause(bigger, x) == 0


def test_predict_ties_and_argmax():
    tm = build_empty(2, 2, n_clauses=2)
    assert tm.predict(np.array([[1, 1]], dtype=np.uint8))[0] == 0
    votes = np.array([[-1, 0, 4, -3, 2, 1], [5, -2, 0, 0, 0, 0], [3, 3, 0, 0, 0, 0]])
    assert np.argmax(votes, axis=1).tolist() == [2, 0, 0]


def test_argmax_invariant_under_constant_shift():
    # an extra always-on positive clause in every class adds 1 to each score
    rng = np.random.default_rng(5)
    d, C, m = 6, 3, 6
    tm = _model_with_includes(d, C, m, rng, p=0.2)
    X = rng.integers(0, 2, size=(200, d), dtype=np.uint8)
    X[:, 0] = 1
    wider = build_empty(d, C, n_clauses=m + 2)
    s = np.full(wider.states_.shape, N, dtype=np.int16)
    s[:, : m // 2] = tm.states_[:, : m // 2]
    s[:, m // 2, 0] = N + 1
    s[:, m // 2 + 1:m + 1] = tm.states_[:, m // 2:]
    wider.set_states(s)
    np.testing.assert_array_equal(wider.decision_function(X), tm.decision_function(X) + 1)
    np.testing.assert_array_equal(wider.predict(X), tm.predict(X))


def test_untrained_votes_zero():
    tm = build_empty(10, 4, n_clauses=8)
    X = np.random.default_rng(0).integers(0, 2, size=(50, 10), dtype=np.uint8)
    assert not tm.decision_function(X).any()


# -- training ----------------------------------------------------------------------


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**64 - 1), st.integers(1, 20), st.floats(1.01, 30), st.integers(2, 5), st.sampled_from([1, 2, 8, 128]))
def test_states_stay_in_bounds(seed, T, s, C, Nsa):
    rng = np.random.default_rng(seed % 2**32)
    tm = build_empty(5, C, n_clauses=4, T=T, s=s, states_per_action=Nsa, random_state=seed)
    for _ in range(150):
        x = rng.integers(0, 2, 5, dtype=np.uint8)
        tm.train_step(x, int(rng.integers(0, C)))
        assert tm.states_.min() >= 1 and tm.states_.max() <= 2 * Nsa


def test_update_touches_only_target_and_one_negative_class():
    rng = np.random.default_rng(7)
    tm = build_empty(6, 5, n_clauses=10, T=5, s=3.0, random_state=11)
    seen = set()
    for _ in range(300):
        before = tm.states_.copy()
        x = rng.integers(0, 2, 6, dtype=np.uint8)
        y = int(rng.integers(0, 5))
        q = tm.train_step(x, y)
        assert q != y and 0 <= q < 5
        seen.add(q)
        changed = {c for c in range(5) if not np.array_equal(before[c], tm.states_[c])}
        assert changed <= {y, q}
    assert len(seen) == 5


def test_singleton_convergence():
    for seed in range(5):
        tm = build_empty(8, 2, n_clauses=10, T=5, s=3.0, random_state=seed)
        x = np.array([1, 0, 1, 1, 0, 0, 1, 0], dtype=np.uint8)
        for _ in range(200):
            tm.train_step(x, 0)
        assert tm.predict([x])[0] == 0


def test_epochs_zero_leaves_model_initial():
    X = np.random.default_rng(0).integers(0, 2, size=(20, 4), dtype=np.uint8)
    y = np.arange(20) % 2
    tm = TsetlinMachineClassifier(n_clauses=4, epochs=0).fit(X, y)
    assert tm.trace_ == []
    assert (tm.states_ == 128).all()


def test_fit_deterministic_and_seed_sensitive():
    rng = np.random.default_rng(1)
    X, y = noisy_xor(400, 0.1, rng)
    a = TsetlinMachineClassifier(n_clauses=10, T=5, s=3.9, epochs=5, random_state=9).fit(X, y)
    b = TsetlinMachineClassifier(n_clauses=10, T=5, s=3.9, epochs=5, random_state=9).fit(X, y)
    c = TsetlinMachineClassifier(n_clauses=10, T=5, s=3.9, epochs=5, random_state=10).fit(X, y)
    np.testing.assert_array_equal(a.states_, b.states_)
    assert a.trace_ == b.trace_
    assert not np.array_equal(a.states_, c.states_)


def test_trace_records_train_and_val_accuracy():
    rng = np.random.default_rng(2)
    X, y = noisy_xor(300, 0.0, rng)
    tm = TsetlinMachineClassifier(n_clauses=10, T=5, s=3.9, epochs=4).fit(X, y, X_val=X[:50], y_val=y[:50])
    assert [r["epoch"] for r in tm.trace_] == [1, 2, 3, 4]
    assert all(0 <= r["train_accuracy"] <= 1 and 0 <= r["val_accuracy"] <= 1 for r in tm.trace_)


def test_noisy_xor_learnable():
    for seed in range(5):
        rng = np.random.default_rng(100 + seed)
        X, y = noisy_xor(1000, 0.1, rng)
        Xt, yt = noisy_xor(1000, 0.0, rng)
        tm = TsetlinMachineClassifier(n_clauses=20, T=10, s=3.9, epochs=50, random_state=seed).fit(X, y)
        acc = np.mean(tm.predict(Xt) == yt)
        base = np.mean(MajorityClassifier().fit(X, y).predict(Xt) == yt)
        assert acc >= 0.95 and acc > base


def test_string_labels_round_trip():
    X = np.array([[1, 0], [0, 1]] * 30, dtype=np.uint8)
    y = np.array(["a", "b"] * 30)
    tm = TsetlinMachineClassifier(n_clauses=4, T=3, s=2.0, epochs=5).fit(X, y)
    assert set(tm.predict(X)) <= {"a", "b"}


def test_clause_budget_total_splits():
    tm = build_empty(4, 3, n_clauses=60, clause_budget="total")
    assert tm.clauses_per_class_ == 20
    tm = build_empty(4, 3, n_clauses=60)
    assert tm.clauses_per_class_ == 60
    with pytest.raises(UsageError):
        build_empty(4, 3, n_clauses=5)


@pytest.mark.parametrize("params", [{"T": 0}, {"s": 1.0}, {"epochs": -1}, {"states_per_action": 200}, {"clause_budget": "x"}])
def test_invalid_hyperparameters(params):
    X = np.zeros((4, 2), dtype=np.uint8)
    with pytest.raises(UsageError):
        TsetlinMachineClassifier(**params).fit(X, [0, 1, 0, 1])


def test_fit_rejects_bad_input():
    with pytest.raises(UsageError):
        TsetlinMachineClassifier().fit(np.zeros((0, 3), dtype=np.uint8), [])
    with pytest.raises(ValueError):
        TsetlinMachineClassifier().fit(np.array([[0, 2]]), [0])
    tm = build_empty(3, 2, n_clauses=2)
    with pytest.raises(DimensionError):
        tm.predict(np.zeros((1, 4), dtype=np.uint8))


def test_pickle_preserves_predictions():
    rng = np.random.default_rng(8)
    X, y = noisy_xor(300, 0.0, rng)
    tm = TsetlinMachineClassifier(n_clauses=10, T=5, s=3.9, epochs=5).fit(X, y)
    back = pickle.loads(pickle.dumps(tm))
    np.testing.assert_array_equal(back.decision_function(X), tm.decision_function(X))


def test_concurrent_inference_matches_serial():
    from concurrent.futures import ThreadPoolExecutor

    rng = np.random.default_rng(9)
    tm = _model_with_includes(40, 3, 20, rng, p=0.03)
    X = rng.integers(0, 2, size=(2000, 40), dtype=np.uint8)
    want = tm.decision_function(X)
    with ThreadPoolExecutor(4) as pool:
        got = list(pool.map(lambda part: tm.decision_function(part), np.array_split(X, 8)))
    np.testing.assert_array_equal(np.concatenate(got), want)


# -- RNG -----------------------------------------------------------------------------

M64 = 2**64 - 1


def _py_xoshiro(seed, n):
    def rotl(x, k):
        return ((x << k) | (x >> (64 - k))) & M64

    z, s = seed, []
    for _ in range(4):
        z = (z + 0x9E3779B97F4A7C15) & M64
        r = z
        r = ((r ^ (r >> 30)) * 0xBF58476D1CE4E5B9) & M64
        r = ((r ^ (r >> 27)) * 0x94D049BB133111EB) & M64
        s.append(r ^ (r >> 31))
    out = []
    for _ in range(n):
        out.append((rotl((s[1] * 5) & M64, 7) * 9) & M64)
        t = (s[1] << 17) & M64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = rotl(s[3], 45)
    return out


@pytest.mark.parametrize("seed", [0, 1, 42, 2**63 + 5, M64])
def test_xoshiro_matches_reference(seed):
    state = K.seed_state(np.uint64(seed))
    got = [int(K.next_u64(state)) for _ in range(20)]
    assert got == _py_xoshiro(seed, 20)


def test_shuffle_is_permutation():
    state = K.seed_state(np.uint64(3))
    order = K.shuffled_order(1000, state)
    assert sorted(order.tolist()) == list(range(1000))
    assert order.tolist() != list(range(1000))
