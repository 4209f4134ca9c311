import numpy as np

from usr.nn.rng import DeterministicRng, fnv1a64, mix64, rng_next_gaussian, stream_state

MASK = (1 << 64) - 1


def splitmix_reference(state, n):
    out = []
    for _ in range(n):
        state = (state + 0x9E3779B97F4A7C15) & MASK
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        out.append(z ^ (z >> 31))
    return out


def test_splitmix_known_value():
    # published first output of splitmix64 seeded with 0
    r = DeterministicRng(0)
    r.state = 0
    assert r.next_u64() == 16294208416658607535


def test_block_matches_scalar_reference():
    r = DeterministicRng(42, 3, "x")
    s0 = r.state
    assert [int(v) for v in r.next_u64_block(50)] == splitmix_reference(s0, 50)


def test_stream_key_derivation():
    g = 0x9E3779B97F4A7C15
    s = mix64(5 + g)
    s = mix64(s ^ 9)
    s = mix64(s ^ fnv1a64("noise"))
    assert stream_state(5, 9, "noise") == s
    assert fnv1a64("") == 0xCBF29CE484222325
    assert fnv1a64("a") == 0xAF63DC4C8601EC8C


def test_streams_independent_of_each_other():
    a = DeterministicRng(1, 0, "a").uniform(4)
    b = DeterministicRng(1, 0, "b").uniform(4)
    c = DeterministicRng(1, 1, "a").uniform(4)
    assert not np.array_equal(a, b) and not np.array_equal(a, c)
    assert np.array_equal(a, DeterministicRng(1, 0, "a").uniform(4))


def test_uniform_uses_top_53_bits():
    r = DeterministicRng(7)
    s = r.state
    x = splitmix_reference(s, 1)[0]
    assert r.uniform() == (x >> 11) * 2.0 ** -53


def test_scalar_and_block_gaussians_identical():
    a = DeterministicRng(3, 1, "g")
    b = DeterministicRng(3, 1, "g")
    scal = [rng_next_gaussian(a) for _ in range(11)]
    assert np.array_equal(np.array(scal), b.normal(11))


def test_gaussian_moments():
    z = DeterministicRng(11, 0, "moments").normal(100000)
    assert abs(z.mean()) < 0.01
    assert abs(z.var() - 1.0) < 0.02


def test_randint_inclusive_and_in_range():
    r = DeterministicRng(5)
    vals = [r.randint(2, 4) for _ in range(300)]
    assert set(vals) == {2, 3, 4}
