import numpy as np
from scipy import stats

from fbdiv.channel import BLOCK_SIZE, SeedPolicy, StreamLabel, draw_channel, draw_channels, point_key, substream


def test_entry_variance(rng):
    H = draw_channels(250_000, 1, 4, rng)  # 10^6 entries
    x = np.abs(H.ravel()) ** 2
    # |h|^2 ~ Exp(1): mean 1, std 1
    assert abs(x.mean() - 1.0) < 3 / np.sqrt(x.size)
    assert abs(np.var(H.real) - 0.5) < 0.005
    assert abs(H.mean()) < 0.005


def test_norm_mean_and_distribution(rng):
    M = 4
    H = draw_channels(50_000, 1, M, rng)[:, 0]
    nsq = np.sum(np.abs(H) ** 2, axis=-1)
    # ||h||^2 ~ Gamma(M, 1): mean M, variance M
    assert abs(nsq.mean() - M) < 3 * np.sqrt(M / nsq.size)
    assert stats.kstest(2 * nsq, stats.chi2(2 * M).cdf).pvalue > 0.01


def test_isotropy(rng):
    M = 4
    H = draw_channels(50_000, 1, M, rng)[:, 0]
    u = H / np.linalg.norm(H, axis=-1, keepdims=True)
    x = np.abs(u[:, 0]) ** 2
    sigma = np.sqrt((M - 1) / (M**2 * (M + 1)) / x.size)
    assert abs(x.mean() - 1 / M) < 3 * sigma


def test_draw_channel_shape(rng):
    ch = draw_channel(3, 5, rng, frame_index=7)
    assert ch.H.shape == (3, 5) and ch.K == 3 and ch.M == 5 and ch.frame_index == 7


def test_substreams_reproducible_and_distinct():
    a = substream(7, 1, 2, StreamLabel.CHANNEL).standard_normal(4)
    b = substream(7, 1, 2, StreamLabel.CHANNEL).standard_normal(4)
    assert np.array_equal(a, b)
    others = [
        substream(8, 1, 2, StreamLabel.CHANNEL),
        substream(7, 2, 2, StreamLabel.CHANNEL),
        substream(7, 1, 3, StreamLabel.CHANNEL),
        substream(7, 1, 2, StreamLabel.RBF_BASIS),
        substream(7, 1, 2, StreamLabel.RVQ_CODEBOOK + 1),
    ]
    for g in others:
        assert not np.array_equal(a, g.standard_normal(4))


def test_seed_policy_matches_substream():
    pol = SeedPolicy(11, 99)
    assert np.array_equal(pol.stream(0, StreamLabel.CHANNEL).random(3),
                          substream(11, 99, 0, StreamLabel.CHANNEL).random(3))


def test_point_key_stable():
    assert point_key("zf-rvq", 4, 10.0) == point_key("zf-rvq", 4, 10.0)
    assert point_key("zf-rvq", 4, 10.0) != point_key("zf-rvq", 4, 20.0)
    assert 0 <= point_key("x") < 2**63
    assert BLOCK_SIZE > 0
