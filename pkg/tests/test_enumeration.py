import numpy as np
import pytest

from ube_audit.enumeration import (
    CellScores,
    NullScores,
    compute_null_scores,
    load_null_scores,
    save_null_scores,
    score_pairs,
    select_words,
    voronoi_partition,
)
from ube_audit.errors import ConfigError, FormatError, TruncatedFile
from ube_audit.significance import monte_carlo_pvalue
from ube_audit.weat import association_score


def _unit_rows(rng, count, dim):
    x = rng.standard_normal((count, dim))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def _fixture(seed=0, words=80, dim=6, n=3, m=4, name_count=30):
    """Random unit words with fixed categories plus name-group centers."""
    rng = np.random.default_rng(seed)
    w = _unit_rows(rng, words, dim)
    categories = rng.integers(0, m, size=words)
    # Force every category nonempty so m is well defined.
    categories[:m] = np.arange(m)
    names = _unit_rows(rng, name_count, dim)
    split = np.array_split(np.arange(name_count), n)
    centers = np.stack([names[part].mean(axis=0) for part in split])
    mu = centers.mean(axis=0)
    pool_mean = w.mean(axis=0)
    return w, categories, centers, mu, pool_mean


# ---------------------------------------------------------------- voronoi

def test_voronoi_hand_example():
    words = np.array([[1.0, 0.0], [0.0, 1.0], [0.6, 0.8]])
    centers = np.array([[1.0, 0.0], [0.0, 1.0]])
    parts = voronoi_partition(words, centers)
    # (0.6, 0.8) is closer in inner product to the second center: 0.8 > 0.6.
    assert parts[0].tolist() == [0]
    assert parts[1].tolist() == [1, 2]


def test_voronoi_single_group_takes_everything():
    words = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
    parts = voronoi_partition(words, np.array([[0.3, 0.1]]))
    assert len(parts) == 1
    assert parts[0].tolist() == [0, 1, 2]


def test_voronoi_tie_goes_to_lowest_group():
    word = np.array([[1.0, 1.0]]) / np.sqrt(2.0)
    centers = np.array([[1.0, 0.0], [0.0, 1.0]])
    parts = voronoi_partition(word, centers)
    assert parts[0].tolist() == [0]
    assert parts[1].tolist() == []


def test_voronoi_is_a_partition():
    rng = np.random.default_rng(3)
    words = _unit_rows(rng, 50, 4)
    centers = _unit_rows(rng, 6, 4) * 0.5
    parts = voronoi_partition(words, centers)
    joined = np.sort(np.concatenate(parts))
    assert joined.tolist() == list(range(50))


def test_voronoi_rejects_empty_category():
    with pytest.raises(ConfigError):
        voronoi_partition(np.empty((0, 3)), np.ones((2, 3)))


# ------------------------------------------------------------ select_words

def test_select_words_takes_top_scores():
    # Direction (1, 0): scores are the x components 0.9 > 0.5 > 0.1.
    cell = np.array([[0.9, 0.1], [0.5, 0.2], [0.1, 0.3]])
    chosen, complete = select_words(
        cell, group_mean=np.array([1.0, 0.0]), mu=np.zeros(2),
        category_mean=np.zeros(2), t=2)
    assert complete
    assert chosen.tolist() == [0, 1]


def test_select_words_small_cell_is_incomplete():
    cell = np.array([[0.9, 0.1]])
    chosen, complete = select_words(
        cell, group_mean=np.array([1.0, 0.0]), mu=np.zeros(2),
        category_mean=np.zeros(2), t=3)
    assert not complete
    assert chosen.tolist() == [0]


def test_select_words_category_shift_is_irrelevant():
    rng = np.random.default_rng(11)
    for _ in range(50):
        cell = _unit_rows(rng, 12, 5)
        gm = rng.standard_normal(5) * 0.3
        mu = rng.standard_normal(5) * 0.1
        shift = cell.mean(axis=0)
        with_shift, _ = select_words(cell, gm, mu, shift, t=4)
        without, _ = select_words(cell, gm, mu, np.zeros(5), t=4)
        assert with_shift.tolist() == without.tolist()


def test_select_words_breaks_score_ties_by_rank():
    cell = np.array([[0.5, 0.0], [0.5, 0.0], [0.1, 0.0]])
    chosen, _ = select_words(
        cell, group_mean=np.array([1.0, 0.0]), mu=np.zeros(2),
        category_mean=np.zeros(2), t=2, ranks=np.array([7, 2, 1]))
    assert chosen.tolist() == [1, 0]
    # Default ranks are the input positions.
    chosen, _ = select_words(
        cell, group_mean=np.array([1.0, 0.0]), mu=np.zeros(2),
        category_mean=np.zeros(2), t=2)
    assert chosen.tolist() == [0, 1]


def test_select_words_rejects_bad_t():
    with pytest.raises(ConfigError):
        select_words(np.ones((2, 2)), np.ones(2), np.zeros(2), np.zeros(2), t=0)


# ----------------------------------------------------------------- engine

def _oracle_cells(w, categories, centers, mu, pool_mean, t, allow):
    """Reference implementation composed from the public single-cell ops."""
    n = centers.shape[0]
    m = int(categories.max()) + 1
    sigma = np.full((n, m), -np.inf)
    counts = np.zeros((n, m), dtype=int)
    selected = np.full((n, m, t), -1, dtype=int)
    for j in range(m):
        members = np.flatnonzero(categories == j)
        category_mean = w[members].mean(axis=0)
        parts = None if allow else voronoi_partition(w[members], centers)
        for i in range(n):
            cell = members if allow else members[parts[i]]
            counts[i, j] = cell.size
            if cell.size == 0:
                continue
            chosen, complete = select_words(
                w[cell], centers[i], mu, category_mean, t, ranks=cell)
            picked = cell[chosen]
            selected[i, j, :picked.size] = picked
            if complete:
                sigma[i, j] = association_score(
                    centers[i], mu, w[picked].mean(axis=0), pool_mean)
    return sigma, counts, selected


@pytest.mark.parametrize("allow", [False, True])
def test_engine_matches_contract_composition(allow):
    w, categories, centers, mu, pool_mean = _fixture(seed=7)
    result = score_pairs(w, categories, centers, mu, pool_mean, t=3,
                         allow_multiplicities=allow)
    sigma, counts, selected = _oracle_cells(
        w, categories, centers, mu, pool_mean, t=3, allow=allow)
    assert np.array_equal(result.counts, counts)
    assert np.array_equal(result.selected, selected)
    finite = np.isfinite(sigma)
    assert np.array_equal(np.isfinite(result.sigma), finite)
    assert np.allclose(result.sigma[finite], sigma[finite], rtol=1e-10, atol=1e-13)


def test_default_selection_is_disjoint_within_category():
    w, categories, centers, mu, pool_mean = _fixture(seed=13, words=120)
    result = score_pairs(w, categories, centers, mu, pool_mean, t=3)
    for j in range(result.sigma.shape[1]):
        picked = result.selected[:, j, :].ravel()
        picked = picked[picked >= 0]
        assert len(set(picked.tolist())) == picked.size


def test_multiplicities_share_words_across_groups():
    rng = np.random.default_rng(17)
    # One dominant word per category: every group should select it.
    w = _unit_rows(rng, 12, 4)
    categories = np.repeat(np.arange(3), 4)
    centers = _unit_rows(rng, 2, 4) * 0.4
    mu = centers.mean(axis=0)
    result = score_pairs(w, categories, centers, mu, w.mean(axis=0), t=4,
                         allow_multiplicities=True)
    assert np.array_equal(result.counts, np.full((2, 3), 4))
    # With t equal to the category size both groups select the same words.
    for j in range(3):
        assert set(result.selected[0, j].tolist()) == set(result.selected[1, j].tolist())


def test_small_cells_get_minus_infinity():
    w = np.array([[1.0, 0.0], [0.0, 1.0]])
    categories = np.array([0, 1])
    centers = np.array([[0.8, 0.0], [0.0, 0.8]])
    mu = centers.mean(axis=0)
    result = score_pairs(w, categories, centers, mu, w.mean(axis=0), t=2)
    # Each category holds one word, so no cell can reach t=2.
    assert np.all(result.sigma == -np.inf)
    assert not result.complete.any()
    assert result.counts.max() == 1


def test_identity_rotation_is_bit_exact():
    w, categories, centers, mu, pool_mean = _fixture(seed=23)
    plain = score_pairs(w, categories, centers, mu, pool_mean, t=3)
    rotated = score_pairs(w, categories, centers, mu, pool_mean, t=3,
                          rotation=np.eye(w.shape[1]))
    assert np.array_equal(plain.sigma, rotated.sigma)
    assert np.array_equal(plain.counts, rotated.counts)
    assert np.array_equal(plain.selected, rotated.selected)


def test_joint_rotation_leaves_scores_invariant():
    from ube_audit.rotations import haar_rotation, seeded_rng

    w, categories, centers, mu, pool_mean = _fixture(seed=29)
    u = haar_rotation(w.shape[1], seeded_rng(4, "joint"))
    base = score_pairs(w, categories, centers, mu, pool_mean, t=3)
    moved = score_pairs(w @ u, categories, centers @ u, mu @ u,
                        pool_mean @ u, t=3)
    assert np.array_equal(base.counts, moved.counts)
    assert np.array_equal(base.selected, moved.selected)
    finite = np.isfinite(base.sigma)
    assert np.allclose(base.sigma[finite], moved.sigma[finite],
                       rtol=1e-9, atol=1e-12)


def test_engine_validates_inputs():
    w, categories, centers, mu, pool_mean = _fixture()
    with pytest.raises(ConfigError):
        score_pairs(w, categories[:-1], centers, mu, pool_mean, t=3)
    with pytest.raises(ConfigError):
        score_pairs(w, categories, centers, mu, pool_mean, t=0)
    with pytest.raises(ConfigError):
        score_pairs(w, categories, centers[:, :-1], mu, pool_mean, t=3)


# ------------------------------------------------------------- null scores

def test_null_scores_shape_and_determinism():
    w, categories, centers, mu, pool_mean = _fixture(seed=31, words=40, dim=5)
    first = compute_null_scores(w, categories, centers, mu, pool_mean,
                                t=2, rotations=7, seed=5)
    again = compute_null_scores(w, categories, centers, mu, pool_mean,
                                t=2, rotations=7, seed=5)
    assert first.scores.shape == (3, 4, 7)
    assert first.scores.tobytes() == again.scores.tobytes()
    assert first.seed == 5 and first.dim == 5
    assert first.rotations == 7 and first.n == 3 and first.m == 4


def test_null_rotations_are_independent_of_count():
    w, categories, centers, mu, pool_mean = _fixture(seed=37, words=40, dim=5)
    short = compute_null_scores(w, categories, centers, mu, pool_mean,
                                t=2, rotations=3, seed=9)
    long = compute_null_scores(w, categories, centers, mu, pool_mean,
                               t=2, rotations=5, seed=9)
    assert np.array_equal(short.scores, long.scores[:, :, :3])


def test_null_scores_feed_monte_carlo():
    w, categories, centers, mu, pool_mean = _fixture(seed=41, words=60, dim=5)
    observed = score_pairs(w, categories, centers, mu, pool_mean, t=2)
    nulls = compute_null_scores(w, categories, centers, mu, pool_mean,
                                t=2, rotations=50, seed=1)
    for i in range(3):
        for j in range(4):
            if not observed.complete[i, j]:
                continue
            p = monte_carlo_pvalue(observed.sigma[i, j], nulls.scores[i, j])
            assert 0.0 < p <= 1.0


def test_null_scores_validates_rotation_count():
    w, categories, centers, mu, pool_mean = _fixture(words=20, dim=4)
    with pytest.raises(ConfigError):
        compute_null_scores(w, categories, centers, mu, pool_mean,
                            t=2, rotations=0, seed=0)


# -------------------------------------------------------------- disk cache

def _small_nulls():
    rng = np.random.default_rng(2)
    return NullScores(scores=rng.standard_normal((2, 3, 4)), seed=77, dim=6)


def test_cache_round_trip(tmp_path):
    path = tmp_path / "nulls.bin"
    nulls = _small_nulls()
    save_null_scores(path, nulls)
    loaded = load_null_scores(path)
    assert loaded.scores.tobytes() == nulls.scores.tobytes()
    assert (loaded.seed, loaded.dim) == (77, 6)
    assert loaded.scores.shape == (2, 3, 4)


def test_cache_preserves_minus_infinity(tmp_path):
    path = tmp_path / "nulls.bin"
    scores = np.full((1, 1, 2), -np.inf)
    save_null_scores(path, NullScores(scores=scores, seed=0, dim=3))
    assert np.all(load_null_scores(path).scores == -np.inf)


def test_cache_rejects_bad_magic(tmp_path):
    path = tmp_path / "nulls.bin"
    path.write_bytes(b"NOTACACHE" + b"\0" * 64)
    with pytest.raises(FormatError):
        load_null_scores(path)


def test_cache_rejects_truncation(tmp_path):
    path = tmp_path / "nulls.bin"
    save_null_scores(path, _small_nulls())
    whole = path.read_bytes()
    path.write_bytes(whole[:-5])
    with pytest.raises(TruncatedFile):
        load_null_scores(path)
    path.write_bytes(whole[:20])
    with pytest.raises(TruncatedFile):
        load_null_scores(path)


def test_cache_rejects_trailing_bytes(tmp_path):
    path = tmp_path / "nulls.bin"
    save_null_scores(path, _small_nulls())
    path.write_bytes(path.read_bytes() + b"x")
    with pytest.raises(FormatError):
        load_null_scores(path)


def test_cache_rejects_oversized_seed(tmp_path):
    nulls = NullScores(scores=np.zeros((1, 1, 1)), seed=2 ** 63, dim=2)
    with pytest.raises(ConfigError):
        save_null_scores(tmp_path / "nulls.bin", nulls)


def test_cell_scores_complete_mask():
    sigma = np.array([[1.0, -np.inf]])
    cells = CellScores(sigma=sigma, counts=np.array([[3, 1]]),
                       selected=np.full((1, 2, 3), -1))
    assert cells.complete.tolist() == [[True, False]]
