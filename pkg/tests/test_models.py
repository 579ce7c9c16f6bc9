import numpy as np
import pytest
from sklearn.datasets import make_blobs
from sklearn.decomposition import PCA
from sklearn.mixture import GaussianMixture
from sklearn.neighbors import KNeighborsClassifier
from sklearn.svm import SVC

from aewave.errors import DataError
from aewave.features import standardizer_fit
from aewave.models import (
    accuracy,
    confusion_matrix,
    gmm_bic,
    gmm_fit_em,
    grid_search_cv,
    knn_fit,
    knn_predict,
    load_models,
    n_parameters,
    pca_fit,
    pca_transform,
    permutation_importance,
    save_models,
    select_k_by_bic,
    stratified_kfold,
    stratified_split,
    svm_predict,
    svm_train,
)
from aewave.models.gmm import GmmModel
from aewave.models.knn import KnnModel
from aewave.models.svm import SvmModel, rbf_kernel


# -- KNN ---------------------------------------------------------------------


def test_knn_matches_sklearn_on_continuous_data(rng):
    X = rng.normal(size=(200, 5))
    y = (X[:, 0] + 0.5 * rng.normal(size=200) > 0).astype(int)
    Q = rng.normal(size=(100, 5))
    for k in (1, 3, 7):
        ref = KNeighborsClassifier(n_neighbors=k, algorithm="brute").fit(X, y).predict(Q)
        np.testing.assert_array_equal(knn_predict(knn_fit(X, y, k), Q), ref)


def test_knn_tie_breaks():
    X = np.array([[0.0], [2.0], [-1.5], [3.0]])
    y = np.array([1, 0, 0, 1])
    # k=2 at x=0.9: neighbours 0 (d=0.9, label 1) and 1 (d=1.1, label 0) -> 1:1 vote,
    # label 1 has the smaller summed distance
    assert knn_predict(knn_fit(X, y, 2), [[0.9]])[0] == 1
    # equidistant pair with equal sums -> lower label
    X2 = np.array([[-1.0], [1.0]])
    assert knn_predict(knn_fit(X2, np.array([1, 0]), 2), [[0.0]])[0] == 0
    # equal distances: the lower training index is the nearer neighbour
    X3 = np.array([[1.0], [-1.0], [5.0]])
    assert knn_predict(knn_fit(X3, np.array([7, 3, 3]), 1), [[0.0]])[0] == 7


def test_knn_validation():
    with pytest.raises(DataError):
        knn_fit(np.zeros((3, 2)), np.zeros(3), 4)
    m = knn_fit(np.zeros((3, 2)), np.zeros(3, dtype=int), 1)
    with pytest.raises(DataError):
        knn_predict(m, np.zeros((1, 3)))


# -- SVM ---------------------------------------------------------------------


def test_svm_decision_values_match_libsvm(rng):
    X, y01 = make_blobs(n_samples=120, centers=2, cluster_std=2.5, random_state=3)
    y = np.where(y01 == 1, 1, -1)
    m = svm_train(X, y, C=1.0, gamma=0.1, tol=1e-6)
    ref = SVC(C=1.0, gamma=0.1, tol=1e-6).fit(X, y)
    Q = rng.normal(size=(50, 2)) * 4 + X.mean(axis=0)
    np.testing.assert_allclose(m.decision_function(Q), ref.decision_function(Q), atol=1e-4)
    assert abs(m.bias - ref.intercept_[0]) < 1e-4
    assert m.support_vectors.shape[0] == ref.support_vectors_.shape[0]


def test_svm_xor_and_equality_constraint():
    X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    y = np.array([-1, -1, 1, 1])
    m = svm_train(X, y, C=10.0, gamma=2.0)
    labels, f = svm_predict(m, X)
    np.testing.assert_array_equal(labels, y)
    assert abs(np.sum(m.dual_coef)) <= 1e-8
    assert np.all(np.abs(m.dual_coef) <= 10.0 + 1e-12)


def test_svm_class_weight_shifts_boundary(rng):
    X, y01 = make_blobs(n_samples=200, centers=[[0, 0], [1.5, 0]], cluster_std=1.0, random_state=0)
    y = np.where(y01 == 1, 1, -1)
    plain = svm_train(X, y, C=1.0, gamma=0.5)
    heavy = svm_train(X, y, C=1.0, gamma=0.5, class_weight={1: 10.0})
    assert np.sum(heavy.predict(X) == 1) > np.sum(plain.predict(X) == 1)


def test_svm_errors():
    X = np.zeros((4, 2))
    with pytest.raises(DataError):
        svm_train(X, np.ones(4))
    with pytest.raises(DataError):
        svm_train(X, np.array([0, 1, 0, 1]))
    with pytest.raises(DataError):
        svm_train(X, np.array([-1, 1, -1, 1]), C=0.0)


def test_rbf_kernel_values():
    A = np.array([[0.0, 0.0], [1.0, 2.0]])
    K = rbf_kernel(A, A, 0.5)
    np.testing.assert_allclose(K, [[1.0, np.exp(-2.5)], [np.exp(-2.5), 1.0]])


# -- PCA ---------------------------------------------------------------------


def test_pca_matches_sklearn_up_to_sign(rng):
    X = rng.normal(size=(80, 6)) @ rng.normal(size=(6, 6))
    m = pca_fit(X, 3)
    ref = PCA(n_components=3).fit(X)
    for a, b in zip(m.components, ref.components_):
        assert min(np.max(np.abs(a - b)), np.max(np.abs(a + b))) < 1e-10
    np.testing.assert_allclose(m.explained_variance, ref.explained_variance_, rtol=1e-10)
    np.testing.assert_allclose(m.explained_variance_ratio, ref.explained_variance_ratio_, rtol=1e-10)
    # sign convention: the largest-magnitude loading of every component is positive
    for c in m.components:
        assert c[np.argmax(np.abs(c))] > 0
    np.testing.assert_allclose(pca_transform(m, m.mean[None, :]), 0.0, atol=1e-12)


def test_pca_full_rank_round_trip(rng):
    X = rng.normal(size=(30, 4))
    m = pca_fit(X, 4)
    np.testing.assert_allclose(m.inverse_transform(m.transform(X)), X, atol=1e-12)
    with pytest.raises(DataError):
        pca_fit(X, 5)


# -- GMM ---------------------------------------------------------------------


def three_blobs(seed, n=300):
    X, _ = make_blobs(n_samples=n, centers=[[0, 0], [6, 0], [0, 6]], cluster_std=1.0, random_state=seed)
    return X


def test_gmm_likelihood_matches_sklearn():
    X = three_blobs(0)
    m = gmm_fit_em(X, 3, seed=0, n_init=3)
    ref = GaussianMixture(
        3, covariance_type="full", reg_covar=1e-6, random_state=0, n_init=3, tol=1e-10, max_iter=2000
    ).fit(X)
    assert m.log_likelihood(X) / X.shape[0] == pytest.approx(ref.score(X), abs=1e-4)
    order = np.argsort(m.means[:, 0] + 10 * m.means[:, 1])
    ref_order = np.argsort(ref.means_[:, 0] + 10 * ref.means_[:, 1])
    np.testing.assert_allclose(m.means[order], ref.means_[ref_order], atol=1e-3)
    np.testing.assert_allclose(m.predict_proba(X).sum(axis=1), 1.0, atol=1e-12)


def test_gmm_trace_is_monotone():
    X = np.vstack([three_blobs(1), np.random.default_rng(2).normal(3, 3, size=(100, 2))])
    for K in (2, 4, 6):
        m = gmm_fit_em(X, K, seed=5, n_init=2)
        tr = np.array(m.log_likelihood_trace)
        assert np.all(np.diff(tr) >= -1e-9 * np.abs(tr[:-1]))


def test_bic_parameter_count_and_selection():
    assert n_parameters(3, 2) == 2 + 6 + 9
    X = three_blobs(7)
    k, bics, models = select_k_by_bic(X, 2, 5, seed=0, n_init=3)
    assert k == 3 and len(bics) == 4
    assert bics[1] == pytest.approx(gmm_bic(models[1], X))


def test_gmm_errors():
    with pytest.raises(DataError):
        gmm_fit_em(np.zeros((3, 2)), 4)


# -- evaluation --------------------------------------------------------------


def test_confusion_matrix_layout():
    c = confusion_matrix([0, 0, 1, 1, 1], [0, 1, 1, 0, 1])
    np.testing.assert_array_equal(c.matrix, [[1, 1], [1, 2]])
    assert c.accuracy == pytest.approx(0.6)
    assert c.recall_positive == pytest.approx(2 / 3) and c.recall_negative == pytest.approx(0.5)
    assert accuracy([1, 0], [1, 1]) == 0.5


def test_stratified_split_and_folds():
    y = np.array([1] * 25 + [0] * 250)
    tr, te = stratified_split(y, 0.2, seed=0)
    assert np.intersect1d(tr, te).size == 0 and tr.size + te.size == y.size
    assert np.sum(y[te] == 1) == 5 and np.sum(y[te] == 0) == 50
    tr2, te2 = stratified_split(y, 0.2, seed=0)
    np.testing.assert_array_equal(te, te2)
    folds = list(stratified_kfold(y, 5, seed=1))
    assert len(folds) == 5
    seen = np.concatenate([v for _, v in folds])
    np.testing.assert_array_equal(np.sort(seen), np.arange(y.size))
    for _, v in folds:
        assert np.sum(y[v] == 1) == 5


def test_grid_search_picks_first_best(rng):
    X = rng.normal(size=(100, 2))
    y = (X[:, 0] > 0).astype(int)

    def fit(A, b, flip):
        return flip

    def predict(flip, A):
        p = (A[:, 0] > 0).astype(int)
        return 1 - p if flip else p

    best, scores = grid_search_cv(fit, predict, X, y, [{"flip": True}, {"flip": False}, {"flip": False}], 5, 0)
    assert best == {"flip": False} and scores[1] == scores[2] == 1.0


def test_permutation_importance_finds_the_signal(rng):
    X = rng.normal(size=(300, 3))
    y = (X[:, 1] > 0).astype(int)
    imp, base = permutation_importance(lambda A: (A[:, 1] > 0).astype(int), X, y, 5, seed=0)
    assert base == 1.0
    assert imp[1] > 0.3 and imp[0] == 0.0 and imp[2] == 0.0


# -- persistence -------------------------------------------------------------


def test_model_bundle_round_trip(tmp_path, rng):
    X = rng.normal(size=(40, 3))
    y = (X[:, 0] > 0).astype(int)
    z = standardizer_fit(X)
    parts = {
        "standardizer": z,
        "knn": knn_fit(z.apply(X), y, 3),
        "svm": svm_train(X, 2 * y - 1, C=1.0, gamma=0.3),
        "pca": pca_fit(X, 2),
        "gmm": gmm_fit_em(X, 2, n_init=1),
    }
    p = tmp_path / "m.json"
    save_models(p, parts, {"config_hash": "abc"})
    back, meta = load_models(p)
    assert meta["config_hash"] == "abc"
    assert isinstance(back["knn"], KnnModel) and isinstance(back["svm"], SvmModel)
    assert isinstance(back["gmm"], GmmModel)
    np.testing.assert_array_equal(back["svm"].decision_function(X), parts["svm"].decision_function(X))
    np.testing.assert_array_equal(back["pca"].transform(X), parts["pca"].transform(X))
    np.testing.assert_array_equal(back["gmm"].predict_proba(X), parts["gmm"].predict_proba(X))
    np.testing.assert_array_equal(back["knn"].predict(z.apply(X)), parts["knn"].predict(z.apply(X)))
    first = p.read_bytes()
    save_models(p, back, meta)
    assert p.read_bytes() == first
