"""From-scratch learners used by the classification and clustering stages."""

from .evaluate import (
    Confusion,
    accuracy,
    confusion_matrix,
    grid_search_cv,
    permutation_importance,
    stratified_kfold,
    stratified_split,
)
from .gmm import GmmModel, gmm_bic, gmm_fit_em, gmm_responsibilities, n_parameters, select_k_by_bic
from .knn import KnnModel, knn_fit, knn_predict
from .pca import PcaModel, pca_fit, pca_transform
from .persist import FORMAT_VERSION, load_models, save_models
from .svm import SvmModel, rbf_kernel, svm_predict, svm_train

__all__ = [
    "Confusion",
    "accuracy",
    "confusion_matrix",
    "grid_search_cv",
    "permutation_importance",
    "stratified_kfold",
    "stratified_split",
    "GmmModel",
    "gmm_bic",
    "gmm_fit_em",
    "gmm_responsibilities",
    "n_parameters",
    "select_k_by_bic",
    "KnnModel",
    "knn_fit",
    "knn_predict",
    "PcaModel",
    "pca_fit",
    "pca_transform",
    "FORMAT_VERSION",
    "load_models",
    "save_models",
    "SvmModel",
    "rbf_kernel",
    "svm_predict",
    "svm_train",
]
