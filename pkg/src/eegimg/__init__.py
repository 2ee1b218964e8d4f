"""EEG-to-image encoding, texture features, multi-modal fusion, classifiers."""

__version__ = "0.1.0"

from .classify import (EvalReport, KnnModel, SoftmaxConfig, SoftmaxModel, SvmModel,
                       evaluate, knn_fit, knn_predict, load_model, save_model,
                       softmax_fit, softmax_predict, softmax_proba, svm_fit,
                       svm_predict)
from .encoding import (EncodeConfig, EncodedTensor, encode_trial, minmax_normalize,
                       quantize_u8, read_tensor, replicate_channels, resize_bilinear,
                       stack_subjects, write_png, write_tensor)
from .errors import ConfigError, DataError, FormatError
from .features import (FeatureConfig, FeatureMatrix, FeatureVector, Glcm,
                       export_features, extract_all, extract_tensor, glcm, haralick,
                       hu_moments, import_features, lbp_histogram)
from .fusion import (RidgeModel, ScalerParams, apply_scaler, average_subjects,
                     concat_features, fit_scaler, ridge_fit, ridge_predict,
                     vstack_features)
from .splitting import (SplitAssignment, apply_split, load_assignment,
                        save_assignment, stratified_group_split)
from .trials import (SyntheticSpec, Trial, TrialSet, crop_window, drop_class,
                     generate_synthetic, ingest, write_trialset, zscore_channels)
