from .layers import Conv2d, Dense, GlobalAvgPool, ReLU, softmax, softmax_cross_entropy
from .network import DilatedResNet, DilatedResNetConfig, load_weights, save_weights
from .optimizer import AdaBound, lower_bound, upper_bound
from .training import FoldSplit, TrainConfig, stratified_kfold, train

__all__ = [
    "Conv2d", "Dense", "GlobalAvgPool", "ReLU", "softmax", "softmax_cross_entropy",
    "DilatedResNet", "DilatedResNetConfig", "load_weights", "save_weights",
    "AdaBound", "lower_bound", "upper_bound",
    "FoldSplit", "TrainConfig", "stratified_kfold", "train",
]
