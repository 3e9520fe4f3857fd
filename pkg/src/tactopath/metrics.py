"""Confusion-matrix analytics: class-wise sensitivity/precision matrices and
macro-averaged accuracy, recall, specificity, precision."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .phantoms import ParisType

# Fixed class order for all 4x4 matrices.
CLASS_ORDER = (ParisType.IP, ParisType.IIA, ParisType.IIC, ParisType.LST)
CLASS_NAMES = tuple(c.name for c in CLASS_ORDER)
N_CLASSES = len(CLASS_ORDER)


def confusion(preds, labels, n_classes: int = N_CLASSES) -> np.ndarray:
    """counts[t][p] = number of samples with true class t predicted p."""
    preds = np.asarray(preds, dtype=int)
    labels = np.asarray(labels, dtype=int)
    if preds.shape != labels.shape:
        raise ValueError(f"length mismatch: {len(preds)} preds, {len(labels)} labels")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (labels, preds), 1)
    return counts


def normalize(matrix: np.ndarray, axis: str) -> np.ndarray:
    """Row-normalize for class-wise sensitivity, column-normalize for
    class-wise precision. Zero rows/columns stay zero."""
    m = np.asarray(matrix, dtype=np.float64)
    if axis == "row":
        sums = m.sum(axis=1, keepdims=True)
    elif axis == "column":
        sums = m.sum(axis=0, keepdims=True)
    else:
        raise ValueError("axis must be 'row' or 'column'")
    return np.divide(m, sums, out=np.zeros_like(m), where=sums != 0)


@dataclass(frozen=True)
class MetricsReport:
    e_acc: float
    e_rec: float
    e_spec: float
    e_prec: float
    sensitivity_matrix: np.ndarray  # row-normalized
    precision_matrix: np.ndarray  # column-normalized

    def to_dict(self) -> dict:
        return {
            "e_acc": self.e_acc,
            "e_rec": self.e_rec,
            "e_spec": self.e_spec,
            "e_prec": self.e_prec,
            "sensitivity_matrix": self.sensitivity_matrix.tolist(),
            "precision_matrix": self.precision_matrix.tolist(),
            "class_order": list(CLASS_NAMES),
        }


def aggregate(matrix: np.ndarray) -> MetricsReport:
    """Macro-averaged one-vs-rest metrics from a counts matrix.

    Classes with a zero denominator are excluded from the relevant macro mean.
    """
    m = np.asarray(matrix, dtype=np.float64)
    total = m.sum()
    if total == 0:
        raise ValueError("empty confusion matrix")
    tp = np.diag(m)
    fn = m.sum(axis=1) - tp
    fp = m.sum(axis=0) - tp
    tn = total - tp - fn - fp

    def macro(num, den):
        valid = den > 0
        if not valid.any():
            return 0.0
        return float((num[valid] / den[valid]).mean())

    return MetricsReport(
        e_acc=float(tp.sum() / total),
        e_rec=macro(tp, tp + fn),
        e_spec=macro(tn, tn + fp),
        e_prec=macro(tp, tp + fp),
        sensitivity_matrix=normalize(m, "row"),
        precision_matrix=normalize(m, "column"),
    )


def format_table(matrix: np.ndarray, title: str) -> str:
    lines = [title, "true\\pred " + " ".join(f"{n:>8s}" for n in CLASS_NAMES)]
    for i, name in enumerate(CLASS_NAMES):
        row = " ".join(
            f"{matrix[i, j]:8.3f}" if np.issubdtype(matrix.dtype, np.floating)
            else f"{int(matrix[i, j]):8d}"
            for j in range(matrix.shape[1])
        )
        lines.append(f"{name:>9s} {row}")
    return "\n".join(lines)
