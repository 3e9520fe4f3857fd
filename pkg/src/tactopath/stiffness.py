"""Stiffness-cluster separability: batch assembly for the material study and
quantitative cluster metrics (silhouette, 3-NN label agreement) on t-SNE
embeddings."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .imageproc import ManifestEntry, load_image, resize_bilinear, to_grayscale
from .tsne import pairwise_sq_dists

STIFFNESS_FORCES = (0.2, 0.4, 0.6, 0.8)
STIFFNESS_VARIATIONS = (1, 2)
MATERIAL_NAMES = ("M1", "M2", "M3")
KNN_K = 3


def knn_agreement(points: np.ndarray, labels, k: int = KNN_K,
                  query: np.ndarray | None = None) -> float:
    """Fraction of (query) points whose k nearest neighbors (excluding self)
    share their label."""
    labels = np.asarray(labels)
    n = len(points)
    d2 = pairwise_sq_dists(np.asarray(points, dtype=np.float64))
    np.fill_diagonal(d2, np.inf)
    idx = np.arange(n) if query is None else np.asarray(query)
    k = min(k, n - 1)
    hits = 0.0
    for i in idx:
        nn = np.argpartition(d2[i], k)[:k]
        hits += (labels[nn] == labels[i]).mean()
    return float(hits / len(idx))


def silhouette_mean(points: np.ndarray, labels) -> tuple[float, bool]:
    """Mean silhouette coefficient; returns (value, degenerate_flag).

    Labels with fewer than 2 points are excluded. All-identical points give
    0 by convention with the degenerate flag set.
    """
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels)
    d = np.sqrt(pairwise_sq_dists(points))
    if np.all(d < 1e-12):
        return 0.0, True
    uniq, counts = np.unique(labels, return_counts=True)
    valid = {u for u, c in zip(uniq, counts) if c >= 2}
    scores = []
    for i in range(len(points)):
        li = labels[i]
        if li not in valid:
            continue
        same = (labels == li)
        same[i] = False
        a = d[i][same].mean()
        b = min(
            d[i][labels == u].mean()
            for u in uniq if u != li
        ) if len(uniq) > 1 else 0.0
        denom = max(a, b)
        scores.append(0.0 if denom == 0 else (b - a) / denom)
    if not scores:
        return 0.0, True
    return float(np.mean(scores)), False


@dataclass
class ClusterReport:
    silhouette: float
    degenerate: bool
    knn_agreement: float
    per_force: dict = field(default_factory=dict)  # force -> knn agreement

    def to_dict(self) -> dict:
        return {
            "silhouette": self.silhouette,
            "degenerate": self.degenerate,
            "knn_agreement": self.knn_agreement,
            "per_force": {f"{k:g}": v for k, v in self.per_force.items()},
        }


def stiffness_report(points: np.ndarray, materials,
                     forces=None) -> ClusterReport:
    """Cluster-separability metrics on a 2-D embedding labeled by material.

    When per-point forces are given, each force level also gets a sub-metric:
    the 3-NN agreement restricted to query points at that force (neighbors
    are searched in the full embedding).
    """
    materials = np.asarray(materials)
    if len(materials) != len(points):
        raise ValueError("label count must equal point count")
    sil, degenerate = silhouette_mean(points, materials)
    report = ClusterReport(
        silhouette=sil, degenerate=degenerate,
        knn_agreement=knn_agreement(points, materials),
    )
    if forces is not None:
        forces = np.asarray(forces, dtype=np.float64)
        for f in np.unique(forces):
            q = np.flatnonzero(forces == f)
            report.per_force[float(f)] = knn_agreement(points, materials, query=q)
    return report


@dataclass(frozen=True)
class StiffnessBatch:
    paris_type: str
    variation: int
    images: np.ndarray    # (12, 224*224) grayscale rows, one per (material, force)
    materials: tuple      # length 12
    forces: tuple         # length 12


def build_stiffness_batches(entries: list[ManifestEntry], root: Path,
                            sidecar: dict | None = None,
                            image_size: int = 224) -> list[StiffnessBatch]:
    """Group un-augmented frames into 8 batches, one per (type, variation in
    {1, 2}), each holding 3 materials x 4 forces grayscale images."""
    wanted: dict[tuple, dict] = {}
    for e in entries:
        if e.aug_tag not in ("", "orig"):
            continue
        if e.variation not in STIFFNESS_VARIATIONS:
            continue
        key = (e.paris_type, e.variation)
        slot = (e.material, round(e.force_n, 3))
        wanted.setdefault(key, {})[slot] = e

    types = sorted({k[0] for k in wanted})
    batches = []
    for ptype in types:
        for var in STIFFNESS_VARIATIONS:
            group = wanted.get((ptype, var), {})
            if not group:
                # a wholly absent (type, variation) is simply not a batch;
                # only a partially present one is an error
                continue
            images, mats, forces = [], [], []
            for mat in MATERIAL_NAMES:
                for f in STIFFNESS_FORCES:
                    entry = group.get((mat, round(f, 3)))
                    if entry is None:
                        raise ValueError(
                            f"missing frame for {ptype} v{var} {mat} at {f} N"
                        )
                    img = load_image(Path(root) / entry.path, sidecar)
                    img = to_grayscale(resize_bilinear(img, image_size, image_size))
                    images.append(img.as_array().ravel() / 255.0)
                    mats.append(mat)
                    forces.append(f)
            batches.append(StiffnessBatch(
                paris_type=ptype, variation=var,
                images=np.stack(images), materials=tuple(mats), forces=tuple(forces),
            ))
    return batches


def save_embedding_csv(path: Path, points: np.ndarray, materials, forces,
                       paris_type: str, variation: int) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["point_id", "x", "y", "material", "force_n", "type", "variation"])
        for i, (p, m, f) in enumerate(zip(points, materials, forces)):
            writer.writerow([i, f"{p[0]:.10g}", f"{p[1]:.10g}", m, f"{f:g}",
                             paris_type, variation])


def save_cluster_report(path: Path, reports: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(reports, fh, indent=2, sort_keys=True)
        fh.write("\n")
