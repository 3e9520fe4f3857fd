#!/usr/bin/env python3
"""Sweep t-SNE perplexity over one stiffness batch and report cluster metrics.

Renders one (type, variation) batch at 3 materials x 4 forces, embeds it at
each perplexity, and prints silhouette / 3-NN agreement so the default
perplexity choice can be sanity-checked quickly.

Usage: python3 scripts/perplexity_sweep.py [--type IIC] [--variation 1]
"""
from __future__ import annotations

import argparse

import numpy as np

from tactopath.phantoms import MATERIALS, ParisType, PolypPhantom, render
from tactopath.stiffness import STIFFNESS_FORCES, stiffness_report
from tactopath.tsne import TsneConfig, tsne_run


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--type", default="IIC", choices=[t.name for t in ParisType])
    ap.add_argument("--variation", type=int, default=1)
    ap.add_argument("--perplexities", default="2,3,5,7,9")
    ap.add_argument("--iters", type=int, default=5000)
    ap.add_argument("--image-size", type=int, default=224)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    imgs, mats, forces = [], [], []
    for mat in MATERIALS:
        for force in STIFFNESS_FORCES:
            res = render(PolypPhantom(ParisType[args.type], args.variation, mat),
                         force, seed=args.seed,
                         width=args.image_size, height=args.image_size)
            gray = res.frame.as_array().astype(float).mean(axis=2)
            imgs.append(gray.ravel() / 255.0)
            mats.append(mat.name)
            forces.append(force)
    X = np.stack(imgs)

    print(f"batch {args.type} v{args.variation} ({len(X)} frames)")
    for perp in (float(p) for p in args.perplexities.split(",")):
        emb = tsne_run(X, TsneConfig(perplexity=perp, iterations=args.iters,
                                     seed=args.seed))
        rep = stiffness_report(emb.points, mats, forces)
        per_force = " ".join(f"{f:g}N:{v:.2f}" for f, v in sorted(rep.per_force.items()))
        print(f"  perplexity {perp:g}: silhouette {rep.silhouette:+.3f} "
              f"knn {rep.knn_agreement:.2f} [{per_force}] "
              f"final KL {emb.kl_trace[-1]:.3f}")


if __name__ == "__main__":
    main()
