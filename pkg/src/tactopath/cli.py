"""Command-line entry point: one binary, one subcommand per workflow stage.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
import zlib
from pathlib import Path

import numpy as np

from . import __version__
from .device import (InteractionDetectorConfig, SessionRecord,
                     parse_event_script, run_session)
from .imageproc import (AugmentationPlan, ImageU8, ManifestEntry,
                        augment_dataset, read_manifest, write_manifest)
from .imageproc import save_image as _save_image
from .metrics import CLASS_NAMES, aggregate, confusion, format_table, normalize
from .nn.network import DilatedResNet, DilatedResNetConfig, load_weights, save_weights
from .nn.training import (CLASS_INDEX, TrainConfig, evaluate_pooled,
                          load_dataset, stratified_kfold, train)
from .phantoms import (DEFAULT_HEIGHT, DEFAULT_WIDTH, MATERIALS, ParisType,
                       PolypPhantom, phantom_catalog, render)
from .stiffness import (build_stiffness_batches, save_cluster_report,
                        save_embedding_csv, stiffness_report)
from .tsne import TsneConfig, tsne_run
from .wire import ReassemblyBuffer, UdpTransport, receive_session, stream_session

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

DEFAULT_FORCES = (0.2, 0.4, 0.6, 0.8)
SOURCE_FORCE_N = 0.6  # canonical force for the classification source images


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 (not 2) on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _parse_forces(text: str) -> tuple[float, ...]:
    try:
        forces = tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError as exc:
        raise ValueError(f"bad force list {text!r}: {exc}") from exc
    if not forces:
        raise ValueError("empty force list")
    return forces


def _crc32_file(path: Path) -> str:
    return f"{zlib.crc32(Path(path).read_bytes()):08x}"


def _log(args, msg: str) -> None:
    if getattr(args, "verbose", False):
        print(msg, file=sys.stderr)


def _apply_config_file(args) -> None:
    """Apply key=value overrides from --config onto parsed args."""
    if not getattr(args, "config", None):
        return
    for lineno, line in enumerate(Path(args.config).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{args.config}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if not hasattr(args, key):
            raise ValueError(f"{args.config}:{lineno}: unknown key {key!r}")
        current = getattr(args, key)
        if isinstance(current, bool):
            setattr(args, key, value.lower() in ("1", "true", "yes"))
        elif isinstance(current, int):
            setattr(args, key, int(value))
        elif isinstance(current, float):
            setattr(args, key, float(value))
        else:
            setattr(args, key, value)


# ---------------------------------------------------------------------------
# phantom gen

def _frame_filename(phantom: PolypPhantom, force: float) -> str:
    return (f"{phantom.paris_type.name}_v{phantom.variation}"
            f"_{phantom.material.name}_{force:g}N.png")


def cmd_phantom_gen(args) -> int:
    forces = _parse_forces(args.forces)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for phantom in phantom_catalog():
        for force in forces:
            frame = render(phantom, force, seed=args.seed,
                           width=args.width, height=args.height).frame
            name = _frame_filename(phantom, force)
            img = ImageU8(width=frame.width, height=frame.height,
                          channels=3, data=frame.rgb)
            _save_image(img, out / name)
            entries.append(ManifestEntry(
                path=name, paris_type=phantom.paris_type.name,
                variation=phantom.variation, material=phantom.material.name,
                force_n=force,
            ))
    write_manifest(entries, out / "manifest.csv")
    _log(args, f"wrote {len(entries)} frames + manifest to {out}")
    print(f"{len(entries)} frames")
    return EXIT_OK


# ---------------------------------------------------------------------------
# device run

def _ramp_frame_source(phantom: PolypPhantom, seed: int, width: int, height: int):
    """Frame source ramping force 0.2 -> 0.8 N and back, one step per frame."""
    ramp = [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3]

    def source(frame_idx: int, timestamp_us: int):
        force = ramp[frame_idx % len(ramp)]
        return render(phantom, force, seed=seed + frame_idx,
                      width=width, height=height,
                      timestamp_us=timestamp_us).frame

    return source


def cmd_device_run(args) -> int:
    events = parse_event_script(Path(args.script).read_text())
    phantom = PolypPhantom(ParisType[args.paris_type], args.variation,
                           next(m for m in MATERIALS if m.name == args.material))
    source = _ramp_frame_source(phantom, args.seed, args.width, args.height)
    record = run_session(source, events, InteractionDetectorConfig(),
                         session_id=args.session_id, fps=args.fps)
    out = Path(args.out)
    record.save(out)
    print(f"{len(record.frames)} frames, {len(record.state_trace)} state changes")
    return EXIT_OK


# ---------------------------------------------------------------------------
# stream send / recv

def cmd_stream_send(args) -> int:
    record = SessionRecord.load(Path(args.session))
    transport = UdpTransport((args.host, args.port))
    try:
        stats = stream_session(record, transport, pace_s=args.pace)
    finally:
        transport.close()
    if stats.aborted:
        print("send aborted", file=sys.stderr)
        return EXIT_DATA
    print(f"sent {stats.frames_sent} frames in {stats.packets_sent} packets")
    return EXIT_OK


def cmd_stream_recv(args) -> int:
    record, counters = receive_session(args.port, timeout_s=args.timeout)
    out = Path(args.out)
    record.save(out)
    with open(out / "counters.json", "w", encoding="utf-8") as fh:
        json.dump(counters, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"delivered {counters['delivered_frames']} frames, "
          f"dropped {counters['dropped_frames']}, bad_crc {counters['bad_crc']}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# augment

def _consolidate(entries: list[ManifestEntry], root: Path, out: Path) -> list[ManifestEntry]:
    """Make a manifest self-contained in out: copy source images in and
    rewrite every path relative to out."""
    import shutil

    fixed = []
    for e in entries:
        src = Path(e.path)
        if e.aug_tag == "orig":
            dest = out / src.name
            if (root / src) != dest:
                shutil.copyfile(root / src, dest)
            new_path = src.name
        else:
            new_path = src.name if src.is_absolute() or str(src).startswith(str(out)) else str(src)
            new_path = Path(new_path).name
        fixed.append(ManifestEntry(
            path=new_path, paris_type=e.paris_type, variation=e.variation,
            material=e.material, force_n=e.force_n, split=e.split,
            aug_tag=e.aug_tag))
    return fixed


def _augment_to_dir(entries, root: Path, out: Path, factor: int, seed: int):
    out.mkdir(parents=True, exist_ok=True)
    plan = AugmentationPlan(factor=factor, seed=seed)
    result = augment_dataset(entries, plan, root=root, out_dir=out)
    fixed = _consolidate(result, root, out)
    write_manifest(fixed, out / "manifest.csv")
    return fixed


def cmd_augment(args) -> int:
    manifest = Path(args.manifest)
    entries = read_manifest(manifest)
    root = Path(args.root) if args.root else manifest.parent
    if args.force is not None:
        entries = [e for e in entries if abs(e.force_n - args.force) < 1e-9]
    if not entries:
        raise ValueError("no manifest rows selected for augmentation")
    result = _augment_to_dir(entries, root, Path(args.out), args.factor, args.seed)
    print(f"{len(result)} manifest rows")
    return EXIT_OK


# ---------------------------------------------------------------------------
# train / eval

def cmd_train(args) -> int:
    manifest = Path(args.manifest)
    entries = read_manifest(manifest)
    root = Path(args.root) if args.root else manifest.parent
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = TrainConfig(epochs=args.epochs, batch_size=args.batch_size,
                      k=args.folds, lr=args.lr, final_lr=args.final_lr,
                      input_size=args.input_size, seed=args.seed)
    report, split = train(entries, root, cfg)
    for i, fold in enumerate(report.folds):
        save_weights(fold.net, out / f"fold_{i}.weights")
    report.save(out / "train_report.json")
    with open(out / "split.json", "w", encoding="utf-8") as fh:
        json.dump({"folds": [list(f) for f in split.folds],
                   "eval_indices": list(split.eval_indices)},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    best = [f.best_val_accuracy for f in report.folds]
    print("fold best val accuracy: " + " ".join(f"{b:.4f}" for b in best))
    return EXIT_OK


def _run_eval(entries, root, weights_dir, out, input_size, folds):
    split_path = Path(weights_dir) / "split.json"
    if not split_path.exists():
        raise ValueError(f"missing {split_path}; run train first")
    with open(split_path, encoding="utf-8") as fh:
        split = json.load(fh)
    eval_entries = [entries[i] for i in split["eval_indices"]]
    xs, ys = load_dataset(eval_entries, root, input_size)
    nets = [load_weights(Path(weights_dir) / f"fold_{i}.weights") for i in range(folds)]
    preds, labels = evaluate_pooled(nets, xs, ys)
    matrix = confusion(preds, labels)
    report = aggregate(matrix)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "metrics.json", "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    np.savetxt(out / "confusion.csv", matrix, fmt="%d", delimiter=",")
    np.savetxt(out / "sensitivity.csv", normalize(matrix, "row"), delimiter=",")
    np.savetxt(out / "precision.csv", normalize(matrix, "column"), delimiter=",")
    tables = (format_table(matrix, "Confusion")
              + "\n" + format_table(normalize(matrix, "row"), "Sensitivity")
              + "\n" + format_table(normalize(matrix, "column"), "Precision"))
    (out / "tables.txt").write_text(tables)
    return report


def cmd_eval(args) -> int:
    manifest = Path(args.manifest)
    entries = read_manifest(manifest)
    root = Path(args.root) if args.root else manifest.parent
    report = _run_eval(entries, root, args.weights, args.out,
                       args.input_size, args.folds)
    print(f"accuracy {report.e_acc:.4f} "
          f"recall {report.e_rec:.4f} precision {report.e_prec:.4f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# embed

def cmd_embed(args) -> int:
    manifest = Path(args.manifest)
    entries = read_manifest(manifest)
    root = Path(args.root) if args.root else manifest.parent
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    batches = build_stiffness_batches(entries, root, image_size=args.image_size)
    cfg = TsneConfig(perplexity=args.perplexity, iterations=args.iters,
                     learning_rate=args.lr, seed=args.seed)
    reports = {}
    for batch in batches:
        emb = tsne_run(batch.images, cfg)
        rep = stiffness_report(emb.points, batch.materials, batch.forces)
        key = f"{batch.paris_type}_v{batch.variation}"
        reports[key] = rep.to_dict()
        save_embedding_csv(out / f"embedding_{key}.csv", emb.points,
                           batch.materials, batch.forces,
                           batch.paris_type, batch.variation)
    save_cluster_report(out / "cluster_report.json", reports)
    worst = min(r["knn_agreement"] for r in reports.values())
    print(f"{len(batches)} batches embedded, min knn_agreement {worst:.3f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# pipeline all

def cmd_pipeline_all(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    timings = {}
    report = {
        "version": __version__,
        "seed": args.seed,
        "sub_seeds": {"render": args.seed, "channel": args.seed + 1,
                      "augment": args.seed + 2, "train": args.seed + 3,
                      "embed": args.seed + 4},
        "stages": {},
        "input_digests": {},
    }

    # Stage 1: generate + stream through the lossy channel + reassemble.
    t0 = time.monotonic()
    forces = _parse_forces(args.forces)
    plan = [(phantom, force) for phantom in phantom_catalog() for force in forces]
    buf = ReassemblyBuffer()
    delivered_payloads = {}

    def sink(raw):
        frame = buf.ingest_packet(raw)
        if frame is not None:
            delivered_payloads[buf.last_frame_id] = frame

    from .wire import encode_frame, encode_session_end, encode_session_meta

    # sim-loss is applied per frame here: an affected frame loses one random
    # chunk, so the reassembler's drop-incomplete path discards it whole.
    # (Independent per-packet loss would leave essentially nothing for the
    # downstream stages: a 192-chunk frame survives p=0.1 with prob 0.9**192.)
    loss_rng = np.random.Generator(np.random.PCG64(args.seed + 1))
    sink(encode_session_meta(1, args.width, args.height, 10).to_bytes())
    for idx, (phantom, force) in enumerate(plan):
        frame = render(phantom, force, seed=args.seed,
                       width=args.width, height=args.height,
                       timestamp_us=idx * 100_000).frame
        pkts = encode_frame(frame, session_id=1, frame_id=idx + 1)
        lost = None
        if args.sim_loss and loss_rng.random() < args.sim_loss:
            lost = int(loss_rng.integers(len(pkts)))
        for cidx, pkt in enumerate(pkts):
            if cidx != lost:
                sink(pkt.to_bytes())
    sink(encode_session_end(1, len(plan)).to_bytes())

    frames_dir = out / "frames"
    frames_dir.mkdir(exist_ok=True)
    entries = []
    for frame_id, frame in sorted(delivered_payloads.items()):
        phantom, force = plan[frame_id - 1]
        name = _frame_filename(phantom, force)
        _save_image(ImageU8(width=frame.width, height=frame.height,
                            channels=3, data=frame.rgb), frames_dir / name)
        entries.append(ManifestEntry(
            path=name, paris_type=phantom.paris_type.name,
            variation=phantom.variation, material=phantom.material.name,
            force_n=force,
        ))
    write_manifest(entries, frames_dir / "manifest.csv")
    report["stages"]["stream"] = {
        "frames_sent": len(plan),
        **buf.counters,
    }
    report["input_digests"]["frames_manifest"] = _crc32_file(frames_dir / "manifest.csv")
    timings["generate_stream_s"] = time.monotonic() - t0
    _log(args, f"stream: {buf.counters}")

    # Stage 2: augment the canonical-force source images x6.
    t0 = time.monotonic()
    sources = [e for e in entries if abs(e.force_n - SOURCE_FORCE_N) < 1e-9]
    if not sources:
        raise ValueError("no source frames delivered at the canonical force")
    aug_dir = out / "augmented"
    fixed = _augment_to_dir(sources, frames_dir, aug_dir,
                            args.factor, args.seed + 2)
    report["stages"]["augment"] = {"source_images": len(sources),
                                   "manifest_rows": len(fixed)}
    report["input_digests"]["augmented_manifest"] = _crc32_file(aug_dir / "manifest.csv")
    timings["augment_s"] = time.monotonic() - t0

    # Stage 3: train.
    t0 = time.monotonic()
    train_dir = out / "train"
    train_dir.mkdir(exist_ok=True)
    cfg = TrainConfig(epochs=args.epochs, k=args.folds,
                      input_size=args.input_size, seed=args.seed + 3)
    train_report, split = train(fixed, aug_dir, cfg)
    for i, fold in enumerate(train_report.folds):
        save_weights(fold.net, train_dir / f"fold_{i}.weights")
    train_report.save(train_dir / "train_report.json")
    with open(train_dir / "split.json", "w", encoding="utf-8") as fh:
        json.dump({"folds": [list(f) for f in split.folds],
                   "eval_indices": list(split.eval_indices)},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    report["stages"]["train"] = {
        "folds": [f.best_val_accuracy for f in train_report.folds]}
    timings["train_s"] = time.monotonic() - t0
    _log(args, f"train: {report['stages']['train']}")

    # Stage 4: pooled evaluation on the held-out set.
    t0 = time.monotonic()
    eval_report = _run_eval(fixed, aug_dir, train_dir, out / "eval",
                            args.input_size, args.folds)
    report["stages"]["eval"] = eval_report.to_dict()
    timings["eval_s"] = time.monotonic() - t0
    _log(args, f"eval accuracy: {eval_report.e_acc:.4f}")

    # Stage 5: embed whichever stiffness batches survived the channel.
    t0 = time.monotonic()
    embed_dir = out / "embed"
    embed_dir.mkdir(exist_ok=True)
    try:
        batches = build_stiffness_batches(entries, frames_dir)
        skipped = []
    except ValueError:
        batches, skipped = [], []
        from .stiffness import MATERIAL_NAMES, STIFFNESS_FORCES, STIFFNESS_VARIATIONS
        have = {(e.paris_type, e.variation, e.material, round(e.force_n, 3))
                for e in entries}
        for ptype in [t.name for t in ParisType]:
            for var in STIFFNESS_VARIATIONS:
                needed = [(ptype, var, m, round(f, 3))
                          for m in MATERIAL_NAMES for f in STIFFNESS_FORCES]
                if all(n in have for n in needed):
                    sub = [e for e in entries
                           if (e.paris_type, e.variation) == (ptype, var)]
                    batches.extend(build_stiffness_batches(sub, frames_dir))
                else:
                    skipped.append(f"{ptype}_v{var}")
    tsne_cfg = TsneConfig(iterations=args.tsne_iters, seed=args.seed + 4)
    embed_reports = {}
    for batch in batches:
        emb = tsne_run(batch.images, tsne_cfg)
        rep = stiffness_report(emb.points, batch.materials, batch.forces)
        key = f"{batch.paris_type}_v{batch.variation}"
        embed_reports[key] = rep.to_dict()
        save_embedding_csv(embed_dir / f"embedding_{key}.csv", emb.points,
                           batch.materials, batch.forces,
                           batch.paris_type, batch.variation)
    save_cluster_report(embed_dir / "cluster_report.json", embed_reports)
    report["stages"]["embed"] = {"batches": sorted(embed_reports),
                                 "skipped": skipped,
                                 "reports": embed_reports}
    timings["embed_s"] = time.monotonic() - t0

    # Timings are wall-clock and excluded from determinism comparisons.
    with open(out / "timings.json", "w", encoding="utf-8") as fh:
        json.dump(timings, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out / "pipeline_report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"pipeline complete: eval accuracy {eval_report.e_acc:.4f}, "
          f"{len(embed_reports)} stiffness batches")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser wiring

def build_parser() -> _Parser:
    parser = _Parser(prog="tactopath", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)

    def add_common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--verbose", action="store_true")
        p.add_argument("--config", help="key=value override file")

    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    phantom = sub.add_parser("phantom", help="phantom catalog tools")
    psub = phantom.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    gen = psub.add_parser("gen", help="render the catalog to image files")
    add_common(gen)
    gen.add_argument("--out", required=True)
    gen.add_argument("--forces", default="0.2,0.4,0.6,0.8")
    gen.add_argument("--width", type=int, default=DEFAULT_WIDTH)
    gen.add_argument("--height", type=int, default=DEFAULT_HEIGHT)
    gen.set_defaults(func=cmd_phantom_gen)

    device = sub.add_parser("device", help="device state-machine simulator")
    dsub = device.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    drun = dsub.add_parser("run", help="replay a switch-event script")
    add_common(drun)
    drun.add_argument("--script", required=True)
    drun.add_argument("--out", required=True)
    drun.add_argument("--fps", type=int, default=10)
    drun.add_argument("--session-id", type=int, default=1)
    drun.add_argument("--paris-type", default="IP",
                      choices=[t.name for t in ParisType])
    drun.add_argument("--variation", type=int, default=1)
    drun.add_argument("--material", default="M2", choices=["M1", "M2", "M3"])
    drun.add_argument("--width", type=int, default=DEFAULT_WIDTH)
    drun.add_argument("--height", type=int, default=DEFAULT_HEIGHT)
    drun.set_defaults(func=cmd_device_run)

    stream = sub.add_parser("stream", help="wire protocol sender/receiver")
    ssub = stream.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    send = ssub.add_parser("send", help="stream a recorded session over UDP")
    add_common(send)
    send.add_argument("--session", required=True)
    send.add_argument("--host", default="127.0.0.1")
    send.add_argument("--port", type=int, required=True)
    send.add_argument("--pace", type=float, default=0.0)
    send.set_defaults(func=cmd_stream_send)
    recv = ssub.add_parser("recv", help="receive a session over UDP")
    add_common(recv)
    recv.add_argument("--port", type=int, required=True)
    recv.add_argument("--out", required=True)
    recv.add_argument("--timeout", type=float, default=5.0)
    recv.set_defaults(func=cmd_stream_recv)

    augment = sub.add_parser("augment", help="expand a dataset by augmentation")
    add_common(augment)
    augment.add_argument("--manifest", required=True)
    augment.add_argument("--root")
    augment.add_argument("--out", required=True)
    augment.add_argument("--factor", type=int, default=6)
    augment.add_argument("--force", type=float,
                         help="only augment rows at this force (N)")
    augment.set_defaults(func=cmd_augment)

    tr = sub.add_parser("train", help="stratified k-fold classifier training")
    add_common(tr)
    tr.add_argument("--manifest", required=True)
    tr.add_argument("--root")
    tr.add_argument("--out", required=True)
    tr.add_argument("--folds", type=int, default=4)
    tr.add_argument("--epochs", type=int, default=15)
    tr.add_argument("--batch-size", type=int, default=8)
    tr.add_argument("--lr", type=float, default=0.001)
    tr.add_argument("--final-lr", type=float, default=0.01)
    tr.add_argument("--input-size", type=int, default=64)
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="pooled evaluation on the held-out set")
    add_common(ev)
    ev.add_argument("--manifest", required=True)
    ev.add_argument("--root")
    ev.add_argument("--weights", required=True,
                    help="directory with fold_*.weights + split.json")
    ev.add_argument("--out", required=True)
    ev.add_argument("--folds", type=int, default=4)
    ev.add_argument("--input-size", type=int, default=64)
    ev.set_defaults(func=cmd_eval)

    em = sub.add_parser("embed", help="t-SNE stiffness embedding per batch")
    add_common(em)
    em.add_argument("--manifest", required=True)
    em.add_argument("--root")
    em.add_argument("--out", required=True)
    em.add_argument("--perplexity", type=float, default=5.0)
    em.add_argument("--iters", type=int, default=5000)
    em.add_argument("--lr", type=float, default=100.0)
    em.add_argument("--image-size", type=int, default=224)
    em.set_defaults(func=cmd_embed)

    pipeline = sub.add_parser("pipeline", help="end-to-end workflow")
    plsub = pipeline.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    pall = plsub.add_parser("all", help="generate, stream, augment, train, eval, embed")
    add_common(pall)
    pall.add_argument("--out", required=True)
    pall.add_argument("--forces", default="0.2,0.4,0.6,0.8")
    pall.add_argument("--sim-loss", type=float, default=0.0)
    pall.add_argument("--factor", type=int, default=6)
    pall.add_argument("--folds", type=int, default=4)
    pall.add_argument("--epochs", type=int, default=15)
    pall.add_argument("--input-size", type=int, default=64)
    pall.add_argument("--tsne-iters", type=int, default=5000)
    pall.add_argument("--width", type=int, default=DEFAULT_WIDTH)
    pall.add_argument("--height", type=int, default=DEFAULT_HEIGHT)
    pall.set_defaults(func=cmd_pipeline_all)

    return parser


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _apply_config_file(args)
        return args.func(args)
    except (ValueError, FileNotFoundError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
