"""Small dilated residual classifier for polyp-type recognition.

Topology: 3x3 stem (8 ch, stride 2), three residual blocks with
(channels, dilation) = (8, 1), (16, 2), (16, 4), global average pooling,
and a 4-way dense head.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .layers import Conv2d, Dense, GlobalAvgPool, ReLU, softmax, softmax_cross_entropy

N_CLASSES = 4


@dataclass(frozen=True)
class DilatedResNetConfig:
    input_size: int = 224
    in_channels: int = 3
    stem_channels: int = 8
    blocks: tuple = ((8, 1), (16, 2), (16, 4))  # (channels, dilation)
    n_classes: int = N_CLASSES
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "input_size": self.input_size,
            "in_channels": self.in_channels,
            "stem_channels": self.stem_channels,
            "blocks": [list(b) for b in self.blocks],
            "n_classes": self.n_classes,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DilatedResNetConfig":
        return cls(
            input_size=d["input_size"], in_channels=d["in_channels"],
            stem_channels=d["stem_channels"],
            blocks=tuple(tuple(b) for b in d["blocks"]),
            n_classes=d["n_classes"], seed=d.get("seed", 0),
        )


class ResidualBlock:
    """Two 3x3 convs at a fixed dilation with an identity (or 1x1-projected)
    skip; ReLU after each conv and after the add."""

    def __init__(self, in_ch: int, out_ch: int, dilation: int,
                 rng: np.random.Generator, name: str):
        self.conv1 = Conv2d(in_ch, out_ch, dilation=dilation, rng=rng, name=f"{name}.conv1")
        self.relu1 = ReLU()
        self.conv2 = Conv2d(out_ch, out_ch, dilation=dilation, rng=rng, name=f"{name}.conv2")
        self.proj = (
            Conv2d(in_ch, out_ch, k=1, rng=rng, name=f"{name}.proj")
            if in_ch != out_ch else None
        )
        self.relu_out = ReLU()

    def forward(self, x):
        y = self.conv2.forward(self.relu1.forward(self.conv1.forward(x)))
        skip = self.proj.forward(x) if self.proj is not None else x
        return self.relu_out.forward(y + skip)

    def backward(self, grad):
        grad = self.relu_out.backward(grad)
        dskip = self.proj.backward(grad) if self.proj is not None else grad
        dmain = self.conv1.backward(self.relu1.backward(self.conv2.backward(grad)))
        return dmain + dskip

    def params(self):
        yield from self.conv1.params()
        yield from self.conv2.params()
        if self.proj is not None:
            yield from self.proj.params()


class DilatedResNet:
    def __init__(self, config: DilatedResNetConfig):
        self.config = config
        rng = np.random.default_rng(config.seed)
        self.stem = Conv2d(config.in_channels, config.stem_channels, stride=2,
                           rng=rng, name="stem")
        self.stem_relu = ReLU()
        blocks = []
        prev = config.stem_channels
        for i, (ch, dil) in enumerate(config.blocks):
            blocks.append(ResidualBlock(prev, ch, dil, rng, name=f"block{i}"))
            prev = ch
        self.blocks = blocks
        self.pool = GlobalAvgPool()
        self.head = Dense(prev, config.n_classes, rng=rng, name="head")

    # ------------------------------------------------------------------
    def forward_logits(self, x: np.ndarray) -> np.ndarray:
        n, c, h, w = x.shape
        if h != self.config.input_size or w != self.config.input_size:
            raise ValueError(
                f"expected {self.config.input_size}x{self.config.input_size} input, got {h}x{w}"
            )
        y = self.stem_relu.forward(self.stem.forward(x))
        for block in self.blocks:
            y = block.forward(y)
        return self.head.forward(self.pool.forward(y))

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Class probabilities, one 4-vector per batch row."""
        return softmax(self.forward_logits(x))

    def backward_from_logits(self, dlogits: np.ndarray) -> None:
        grad = self.pool.backward(self.head.backward(dlogits))
        for block in reversed(self.blocks):
            grad = block.backward(grad)
        self.stem.backward(self.stem_relu.backward(grad))

    def loss_and_grads(self, x: np.ndarray, labels: np.ndarray):
        """Mean cross-entropy loss; accumulates parameter gradients."""
        self.zero_grads()
        logits = self.forward_logits(x)
        loss, dlogits, probs = softmax_cross_entropy(logits, labels)
        self.backward_from_logits(dlogits)
        return loss, probs

    # ------------------------------------------------------------------
    def named_params(self):
        yield from self.stem.params()
        for block in self.blocks:
            yield from block.params()
        yield from self.head.params()

    def param_dict(self) -> dict[str, np.ndarray]:
        return {name: p for name, p, _ in self.named_params()}

    def grad_dict(self) -> dict[str, np.ndarray]:
        return {name: g for name, _, g in self.named_params()}

    def zero_grads(self) -> None:
        for _, _, g in self.named_params():
            g[...] = 0.0

    def set_params(self, values: dict[str, np.ndarray]) -> None:
        for name, p, _ in self.named_params():
            p[...] = values[name]

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: p.copy() for name, p, _ in self.named_params()}


# ---------------------------------------------------------------------------
# weights file: magic "TPNW", u32 version, u32 json-config length, config,
# then per tensor: u32 name length, name, u32 ndim, u32 dims..., f64 LE values

WEIGHTS_MAGIC = b"TPNW"
WEIGHTS_VERSION = 1


def save_weights(net: DilatedResNet, path) -> None:
    cfg = json.dumps(net.config.to_dict(), sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(WEIGHTS_MAGIC)
        fh.write(struct.pack("<II", WEIGHTS_VERSION, len(cfg)))
        fh.write(cfg)
        for name, p, _ in net.named_params():
            nb = name.encode()
            fh.write(struct.pack("<I", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<I", p.ndim))
            fh.write(struct.pack(f"<{p.ndim}I", *p.shape))
            fh.write(p.astype("<f8").tobytes())


def load_weights(path) -> DilatedResNet:
    with open(path, "rb") as fh:
        if fh.read(4) != WEIGHTS_MAGIC:
            raise ValueError("not a weights file (bad magic)")
        version, cfg_len = struct.unpack("<II", fh.read(8))
        if version != WEIGHTS_VERSION:
            raise ValueError(f"unsupported weights version {version}")
        config = DilatedResNetConfig.from_dict(json.loads(fh.read(cfg_len)))
        net = DilatedResNet(config)
        values = {}
        while True:
            head = fh.read(4)
            if not head:
                break
            (nlen,) = struct.unpack("<I", head)
            name = fh.read(nlen).decode()
            (ndim,) = struct.unpack("<I", fh.read(4))
            shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
            count = int(np.prod(shape)) if ndim else 1
            values[name] = np.frombuffer(fh.read(8 * count), dtype="<f8").reshape(shape).copy()
    net.set_params(values)
    return net
