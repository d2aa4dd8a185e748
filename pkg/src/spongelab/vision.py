"""Small ReLU CNN with activation-density instrumentation.

Layers are valid-padding, stride-1 convolutions and fully connected layers.
Every hidden layer is followed by a ReLU; the last layer emits raw logits.
The forward pass records one trace entry per tensor:

* ``input``: the image itself (no multiplies, no DRAM; layers account for
  reading their own inputs);
* one entry per layer, whose activation counts describe the layer output
  after its nonlinearity.

Overall density is nonzero/total over all of these tensors; post-ReLU
density uses only the outputs of ReLU layers.

The reference model's first layer is a bank of brightness detectors whose
thresholds sit above the mean of a uniform random patch. Natural-like images
(bright, smooth backgrounds with a dark class blob) therefore switch on more
units than uniform noise does.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .energy import ActivationTrace, LayerIO, LayerTraceEntry, count_matmul, layer_dram_words

log = logging.getLogger(__name__)

IMAGE_HEADER = "# spongelab-image v1"
IMAGE_SUFFIX = ".img"


@dataclass(frozen=True, eq=False)
class Conv2d:
    weight: np.ndarray  # (out, in, kh, kw)
    bias: np.ndarray | None = None
    relu: bool = True
    name: str = "conv"

    def out_shape(self, in_shape):
        c, h, w = in_shape
        o, ci, kh, kw = self.weight.shape
        if ci != c:
            raise ValueError(f"{self.name}: expects {ci} input channels, got {c}")
        if h < kh or w < kw:
            raise ValueError(f"{self.name}: input {h}x{w} smaller than kernel {kh}x{kw}")
        return (o, h - kh + 1, w - kw + 1)


@dataclass(frozen=True, eq=False)
class Linear:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray | None = None
    relu: bool = False
    name: str = "fc"

    def out_shape(self, in_shape):
        n = int(np.prod(in_shape))
        if self.weight.shape[1] != n:
            raise ValueError(f"{self.name}: expects {self.weight.shape[1]} inputs, got {n}")
        return (self.weight.shape[0],)


class CnnModel:
    def __init__(self, layers: Sequence, input_shape: tuple[int, int, int], n_classes: int):
        self.layers = list(layers)
        self.input_shape = tuple(input_shape)
        self.n_classes = n_classes
        if not self.layers:
            raise ValueError("model needs at least one layer")
        names = [l.name for l in self.layers]
        if len(set(names)) != len(names) or "input" in names:
            raise ValueError("layer names must be unique and not 'input'")
        shapes = [self.input_shape]
        for layer in self.layers:
            shapes.append(layer.out_shape(shapes[-1]))
            if layer.bias is not None and layer.bias.shape != (layer.weight.shape[0],):
                raise ValueError(f"{layer.name}: bias shape {layer.bias.shape}")
        self.shapes = shapes
        if shapes[-1] != (n_classes,):
            raise ValueError(f"last layer emits {shapes[-1]}, expected ({n_classes},)")
        for layer in self.layers[:-1]:
            if not layer.relu:
                raise ValueError(f"hidden layer {layer.name} must be followed by a ReLU")

    @property
    def n_pixels(self) -> int:
        return int(np.prod(self.input_shape))


class DensityReport(NamedTuple):
    post_relu_density: float
    overall_density: float
    per_layer: dict
    label: int | None = None


class ForwardResult(NamedTuple):
    logits: np.ndarray
    trace: ActivationTrace
    density: DensityReport


# -- layer arithmetic -------------------------------------------------------------


def _patches(x: np.ndarray, kh: int, kw: int) -> np.ndarray:
    c = x.shape[0]
    win = sliding_window_view(x, (kh, kw), axis=(1, 2))  # (c, h', w', kh, kw)
    hh, ww = win.shape[1], win.shape[2]
    return win.transpose(1, 2, 0, 3, 4).reshape(hh * ww, c * kh * kw)


def _affine(layer, x):
    """Pre-activation output, plus the (operand, weight) pair that was multiplied."""
    if isinstance(layer, Conv2d):
        o, c, kh, kw = layer.weight.shape
        cols = _patches(x, kh, kw)
        wmat = layer.weight.reshape(o, -1).T
        z = cols @ wmat
        if layer.bias is not None:
            z = z + layer.bias
        hh, ww = x.shape[1] - kh + 1, x.shape[2] - kw + 1
        return z.T.reshape(o, hh, ww), (cols, wmat)
    flat = x.reshape(-1)
    z = layer.weight @ flat
    if layer.bias is not None:
        z = z + layer.bias
    return z, (flat[None], layer.weight.T)


def _weight_words(layer) -> int:
    return layer.weight.size + (0 if layer.bias is None else layer.bias.size)


def _check_image(model: CnnModel, image) -> np.ndarray:
    x = np.asarray(image, dtype=np.float64)
    if x.shape != model.input_shape:
        raise ValueError(f"image shape {x.shape} does not match model input {model.input_shape}")
    return x


def _density(trace: ActivationTrace, model: CnnModel, label=None) -> DensityReport:
    relu_names = {l.name for l in model.layers if l.relu}
    per_layer = {e.layer_name: e.act_nonzero / e.act_total for e in trace}
    tot = sum(e.act_total for e in trace)
    nz = sum(e.act_nonzero for e in trace)
    rt = sum(e.act_total for e in trace if e.layer_name in relu_names)
    rz = sum(e.act_nonzero for e in trace if e.layer_name in relu_names)
    return DensityReport(rz / rt if rt else 0.0, nz / tot, per_layer, label)


def cnn_forward(model: CnnModel, image, label: int | None = None) -> ForwardResult:
    x = _check_image(model, image)
    n = x.size
    entries = [LayerTraceEntry("input", 0, 0, n, int(np.count_nonzero(x)), 0, 0)]
    for layer in model.layers:
        z, (xa, wa) = _affine(layer, x)
        a = np.maximum(z, 0.0) if layer.relu else z
        mt, mz = count_matmul(xa, wa)
        out_nz = int(np.count_nonzero(a))
        io = LayerIO((x.size,), (int(np.count_nonzero(x)),), _weight_words(layer), a.size, out_nz)
        raw, comp = layer_dram_words(io)
        entries.append(LayerTraceEntry(layer.name, mt, mz, a.size, out_nz, raw, comp))
        x = a
    trace = ActivationTrace(entries)
    return ForwardResult(x, trace, _density(trace, model, label))


def predict(model: CnnModel, image) -> int:
    x = _check_image(model, image)
    for layer in model.layers:
        z, _ = _affine(layer, x)
        x = np.maximum(z, 0.0) if layer.relu else z
    return int(np.argmax(x))


# -- gradient of the activation-norm objective ------------------------------------


def activation_norm_objective(model: CnnModel, image) -> tuple[float, np.ndarray]:
    """``-sum_l ||a_l||_2`` over every layer output, and its gradient in the image.

    Layers whose output is entirely zero contribute neither value nor
    gradient (the norm is not differentiable there; zero is the subgradient
    that keeps the search moving through the other layers).
    """
    x = _check_image(model, image)
    inputs, pre, outs = [], [], []
    for layer in model.layers:
        inputs.append(x)
        z, _ = _affine(layer, x)
        a = np.maximum(z, 0.0) if layer.relu else z
        pre.append(z)
        outs.append(a)
        x = a
    loss = 0.0
    norms = []
    for a in outs:
        nrm = float(np.sqrt(np.sum(a * a)))
        norms.append(nrm)
        loss -= nrm
    grad_a = np.zeros_like(outs[-1])
    for i in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[i]
        if norms[i] > 0:
            grad_a = grad_a - outs[i] / norms[i]
        grad_z = grad_a * (pre[i] > 0) if layer.relu else grad_a
        grad_a = _affine_backward(layer, inputs[i], grad_z)
    return loss, grad_a


def _affine_backward(layer, x, grad_z):
    if isinstance(layer, Linear):
        return (layer.weight.T @ grad_z).reshape(x.shape)
    o, c, kh, kw = layer.weight.shape
    hh, ww = grad_z.shape[1], grad_z.shape[2]
    g2 = grad_z.reshape(o, hh * ww).T  # (h'w', o)
    dcols = (g2 @ layer.weight.reshape(o, -1)).reshape(hh, ww, c, kh, kw)
    dx = np.zeros_like(x)
    for i in range(kh):
        for j in range(kw):
            dx[:, i : i + hh, j : j + ww] += dcols[:, :, :, i, j].transpose(2, 0, 1)
    return dx


# -- interval bound propagation ---------------------------------------------------


def ibp_max_density(model: CnnModel, lower=0.0, upper=1.0) -> DensityReport:
    """Upper bound on every density over all images inside ``[lower, upper]``.

    Bounds are propagated as center and radius through each affine layer
    and clamped through ReLU. A ReLU output is provably zero iff its
    pre-activation upper bound is at most zero; any other value is provably
    zero only when both bounds are exactly zero.
    """
    lo = np.broadcast_to(np.asarray(lower, dtype=np.float64), model.input_shape)
    hi = np.broadcast_to(np.asarray(upper, dtype=np.float64), model.input_shape)
    if np.any(lo > hi):
        raise ValueError("lower bound exceeds upper bound")
    counts = {"input": (lo.size, int(np.count_nonzero(~((lo == 0) & (hi == 0)))))}
    relu_names = set()
    for layer in model.layers:
        center, radius = (lo + hi) / 2, (hi - lo) / 2
        z_c, _ = _affine(layer, center)
        abs_layer = type(layer)(np.abs(layer.weight), None, layer.relu, layer.name)
        z_r, _ = _affine(abs_layer, radius)
        z_lo, z_hi = z_c - z_r, z_c + z_r
        if layer.relu:
            relu_names.add(layer.name)
            lo, hi = np.maximum(z_lo, 0.0), np.maximum(z_hi, 0.0)
            possible = z_hi > 0
        else:
            lo, hi = z_lo, z_hi
            possible = ~((z_lo == 0) & (z_hi == 0))
        counts[layer.name] = (possible.size, int(np.count_nonzero(possible)))
    per_layer = {k: nz / tot for k, (tot, nz) in counts.items()}
    tot = sum(t for t, _ in counts.values())
    nz = sum(z for _, z in counts.values())
    rt = sum(counts[k][0] for k in relu_names)
    rz = sum(counts[k][1] for k in relu_names)
    return DensityReport(rz / rt if rt else 0.0, nz / tot, per_layer)


# -- profiling ---------------------------------------------------------------------


class ClassDensity(NamedTuple):
    label: int
    mean_overall_density: float
    std_overall_density: float
    count: int


def class_density_profile(model: CnnModel, dataset: Sequence[tuple[np.ndarray, int]], n_classes: int | None = None) -> list[ClassDensity]:
    """Per-class mean overall density, densest class first.

    Classes listed by ``n_classes`` but absent from the data are skipped
    with a warning.
    """
    if not dataset:
        raise ValueError("dataset is empty")
    by_class: dict[int, list[float]] = {}
    for image, label in dataset:
        by_class.setdefault(int(label), []).append(cnn_forward(model, image).density.overall_density)
    if n_classes is not None:
        for c in range(n_classes):
            if c not in by_class:
                log.warning("class %d has no images; skipped", c)
    rows = [ClassDensity(c, float(np.mean(v)), float(np.std(v)), len(v)) for c, v in by_class.items()]
    rows.sort(key=lambda r: (-r.mean_overall_density, r.label))
    return rows


# -- reference model and images ----------------------------------------------------

REFERENCE_SHAPE = (1, 8, 8)
REFERENCE_CLASSES = 10
REFERENCE_THRESHOLDS = (0.55, 0.6, 0.65, 0.7)
LOGIT_SCALE = 0.1


def build_reference_cnn(seed: int = 0, calibration_images: int = 500) -> CnnModel:
    """3x3 brightness detectors (1 -> 4 channels), then a 144 -> 10 linear layer.

    The linear layer is a nearest-class-mean classifier over the detector
    maps of generated natural-like images, so predicted labels follow the
    blob position.
    """
    rng = np.random.default_rng(seed)
    k = len(REFERENCE_THRESHOLDS)
    w1 = rng.uniform(0.5, 1.5, size=(k, 1, 3, 3))
    w1 /= w1.sum(axis=(1, 2, 3), keepdims=True)
    b1 = -np.asarray(REFERENCE_THRESHOLDS, dtype=np.float64)
    conv = Conv2d(w1, b1, relu=True, name="conv1")
    images, labels = natural_images(calibration_images, seed=seed + 1)
    feats = np.array([np.maximum(_affine(conv, x)[0], 0.0).ravel() for x in images])
    labels = np.asarray(labels)
    means = np.array([feats[labels == c].mean(axis=0) for c in range(REFERENCE_CLASSES)])
    # -|a - mu_c|^2 / 2 up to terms that do not depend on the class
    w2 = means - means.mean(axis=0)
    sq = 0.5 * np.sum(means**2, axis=1)
    b2 = sq.mean() - sq
    # a small logit scale keeps predictions and lets the hidden layer
    # dominate the summed activation norms
    w2, b2 = LOGIT_SCALE * w2, LOGIT_SCALE * b2
    fc = Linear(w2, b2, relu=False, name="fc2")
    return CnnModel([conv, fc], REFERENCE_SHAPE, REFERENCE_CLASSES)


_BLOB_CENTERS = [(1.5 + 1.0 * (c % 5), 2.0 + 3.0 * (c // 5)) for c in range(REFERENCE_CLASSES)]


def natural_image(label: int, rng: np.random.Generator, shape=REFERENCE_SHAPE) -> np.ndarray:
    """Bright smooth background with a dark blob whose position encodes the class."""
    c, h, w = shape
    yy, xx = np.mgrid[0:h, 0:w]
    cy, cx = _BLOB_CENTERS[label % len(_BLOB_CENTERS)]
    cy, cx = cy * (h / 8) + rng.normal(0, 0.3), cx * (w / 8) + rng.normal(0, 0.3)
    radius = 1.3 + 0.1 * (label % 3)
    blob = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * radius**2))
    level = 0.72 + 0.01 * label + rng.normal(0, 0.04)
    gradient = 0.04 * rng.standard_normal() * (xx / w - 0.5)
    noise = rng.normal(0, 0.05, size=(h, w))
    img = level + gradient + noise - 0.6 * blob
    img = np.clip(img, 0.01, 1.0)
    return np.broadcast_to(img, shape).copy()


def natural_images(n: int, seed: int = 0, shape=REFERENCE_SHAPE, n_classes: int = REFERENCE_CLASSES):
    rng = np.random.default_rng(seed)
    labels = [i % n_classes for i in range(n)]
    return [natural_image(l, rng, shape) for l in labels], labels


def random_images(n: int, seed: int = 0, shape=REFERENCE_SHAPE) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    return [rng.random(shape) for _ in range(n)]


# -- image files ------------------------------------------------------------------


def save_image(path, image: np.ndarray) -> None:
    image = np.asarray(image, dtype=np.float64)
    header = f"{IMAGE_HEADER} shape={','.join(str(s) for s in image.shape)}"
    body = "\n".join(repr(float(v)) for v in image.ravel())
    Path(path).write_text(header + "\n" + body + "\n")


def load_image(path) -> np.ndarray:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith(IMAGE_HEADER + " shape="):
        raise ValueError(f"{path}: missing image header")
    shape = tuple(int(s) for s in lines[0].split("shape=", 1)[1].split(","))
    values = np.array([float(v) for v in lines[1:] if v.strip()], dtype=np.float64)
    if values.size != int(np.prod(shape)):
        raise ValueError(f"{path}: {values.size} values for shape {shape}")
    return values.reshape(shape)


def save_dataset(root, images: Sequence[np.ndarray], labels: Sequence[int]) -> None:
    """Write ``root/<label>/<index>.img`` files."""
    root = Path(root)
    for i, (img, lab) in enumerate(zip(images, labels)):
        d = root / str(int(lab))
        d.mkdir(parents=True, exist_ok=True)
        save_image(d / f"{i:05d}{IMAGE_SUFFIX}", img)


def load_dataset(root) -> list[tuple[np.ndarray, int]]:
    root = Path(root)
    out = []
    for d in sorted(p for p in root.iterdir() if p.is_dir()):
        for f in sorted(d.glob(f"*{IMAGE_SUFFIX}")):
            out.append((load_image(f), int(d.name)))
    return out
