"""Training and evaluation loop for the toy denoiser.

Loss per step: ``w_pixel * L1 + lambda * D``, where D is one of

* ``kl`` / ``ikl`` / ``js`` -- neighbour-distribution matching on extractor
  features, either over whole images (``mode = batch``, optionally through the
  historic queue) or over the patch grid of each image (``mode = patch``,
  averaged over the images of the batch);
* ``perceptual`` -- feature MSE baseline;
* ``none`` -- pixel loss only.
"""

import csv
import io
import logging
import math
import time
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from .dataset import read_manifest
from .denoiser import AdamState, adam_step, denoise_backward, denoise_forward, init_denoiser, l1_loss
from .divergence import VARIANTS, divergence_with_grad, kl_divergence, perceptual_mse
from .extractor import FEATURE_DIM, extract_backward, extract_features, init_extractor
from .kernel_density import cond_prob_from_features
from .memory_queue import FeatureQueuePair
from .metrics import psnr, ssim
from .patches import PatchSpec, accumulate_patches, extract_patches, patch_grid
from .tensorio import read_tensor, write_tensor

logger = logging.getLogger(__name__)

LOSS_VARIANTS = VARIANTS + ("perceptual", "none")
METRICS_HEADER = ("step", "pixel_loss", "d2sm_loss", "total_loss", "psnr", "ssim", "feature_kl")


@dataclass
class TrainConfig:
    dataset: str = ""
    epochs: int = 1
    steps: int = 0  # > 0 overrides epochs
    batch_size: int = 8
    lr: float = 1e-3
    w_pixel: float = 1.0
    lam: float = 0.1
    variant: str = "kl"
    mode: str = "patch"
    patch_size: int = 16
    stride: int = 8
    queue_size: int = 64
    use_queue: bool = False
    seed_data: int = 0
    seed_model: int = 0
    seed_extractor: int = 0
    eval_every: int = 100
    out_dir: str = ""

    def validate(self):
        if self.variant not in LOSS_VARIANTS:
            raise ValueError(f"variant must be one of {LOSS_VARIANTS}")
        if self.mode not in ("batch", "patch"):
            raise ValueError("mode must be 'batch' or 'patch'")
        if self.lam < 0 or self.w_pixel < 0:
            raise ValueError("loss weights must be non-negative")
        if self.lam == 0 and self.w_pixel == 0:
            raise ValueError("w_pixel and lambda cannot both be zero")
        if self.epochs < 0 or self.steps < 0:
            raise ValueError("epochs and steps must be non-negative")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.mode == "batch" and self.batch_size < 2:
            raise ValueError("batch mode needs batch_size >= 2")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.eval_every < 1:
            raise ValueError("eval_every must be positive")
        PatchSpec(self.patch_size, self.stride)


# TrainConfig field -> config-file key, where they differ
_FIELD_KEYS = {"lam": "lambda"}


def parse_config(text):
    """Parse ``key = value`` lines into a TrainConfig. Unknown keys are errors."""
    types = {_FIELD_KEYS.get(f.name, f.name): (f.name, f.type) for f in fields(TrainConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if not sep or key not in types:
            raise ValueError(f"line {lineno}: unknown or malformed config entry {line!r}")
        name, typ = types[key]
        values[name] = _coerce(typ, raw, key)
    cfg = TrainConfig(**values)
    cfg.validate()
    return cfg


def _coerce(typ, raw, key):
    if typ in (bool, "bool"):
        if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
            raise ValueError(f"{key}: expected a boolean, got {raw!r}")
        return raw.lower() in ("true", "1", "yes")
    if typ in (int, "int"):
        return int(raw)
    if typ in (float, "float"):
        return float(raw)
    return raw


def format_config(cfg):
    out = []
    for name, value in asdict(cfg).items():
        key = _FIELD_KEYS.get(name, name)
        out.append(f"{key} = {str(value).lower() if isinstance(value, bool) else value}")
    return "\n".join(out) + "\n"


def load_config(path):
    return parse_config(Path(path).read_text(encoding="utf-8"))


# -- objective -----------------------------------------------------------------


def semantic_loss(denoised, clean, ext, cfg, queue=None):
    """Value of the feature-space term and its gradient w.r.t. ``denoised``."""
    n, h, w, c = denoised.shape
    if cfg.variant == "none":
        return 0.0, np.zeros_like(denoised)
    if cfg.mode == "patch":
        grid = patch_grid(h, w, PatchSpec(cfg.patch_size, cfg.stride))
        if len(grid) < 2:
            raise ValueError("patch grid yields fewer than 2 patches")
        px = np.concatenate([extract_patches(img, grid) for img in denoised])
        py = np.concatenate([extract_patches(img, grid) for img in clean])
        fx = extract_features(ext, px)
        fy = extract_features(ext, py)
        m = len(grid)
        dfx = np.zeros_like(fx)
        if cfg.variant == "perceptual":
            value, dfx = perceptual_mse(fx, fy)
        elif queue is not None:
            queue.enqueue(fx, fy)
            qx, qy, live = queue.snapshot()
            res = divergence_with_grad(qx, qy, cfg.variant, live)
            value, dfx = res.value, res.grad[:fx.shape[0]]
        else:
            value = 0.0
            for i in range(n):
                res = divergence_with_grad(fx[i * m:(i + 1) * m], fy[i * m:(i + 1) * m], cfg.variant)
                value += res.value / n
                dfx[i * m:(i + 1) * m] = res.grad / n
        dpatch = extract_backward(ext, px, dfx)
        grad = np.stack([accumulate_patches(dpatch[i * m:(i + 1) * m], grid, c) for i in range(n)])
        return value, grad
    fx = extract_features(ext, denoised)
    fy = extract_features(ext, clean)
    if cfg.variant == "perceptual":
        value, dfx = perceptual_mse(fx, fy)
    elif queue is not None:
        queue.enqueue(fx, fy)
        qx, qy, live = queue.snapshot()
        res = divergence_with_grad(qx, qy, cfg.variant, live)
        value, dfx = res.value, res.grad[:n]
    else:
        res = divergence_with_grad(fx, fy, cfg.variant)
        value, dfx = res.value, res.grad
    return value, extract_backward(ext, denoised, dfx)


def total_loss_and_grads(params, noisy, clean, ext, cfg, queue=None):
    """Combined loss, its parts, and parameter gradients for one batch."""
    out, cache = denoise_forward(params, noisy)
    pixel, d_pix = l1_loss(out, clean)
    sem, d_sem = semantic_loss(out, np.asarray(clean, np.float64), ext, cfg, queue)
    total = cfg.w_pixel * pixel + cfg.lam * sem
    grads = denoise_backward(cache, cfg.w_pixel * d_pix + cfg.lam * d_sem)
    return total, pixel, sem, grads


# -- evaluation ----------------------------------------------------------------


def feature_kl_to_clean(params, noisy, clean, ext, mode="patch", spec=None):
    """Mean KL between denoised- and clean-feature neighbour distributions."""
    out, _ = denoise_forward(params, noisy)
    return _feature_kl(out, np.asarray(clean, np.float64), ext, mode, spec)


def _feature_kl(out, clean, ext, mode, spec):
    if mode == "patch":
        spec = spec or PatchSpec(16, 8)
        grid = patch_grid(out.shape[1], out.shape[2], spec)
        if len(grid) < 2:
            raise ValueError("patch grid yields fewer than 2 patches")
        vals = []
        for o, y in zip(out, clean):
            fx = extract_features(ext, extract_patches(o, grid))
            fy = extract_features(ext, extract_patches(y, grid))
            vals.append(kl_divergence(cond_prob_from_features(fx), cond_prob_from_features(fy)))
        return float(np.mean(vals))
    if out.shape[0] < 2:
        raise ValueError("batch-mode feature KL needs at least 2 images")
    fx = extract_features(ext, out)
    fy = extract_features(ext, clean)
    return kl_divergence(cond_prob_from_features(fx), cond_prob_from_features(fy))


def evaluate(params, noisy, clean, ext, mode="patch", spec=None):
    """Mean PSNR / SSIM over a split plus feature KL to the clean images."""
    if len(noisy) == 0:
        raise ValueError("evaluation split is empty")
    out, _ = denoise_forward(params, noisy)
    clean = np.asarray(clean, np.float64)
    p = [psnr(o, y) for o, y in zip(out, clean)]
    s = [ssim(o, y) for o, y in zip(out, clean)]
    return {
        "psnr": math.inf if any(math.isinf(v) for v in p) else float(np.mean(p)),
        "ssim": float(np.mean(s)),
        "feature_kl": _feature_kl(out, clean, ext, mode, spec),
    }


# -- checkpoints ---------------------------------------------------------------


def save_checkpoint(params, path, step=0, extra=None):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    lines = ["format = d2sm-checkpoint", f"step = {step}",
             f"channels = {params['conv1'].shape[2]}"]
    for key, value in (extra or {}).items():
        lines.append(f"{key} = {value}")
    lines.append("")
    lines.append("[tensors]")
    for name in sorted(params):
        write_tensor(params[name], path / f"{name}.d2t")
        lines.append(f"{name} {name}.d2t")
    (path / "checkpoint.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_checkpoint(path):
    """Return (params, info) from a checkpoint directory."""
    path = Path(path)
    info, params, in_tensors = {}, {}, False
    for line in (path / "checkpoint.txt").read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        if line == "[tensors]":
            in_tensors = True
        elif in_tensors:
            name, fname = line.split()
            params[name] = read_tensor(path / fname)
        else:
            key, _, value = line.partition("=")
            info[key.strip()] = value.strip()
    if info.get("format") != "d2sm-checkpoint":
        raise ValueError(f"{path}: not a checkpoint")
    return params, info


# -- training ------------------------------------------------------------------


def _fmt(x):
    return repr(float(x))


def train(cfg, data=None):
    """Train per ``cfg``; returns (params, metrics rows).

    ``data`` may supply ``(train_clean, train_noisy, test_clean, test_noisy)``
    arrays directly; otherwise the dataset manifest at ``cfg.dataset`` is read.
    When ``cfg.out_dir`` is set, ``metrics.csv``, ``config.txt`` and a
    ``checkpoint/`` directory are written there. Metrics are logged every
    ``eval_every`` steps (and at the last step); losses in a row are averages
    over the steps since the previous row.
    """
    cfg.validate()
    if data is None:
        m = read_manifest(cfg.dataset)
        tr_clean, tr_noisy = m.load("train")
        te_clean, te_noisy = m.load("test")
    else:
        tr_clean, tr_noisy, te_clean, te_noisy = data
    channels = tr_clean.shape[-1]
    n_train = tr_clean.shape[0]
    if cfg.batch_size > n_train:
        raise ValueError(f"batch_size {cfg.batch_size} exceeds {n_train} training images")
    per_epoch = n_train // cfg.batch_size
    total_steps = cfg.steps if cfg.steps > 0 else cfg.epochs * per_epoch

    params = init_denoiser(cfg.seed_model, channels)
    ext = init_extractor(cfg.seed_extractor, channels)
    spec = PatchSpec(cfg.patch_size, cfg.stride)
    queue = None
    if cfg.use_queue and cfg.variant in VARIANTS:
        queue = FeatureQueuePair(cfg.queue_size, FEATURE_DIM)
    state = AdamState()
    rng = np.random.default_rng(cfg.seed_data)

    rows = []
    acc = np.zeros(3)
    acc_n = 0
    order = np.empty(0, dtype=int)
    t0 = time.perf_counter()
    for step in range(1, total_steps + 1):
        if order.size < cfg.batch_size:
            order = rng.permutation(n_train)[:per_epoch * cfg.batch_size]
        idx, order = order[:cfg.batch_size], order[cfg.batch_size:]
        total, pixel, sem, grads = total_loss_and_grads(
            params, tr_noisy[idx], tr_clean[idx], ext, cfg, queue)
        params, state = adam_step(params, grads, state, cfg.lr)
        acc += (pixel, sem, total)
        acc_n += 1
        if step % cfg.eval_every == 0 or step == total_steps:
            ev = evaluate(params, te_noisy, te_clean, ext, cfg.mode, spec)
            pix, d2, tot = acc / acc_n
            rows.append((step, pix, d2, tot, ev["psnr"], ev["ssim"], ev["feature_kl"]))
            acc[:] = 0.0
            acc_n = 0
            logger.info("step %d pixel %.5f d2sm %.5f psnr %.3f ssim %.4f fkl %.5f (%.1fs)",
                        step, pix, d2, ev["psnr"], ev["ssim"], ev["feature_kl"],
                        time.perf_counter() - t0)

    if cfg.out_dir:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        # out_dir is omitted so identical runs into different directories match byte for byte
        (out / "config.txt").write_text(format_config(replace(cfg, out_dir="")), encoding="utf-8")
        (out / "metrics.csv").write_text(metrics_csv(rows), encoding="utf-8")
        save_checkpoint(params, out / "checkpoint", step=total_steps, extra={
            "mode": cfg.mode, "patch_size": cfg.patch_size, "stride": cfg.stride,
            "seed_extractor": cfg.seed_extractor})
    return params, rows


def metrics_csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRICS_HEADER)
    for row in rows:
        writer.writerow([row[0]] + [_fmt(v) for v in row[1:]])
    return buf.getvalue()
