"""Image quality metrics, UDR stability and clustering diagnostics, ablations, reports."""
import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .degrade.resize import resize
from .errors import DataError, DimensionError, ParameterError
from .nn.rng import DeterministicRng

log = logging.getLogger(__name__)

PSNR_CAP = 99.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1, SSIM_K2 = 0.01, 0.03
LUMA = np.array([0.299, 0.587, 0.114])
PALETTE = ("#1b9e77", "#d95f02", "#7570b3")

QUALITY_HEADER = "image,psnr_db,ssim"
STABILITY_HEADER = "image,instability,dims"
CLUSTER_HEADER = "index,label,pc1,pc2,silhouette_overall"
ABLATION_HEADER = "variant,psnr_db,ssim"


def _pair(a, b):
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def psnr(a, b):
    a, b = _pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse < 1e-12:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(1.0 / mse))


def to_luma(img):
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        return img
    if img.shape[0] == 1:
        return img[0]
    if img.shape[0] == 3:
        return np.tensordot(LUMA, img, axes=1)
    raise DimensionError(f"expected 1 or 3 channels, got {img.shape}")


def gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def _filter_valid(x, g):
    x = sliding_window_view(x, g.size, axis=0) @ g
    return sliding_window_view(x, g.size, axis=1) @ g


def ssim(a, b):
    """Mean SSIM over valid window positions of the luma planes."""
    a, b = _pair(a, b)
    ya, yb = to_luma(a), to_luma(b)
    if min(ya.shape) < SSIM_WINDOW:
        raise DataError(f"image {ya.shape} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    g = gaussian_window()
    c1, c2 = SSIM_K1 ** 2, SSIM_K2 ** 2
    mu_a, mu_b = _filter_valid(ya, g), _filter_valid(yb, g)
    saa = _filter_valid(ya * ya, g) - mu_a * mu_a
    sbb = _filter_valid(yb * yb, g) - mu_b * mu_b
    sab = _filter_valid(ya * yb, g) - mu_a * mu_b
    smap = ((2 * mu_a * mu_b + c1) * (2 * sab + c2)) / ((mu_a ** 2 + mu_b ** 2 + c1) * (saa + sbb + c2))
    return float(np.mean(smap))


def bicubic_upscale(lr, scale):
    _, h, w = lr.shape
    return resize(lr, h * scale, w * scale, "bicubic")


# --- reports ----------------------------------------------------------------

@dataclass
class QualityReport:
    names: list
    psnr: list
    ssim: list
    config: dict = field(default_factory=dict)

    @property
    def mean_psnr(self):
        return math.fsum(self.psnr) / len(self.psnr)

    @property
    def mean_ssim(self):
        return math.fsum(self.ssim) / len(self.ssim)


def quality_report(preds, targets, names=None, config=None):
    if len(preds) != len(targets) or not preds:
        raise DataError("need equally many (>= 1) predictions and targets")
    names = names or [f"{i:04d}" for i in range(len(preds))]
    return QualityReport(list(names), [psnr(p, t) for p, t in zip(preds, targets)],
                         [ssim(p, t) for p, t in zip(preds, targets)], dict(config or {}))


def evaluate_model(model, pairs, variant="full", names=None, config=None):
    """SR every LR in ``pairs`` (list of (hr, lr)) and score against its HR."""
    preds = [model.super_resolve(lr, variant) for _, lr in pairs]
    return quality_report(preds, [hr for hr, _ in pairs], names, config)


def bicubic_report(pairs, scale, names=None):
    preds = [bicubic_upscale(lr, scale) for _, lr in pairs]
    return quality_report(preds, [hr for hr, _ in pairs], names, {"method": "bicubic"})


@dataclass
class StabilityReport:
    mean: np.ndarray
    variance: np.ndarray
    instability: float
    offsets: list
    name: str = "image"

    @property
    def dims(self):
        return int(self.mean.size)


def instability_score(udrs):
    """Mean over dimensions of the per-dimension population variance."""
    udrs = np.asarray(udrs, dtype=np.float64)
    mean = np.mean(udrs, axis=0)
    var = np.mean((udrs - mean) ** 2, axis=0)
    return mean, var, math.fsum(var.tolist()) / var.size


def _udr_fn(de):
    if hasattr(de, "udr"):
        def fn(batch):
            from .nn import no_grad
            with no_grad():
                return np.asarray(de.udr(batch.astype(getattr(de, "dtype", batch.dtype))).data)
        return fn
    return de


def stability_metric(de, image, n_patches, patch, rng, name="image"):
    """UDRs of ``n_patches`` random crops of one image and their spread.

    ``de`` is a model with ``.udr`` or a callable mapping an ``n x 3 x p x p``
    batch to an ``n x d`` array.
    """
    image = np.asarray(image)
    if n_patches < 2:
        raise ParameterError("n_patches must be >= 2")
    _, h, w = image.shape
    if h < patch or w < patch:
        raise DataError(f"image {h}x{w} smaller than patch {patch}")
    offsets = [(rng.randint(0, h - patch), rng.randint(0, w - patch)) for _ in range(n_patches)]
    batch = np.stack([image[:, y:y + patch, x:x + patch] for y, x in offsets])
    udrs = np.asarray(_udr_fn(de)(batch), dtype=np.float64).reshape(n_patches, -1)
    mean, var, score = instability_score(udrs)
    return StabilityReport(mean, var, score, offsets, name)


def corpus_instability(de, images, n_patches, patch, seed, purpose="stability"):
    """Per-image stability reports with crop streams keyed ``(seed, i, purpose)``."""
    reps = [stability_metric(de, img, n_patches, patch, DeterministicRng(seed, i, purpose), f"{i:04d}")
            for i, img in enumerate(images)]
    return reps, math.fsum(r.instability for r in reps) / len(reps)


@dataclass
class ClusterReport:
    udrs: np.ndarray
    labels: list
    silhouette: float
    per_sample: np.ndarray
    coords: np.ndarray


def pairwise_distances(x):
    sq = np.sum(x * x, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.fill_diagonal(d2, 0.0)
    return np.sqrt(np.maximum(d2, 0.0))


def silhouette_samples(x, labels):
    """Euclidean silhouette per sample; members of singleton clusters score 0."""
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray(labels)
    uniq = sorted(set(labels.tolist()))
    if len(uniq) < 2:
        raise ParameterError("silhouette needs at least two labels")
    dist = pairwise_distances(x)
    masks = [labels == u for u in uniq]
    s = np.zeros(len(x))
    for i in range(len(x)):
        own = next(k for k, m in enumerate(masks) if m[i])
        n_own = masks[own].sum()
        if n_own < 2:
            continue
        a = dist[i, masks[own]].sum() / (n_own - 1)
        b = min(dist[i, m].mean() for k, m in enumerate(masks) if k != own)
        denom = max(a, b)
        s[i] = (b - a) / denom if denom > 0 else 0.0
    return s


def pca_power(x, n_components=2, iters=1000, tol=1e-12):
    """Leading principal axes by deflated power iteration; first nonzero loading made positive."""
    x = np.asarray(x, dtype=np.float64)
    xc = x - x.mean(axis=0)
    cov = xc.T @ xc / max(len(x) - 1, 1)
    d = cov.shape[0]
    axes = []
    for k in range(min(n_components, d)):
        v = DeterministicRng(0, k, "pca").uniform(d) - 0.5
        v /= np.linalg.norm(v)
        lam = 0.0
        for _ in range(iters):
            w = cov @ v
            for u in axes:
                w -= (u @ w) * u
            nrm = np.linalg.norm(w)
            if nrm == 0.0:
                v = np.zeros(d)
                break
            w /= nrm
            done = np.linalg.norm(w - v) < tol
            v, lam = w, nrm
            if done:
                break
        nz = np.flatnonzero(np.abs(v) > 1e-12)
        if nz.size and v[nz[0]] < 0:
            v = -v
        axes.append(v)
    comps = np.array(axes)
    while comps.shape[0] < n_components:
        comps = np.vstack([comps, np.zeros(d)])
    return xc @ comps.T, comps


def cluster_separability(samples):
    """Silhouette and 2-D PCA coordinates of ``(udr, label)`` samples."""
    if len(samples) < 2:
        raise ParameterError("need at least two samples")
    x = np.array([np.asarray(u, dtype=np.float64).ravel() for u, _ in samples])
    labels = [lab for _, lab in samples]
    if np.ptp(x, axis=0).max() == 0.0:
        log.warning("all UDRs identical; silhouette defined as 0")
        per = np.zeros(len(x))
        if len(set(labels)) < 2:
            raise ParameterError("silhouette needs at least two labels")
    else:
        per = silhouette_samples(x, labels)
    coords, _ = pca_power(x)
    return ClusterReport(x, labels, float(np.mean(per)), per, coords)


# --- ablation ---------------------------------------------------------------

@dataclass
class AblationTable:
    rows: dict  # variant -> QualityReport

    def psnr(self, variant):
        return self.rows[variant].mean_psnr


def ablation_run(variants, cfg, data, heldout, metrics_sink=None):
    """Train each variant with the same seed, data and budget; score on ``heldout``."""
    from dataclasses import replace

    from .train import build_model, train_all

    rows = {}
    for v in variants:
        vcfg = replace(cfg, variant=v)
        ck = train_all(vcfg, data, None if metrics_sink is None else metrics_sink(v))[3]
        model = build_model(vcfg, ck)
        rows[v] = evaluate_model(model, heldout, v, config={"variant": v})
    return AblationTable(rows)


# --- emission ---------------------------------------------------------------

def _f(x):
    return format(float(x), ".10g")


def report_csv(report):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if isinstance(report, QualityReport):
        w.writerow(QUALITY_HEADER.split(","))
        for n, p, s in zip(report.names, report.psnr, report.ssim):
            w.writerow([n, _f(p), _f(s)])
    elif isinstance(report, StabilityReport):
        w.writerow(STABILITY_HEADER.split(","))
        w.writerow([report.name, _f(report.instability), report.dims])
    elif isinstance(report, (list, tuple)) and report and isinstance(report[0], StabilityReport):
        w.writerow(STABILITY_HEADER.split(","))
        for r in report:
            w.writerow([r.name, _f(r.instability), r.dims])
    elif isinstance(report, ClusterReport):
        w.writerow(CLUSTER_HEADER.split(","))
        for i, (lab, (x, y)) in enumerate(zip(report.labels, report.coords)):
            w.writerow([i, lab, _f(x), _f(y), _f(report.silhouette)])
    elif isinstance(report, AblationTable):
        w.writerow(ABLATION_HEADER.split(","))
        for v, r in report.rows.items():
            w.writerow([v, _f(r.mean_psnr), _f(r.mean_ssim)])
    else:
        raise ParameterError(f"no CSV layout for {type(report).__name__}")
    return buf.getvalue()


def cluster_svg(report, width=640, height=480, margin=40):
    pts = np.asarray(report.coords, dtype=np.float64)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    uniq = sorted(set(report.labels))
    color = {lab: PALETTE[i % len(PALETTE)] for i, lab in enumerate(uniq)}
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
        f'<text x="{margin}" y="24" font-family="sans-serif" font-size="14">'
        f'UDR PCA, silhouette {report.silhouette:.4f}</text>',
    ]
    for i, lab in enumerate(uniq):
        y = 24 + 16 * i
        out.append(f'<rect x="{width - 150}" y="{y - 10}" width="10" height="10" fill="{color[lab]}"/>')
        out.append(f'<text x="{width - 134}" y="{y}" font-family="sans-serif" font-size="12">{lab}</text>')
    for (px, py), lab in zip(pts, report.labels):
        cx = margin + (px - lo[0]) / span[0] * (width - 2 * margin)
        cy = height - margin - (py - lo[1]) / span[1] * (height - 2 * margin)
        out.append(f'<circle cx="{cx:.3f}" cy="{cy:.3f}" r="4" fill="{color[lab]}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_report(report, path, fmt="csv"):
    if fmt == "csv":
        text = report_csv(report)
    elif fmt == "svg":
        if not isinstance(report, ClusterReport):
            raise ParameterError("SVG output is only defined for cluster reports")
        text = cluster_svg(report)
    else:
        raise ParameterError(f"unknown report format {fmt!r}")
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path
