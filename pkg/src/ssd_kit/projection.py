"""2-D projections for DWUG plots and diachronic neighbor comparison.

The DWUG layout is computed once on the joint old+new point set so the
per-period views share coordinates and stay visually comparable; the old,
new and combined views only filter that layout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import jsonl
from .clustering import SenseClustering
from .embeddings import PeriodSplit
from .errors import ConfigError, DataError
from .shift import cosine_similarity

# tab10-style categorical palette; sense index -> color, cycling past 10
PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)

TSNE_EXAGGERATION = 12.0
TSNE_EXAGGERATION_ITERS = 250
TSNE_MOMENTUM_SWITCH = 250


def pca_2d(points: Sequence[Sequence[float]] | np.ndarray, seed: int = 0) -> np.ndarray:
    """Project centered data onto the top-2 principal components.

    Components are eigenvectors of the covariance matrix ordered by
    descending eigenvalue, with each component's largest-magnitude
    coordinate flipped positive so the output is sign-deterministic.
    The seed is accepted for interface symmetry; PCA itself is exact.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or len(pts) < 3:
        raise DataError(f"pca_2d needs at least 3 points, got shape {pts.shape}")
    if pts.shape[1] < 2:
        raise DataError(f"pca_2d needs dimension >= 2, got {pts.shape[1]}")
    centered = pts - pts.mean(axis=0)
    cov = centered.T @ centered / max(len(pts) - 1, 1)
    eigenvalues, eigenvectors = np.linalg.eigh(cov)
    order = np.argsort(eigenvalues)[::-1][:2]
    components = eigenvectors[:, order]
    for j in range(components.shape[1]):
        pivot = np.abs(components[:, j]).argmax()
        if components[pivot, j] < 0:
            components[:, j] = -components[:, j]
    return centered @ components


def effective_perplexity(n_points: int, requested: float) -> float:
    """Cap the perplexity for small point sets: min(requested, (n - 1) / 3)."""
    if requested <= 0:
        raise ConfigError(f"perplexity must be positive, got {requested}")
    return min(requested, (n_points - 1) / 3.0)


def _conditional_affinities(
    sq_dists: np.ndarray, perplexity: float, tol: float = 1e-5, max_steps: int = 50
) -> np.ndarray:
    """Per-point Gaussian affinities with bandwidths found by binary search.

    The search matches each row's Shannon entropy to log(perplexity) within
    `tol`, taking at most `max_steps` bisection steps.
    """
    n = len(sq_dists)
    target = math.log(perplexity)
    P = np.zeros((n, n))
    for i in range(n):
        others = np.concatenate([np.arange(i), np.arange(i + 1, n)])
        d = sq_dists[i, others]
        beta, beta_lo, beta_hi = 1.0, 0.0, math.inf
        row = np.full(n - 1, 1.0 / max(n - 1, 1))
        for _ in range(max_steps):
            weights = np.exp(-d * beta)
            total = weights.sum()
            if total <= 0.0:
                entropy = 0.0
                row = np.zeros(n - 1)
                row[d.argmin()] = 1.0
            else:
                row = weights / total
                entropy = math.log(total) + beta * float((d * row).sum())
            diff = entropy - target
            if abs(diff) <= tol:
                break
            if diff > 0:
                beta_lo = beta
                beta = beta * 2.0 if math.isinf(beta_hi) else (beta + beta_hi) / 2.0
            else:
                beta_hi = beta
                beta = beta / 2.0 if beta_lo == 0.0 else (beta + beta_lo) / 2.0
        P[i, others] = row
    return P


@dataclass
class TsneDiagnostics:
    effective_perplexity: float
    kl_history: list[float] = field(default_factory=list)

    @property
    def final_kl(self) -> float:
        return self.kl_history[-1] if self.kl_history else math.nan


def tsne_2d(
    points: Sequence[Sequence[float]] | np.ndarray,
    perplexity: float = 50.0,
    seed: int = 0,
    iterations: int = 1000,
    learning_rate: float = 200.0,
    return_diagnostics: bool = False,
) -> np.ndarray | tuple[np.ndarray, TsneDiagnostics]:
    """Exact t-SNE with PCA initialization and early exaggeration.

    Affinities are symmetrized conditional Gaussians at the effective
    perplexity; the embedding uses the Student-t kernel, gradient descent
    with momentum 0.5 (0.8 after iteration 250), adaptive gains, and x12
    early exaggeration for the first 250 iterations. Deterministic for a
    fixed seed.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or len(pts) < 5:
        raise DataError(f"tsne_2d needs at least 5 points, got shape {pts.shape}")
    n = len(pts)
    perp = effective_perplexity(n, perplexity)

    diff = pts[:, None, :] - pts[None, :, :]
    sq = (diff**2).sum(axis=2)
    P_conditional = _conditional_affinities(sq, perp)
    P = (P_conditional + P_conditional.T) / (2.0 * n)
    P = np.maximum(P, 1e-12)

    rng = np.random.default_rng(seed)
    if pts.shape[1] >= 2:
        Y = pca_2d(pts, seed)
    else:
        Y = np.hstack([pts, np.zeros((n, 1))])
    spread = Y.std(axis=0)
    if np.all(spread > 0):
        Y = Y / spread * 1e-4
    else:
        Y = rng.normal(0.0, 1e-4, size=(n, 2))

    velocity = np.zeros_like(Y)
    gains = np.ones_like(Y)
    diagnostics = TsneDiagnostics(effective_perplexity=perp)
    P_run = P * TSNE_EXAGGERATION

    for iteration in range(iterations):
        if iteration == TSNE_EXAGGERATION_ITERS:
            P_run = P
        momentum = 0.5 if iteration < TSNE_MOMENTUM_SWITCH else 0.8

        d2 = ((Y[:, None, :] - Y[None, :, :]) ** 2).sum(axis=2)
        num = 1.0 / (1.0 + d2)
        np.fill_diagonal(num, 0.0)
        Q = np.maximum(num / num.sum(), 1e-12)

        PQ = (P_run - Q) * num
        grad = 4.0 * ((np.diag(PQ.sum(axis=1)) - PQ) @ Y)

        flip = np.sign(grad) != np.sign(velocity)
        gains = np.where(flip, gains + 0.2, gains * 0.8)
        gains = np.maximum(gains, 0.01)
        velocity = momentum * velocity - learning_rate * gains * grad
        Y = Y + velocity
        Y = Y - Y.mean(axis=0)

        kl = float((P * np.log(P / Q)).sum())
        # clipping P and Q at 1e-12 denormalizes them by ~n^2 * 1e-12, so
        # KL may dip that far below zero without being wrong
        if not math.isfinite(kl) or kl < -1e-9 * n * n:
            raise DataError(f"t-SNE KL divergence left its valid range: {kl}")
        diagnostics.kl_history.append(max(kl, 0.0))

    if return_diagnostics:
        return Y, diagnostics
    return Y


@dataclass
class DwugExport:
    """Shared 2-D layout of one word's usages, tagged by period and sense."""

    word: str
    method: str
    params: dict[str, Any]
    seed: int
    points: list[dict[str, Any]] = field(default_factory=list)
    colors: dict[int, str] = field(default_factory=dict)

    def view(self, period: str) -> list[dict[str, Any]]:
        if period == "combined":
            return list(self.points)
        return [p for p in self.points if p["period"] == period]

    def to_dict(self) -> dict[str, Any]:
        return {
            "word": self.word,
            "method": self.method,
            "params": self.params,
            "seed": self.seed,
            "colors": {str(s): c for s, c in sorted(self.colors.items())},
            "points": self.points,
        }


def export_dwug(
    clustering: SenseClustering,
    split: PeriodSplit,
    method: str = "tsne",
    params: dict[str, Any] | None = None,
    seed: int = 0,
) -> DwugExport:
    """Lay out the joint point set once and tag each usage with its sense.

    The per-period views of the export filter the same coordinates, so a
    sense absent from one period simply contributes no points there.
    """
    params = dict(params or {})
    vectors = split.vectors
    if method == "pca":
        coordinates = pca_2d(vectors, seed)
        params.setdefault("components", 2)
    elif method == "tsne":
        perplexity = float(params.get("perplexity", 50.0))
        iterations = int(params.get("iterations", 1000))
        coordinates = tsne_2d(
            vectors, perplexity=perplexity, seed=seed, iterations=iterations
        )
        params["perplexity"] = perplexity
        params["effective_perplexity"] = effective_perplexity(len(vectors), perplexity)
    else:
        raise ConfigError(f"projection method must be pca or tsne, got {method!r}")

    export = DwugExport(
        word=clustering.word, method=method, params=params, seed=seed
    )
    for occurrence_id, period, (x, y) in zip(split.ids, split.periods, coordinates):
        sense = clustering.labels[occurrence_id]
        export.points.append(
            {
                "occurrence_id": occurrence_id,
                "period": period,
                "sense": sense,
                "x": float(x),
                "y": float(y),
            }
        )
    export.colors = {
        sense: PALETTE[sense % len(PALETTE)] for sense in sorted(clustering.counts)
    }
    return export


def write_dwug_files(export: DwugExport, out_dir: str | Path) -> list[Path]:
    """Emit <word>.json plus one SVG scatter per view. Returns written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [out_dir / f"{export.word}.json"]
    jsonl.dump_json(written[0], export.to_dict())
    for view in ("old", "new", "combined"):
        path = out_dir / f"{export.word}_{view}.svg"
        path.write_text(_render_svg(export, view), encoding="utf-8")
        written.append(path)
    return written


def _render_svg(export: DwugExport, view: str, size: int = 480, margin: int = 24) -> str:
    points = export.view(view)
    xs = [p["x"] for p in export.points] or [0.0]
    ys = [p["y"] for p in export.points] or [0.0]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    x_span = (x_hi - x_lo) or 1.0
    y_span = (y_hi - y_lo) or 1.0

    def sx(x: float) -> float:
        return margin + (x - x_lo) / x_span * (size - 2 * margin)

    def sy(y: float) -> float:
        return size - margin - (y - y_lo) / y_span * (size - 2 * margin)

    circles = "\n".join(
        f'  <circle cx="{sx(p["x"]):.2f}" cy="{sy(p["y"]):.2f}" r="4" '
        f'fill="{export.colors[p["sense"]]}" fill-opacity="0.8"/>'
        for p in points
    )
    title = f"{export.word} ({view}, {export.method})"
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">\n'
        f'  <rect width="{size}" height="{size}" fill="white"/>\n'
        f'  <text x="{margin}" y="{margin - 8}" font-family="sans-serif" '
        f'font-size="13">{title}</text>\n'
        f"{circles}\n</svg>\n"
    )


def dominant_sense_centroid(clustering: SenseClustering, period: str) -> np.ndarray:
    """Centroid of the most frequent sense in the period (ties: lower index)."""
    if clustering.period_total(period) == 0:
        raise DataError(
            f"word {clustering.word!r} has no occurrences in period {period!r}"
        )
    dominant = max(
        sorted(clustering.counts), key=lambda s: (clustering.counts[s][period], -s)
    )
    return np.asarray(clustering.centroids[dominant][period], dtype=np.float64)


@dataclass
class NeighborReport:
    word: str
    period: str
    dominant_sense: int
    neighbors: list[tuple[str, float]]
    short: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "word": self.word,
            "period": self.period,
            "dominant_sense": self.dominant_sense,
            "neighbors": [
                {"word": w, "cosine_similarity": sim} for w, sim in self.neighbors
            ],
            "short": self.short,
        }


def diachronic_neighbors(
    target: SenseClustering,
    candidates: Sequence[SenseClustering],
    period: str,
    top: int = 5,
) -> NeighborReport:
    """Rank candidate words by dominant-centroid similarity to the target."""
    anchor = dominant_sense_centroid(target, period)
    dominant = max(
        sorted(target.counts), key=lambda s: (target.counts[s][period], -s)
    )
    scored: list[tuple[str, float]] = []
    for candidate in candidates:
        if candidate.word == target.word:
            continue
        centroid = dominant_sense_centroid(candidate, period)
        scored.append((candidate.word, cosine_similarity(anchor, centroid)))
    scored.sort(key=lambda item: (-item[1], item[0]))
    return NeighborReport(
        word=target.word,
        period=period,
        dominant_sense=dominant,
        neighbors=scored[:top],
        short=len(scored) < top,
    )
