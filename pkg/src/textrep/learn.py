"""Weight training with contrastive and median-based minibatch losses.

A couple is a pair of idf-sorted embedding matrices plus a +1/-1 label.
The contrastive loss is the signed Euclidean distance between the two
weighted-average representations.  The median-based loss softplus-penalizes
couples on the wrong side of the minibatch's median pair distance, with
the median couple's identity held fixed inside each gradient step.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .aggregate import WeightModel, interpolation_plan
from .embeddings import EmbeddingTable, IdfTable
from .pairgen import TextPair
from .textprep import sort_by_idf


@dataclass(frozen=True)
class Couple:
    """One training pair, reduced to its idf-sorted embedding matrices."""

    vectors_a: np.ndarray  # (m_a, dim), rows ordered by descending idf
    vectors_b: np.ndarray  # (m_b, dim)
    label: int  # +1 related, -1 non-related


@dataclass
class Minibatch:
    """Couples plus their distances and the batch's median couple."""

    couples: Sequence[Couple]
    distances: np.ndarray
    median_index: int
    median_distance: float


@dataclass
class TrainConfig:
    loss: str = "median"
    kappa: float = 160.0
    lam: float = 0.001
    batch_size: int = 100
    eta_initial: float = 0.01
    eta_reduced: float = 0.001
    stop_delta: float = 0.0005
    seed: int = 42
    n_max: int = 20
    init_weight: float = 0.5
    max_epochs: int = 500

    def __post_init__(self):
        if self.loss not in ("contrastive", "median"):
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.batch_size < 2 or self.batch_size % 2:
            raise ValueError("batch_size must be even and >= 2")
        if not self.eta_reduced < self.eta_initial:
            raise ValueError("eta_reduced must be below eta_initial")


@dataclass
class EpochRecord:
    epoch: int
    mean_loss: float
    eta: float
    wall_seconds: float


def sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def softplus(x: float) -> float:
    """ln(1 + exp(x)) without overflow."""
    if x > 0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


def _rep_and_plan(vectors: np.ndarray, w: np.ndarray, n_max: int):
    """Representation of one text plus its interpolation scatter plan."""
    m = vectors.shape[0]
    floor, ceil, frac = interpolation_plan(n_max, m)
    z = w[floor] + (w[ceil] - w[floor]) * frac
    rep = (z @ vectors) / m
    return rep, (floor, ceil, frac, m)


def _scatter(plan, values: np.ndarray, out: np.ndarray) -> None:
    """Distribute per-rank values onto the weight gradient via the plan."""
    floor, ceil, frac, _ = plan
    np.add.at(out, floor, values * (1.0 - frac))
    np.add.at(out, ceil, values * frac)


def couple_distance_and_gradient(
    couple: Couple, w: np.ndarray, n_max: int
) -> tuple[float, np.ndarray]:
    """Euclidean pair distance and its gradient w.r.t. the n_max weights.

    At d = 0 the distance is non-differentiable; the subgradient 0 is
    returned (coincident representations need no push).
    """
    rep_a, plan_a = _rep_and_plan(couple.vectors_a, w, n_max)
    rep_b, plan_b = _rep_and_plan(couple.vectors_b, w, n_max)
    diff = rep_a - rep_b
    d = float(np.linalg.norm(diff))
    grad = np.zeros(n_max)
    if d > 0.0:
        _scatter(plan_a, (couple.vectors_a @ diff) / (plan_a[3] * d), grad)
        _scatter(plan_b, (couple.vectors_b @ -diff) / (plan_b[3] * d), grad)
    return d, grad


def contrastive_loss(t_a: np.ndarray, t_b: np.ndarray, label: int) -> float:
    """Signed distance: label * d(t_a, t_b) under the Euclidean metric."""
    return label * float(np.linalg.norm(t_a - t_b))


def contrastive_gradient(couple: Couple, model: WeightModel) -> np.ndarray:
    d, grad = couple_distance_and_gradient(couple, model.weights, model.n_max)
    return couple.label * grad


def make_minibatch(couples: Sequence[Couple], w: np.ndarray, n_max: int) -> Minibatch:
    """Compute all pair distances and locate the median couple.

    The median is the lower-middle couple of the distance-sorted batch;
    distance ties break by batch position (stable sort).
    """
    distances = np.array(
        [couple_distance_and_gradient(c, w, n_max)[0] for c in couples]
    )
    order = np.argsort(distances, kind="stable")
    median_index = int(order[(len(couples) - 1) // 2])
    return Minibatch(
        couples=couples,
        distances=distances,
        median_index=median_index,
        median_distance=float(distances[median_index]),
    )


def median_loss(batch: Minibatch, couple_index: int, kappa: float) -> float:
    """softplus(-kappa * p * (mu(B) - d)) for the indexed couple."""
    p = batch.couples[couple_index].label
    d = float(batch.distances[couple_index])
    return softplus(-kappa * p * (batch.median_distance - d))


def median_gradient(
    batch: Minibatch, couple_index: int, model: WeightModel, kappa: float
) -> np.ndarray:
    """Gradient of the indexed couple's median loss w.r.t. the weights.

    kappa * sigma(-kappa p (mu - d)) * p * (grad d - grad d_median), the
    median couple's identity held fixed.  The median couple itself gets
    an exactly zero gradient (the two terms cancel).
    """
    if couple_index == batch.median_index:
        return np.zeros(model.n_max)
    couple = batch.couples[couple_index]
    d, grad_d = couple_distance_and_gradient(couple, model.weights, model.n_max)
    _, grad_mu = couple_distance_and_gradient(
        batch.couples[batch.median_index], model.weights, model.n_max
    )
    factor = kappa * sigmoid(-kappa * couple.label * (batch.median_distance - d))
    return factor * couple.label * (grad_d - grad_mu)


def batch_loss_and_gradient(
    couples: Sequence[Couple],
    w: np.ndarray,
    loss: str,
    kappa: float,
    lam: float,
    median_index: Optional[int] = None,
) -> tuple[float, np.ndarray]:
    """Mean per-couple loss plus L2 term, and its weight gradient.

    ``median_index`` pins the median couple's identity (used both for the
    within-step fixed-median convention and for finite-difference checks);
    its distance still varies with w.
    """
    n_max = len(w)
    dist_grads = [couple_distance_and_gradient(c, w, n_max) for c in couples]
    distances = np.array([dg[0] for dg in dist_grads])
    labels = np.array([c.label for c in couples], dtype=np.float64)

    grad = np.zeros(n_max)
    if loss == "contrastive":
        total = float(labels @ distances)
        for (d, g), p in zip(dist_grads, labels):
            grad += p * g
    else:
        if median_index is None:
            order = np.argsort(distances, kind="stable")
            median_index = int(order[(len(couples) - 1) // 2])
        mu = distances[median_index]
        grad_mu = dist_grads[median_index][1]
        total = 0.0
        for (d, g), p in zip(dist_grads, labels):
            arg = -kappa * p * (mu - d)
            total += softplus(arg)
            grad += kappa * sigmoid(arg) * p * (g - grad_mu)

    n = len(couples)
    loss_value = total / n + lam * float(w @ w)
    grad = grad / n + 2.0 * lam * w
    return loss_value, grad


def prepare_couples(
    pairs: Sequence[TextPair],
    table: EmbeddingTable,
    idf: IdfTable,
    n_max: int,
) -> list[Couple]:
    """Sort, OOV-filter and truncate pairs into training couples.

    Pairs where either side has no in-vocabulary token are dropped.
    """
    couples = []
    for pair in pairs:
        sides = []
        for text in (pair.text_a, pair.text_b):
            sorted_text = sort_by_idf(text, idf)
            rows = [table.lookup(t) for t in sorted_text.tokens]
            rows = [r for r in rows if r is not None][:n_max]
            sides.append(rows)
        if sides[0] and sides[1]:
            couples.append(
                Couple(
                    vectors_a=np.stack(sides[0]),
                    vectors_b=np.stack(sides[1]),
                    label=pair.label,
                )
            )
    return couples


def train_couples(
    couples: Sequence[Couple], config: TrainConfig
) -> tuple[WeightModel, list[EpochRecord]]:
    """Minibatch SGD over prepared couples, with the two-step eta schedule.

    eta drops from eta_initial to eta_reduced the first time the mean
    epoch loss deteriorates; at the reduced rate, training stops once the
    epoch-to-epoch improvement falls below stop_delta.
    """
    related = [c for c in couples if c.label == +1]
    nonrelated = [c for c in couples if c.label == -1]
    half = config.batch_size // 2
    if len(related) < half or len(nonrelated) < half:
        raise ValueError(
            f"need at least {half} couples per label, got "
            f"{len(related)} related / {len(nonrelated)} non-related"
        )

    rng = np.random.default_rng(config.seed)
    w = np.full(config.n_max, config.init_weight, dtype=np.float64)
    eta = config.eta_initial
    mean_old = math.inf
    trace: list[EpochRecord] = []
    start = time.monotonic()

    for epoch in range(1, config.max_epochs + 1):
        pos = [related[i] for i in rng.permutation(len(related))]
        neg = [nonrelated[i] for i in rng.permutation(len(nonrelated))]
        n_batches = min(len(pos), len(neg)) // half
        mean_loss = 0.0
        for i in range(1, n_batches + 1):
            batch = pos[(i - 1) * half : i * half] + neg[(i - 1) * half : i * half]
            loss_value, grad = batch_loss_and_gradient(
                batch, w, config.loss, config.kappa, config.lam
            )
            if not math.isfinite(loss_value):
                raise FloatingPointError(
                    f"non-finite loss at epoch {epoch}, batch {i}; weights={w!r}"
                )
            w = w - eta * grad
            mean_loss = ((i - 1) * mean_loss + loss_value) / i

        trace.append(
            EpochRecord(epoch, mean_loss, eta, time.monotonic() - start)
        )
        if eta > config.eta_reduced and mean_loss > mean_old:
            eta = config.eta_reduced
        elif eta == config.eta_reduced and mean_old - mean_loss < config.stop_delta:
            mean_old = mean_loss
            break
        mean_old = mean_loss

    model = WeightModel(
        n_max=config.n_max,
        weights=w,
        metric="euclidean",
        metadata={
            "loss": config.loss,
            "kappa": config.kappa,
            "lambda": config.lam,
            "seed": config.seed,
            "epochs": len(trace),
        },
    )
    return model, trace


def train(
    pairs: Sequence[TextPair],
    table: EmbeddingTable,
    idf: IdfTable,
    config: TrainConfig,
) -> tuple[WeightModel, list[EpochRecord]]:
    """Prepare couples from labeled pairs and run the training loop."""
    couples = prepare_couples(pairs, table, idf, config.n_max)
    return train_couples(couples, config)


def grid_search_kappa(
    pairs: Sequence[TextPair],
    table: EmbeddingTable,
    idf: IdfTable,
    config: TrainConfig,
    grid: Sequence[float] = (10, 20, 40, 80, 160, 320),
    folds: int = 5,
) -> tuple[float, dict[float, float]]:
    """Pick kappa by k-fold cross-validated split error (median loss).

    Folds are stratified by label.  Ties break toward the smaller kappa;
    a fold that fails to train scores that kappa as error 1.0.
    """
    from .evaluate import optimal_split

    if folds < 2:
        raise ValueError("folds must be >= 2")
    if not grid:
        raise ValueError("kappa grid is empty")

    couples = prepare_couples(pairs, table, idf, config.n_max)
    related = [c for c in couples if c.label == +1]
    nonrelated = [c for c in couples if c.label == -1]

    def fold_of(i: int) -> int:
        return i % folds

    scores: dict[float, float] = {}
    for kappa in grid:
        errors = []
        for k in range(folds):
            train_set = [c for i, c in enumerate(related) if fold_of(i) != k]
            train_set += [c for i, c in enumerate(nonrelated) if fold_of(i) != k]
            held_out = [c for i, c in enumerate(related) if fold_of(i) == k]
            held_out += [c for i, c in enumerate(nonrelated) if fold_of(i) == k]
            try:
                fold_config = TrainConfig(
                    **{**config.__dict__, "kappa": kappa, "loss": "median"}
                )
                model, _ = train_couples(train_set, fold_config)
                samples = [
                    (
                        couple_distance_and_gradient(
                            c, model.weights, config.n_max
                        )[0],
                        c.label,
                    )
                    for c in held_out
                ]
                _, err = optimal_split(samples)
                errors.append(err)
            except (ValueError, FloatingPointError) as exc:
                warnings.warn(f"fold {k} failed for kappa={kappa}: {exc}")
                errors.append(1.0)
        scores[float(kappa)] = float(np.mean(errors))

    best = min(scores, key=lambda k: (scores[k], k))
    return best, scores
