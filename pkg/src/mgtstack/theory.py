"""Monte Carlo worlds for probing when mixed machine text is detectable.

A "world" fixes two sentence distributions: h (human) and m (machine), either
categorical over a finite symbol set or Gaussian with identity covariance.
Their total-variation distance delta controls how far apart the classes are.
A "mixed" machine text replaces a floor(alpha * n) share of its sentences
with draws from h, which is the mechanism that erodes detectability.

Texts are scored with the likelihood ratio log M(S) - log H(S) of the true
generative model, i.e. the best score any detector could compute.  For the
mixed class, M marginalizes over which positions are human-like: exactly
(every position subset, via a dynamic program) for small n, or with the
standard per-sentence mixture factorization for large n.  Both modes are
exposed; they agree in the exchangeable IID limit.

An oracle filter can strip a known share of human-like sentences (and a
share of machine ones) before scoring, which is how the benefit and the
breaking point of evidence filtering are mapped out.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import product
from statistics import NormalDist
from typing import IO, Mapping, Sequence

import numpy as np

from .errors import InvalidConfig, InvalidFilterSpec, UnsupportedCombination
from .evaluation import auroc, bootstrap_auroc_ci

EXACT_N_MAX = 12  # exact position-subset scoring up to this many sentences
_FLOOR_EPS = 1e-9  # snaps float noise (0.3 * 10 = 2.999...96) to the intended integer

_NORMAL = NormalDist()


def _floor_frac(x: float) -> int:
    return math.floor(x + _FLOOR_EPS)


def _ceil_frac(x: float) -> int:
    return math.ceil(x - _FLOOR_EPS)


# --------------------------------------------------------------------------
# worlds


@dataclass(frozen=True)
class SentenceWorld:
    """A pair of sentence distributions, categorical or Gaussian."""

    kind: str
    h: tuple[float, ...] | None = None
    m: tuple[float, ...] | None = None
    mu_h: tuple[float, ...] | None = None
    mu_m: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.kind == "categorical":
            if self.h is None or self.m is None or len(self.h) != len(self.m) or len(self.h) < 2:
                raise InvalidConfig("categorical world needs h and m over the same symbols")
            for vec in (self.h, self.m):
                if any(p < 0 for p in vec) or abs(sum(vec) - 1.0) > 1e-9:
                    raise InvalidConfig(f"probabilities must be non-negative and sum to 1: {vec!r}")
        elif self.kind == "gaussian":
            if self.mu_h is None or self.mu_m is None or len(self.mu_h) != len(self.mu_m):
                raise InvalidConfig("gaussian world needs mean vectors of equal dimension")
            if len(self.mu_h) < 1:
                raise InvalidConfig("gaussian world needs dimension >= 1")
        else:
            raise InvalidConfig(f"world kind must be 'categorical' or 'gaussian', got {self.kind!r}")

    @classmethod
    def categorical(cls, h: Sequence[float], m: Sequence[float]) -> "SentenceWorld":
        return cls(kind="categorical", h=tuple(float(p) for p in h), m=tuple(float(p) for p in m))

    @classmethod
    def gaussian(cls, mu_h: Sequence[float], mu_m: Sequence[float]) -> "SentenceWorld":
        return cls(
            kind="gaussian",
            mu_h=tuple(float(x) for x in mu_h),
            mu_m=tuple(float(x) for x in mu_m),
        )

    @property
    def dim(self) -> int:
        if self.kind != "gaussian":
            raise InvalidConfig("dim is defined for gaussian worlds only")
        return len(self.mu_h)


def tv_distance(world: SentenceWorld) -> float:
    """Total variation between h and m.

    Categorical: half the L1 distance.  Gaussian with identity covariance:
    2 Phi(||mu_h - mu_m|| / 2) - 1.
    """
    if world.kind == "categorical":
        return 0.5 * sum(abs(a - b) for a, b in zip(world.h, world.m))
    gap = math.sqrt(sum((a - b) ** 2 for a, b in zip(world.mu_h, world.mu_m)))
    return 2.0 * _NORMAL.cdf(gap / 2.0) - 1.0


def categorical_world(delta: float) -> SentenceWorld:
    """Two-symbol world with overlapping support and TV distance exactly delta.

    Overlap matters: disjoint-support constructions give infinite
    log-likelihood ratios, which pin every score to +-inf and make AUROC
    saturate instead of varying smoothly with n.
    """
    if not (0.0 <= delta <= 1.0):
        raise InvalidConfig(f"delta must be in [0, 1], got {delta!r}")
    return SentenceWorld.categorical(
        h=((1.0 + delta) / 2.0, (1.0 - delta) / 2.0),
        m=((1.0 - delta) / 2.0, (1.0 + delta) / 2.0),
    )


def gaussian_world(delta: float, dim: int = 2) -> SentenceWorld:
    """Identity-covariance Gaussian world with TV distance delta; the mean
    gap sits on the first axis."""
    if not (0.0 <= delta < 1.0):
        raise InvalidConfig(f"delta must be in [0, 1) for gaussian worlds, got {delta!r}")
    if dim < 1:
        raise InvalidConfig(f"dim must be >= 1, got {dim!r}")
    gap = 2.0 * _NORMAL.inv_cdf((1.0 + delta) / 2.0)
    mu_m = (gap,) + (0.0,) * (dim - 1)
    return SentenceWorld.gaussian(mu_h=(0.0,) * dim, mu_m=mu_m)


# --------------------------------------------------------------------------
# mixing and filtering parameters


@dataclass(frozen=True)
class MixSpec:
    """Composition of one text: n sentences, an alpha share of them
    human-like, optional first-order dependence rho within sequences.

    ``lengths`` splits the text into independently sampled sequences (sums to
    n); ``rho_per_seq`` overrides rho per sequence.
    """

    n: int
    alpha: float = 0.0
    rho: float = 0.0
    lengths: tuple[int, ...] | None = None
    rho_per_seq: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.n, int) or self.n < 1:
            raise InvalidConfig(f"n must be a positive integer, got {self.n!r}")
        if not (0.0 <= self.alpha < 1.0):
            raise InvalidConfig(f"alpha must be in [0, 1), got {self.alpha!r}")
        if not (0.0 <= self.rho < 1.0):
            raise InvalidConfig(f"rho must be in [0, 1), got {self.rho!r}")
        if self.lengths is not None:
            if not self.lengths or any(not isinstance(c, int) or c < 1 for c in self.lengths):
                raise InvalidConfig("sequence lengths must be positive integers")
            if sum(self.lengths) != self.n:
                raise InvalidConfig(
                    f"sequence lengths {self.lengths!r} must sum to n = {self.n}"
                )
        if self.rho_per_seq is not None:
            if self.lengths is None or len(self.rho_per_seq) != len(self.lengths):
                raise InvalidConfig("rho_per_seq needs matching sequence lengths")
            if any(not (0.0 <= r < 1.0) for r in self.rho_per_seq):
                raise InvalidConfig("each rho_j must be in [0, 1)")

    @property
    def n_human_like(self) -> int:
        return self.n - _ceil_frac((1.0 - self.alpha) * self.n)

    def sequence_lengths(self) -> tuple[int, ...]:
        return self.lengths if self.lengths is not None else (self.n,)

    def sequence_rhos(self) -> tuple[float, ...]:
        if self.rho_per_seq is not None:
            return self.rho_per_seq
        return (self.rho,) * len(self.sequence_lengths())


@dataclass(frozen=True)
class FilterSpec:
    """Oracle filtering shares: alpha_s of human-like sentences and alpha_h
    of machine sentences are removed from machine texts; human texts lose the
    same total volume, positions chosen uniformly."""

    alpha_s: float = 0.0
    alpha_h: float = 0.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.alpha_s < 1.0) or not (0.0 <= self.alpha_h < 1.0):
            raise InvalidConfig("filter shares must lie in [0, 1)")
        if self.alpha_s + self.alpha_h >= 1.0:
            raise InvalidConfig("alpha_s + alpha_h must be below 1")

    @property
    def is_identity(self) -> bool:
        return self.alpha_s == 0.0 and self.alpha_h == 0.0


def filter_condition_ok(alpha: float, fspec: FilterSpec) -> bool:
    """Approximate validity condition for filtering to help:
    alpha_s > ((1 + alpha) / (1 - alpha)) * alpha_h."""
    return fspec.alpha_s > ((1.0 + alpha) / (1.0 - alpha)) * fspec.alpha_h


@dataclass(frozen=True)
class SimConfig:
    world: SentenceWorld
    mix: MixSpec
    filter: FilterSpec | None = None
    trials: int = 2000
    seed: int = 0

    def __post_init__(self) -> None:
        if not isinstance(self.trials, int) or self.trials < 1:
            raise InvalidConfig(f"trials must be a positive integer, got {self.trials!r}")


@dataclass(frozen=True)
class SampledText:
    """One synthetic text: sentence values plus ground-truth human positions.

    Categorical sentences are an int array of shape (n,); Gaussian ones a
    float array of shape (n, dim).  ``human_positions`` marks which sentences
    were drawn from h (all of them, for the human class).
    """

    values: np.ndarray
    human_positions: tuple[int, ...]


# --------------------------------------------------------------------------
# sampling

TEXT_CLASSES = ("human", "machine_mixed")


def _check_class(text_class: str) -> None:
    if text_class not in TEXT_CLASSES:
        raise InvalidConfig(f"text_class must be one of {TEXT_CLASSES}, got {text_class!r}")


def _sample_fresh(
    world: SentenceWorld, human_mask: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Independent per-position draws; position i comes from h where
    human_mask[.., i] is True, from m elsewhere.  human_mask: (trials, n)."""
    trials, n = human_mask.shape
    if world.kind == "categorical":
        h = np.asarray(world.h)
        m = np.asarray(world.m)
        draws_h = rng.choice(len(h), size=(trials, n), p=h)
        draws_m = rng.choice(len(m), size=(trials, n), p=m)
        return np.where(human_mask, draws_h, draws_m)
    mu_h = np.asarray(world.mu_h)
    mu_m = np.asarray(world.mu_m)
    noise = rng.standard_normal((trials, n, len(mu_h)))
    means = np.where(human_mask[:, :, None], mu_h, mu_m)
    return means + noise


def sample_texts(
    world: SentenceWorld,
    mix: MixSpec,
    text_class: str,
    rng: np.random.Generator,
    trials: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized sampler: returns (values, human_mask) over ``trials`` texts.

    Machine texts place their floor(alpha * n) human-like sentences at
    uniformly random positions.  With rho > 0 (gaussian only), sentence i of
    a sequence is rho * mean(previous sentences) + (1 - rho) * fresh draw.
    """
    _check_class(text_class)
    if trials < 1:
        raise InvalidConfig("trials must be positive")
    n = mix.n
    if text_class == "human":
        human_mask = np.ones((trials, n), dtype=bool)
    else:
        k = mix.n_human_like
        human_mask = np.zeros((trials, n), dtype=bool)
        if k > 0:
            order = np.argsort(rng.random((trials, n)), axis=1)
            rows = np.arange(trials)[:, None]
            human_mask[rows, order[:, :k]] = True

    if mix.rho == 0.0 and mix.rho_per_seq is None:
        return _sample_fresh(world, human_mask, rng), human_mask

    if world.kind == "categorical":
        raise UnsupportedCombination(
            "dependent (rho > 0) sampling is defined for gaussian worlds only"
        )
    fresh = _sample_fresh(world, human_mask, rng)
    values = np.empty_like(fresh)
    start = 0
    for length, rho in zip(mix.sequence_lengths(), mix.sequence_rhos()):
        running = np.zeros((trials, fresh.shape[-1]))
        for i in range(length):
            pos = start + i
            if i == 0:
                values[:, pos] = fresh[:, pos]
            else:
                values[:, pos] = rho * (running / i) + (1.0 - rho) * fresh[:, pos]
            running = running + values[:, pos]
        start += length
    return values, human_mask


def sample_text(
    world: SentenceWorld, mix: MixSpec, text_class: str, rng: np.random.Generator
) -> SampledText:
    """Single-text convenience wrapper over sample_texts."""
    values, mask = sample_texts(world, mix, text_class, rng, trials=1)
    return SampledText(
        values=values[0], human_positions=tuple(int(i) for i in np.flatnonzero(mask[0]))
    )


# --------------------------------------------------------------------------
# likelihood-ratio scoring


def _position_log_densities(
    values: np.ndarray, world: SentenceWorld
) -> tuple[np.ndarray, np.ndarray]:
    """Per-position log h(s) and log m(s); shapes (trials, n)."""
    if world.kind == "categorical":
        with np.errstate(divide="ignore"):
            log_h = np.log(np.asarray(world.h))[values]
            log_m = np.log(np.asarray(world.m))[values]
        return log_h, log_m
    mu_h = np.asarray(world.mu_h)
    mu_m = np.asarray(world.mu_m)
    # Identity covariance, shared normalizer; constants cancel in every ratio
    # and every mixture weight comparison below, so they are omitted.
    log_h = -0.5 * ((values - mu_h) ** 2).sum(axis=-1)
    log_m = -0.5 * ((values - mu_m) ** 2).sum(axis=-1)
    return log_h, log_m


def _log_binomial(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def _lr_scores(
    values: np.ndarray, world: SentenceWorld, n_human_like: int, mode: str
) -> np.ndarray:
    """log M(S) - log H(S) for a batch of texts, shape (trials, n[, dim]);
    M marginalizes n_human_like human-like positions, exactly ("exact") or
    factorized ("mixture")."""
    if mode not in ("exact", "mixture"):
        raise InvalidConfig(f"mode must be 'exact', 'mixture' or 'auto', got {mode!r}")
    log_h, log_m = _position_log_densities(values, world)
    trials, n = log_h.shape
    k = n_human_like
    if not (0 <= k <= n):
        raise InvalidConfig(f"n_human_like must be in [0, {n}], got {k}")
    log_h_total = log_h.sum(axis=1)
    if k == 0:
        return log_m.sum(axis=1) - log_h_total
    if mode == "mixture":
        w = k / n
        if w >= 1.0:
            log_mix = log_h
        else:
            log_mix = np.logaddexp(math.log1p(-w) + log_m, math.log(w) + log_h)
        return log_mix.sum(axis=1) - log_h_total
    # Dynamic program over positions: f[:, t] is the log-sum over assignments
    # of the first j positions that used t human-like slots.
    neg_inf = np.full((trials, 1), -np.inf)
    f = np.concatenate([np.zeros((trials, 1)), np.full((trials, k), -np.inf)], axis=1)
    for j in range(n):
        shifted = np.concatenate([neg_inf, f[:, :-1]], axis=1)
        f = np.logaddexp(f + log_m[:, j : j + 1], shifted + log_h[:, j : j + 1])
    return f[:, k] - _log_binomial(n, k) - log_h_total


def likelihood_ratio_score(
    sentences: np.ndarray | Sequence,
    world: SentenceWorld,
    mix: MixSpec,
    mode: str = "auto",
) -> float:
    """Optimal-score statistic log M(S) - log H(S) for one text.

    Defined for exchangeable (rho = 0) compositions; "auto" scores exactly
    up to EXACT_N_MAX sentences and with the per-sentence mixture beyond.
    """
    if mix.rho != 0.0 or mix.rho_per_seq is not None:
        raise UnsupportedCombination(
            "the likelihood-ratio score assumes independent sentences (rho = 0)"
        )
    values = np.asarray(sentences)
    if world.kind == "categorical":
        if values.ndim != 1:
            raise InvalidConfig("categorical text must be a flat symbol sequence")
    elif values.ndim != 2 or values.shape[1] != world.dim:
        raise InvalidConfig(f"gaussian text must have shape (n, {world.dim})")
    n = values.shape[0]
    if n != mix.n:
        raise InvalidConfig(f"text has {n} sentences but mix.n = {mix.n}")
    if mode == "auto":
        mode = "exact" if n <= EXACT_N_MAX else "mixture"
    batch = values.reshape(1, *values.shape)
    return float(_lr_scores(batch, world, mix.n_human_like, mode)[0])


# --------------------------------------------------------------------------
# oracle filtering


def _remove_batch(
    values: np.ndarray,
    human_mask: np.ndarray,
    remove_h: int,
    remove_m: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Drop remove_h human-like and remove_m machine positions per text,
    uniformly at random within each pool.  Every row loses the same count,
    so the batch stays rectangular."""
    trials, n = human_mask.shape
    u = rng.random((trials, n))
    drop = np.zeros((trials, n), dtype=bool)
    rows = np.arange(trials)[:, None]
    if remove_h > 0:
        uh = np.where(human_mask, u, np.inf)
        order = np.argsort(uh, axis=1)
        drop[rows, order[:, :remove_h]] = True
    if remove_m > 0:
        um = np.where(~human_mask, u, np.inf)
        order = np.argsort(um, axis=1)
        drop[rows, order[:, :remove_m]] = True
    keep = ~drop
    n_eff = n - remove_h - remove_m
    kept_values = values[keep].reshape(trials, n_eff, *values.shape[2:])
    kept_mask = human_mask[keep].reshape(trials, n_eff)
    return kept_values, kept_mask


def apply_theory_filter(
    text: SampledText,
    fspec: FilterSpec,
    text_class: str,
    rng: np.random.Generator,
) -> SampledText:
    """Oracle filter for one text.

    Machine texts lose floor(alpha_s * n) human-like and floor(alpha_h * n)
    machine sentences (uniformly within each pool); human texts lose the same
    total count uniformly, keeping removal volume label-agnostic.
    """
    _check_class(text_class)
    n = text.values.shape[0]
    r_h = _floor_frac(fspec.alpha_s * n)
    r_m = _floor_frac(fspec.alpha_h * n)
    if r_h + r_m == 0:
        return text
    human_mask = np.zeros((1, n), dtype=bool)
    human_mask[0, list(text.human_positions)] = True
    if text_class == "machine_mixed":
        n_human = len(text.human_positions)
        if r_h > n_human:
            raise InvalidFilterSpec(
                f"alpha_s removes {r_h} human-like sentences but only {n_human} exist"
            )
        if r_m > n - n_human:
            raise InvalidFilterSpec(
                f"alpha_h removes {r_m} machine sentences but only {n - n_human} exist"
            )
        values, mask = _remove_batch(
            text.values.reshape(1, *text.values.shape), human_mask, r_h, r_m, rng
        )
    else:
        if r_h + r_m >= n:
            raise InvalidFilterSpec(f"filter would remove all {n} sentences")
        # Label-agnostic path: the pool is every sentence, volume r_h + r_m.
        values, mask = _remove_batch(
            text.values.reshape(1, *text.values.shape), human_mask, r_h + r_m, 0, rng
        )
    return SampledText(
        values=values[0], human_positions=tuple(int(i) for i in np.flatnonzero(mask[0]))
    )


# --------------------------------------------------------------------------
# experiment driver

SWEEP_KEYS = ("delta", "n", "alpha", "alpha_s", "alpha_h", "rho", "trials")


def _world_with_delta(world: SentenceWorld, delta: float) -> SentenceWorld:
    if world.kind == "categorical":
        return categorical_world(delta)
    return gaussian_world(delta, dim=world.dim)


def _point_params(cfg: SimConfig) -> dict:
    return {
        "delta": tv_distance(cfg.world),
        "n": cfg.mix.n,
        "alpha": cfg.mix.alpha,
        "alpha_s": cfg.filter.alpha_s if cfg.filter else 0.0,
        "alpha_h": cfg.filter.alpha_h if cfg.filter else 0.0,
        "rho": cfg.mix.rho,
        "trials": cfg.trials,
    }


def _run_point(task: tuple) -> dict:
    base_world, base_mix, params, seed, index, n_boot = task
    if abs(params["delta"] - tv_distance(base_world)) <= 1e-12:
        # Not swept away from the base: keep the caller's world untouched so
        # custom (non-constructor) distributions are honored.
        world = base_world
    else:
        world = _world_with_delta(base_world, params["delta"])
    mix = MixSpec(
        n=int(params["n"]),
        alpha=float(params["alpha"]),
        rho=float(params["rho"]),
        lengths=base_mix.lengths if base_mix.n == int(params["n"]) else None,
        rho_per_seq=base_mix.rho_per_seq if base_mix.n == int(params["n"]) else None,
    )
    fspec = FilterSpec(alpha_s=float(params["alpha_s"]), alpha_h=float(params["alpha_h"]))
    trials = int(params["trials"])
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))

    human_values, human_mask = sample_texts(world, mix, "human", rng, trials)
    machine_values, machine_mask = sample_texts(world, mix, "machine_mixed", rng, trials)

    n = mix.n
    k = mix.n_human_like
    if not fspec.is_identity:
        r_h = _floor_frac(fspec.alpha_s * n)
        r_m = _floor_frac(fspec.alpha_h * n)
        if r_h > k:
            raise InvalidFilterSpec(
                f"alpha_s = {fspec.alpha_s} removes {r_h} human-like sentences "
                f"but machine texts only contain {k}"
            )
        if r_m > n - k:
            raise InvalidFilterSpec(
                f"alpha_h = {fspec.alpha_h} removes {r_m} machine sentences "
                f"but machine texts only contain {n - k}"
            )
        if r_h + r_m >= n:
            raise InvalidFilterSpec("filter would remove every sentence")
        machine_values, machine_mask = _remove_batch(
            machine_values, machine_mask, r_h, r_m, rng
        )
        human_values, human_mask = _remove_batch(human_values, human_mask, r_h + r_m, 0, rng)
        n_eff = n - r_h - r_m
        k_eff = k - r_h
    else:
        n_eff, k_eff = n, k

    mode = "exact" if n_eff <= EXACT_N_MAX else "mixture"
    pos_scores = _lr_scores(machine_values, world, k_eff, mode)
    neg_scores = _lr_scores(human_values, world, k_eff, mode)
    scores = np.r_[pos_scores, neg_scores]
    labels = np.r_[np.ones(trials, dtype=np.int64), np.zeros(trials, dtype=np.int64)]
    point_auroc = auroc(scores, labels)
    ci_lo, ci_hi = bootstrap_auroc_ci(pos_scores, neg_scores, n_boot=n_boot, rng=rng)

    row = dict(params)
    row.update(
        {
            "seed": seed,
            "auroc": point_auroc,
            "ci_lo": ci_lo,
            "ci_hi": ci_hi,
            "n_pos": trials,
            "n_neg": trials,
            "score_mode": mode,
            "score_model_mismatch": bool(mix.rho != 0.0),
            "filter_condition_violated": (
                None if fspec.is_identity else not filter_condition_ok(params["alpha"], fspec)
            ),
        }
    )
    return row


def run_experiment(
    cfg: SimConfig,
    sweep: Mapping[str, Sequence] | None = None,
    jobs: int = 1,
) -> list[dict]:
    """Run one AUROC measurement per sweep grid point.

    ``sweep`` maps parameter names (SWEEP_KEYS) to value lists; missing keys
    stay at their SimConfig values.  The grid is the Cartesian product in
    fixed key order, and every point gets its own derived RNG stream, so
    results do not depend on the worker count.
    """
    if cfg.trials < 100:
        raise InvalidConfig("at least 100 trials per class are required for reported AUROC")
    sweep = dict(sweep or {})
    unknown = set(sweep) - set(SWEEP_KEYS)
    if unknown:
        raise InvalidConfig(f"unknown sweep keys: {sorted(unknown)}")
    base = _point_params(cfg)
    axes = []
    for key in SWEEP_KEYS:
        values = sweep.get(key)
        axes.append([base[key]] if values is None else list(values))
    points = [dict(zip(SWEEP_KEYS, combo)) for combo in product(*axes)]
    for p in points:
        if int(p["trials"]) < 100:
            raise InvalidConfig("at least 100 trials per class are required for reported AUROC")
    tasks = [
        (cfg.world, cfg.mix, params, cfg.seed, index, 1000)
        for index, params in enumerate(points)
    ]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_point, tasks))
    return [_run_point(t) for t in tasks]


CSV_COLUMNS = (
    "delta",
    "n",
    "alpha",
    "alpha_s",
    "alpha_h",
    "rho",
    "trials",
    "seed",
    "auroc",
    "ci_lo",
    "ci_hi",
    "n_pos",
    "n_neg",
    "score_mode",
    "score_model_mismatch",
    "filter_condition_violated",
)


def write_rows_csv(rows: Sequence[dict], dest: IO[str] | str) -> None:
    """Write experiment rows as CSV to a path or an open text stream."""
    if hasattr(dest, "write"):
        _write_rows_csv(rows, dest)
    else:
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            _write_rows_csv(rows, fh)


def _write_rows_csv(rows: Sequence[dict], fh: IO[str]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([_csv_cell(row[c]) for c in CSV_COLUMNS])


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def aggregate_over_seeds(rows_per_seed: Sequence[Sequence[dict]]) -> list[dict]:
    """Paper-style mean and std of AUROC across repeated seeded runs.

    Each element of rows_per_seed is the row list of one run_experiment call;
    rows are matched up by grid position.
    """
    if not rows_per_seed:
        return []
    length = len(rows_per_seed[0])
    if any(len(rows) != length for rows in rows_per_seed):
        raise InvalidConfig("seed runs cover different grids")
    out = []
    for i in range(length):
        aurocs = np.array([rows[i]["auroc"] for rows in rows_per_seed])
        agg = {k: rows_per_seed[0][i][k] for k in SWEEP_KEYS}
        agg["auroc_mean"] = float(aurocs.mean())
        agg["auroc_std"] = float(aurocs.std(ddof=1)) if len(aurocs) > 1 else 0.0
        agg["n_seeds"] = len(aurocs)
        out.append(agg)
    return out
