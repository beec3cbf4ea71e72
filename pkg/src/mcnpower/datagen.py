"""Synthetic rule-set dataset generation, labeling, encoding, and splitting.

Datasets are tensors of shape ``(k, n, 2m+1)``: each of the ``k``
datapoints is a rule set of ``n`` rules over ``m`` agents, and each rule
slot holds ``m`` required-agent bits, ``m`` banned-agent bits, and one
weight. Labels, when present, are ``(k, m)`` per-agent power-index
estimates. Everything is reproducible from the generation seed: datapoint
``i`` draws its masks from stream ``i`` of the generation seed, its
weights and its labeling stream from splitmix64-derived child seeds.

Rule weights are quantized to float32 before use so that the float32
on-disk tensor reproduces them exactly on decode.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .errors import DataFormatError, ZeroTotalWeightError
from .exact import IndexKind
from .game import Rule, RuleSet
from .sampling import McConfig, derive_seed, mc_banzhaf, mc_shapley, stream_rng
from ._ioutil import atomic_write_bytes, atomic_write_text, config_hash

DATASET_FORMAT_VERSION = 1


class GenMethod(str, Enum):
    UNIFORM = "uniform"
    COINFLIP = "coinflip"
    MOG = "mog"


class WeightScheme(str, Enum):
    UNIFORM = "uniform"
    GAUSS_LOW = "gauss_low"
    GAUSS_HIGH = "gauss_high"


@dataclass(frozen=True)
class GenSpec:
    """Parameters for one synthetic dataset."""

    method: GenMethod
    k: int
    n: int
    m: int
    p: float = 0.5  # rounding threshold (uniform, mog)
    c: int = 1  # coin draws per rule (coinflip)
    alpha: float = 2.0  # gamma shape (mog)
    beta: float = 1.0  # gamma rate (mog)
    weight_scheme: WeightScheme = WeightScheme.UNIFORM
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "method", GenMethod(self.method))
        object.__setattr__(self, "weight_scheme", WeightScheme(self.weight_scheme))
        if self.k < 1 or self.n < 1 or self.m < 1:
            raise ValueError("k, n, and m must all be >= 1")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must be in [0, 1], got {self.p}")
        if self.method is GenMethod.COINFLIP and self.c < 1:
            raise ValueError(f"c must be >= 1 for coinflip, got {self.c}")
        if self.method is GenMethod.MOG and (self.alpha <= 0 or self.beta <= 0):
            raise ValueError("alpha and beta must be > 0 for mog")

    def to_dict(self) -> dict:
        return {
            "method": self.method.value,
            "k": self.k,
            "n": self.n,
            "m": self.m,
            "p": self.p,
            "c": self.c,
            "alpha": self.alpha,
            "beta": self.beta,
            "weight_scheme": self.weight_scheme.value,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GenSpec":
        try:
            return cls(**doc)
        except (TypeError, ValueError) as e:
            raise DataFormatError(f"bad generation spec: {e}") from e


@dataclass
class LabeledDataset:
    """Encoded rule tensor plus (optionally) per-agent index labels.

    ``labels`` is None between generation and labeling. ``pad_m`` is set
    once the agent axis has been zero-padded to a wider universe.
    """

    spec: GenSpec
    tensor: np.ndarray  # float32 (k, n, 2*m_eff + 1)
    labels: np.ndarray | None = None  # float32 (k, m_eff)
    label_kind: IndexKind | None = None
    label_samples: int | None = None
    label_seed: int | None = None
    pad_m: int | None = None

    @property
    def k(self) -> int:
        return self.tensor.shape[0]

    @property
    def m_eff(self) -> int:
        return self.pad_m if self.pad_m is not None else self.spec.m

    def label_config(self) -> dict | None:
        if self.label_kind is None:
            return None
        return {
            "kind": self.label_kind.value,
            "samples": self.label_samples,
            "seed": self.label_seed,
        }


def assign_weights(scheme: WeightScheme, n: int, seed: int) -> np.ndarray:
    """Rule weights for one datapoint.

    ``uniform`` gives every rule weight 1; the two Gaussian schemes draw
    from N(5, 1) and N(15, 25) respectively. Draws are clamped below at
    0.01 so total weight stays positive, and quantized to float32.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    scheme = WeightScheme(scheme)
    if scheme is WeightScheme.UNIFORM:
        return np.ones(n, dtype=np.float64)
    rng = stream_rng(seed)
    if scheme is WeightScheme.GAUSS_LOW:
        w = rng.normal(5.0, 1.0, size=n)
    else:
        w = rng.normal(15.0, 5.0, size=n)
    w = w.astype(np.float32).astype(np.float64)
    # the floor must itself be float32-exact and >= 0.01, so take the first
    # float32 at or above it
    floor = float(np.nextafter(np.float32(0.01), np.float32(1.0)))
    return np.maximum(w, floor)


def _masks_to_ruleset(
    req_bits: np.ndarray, ban_bits: np.ndarray, weights: np.ndarray, m: int
) -> RuleSet:
    powers = np.left_shift(
        np.uint64(1), np.arange(m, dtype=np.uint64)
    )
    req_masks = req_bits.astype(np.uint64) @ powers
    ban_masks = ban_bits.astype(np.uint64) @ powers
    rules = tuple(
        Rule(req=int(r), ban=int(b), weight=float(w))
        for r, b, w in zip(req_masks, ban_masks, weights)
    )
    return RuleSet(m=m, rules=rules)


def _threshold_masks(x: np.ndarray, y: np.ndarray, p: float):
    """Shared rounding step: req where x >= p; ban where req is 0 and y >= p."""
    req = x >= p
    ban = ~req & (y >= p)
    return req, ban


def gen_uniform(spec: GenSpec) -> list[RuleSet]:
    """Rule sets from independent uniform draws thresholded at p."""
    if spec.method is not GenMethod.UNIFORM:
        raise ValueError(f"spec method is {spec.method.value}, not uniform")
    out = []
    for i in range(spec.k):
        rng = stream_rng(spec.seed, i)
        x = rng.random((spec.n, spec.m))
        y = rng.random((spec.n, spec.m))
        req, ban = _threshold_masks(x, y, spec.p)
        w = assign_weights(spec.weight_scheme, spec.n, derive_seed(spec.seed, i))
        out.append(_masks_to_ruleset(req, ban, w, spec.m))
    return out


def gen_coinflip(spec: GenSpec) -> list[RuleSet]:
    """Rule sets built by c coin flips per rule.

    Each flip picks a uniform agent and assigns it to the required side on
    heads, the banned side on tails; a later flip for the same agent within
    a rule overwrites the earlier one, and masks reset between rules.
    """
    if spec.method is not GenMethod.COINFLIP:
        raise ValueError(f"spec method is {spec.method.value}, not coinflip")
    out = []
    for i in range(spec.k):
        rng = stream_rng(spec.seed, i)
        idx = rng.integers(0, spec.m, size=(spec.n, spec.c))
        heads = rng.random((spec.n, spec.c)) >= 0.5
        req = np.zeros((spec.n, spec.m), dtype=bool)
        ban = np.zeros((spec.n, spec.m), dtype=bool)
        for j in range(spec.n):
            for l in range(spec.c):
                a = idx[j, l]
                req[j, a] = heads[j, l]
                ban[j, a] = not heads[j, l]
        w = assign_weights(spec.weight_scheme, spec.n, derive_seed(spec.seed, i))
        out.append(_masks_to_ruleset(req, ban, w, spec.m))
    return out


def gen_mog(spec: GenSpec) -> list[RuleSet]:
    """Rule sets from per-datapoint Gaussians with gamma-drawn mean and spread.

    Each datapoint draws its own mu and sigma from Gamma(alpha, rate=beta),
    samples normal arrays, and applies the same thresholding as the uniform
    method, so rule density varies across datapoints.
    """
    if spec.method is not GenMethod.MOG:
        raise ValueError(f"spec method is {spec.method.value}, not mog")
    out = []
    for i in range(spec.k):
        rng = stream_rng(spec.seed, i)
        mu = rng.gamma(shape=spec.alpha, scale=1.0 / spec.beta)
        sigma = rng.gamma(shape=spec.alpha, scale=1.0 / spec.beta)
        x = rng.normal(mu, sigma, size=(spec.n, spec.m))
        y = rng.normal(mu, sigma, size=(spec.n, spec.m))
        req, ban = _threshold_masks(x, y, spec.p)
        w = assign_weights(spec.weight_scheme, spec.n, derive_seed(spec.seed, i))
        out.append(_masks_to_ruleset(req, ban, w, spec.m))
    return out


_GENERATORS = {
    GenMethod.UNIFORM: gen_uniform,
    GenMethod.COINFLIP: gen_coinflip,
    GenMethod.MOG: gen_mog,
}


def generate_rulesets(spec: GenSpec) -> list[RuleSet]:
    return _GENERATORS[spec.method](spec)


def encode_rulesets(rulesets: list[RuleSet], m: int | None = None) -> np.ndarray:
    """Pack rule sets into the (k, n, 2m+1) float32 tensor layout."""
    if not rulesets:
        raise ValueError("cannot encode an empty ruleset list")
    n = rulesets[0].n
    m = m if m is not None else rulesets[0].m
    if any(rs.n != n or rs.m > m for rs in rulesets):
        raise ValueError("all rule sets must share n and fit the agent width")
    tensor = np.zeros((len(rulesets), n, 2 * m + 1), dtype=np.float32)
    agent_bits = np.arange(m, dtype=np.uint64)
    for i, rs in enumerate(rulesets):
        req, ban, w = rs.mask_arrays()
        tensor[i, :, :m] = (req[:, None] >> agent_bits) & np.uint64(1)
        tensor[i, :, m : 2 * m] = (ban[:, None] >> agent_bits) & np.uint64(1)
        tensor[i, :, 2 * m] = w.astype(np.float32)
    return tensor


def decode_rulesets(ds: LabeledDataset) -> list[RuleSet]:
    """Rebuild the rule sets encoded in a dataset tensor (exact round trip)."""
    m = ds.m_eff
    out = []
    for i in range(ds.k):
        slab = ds.tensor[i]
        req = slab[:, :m] > 0.5
        ban = slab[:, m : 2 * m] > 0.5
        w = slab[:, 2 * m].astype(np.float64)
        out.append(_masks_to_ruleset(req, ban, w, m))
    return out


def generate_dataset(spec: GenSpec) -> LabeledDataset:
    """Generate rule sets per the spec and encode them (labels not yet set)."""
    return LabeledDataset(spec=spec, tensor=encode_rulesets(generate_rulesets(spec)))


def label_rulesets(
    rulesets: list[RuleSet],
    label_kind: IndexKind,
    n_samples: int,
    seed: int,
    workers: int = 1,
) -> np.ndarray:
    """Monte-Carlo labels for each rule set; datapoint i uses child seed i."""
    label_kind = IndexKind(label_kind)
    if label_kind is IndexKind.BANZHAF_ALG4:
        estimator = mc_banzhaf
    elif label_kind is IndexKind.SHAPLEY_ALG5:
        estimator = mc_shapley
    else:
        raise ValueError(f"labels must be banzhaf_alg4 or shapley_alg5, got {label_kind}")

    def one(i: int) -> np.ndarray:
        cfg = McConfig(n_samples=n_samples, seed=derive_seed(seed, i))
        try:
            return estimator(rulesets[i], cfg).values
        except ZeroTotalWeightError as e:
            raise ZeroTotalWeightError(f"datapoint {i}: {e}") from e

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, range(len(rulesets))))
    else:
        rows = [one(i) for i in range(len(rulesets))]
    return np.stack(rows).astype(np.float32)


def label_dataset(
    ds: LabeledDataset,
    label_kind: IndexKind,
    n_samples: int,
    seed: int,
    workers: int = 1,
) -> LabeledDataset:
    """Attach Monte-Carlo power-index labels to a dataset."""
    rulesets = decode_rulesets(ds)
    labels = label_rulesets(rulesets, label_kind, n_samples, seed, workers)
    return LabeledDataset(
        spec=ds.spec,
        tensor=ds.tensor,
        labels=labels,
        label_kind=IndexKind(label_kind),
        label_samples=n_samples,
        label_seed=seed,
        pad_m=ds.pad_m,
    )


def pad_dataset(ds: LabeledDataset, target_m: int) -> LabeledDataset:
    """Widen the agent axis to ``target_m`` with zero columns on the right.

    The required-bit block, banned-bit block, and label rows each keep
    their original values at their original offsets; the new agents are
    dummies everywhere.
    """
    m = ds.m_eff
    if target_m < m:
        raise ValueError(f"target_m {target_m} smaller than current width {m}")
    if target_m == m:
        return ds
    k, n, _ = ds.tensor.shape
    tensor = np.zeros((k, n, 2 * target_m + 1), dtype=np.float32)
    tensor[:, :, :m] = ds.tensor[:, :, :m]
    tensor[:, :, target_m : target_m + m] = ds.tensor[:, :, m : 2 * m]
    tensor[:, :, 2 * target_m] = ds.tensor[:, :, 2 * m]
    labels = None
    if ds.labels is not None:
        labels = np.zeros((k, target_m), dtype=np.float32)
        labels[:, :m] = ds.labels
    return LabeledDataset(
        spec=ds.spec,
        tensor=tensor,
        labels=labels,
        label_kind=ds.label_kind,
        label_samples=ds.label_samples,
        label_seed=ds.label_seed,
        pad_m=target_m,
    )


def split_dataset(
    ds: LabeledDataset, ratio: float, seed: int
) -> tuple[LabeledDataset, LabeledDataset]:
    """Deterministic shuffled split into (train, test) by datapoint."""
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")
    k = ds.k
    train_k = int(round(k * ratio))
    if train_k < 1 or train_k > k - 1:
        raise ValueError(f"split of {k} datapoints at ratio {ratio} leaves a side empty")
    perm = stream_rng(seed).permutation(k)
    parts = []
    for sel in (perm[:train_k], perm[train_k:]):
        parts.append(
            LabeledDataset(
                spec=ds.spec,
                tensor=ds.tensor[sel].copy(),
                labels=None if ds.labels is None else ds.labels[sel].copy(),
                label_kind=ds.label_kind,
                label_samples=ds.label_samples,
                label_seed=ds.label_seed,
                pad_m=ds.pad_m,
            )
        )
    return parts[0], parts[1]


# --- on-disk format ----------------------------------------------------------
#
# A dataset is a directory: meta.json describes the generation and labeling
# configuration; tensor.bin and labels.bin are raw little-endian float32
# arrays in row-major order.


def save_dataset(ds: LabeledDataset, path: str) -> None:
    os.makedirs(path, exist_ok=True)
    meta = {
        "format_version": DATASET_FORMAT_VERSION,
        "gen": ds.spec.to_dict(),
        "label": ds.label_config(),
        "pad_m": ds.pad_m,
        "k": ds.k,
        "n": ds.tensor.shape[1],
        "m": ds.m_eff,
    }
    meta["config_hash"] = config_hash(meta)
    atomic_write_text(os.path.join(path, "meta.json"), json.dumps(meta, indent=2) + "\n")
    atomic_write_bytes(os.path.join(path, "tensor.bin"), ds.tensor.astype("<f4").tobytes())
    if ds.labels is not None:
        atomic_write_bytes(
            os.path.join(path, "labels.bin"), ds.labels.astype("<f4").tobytes()
        )


def load_dataset(path: str) -> LabeledDataset:
    meta_path = os.path.join(path, "meta.json")
    try:
        with open(meta_path, encoding="utf-8") as f:
            meta = json.load(f)
    except FileNotFoundError:
        raise DataFormatError(f"no dataset at {path}: missing meta.json") from None
    except json.JSONDecodeError as e:
        raise DataFormatError(f"corrupt meta.json in {path}: {e}") from e
    version = meta.get("format_version")
    if version != DATASET_FORMAT_VERSION:
        raise DataFormatError(
            f"dataset format version {version} unsupported (expected {DATASET_FORMAT_VERSION})"
        )
    spec = GenSpec.from_dict(meta["gen"])
    k, n, m = meta["k"], meta["n"], meta["m"]
    width = 2 * m + 1
    tensor = _read_f32(os.path.join(path, "tensor.bin"), k * n * width)
    tensor = tensor.reshape(k, n, width)
    labels = None
    label_kind = label_samples = label_seed = None
    label_cfg = meta.get("label")
    if label_cfg is not None:
        labels = _read_f32(os.path.join(path, "labels.bin"), k * m).reshape(k, m)
        label_kind = IndexKind(label_cfg["kind"])
        label_samples = label_cfg["samples"]
        label_seed = label_cfg["seed"]
    return LabeledDataset(
        spec=spec,
        tensor=tensor,
        labels=labels,
        label_kind=label_kind,
        label_samples=label_samples,
        label_seed=label_seed,
        pad_m=meta.get("pad_m"),
    )


def _read_f32(path: str, expected: int) -> np.ndarray:
    try:
        raw = np.fromfile(path, dtype="<f4")
    except FileNotFoundError:
        raise DataFormatError(f"missing array file {path}") from None
    if raw.size != expected:
        raise DataFormatError(
            f"{path} holds {raw.size} float32 values, expected {expected}"
        )
    return raw
