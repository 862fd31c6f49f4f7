"""Trainable weight matrices of the attention-parametrized genetic operators.

Weights are stored as float32 (checkpoints stay compact, and the meta-search
operates on the float32 values); all kernels upcast to float64 for the
actual arithmetic.
"""

from dataclasses import dataclass, field, replace

import numpy as np

__all__ = ["FeatureConfig", "LgaParams", "weight_shapes"]

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class FeatureConfig:
    """Dimensions of the operator feature spaces and attention layout."""

    d_k: int = 16
    heads: int = 1
    d_fit: int = 3
    d_sigma: int = 2
    d_elite: int = 2
    with_sampling: bool = False
    with_crossover: bool = False

    def __post_init__(self):
        if self.heads < 1:
            raise ValueError("need at least one attention head")
        if min(self.d_k, self.d_fit, self.d_sigma, self.d_elite) < 1:
            raise ValueError("feature dimensions must be positive")


def weight_shapes(cfg):
    """Ordered name -> shape map; the order fixes the flat-vector layout.

    Per-head query/key/value projections carry a leading head axis; the
    output projections only exist for more than one head (a single head
    feeds its attention output through unprojected).
    """
    h, dk, df = cfg.heads, cfg.d_k, cfg.d_fit
    dm = cfg.d_fit + cfg.d_sigma
    shapes = {
        "sel_q": (h, df, dk),
        "sel_k": (h, df, dk),
        "sel_v": (h, df, dk),
        "sel_q2": (dk, dk),
        "sel_k2": (df, dk),
        "mra_q": (h, dm, dk),
        "mra_k": (h, dm, dk),
        "mra_v": (h, dm, dk),
        "mra_sigma": (dk, 1),
    }
    if h > 1:
        shapes["sel_out"] = (h * dk, dk)
        shapes["mra_out"] = (h * dk, dk)
    if cfg.with_sampling:
        shapes["smp_q"] = (df + 1, dk)
        shapes["smp_k"] = (df + 1, dk)
        shapes["smp_v"] = (df + 1, 1)
    if cfg.with_crossover:
        dx = df + cfg.d_elite
        shapes["co_q"] = (dx, dk)
        shapes["co_k"] = (dx, dk)
        shapes["co_v"] = (dx, dk)
        shapes["co_dx"] = (dk, 1)
    return shapes


@dataclass
class LgaParams:
    """A concrete learned-GA instance: config plus named weight matrices."""

    cfg: FeatureConfig
    weights: dict = field(default_factory=dict)

    def __post_init__(self):
        shapes = weight_shapes(self.cfg)
        if set(self.weights) != set(shapes):
            missing = set(shapes) - set(self.weights)
            extra = set(self.weights) - set(shapes)
            raise ValueError(f"weight names mismatch: missing={sorted(missing)}"
                             f" extra={sorted(extra)}")
        for name, shape in shapes.items():
            arr = np.asarray(self.weights[name], dtype=np.float32)
            if arr.shape != shape:
                raise ValueError(f"{name}: expected shape {shape}, "
                                 f"got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name}: non-finite weights")
            self.weights[name] = arr

    @classmethod
    def zeros(cls, cfg=None):
        cfg = cfg or FeatureConfig()
        return cls(cfg, {n: np.zeros(s, dtype=np.float32)
                         for n, s in weight_shapes(cfg).items()})

    @classmethod
    def random(cls, cfg=None, rng=None, scale=0.1):
        cfg = cfg or FeatureConfig()
        rng = rng if rng is not None else np.random.default_rng()
        return cls(cfg, {
            n: (scale * rng.standard_normal(s)).astype(np.float32)
            for n, s in weight_shapes(cfg).items()
        })

    @property
    def n_params(self):
        return sum(int(np.prod(s)) for s in weight_shapes(self.cfg).values())

    def to_vector(self):
        return np.concatenate(
            [self.weights[n].ravel() for n in weight_shapes(self.cfg)]
        ).astype(np.float32)

    @classmethod
    def from_vector(cls, cfg, vec):
        vec = np.asarray(vec, dtype=np.float32).ravel()
        shapes = weight_shapes(cfg)
        total = sum(int(np.prod(s)) for s in shapes.values())
        if vec.size != total:
            raise ValueError(f"expected {total} scalars, got {vec.size}")
        weights, offset = {}, 0
        for name, shape in shapes.items():
            size = int(np.prod(shape))
            weights[name] = vec[offset:offset + size].reshape(shape).copy()
            offset += size
        return cls(cfg, weights)

    def with_extra_operators(self, sampling=False, crossover=False, rng=None,
                             scale=0.1):
        """Copy of these params with sampling/cross-over weights added."""
        cfg = replace(self.cfg,
                      with_sampling=self.cfg.with_sampling or sampling,
                      with_crossover=self.cfg.with_crossover or crossover)
        donor = (LgaParams.random(cfg, rng, scale) if rng is not None
                 else LgaParams.zeros(cfg))
        weights = dict(donor.weights)
        weights.update({n: w.copy() for n, w in self.weights.items()})
        return LgaParams(cfg, weights)

    # -- checkpoint I/O ----------------------------------------------------
    # Plain-text format: a version line, a [config] block and one [matrix *]
    # block per weight with row-major decimal values. float32 values are
    # written with enough digits that parsing is bit-exact.

    def save(self, path):
        lines = [f"format-version: {CHECKPOINT_VERSION}", "[config]"]
        for key in ("d_k", "heads", "d_fit", "d_sigma", "d_elite"):
            lines.append(f"{key}: {getattr(self.cfg, key)}")
        lines.append(f"with_sampling: {int(self.cfg.with_sampling)}")
        lines.append(f"with_crossover: {int(self.cfg.with_crossover)}")
        for name in weight_shapes(self.cfg):
            arr = self.weights[name]
            lines.append(f"[matrix {name}]")
            lines.append(f"rows: {arr.shape[0] if arr.ndim > 1 else 1}")
            lines.append("shape: " + " ".join(str(d) for d in arr.shape))
            lines.append(" ".join(_f32_repr(v) for v in arr.ravel()))
        with open(path, "w", encoding="ascii") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="ascii") as fh:
            lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
        if not lines or not lines[0].startswith("format-version:"):
            raise ValueError(f"{path}: missing format-version header")
        version = int(lines[0].split(":", 1)[1])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported format version {version}")
        cfg_kv, matrices, i = {}, {}, 1
        if lines[i] != "[config]":
            raise ValueError(f"{path}: expected [config] block")
        i += 1
        while i < len(lines) and not lines[i].startswith("["):
            key, val = lines[i].split(":", 1)
            cfg_kv[key.strip()] = int(val)
            i += 1
        cfg = FeatureConfig(
            d_k=cfg_kv["d_k"], heads=cfg_kv["heads"], d_fit=cfg_kv["d_fit"],
            d_sigma=cfg_kv["d_sigma"], d_elite=cfg_kv["d_elite"],
            with_sampling=bool(cfg_kv["with_sampling"]),
            with_crossover=bool(cfg_kv["with_crossover"]))
        while i < len(lines):
            header = lines[i]
            if not (header.startswith("[matrix ") and header.endswith("]")):
                raise ValueError(f"{path}: bad block header {header!r}")
            name = header[len("[matrix "):-1]
            i += 1  # rows line (redundant, kept for readability)
            shape = tuple(int(d) for d in lines[i + 1].split()[1:])
            values = np.array([np.float32(tok)
                               for tok in lines[i + 2].split()],
                              dtype=np.float32)
            matrices[name] = values.reshape(shape)
            i += 3
        return cls(cfg, matrices)


def _f32_repr(value):
    """Shortest decimal string that parses back to the same float32."""
    return np.format_float_positional(np.float32(value), unique=True,
                                      trim="0")
