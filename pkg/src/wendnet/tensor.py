"""Dense float64 tensor helpers, seeded RNG substreams, and a finite-difference
gradient checker.

Everything is backed by C-contiguous float64 numpy arrays.  Accumulation order
is numpy's row-major order, so results are bit-reproducible on a given
platform.  Broadcasting is deliberately restricted: the only allowed implicit
broadcast is a bias vector added over the rows of a matrix.
"""

from __future__ import annotations

import hashlib
from typing import Callable, Sequence

import numpy as np


class ShapeError(ValueError):
    """Tensor shapes do not satisfy an operation's contract."""


def tensor(data) -> np.ndarray:
    """Materialize `data` as a C-contiguous float64 array."""
    return np.ascontiguousarray(np.asarray(data, dtype=np.float64))


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = tensor(a)
    b = tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects 2-d operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dimensions disagree: {a.shape} x {b.shape}")
    return a @ b


def _check_same_shape(a: np.ndarray, b: np.ndarray, op: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Elementwise sum.  As the one permitted broadcast, a 1-d bias may be
    added over the rows of a 2-d matrix."""
    a = tensor(a)
    b = tensor(b)
    if a.shape == b.shape:
        return a + b
    if a.ndim == 2 and b.ndim == 1 and a.shape[1] == b.shape[0]:
        return a + b
    raise ShapeError(f"add: shape mismatch {a.shape} vs {b.shape}")


def sub(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = tensor(a)
    b = tensor(b)
    _check_same_shape(a, b, "sub")
    return a - b


def mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = tensor(a)
    b = tensor(b)
    _check_same_shape(a, b, "mul")
    return a * b


def scale(a: np.ndarray, s: float) -> np.ndarray:
    return tensor(a) * float(s)


def ew_map(f: Callable[[np.ndarray], np.ndarray], a: np.ndarray) -> np.ndarray:
    out = tensor(f(tensor(a)))
    return out


def reduce_norm(x: np.ndarray, axis: int) -> np.ndarray:
    """L2 norm along `axis`, keeping that axis as size 1."""
    x = tensor(x)
    if not -x.ndim <= axis < x.ndim:
        raise ShapeError(f"reduce_norm: axis {axis} invalid for shape {x.shape}")
    return np.sqrt(np.sum(x * x, axis=axis, keepdims=True))


# ---------------------------------------------------------------------------
# Seeded randomness.  PCG64 with SeedSequence entropy gives identical streams
# for identical (seed, key) on every platform; substreams derived from string
# keys are independent of call order.
# ---------------------------------------------------------------------------

def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed)))


def _key_to_int(key) -> int:
    if isinstance(key, int):
        return key
    digest = hashlib.sha256(str(key).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def substream(seed: int, *keys) -> np.random.Generator:
    """Derive an independent generator from a root seed and a path of keys.

    Keys may be ints or strings; the same (seed, keys) always yields the same
    stream regardless of what other substreams were drawn.
    """
    entropy = [int(seed)] + [_key_to_int(k) for k in keys]
    return np.random.default_rng(np.random.SeedSequence(entropy))


# ---------------------------------------------------------------------------
# Finite-difference gradient checking.
# ---------------------------------------------------------------------------

def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    """max over components of |a-b| / max(1, |a|, |b|)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0


class NonFiniteError(RuntimeError):
    """A probed function produced NaN or Inf."""


def finite_diff_check(
    f: Callable[[np.ndarray], np.ndarray],
    x: np.ndarray,
    analytic_jvp: Callable[[np.ndarray], np.ndarray],
    probes: int = 20,
    step: float | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Compare analytic Jacobian-vector products against central differences.

    For `probes` random unit directions v, evaluates
    (f(x + h v) - f(x - h v)) / 2h against analytic_jvp(v) and returns the
    worst relative error seen, with relative = |a-b| / max(1, |a|, |b|).
    """
    x = tensor(x)
    if rng is None:
        rng = make_rng(0)
    if step is None:
        step = 1e-6 * max(1.0, float(np.max(np.abs(x))) if x.size else 1.0)
    worst = 0.0
    for i in range(probes):
        v = rng.standard_normal(x.shape)
        norm = np.sqrt(np.sum(v * v))
        if norm == 0.0:
            continue
        v /= norm
        fp = np.asarray(f(x + step * v), dtype=np.float64)
        fm = np.asarray(f(x - step * v), dtype=np.float64)
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
            raise NonFiniteError(f"non-finite function output at probe {i}")
        numeric = (fp - fm) / (2.0 * step)
        analytic = np.asarray(analytic_jvp(v), dtype=np.float64)
        worst = max(worst, relative_error(analytic, numeric))
    return worst
