"""Parameter storage, seeded initialization, Adam, and finite-difference checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from .errors import ContractError, OptimizerError
from .tensor import Tensor


class Rng:
    """Deterministic random stream: PCG64 seeded with a 64-bit integer.

    The same seed always yields the same stream, independent of platform.
    Child streams are derived through ``spawn_key`` so that sub-generators
    (init, shuffling, ...) stay independent and reproducible.
    """

    def __init__(self, seed: int, spawn_key: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.spawn_key = spawn_key
        self._gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=spawn_key))
        )

    def child(self, key: int) -> "Rng":
        return Rng(self.seed, self.spawn_key + (int(key),))

    def uniform(self, low: float, high: float, shape=()) -> np.ndarray:
        return self._gen.uniform(low, high, size=shape)

    def normal(self, mean: float, std: float, shape=()) -> np.ndarray:
        return self._gen.normal(mean, std, size=shape)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)


@dataclass
class _Entry:
    value: Tensor
    m: np.ndarray  # Adam first moment
    v: np.ndarray  # Adam second moment


class ParamStore:
    """Named parameter tensors with gradients and optimizer state.

    Every entry's gradient has the same shape as its value; ``zero_grads``
    resets all gradients to exact zeros.
    """

    def __init__(self):
        self._entries: dict[str, _Entry] = {}
        self.step_count: int = 0

    def add(self, name: str, value) -> Tensor:
        if name in self._entries:
            raise ContractError(f"duplicate parameter name {name!r}")
        t = value if isinstance(value, Tensor) else Tensor(value)
        t.requires_grad = True
        t.zero_grad()
        self._entries[name] = _Entry(t, np.zeros_like(t.data), np.zeros_like(t.data))
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._entries[name].value

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def names(self) -> list[str]:
        return list(self._entries)

    def items(self) -> Iterator[tuple[str, Tensor]]:
        for name, entry in self._entries.items():
            yield name, entry.value

    def zero_grads(self) -> None:
        for entry in self._entries.values():
            entry.value.zero_grad()

    def astype(self, dtype) -> "ParamStore":
        """Cast values, gradients, and optimizer moments in place."""
        for entry in self._entries.values():
            entry.value.data = entry.value.data.astype(dtype)
            entry.value.zero_grad()
            entry.m = entry.m.astype(dtype)
            entry.v = entry.v.astype(dtype)
        return self

    def n_scalars(self) -> int:
        return sum(e.value.size for e in self._entries.values())

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {name: e.value.data.copy() for name, e in self._entries.items()}

    def load_state_arrays(self, state: dict[str, np.ndarray]) -> None:
        for name, arr in state.items():
            entry = self._entries[name]
            if entry.value.shape != arr.shape:
                raise ContractError(
                    f"parameter {name!r}: stored shape {arr.shape} != expected {entry.value.shape}"
                )
            entry.value.data = np.array(arr, dtype=entry.value.data.dtype)


def backward(loss: Tensor, params: ParamStore) -> None:
    """Accumulate d(loss)/d(param) into every parameter gradient.

    The loss must be a scalar produced by a forward pass through this
    package's tensor operations.
    """
    if loss.size != 1:
        raise ContractError(f"loss must be scalar, got shape {loss.shape}")
    del params  # gradients land in the leaf tensors the store owns
    loss.backward()


def xavier_init(rng: Rng, shape: tuple[int, int]) -> Tensor:
    """Uniform init on +-sqrt(6 / (fan_in + fan_out)) for a 2-D weight."""
    if len(shape) != 2:
        raise ContractError(f"xavier_init needs a 2-D shape, got {shape}")
    fan_in, fan_out = shape
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-bound, bound, shape))


def adam_step(
    params: ParamStore,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One bias-corrected Adam update over every parameter.

    Aborts (before touching any parameter) if a gradient is non-finite,
    naming the offending parameter.
    """
    for name, entry in params._entries.items():
        g = entry.value.grad
        if g is None:
            raise OptimizerError(f"parameter {name!r} has no gradient")
        if not np.isfinite(g).all():
            raise OptimizerError(f"non-finite gradient for parameter {name!r}")
    params.step_count += 1
    t = params.step_count
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    for entry in params._entries.values():
        g = entry.value.grad
        entry.m = beta1 * entry.m + (1.0 - beta1) * g
        entry.v = beta2 * entry.v + (1.0 - beta2) * (g * g)
        m_hat = entry.m / bc1
        v_hat = entry.v / bc2
        entry.value.data = entry.value.data - lr * m_hat / (np.sqrt(v_hat) + eps)


@dataclass
class GradCheckReport:
    """Per-parameter maximum relative error between analytic and numeric gradients."""

    per_param: dict[str, float] = field(default_factory=dict)
    flagged: list[str] = field(default_factory=list)  # non-finite perturbation results
    tol: float = 1e-4

    @property
    def max_rel_err(self) -> float:
        return max(self.per_param.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return not self.flagged and self.max_rel_err < self.tol

    def failures(self) -> list[str]:
        bad = [n for n, e in self.per_param.items() if not e < self.tol]
        return bad + self.flagged

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        lines = [f"grad check [{status}] tol={self.tol:g} max_rel_err={self.max_rel_err:.3e}"]
        for name, err in sorted(self.per_param.items(), key=lambda kv: -kv[1]):
            mark = "" if err < self.tol else "  <-- FAIL"
            lines.append(f"  {name}: {err:.3e}{mark}")
        for name in self.flagged:
            lines.append(f"  {name}: non-finite perturbation result  <-- FAIL")
        return "\n".join(lines)


def grad_check(
    f: Callable[[], Tensor],
    params: ParamStore,
    step: float = 1e-5,
    tol: float = 1e-4,
) -> GradCheckReport:
    """Compare analytic gradients of ``f()`` against central differences.

    ``f`` must recompute the scalar loss from the current parameter values.
    For every scalar entry the relative error is
    ``|a - n| / max(|a|, |n|, 1e-12)``; the report carries the per-parameter
    maximum.  Requires double precision parameters.
    """
    for name, tensor in params.items():
        if tensor.dtype != np.float64:
            raise ContractError(f"grad_check requires float64 parameters ({name!r} is {tensor.dtype})")

    params.zero_grads()
    loss = f()
    backward(loss, params)
    analytic = {name: t.grad.copy() for name, t in params.items()}

    report = GradCheckReport(tol=tol)
    for name, tensor in params.items():
        data = tensor.data
        a_grad = analytic[name]
        worst = 0.0
        flat = data.reshape(-1)
        a_flat = a_grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            f_plus = f().item()
            flat[i] = orig - step
            f_minus = f().item()
            flat[i] = orig
            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                report.flagged.append(f"{name}[{i}]")
                continue
            numeric = (f_plus - f_minus) / (2.0 * step)
            a = a_flat[i]
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-12)
            if not np.isfinite(rel):
                report.flagged.append(f"{name}[{i}]")
                continue
            worst = max(worst, rel)
        report.per_param[name] = worst
    return report
