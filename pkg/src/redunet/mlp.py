"""Single-hidden-layer perceptron without bias terms.

``V`` (h x p) maps inputs to hidden units and ``U`` (c x h) maps hidden units
to outputs; both layers use the logistic sigmoid. The training loss is the
unscaled squared Frobenius norm of the output residual.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit


class Activation(enum.Enum):
    SIGMOID = "sigmoid"


@dataclass(frozen=True)
class NetworkShape:
    p: int
    h: int
    c: int

    def __post_init__(self):
        if self.p < 1 or self.h < 1 or self.c < 2:
            raise ValueError(f"invalid network shape p={self.p}, h={self.h}, c={self.c}")


@dataclass(frozen=True, eq=False)
class MlpWeights:
    V: np.ndarray
    U: np.ndarray

    def __post_init__(self):
        V = np.array(self.V, dtype=float)
        U = np.array(self.U, dtype=float)
        if V.ndim != 2 or U.ndim != 2 or U.shape[1] != V.shape[0]:
            raise ValueError(f"incompatible weight shapes V{V.shape}, U{U.shape}")
        if not (np.all(np.isfinite(V)) and np.all(np.isfinite(U))):
            raise ValueError("weights must be finite")
        V.setflags(write=False)
        U.setflags(write=False)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "U", U)

    @property
    def shape(self) -> NetworkShape:
        h, p = self.V.shape
        return NetworkShape(p, h, self.U.shape[0])

    def to_dict(self) -> dict:
        s = self.shape
        return {
            "shape": {"p": s.p, "h": s.h, "c": s.c},
            "V": self.V.ravel().tolist(),
            "U": self.U.ravel().tolist(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "MlpWeights":
        s = obj["shape"]
        V = np.array(obj["V"], dtype=float).reshape(s["h"], s["p"])
        U = np.array(obj["U"], dtype=float).reshape(s["c"], s["h"])
        return cls(V, U)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "MlpWeights":
        return cls.from_dict(json.loads(Path(path).read_text()))


def init_weights(shape: NetworkShape, seed: int) -> MlpWeights:
    """Independent uniform draws on [-0.5, 0.5]."""
    rng = np.random.default_rng(seed)
    V = rng.uniform(-0.5, 0.5, size=(shape.h, shape.p))
    U = rng.uniform(-0.5, 0.5, size=(shape.c, shape.h))
    return MlpWeights(V, U)


def sigmoid(t):
    return expit(t)


def forward_arrays(V, U, X):
    H = expit(V @ X)
    return H, expit(U @ H)


def loss_and_grad_arrays(V, U, X, Y):
    """Empirical loss and its exact gradients ``(E0, dU, dV)``."""
    H, O = forward_arrays(V, U, X)
    R = O - Y
    d_out = 2.0 * R * O * (1.0 - O)
    d_hid = (U.T @ d_out) * H * (1.0 - H)
    return float(np.sum(R * R)), d_out @ H.T, d_hid @ X.T


def _check(wts: MlpWeights, X, Y=None):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != wts.V.shape[1]:
        raise ValueError(f"input has shape {X.shape}, network expects {wts.V.shape[1]} rows")
    if Y is not None:
        Y = np.asarray(Y, dtype=float)
        if Y.shape != (wts.U.shape[0], X.shape[1]):
            raise ValueError(f"targets have shape {Y.shape}, expected {(wts.U.shape[0], X.shape[1])}")
    return X, Y


def forward(wts: MlpWeights, X):
    """Return ``(hidden, output)`` activations, shapes h x N and c x N."""
    X, _ = _check(wts, X)
    return forward_arrays(wts.V, wts.U, X)


def empirical_loss(wts: MlpWeights, X, Y) -> float:
    X, Y = _check(wts, X, Y)
    _, O = forward_arrays(wts.V, wts.U, X)
    return float(np.sum((O - Y) ** 2))


def grad_E0(wts: MlpWeights, X, Y):
    """Gradients ``(dU, dV)`` of :func:`empirical_loss`."""
    X, Y = _check(wts, X, Y)
    _, dU, dV = loss_and_grad_arrays(wts.V, wts.U, X, Y)
    return dU, dV


def predict(wts: MlpWeights, X) -> np.ndarray:
    """Class index per column; ties go to the lowest index."""
    _, O = forward(wts, X)
    return np.argmax(O, axis=0)


def accuracy(pred, Y) -> float:
    """Fraction of columns whose prediction matches the one-hot target."""
    pred = np.asarray(pred)
    truth = np.argmax(np.asarray(Y), axis=0)
    return float(np.mean(pred == truth))
