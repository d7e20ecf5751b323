"""The 14-component multiplier state, perturbations and samplers.

Storage order of the flat 14-vector::

    0       lambda
    1..3    lambda_i
    4..9    lambda_ij  as (11, 22, 33, 12, 13, 23)
    10..12  lambda_ill
    13      lambda_ppll

Off-diagonal entries of the symmetric matrix are stored once.  A gradient
taken in storage coordinates therefore holds the *sum* of the (i, j) and
(j, i) tensor slots; :func:`storage_grad_to_tensor` halves it so that the
full-index pairing ``sum_ij F_ij dlambda_ij`` equals the directional
derivative.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import RetriesExhausted
from .jet import Jet

N_COORDS = 14
IDX_LAM = 0
IDX_LI = slice(1, 4)
IDX_LIJ = slice(4, 10)
IDX_LILL = slice(10, 13)
IDX_LPPLL = 13

SYM_PAIRS = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))

COORD_NAMES = (
    ["lambda"]
    + [f"lambda_{i}" for i in (1, 2, 3)]
    + [f"lambda_{a}{b}" for a, b in ((1, 1), (2, 2), (3, 3), (1, 2), (1, 3), (2, 3))]
    + [f"lambda_{i}ll" for i in (1, 2, 3)]
    + ["lambda_ppll"]
)


def sym_to_matrix(v):
    """6 stored entries -> symmetric 3x3 (works on float or object arrays)."""
    v = np.asarray(v)
    M = np.empty((3, 3), dtype=v.dtype)
    for k, (i, j) in enumerate(SYM_PAIRS):
        M[i, j] = M[j, i] = v[k]
    return M


def matrix_to_sym(M) -> np.ndarray:
    M = np.asarray(M)
    return np.array([M[i, j] for i, j in SYM_PAIRS], dtype=M.dtype)


def storage_grad_to_tensor(g6) -> np.ndarray:
    """Storage-coordinate gradient of the 6 entries -> symmetric tensor slots."""
    g6 = np.asarray(g6, dtype=float)
    G = np.empty((3, 3))
    for k, (i, j) in enumerate(SYM_PAIRS):
        G[i, j] = G[j, i] = g6[k] if i == j else 0.5 * g6[k]
    return G


@dataclass(frozen=True)
class MultiplierState:
    """The Lagrange multipliers (lambda, lambda_i, lambda_ij, lambda_ill, lambda_ppll)."""

    lam: float
    lam_i: np.ndarray
    lam_ij: np.ndarray  # 6 stored entries
    lam_ill: np.ndarray
    lam_ppll: float

    def __post_init__(self):
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "lam_ppll", float(self.lam_ppll))
        for name, n in (("lam_i", 3), ("lam_ij", 6), ("lam_ill", 3)):
            arr = np.array(getattr(self, name), dtype=float).reshape(-1)
            if arr.shape != (n,):
                raise ValueError(f"{name} must have {n} entries, got {arr.shape[0]}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    # -- conversions ----------------------------------------------------

    @property
    def matrix(self) -> np.ndarray:
        return sym_to_matrix(self.lam_ij)

    @property
    def lam_ll(self) -> float:
        return float(self.lam_ij[:3].sum())

    def to_vector(self) -> np.ndarray:
        return np.concatenate([[self.lam], self.lam_i, self.lam_ij, self.lam_ill, [self.lam_ppll]])

    @classmethod
    def from_vector(cls, z) -> "MultiplierState":
        z = np.asarray(z, dtype=float)
        if z.shape != (N_COORDS,):
            raise ValueError(f"state vector must have {N_COORDS} entries")
        return cls(z[IDX_LAM], z[IDX_LI], z[IDX_LIJ], z[IDX_LILL], z[IDX_LPPLL])

    @classmethod
    def from_matrix(cls, lam, lam_i, L, lam_ill, lam_ppll, sym_tol: float = 0.0) -> "MultiplierState":
        L = np.asarray(L, dtype=float)
        if L.shape != (3, 3):
            raise ValueError("lambda_ij must be 3x3")
        if np.abs(L - L.T).max() > sym_tol * max(1.0, np.abs(L).max()):
            raise ValueError("lambda_ij is not symmetric")
        return cls(lam, lam_i, matrix_to_sym(0.5 * (L + L.T)), lam_ill, lam_ppll)

    def replace(self, **changes) -> "MultiplierState":
        data = dict(lam=self.lam, lam_i=self.lam_i, lam_ij=self.lam_ij,
                    lam_ill=self.lam_ill, lam_ppll=self.lam_ppll)
        data.update(changes)
        return MultiplierState(**data)

    def rotated(self, R) -> "MultiplierState":
        """Simultaneous rotation of every tensorial component."""
        R = np.asarray(R, dtype=float)
        return MultiplierState(self.lam, R @ self.lam_i, matrix_to_sym(R @ self.matrix @ R.T),
                               R @ self.lam_ill, self.lam_ppll)

    def __add__(self, other: "MultiplierState") -> "MultiplierState":
        return MultiplierState.from_vector(self.to_vector() + other.to_vector())

    def scaled(self, t: float) -> "MultiplierState":
        return MultiplierState.from_vector(t * self.to_vector())

    def to_jets(self, order: int = 1, seeds: np.ndarray | None = None) -> "StateFields":
        """Components as jets seeded on all 14 storage coordinates.

        ``seeds`` optionally gives a (14, n) matrix of tangent directions
        (each jet's gradient is the corresponding row), e.g. a single
        direction for a second directional derivative.
        """
        z = self.to_vector()
        if seeds is None:
            jets = Jet.seed(z, order)
        else:
            seeds = np.asarray(seeds, dtype=float).reshape(N_COORDS, -1)
            n = seeds.shape[1]
            jets = [Jet(z[k], seeds[k].copy(), np.zeros((n, n)) if order >= 2 else None)
                    for k in range(N_COORDS)]
        return StateFields.from_flat(jets)

    def fields(self) -> "StateFields":
        return StateFields.from_flat(self.to_vector())

    # -- serialization --------------------------------------------------

    def to_json(self) -> dict:
        return {
            "lambda": self.lam,
            "lambda_i": self.lam_i.tolist(),
            "lambda_ij": self.lam_ij.tolist(),
            "lambda_ill": self.lam_ill.tolist(),
            "lambda_ppll": self.lam_ppll,
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "MultiplierState":
        """Parse the JSON schema; ``lambda_ij`` may be 6 stored entries or a 3x3 array."""
        try:
            lij = data["lambda_ij"]
            if len(lij) == 3 and all(hasattr(r, "__len__") for r in lij):
                return cls.from_matrix(data["lambda"], data["lambda_i"], lij,
                                       data["lambda_ill"], data["lambda_ppll"])
            return cls(data["lambda"], data["lambda_i"], lij, data["lambda_ill"], data["lambda_ppll"])
        except KeyError as exc:
            raise ValueError(f"state is missing field {exc.args[0]!r}") from None

    def digest(self) -> str:
        """Short content hash, stable across runs and platforms."""
        return hashlib.sha1(self.to_vector().astype("<f8").tobytes()).hexdigest()[:12]

    def __eq__(self, other) -> bool:
        return isinstance(other, MultiplierState) and np.array_equal(self.to_vector(), other.to_vector())

    def __hash__(self):
        return hash(self.to_vector().tobytes())

    def __repr__(self) -> str:
        return f"MultiplierState({json.dumps(self.to_json())})"


class DeltaState(MultiplierState):
    """A perturbation of the 14 multipliers."""

    @property
    def matrix_norm2(self) -> float:
        """Full 9-component contraction of the lambda_ij perturbation with itself."""
        M = self.matrix
        return float(np.sum(M * M))

    @classmethod
    def from_vector(cls, z) -> "DeltaState":
        z = np.asarray(z, dtype=float)
        return cls(z[IDX_LAM], z[IDX_LI], z[IDX_LIJ], z[IDX_LILL], z[IDX_LPPLL])

    def __repr__(self) -> str:
        return f"DeltaState({json.dumps(self.to_json())})"


@dataclass(frozen=True)
class StateFields:
    """Unpacked components ready for tensor formulas (floats or jets).

    ``L`` is the full symmetric 3x3 matrix; vectors are length-3 arrays
    (``object`` dtype when they hold jets).
    """

    lam: object
    l: np.ndarray
    L: np.ndarray
    m: np.ndarray
    p: object

    @classmethod
    def from_flat(cls, z) -> "StateFields":
        if isinstance(z[0], Jet):
            arr = np.empty(N_COORDS, dtype=object)
            arr[:] = list(z)
        else:
            arr = np.asarray(z, dtype=float)
        return cls(arr[IDX_LAM], arr[IDX_LI], sym_to_matrix(arr[IDX_LIJ]), arr[IDX_LILL], arr[IDX_LPPLL])


# -- distinguished states ------------------------------------------------


def state_C(lam: float, lam_ll: float, lam_ppll: float) -> MultiplierState:
    """Isotropic comparison state: lambda_i = 0, lambda_ij = lam_ll/3 I, lambda_ill = 0."""
    d = lam_ll / 3.0
    return MultiplierState(lam, np.zeros(3), [d, d, d, 0.0, 0.0, 0.0], np.zeros(3), lam_ppll)


def is_state_C(state: MultiplierState, tol: float = 1e-12) -> bool:
    scale = max(1.0, float(np.abs(state.to_vector()).max()))
    t = state.lam_ll / 3.0
    dev = np.abs(state.lam_ij - np.array([t, t, t, 0, 0, 0])).max()
    vec = max(np.abs(state.lam_i).max(), np.abs(state.lam_ill).max())
    return max(dev, vec) <= tol * scale


def deviatoric(L) -> np.ndarray:
    """Traceless part of a symmetric 3x3 matrix."""
    L = np.asarray(L, dtype=float)
    return L - np.trace(L) / 3.0 * np.eye(3)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniformly distributed proper rotation (QR of a Gaussian matrix)."""
    Q, R = np.linalg.qr(rng.standard_normal((3, 3)))
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


# -- sampling -----------------------------------------------------------


@dataclass(frozen=True)
class SamplerConfig:
    """Component ranges and admissibility filters for :func:`random_state`.

    ``require_X1_nonzero`` rejects draws with ``|lambda_ppll| < eps1``;
    ``require_independence`` rejects draws failing either linear-independence
    test of :func:`et14.frame.independence_conditions`.
    """

    low: float = -1.0
    high: float = 1.0
    eps1: float = 1e-6
    require_X1_nonzero: bool = False
    require_independence: bool = False
    max_retries: int = 1000
    overrides: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"low": self.low, "high": self.high, "eps1": self.eps1,
                "require_X1_nonzero": self.require_X1_nonzero,
                "require_independence": self.require_independence,
                "max_retries": self.max_retries, "overrides": dict(self.overrides)}


def _acceptable(state: MultiplierState, config: SamplerConfig) -> bool:
    if config.require_X1_nonzero and abs(state.lam_ppll) < config.eps1:
        return False
    if config.require_independence:
        from .frame import independence_conditions

        ind = independence_conditions(state)
        if not (ind.cond1 and ind.cond2):
            return False
    return True


def random_state(config: SamplerConfig = SamplerConfig(), seed: int = 0) -> MultiplierState:
    """Deterministic pseudo-random state for ``(config, seed)``.

    ``config.overrides`` pins named components (``"lam"``, ``"lam_i"``,
    ``"lam_ij"``, ``"lam_ill"``, ``"lam_ppll"``) to fixed values.
    """
    rng = np.random.default_rng(seed)
    for _ in range(config.max_retries):
        z = rng.uniform(config.low, config.high, N_COORDS)
        state = MultiplierState.from_vector(z)
        if config.overrides:
            state = state.replace(**config.overrides)
        if _acceptable(state, config):
            return state
    raise RetriesExhausted(f"no acceptable state after {config.max_retries} draws (seed {seed})")


def random_states(n: int, config: SamplerConfig = SamplerConfig(), seed: int = 0) -> list[MultiplierState]:
    """``n`` states; state ``k`` uses the derived seed ``(seed, k)``."""
    return [random_state(config, _derived_seed(seed, k)) for k in range(n)]


def _derived_seed(seed: int, k: int) -> int:
    return int(np.random.SeedSequence([seed, k]).generate_state(1)[0])
