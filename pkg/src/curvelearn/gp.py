"""Gaussian-process machinery: the 14-kernel grammar, hyperparameter priors,
covariance construction, curve sampling, posterior-mean extrapolation and
marginal-likelihood scoring.

The kernel family consists of three atoms

    lin(xi, xj) = (xi - t1) * (xj - t1)
    rbf(xi, xj) = t3 * exp(-(xi - xj)^2 / t2^2)
    per(xi, xj) = t4 * exp(-sin^2(2*pi*|xi - xj|/t5) / t6^2)

closed under pointwise sum and product (13 compositional tags), plus a
spectral-mixture kernel

    sm(xi, xj) = sum_c w_c * exp(-2*pi^2*(xi - xj)^2*|s_c|) * cos(2*pi*(xi - xj)*m_c)

with 2..6 components.  All covariance factorizations go through Cholesky with
an escalating diagonal jitter; there is no other factorization path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ._format import fmt_g17

__all__ = [
    "ATOM_PARAMS",
    "ALL_FAMILIES",
    "CG_FAMILIES",
    "SM_FAMILY",
    "CovMatrix",
    "Grid",
    "JitterExhausted",
    "KernelSpec",
    "covariance",
    "is_compositional",
    "kernel_value",
    "log_marginal_likelihood",
    "posterior_mean",
    "sample_gp",
    "sample_hyperparams",
    "spec_from_record",
    "spec_to_record",
]


class JitterExhausted(Exception):
    """Covariance could not be Cholesky-factorized within the jitter schedule."""


#: The 13 compositional tags.  A tag is a '+'-separated list of '*'-separated
#: atoms, and is parsed literally (product binds tighter than sum).
CG_FAMILIES: tuple[str, ...] = (
    "LIN",
    "RBF",
    "PER",
    "LIN+PER",
    "LIN+RBF",
    "RBF+PER",
    "LIN*PER",
    "LIN*RBF",
    "RBF*PER",
    "LIN+RBF+PER",
    "LIN+PER*RBF",
    "PER+LIN*RBF",
    "LIN*RBF*PER",
)

SM_FAMILY = "SM"

ALL_FAMILIES: tuple[str, ...] = CG_FAMILIES + (SM_FAMILY,)

#: Hyperparameters referenced by each atom.
ATOM_PARAMS: dict[str, tuple[str, ...]] = {
    "LIN": ("theta1",),
    "RBF": ("theta2", "theta3"),
    "PER": ("theta4", "theta5", "theta6"),
}

#: Lower clamp for the periodicity theta5 (its prior touches 0, which would
#: divide by zero inside the periodic atom).
THETA5_MIN = 0.01

#: Jitter schedule, relative to mean(diag): 1e-8 escalating tenfold to 1e-2.
JITTER_START = 1e-8
JITTER_STOP = 1e-2


def is_compositional(family: str) -> bool:
    """True for the 13 grammar tags, False for the spectral mixture."""
    if family not in ALL_FAMILIES:
        raise ValueError(f"unknown kernel family {family!r}")
    return family != SM_FAMILY


def _terms(family: str) -> list[list[str]]:
    """Parse a compositional tag into a sum of products of atoms."""
    return [term.split("*") for term in family.split("+")]


@dataclass(frozen=True)
class Grid:
    """Fixed abscissae shared by every curve."""

    points: np.ndarray

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("grid needs at least two points")
        if not np.all(np.diff(pts) > 0):
            raise ValueError("grid points must be strictly increasing")
        object.__setattr__(self, "points", pts)

    @property
    def T(self) -> int:
        return int(self.points.size)

    @classmethod
    def default(cls) -> "Grid":
        """100 evenly spaced points from 0 to 10 inclusive."""
        return cls(np.linspace(0.0, 10.0, 100))


@dataclass(frozen=True)
class KernelSpec:
    """A kernel family plus a concrete hyperparameter assignment."""

    family: str
    theta: Mapping[str, float]

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta", dict(self.theta))
        self._validate()

    def _validate(self) -> None:
        th = self.theta
        if self.family == SM_FAMILY:
            m = th.get("m")
            if m is None or int(m) != m or not 2 <= int(m) <= 6:
                raise ValueError("SM spec needs integer m in 2..6")
            expected = {"m"}
            for c in range(1, int(m) + 1):
                expected.update({f"w{c}", f"mu{c}", f"sigma{c}"})
                w = th.get(f"w{c}")
                if w is None or not 0.0 <= w <= 1.0:
                    raise ValueError(f"SM weight w{c} must lie in [0, 1]")
            if set(th) != expected:
                raise ValueError(f"SM spec has wrong parameter set: {sorted(th)}")
        elif self.family in CG_FAMILIES:
            expected = set()
            for term in _terms(self.family):
                for atom in term:
                    expected.update(ATOM_PARAMS[atom])
            if set(th) != expected:
                raise ValueError(
                    f"{self.family} spec needs exactly {sorted(expected)}, got {sorted(th)}"
                )
            for name in ("theta2", "theta3", "theta4", "theta6"):
                if name in th and th[name] <= 0:
                    raise ValueError(f"{name} must be positive")
            if "theta5" in th and th["theta5"] < THETA5_MIN:
                raise ValueError(f"theta5 must be >= {THETA5_MIN}")
        else:
            raise ValueError(f"unknown kernel family {self.family!r}")

    @property
    def m(self) -> int:
        if self.family != SM_FAMILY:
            raise AttributeError("only SM specs have a component count")
        return int(self.theta["m"])


def sample_hyperparams(family: str, rng: np.random.Generator) -> KernelSpec:
    """Draw a spec from the priors.

    theta1 ~ N(0, 2); theta2, theta6 ~ U[1, 5]; theta3, theta4 ~ U[1, 3];
    theta5 ~ U[0, .5] clamped below at 0.01; per SM component
    w ~ U[0, 1], mu ~ N(0, .01), sigma ~ N(0, .02), with m ~ Unif{2..6}.
    Draw order is fixed so a seeded generator reproduces the spec bitwise.
    """
    if family == SM_FAMILY:
        theta: dict[str, float] = {"m": float(rng.integers(2, 7))}
        for c in range(1, int(theta["m"]) + 1):
            theta[f"w{c}"] = float(rng.uniform(0.0, 1.0))
            theta[f"mu{c}"] = float(rng.normal(0.0, 0.01))
            theta[f"sigma{c}"] = float(rng.normal(0.0, 0.02))
        return KernelSpec(SM_FAMILY, theta)

    if family not in CG_FAMILIES:
        raise ValueError(f"unknown kernel family {family!r}")
    atoms = sorted({a for term in _terms(family) for a in term})
    theta = {}
    for atom in atoms:  # alphabetical: LIN, PER, RBF
        if atom == "LIN":
            theta["theta1"] = float(rng.normal(0.0, 2.0))
        elif atom == "RBF":
            theta["theta2"] = float(rng.uniform(1.0, 5.0))
            theta["theta3"] = float(rng.uniform(1.0, 3.0))
        elif atom == "PER":
            theta["theta4"] = float(rng.uniform(1.0, 3.0))
            theta["theta5"] = max(float(rng.uniform(0.0, 0.5)), THETA5_MIN)
            theta["theta6"] = float(rng.uniform(1.0, 5.0))
    return KernelSpec(family, theta)


def _atom_value(atom: str, th: Mapping[str, float], xi, xj):
    if atom == "LIN":
        return (xi - th["theta1"]) * (xj - th["theta1"])
    if atom == "RBF":
        d = xi - xj
        return th["theta3"] * np.exp(-d * d / th["theta2"] ** 2)
    if atom == "PER":
        s = np.sin(2.0 * np.pi * np.abs(xi - xj) / th["theta5"])
        return th["theta4"] * np.exp(-s * s / th["theta6"] ** 2)
    raise ValueError(f"unknown atom {atom!r}")


def kernel_value(spec: KernelSpec, xi, xj):
    """Evaluate the kernel at (xi, xj).  Accepts scalars or broadcasting arrays."""
    xi = np.asarray(xi, dtype=np.float64)
    xj = np.asarray(xj, dtype=np.float64)
    th = spec.theta
    if spec.family == SM_FAMILY:
        d = xi - xj
        d2 = d * d
        out = np.zeros(np.broadcast_shapes(xi.shape, xj.shape))
        for c in range(1, spec.m + 1):
            # |sigma| keeps the Gaussian envelope decaying; the prior admits
            # negative draws which would otherwise break positive-definiteness.
            envelope = np.exp(-2.0 * np.pi**2 * d2 * abs(th[f"sigma{c}"]))
            out = out + th[f"w{c}"] * envelope * np.cos(2.0 * np.pi * d * th[f"mu{c}"])
        return out if out.ndim else float(out)
    total = None
    for term in _terms(spec.family):
        prod = None
        for atom in term:
            v = _atom_value(atom, th, xi, xj)
            prod = v if prod is None else prod * v
        total = prod if total is None else total + prod
    return total if np.ndim(total) else float(total)


@dataclass(frozen=True)
class CovMatrix:
    """Raw kernel matrix plus the diagonal jitter that makes it factorizable.

    ``entries`` holds the unjittered kernel values; ``chol`` is the lower
    Cholesky factor of ``entries + jitter * I``.
    """

    entries: np.ndarray
    jitter: float
    chol: np.ndarray = field(repr=False)


def _chol_with_jitter(entries: np.ndarray) -> tuple[float, np.ndarray]:
    base = float(np.mean(np.diag(entries)))
    if not np.isfinite(base) or base <= 0.0:
        base = 1.0
    factor = JITTER_START
    while factor <= JITTER_STOP * (1.0 + 1e-12):
        try:
            L = np.linalg.cholesky(entries + factor * base * np.eye(entries.shape[0]))
            return factor * base, L
        except np.linalg.LinAlgError:
            factor *= 10.0
    raise JitterExhausted(
        f"no PSD completion within jitter <= {JITTER_STOP:g}*mean(diag); malformed spec?"
    )


def covariance(spec: KernelSpec, grid: Grid) -> CovMatrix:
    """Kernel matrix on the grid, with the smallest workable jitter attached."""
    x = grid.points
    entries = kernel_value(spec, x[:, None], x[None, :])
    jitter, L = _chol_with_jitter(entries)
    return CovMatrix(entries=entries, jitter=jitter, chol=L)


def sample_gp(spec: KernelSpec, grid: Grid, rng: np.random.Generator) -> np.ndarray:
    """One zero-mean draw: y = L z with z standard normal."""
    cov = covariance(spec, grid)
    z = rng.standard_normal(grid.T)
    return cov.chol @ z


def _obs_chol(spec: KernelSpec, x_obs: np.ndarray) -> np.ndarray:
    entries = kernel_value(spec, x_obs[:, None], x_obs[None, :])
    _, L = _chol_with_jitter(entries)
    return L


def posterior_mean(
    spec: KernelSpec,
    grid: Grid,
    y_obs: np.ndarray,
    query_idx: np.ndarray | None = None,
) -> np.ndarray:
    """Posterior mean K(x_q, x_o) K(x_o, x_o)^{-1} y_obs.

    Observations sit on the first ``len(y_obs)`` grid points; ``query_idx``
    defaults to the remaining indices.  The observed block is solved through
    its jittered Cholesky factor.
    """
    y_obs = np.asarray(y_obs, dtype=np.float64)
    m = y_obs.size
    if not 1 <= m < grid.T:
        raise ValueError("need 1 <= len(y_obs) < T")
    x = grid.points
    x_obs = x[:m]
    if query_idx is None:
        x_query = x[m:]
    else:
        x_query = x[np.asarray(query_idx, dtype=np.intp)]
    L = _obs_chol(spec, x_obs)
    alpha = np.linalg.solve(L.T, np.linalg.solve(L, y_obs))
    k_cross = kernel_value(spec, x_query[:, None], x_obs[None, :])
    return k_cross @ alpha


def log_marginal_likelihood(spec: KernelSpec, grid: Grid, y_obs: np.ndarray) -> float:
    """Gaussian evidence -y'K^{-1}y/2 - log|K|/2 - (m/2) log 2pi on the observed block."""
    y_obs = np.asarray(y_obs, dtype=np.float64)
    m = y_obs.size
    if not 1 <= m <= grid.T:
        raise ValueError("need 1 <= len(y_obs) <= T")
    L = _obs_chol(spec, grid.points[:m])
    alpha = np.linalg.solve(L.T, np.linalg.solve(L, y_obs))
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    return float(-0.5 * y_obs @ alpha - 0.5 * logdet - 0.5 * m * np.log(2.0 * np.pi))


# --- spec records ---------------------------------------------------------

#: Canonical parameter print order.
_PARAM_ORDER = [f"theta{i}" for i in range(1, 7)] + ["m"]
for _c in range(1, 7):
    _PARAM_ORDER += [f"w{_c}", f"mu{_c}", f"sigma{_c}"]


def spec_to_record(spec: KernelSpec) -> str:
    """Render ``family=<tag>; theta={name: value, ...}`` with 17-digit reals."""
    parts = []
    for name in _PARAM_ORDER:
        if name not in spec.theta:
            continue
        if name == "m":
            parts.append(f"m: {int(spec.theta['m'])}")
        else:
            parts.append(f"{name}: {fmt_g17(spec.theta[name])}")
    return f"family={spec.family}; theta={{{', '.join(parts)}}}"


def spec_from_record(record: str) -> KernelSpec:
    """Inverse of :func:`spec_to_record`; round-trips bitwise."""
    record = record.strip()
    try:
        fam_part, theta_part = record.split("; theta=", 1)
        family = fam_part.split("family=", 1)[1]
        body = theta_part.strip()
        if not (body.startswith("{") and body.endswith("}")):
            raise ValueError
        theta: dict[str, float] = {}
        inner = body[1:-1].strip()
        if inner:
            for chunk in inner.split(", "):
                name, value = chunk.split(": ", 1)
                theta[name] = float(value)
    except (ValueError, IndexError) as exc:
        raise ValueError(f"malformed kernel spec record: {record!r}") from exc
    return KernelSpec(family, theta)
