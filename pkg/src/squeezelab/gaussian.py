"""Gaussian states of bosonic modes and the symplectic maps acting on them.

Conventions
-----------
* Quadratures are interleaved: ``(x1, p1, x2, p2, ...)``.
* Shot-noise units: the vacuum covariance is the identity, so every
  quadrature of the vacuum has variance 1 and the two-mode EPR inseparability
  bound is exactly 2.
* A phase rotation by ``phi`` maps a state squeezed along quadrature angle
  ``theta`` (the observable ``x cos(theta) + p sin(theta)``) to one squeezed
  along ``theta + phi``.

States are immutable; every operation returns a new :class:`GaussianState`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, PhysicalityError

#: Tolerance on symplectic eigenvalues used by the physicality check.
PHYSICALITY_TOL = 1e-9
SYMMETRY_RTOL = 1e-12


def symplectic_form(n_modes: int) -> np.ndarray:
    """Block-diagonal ``Omega`` with per-mode blocks ``[[0, 1], [-1, 0]]``."""
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def rotation_matrix(phi: float) -> np.ndarray:
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True, eq=False)
class GaussianState:
    """Mean vector and covariance matrix of ``n_modes`` modes."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(-1)
        cov = np.array(self.cov, dtype=float)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or cov.shape[0] % 2:
            raise InvalidArgument(f"covariance must be 2n x 2n, got shape {cov.shape}")
        if mean.shape[0] != cov.shape[0]:
            raise InvalidArgument(
                f"mean has length {mean.shape[0]}, covariance is {cov.shape[0]} x {cov.shape[0]}"
            )
        scale = max(np.max(np.abs(cov)), 1.0)
        if np.max(np.abs(cov - cov.T)) > SYMMETRY_RTOL * scale:
            raise InvalidArgument("covariance matrix is not symmetric")
        cov = 0.5 * (cov + cov.T)
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def n_modes(self) -> int:
        return self.cov.shape[0] // 2

    def symplectic_eigenvalues(self) -> np.ndarray:
        """Symplectic spectrum, sorted ascending (each value appears once)."""
        omega = symplectic_form(self.n_modes)
        ev = np.abs(np.linalg.eigvals(1j * omega @ self.cov))
        return np.sort(ev)[::2]

    def is_physical(self, tol: float = PHYSICALITY_TOL) -> bool:
        return bool(np.all(self.symplectic_eigenvalues() >= 1.0 - tol))

    def mean_photon_number(self) -> float:
        """Total mean photon number summed over all modes."""
        return float(np.trace(self.cov) / 4 - self.n_modes / 2 + self.mean @ self.mean / 4)

    def allclose(self, other: "GaussianState", atol: float = 1e-10) -> bool:
        return (
            self.n_modes == other.n_modes
            and np.allclose(self.cov, other.cov, rtol=0, atol=atol)
            and np.allclose(self.mean, other.mean, rtol=0, atol=atol)
        )

    def transform(self, symplectic: np.ndarray) -> "GaussianState":
        return GaussianState(symplectic @ self.mean, symplectic @ self.cov @ symplectic.T)

    def to_text(self) -> str:
        """Serialize as plain text: header, mean row, then covariance rows."""
        fmt = lambda row: " ".join(repr(float(v)) for v in row)  # noqa: E731
        lines = [f"n_modes {self.n_modes}", fmt(self.mean)]
        lines += [fmt(row) for row in self.cov]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "GaussianState":
        lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        if not lines or not lines[0].startswith("n_modes"):
            raise InvalidArgument("missing 'n_modes' header")
        n = int(lines[0].split()[1])
        rows = [[float(v) for v in ln.split()] for ln in lines[1:]]
        if len(rows) != 2 * n + 1 or any(len(r) != 2 * n for r in rows):
            raise InvalidArgument(f"expected {2 * n + 1} rows of {2 * n} values")
        return cls(np.array(rows[0]), np.array(rows[1:]))


@dataclass(frozen=True)
class QuadratureCombination:
    """Linear form ``c . (x1, p1, x2, p2, ...)``."""

    coefficients: tuple
    label: str = ""

    def __post_init__(self):
        coeffs = tuple(float(c) for c in np.asarray(self.coefficients, dtype=float).reshape(-1))
        if not coeffs or not any(coeffs):
            raise InvalidArgument("combination needs at least one nonzero coefficient")
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.coefficients)


def _check_mode(state: GaussianState, index: int) -> None:
    if not 0 <= index < state.n_modes:
        raise InvalidArgument(f"mode index {index} out of range for {state.n_modes} modes")


def _check_fraction(value: float, name: str) -> None:
    if not 0.0 <= value <= 1.0:
        raise InvalidArgument(f"{name} must lie in [0, 1], got {value}")


def vacuum_state(n_modes: int) -> GaussianState:
    if int(n_modes) != n_modes or n_modes < 1:
        raise InvalidArgument(f"n_modes must be a positive integer, got {n_modes}")
    return GaussianState(np.zeros(2 * n_modes), np.eye(2 * n_modes))


def squeezed_thermal_state(
    v_minus: float, v_plus: float, angle: float, tol: float = PHYSICALITY_TOL
) -> GaussianState:
    """Single-mode state with variance ``v_minus`` along ``angle``, ``v_plus`` orthogonal."""
    if v_minus <= 0 or v_plus <= 0:
        raise InvalidArgument("variances must be positive")
    if v_minus > v_plus:
        raise InvalidArgument(f"v_minus ({v_minus}) exceeds v_plus ({v_plus})")
    if v_minus * v_plus < 1.0 - tol:
        raise PhysicalityError(
            f"v_minus * v_plus = {v_minus * v_plus:.12g} < 1 violates the uncertainty relation"
        )
    r = rotation_matrix(angle)
    return GaussianState(np.zeros(2), r @ np.diag([v_minus, v_plus]) @ r.T)


def phase_rotation_symplectic(n_modes: int, mode_index: int, phi: float) -> np.ndarray:
    s = np.eye(2 * n_modes)
    k = 2 * mode_index
    s[k : k + 2, k : k + 2] = rotation_matrix(phi)
    return s


def beam_splitter_symplectic(
    n_modes: int, mode_a: int, mode_b: int, transmissivity: float
) -> np.ndarray:
    t = np.sqrt(transmissivity)
    r = np.sqrt(1.0 - transmissivity)
    s = np.eye(2 * n_modes)
    a, b = 2 * mode_a, 2 * mode_b
    eye2 = np.eye(2)
    s[a : a + 2, a : a + 2] = t * eye2
    s[a : a + 2, b : b + 2] = r * eye2
    s[b : b + 2, a : a + 2] = -r * eye2
    s[b : b + 2, b : b + 2] = t * eye2
    return s


def apply_phase_rotation(state: GaussianState, mode_index: int, phi: float) -> GaussianState:
    _check_mode(state, mode_index)
    return state.transform(phase_rotation_symplectic(state.n_modes, mode_index, phi))


def apply_beam_splitter(
    state: GaussianState, mode_a: int, mode_b: int, transmissivity: float
) -> GaussianState:
    """Mix two modes: ``a' = t a + r b``, ``b' = -r a + t b`` with ``t = sqrt(T)``."""
    _check_mode(state, mode_a)
    _check_mode(state, mode_b)
    if mode_a == mode_b:
        raise InvalidArgument("beam splitter needs two distinct modes")
    _check_fraction(transmissivity, "transmissivity")
    return state.transform(beam_splitter_symplectic(state.n_modes, mode_a, mode_b, transmissivity))


def apply_loss(state: GaussianState, mode_index: int, eta: float) -> GaussianState:
    """Pure-loss channel of efficiency ``eta`` (a beam splitter to vacuum, traced out)."""
    _check_mode(state, mode_index)
    _check_fraction(eta, "eta")
    k = 2 * mode_index
    scale = np.ones(2 * state.n_modes)
    scale[k : k + 2] = np.sqrt(eta)
    cov = state.cov * np.outer(scale, scale)
    cov[k : k + 2, k : k + 2] += (1.0 - eta) * np.eye(2)
    return GaussianState(state.mean * scale, cov)


def tensor_product(*states: GaussianState) -> GaussianState:
    """Direct sum of independent states into one multimode state."""
    mean = np.concatenate([s.mean for s in states])
    dim = mean.shape[0]
    cov = np.zeros((dim, dim))
    k = 0
    for s in states:
        d = s.cov.shape[0]
        cov[k : k + d, k : k + d] = s.cov
        k += d
    return GaussianState(mean, cov)


def quadrature_variance(state: GaussianState, combination) -> float:
    c = combination.vector if isinstance(combination, QuadratureCombination) else np.asarray(combination, float)
    if c.shape != (2 * state.n_modes,):
        raise InvalidArgument(
            f"combination has length {c.shape[0] if c.ndim else 1}, state needs {2 * state.n_modes}"
        )
    return float(c @ state.cov @ c)


def quadrature_vector(n_modes: int, mode_index: int, angle: float, weight: float = 1.0) -> np.ndarray:
    """Coefficients of ``weight * (x_k cos(angle) + p_k sin(angle))``."""
    c = np.zeros(2 * n_modes)
    c[2 * mode_index] = weight * np.cos(angle)
    c[2 * mode_index + 1] = weight * np.sin(angle)
    return c


def epr_combinations(n_modes: int, mode_1: int, mode_2: int):
    """The ``(x1 - x2)/sqrt(2)`` and ``(p1 + p2)/sqrt(2)`` combinations."""
    h = 1 / np.sqrt(2)
    x = quadrature_vector(n_modes, mode_1, 0.0, h) - quadrature_vector(n_modes, mode_2, 0.0, h)
    p = quadrature_vector(n_modes, mode_1, np.pi / 2, h) + quadrature_vector(n_modes, mode_2, np.pi / 2, h)
    # cos(pi/2) is not exactly zero
    x[1::2] = 0.0
    p[0::2] = 0.0
    return (
        QuadratureCombination(x, f"(x{mode_1 + 1}-x{mode_2 + 1})/sqrt2"),
        QuadratureCombination(p, f"(p{mode_1 + 1}+p{mode_2 + 1})/sqrt2"),
    )


def duan_simon(state: GaussianState, mode_1: int = 0, mode_2: int = 1) -> float:
    """EPR variance sum; values below 2 certify inseparability."""
    _check_mode(state, mode_1)
    _check_mode(state, mode_2)
    if mode_1 == mode_2:
        raise InvalidArgument("Duan-Simon sum needs two distinct modes")
    # unit coefficients and one factor 1/2 keep the vacuum value exactly 2
    n = state.n_modes
    cx = quadrature_vector(n, mode_1, 0.0) - quadrature_vector(n, mode_2, 0.0)
    cp = np.zeros(2 * n)
    cp[2 * mode_1 + 1] = cp[2 * mode_2 + 1] = 1.0
    return 0.5 * (quadrature_variance(state, cx) + quadrature_variance(state, cp))


def measured_covariance(state: GaussianState, angles) -> np.ndarray:
    """Joint covariance of the quadratures ``x_k cos(a_k) + p_k sin(a_k)``, one per mode."""
    angles = list(angles)
    if len(angles) != state.n_modes:
        raise InvalidArgument(f"need one angle per mode ({state.n_modes}), got {len(angles)}")
    rows = np.array([quadrature_vector(state.n_modes, k, a) for k, a in enumerate(angles)])
    return rows @ state.cov @ rows.T
