"""Polarization state algebra for photon pairs.

Single-photon states live in the linear basis (H, V) or the circular basis
(L, R) with the convention L = (H + iV)/sqrt(2), R = (H - iV)/sqrt(2).
Two-photon amplitudes are ordered signal-major: (LL, LR, RL, RR) in the
circular basis, (HH, HV, VH, VV) in the linear basis.

JSON interchange encodes every complex number as a two-element list
[re, im]; matrices are row-major lists of such pairs, and every state
object carries a "basis" field.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .angmom import CascadeLevels, path_coupling_x

__all__ = [
    "CIRCULAR",
    "LINEAR",
    "BiphotonKet",
    "DensityMatrix4",
    "PathAmplitudes",
    "Projector",
    "DegenerateStateError",
    "ProjectionDegeneracyError",
    "BeatProjectorSearch",
    "beat_params",
    "change_basis",
    "density_change_basis",
    "density_from_ket",
    "density_from_dict",
    "density_to_dict",
    "find_beat_projectors",
    "joint_projection_amplitude",
    "ket_from_dict",
    "ket_from_path",
    "ket_to_dict",
    "min_eigenvalue",
    "named_projector",
    "predict_path_state",
    "projector_from_dict",
    "projector_to_dict",
]

CIRCULAR = "circular"
LINEAR = "linear"

_NORM_TOL = 1e-12

# Columns are |L> and |R> expressed in (H, V) components.
_CIRC_TO_LIN = np.array([[1.0, 1.0], [1.0j, -1.0j]]) / math.sqrt(2.0)
_LIN_TO_CIRC = _CIRC_TO_LIN.conj().T


class DegenerateStateError(ValueError):
    """Raised when every decay channel of a level set is forbidden."""


class ProjectionDegeneracyError(ValueError):
    """Raised when the reference path is fully suppressed by the projectors."""


def _check_basis(basis: str) -> str:
    if basis not in (CIRCULAR, LINEAR):
        raise ValueError(f"unknown basis {basis!r}; expected {CIRCULAR!r} or {LINEAR!r}")
    return basis


@dataclass(frozen=True)
class Projector:
    """A single-photon polarization analyzer setting, stored in the (H, V) basis."""

    c_h: complex
    c_v: complex

    def __post_init__(self) -> None:
        norm2 = abs(self.c_h) ** 2 + abs(self.c_v) ** 2
        if abs(norm2 - 1.0) > _NORM_TOL:
            raise ValueError(f"projector not normalized: |c|^2 = {norm2!r}")

    @classmethod
    def normalized(cls, c_h, c_v) -> "Projector":
        """Build from unnormalized components."""
        norm = math.sqrt(abs(c_h) ** 2 + abs(c_v) ** 2)
        if norm == 0.0:
            raise ValueError("cannot normalize a zero projector")
        return cls(complex(c_h) / norm, complex(c_v) / norm)

    def vector(self, basis: str = LINEAR) -> np.ndarray:
        """Components of the analyzed state in the requested basis."""
        lin = np.array([self.c_h, self.c_v], dtype=complex)
        if _check_basis(basis) == LINEAR:
            return lin
        return _LIN_TO_CIRC @ lin


_NAMED_PROJECTORS = {
    "H": (1.0, 0.0),
    "V": (0.0, 1.0),
    "D": (1.0 / math.sqrt(2.0), 1.0 / math.sqrt(2.0)),
    "A": (1.0 / math.sqrt(2.0), -1.0 / math.sqrt(2.0)),
    "L": (1.0 / math.sqrt(2.0), 1.0j / math.sqrt(2.0)),
    "R": (1.0 / math.sqrt(2.0), -1.0j / math.sqrt(2.0)),
}


def named_projector(name: str) -> Projector:
    """One of the six standard analyzer settings H, V, D, A, L, R."""
    try:
        c_h, c_v = _NAMED_PROJECTORS[name]
    except KeyError:
        raise ValueError(f"unknown projector name {name!r}; use one of H,V,D,A,L,R")
    return Projector(complex(c_h), complex(c_v))


@dataclass(frozen=True)
class BiphotonKet:
    """Pure two-photon polarization state: 4 complex amplitudes plus a basis tag."""

    amplitudes: np.ndarray
    basis: str = CIRCULAR

    def __post_init__(self) -> None:
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(4)
        object.__setattr__(self, "amplitudes", amps)
        _check_basis(self.basis)
        norm2 = float(np.sum(np.abs(amps) ** 2))
        if abs(norm2 - 1.0) > _NORM_TOL:
            raise ValueError(f"ket not normalized: |psi|^2 = {norm2!r}")

    @classmethod
    def normalized(cls, amplitudes, basis: str = CIRCULAR) -> "BiphotonKet":
        amps = np.asarray(amplitudes, dtype=complex).reshape(4)
        norm = float(np.linalg.norm(amps))
        if norm == 0.0:
            raise ValueError("cannot normalize a zero ket")
        return cls(amps / norm, basis)


@dataclass(frozen=True)
class DensityMatrix4:
    """Two-qubit density matrix: Hermitian, unit trace, positive within tolerance.

    ``eig_floor`` is the smallest eigenvalue tolerated at validation;
    reconstruction by linear inversion relaxes it to -1e-2 to admit
    statistical noise, everything else uses the strict default.
    """

    matrix: np.ndarray
    basis: str = CIRCULAR
    eig_floor: float = field(default=-1e-9, compare=False)

    def __post_init__(self) -> None:
        mat = np.asarray(self.matrix, dtype=complex).reshape(4, 4)
        object.__setattr__(self, "matrix", mat)
        _check_basis(self.basis)
        herm_dev = float(np.max(np.abs(mat - mat.conj().T)))
        if herm_dev > 1e-12:
            raise ValueError(f"matrix not Hermitian: max deviation {herm_dev!r}")
        trace_dev = abs(complex(np.trace(mat)) - 1.0)
        if trace_dev > 1e-12:
            raise ValueError(f"trace differs from 1 by {trace_dev!r}")
        min_eig = float(np.linalg.eigvalsh(mat)[0])
        if min_eig < self.eig_floor:
            raise ValueError(
                f"matrix not positive semidefinite: min eigenvalue {min_eig!r} "
                f"below floor {self.eig_floor!r}"
            )


def min_eigenvalue(rho: DensityMatrix4) -> float:
    """Smallest eigenvalue of the density matrix (negative values flag noise)."""
    return float(np.linalg.eigvalsh(rho.matrix)[0])


@dataclass(frozen=True)
class PathAmplitudes:
    """Normalized amplitudes (a0, a1) and relative phase phi0 of one decay path."""

    a0: float
    a1: float
    phi0: float

    def __post_init__(self) -> None:
        if self.a0 < 0 or self.a1 < 0:
            raise ValueError("amplitudes must be non-negative")
        norm2 = self.a0**2 + self.a1**2
        if abs(norm2 - 1.0) > _NORM_TOL:
            raise ValueError(f"amplitudes not normalized: a0^2 + a1^2 = {norm2!r}")
        if not (-math.pi < self.phi0 <= math.pi):
            raise ValueError(f"phi0 must lie in (-pi, pi], got {self.phi0!r}")


def predict_path_state(levels: CascadeLevels) -> PathAmplitudes:
    """Predict the two-photon state of one decay path from its level structure.

    The polarization channels map to helicity transfers as L <-> +1 and
    R <-> -1, so the |LR> amplitude comes from the (alpha_s, alpha_i) =
    (+1, -1) channel and |RL> from (-1, +1).  Amplitudes are normalized over
    all four helicity combinations (the co-rotating ones vanish identically),
    and the relative phase is the sign of the coupling ratio: 0 if the two
    allowed channels share a sign, pi otherwise.
    """
    x_lr = path_coupling_x(levels, +1, -1)
    x_rl = path_coupling_x(levels, -1, +1)
    x_ll = path_coupling_x(levels, +1, +1)
    x_rr = path_coupling_x(levels, -1, -1)
    norm = math.sqrt(x_lr**2 + x_rl**2 + x_ll**2 + x_rr**2)
    if x_lr == 0.0 and x_rl == 0.0:
        raise DegenerateStateError(
            "both counter-rotating channels are forbidden for these levels"
        )
    a0 = abs(x_lr) / norm
    a1 = abs(x_rl) / norm
    phi0 = math.pi if x_lr * x_rl < 0 else 0.0
    return PathAmplitudes(a0, a1, phi0)


def ket_from_path(path: PathAmplitudes) -> BiphotonKet:
    """Circular-basis ket a0|LR> + e^{i phi0} a1|RL>."""
    amps = np.array(
        [0.0, path.a0, cmath.exp(1j * path.phi0) * path.a1, 0.0], dtype=complex
    )
    return BiphotonKet(amps, CIRCULAR)


def _pair_unitary(source: str, target: str) -> np.ndarray:
    if source == target:
        return np.eye(4, dtype=complex)
    u = _CIRC_TO_LIN if target == LINEAR else _LIN_TO_CIRC
    return np.kron(u, u)


def change_basis(ket: BiphotonKet, target: str) -> BiphotonKet:
    """Express the ket in the requested basis (unitary on both photons)."""
    _check_basis(target)
    if target == ket.basis:
        return ket
    amps = _pair_unitary(ket.basis, target) @ ket.amplitudes
    return BiphotonKet(amps, target)


def density_change_basis(rho: DensityMatrix4, target: str) -> DensityMatrix4:
    """Express the density matrix in the requested basis."""
    _check_basis(target)
    if target == rho.basis:
        return rho
    u = _pair_unitary(rho.basis, target)
    mat = u @ rho.matrix @ u.conj().T
    mat = 0.5 * (mat + mat.conj().T)
    return DensityMatrix4(mat, target, eig_floor=rho.eig_floor)


def density_from_ket(ket: BiphotonKet) -> DensityMatrix4:
    """Rank-1 density matrix |psi><psi| in the ket's basis."""
    mat = np.outer(ket.amplitudes, ket.amplitudes.conj())
    return DensityMatrix4(mat, ket.basis)


def joint_projection_amplitude(
    ket: BiphotonKet, proj_s: Projector, proj_i: Projector
) -> complex:
    """Amplitude <p_s p_i | psi> of finding the pair in the analyzed polarizations."""
    v = np.kron(proj_s.vector(ket.basis), proj_i.vector(ket.basis))
    return complex(v.conj() @ ket.amplitudes)


def _wrap_phase(phi: float) -> float:
    """Fold an angle into (-pi, pi]."""
    wrapped = math.remainder(phi, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    return wrapped


def beat_params(
    ket_x: BiphotonKet,
    ket_y: BiphotonKet,
    proj_s: Projector,
    proj_i: Projector,
    *,
    atol: float = 1e-14,
) -> tuple[float, float]:
    """Relative amplitude R and phase phi of two interfering decay paths.

    Both paths are projected onto the same analyzer pair; R = |A_y / A_x|
    and phi = arg(A_y / A_x) folded into (-pi, pi].  A vanishing A_y gives
    the single-path convention (0, 0).  A vanishing A_x (with A_y nonzero)
    raises :class:`ProjectionDegeneracyError`: the reference path is fully
    suppressed and the caller must swap the roles of the two paths.
    """
    a_x = joint_projection_amplitude(ket_x, proj_s, proj_i)
    a_y = joint_projection_amplitude(ket_y, proj_s, proj_i)
    if abs(a_y) <= atol:
        return 0.0, 0.0
    if abs(a_x) <= atol:
        raise ProjectionDegeneracyError(
            "reference path amplitude is zero for these projectors"
        )
    ratio = a_y / a_x
    return abs(ratio), _wrap_phase(cmath.phase(ratio))


@dataclass(frozen=True)
class BeatProjectorSearch:
    """Outcome of a search for projectors realizing target beat parameters."""

    attainable: bool
    proj_s: Projector
    proj_i: Projector
    r: float
    phi: float
    residual: float


def _projector_from_angles(theta: float, chi: float) -> Projector:
    return Projector(
        complex(math.cos(theta)), cmath.exp(1j * chi) * math.sin(theta)
    )


def find_beat_projectors(
    ket_x: BiphotonKet,
    ket_y: BiphotonKet,
    target_r: float,
    target_phi: float,
    *,
    tol: float = 1e-6,
) -> BeatProjectorSearch:
    """Search analyzer settings that realize given beat parameters (R, phi).

    Runs deterministic local minimizations from a fixed grid of starting
    angles; reports the best projector pair found and whether it reaches the
    target within ``tol`` (log-amplitude and phase residual combined).
    """
    if target_r < 0:
        raise ValueError("target_r must be non-negative")
    target_phi = _wrap_phase(target_phi)

    def objective(angles: np.ndarray) -> float:
        ps = _projector_from_angles(angles[0], angles[1])
        pi_ = _projector_from_angles(angles[2], angles[3])
        try:
            r, phi = beat_params(ket_x, ket_y, ps, pi_)
        except ProjectionDegeneracyError:
            return 1e6
        if target_r == 0.0:
            return r**2
        if r == 0.0:
            return 1e6
        dlog = math.log(r / target_r)
        dphi = _wrap_phase(phi - target_phi)
        return dlog**2 + dphi**2

    starts = [
        np.array([t_s, c_s, t_i, c_i])
        for t_s in (0.3, 0.9, 1.4)
        for c_s in (0.0, 1.8)
        for t_i in (0.3, 0.9, 1.4)
        for c_i in (0.0, 1.8)
    ]
    best = None
    for x0 in starts:
        res = minimize(objective, x0, method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-16, "maxiter": 4000})
        if best is None or res.fun < best.fun:
            best = res
    ps = _projector_from_angles(best.x[0], best.x[1])
    pi_ = _projector_from_angles(best.x[2], best.x[3])
    try:
        r, phi = beat_params(ket_x, ket_y, ps, pi_)
    except ProjectionDegeneracyError:
        r, phi = math.inf, 0.0
    residual = math.sqrt(max(best.fun, 0.0))
    return BeatProjectorSearch(
        attainable=residual < tol, proj_s=ps, proj_i=pi_, r=r, phi=phi, residual=residual
    )


# ---------------------------------------------------------------------------
# JSON interchange: complex numbers as [re, im], matrices row-major.

def _c2p(z: complex) -> list[float]:
    z = complex(z)
    return [float(z.real), float(z.imag)]


def _p2c(pair) -> complex:
    if not isinstance(pair, (list, tuple)) or len(pair) != 2:
        raise ValueError(f"expected a [re, im] pair, got {pair!r}")
    return complex(float(pair[0]), float(pair[1]))


def projector_to_dict(proj: Projector) -> dict:
    return {
        "type": "projector",
        "basis": LINEAR,
        "components": [_c2p(proj.c_h), _c2p(proj.c_v)],
    }


def projector_from_dict(data: dict) -> Projector:
    comps = data["components"]
    if len(comps) != 2:
        raise ValueError("projector needs exactly 2 components")
    return Projector(_p2c(comps[0]), _p2c(comps[1]))


def ket_to_dict(ket: BiphotonKet) -> dict:
    return {
        "type": "biphoton_ket",
        "basis": ket.basis,
        "amplitudes": [_c2p(a) for a in ket.amplitudes],
    }


def ket_from_dict(data: dict) -> BiphotonKet:
    amps = data["amplitudes"]
    if len(amps) != 4:
        raise ValueError("biphoton ket needs exactly 4 amplitudes")
    return BiphotonKet(
        np.array([_p2c(a) for a in amps], dtype=complex), _check_basis(data["basis"])
    )


def density_to_dict(rho: DensityMatrix4) -> dict:
    return {
        "type": "density_matrix",
        "basis": rho.basis,
        "matrix": [[_c2p(z) for z in row] for row in rho.matrix],
    }


def density_from_dict(data: dict, *, eig_floor: float = -1e-9) -> DensityMatrix4:
    rows = data["matrix"]
    if len(rows) != 4 or any(len(row) != 4 for row in rows):
        raise ValueError("density matrix must be 4x4")
    mat = np.array([[_p2c(z) for z in row] for row in rows], dtype=complex)
    return DensityMatrix4(mat, _check_basis(data["basis"]), eig_floor=eig_floor)
