"""Strain invariants, strain-dependent diffusivity models and Lame moduli.

Strains are stored as ``(..., 3)`` arrays ``[exx, eyy, exy]`` (tensor shear
component, not engineering shear). Invariants are taken in the plane-strain
3D embedding, i.e. ``ezz = exz = eyz = 0``, so the deviator carries a
``-I/3`` out-of-plane entry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "MaterialError",
    "Strain2D",
    "LameModel",
    "InvariantTension",
    "InvariantCompression",
    "FrobeniusNorm",
    "Constant",
    "strain_invariants",
    "strain_invariants_3d",
    "rotated_tensor",
    "evaluate_diffusivity",
    "nonelliptic_mask",
    "lame",
]


class MaterialError(ValueError):
    """A material parameter set or an evaluated material state is invalid."""


@dataclass(frozen=True)
class Strain2D:
    exx: float = 0.0
    eyy: float = 0.0
    exy: float = 0.0

    def __post_init__(self):
        if not np.all(np.isfinite([self.exx, self.eyy, self.exy])):
            raise ValueError("strain components must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.exx, self.eyy, self.exy], dtype=float)

    def tensor3(self) -> np.ndarray:
        return np.array(
            [[self.exx, self.exy, 0.0], [self.exy, self.eyy, 0.0], [0.0, 0.0, 0.0]]
        )


def _strain_array(E) -> np.ndarray:
    if isinstance(E, Strain2D):
        return E.as_array()
    return np.asarray(E, dtype=float)


def strain_invariants(E):
    """Dilation ``I = tr E`` and distortion ``II = sqrt(2 dev E : dev E)``.

    Accepts a :class:`Strain2D` or an ``(..., 3)`` component array.
    """
    e = _strain_array(E)
    exx, eyy, exy = e[..., 0], e[..., 1], e[..., 2]
    tr = exx + eyy
    devdev = exx**2 + eyy**2 + 2.0 * exy**2 - tr**2 / 3.0
    second = np.sqrt(2.0 * np.maximum(devdev, 0.0))
    if np.ndim(tr) == 0:
        return float(tr), float(second)
    return tr, second


def strain_invariants_3d(E3) -> tuple[float, float]:
    """Same invariants for a full symmetric 3x3 strain tensor."""
    E3 = np.asarray(E3, dtype=float)
    tr = np.trace(E3)
    dev = E3 - tr / 3.0 * np.eye(3)
    return float(tr), float(np.sqrt(2.0 * np.sum(dev * dev)))


def frobenius_norm(E):
    e = _strain_array(E)
    return np.sqrt(e[..., 0] ** 2 + e[..., 1] ** 2 + 2.0 * e[..., 2] ** 2)


def rotated_tensor(theta: float, d1: float, d2: float) -> np.ndarray:
    """``R(theta) diag(d1, d2) R(theta)^T``: principal diffusivities rotated by ``theta``."""
    if not (d1 > 0 and d2 > 0):
        raise ValueError(f"principal diffusivities must be positive, got {d1}, {d2}")
    c, s = np.cos(theta), np.sin(theta)
    R = np.array([[c, -s], [s, c]])
    D = R @ np.diag([float(d1), float(d2)]) @ R.T
    return 0.5 * (D + D.T)


def _tensor(D, name) -> np.ndarray:
    D = np.array(D, dtype=float)
    if D.shape != (2, 2) or not np.all(np.isfinite(D)):
        raise MaterialError(f"{name} must be a finite 2x2 tensor")
    if D[0, 1] != D[1, 0]:
        raise MaterialError(f"{name} must be symmetric")
    D.setflags(write=False)
    return D


def _spd(D, name) -> np.ndarray:
    D = _tensor(D, name)
    if not (D[0, 0] > 0 and np.linalg.det(D) > 0):
        raise MaterialError(f"{name} must be positive definite")
    return D


def _ratio(eta, x, e_ref):
    # (exp(eta*x) - 1) / (exp(eta*e_ref) - 1)
    return np.expm1(eta * x) / np.expm1(eta * e_ref)


def _check_rate(eta, e_ref, name):
    if not e_ref > 0:
        raise MaterialError(f"E_ref must be positive, got {e_ref}")
    if not eta > 0:
        # eta*E_ref = 0 makes the normalising denominator exp(0) - 1 vanish
        raise MaterialError(f"{name} must be positive so that exp({name}*E_ref) - 1 != 0, got {eta}")


def _combine(D0, terms):
    shape = np.shape(terms[0][1])
    out = np.broadcast_to(D0, shape + (2, 2)).copy()
    for tensor, weight in terms:
        out += np.multiply.outer(weight, tensor)
    # exact symmetry of the evaluated tensor
    out[..., 1, 0] = out[..., 0, 1]
    return out


@dataclass(frozen=True)
class InvariantTension:
    """``D0 + (DT-D0) g_T(I) + (DS-D0) g_S(II)`` with exponential weights."""

    D0: np.ndarray
    DT: np.ndarray
    DS: np.ndarray
    eta_t: float
    eta_s: float
    e_ref: float

    def __post_init__(self):
        object.__setattr__(self, "D0", _spd(self.D0, "D0"))
        object.__setattr__(self, "DT", _tensor(self.DT, "DT"))
        object.__setattr__(self, "DS", _tensor(self.DS, "DS"))
        _check_rate(self.eta_t, self.e_ref, "eta_t")
        _check_rate(self.eta_s, self.e_ref, "eta_s")

    @classmethod
    def scaled(cls, D0, phi_t, phi_s, eta_t, eta_s, e_ref):
        """Tension and shear tensors as multiples ``phi * D0`` of the base tensor."""
        D0 = np.asarray(D0, dtype=float)
        return cls(D0, phi_t * D0, phi_s * D0, eta_t, eta_s, e_ref)

    def from_invariants(self, first, second):
        return _combine(
            self.D0,
            [
                (self.DT - self.D0, _ratio(self.eta_t, np.asarray(first, float), self.e_ref)),
                (self.DS - self.D0, _ratio(self.eta_s, np.asarray(second, float), self.e_ref)),
            ],
        )

    def evaluate(self, E):
        return self.from_invariants(*strain_invariants(E))


@dataclass(frozen=True)
class InvariantCompression:
    """Compression-calibrated variant: ``D0 + (D0-DC) g_C(I) + (DS-D0) g_S(II)``."""

    D0: np.ndarray
    DC: np.ndarray
    DS: np.ndarray
    eta_c: float
    eta_s: float
    e_ref: float

    def __post_init__(self):
        object.__setattr__(self, "D0", _spd(self.D0, "D0"))
        object.__setattr__(self, "DC", _tensor(self.DC, "DC"))
        object.__setattr__(self, "DS", _tensor(self.DS, "DS"))
        _check_rate(self.eta_c, self.e_ref, "eta_c")
        _check_rate(self.eta_s, self.e_ref, "eta_s")

    def from_invariants(self, first, second):
        return _combine(
            self.D0,
            [
                (self.D0 - self.DC, _ratio(self.eta_c, np.asarray(first, float), self.e_ref)),
                (self.DS - self.D0, _ratio(self.eta_s, np.asarray(second, float), self.e_ref)),
            ],
        )

    def evaluate(self, E):
        return self.from_invariants(*strain_invariants(E))


@dataclass(frozen=True)
class FrobeniusNorm:
    """``D0 + (Dinf - D0)(1 - exp(-lam |E|_F))``; blind to the strain mode."""

    D0: np.ndarray
    Dinf: np.ndarray
    lam: float

    def __post_init__(self):
        object.__setattr__(self, "D0", _spd(self.D0, "D0"))
        object.__setattr__(self, "Dinf", _tensor(self.Dinf, "Dinf"))
        if not self.lam >= 0:
            raise MaterialError(f"lam must be non-negative, got {self.lam}")

    def evaluate(self, E):
        weight = -np.expm1(-self.lam * frobenius_norm(E))
        return _combine(self.D0, [(self.Dinf - self.D0, weight)])


@dataclass(frozen=True)
class Constant:
    D0: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "D0", _spd(self.D0, "D0"))

    def evaluate(self, E):
        e = _strain_array(E)
        return np.broadcast_to(self.D0, e.shape[:-1] + (2, 2)).copy()


DiffusivityModel = InvariantTension | InvariantCompression | FrobeniusNorm | Constant


def evaluate_diffusivity(model, E, check: bool = True) -> np.ndarray:
    """Diffusivity tensor(s) for strain(s) ``E``; shape ``E.shape[:-1] + (2, 2)``.

    With ``check`` the result must be positive definite everywhere, otherwise
    :class:`MaterialError` names the first offending entry.
    """
    D = model.evaluate(E)
    if check:
        bad = nonelliptic_mask(D)
        if np.any(bad):
            where = tuple(int(i) for i in np.argwhere(bad)[0]) if bad.ndim else ()
            e = _strain_array(E)
            strain = e[where] if e.ndim > 1 else e
            raise MaterialError(
                f"diffusivity not positive definite at quadrature entry {where} "
                f"(strain {np.round(strain, 12).tolist()}): D = {D[where].tolist()}"
            )
    return D


def nonelliptic_mask(D) -> np.ndarray:
    """True where a ``(..., 2, 2)`` tensor field is not positive definite."""
    D = np.asarray(D, dtype=float)
    det = D[..., 0, 0] * D[..., 1, 1] - D[..., 0, 1] * D[..., 1, 0]
    return ~((D[..., 0, 0] > 0) & (det > 0))


@dataclass(frozen=True)
class LameModel:
    """Affine dependence of the Lame moduli on concentration."""

    lambda0: float
    mu0: float
    lambda1: float = 0.0
    mu1: float = 0.0
    c_ref: float = 1.0

    def __post_init__(self):
        if not self.c_ref > 0:
            raise MaterialError(f"c_ref must be positive, got {self.c_ref}")


def lame(model: LameModel, c, where: str = ""):
    """``(lambda, mu)`` at concentration(s) ``c``.

    Raises :class:`MaterialError` when the bulk modulus ``lambda + 2 mu / 3`` or
    the shear modulus ``mu`` is not positive.
    """
    c = np.asarray(c, dtype=float)
    if not np.all(np.isfinite(c)):
        raise MaterialError("non-finite concentration passed to the Lame model")
    s = c / model.c_ref
    lam = model.lambda0 + model.lambda1 * s
    mu = model.mu0 + model.mu1 * s
    bad = ~((mu > 0) & (lam + 2.0 * mu / 3.0 > 0))
    if np.any(bad):
        idx = tuple(int(i) for i in np.argwhere(bad)[0]) if bad.ndim else ()
        loc = f" at {where}{list(idx)}" if (where or idx) else ""
        raise MaterialError(
            f"non-positive elastic modulus for concentration c={float(c[idx])!r}{loc}: "
            f"lambda={float(lam[idx])!r}, mu={float(mu[idx])!r}"
        )
    if c.ndim == 0:
        return float(lam), float(mu)
    return lam, mu
