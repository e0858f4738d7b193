"""Inhomogeneous line G(Delta) on the 1-3 transition and its quadrature.

Frequencies are in units of the inhomogeneous width, so the default
distribution is a unit Gaussian truncated at six sigma.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.special import erf, roots_legendre

from .errors import AtAsymptote, PoleHit, PoleInSupport, UnnormalizableDistribution


@dataclass(frozen=True)
class Distribution:
    kind: str = "gaussian"
    width: float = 1.0
    center: float = 0.0
    support: Optional[tuple[float, float]] = None
    table: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("gaussian", "lorentzian-truncated", "tabulated"):
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if self.kind == "tabulated":
            if self.table is None:
                raise UnnormalizableDistribution("tabulated distribution needs a table")
            tab = np.atleast_2d(np.asarray(self.table, dtype=float))
            if tab.shape[1] != 2:
                raise UnnormalizableDistribution("table must have two columns (Delta, G)")
            if np.any(np.diff(tab[:, 0]) <= 0):
                raise UnnormalizableDistribution("table abscissae must be strictly increasing")
            if np.any(tab[:, 1] < 0) or not np.all(np.isfinite(tab)):
                raise UnnormalizableDistribution("table values must be finite and non-negative")
            object.__setattr__(self, "table", tab)
            if self.support is None:
                object.__setattr__(self, "support", (float(tab[0, 0]), float(tab[-1, 0])))
        elif self.support is None:
            object.__setattr__(
                self, "support", (self.center - 6 * self.width, self.center + 6 * self.width)
            )
        if not self.width > 0:
            raise UnnormalizableDistribution("width must be positive")
        lo, hi = self.support
        if hi < lo:
            raise UnnormalizableDistribution(f"empty support {self.support}")
        norm = self._raw_mass()
        if not np.isfinite(norm) or norm <= 0:
            raise UnnormalizableDistribution(f"distribution mass {norm} over {self.support}")
        object.__setattr__(self, "_norm", norm)

    @property
    def is_point_mass(self) -> bool:
        return self.kind == "tabulated" and self.table.shape[0] == 1

    def _raw(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "gaussian":
            return np.exp(-0.5 * ((x - self.center) / self.width) ** 2) / (self.width * np.sqrt(2 * np.pi))
        if self.kind == "lorentzian-truncated":
            return (self.width / np.pi) / ((x - self.center) ** 2 + self.width**2)
        return np.interp(x, self.table[:, 0], self.table[:, 1], left=0.0, right=0.0)

    def _raw_mass(self) -> float:
        lo, hi = self.support
        if self.kind == "gaussian":
            s = self.width * np.sqrt(2)
            return float(0.5 * (erf((hi - self.center) / s) - erf((lo - self.center) / s)))
        if self.kind == "lorentzian-truncated":
            return float((np.arctan((hi - self.center) / self.width) - np.arctan((lo - self.center) / self.width)) / np.pi)
        if self.is_point_mass:
            return float(self.table[0, 1])
        return float(np.trapezoid(self.table[:, 1], self.table[:, 0]))

    def pdf(self, delta) -> np.ndarray:
        """Normalised density; zero outside the support."""
        x = np.asarray(delta, dtype=float)
        lo, hi = self.support
        inside = (x >= lo) & (x <= hi)
        return np.where(inside, self._raw(x) / self._norm, 0.0)

    def check_pole_clearance(self, delta1: float, margin: float = 0.0) -> None:
        lo, _ = self.support
        if not lo > -delta1 + margin:
            raise PoleInSupport(f"support starts at {lo}, which reaches the pole at -Delta1 = {-delta1}")

    @classmethod
    def from_file(cls, path, **kw) -> "Distribution":
        """Two-column text (Delta, G); blank/comment lines and trailing newlines ignored."""
        rows = []
        for line in Path(path).read_text().splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                rows.append([float(v) for v in line.replace(",", " ").split()])
        return cls(kind="tabulated", table=np.asarray(rows), **kw)


@dataclass(frozen=True)
class EnsembleGrid:
    nodes: np.ndarray
    weights: np.ndarray
    distribution: Optional[Distribution] = field(default=None, repr=False, compare=False)

    @property
    def count(self) -> int:
        return self.nodes.size

    def moment(self, k: int) -> float:
        return float(np.sum(self.weights * self.nodes**k))


def make_ensemble(d: Distribution, M: int, panels: int = 1) -> EnsembleGrid:
    """Gauss-Legendre nodes over the support with weights multiplied by G.

    ``panels > 1`` splits the support into equal sub-intervals with ``M //
    panels`` nodes each, which keeps the node spacing nearly uniform (useful
    when the ensemble stands in for a continuum over long times).
    """
    if M < 16:
        raise ValueError(f"need at least 16 nodes, got {M}")
    if d.is_point_mass:
        return EnsembleGrid(np.array([float(d.table[0, 0])]), np.array([1.0]), d)
    if d.kind == "tabulated":
        # G is piecewise linear: integrate each segment separately
        edges = d.table[:, 0]
        per = max(2, int(np.ceil(M / (edges.size - 1))))
    else:
        if panels < 1 or M % panels:
            raise ValueError("M must be a multiple of panels")
        edges = np.linspace(*d.support, panels + 1)
        per = M // panels
    x, w = roots_legendre(per)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = (0.5 * (a + b) + 0.5 * (b - a) * x[None, :]).ravel()
    weights = (0.5 * (b - a) * w[None, :]).ravel() * d.pdf(nodes)
    if not np.isclose(weights.sum(), 1.0, rtol=1e-6, atol=0):
        raise UnnormalizableDistribution(f"quadrature mass {weights.sum()} differs from 1")
    return EnsembleGrid(nodes, weights, d)


@dataclass(frozen=True)
class RamanMap:
    """Far-detuned Raman geometry: one-photon detuning ``delta1``, two-photon
    detuning ``delta21`` and write/read control amplitude ``omega1``."""

    delta1: float
    delta21: float
    omega1: float
    width: float = 1.0

    def __post_init__(self):
        if self.delta1 < 10 * self.width:
            raise ValueError(
                f"far-detuning invariant violated: Delta1 = {self.delta1} < 10 x IB width ({self.width})"
            )

    @property
    def stark_shift(self) -> float:
        return self.omega1**2 / self.delta1

    @property
    def peak_frequency(self) -> float:
        """``w_o = Delta21 - |Omega1|**2 / Delta1``, image of Delta = 0."""
        return self.delta21 - self.stark_shift

    def raman_width(self, sigma: Optional[float] = None) -> float:
        sigma = self.width if sigma is None else sigma
        return sigma * (self.omega1 / self.delta1) ** 2


def _inv(delta, delta1, err):
    d = np.asarray(delta1 + np.asarray(delta, dtype=float))
    if np.any(d == 0):
        raise err(f"Delta1 + Delta vanishes (Delta1 = {delta1})")
    return 1.0 / d


def chi(e: EnsembleGrid, delta1: float) -> float:
    """``<1 / (Delta1 + Delta)>`` over the ensemble (real for real nodes)."""
    if np.any(e.nodes <= -delta1):
        raise PoleInSupport(f"ensemble reaches the pole at Delta = {-delta1}")
    return float(np.sum(e.weights / (delta1 + e.nodes)))


def stark_factor(delta, delta1: float) -> np.ndarray:
    """``f1(Delta) = 1/Delta1 - 1/(Delta1 + Delta)``."""
    return 1.0 / delta1 - _inv(delta, delta1, PoleHit)


def two_photon_shift(delta, m: RamanMap):
    """Raman detuning of an atom with optical detuning ``delta`` while the
    write control is on: ``Delta21 - |Omega1|^2 / (Delta1 + Delta)``."""
    return m.delta21 - m.omega1**2 * _inv(delta, m.delta1, PoleHit)


def rephase_shift(delta, omega_r: float, m: RamanMap):
    """Raman detuning under the rephasing pulse: ``Delta21 + |OmegaR|^2 / (Delta1 + Delta)``.

    The Stark term has the opposite sign to :func:`two_photon_shift`.
    """
    return m.delta21 + omega_r**2 * _inv(delta, m.delta1, PoleHit)


def detuning_of_frequency(omega, m: RamanMap):
    """Inverse of :func:`two_photon_shift`: ``|Omega1|^2 / (Delta21 - w) - Delta1``."""
    w = np.asarray(omega, dtype=float)
    gap = m.delta21 - w
    if np.any(gap == 0):
        raise AtAsymptote(f"w = Delta21 = {m.delta21} maps to Delta = infinity")
    return m.omega1**2 / gap - m.delta1
