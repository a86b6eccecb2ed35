"""Transverse spectra of the cylinder cross-section.

Two one-dimensional cross-sections are built in: the circle of given
circumference and the interval with Dirichlet or Neumann ends.  Their
eigenpairs are closed-form, and every eigenfunction (and every trigonometric
profile) is carried as a finite complex-exponential polynomial, so pairings
of modes against profiles integrate exactly.

Mode indices are 1-based throughout: sigma_1^2 <= sigma_2^2 <= ... with
repetition, and nu_1^2 < nu_2^2 < ... are the distinct eigenvalues.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .quadrature import gauss_legendre

__all__ = [
    "CrossSection",
    "TransverseMode",
    "ModeBasis",
    "YProfile",
    "build_basis",
    "pair_integral",
]


class CrossSectionError(ValueError):
    """Unsupported cross-section or invalid parameter."""


# --------------------------------------------------------------------------
# exponential polynomials: {harmonic q: coeff} meaning sum c_q e^{i q w y},
# with the frequency unit w fixed by the cross-section.


def _conv(a: Mapping[int, complex], b: Mapping[int, complex]) -> dict[int, complex]:
    out: dict[int, complex] = {}
    for qa, ca in a.items():
        for qb, cb in b.items():
            q = qa + qb
            out[q] = out.get(q, 0.0) + ca * cb
    return out


def _conj(a: Mapping[int, complex]) -> dict[int, complex]:
    return {-q: np.conj(c) for q, c in a.items()}


@dataclass(frozen=True)
class CrossSection:
    kind: str  # "circle" | "interval"
    circumference: float = 0.0
    length: float = 0.0
    bc: str = ""  # interval only: "dirichlet" | "neumann"

    @classmethod
    def circle(cls, circumference: float) -> "CrossSection":
        if circumference <= 0:
            raise CrossSectionError("circle circumference must be positive")
        return cls(kind="circle", circumference=float(circumference))

    @classmethod
    def interval(cls, length: float, bc: str = "dirichlet") -> "CrossSection":
        if length <= 0:
            raise CrossSectionError("interval length must be positive")
        if bc not in ("dirichlet", "neumann"):
            raise CrossSectionError(f"unsupported interval bc {bc!r}")
        return cls(kind="interval", length=float(length), bc=bc)

    @property
    def measure(self) -> float:
        return self.circumference if self.kind == "circle" else self.length

    @property
    def omega(self) -> float:
        """Frequency unit of the exponential basis e^{i q omega y}."""
        if self.kind == "circle":
            return 2.0 * np.pi / self.circumference
        return np.pi / self.length

    def integrate_harmonic(self, q: int) -> complex:
        """Integral of e^{i q omega y} over the cross-section."""
        if q == 0:
            return complex(self.measure)
        if self.kind == "circle":
            return 0.0j
        if q % 2 == 0:
            return 0.0j
        return 2.0j * self.length / (np.pi * q)

    def integrate_poly(self, poly: Mapping[int, complex]) -> complex:
        return sum((c * self.integrate_harmonic(q) for q, c in poly.items()), 0.0j)


@dataclass(frozen=True)
class TransverseMode:
    """One transverse eigenpair, with an exact L2-normalized evaluator."""

    index: int  # 1-based position in the nondecreasing eigenvalue list
    eigenvalue: float  # sigma_l^2
    harmonic: int  # Fourier index n (circle) or mode number n (interval)
    poly: Mapping[int, complex] = field(repr=False)
    omega: float = field(repr=False, default=0.0)

    def __call__(self, y: np.ndarray | float) -> np.ndarray | complex:
        y = np.asarray(y, dtype=float)
        out = np.zeros(y.shape, dtype=complex)
        for q, c in self.poly.items():
            out += c * np.exp(1j * q * self.omega * y)
        return out if out.shape else complex(out)


@dataclass(frozen=True)
class ModeBasis:
    """The first L_max transverse eigenpairs plus the distinct-value map."""

    cross_section: CrossSection
    modes: tuple[TransverseMode, ...]
    distinct: tuple[float, ...]  # nu_j^2, strictly increasing
    mode_to_distinct: tuple[int, ...]  # 1-based j with sigma_l^2 = nu_j^2

    @property
    def L_max(self) -> int:
        return len(self.modes)

    @property
    def J_max(self) -> int:
        return len(self.distinct)

    def mode(self, l: int) -> TransverseMode:
        return self.modes[l - 1]

    def distinct_of(self, l: int) -> int:
        return self.mode_to_distinct[l - 1]

    def multiplicity(self, j: int) -> int:
        return sum(1 for jj in self.mode_to_distinct if jj == j)

    def modes_of_distinct(self, j: int) -> tuple[int, ...]:
        return tuple(l for l, jj in enumerate(self.mode_to_distinct, start=1) if jj == j)


def build_basis(cross_section: CrossSection, L_max: int) -> ModeBasis:
    """First ``L_max`` eigenpairs in nondecreasing eigenvalue order."""
    if L_max < 1:
        raise CrossSectionError("L_max must be >= 1")
    cs = cross_section
    modes: list[TransverseMode] = []
    if cs.kind == "circle":
        c = cs.circumference
        norm = 1.0 / np.sqrt(c)
        # ordering: n = 0, +1, -1, +2, -2, ...
        seq = [0]
        n = 1
        while len(seq) < L_max:
            seq.extend([n, -n])
            n += 1
        for l, nn in enumerate(seq[:L_max], start=1):
            ev = (2.0 * np.pi * nn / c) ** 2
            modes.append(
                TransverseMode(l, ev, nn, {nn: complex(norm)}, cs.omega)
            )
    elif cs.kind == "interval":
        a = cs.length
        if cs.bc == "dirichlet":
            first = 1
        else:
            first = 0
        for l in range(1, L_max + 1):
            n = first + l - 1
            ev = (np.pi * n / a) ** 2
            if n == 0:
                poly = {0: complex(1.0 / np.sqrt(a))}
            else:
                amp = np.sqrt(2.0 / a)
                if cs.bc == "dirichlet":
                    poly = {n: amp / 2.0j, -n: -amp / 2.0j}
                else:
                    poly = {n: complex(amp / 2.0), -n: complex(amp / 2.0)}
            modes.append(TransverseMode(l, ev, n, poly, cs.omega))
    else:
        raise CrossSectionError(f"unsupported cross-section kind {cs.kind!r}")

    distinct: list[float] = []
    mode_to_distinct: list[int] = []
    for m in modes:
        if not distinct or m.eigenvalue > distinct[-1] + 1e-12:
            distinct.append(m.eigenvalue)
        mode_to_distinct.append(len(distinct))
    return ModeBasis(cs, tuple(modes), tuple(distinct), tuple(mode_to_distinct))


# --------------------------------------------------------------------------
# transverse profiles


@dataclass(frozen=True)
class YProfile:
    """A transverse weight: finite trigonometric polynomial or sampled function.

    Trigonometric profiles are stored as exponential polynomials in the
    cross-section's frequency unit and integrate in closed form; sampled
    profiles fall back to quadrature.
    """

    poly: Mapping[int, complex] | None = None
    fn: Callable[[np.ndarray], np.ndarray] | None = None

    @classmethod
    def constant(cls, value: complex = 1.0) -> "YProfile":
        return cls(poly={0: complex(value)})

    @classmethod
    def fourier(cls, coeffs: Mapping[int, complex]) -> "YProfile":
        """sum_q c_q e^{i q omega y} (circle-style harmonics)."""
        return cls(poly={int(q): complex(c) for q, c in coeffs.items()})

    @classmethod
    def trig(
        cls,
        const: complex = 0.0,
        cos: Mapping[int, complex] | None = None,
        sin: Mapping[int, complex] | None = None,
    ) -> "YProfile":
        poly: dict[int, complex] = {}
        if const:
            poly[0] = complex(const)
        for q, c in (cos or {}).items():
            q = int(q)
            poly[q] = poly.get(q, 0.0) + c / 2.0
            poly[-q] = poly.get(-q, 0.0) + c / 2.0
        for q, c in (sin or {}).items():
            q = int(q)
            poly[q] = poly.get(q, 0.0) + c / 2.0j
            poly[-q] = poly.get(-q, 0.0) - c / 2.0j
        return cls(poly=poly)

    @classmethod
    def sampled(cls, fn: Callable[[np.ndarray], np.ndarray]) -> "YProfile":
        return cls(fn=fn)

    @property
    def is_closed_form(self) -> bool:
        return self.poly is not None

    def coeff_abs_sum(self) -> float:
        """Exact bound on sup_y |profile| for trigonometric profiles."""
        if self.poly is None:
            raise ValueError("no closed-form bound for sampled profiles")
        return float(sum(abs(c) for c in self.poly.values()))

    def scaled(self, factor: complex) -> "YProfile":
        if self.poly is not None:
            return YProfile(poly={q: factor * c for q, c in self.poly.items()})
        fn = self.fn
        return YProfile(fn=lambda y: factor * fn(y))

    def __call__(self, y: np.ndarray | float, omega: float) -> np.ndarray | complex:
        y = np.asarray(y, dtype=float)
        if self.fn is not None:
            return self.fn(y)
        out = np.zeros(y.shape, dtype=complex)
        for q, c in self.poly.items():
            out += c * np.exp(1j * q * omega * y)
        return out if out.shape else complex(out)


def _quadrature_pair(
    cs: CrossSection, integrand: Callable[[np.ndarray], np.ndarray], tol: float = 1e-10
) -> complex:
    """Adaptive-order quadrature over the cross-section, doubled until stable."""
    n = 64
    prev = None
    for _ in range(8):
        x, w = gauss_legendre(n)
        y = 0.5 * cs.measure * (x + 1.0)
        val = complex(np.sum(integrand(y) * w) * 0.5 * cs.measure)
        if prev is not None and abs(val - prev) <= tol * max(1.0, abs(val)):
            return val
        prev = val
        n *= 2
    return prev


def pair_integral(
    basis: ModeBasis, l: int, m: int, weight: YProfile | Callable | complex
) -> complex:
    """Integral of weight(y) * phi_m(y) * conj(phi_l(y)) over the cross-section.

    Closed form whenever the weight is a trigonometric polynomial; otherwise
    quadrature with the node count doubled until the result is stable to 1e-10.
    """
    if not (1 <= l <= basis.L_max and 1 <= m <= basis.L_max):
        raise IndexError(f"mode index out of range: l={l}, m={m}")
    if isinstance(weight, (int, float, complex)):
        weight = YProfile.constant(weight)
    elif callable(weight) and not isinstance(weight, YProfile):
        weight = YProfile.sampled(weight)
    cs = basis.cross_section
    ml = basis.mode(l)
    mm = basis.mode(m)
    if weight.is_closed_form:
        poly = _conv(weight.poly, _conv(mm.poly, _conj(ml.poly)))
        return cs.integrate_poly(poly)
    fn = weight.fn
    return _quadrature_pair(cs, lambda y: fn(y) * mm(y) * np.conj(ml(y)))
