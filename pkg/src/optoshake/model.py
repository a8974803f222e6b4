"""Parameter sets, unit reduction and thermal/drive arithmetic.

Everything downstream of this module works in units where the mechanical
angular frequency is one: frequencies and rates are divided by ``omega_m``
and times are measured in ``1/omega_m``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

HBAR = 1.054571817e-34  # J s
K_B = 1.380649e-23  # J / K

# below this the bath is treated as exactly zero temperature
MIN_TEMPERATURE = 1e-6  # K


class ParameterError(ValueError):
    """Raised for parameter sets that violate their invariants."""


def _check_finite(**values):
    for name, value in values.items():
        if not math.isfinite(value):
            raise ParameterError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class PhysicalParams:
    """Laboratory-unit constants of the cavity optomechanical system.

    Frequencies and rates are angular (rad/s), ``P`` is the drive power in W
    and ``T`` the bath temperature in K.  ``P`` may be omitted when the
    linearized coupling is supplied directly.
    """

    omega_c: float
    omega_m: float
    omega_l: float
    kappa: float
    gamma: float
    g: float
    T: float = 0.0
    P: Optional[float] = None

    def __post_init__(self):
        _check_finite(omega_c=self.omega_c, omega_m=self.omega_m, omega_l=self.omega_l,
                      kappa=self.kappa, gamma=self.gamma, g=self.g, T=self.T)
        if self.omega_c <= 0 or self.omega_m <= 0:
            raise ParameterError("omega_c and omega_m must be positive")
        if self.kappa < 0 or self.gamma < 0 or self.g < 0:
            raise ParameterError("kappa, gamma and g must be non-negative")
        if self.T < 0:
            raise ParameterError("T must be non-negative")
        if self.P is not None and (not math.isfinite(self.P) or self.P < 0):
            raise ParameterError("P must be a non-negative finite power")

    @property
    def delta_c(self) -> float:
        """Bare cavity-laser detuning ``omega_c - omega_l`` (rad/s)."""
        return self.omega_c - self.omega_l


@dataclass(frozen=True)
class ModulationParams:
    """Cosine modulation of the cavity frequency: amplitude ``xi`` and
    frequency ``nu`` (in units of ``omega_m``)."""

    xi: float = 0.0
    nu: float = 1.0

    def __post_init__(self):
        _check_finite(xi=self.xi, nu=self.nu)
        if self.xi < 0:
            raise ParameterError("xi must be non-negative")
        if self.nu <= 0:
            raise ParameterError("nu must be positive")


@dataclass(frozen=True)
class ReducedParams:
    """Dimensionless working parameters (units of ``omega_m``).

    ``g`` and ``E`` are only consumed by the mean-field equations; the
    fluctuation dynamics depend on ``delta_c_prime``, ``G``, the rates,
    the modulation and ``n_th``.
    """

    delta_c_prime: float
    G_re: float
    kappa: float
    gamma: float
    n_th: float = 0.0
    G_im: float = 0.0
    xi: float = 0.0
    nu: float = 1.0
    g: float = 0.0
    E: float = 0.0

    def __post_init__(self):
        _check_finite(delta_c_prime=self.delta_c_prime, G_re=self.G_re, G_im=self.G_im,
                      kappa=self.kappa, gamma=self.gamma, n_th=self.n_th, xi=self.xi,
                      nu=self.nu, g=self.g, E=self.E)
        if self.kappa < 0 or self.gamma < 0 or self.n_th < 0:
            raise ParameterError("kappa, gamma and n_th must be non-negative")
        if self.xi < 0:
            raise ParameterError("xi must be non-negative")
        if self.nu <= 0:
            raise ParameterError("nu must be positive")

    @property
    def G(self) -> complex:
        return complex(self.G_re, self.G_im)

    @property
    def modulated(self) -> bool:
        return self.xi != 0.0

    def replace(self, **changes) -> "ReducedParams":
        if "G" in changes:
            G = complex(changes.pop("G"))
            changes.setdefault("G_re", G.real)
            changes.setdefault("G_im", G.imag)
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {
            "delta_c_prime": self.delta_c_prime,
            "G_re": self.G_re,
            "G_im": self.G_im,
            "kappa": self.kappa,
            "gamma": self.gamma,
            "n_th": self.n_th,
            "xi": self.xi,
            "nu": self.nu,
            "g": self.g,
            "E": self.E,
        }


def thermal_occupation(omega_m: float, T: float) -> float:
    """Bose-Einstein occupancy ``1/(exp(hbar*omega_m/(k_B*T)) - 1)``.

    Temperatures below 1 uK return exactly zero.
    """
    if omega_m <= 0:
        raise ParameterError("omega_m must be positive")
    if T < 0:
        raise ParameterError("T must be non-negative")
    if T < MIN_TEMPERATURE:
        return 0.0
    x = HBAR * omega_m / (K_B * T)
    return 1.0 / math.expm1(x)


def drive_amplitude(P: float, kappa: float, omega_l: float) -> float:
    """Drive amplitude ``E = sqrt(2*kappa*P/(hbar*omega_l))`` in rad/s."""
    if P < 0 or kappa < 0 or omega_l < 0:
        raise ParameterError("P, kappa and omega_l must be non-negative")
    if P == 0 or kappa == 0:
        return 0.0
    return math.sqrt(2.0 * kappa * P / (HBAR * omega_l))


def reduce(params: PhysicalParams, mod: ModulationParams | None = None,
           G_override: complex | None = None) -> ReducedParams:
    """Nondimensionalize ``params`` by ``omega_m``.

    ``G_override`` is the linearized coupling in rad/s.  When a drive power
    is present the static mean-field solution supplies the effective
    detuning (and ``G`` unless overridden); without a power the override is
    mandatory and the bare detuning is used.
    """
    mod = mod or ModulationParams()
    wm = params.omega_m
    E = 0.0
    if params.P is not None:
        from .meanfield import steady_mean_fields

        E = drive_amplitude(params.P, params.kappa, params.omega_l)
        _, delta_c_prime, G = steady_mean_fields(params, E)
    elif G_override is None:
        raise ParameterError("either a drive power P or a coupling override G is required")
    else:
        delta_c_prime = params.delta_c
    if G_override is not None:
        G = complex(G_override)
    return ReducedParams(
        delta_c_prime=delta_c_prime / wm,
        G_re=G.real / wm,
        G_im=G.imag / wm,
        kappa=params.kappa / wm,
        gamma=params.gamma / wm,
        n_th=thermal_occupation(wm, params.T),
        xi=mod.xi,
        nu=mod.nu,
        g=params.g / wm,
        E=E / wm,
    )


@dataclass(frozen=True)
class ReferenceSystem:
    """Reference device constants (SI, rad/s)."""

    omega_c: float = 2 * math.pi * 7.54e9
    omega_m: float = 2 * math.pi * 10.56e6
    kappa: float = 2 * math.pi * 200e3
    gamma: float = 2 * math.pi * 32.0
    g: float = 2 * math.pi * 200.0

    def physical(self, delta_c: float = 0.0, T: float = 0.0, P: float | None = None) -> PhysicalParams:
        """``delta_c`` in units of ``omega_m``."""
        return PhysicalParams(omega_c=self.omega_c, omega_m=self.omega_m,
                              omega_l=self.omega_c - delta_c * self.omega_m,
                              kappa=self.kappa, gamma=self.gamma, g=self.g, T=T, P=P)

    def reduced(self, delta_c_prime: float = 1.0, G: complex = 1.0, xi: float = 0.0,
                nu: float = 30.0, T: float = 0.0, n_th: float | None = None) -> ReducedParams:
        """Reduced set with the coupling and detuning entered directly."""
        if n_th is None:
            n_th = thermal_occupation(self.omega_m, T)
        G = complex(G)
        return ReducedParams(delta_c_prime=delta_c_prime, G_re=G.real, G_im=G.imag,
                             kappa=self.kappa / self.omega_m, gamma=self.gamma / self.omega_m,
                             n_th=n_th, xi=xi, nu=nu, g=self.g / self.omega_m)


REFERENCE = ReferenceSystem()
