"""Gegenbauer polynomials C_m^lam at complex arguments.

Everything is built on the three-term recurrence

    C_0 = 1,   C_1 = 2*lam*z,
    m*C_m = 2*(m + lam - 1)*z*C_{m-1} - (m + 2*lam - 2)*C_{m-2},

which is numerically stable for the moderate degrees used here.  The
derivative uses the order-raising identity d/dz C_m^lam = 2*lam*C_{m-1}^{lam+1}
and the second derivative applies it twice, so the Sturm-Liouville residual

    (1 - z^2) y'' - (n - 1) z y' + m (m + n - 2) y,   lam = (n - 2)/2,

is an exact polynomial identity up to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

# Degrees above this are never needed by the estimators and the recurrence
# has not been validated beyond it.
MAX_DEGREE = 16


@dataclass(frozen=True)
class GegenbauerSpec:
    """Degree and order of a Gegenbauer polynomial, order = (n - 2)/2."""

    degree: int
    order: float

    def __post_init__(self):
        if self.degree < 0:
            raise ConfigError(f"degree must be >= 0, got {self.degree}")
        if self.degree > MAX_DEGREE:
            raise ConfigError(
                f"degree {self.degree} exceeds supported maximum {MAX_DEGREE}"
            )
        if self.order < 0.5:
            raise ConfigError(f"order must be >= 1/2, got {self.order}")

    @staticmethod
    def for_dimension(degree: int, n: int) -> "GegenbauerSpec":
        if n < 3:
            raise ConfigError(f"dimension must be >= 3, got {n}")
        return GegenbauerSpec(degree, (n - 2) / 2.0)


def _recurrence(m: int, lam: float, z):
    """Evaluate C_m^lam(z) by upward recurrence.  Vectorised in z."""
    z = np.asarray(z, dtype=complex)
    c_prev = np.ones_like(z)
    if m == 0:
        return c_prev
    c_cur = 2.0 * lam * z
    for j in range(2, m + 1):
        c_next = (2.0 * (j + lam - 1.0) * z * c_cur - (j + 2.0 * lam - 2.0) * c_prev) / j
        c_prev, c_cur = c_cur, c_next
    return c_cur


def gegenbauer(spec: GegenbauerSpec, z):
    """Value of C_m^lam(z); accepts scalars or arrays of complex z."""
    out = _recurrence(spec.degree, spec.order, z)
    if np.isscalar(z) or np.ndim(z) == 0:
        return complex(out)
    return out


def gegenbauer_derivative(spec: GegenbauerSpec, z):
    """d/dz C_m^lam(z) via the order-raising identity 2*lam*C_{m-1}^{lam+1}."""
    if spec.degree == 0:
        z_arr = np.asarray(z, dtype=complex)
        out = np.zeros_like(z_arr)
        return complex(0.0) if out.ndim == 0 else out
    out = 2.0 * spec.order * _recurrence(spec.degree - 1, spec.order + 1.0, z)
    if np.isscalar(z) or np.ndim(z) == 0:
        return complex(out)
    return out


def gegenbauer_second_derivative(spec: GegenbauerSpec, z):
    """d^2/dz^2 C_m^lam(z), order-raising identity applied twice."""
    if spec.degree <= 1:
        z_arr = np.asarray(z, dtype=complex)
        out = np.zeros_like(z_arr)
        return complex(0.0) if out.ndim == 0 else out
    lam = spec.order
    out = 4.0 * lam * (lam + 1.0) * _recurrence(spec.degree - 2, lam + 2.0, z)
    if np.isscalar(z) or np.ndim(z) == 0:
        return complex(out)
    return out


def ode_residual(spec: GegenbauerSpec, z):
    """Residual of (1-z^2) y'' - (n-1) z y' + m (m+n-2) y at y = C_m^lam.

    Requires the order to come from an integer dimension, lam = (n-2)/2.
    """
    n = 2.0 * spec.order + 2.0
    m = spec.degree
    y = _recurrence(m, spec.order, z)
    yp = gegenbauer_derivative(spec, np.asarray(z, dtype=complex))
    ypp = gegenbauer_second_derivative(spec, np.asarray(z, dtype=complex))
    z_arr = np.asarray(z, dtype=complex)
    res = (1.0 - z_arr**2) * ypp - (n - 1.0) * z_arr * yp + m * (m + n - 2.0) * y
    if np.isscalar(z) or np.ndim(z) == 0:
        return complex(res)
    return res


def endpoint_nonvanishing(spec: GegenbauerSpec):
    """Values at z = +1 and z = -1; both must be bounded away from zero."""
    plus = complex(_recurrence(spec.degree, spec.order, 1.0))
    minus = complex(_recurrence(spec.degree, spec.order, -1.0))
    if abs(plus) <= 1e-14 or abs(minus) <= 1e-14:
        raise ConfigError(
            f"endpoint value vanished for degree {spec.degree}, order {spec.order}: "
            f"C(1)={plus}, C(-1)={minus}"
        )
    return plus, minus
