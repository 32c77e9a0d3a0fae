"""Boundary-value and normal-derivative recovery from local DtN differences.

The recovery follows the constructive route: place order-m singular probes at
exterior points z_tau = x0 + tau nu, pair the DtN difference against their
patch-supported traces, and normalise by the monotonicity-weighted energy of
the same discrete probe fields.  Because numerator and denominator share the
probe pair, mesh-resolution effects cancel and the per-tau estimates converge
to the local coefficient gap as tau shrinks; a linear fit in tau removes the
leading error order.  The sign condition on the complex weight F gates every
run: inside the admissible frequency window it holds with margin, and when it
fails the estimators refuse rather than return garbage.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .admittivity import AdmittivityFamily, ParameterField, WindowResult, complex_dot
from .dtn import LocalDtnMatrix, SigmaBasis, assemble_dtn, dtn_star_norm, h_half_gram, sigma_basis
from .errors import (ConfigError, EstimatorRefusal, GeometryError,
                     NumericError, SingularityError)
from .fem import BlockSystem, Mesh, assemble, build_mesh, energy_density
from .geometry import (BoundaryPatch, BoxDomain, EnlargedDomain, EtaSets,
                       ProbePath, build_enlarged_domain, build_eta_sets,
                       make_tau_grid, probe_point)
from .singular import build_corrected_probe, make_probe


def delta_h(alpha: float, h: int) -> float:
    """Stability exponent prod_{i=0}^{h} alpha / (alpha + i)."""
    if not (0.0 < alpha < 1.0):
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")
    if h < 0:
        raise ConfigError(f"derivative order must be >= 0, got {h}")
    out = 1.0
    for i in range(h + 1):
        out *= alpha / (alpha + i)
    return out


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of log|y| against log|x|."""
    xs = np.abs(np.asarray(xs, dtype=float))
    ys = np.abs(np.asarray(ys, dtype=float))
    if np.any(xs <= 0.0) or np.any(ys <= 0.0):
        raise NumericError("log-log regression needs positive data")
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


# ---------------------------------------------------------------------------
# Sign condition
# ---------------------------------------------------------------------------

def _inverse_at(family: AdmittivityFamily, a: ParameterField, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    t = float(np.asarray(a.values(x)))
    A = family.real_part(x, t) + 1j * family.freq * family.imag_part(x, t)
    B = np.linalg.inv(A)
    return 0.5 * (B + B.T)


def f_function(
    family: AdmittivityFamily,
    a1: ParameterField,
    a2: ParameterField,
    x0,
    z_tau,
    x,
):
    """Complex sign-condition weight at x (vectorised over points).

    First factor: difference of inverse admittivities frozen at the anchor;
    the two conjugated inverse-quadratic factors are raised to n/2 with
    principal branches.
    """
    x0 = np.asarray(x0, dtype=float)
    z = np.asarray(z_tau, dtype=float)
    n = family.dim
    B10 = _inverse_at(family, a1, x0)
    B20 = _inverse_at(family, a2, x0)
    B1t = _inverse_at(family, a1, z)
    B2t = _inverse_at(family, a2, z)
    squeeze = np.ndim(x) == 1
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    xh = pts - z[None, :]
    if np.any(np.sum(xh * xh, axis=1) == 0.0):
        raise SingularityError("sign-condition sample coincides with the probe point")
    first = complex_dot(xh @ (B20 - B10), xh)
    q1 = complex_dot(xh @ np.conj(B1t), xh)
    q2 = complex_dot(xh @ np.conj(B2t), xh)
    vals = first * q1 ** (n / 2.0) * q2 ** (n / 2.0)
    return vals[0] if squeeze else vals


@dataclass(frozen=True)
class SignConditionReport:
    passed: bool
    degenerate: bool
    swapped: bool
    margin_positive: float
    margin_dominance: float
    samples: int
    note: str = ""

    def summary(self) -> str:
        if self.degenerate:
            return "sign condition degenerate (coinciding parameters at the anchor)"
        status = "holds" if self.passed else "FAILS"
        return (
            f"sign condition {status}: min Re F = {self.margin_positive:.3e}, "
            f"min (Re F - |Im F|) = {self.margin_dominance:.3e} on {self.samples} samples"
        )


def _sample_ball_cap(box: BoxDomain, z, rho: float, count: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    z = np.asarray(z, dtype=float)
    pts = []
    attempts = 0
    while len(pts) < count:
        attempts += 1
        if attempts > 200 * count:
            raise GeometryError("could not sample the ball-domain intersection")
        u = rng.standard_normal(3)
        norm = np.linalg.norm(u)
        if norm < 1e-12:
            continue
        x = z + (rho * rng.random() ** (1.0 / 3.0) / norm) * u
        if box.contains(x):
            pts.append(x)
    return np.asarray(pts)


def check_sign_condition(
    family: AdmittivityFamily,
    a1: ParameterField,
    a2: ParameterField,
    x0,
    z_tau,
    box: BoxDomain,
    rho: float,
    samples: int = 1000,
    seed: int = 0,
) -> SignConditionReport:
    """Sample |Im F| <= Re F > 0 over the ball-domain intersection.

    The roles of a1 and a2 are swapped when the anchor gap has the opposite
    orientation; a vanishing anchor gap is reported as degenerate.
    """
    gap0 = float(np.asarray(a1.values(np.asarray(x0, float)))) - float(
        np.asarray(a2.values(np.asarray(x0, float)))
    )
    if abs(gap0) < 1e-14:
        return SignConditionReport(
            passed=True, degenerate=True, swapped=False,
            margin_positive=0.0, margin_dominance=0.0, samples=0,
        )
    swapped = gap0 < 0.0
    lead, trail = (a2, a1) if swapped else (a1, a2)
    pts = _sample_ball_cap(box, z_tau, rho, samples, seed)
    vals = f_function(family, lead, trail, x0, z_tau, pts)
    # F scales like |x - z|^{2n+2}; normalise so the margins are scale-free.
    r = np.linalg.norm(pts - np.asarray(z_tau, float)[None, :], axis=1)
    vals = vals / r ** (2.0 * family.dim + 2.0)
    margin_pos = float(np.min(vals.real))
    margin_dom = float(np.min(vals.real - np.abs(vals.imag)))
    passed = margin_pos > 0.0 and margin_dom >= -1e-12 * max(1.0, float(np.max(np.abs(vals))))
    return SignConditionReport(
        passed=passed, degenerate=False, swapped=swapped,
        margin_positive=margin_pos, margin_dominance=margin_dom,
        samples=len(pts),
    )


# ---------------------------------------------------------------------------
# Weighted power integrals over ball caps
# ---------------------------------------------------------------------------

_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(200)


def weighted_integral(box: BoxDomain, z, rho: float, exponent: float) -> float:
    """Integral of |x - z|^exponent over B_rho(z) intersected with the box.

    Valid when the intersection is a flat spherical cap below one face, which
    holds for probe points over the shrunken patch with rho <= eta/4.  The
    radial integral is evaluated in closed form and the polar integral by
    high-order Gauss quadrature, so the relative accuracy is far below 1e-4.
    """
    z = np.asarray(z, dtype=float)
    if box.contains(z):
        raise GeometryError("weighted integral expects the probe point outside the box")
    tau = box.boundary_distance(z)
    if tau >= rho:
        return 0.0
    lo, hi = box.lo_arr, box.hi_arr
    # The cap assumption: exactly one coordinate of z exits the box, by less
    # than rho, while the lateral clearances exceed rho.
    below = z < lo
    above = z > hi
    out_axes = np.where(below | above)[0]
    if out_axes.size != 1:
        raise GeometryError("probe point must exit the box through a single face")
    axis = int(out_axes[0])
    for a in range(3):
        if a == axis:
            continue
        if z[a] - lo[a] < rho or hi[a] - z[a] < rho:
            raise GeometryError("ball cap reaches a lateral face; shrink rho")
    depth_available = (hi[axis] - lo[axis])
    if rho - tau > depth_available:
        raise GeometryError("ball cap reaches the opposite face; shrink rho")

    e = float(exponent)
    u0 = tau / rho
    u = 0.5 * (u0 + 1.0) + 0.5 * (1.0 - u0) * _GAUSS_NODES
    w = 0.5 * (1.0 - u0) * _GAUSS_WEIGHTS
    if abs(e + 3.0) < 1e-13:
        radial = np.log(rho * u / tau)
    else:
        radial = (rho ** (e + 3.0) - (tau / u) ** (e + 3.0)) / (e + 3.0)
    return float(2.0 * np.pi * np.sum(w * radial))


# ---------------------------------------------------------------------------
# Experiment frames and forward bundles
# ---------------------------------------------------------------------------

@dataclass
class LabFrame:
    """Geometry, meshes, basis and Gram shared by all forwards of a run."""

    box: BoxDomain
    patch: BoundaryPatch
    eta: float
    h: float
    family: AdmittivityFamily
    eta_sets: EtaSets
    enlarged: EnlargedDomain
    mesh: Mesh
    mesh_eta: Mesh
    basis: SigmaBasis
    gram: np.ndarray
    window: Optional[WindowResult] = None

    @property
    def k(self) -> float:
        return self.family.freq

    def tau_default(self, count: int = 5) -> tuple:
        return make_tau_grid(self.eta / 16.0, 0.5, count)


def build_frame(
    box: BoxDomain,
    patch: BoundaryPatch,
    eta: float,
    h: float,
    family: AdmittivityFamily,
    window: Optional[WindowResult] = None,
) -> LabFrame:
    eta_sets = build_eta_sets(patch, eta)
    enlarged = build_enlarged_domain(box, patch, eta, grid_h=h)
    mesh = build_mesh(box, h, patch=patch)
    mesh_eta = build_mesh(enlarged, h)
    basis = sigma_basis(mesh, patch)
    gram = h_half_gram(mesh, basis)
    return LabFrame(
        box=box, patch=patch, eta=eta, h=h, family=family,
        eta_sets=eta_sets, enlarged=enlarged, mesh=mesh, mesh_eta=mesh_eta,
        basis=basis, gram=gram, window=window,
    )


@dataclass
class Forward:
    """One parameter field with its assembled systems and DtN matrix."""

    frame: LabFrame
    a: ParameterField
    system: BlockSystem
    system_eta: BlockSystem
    dtn: LocalDtnMatrix


def build_forward(frame: LabFrame, a: ParameterField) -> Forward:
    system = assemble(frame.mesh, frame.family, a, frame.k)
    system_eta = assemble(frame.mesh_eta, frame.family, a, frame.k)
    dtn = assemble_dtn(
        frame.mesh, frame.family, a, frame.patch, frame.k,
        basis=frame.basis, gram=frame.gram, system=system,
    )
    return Forward(frame=frame, a=a, system=system, system_eta=system_eta, dtn=dtn)


# ---------------------------------------------------------------------------
# Gap estimators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TauRecord:
    """Per-tau data: pairing, monotonicity weights and the local estimate.

    n_* are the monotonicity-weighted probe energies, m_* the depth-weighted
    ones (full domain and restricted to the concentration ball).
    """

    tau: float
    estimate: float
    pairing: complex
    n_full: float
    n_ball: float
    m_full: float
    m_ball: float
    trace_norm_1: float
    trace_norm_2: float


@dataclass
class GapEstimate:
    mode: str
    x0: tuple
    order: int
    rho: float
    records: list
    extrapolated: float
    fit_slope: float
    sign_report: Optional[SignConditionReport]
    observed_tau_rate: Optional[float]
    boundary_coupled: Optional[float] = None

    @property
    def per_tau(self) -> np.ndarray:
        return np.array([r.estimate for r in self.records])

    @property
    def taus(self) -> np.ndarray:
        return np.array([r.tau for r in self.records])


def _extrapolate(taus: np.ndarray, ests: np.ndarray):
    """Linear-in-tau fit; the intercept removes the leading error order."""
    if len(taus) == 1:
        return float(ests[0]), 0.0, None
    coeff = np.polyfit(taus, ests, 1)
    intercept = float(coeff[1])
    slope = float(coeff[0])
    dev = np.abs(ests - intercept)
    rate = None
    if np.all(dev > 1e-14):
        rate = float(np.polyfit(np.log(taus), np.log(dev), 1)[0])
    return intercept, slope, rate


def _gram_norm(gram: np.ndarray, f: np.ndarray) -> float:
    return float(np.sqrt(np.real(np.conj(f) @ gram @ f)))


def _pair_records(
    fwd1: Forward,
    fwd2: Forward,
    x0,
    tau_grid,
    m: int,
    rho: float,
    boundary_offset: Optional[float] = None,
):
    """Probe, pair and weigh one anchor across the tau grid.

    With boundary_offset None the estimate is the boundary value
    Re(P) / n_full; otherwise it is the normal-derivative residual
    -(Re(P) - offset * n_full) / m_full with the boundary term removed.
    """
    frame = fwd1.frame
    if fwd2.frame is not frame:
        raise ConfigError("forwards must share a laboratory frame")
    x0 = np.asarray(x0, dtype=float)
    path = ProbePath(frame.eta_sets, tuple(x0), tuple(tau_grid))
    t_star = 0.5 * (
        float(np.asarray(fwd1.a.values(x0))) + float(np.asarray(fwd2.a.values(x0)))
    )
    D = frame.family.dt_real(x0, t_star) + 1j * frame.k * frame.family.dt_imag(x0, t_star)
    delta_p = fwd1.dtn.pairing - fwd2.dtn.pairing
    sigma_idx = list(frame.basis.vertices)
    bary = frame.mesh.barycenters
    depth = frame.patch.depth(bary)

    records = []
    for tau in tau_grid:
        z = probe_point(path, tau)
        trace = []
        for fwd in (fwd1, fwd2):
            probe = make_probe(frame.family, fwd.a, z, m)
            corrected = build_corrected_probe(
                probe, frame.enlarged, frame.mesh_eta, frame.family, fwd.a,
                system=fwd.system_eta,
            )
            trace.append(corrected.trace_vector(frame.mesh))
        f1 = trace[0][sigma_idx]
        f2 = trace[1][sigma_idx]
        n1 = _gram_norm(frame.gram, f1)
        n2 = _gram_norm(frame.gram, f2)
        # Probes are normalised in the trace norm for the pairing and the raw
        # scale restored afterwards; the product is unchanged but the norms
        # are recorded for the report.
        pairing = complex((f1 / n1) @ delta_p @ (f2 / n2)) * n1 * n2
        u1 = fwd1.system.solve_dirichlet(trace[0])
        u2 = fwd2.system.solve_dirichlet(trace[1])
        dens = energy_density(frame.mesh, D, u1, u2).real
        ball = np.linalg.norm(bary - z[None, :], axis=1) < rho
        n_full = float(np.sum(dens))
        n_ball = float(np.sum(dens[ball]))
        m_full = float(np.sum(depth * dens))
        m_ball = float(np.sum((depth * dens)[ball]))
        if boundary_offset is None:
            est = pairing.real / n_full
        else:
            est = -(pairing.real - boundary_offset * n_full) / m_full
        records.append(TauRecord(
            tau=float(tau), estimate=float(est), pairing=pairing,
            n_full=n_full, n_ball=n_ball, m_full=m_full, m_ball=m_ball,
            trace_norm_1=n1, trace_norm_2=n2,
        ))
    return records


def boundary_gap_estimate(
    fwd1: Forward,
    fwd2: Forward,
    x0,
    tau_grid=None,
    m: int = 0,
    rho: Optional[float] = None,
    check_sign: bool = True,
    sign_samples: int = 1000,
    seed: int = 0,
) -> GapEstimate:
    """Per-tau and extrapolated estimates of (a1 - a2)(x0).

    Each estimate is Re of the DtN-difference pairing of the two corrected
    probe traces divided by the monotonicity-weighted energy of the same
    discrete probe pair, with the t-derivative frozen at the anchor and the
    midpoint parameter value.
    """
    frame = fwd1.frame
    rho = frame.eta / 4.0 if rho is None else rho
    if rho > frame.eta / 4.0 + 1e-12:
        raise ConfigError(f"rho={rho} exceeds eta/4={frame.eta / 4.0}")
    tau_grid = frame.tau_default() if tau_grid is None else tuple(tau_grid)

    sign_report = None
    if check_sign:
        path = ProbePath(frame.eta_sets, tuple(np.asarray(x0, float)), tuple(tau_grid))
        z_top = probe_point(path, max(tau_grid))
        sign_report = check_sign_condition(
            frame.family, fwd1.a, fwd2.a, x0, z_top, frame.box, rho,
            samples=sign_samples, seed=seed,
        )
        if not sign_report.passed:
            raise EstimatorRefusal(
                f"refusing boundary-gap estimate: {sign_report.summary()}",
                report=sign_report,
            )

    records = _pair_records(fwd1, fwd2, x0, tau_grid, m, rho, boundary_offset=None)
    taus = np.array([r.tau for r in records])
    ests = np.array([r.estimate for r in records])
    extrapolated, slope, rate = _extrapolate(taus, ests)
    return GapEstimate(
        mode="boundary", x0=tuple(np.asarray(x0, float)), order=m, rho=rho,
        records=records, extrapolated=extrapolated, fit_slope=slope,
        sign_report=sign_report, observed_tau_rate=rate,
    )


def derivative_gap_estimate(
    fwd1: Forward,
    fwd2: Forward,
    x0,
    tau_grid=None,
    m: Optional[int] = None,
    rho: Optional[float] = None,
    boundary: Optional[GapEstimate] = None,
    boundary_tol: float = 0.05,
    check_sign: bool = True,
    seed: int = 0,
) -> GapEstimate:
    """Estimate of the outward normal derivative of (a1 - a2) at x0.

    Mirrors the induction: an order-0 pass recovers the boundary value first,
    the recovered term is subtracted from the pairing, and the remainder is
    normalised by the depth-weighted probe energy.  Boundary values exceeding
    boundary_tol make the subtraction ill-conditioned and are refused.  The
    probe order defaults to n - 1, large enough that the competing tau power
    is harmless at laboratory scale.
    """
    frame = fwd1.frame
    if m is None:
        m = frame.family.dim - 1
    rho = frame.eta / 4.0 if rho is None else rho
    tau_grid = frame.tau_default() if tau_grid is None else tuple(tau_grid)

    if boundary is None:
        boundary = boundary_gap_estimate(
            fwd1, fwd2, x0, tau_grid=tau_grid, m=0, rho=rho,
            check_sign=check_sign, seed=seed,
        )
    if abs(boundary.extrapolated) > boundary_tol:
        raise EstimatorRefusal(
            "refusing derivative estimate: boundary values differ by "
            f"{boundary.extrapolated:.4f} > tolerance {boundary_tol}",
            report=boundary,
        )

    raw = _pair_records(fwd1, fwd2, x0, tau_grid, m, rho, boundary_offset=None)
    # Each probing furnishes one equation Re P = g0 * n_full - dg * m_full,
    # so a regression of y = Re P / n against the depth-to-energy ratio
    # x = m / n separates the residual boundary term (intercept) from the
    # normal derivative (negative slope).  The order-0 rows of the boundary
    # pass concentrate at a different depth scale than the order-m rows and
    # are included to keep the regression well conditioned.
    rows = list(raw)
    if (boundary.records and boundary.x0 == tuple(np.asarray(x0, float))
            and boundary.rho == rho):
        rows = boundary.records + rows
    xs = np.array([r.m_full / r.n_full for r in rows])
    ys = np.array([r.pairing.real / r.n_full for r in rows])
    if len(rows) < 2 or np.ptp(xs) < 1e-3 * np.max(np.abs(xs)):
        raise NumericError(
            "probing gives no depth-scale variation; cannot separate the "
            "boundary and derivative contributions (widen the tau grid or "
            "refine the mesh)"
        )
    slope_xy, g0 = np.polyfit(xs, ys, 1)
    derivative_value = float(-slope_xy)
    records = [
        TauRecord(
            tau=r.tau,
            estimate=float(-(r.pairing.real - g0 * r.n_full) / r.m_full),
            pairing=r.pairing, n_full=r.n_full, n_ball=r.n_ball,
            m_full=r.m_full, m_ball=r.m_ball,
            trace_norm_1=r.trace_norm_1, trace_norm_2=r.trace_norm_2,
        )
        for r in raw
    ]
    taus = np.array([r.tau for r in records])
    ests = np.array([r.estimate for r in records])
    _, slope, rate = _extrapolate(taus, ests)
    return GapEstimate(
        mode="derivative", x0=tuple(np.asarray(x0, float)), order=m, rho=rho,
        records=records, extrapolated=derivative_value, fit_slope=slope,
        sign_report=boundary.sign_report, observed_tau_rate=rate,
        boundary_coupled=float(g0),
    )


def tangential_gap_derivative(
    fwd1: Forward,
    fwd2: Forward,
    x0,
    direction,
    spacing: float,
    **kwargs,
) -> float:
    """Tangential derivative of the gap by centred differences of boundary
    estimates at neighbouring anchors on the shrunken patch."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    if abs(float(d @ fwd1.frame.patch.normal)) > 1e-12:
        raise ConfigError("direction must be tangent to the patch")
    x0 = np.asarray(x0, dtype=float)
    plus = boundary_gap_estimate(fwd1, fwd2, x0 + spacing * d, **kwargs)
    minus = boundary_gap_estimate(fwd1, fwd2, x0 - spacing * d, **kwargs)
    return (plus.extrapolated - minus.extrapolated) / (2.0 * spacing)


# ---------------------------------------------------------------------------
# Lipschitz ratios and sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LipschitzRecord:
    label: str
    lhs: float
    rhs: float
    ratio: Optional[float]
    violation: bool


def _sigma_eta_grid(frame: LabFrame, per_side: int = 9) -> np.ndarray:
    es = frame.eta_sets
    u = np.linspace(es.sigma_eta_lo[0], es.sigma_eta_hi[0], per_side)
    v = np.linspace(es.sigma_eta_lo[1], es.sigma_eta_hi[1], per_side)
    uv = np.stack(np.meshgrid(u, v, indexing="ij"), axis=-1).reshape(-1, 2)
    return frame.patch.lift(uv)


def coefficient_gap_sup(frame: LabFrame, a1: ParameterField, a2: ParameterField,
                        per_side: int = 9) -> float:
    """Max over shrunken-patch quadrature nodes of the entrywise gap of A."""
    pts = _sigma_eta_grid(frame, per_side)
    t1 = np.asarray(a1.values(pts), dtype=float)
    t2 = np.asarray(a2.values(pts), dtype=float)
    fam = frame.family
    dA = (fam.real_part(pts, t1) + 1j * frame.k * fam.imag_part(pts, t1)
          - fam.real_part(pts, t2) - 1j * frame.k * fam.imag_part(pts, t2))
    return float(np.max(np.abs(dA)))


def lipschitz_ratio(fwd1: Forward, fwd2: Forward, label: str = "") -> LipschitzRecord:
    """Sup of the coefficient gap on the shrunken patch against the DtN norm."""
    frame = fwd1.frame
    lhs = coefficient_gap_sup(frame, fwd1.a, fwd2.a)
    rhs = dtn_star_norm(fwd1.dtn, fwd2.dtn)
    violation = rhs == 0.0 and lhs > 0.0
    ratio = lhs / rhs if rhs > 0.0 else None
    return LipschitzRecord(label=label, lhs=lhs, rhs=rhs, ratio=ratio,
                           violation=violation)


def lipschitz_sweep(
    frame: LabFrame,
    a1: ParameterField,
    perturbations: Sequence,
) -> list:
    """Lipschitz records for a list of (label, a2) perturbed fields."""
    fwd1 = build_forward(frame, a1)
    out = []
    for label, a2 in perturbations:
        fwd2 = build_forward(frame, a2)
        out.append(lipschitz_ratio(fwd1, fwd2, label=label))
    return out
