"""Closed-form solution of the two-cell problem.

Everything reduces to one parameter rho = lam_2/lam_1 constrained to
[rho_lo, rho_hi]; the sign pattern of g1 - g2 (g1 strictly decreasing, g2
strictly increasing) places the optimum at a boundary or at their
intersection. rho = inf means cell 1 zero-forces cell 2's users; rho = 0 the
reverse.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .model_core import (DualPoint, InfeasibleError, NumericsError, SystemConfig,
                         cell_margin, require_valid)
from . import power_alloc


class TwoCellCase(enum.Enum):
    ZF_CELL1 = "ZfCell1"        # rho* = inf, cell 1 zero-forces cell 2's users
    ZF_CELL2 = "ZfCell2"        # rho* = 0, cell 2 zero-forces cell 1's users
    BOUNDARY_LO = "Boundary_lo"  # rho* = rho_lo > 0 (mu_2 pinned at 0)
    BOUNDARY_HI = "Boundary_hi"  # rho* = rho_hi < inf (mu_1 pinned at 0)
    INTERIOR = "Interior"        # g1(rho*) = g2(rho*)


@dataclass(frozen=True)
class Feasibility:
    bounded: bool
    marginal: bool   # FeasibilityCBf held with equality; numerics may be delicate
    reason: str

    def __bool__(self) -> bool:
        return self.bounded


def _require_two_cells(cfg: SystemConfig) -> None:
    if cfg.L != 2:
        raise ValueError(f"two-cell routine called with L={cfg.L}")


def feasibility_two_cell(cfg: SystemConfig) -> Feasibility:
    """Boundedness of the two-cell dual.

    Unbounded if either isolated margin c_k <= 0. Bounded outright when either
    cell is underloaded enough to zero-force the other (c_1 >= beta_2 or
    c_2 >= beta_1); otherwise bounded iff the cross-gain inequality
    e11 c1 e22 c2/(g1 g2) >= e12 e21 (b1-c2)(b2-c1) holds (equality is
    reported bounded-but-marginal).
    """
    _require_two_cells(cfg)
    require_valid(cfg)
    c = cell_margin(cfg)
    for k in range(2):
        if c[k] <= 0:
            return Feasibility(False, False, f"c[{k}] = {c[k]:.6g} <= 0")
    b1, b2 = cfg.beta
    g1, g2 = cfg.gamma
    e = cfg.eps
    if c[0] - b2 >= 0 or c[1] - b1 >= 0:
        return Feasibility(True, False, "a cell can zero-force irrespective of gains")
    lhs = e[0, 0] * c[0] * e[1, 1] * c[1] / (g1 * g2)
    rhs = e[0, 1] * e[1, 0] * (b1 - c[1]) * (b2 - c[0])
    if lhs > rhs:
        return Feasibility(True, False, "cross-gain inequality holds strictly")
    if lhs == rhs:
        return Feasibility(True, True, "cross-gain inequality holds with equality")
    return Feasibility(False, False,
                       f"cross-gain inequality fails ({lhs:.6g} < {rhs:.6g})")


@dataclass(frozen=True)
class TwoCellCurves:
    """rho interval and the three curves h, g1, g2 (callables in rho).

    rho_hi may be math.inf; g1/g2 evaluate their analytic limits at 0 and inf
    so the case tests never overflow.
    """

    rho_lo: float
    rho_hi: float
    cfg: SystemConfig

    def h(self, rho: float) -> float:
        b1, b2 = self.cfg.beta
        g1, g2 = self.cfg.gamma
        e = self.cfg.eps
        c = cell_margin(self.cfg)
        if math.isinf(rho):
            raise ValueError("h diverges linearly; evaluate objective limits instead")
        return (e[0, 0] * (c[0] / g1 - b2 * e[1, 0] * rho / (e[0, 0] + rho * e[1, 0] * g1))
                + rho * e[1, 1] * (c[1] / g2 - b1 * e[0, 1] / (e[1, 1] * rho + e[0, 1] * g2)))

    def g1(self, rho: float) -> float:
        b1, b2 = self.cfg.beta
        g1, g2 = self.cfg.gamma
        e = self.cfg.eps
        c = cell_margin(self.cfg)
        if math.isinf(rho):
            return e[0, 0] * (c[0] - b2) / (b1 * g1) - e[0, 1]
        # rho-multiplied form of the defining expression, exact at rho = 0
        return (e[0, 0] * c[0] / (b1 * g1)
                - (b2 / b1) * e[0, 0] * e[1, 0] ** 2 * g1 * rho ** 2
                / (e[0, 0] + rho * e[1, 0] * g1) ** 2
                - e[1, 1] ** 2 * e[0, 1] * rho ** 2 / (e[1, 1] * rho + e[0, 1] * g2) ** 2)

    def g2(self, rho: float) -> float:
        b1, b2 = self.cfg.beta
        g1, g2 = self.cfg.gamma
        e = self.cfg.eps
        c = cell_margin(self.cfg)
        if math.isinf(rho):
            return e[1, 1] * c[1] / (b2 * g2)
        return (e[1, 1] * c[1] / (b2 * g2)
                - (b1 / b2) * e[1, 1] * e[0, 1] ** 2 * g2 / (e[1, 1] * rho + e[0, 1] * g2) ** 2
                - e[0, 0] ** 2 * e[1, 0] / (e[0, 0] + rho * e[1, 0] * g1) ** 2)

    def objective(self, rho: float) -> float:
        """Dual objective along the curve, sigma2 * 2(beta_1 + rho beta_2)/h(rho)."""
        b1, b2 = self.cfg.beta
        e = self.cfg.eps
        c = cell_margin(self.cfg)
        if math.isinf(rho):
            return self.cfg.sigma2 * 2.0 * b2 * self.cfg.gamma[1] / (e[1, 1] * c[1])
        return self.cfg.sigma2 * 2.0 * (b1 + rho * b2) / self.h(rho)

    def sample_rows(self, n: int):
        """(rho, g1, g2, h) rows on a grid covering the feasible interval."""
        lo = self.rho_lo
        hi = self.rho_hi
        if math.isinf(hi):
            hi = max(10.0 * (lo + 1.0), 100.0)
        grid = np.linspace(lo, hi, n)
        return [(float(r), self.g1(float(r)), self.g2(float(r)), self.h(float(r)))
                for r in grid]


def two_cell_curves(cfg: SystemConfig) -> TwoCellCurves:
    """Exact interval ends rho_lo/rho_hi plus the h, g1, g2 closures."""
    _require_two_cells(cfg)
    feas = feasibility_two_cell(cfg)
    if not feas.bounded:
        raise InfeasibleError(f"two-cell dual unbounded: {feas.reason}",
                              structural=True)
    c = cell_margin(cfg)
    b1, b2 = cfg.beta
    g1, g2 = cfg.gamma
    e = cfg.eps
    rho_lo = 0.0 if c[1] - b1 >= 0 else e[0, 1] * g2 * (b1 - c[1]) / (e[1, 1] * c[1])
    rho_hi = math.inf if c[0] - b2 >= 0 else e[0, 0] * c[0] / (g1 * e[1, 0] * (b2 - c[0]))
    return TwoCellCurves(rho_lo=float(rho_lo), rho_hi=float(rho_hi), cfg=cfg)


@dataclass(frozen=True)
class ZfLevel:
    """Reduced single-cell solve behind a zero-forcing branch."""

    lambda_bar: float
    mu_bar: float
    sigma2_alt: float
    p: float      # per-user power scale of the altruistic cell
    P: float      # its BS power

    def to_dict(self) -> dict:
        return {"lambda_bar": self.lambda_bar, "mu_bar": self.mu_bar,
                "sigma2_alt": self.sigma2_alt, "p": self.p, "P": self.P}


@dataclass(frozen=True)
class TwoCellSolution:
    case_tag: TwoCellCase
    rho_star: float               # math.inf on the ZF_CELL1 branch
    lam: np.ndarray
    mu: np.ndarray
    P: np.ndarray                 # both BS powers, index = cell
    level2: ZfLevel | None
    marginal: bool

    @property
    def phi_numerator(self) -> float:
        return float(np.max(self.P))

    def to_dict(self) -> dict:
        return {
            "case_tag": self.case_tag.value,
            "rho_star": None if math.isinf(self.rho_star) else self.rho_star,
            "lambda": self.lam.tolist(),
            "mu": self.mu.tolist(),
            "P": self.P.tolist(),
            "level2": self.level2.to_dict() if self.level2 else None,
            "marginal": self.marginal,
        }


def _zf_reduced_level(cfg: SystemConfig, zf_cell: int, p_sel: float) -> ZfLevel:
    """Reduced isolated-cell solve for the zero-forcing cell.

    The serving cell keeps target gamma but its loading is inflated to
    beta/(1 - beta_other); its users see noise sigma2 + P_other * cross gain.
    """
    other = 1 - zf_cell
    if cfg.beta[other] >= 1.0:
        raise InfeasibleError(
            "selfish cell's loading leaves no null-space dimension", structural=True)
    beta_eff = cfg.beta[zf_cell] / (1.0 - cfg.beta[other])
    gam = cfg.gamma[zf_cell]
    margin = 1.0 / gam - beta_eff / (1.0 + gam)
    if margin <= 0:
        raise InfeasibleError(
            "reduced problem of the zero-forcing cell is infeasible "
            f"(effective loading {beta_eff:.6g})", structural=True)
    sigma2_alt = cfg.sigma2 + p_sel * cfg.eps[zf_cell, other]
    lambda_bar = 1.0 / (cfg.eps[zf_cell, zf_cell] * margin)
    p = lambda_bar * sigma2_alt
    return ZfLevel(lambda_bar=float(lambda_bar), mu_bar=1.0,
                   sigma2_alt=float(sigma2_alt), p=float(p),
                   P=float(beta_eff * p))


def solve_two_cell(cfg: SystemConfig) -> TwoCellSolution:
    """Classify rho* and assemble (lambda*, mu*, powers) in closed form."""
    curves = two_cell_curves(cfg)
    feas = feasibility_two_cell(cfg)
    c = cell_margin(cfg)
    b1, b2 = cfg.beta
    e = cfg.eps
    sigma2 = cfg.sigma2

    d_lo = curves.g1(curves.rho_lo) - curves.g2(curves.rho_lo)
    d_hi = curves.g1(curves.rho_hi) - curves.g2(curves.rho_hi)

    interior = False
    if d_lo <= 0:
        rho_star = curves.rho_lo
    elif d_hi >= 0:
        rho_star = curves.rho_hi
    else:
        interior = True
        rho_star = _bisect_intersection(curves)

    if math.isinf(rho_star):
        case = TwoCellCase.ZF_CELL1
        lam = np.array([0.0, 2.0 * cfg.gamma[1] / (e[1, 1] * c[1])])
        mu = np.array([0.0, 2.0])
    else:
        h_star = curves.h(rho_star)
        if h_star <= 0:
            raise NumericsError(f"h(rho*) = {h_star:.6g} nonpositive at rho*={rho_star:.6g}")
        lam = np.array([2.0 / h_star, 2.0 * rho_star / h_star])
        mu1 = e[0, 0] * lam[0] * (c[0] / cfg.gamma[0]
                                  - b2 * e[1, 0] * lam[1] / (e[0, 0] * lam[0] + e[1, 0] * lam[1] * cfg.gamma[0]))
        mu = np.array([mu1, 2.0 - mu1])
        if rho_star == 0.0:
            case = TwoCellCase.ZF_CELL2
        elif interior:
            case = TwoCellCase.INTERIOR
        elif rho_star == curves.rho_lo:
            case = TwoCellCase.BOUNDARY_LO
        else:
            case = TwoCellCase.BOUNDARY_HI

    level2 = None
    P = np.empty(2)
    if case is TwoCellCase.ZF_CELL1:
        P[1] = sigma2 * b2 * cfg.gamma[1] / (e[1, 1] * c[1])
        level2 = _zf_reduced_level(cfg, zf_cell=0, p_sel=P[1])
        P[0] = level2.P
    elif case is TwoCellCase.ZF_CELL2:
        P[0] = sigma2 * b1 * cfg.gamma[0] / (e[0, 0] * c[0])
        level2 = _zf_reduced_level(cfg, zf_cell=1, p_sel=P[0])
        P[1] = level2.P
    elif case is TwoCellCase.INTERIOR:
        P[:] = sigma2 * (b1 + rho_star * b2) / curves.h(rho_star)
    else:
        dual = DualPoint(mu=np.maximum(mu, 0.0), lam=lam,
                         objective=float(sigma2 * np.dot(cfg.beta, lam)),
                         selfish=(0, 1), altruistic=())
        P[:] = power_alloc.solve_bs_powers(cfg, dual)

    return TwoCellSolution(case_tag=case, rho_star=float(rho_star), lam=lam,
                           mu=np.maximum(mu, 0.0), P=P, level2=level2,
                           marginal=feas.marginal)


def _bisect_intersection(curves: TwoCellCurves) -> float:
    """Root of the strictly decreasing g1 - g2 on (rho_lo, rho_hi)."""
    lo = curves.rho_lo
    hi = curves.rho_hi
    if math.isinf(hi):
        hi = max(1.0, 2.0 * lo if lo > 0 else 1.0)
        for _ in range(200):
            if curves.g1(hi) - curves.g2(hi) < 0:
                break
            hi *= 2.0
        else:
            raise NumericsError("no finite bracket for the g1 = g2 intersection")
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        if curves.g1(mid) - curves.g2(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * (1.0 + mid):
            break
    return 0.5 * (lo + hi)


def zf_optimality_check(cfg: SystemConfig, k: int) -> bool:
    """Evaluate the zero-forcing optimality inequality at cell index k.

    Returns True when  e_kk c_k/(b_k g_k) - e_oo (c_o - b_k)/(b_o g_o) + e_ok <= 0
    with o the other cell. Empirically the inequality at k holds exactly when
    the solution zero-forces the *other* cell (ZF_CELL1 corresponds to k = 1
    here, i.e. the second cell's index); see the tests for the mapping.
    """
    _require_two_cells(cfg)
    if k not in (0, 1):
        raise ValueError("k must be 0 or 1")
    o = 1 - k
    c = cell_margin(cfg)
    e = cfg.eps
    val = (e[k, k] * c[k] / (cfg.beta[k] * cfg.gamma[k])
           - e[o, o] * (c[o] - cfg.beta[k]) / (cfg.beta[o] * cfg.gamma[o])
           + e[o, k])
    return bool(val <= 0)
