"""Shared domain types: system configuration, dual points, nested solutions.

Index convention used throughout the package: ``eps[k][j]`` is the average
channel gain from BS ``j`` to users of cell ``k`` (receiver index first,
transmitter index second). Keep this orientation in mind whenever a formula
mixes ``eps[j, k]`` and ``eps[k, j]`` terms.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np


class ConfigError(ValueError):
    """Raised when a configuration violates the schema or its invariants."""


class InfeasibleError(RuntimeError):
    """The SINR targets cannot be met (dual unbounded or structural c_k <= 0).

    ``structural`` is True when infeasibility was detected from the isolated
    cell margins before any iteration ran, False when it surfaced as
    divergence of the dual iteration (interference-limited infeasibility).
    """

    def __init__(self, message: str, structural: bool = False):
        super().__init__(message)
        self.structural = structural


class DimensionExhaustedError(RuntimeError):
    """No null-space dimension left for the remaining altruistic cells."""


class ConvergenceError(RuntimeError):
    """An iteration cap was hit before reaching tolerance; carries the incumbent."""

    def __init__(self, message: str, incumbent=None):
        super().__init__(message)
        self.incumbent = incumbent


class NumericsError(RuntimeError):
    """Internal numerical failure that should be unreachable for valid inputs."""


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SystemConfig:
    """Static description of the multicell downlink.

    beta[k]     cell loading of cell k (users per BS antenna in the limit)
    eps[k][j]   average gain from BS j to users of cell k
    gamma[k]    target SINR of users in cell k
    sigma2      receiver noise power
    p_budget    per-BS transmit power cap
    """

    beta: np.ndarray
    eps: np.ndarray
    gamma: np.ndarray
    sigma2: float
    p_budget: float

    def __post_init__(self):
        beta = _frozen_array(np.atleast_1d(self.beta))
        gamma = _frozen_array(np.atleast_1d(self.gamma))
        eps = _frozen_array(np.atleast_2d(self.eps))
        L = beta.shape[0]
        if gamma.shape != (L,):
            raise ConfigError(f"gamma has shape {gamma.shape}, expected ({L},)")
        if eps.shape != (L, L):
            raise ConfigError(f"eps has shape {eps.shape}, expected ({L}, {L})")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "sigma2", float(self.sigma2))
        object.__setattr__(self, "p_budget", float(self.p_budget))

    @property
    def L(self) -> int:
        return self.beta.shape[0]

    def restrict(self, cells, beta=None) -> "SystemConfig":
        """Sub-configuration on the given cell indices (optionally new loadings)."""
        idx = np.asarray(list(cells), dtype=int)
        return SystemConfig(
            beta=self.beta[idx] if beta is None else np.asarray(beta, dtype=float),
            eps=self.eps[np.ix_(idx, idx)],
            gamma=self.gamma[idx],
            sigma2=self.sigma2,
            p_budget=self.p_budget,
        )

    def to_dict(self) -> dict:
        return {
            "L": self.L,
            "beta": self.beta.tolist(),
            "eps": self.eps.tolist(),
            "gamma": self.gamma.tolist(),
            "sigma2": self.sigma2,
            "p_budget": self.p_budget,
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    @classmethod
    def from_dict(cls, doc: dict) -> "SystemConfig":
        missing = {"L", "beta", "eps", "gamma", "sigma2", "p_budget"} - set(doc)
        if missing:
            raise ConfigError(f"config document missing keys: {sorted(missing)}")
        cfg = cls(
            beta=doc["beta"],
            eps=doc["eps"],
            gamma=doc["gamma"],
            sigma2=doc["sigma2"],
            p_budget=doc["p_budget"],
        )
        if int(doc["L"]) != cfg.L:
            raise ConfigError(f"declared L={doc['L']} but beta has {cfg.L} entries")
        return cfg

    @classmethod
    def from_json(cls, path) -> "SystemConfig":
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"config {path} must be a JSON object")
        return cls.from_dict(doc)

    def content_hash(self) -> str:
        """sha256 of the canonical JSON form, used in run manifests."""
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    violations: tuple

    def __bool__(self) -> bool:
        return self.ok


def validate_config(cfg: SystemConfig) -> ValidationResult:
    """Check all SystemConfig invariants; collects violations with field paths."""
    bad = []
    if cfg.L < 1:
        bad.append("L is zero")
    for k in range(cfg.L):
        if not (cfg.beta[k] > 0) or not math.isfinite(cfg.beta[k]):
            bad.append(f"beta[{k}] nonpositive")
        if not (cfg.gamma[k] > 0) or not math.isfinite(cfg.gamma[k]):
            bad.append(f"gamma[{k}] nonpositive")
        for j in range(cfg.L):
            if not (cfg.eps[k, j] > 0) or not math.isfinite(cfg.eps[k, j]):
                bad.append(f"eps[{k}][{j}] nonpositive")
    if not (cfg.sigma2 > 0) or not math.isfinite(cfg.sigma2):
        bad.append("sigma2 nonpositive")
    if not (cfg.p_budget > 0) or not math.isfinite(cfg.p_budget):
        bad.append("p_budget nonpositive")
    return ValidationResult(ok=not bad, violations=tuple(bad))


def require_valid(cfg: SystemConfig) -> None:
    res = validate_config(cfg)
    if not res.ok:
        raise ConfigError("invalid config: " + "; ".join(res.violations))


def cell_margin(cfg: SystemConfig) -> np.ndarray:
    """Isolated-cell feasibility margin c_k = 1 - beta_k*gamma_k/(1+gamma_k).

    c_k > 0 means cell k's target is achievable under its loading if the cell
    were isolated; c_k < 0 makes the whole problem infeasible.
    """
    return 1.0 - cfg.beta * cfg.gamma / (1.0 + cfg.gamma)


@dataclass(frozen=True)
class DualPoint:
    """Optimal (mu, lambda) of the large-system dual with the cell partition.

    ``selfish`` holds the indices with lambda_k > 0 (their BSs transmit at the
    top level); ``altruistic`` is the complement (their BSs zero-force the
    selfish cells' users and are solved recursively).
    """

    mu: np.ndarray
    lam: np.ndarray
    objective: float
    selfish: tuple
    altruistic: tuple

    def __post_init__(self):
        object.__setattr__(self, "mu", _frozen_array(self.mu))
        object.__setattr__(self, "lam", _frozen_array(self.lam))
        object.__setattr__(self, "objective", float(self.objective))
        object.__setattr__(self, "selfish", tuple(int(i) for i in self.selfish))
        object.__setattr__(self, "altruistic", tuple(int(i) for i in self.altruistic))

    @property
    def L(self) -> int:
        return self.mu.shape[0]

    def to_dict(self) -> dict:
        return {
            "mu": self.mu.tolist(),
            "lambda": self.lam.tolist(),
            "objective": self.objective,
            "selfish": list(self.selfish),
            "altruistic": list(self.altruistic),
        }


@dataclass(frozen=True)
class Level:
    """One stage of the nested zero-forcing recursion.

    ``cells`` are global cell indices active at this level, ``selfish`` the
    subset that transmits here. Arrays aligned with ``cells`` unless noted:
    ``bs_power``/``per_user_power`` align with ``selfish``.
    """

    cells: tuple
    selfish: tuple
    dual: DualPoint
    bs_power: np.ndarray
    per_user_power: np.ndarray
    noise: np.ndarray
    eff_beta: np.ndarray
    eff_dim_fraction: float

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(int(i) for i in self.cells))
        object.__setattr__(self, "selfish", tuple(int(i) for i in self.selfish))
        object.__setattr__(self, "bs_power", _frozen_array(self.bs_power))
        object.__setattr__(self, "per_user_power", _frozen_array(self.per_user_power))
        object.__setattr__(self, "noise", _frozen_array(self.noise))
        object.__setattr__(self, "eff_beta", _frozen_array(self.eff_beta))
        object.__setattr__(self, "eff_dim_fraction", float(self.eff_dim_fraction))

    def to_dict(self) -> dict:
        return {
            "cells": list(self.cells),
            "selfish": list(self.selfish),
            "dual": self.dual.to_dict(),
            "bs_power": self.bs_power.tolist(),
            "per_user_power": self.per_user_power.tolist(),
            "noise": self.noise.tolist(),
            "eff_beta": self.eff_beta.tolist(),
            "eff_dim_fraction": self.eff_dim_fraction,
        }


@dataclass(frozen=True)
class NestedSolution:
    """Full recursive solution: one Level per recursion stage plus phi."""

    levels: tuple
    phi: float

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        object.__setattr__(self, "phi", float(self.phi))

    def bs_power_by_cell(self) -> dict:
        """Map global cell index -> transmit power of its BS (from its level)."""
        out = {}
        for lev in self.levels:
            for i, k in enumerate(lev.selfish):
                out[k] = float(lev.bs_power[i])
        return out

    def per_user_power_by_cell(self) -> dict:
        out = {}
        for lev in self.levels:
            for i, k in enumerate(lev.selfish):
                out[k] = float(lev.per_user_power[i])
        return out

    def level_of_cell(self, k: int) -> int:
        for n, lev in enumerate(self.levels):
            if k in lev.selfish:
                return n
        raise KeyError(f"cell {k} not selfish at any level")

    def to_dict(self) -> dict:
        return {
            "levels": [lev.to_dict() for lev in self.levels],
            "phi": self.phi,
        }


@dataclass(frozen=True)
class KktReport:
    """Residuals of the dual optimality system plus per-condition pass flags.

    ``x`` holds the multipliers of the mu >= 0 constraints; altruistic BSs do
    not transmit in the top-level problem so their entry is z - 0 = z.
    """

    z: float
    x: np.ndarray
    residual_lambda: float
    residual_mu_sum: float
    complementary_slackness: float
    pass_x_nonnegative: bool
    pass_complementary_slackness: bool
    pass_lambda_fixed_point: bool
    pass_mu_sum: bool

    def __post_init__(self):
        object.__setattr__(self, "x", _frozen_array(self.x))

    @property
    def passed(self) -> bool:
        return (
            self.pass_x_nonnegative
            and self.pass_complementary_slackness
            and self.pass_lambda_fixed_point
            and self.pass_mu_sum
        )

    def to_dict(self) -> dict:
        return {
            "z": self.z,
            "x": self.x.tolist(),
            "residual_lambda": self.residual_lambda,
            "residual_mu_sum": self.residual_mu_sum,
            "complementary_slackness": self.complementary_slackness,
            "pass_x_nonnegative": self.pass_x_nonnegative,
            "pass_complementary_slackness": self.pass_complementary_slackness,
            "pass_lambda_fixed_point": self.pass_lambda_fixed_point,
            "pass_mu_sum": self.pass_mu_sum,
            "passed": self.passed,
        }
