"""Polynomial toy model with closed-form fixed point."""
from __future__ import annotations

import math

import numpy as np

from ..errors import ContractError, DomainError
from ..flow import FlowParams
from ..seqspace import NormWeights
from .base import RgModel, audit_contract

__all__ = ["PolyToyModel", "poly_toy_model"]


class PolyToyModel(RgModel):
    """``xi_g = theta_g g^3``, ``xi_mu = -L^(2 eps) b g^2``, ``xi_R = theta_R g^3 e_1``.

    The linear map is ``multiplier * identity`` on a three-dimensional
    irrelevant sector.
    """

    name = "poly"
    dim = 3

    def __init__(self, fp, theta_g, theta_R, b, multiplier, nw):
        super().__init__(fp)
        self.theta_g = float(theta_g)
        self.theta_R = float(theta_R)
        self.b = float(b)
        self.multiplier = float(multiplier)
        self.nw = nw
        gs = fp.gbar_star
        top = 1.0 + self.A_g
        e1 = np.zeros(self.dim)
        e1[1] = 1.0
        self._e1 = e1
        # |xi| <= B gbar^p for gbar <= gbar_star, since g <= (1 + A_g) gbar
        self.B_g = max(abs(self.theta_g) * top**3 * gs ** (3.0 - (11.0 / 4.0 - nw.eta)), 1e-300)
        self.B_mu = max(fp.Le**2 * abs(self.b) * top**2, 1e-300)
        e1_norm = float(self.R_norm(e1[None, :], np.array([gs]), nw)[0])
        self.B_Rxi = max(abs(self.theta_R) * top**3 * e1_norm * gs**0.25, 1e-300)
        # contraction as seen between calibrators gbar and f(gbar)
        self.c_R = self.multiplier * max(fp.Le**2, (2.0 - fp.Le) ** -0.25)

    def xi_g(self, g, mu, R):
        g = np.asarray(g, dtype=float)
        return self.theta_g * g**3

    def xi_mu(self, g, mu, R):
        g = np.asarray(g, dtype=float)
        return -self.fp.Le**2 * self.b * g * g

    def xi_R(self, g, mu, R):
        g = np.asarray(g, dtype=float)
        return (self.theta_R * g**3)[..., None] * self._e1

    def L_diag(self, g, mu):
        return np.full((len(np.atleast_1d(g)), self.dim), self.multiplier)

    def fixed_point(self):
        fp = self.fp
        d = fp.Le - 1.0
        if self.theta_g == 0.0:
            g = fp.gbar_star
        else:
            disc = fp.c**2 - 4.0 * self.theta_g * d
            if disc < 0:
                raise DomainError("no fixed point near gbar_star")
            g = 2.0 * d / (fp.c + math.sqrt(disc))
        ga = np.array([g])
        mu = float(-self.xi_mu(ga, None, None)[0] / (fp.L ** ((3.0 + fp.eps) / 2.0) - 1.0))
        R = self.xi_R(ga, None, None)[0] / (1.0 - self.multiplier)
        return g, mu, R


def poly_toy_model(
    fp: FlowParams,
    theta_g: float | None = None,
    theta_R: float | None = None,
    use_b: bool = True,
    ks=None,
    b: float = 0.0,
    multiplier: float = 1.0 / 3.0,
    nw: NormWeights | None = None,
    audit_samples: int = 1000,
    seed: int = 0,
) -> PolyToyModel:
    """Build the toy model and audit its contract on random domain points.

    With ``theta_g`` or ``theta_R`` left as ``None`` the coefficient is set so
    that the remainder sits at half of a unit bound at ``gbar_star``.
    ``use_b`` takes the mass coefficient from the kernel set ``ks`` (built on
    demand); otherwise ``b`` is used.
    """
    nw = NormWeights.for_flow(fp) if nw is None else nw
    gs = fp.gbar_star
    top = 1.5
    if theta_g is None:
        theta_g = 0.5 * gs ** -(3.0 - (11.0 / 4.0 - nw.eta)) / top**3
    if theta_R is None:
        theta_R = 0.5 * gs**-0.25 / (top**3 * nw.h_star)
    if use_b:
        if ks is None:
            from ..kernels import build_kernels

            ks = build_kernels(fp.L, fp.eps)
        b = ks.b_coeff
    model = PolyToyModel(fp, theta_g, theta_R, b, multiplier, nw)
    if model.c_R > 0.5:
        raise ContractError(f"contraction {model.c_R:.4g} exceeds 1/2")
    if audit_samples:
        rep = audit_contract(model, nw, audit_samples, seed)
        if not rep["ok"]:
            raise ContractError("toy model violates its declared bounds", diagnostics=rep)
    return model
