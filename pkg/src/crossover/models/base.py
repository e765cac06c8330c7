"""The model contract consumed by the sequence-space solver."""
from __future__ import annotations

import numpy as np

from ..flow import FlowParams
from ..seqspace import NormWeights, calibrated_R_norm

__all__ = ["RgModel", "NullModel", "null_model", "audit_contract"]


class RgModel:
    """One RG step written as logistic flow plus remainders.

    Subclasses provide the remainders ``xi_g``, ``xi_mu``, ``xi_R`` and the
    linear map on the irrelevant sector. All methods are vectorized over a
    leading index: ``g`` and ``mu`` have shape ``(N,)`` and ``R`` has shape
    ``(N, dim)``.
    """

    dim: int = 3
    A_g: float = 0.5
    A_mu: float = 1.0
    A_R: float = 1.0
    B_g: float = 0.0
    B_mu: float = 0.0
    B_Rxi: float = 0.0
    c_R: float = 0.5
    R_index = None
    name = "abstract"
    #: preferred ball radius for orbit runs, ``None`` for the solver default
    beta_hint = None
    #: norm weights the model was built and audited with, if any
    nw = None
    #: convergence tolerance the model's arithmetic supports
    tol_hint = 1e-10

    def orbit_window(self):
        """Window used for orbit runs when none is given."""
        from ..flow import default_window

        return default_window(self.fp)

    def __init__(self, fp: FlowParams):
        self.fp = fp

    def xi_g(self, g, mu, R):
        raise NotImplementedError

    def xi_mu(self, g, mu, R):
        raise NotImplementedError

    def xi_R(self, g, mu, R):
        raise NotImplementedError

    def remainders(self, g, mu, R):
        """``(xi_g, xi_mu, xi_R)`` in one call."""
        return self.xi_g(g, mu, R), self.xi_mu(g, mu, R), self.xi_R(g, mu, R)

    def L_diag(self, g, mu):
        """Diagonal of the linear map, or ``None`` if it is not diagonal."""
        return None

    def apply_L(self, g, mu, R):
        diag = self.L_diag(g, mu)
        if diag is None:
            raise NotImplementedError
        return np.asarray(diag) * np.asarray(R)

    def R_norm(self, R, gbar, nw: NormWeights):
        return calibrated_R_norm(R, gbar, nw, self.R_index)

    def full_step(self, g, mu, R):
        """Evaluate the complete recursion once."""
        fp = self.fp
        g = np.asarray(g, dtype=float)
        mu = np.asarray(mu, dtype=float)
        R = np.asarray(R, dtype=float)
        g1 = fp.Le * g - fp.c * g * g + self.xi_g(g, mu, R)
        mu1 = fp.L ** ((3.0 + fp.eps) / 2.0) * mu + self.xi_mu(g, mu, R)
        R1 = self.apply_L(g, mu, R) + self.xi_R(g, mu, R)
        return g1, mu1, R1

    def fixed_point(self):
        """Nontrivial fixed point ``(g*, mu*, R*)`` when known in closed form."""
        return None

    def constants(self) -> dict:
        return {
            "A_g": self.A_g,
            "A_mu": self.A_mu,
            "A_R": self.A_R,
            "B_g": self.B_g,
            "B_mu": self.B_mu,
            "B_Rxi": self.B_Rxi,
            "c_R": self.c_R,
        }


class NullModel(RgModel):
    """All remainders vanish; the approximate orbit is exact."""

    name = "null"

    def __init__(self, fp: FlowParams, dim: int = 3, c_R: float = 0.5):
        super().__init__(fp)
        self.dim = dim
        self.c_R = c_R

    def xi_g(self, g, mu, R):
        return np.zeros_like(np.asarray(g, dtype=float))

    def xi_mu(self, g, mu, R):
        return np.zeros_like(np.asarray(g, dtype=float))

    def xi_R(self, g, mu, R):
        return np.zeros_like(np.asarray(R, dtype=float))

    def L_diag(self, g, mu):
        return np.full((len(np.atleast_1d(g)), self.dim), self.c_R)

    def fixed_point(self):
        return self.fp.gbar_star, 0.0, np.zeros(self.dim)


def null_model(fp: FlowParams, dim: int = 3, c_R: float = 0.5) -> NullModel:
    return NullModel(fp, dim, c_R)


def _sample_domain(model, fp, nw, n, rng):
    gbar = fp.gbar_star * rng.uniform(0.0, 1.0, n) ** 4
    gbar = np.maximum(gbar, fp.gbar_star * 1e-6)
    g = gbar * (1.0 + model.A_g * rng.uniform(-1.0, 1.0, n) * 0.999)
    mu = model.A_mu * gbar ** nw.mu_exp * rng.uniform(-1.0, 1.0, n) * 0.999
    R = rng.normal(size=(n, model.dim))
    norms = model.R_norm(R, gbar, nw)
    R *= (model.A_R * gbar ** nw.R_exp * rng.uniform(0.0, 0.999, n) / norms)[:, None]
    return gbar, g, mu, R


def _diag_ratio_bound(diag, gbar, gnext, nw, index):
    """Operator-norm bound of ``R -> diag * R`` from the norm at ``gbar`` to the norm at ``gnext``.

    Both norms are maxima of two weighted l1 norms, so the ratio is at most
    ``max_out min_in max_k |diag_k| w_out,k / w_in,k``.
    """
    d = np.abs(np.asarray(diag, dtype=float))
    j = np.arange(d.shape[-1]) if index is None else np.asarray(index)
    flat = nw.h_star ** j

    def large(gb):
        return gb[:, None] ** 2 * (nw.c_norm * gb[:, None] ** -0.25) ** j

    outs = (flat[None, :], large(gnext))
    ins = (flat[None, :], large(gbar))
    per_out = [np.minimum(*(np.max(d * w_o / w_i, axis=1) for w_i in ins)) for w_o in outs]
    return np.maximum(*per_out)


def audit_contract(model: RgModel, nw: NormWeights, n_samples: int = 1000, seed: int = 0) -> dict:
    """Check the declared remainder bounds and contraction on random domain points.

    Returns the worst observed ratio of each quantity to its declared bound
    (a ratio ``<= 1`` means the bound holds) and an overall ``ok`` flag.
    """
    fp = model.fp
    rng = np.random.default_rng(seed)
    gbar, g, mu, R = _sample_domain(model, fp, nw, n_samples, rng)

    def ratio(val, bound):
        val = np.abs(val)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(bound > 0, val / bound, np.where(val > 0, np.inf, 0.0))
        return float(np.max(r))

    out = {
        "xi_g": ratio(model.xi_g(g, mu, R), model.B_g * gbar ** (11.0 / 4.0 - nw.eta)),
        "xi_mu": ratio(model.xi_mu(g, mu, R), model.B_mu * gbar**2),
        "xi_R": ratio(model.R_norm(model.xi_R(g, mu, R), gbar, nw), model.B_Rxi * gbar**2.75),
    }
    probe = rng.normal(size=(n_samples, model.dim))
    gnext = np.minimum(fp.Le * gbar - fp.c * gbar * gbar, fp.gbar_star)
    lin = model.R_norm(model.apply_L(g, mu, probe), gnext, nw) / model.R_norm(probe, gbar, nw)
    worst = float(np.max(lin))
    diag = model.L_diag(g, mu)
    if diag is not None and type(model).R_norm is RgModel.R_norm:
        # random directions underestimate the operator norm; use the exact bound
        worst = max(worst, float(np.max(_diag_ratio_bound(diag, gbar, gnext, nw, model.R_index))))
    out["c_R_measured"] = worst
    out["c_R"] = worst / model.c_R
    out["ok"] = bool(all(out[k] <= 1.0 for k in ("xi_g", "xi_mu", "xi_R", "c_R")))
    out["samples"] = int(n_samples)
    out["seed"] = int(seed)
    return out
