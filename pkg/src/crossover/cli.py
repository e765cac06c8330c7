"""Command-line front end.

Subcommands: ``kernels``, ``flow``, ``bounds``, ``orbit``, ``oracle``,
``audit``. Tables are written as CSV (12 significant digits) or JSON
(17 significant digits) to ``--output``, to ``$CROSSOVER_OUTPUT_DIR/<sub>.<fmt>``
when that variable is set, or to standard output.

Exit status is 0 on success, 2 for invalid arguments and 1 for numerical or
domain errors; failures print a JSON error object on standard error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from .errors import CrossoverError, UsageError

OUTPUT_DIR_ENV = "CROSSOVER_OUTPUT_DIR"
SUBCOMMANDS = ("kernels", "flow", "bounds", "orbit", "oracle", "audit")

# exponent pairs (gamma, nu) tabulated by ``bounds``
SIGMA_PAIRS = ((1.5, 3.0), (1.5, 11 / 4 - 3 / 16), (1.0, 2.0), (1.0, 11 / 4 - 3 / 16), (2 - 1 / 6, 2.0), (11 / 4 - 3 / 16, 11 / 4))


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    L: int = 2
    eps: float = 0.1
    omega0: float = 0.3
    model: str = "null"
    window: tuple | None = None
    tol: float | None = None
    max_iter: int = 200
    output: str | None = None
    format: str = "csv"
    seed: int = 0
    nu: float = 2.7
    samples: int = 1000

    def validate(self):
        if self.subcommand not in SUBCOMMANDS:
            raise UsageError(f"unknown subcommand {self.subcommand!r}")
        if self.L < 2:
            raise UsageError(f"--L must be an integer >= 2, got {self.L}")
        if self.subcommand != "oracle" and not (0.0 < self.eps < math.log(2.0) / math.log(self.L)):
            raise UsageError(f"--eps must lie in (0, log 2 / log L), got {self.eps}")
        if self.subcommand in ("flow", "bounds", "orbit") and not (0.0 < self.omega0 < 0.5):
            raise UsageError(f"--omega0 must lie in (0, 1/2), got {self.omega0}")
        if (self.tol is not None and self.tol <= 0) or self.max_iter < 1:
            raise UsageError("--tol must be positive and --max-iter at least 1")
        if self.samples < 1:
            raise UsageError("--samples must be positive")


# ---------------------------------------------------------------- formatting


def _num(x, digits):
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, f".{digits}g")


def to_json(obj, digits: int = 17) -> str:
    """JSON text with every float written to ``digits`` significant digits."""

    def enc(o):
        if isinstance(o, bool) or o is None:
            return json.dumps(o)
        if isinstance(o, (int, np.integer)):
            return str(int(o))
        if isinstance(o, (float, np.floating)):
            return _num(o, digits)
        if isinstance(o, str):
            return json.dumps(o)
        if isinstance(o, dict):
            return "{" + ", ".join(f"{json.dumps(str(k))}: {enc(v)}" for k, v in o.items()) + "}"
        if isinstance(o, np.ndarray):
            return enc(o.tolist())
        if isinstance(o, (list, tuple)):
            return "[" + ", ".join(enc(v) for v in o) + "]"
        raise TypeError(f"cannot serialize {type(o).__name__}")

    return enc(obj) + "\n"


def to_csv(columns, rows, digits: int = 12) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_num(v, digits) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


@dataclass
class Result:
    """A table plus optional metadata. JSON output carries both."""

    columns: list
    rows: list
    meta: dict

    def render(self, fmt: str) -> str:
        if fmt == "csv":
            return to_csv(self.columns, self.rows)
        return to_json({**self.meta, "columns": self.columns, "rows": [list(r) for r in self.rows]})


# ---------------------------------------------------------------- commands


def _flow_params(cfg):
    from .flow import FlowParams
    from .kernels import build_kernels

    ks = build_kernels(cfg.L, cfg.eps)
    return FlowParams(cfg.L, cfg.eps, ks.a_coeff), ks


def _build_model(cfg, audit_samples=None):
    from .models import hier_model, null_model, poly_toy_model

    n = cfg.samples if audit_samples is None else audit_samples
    if cfg.model == "hier":
        return hier_model(cfg.L, cfg.eps, audit_samples=n, seed=cfg.seed)
    fp, ks = _flow_params(cfg)
    if cfg.model == "null":
        return null_model(fp)
    if cfg.model == "toy":
        return poly_toy_model(fp, ks=ks, audit_samples=n, seed=cfg.seed)
    raise UsageError(f"unknown model {cfg.model!r}")


def cmd_kernels(cfg) -> Result:
    from .kernels import build_kernels

    ks = build_kernels(cfg.L, cfg.eps)
    meta = {
        "L": ks.L,
        "eps": ks.eps,
        "phi_dim": ks.phi,
        "kappa": ks.kappa,
        "lambda": ks.lam,
        "C0": ks.C0,
        "a": ks.a_coeff,
        "b": ks.b_coeff,
    }
    radii = [0.25, 0.5, 1.0, 2.0, 4.0]
    rows = [(r, float(ks.C(r)), float(ks.Gamma(r)), float(ks.C_tilde(r))) for r in radii]
    return Result(["r", "C", "Gamma", "C_tilde"], rows, meta)


def cmd_flow(cfg) -> Result:
    from .flow import build_gbar, default_window, step_bounds

    fp, _ = _flow_params(cfg)
    gs = build_gbar(cfg.omega0, cfg.window or default_window(fp), fp)
    rows = []
    for n, g in zip(gs.ns, gs.values):
        lo, hi = step_bounds(int(n), gs)
        rows.append((int(n), float(g), float(lo), float(hi)))
    meta = {"L": fp.L, "eps": fp.eps, "a": fp.a, "gbar_star": fp.gbar_star, "omega0": cfg.omega0, "window": list(gs.window)}
    return Result(["n", "gbar_n", "lower", "upper"], rows, meta)


def cmd_bounds(cfg) -> Result:
    from .bounds import SIGMA_KINDS, SigmaSpec, bar_sigma, sigma_value
    from .errors import PreconditionError, TruncationError
    from .flow import build_gbar, default_window

    fp, _ = _flow_params(cfg)
    gs = build_gbar(cfg.omega0, cfg.window or default_window(fp), fp)
    rows = []
    for which in SIGMA_KINDS:
        for gamma, nu in SIGMA_PAIRS:
            spec = SigmaSpec(which, gamma, nu)
            try:
                bound = bar_sigma(spec, fp, cfg.omega0)
            except PreconditionError:
                bound = math.nan
            try:
                value, tail = sigma_value(spec, gs, fp)
            except TruncationError:
                value, tail = math.nan, math.inf
            if math.isnan(bound) or math.isnan(value):
                status = "n/a"
            else:
                status = "holds" if value + tail <= bound else "fails"
            rows.append((which, gamma, nu, value, tail, bound, status))
    meta = {"L": fp.L, "eps": fp.eps, "omega0": cfg.omega0, "window": list(gs.window)}
    return Result(["which", "gamma", "nu", "value", "tail", "bar_sigma", "status"], rows, meta)


def cmd_orbit(cfg) -> Result:
    from .seqspace import solve_orbit

    model = _build_model(cfg)
    res = solve_orbit(model, cfg.omega0, window=cfg.window, tol=cfg.tol, max_iter=cfg.max_iter)
    gs, ds = res.gbar, res.deviation
    Rn = model.R_norm(ds.R, gs.values, res.weights)
    defects = res.defects(model).max(axis=1)
    resid = np.append(defects, 0.0)
    rows = [
        (int(n), float(gb), float(g), float(mu), float(r), float(e))
        for n, gb, g, mu, r, e in zip(gs.ns, gs.values, res.g, ds.mu, Rn, resid)
    ]
    meta = {
        "model": model.name,
        "L": model.fp.L,
        "eps": model.fp.eps,
        "a": model.fp.a,
        "omega0": cfg.omega0,
        "window": list(gs.window),
        "report": res.report.to_dict(),
    }
    return Result(["n", "gbar_n", "g_n", "mu_n", "R_norm_n", "residual_n"], rows, meta)


def cmd_oracle(cfg) -> Result:
    from .models.oracle import ToyFlowParams, compare_orbit

    rep = compare_orbit(ToyFlowParams.from_nu(cfg.nu))
    rows = [
        (s, e, o, abs(e - o) / abs(o)) for s, e, o in zip(rep["s"], rep["closed_form"], rep["rk4"])
    ]
    meta = {"nu": cfg.nu, "max_rel_discrepancy": rep["max_rel_discrepancy"]}
    return Result(["s", "closed_form", "rk4", "rel_discrepancy"], rows, meta)


def cmd_audit(cfg) -> Result:
    from .models import audit_contract

    if cfg.model == "hier":
        # bounds are measured: calibrate on one sample set, audit on another
        from .models import hier_model

        model = hier_model(cfg.L, cfg.eps, audit_samples=cfg.samples, seed=cfg.seed + 1)
    else:
        model = _build_model(cfg, audit_samples=0)
    nw = model.nw
    if nw is None:
        from .seqspace import NormWeights

        nw = NormWeights.for_flow(model.fp)
    rep = audit_contract(model, nw, cfg.samples, cfg.seed)
    rows = [(k, float(rep[k])) for k in ("xi_g", "xi_mu", "xi_R", "c_R", "c_R_measured")]
    meta = {"model": model.name, "L": model.fp.L, "eps": model.fp.eps, "constants": model.constants(), **rep}
    return Result(["quantity", "worst_ratio"], rows, meta)


COMMANDS = {
    "kernels": cmd_kernels,
    "flow": cmd_flow,
    "bounds": cmd_bounds,
    "orbit": cmd_orbit,
    "oracle": cmd_oracle,
    "audit": cmd_audit,
}


# ---------------------------------------------------------------- entry points


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _window(text):
    parts = text.split(",")
    try:
        vals = [int(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must be N or N_MINUS,N_PLUS, got {text!r}") from None
    if len(vals) == 1:
        vals = vals * 2
    if len(vals) != 2 or min(vals) < 1:
        raise argparse.ArgumentTypeError(f"window must be N or N_MINUS,N_PLUS with positive entries, got {text!r}")
    return tuple(vals)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="crossover", description="Crossover orbit computations.")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--L", type=int, default=2)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--omega0", type=float, default=0.3)
    p.add_argument("--model", choices=("null", "toy", "hier"), default="null")
    p.add_argument("--window", type=_window, default=None, help="N or N_MINUS,N_PLUS")
    p.add_argument("--tol", type=float, default=None, help="solver tolerance (default: model's own)")
    p.add_argument("--max-iter", dest="max_iter", type=int, default=200)
    p.add_argument("--output", default=None)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--nu", type=float, default=2.7)
    p.add_argument("--samples", type=int, default=1000)
    return p


def parse_config(argv) -> RunConfig:
    ns = build_parser().parse_args(argv)
    cfg = RunConfig(**vars(ns))
    cfg.validate()
    return cfg


def _destination(cfg):
    if cfg.output:
        return cfg.output
    d = os.environ.get(OUTPUT_DIR_ENV)
    if d:
        return os.path.join(d, f"{cfg.subcommand}.{cfg.format}")
    return None


def run(cfg: RunConfig, stdout=None) -> int:
    cfg.validate()
    text = COMMANDS[cfg.subcommand](cfg).render(cfg.format)
    dest = _destination(cfg)
    if dest is None:
        (stdout or sys.stdout).write(text)
    else:
        os.makedirs(os.path.dirname(os.path.abspath(dest)), exist_ok=True)
        with open(dest, "w", newline="") as fh:
            fh.write(text)
    return 0


def main(argv=None) -> int:
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
        return run(cfg)
    except CrossoverError as exc:
        sys.stderr.write(to_json(exc.to_dict()))
        return 2 if isinstance(exc, UsageError) else 1


if __name__ == "__main__":
    sys.exit(main())
