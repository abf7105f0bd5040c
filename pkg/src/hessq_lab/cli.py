"""Command-line front end: seeded experiments, CSV/JSON reports.

Every subcommand runs one verifier or sweep, writes a report whose
header echoes the tool version, the full configuration, the seed and
the constant/tolerance choices in effect, and exits with

    0   all contracts in the run passed,
    1   a contract was violated (the report carries a witness row),
    2   invalid configuration,
    3   the report could not be written.

Reports are deterministic: identical configuration and seed produce
byte-identical files (there is no timestamp).  CSV uses '.' decimals
with 17-significant-digit round-trip formatting; the JSON format
mirrors the CSV content one-to-one.

The default seed is 0, overridable by the ``HESSQ_SEED`` environment
variable and the ``--seed`` flag (flag wins).

Field files (``--field`` arguments) are plain text:

    line 1:             n                 (grid dimension)
    lines 2 .. n+1:     lo_a hi_a count_a (box bounds and points per axis)
    line n+2:           total value count
    remaining lines:    one value per line, C-order (last axis fastest)

as written by ``ScalarField.to_file``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import DomainError
from .operator import QuotientOperator, spectral_constant
from .symfun import identity_residuals_batch
from . import concavity as _concavity
from . import fields as _fields
from .singular import SingularFamily

__all__ = ["ExperimentConfig", "Report", "run", "main"]

COMMANDS = (
    "identities",
    "concavity",
    "induction",
    "spectral-bounds",
    "ellipticity",
    "singular",
    "jacobi",
    "divergence",
    "legendre",
)


@dataclass
class ExperimentConfig:
    command: str
    n: int = 3
    k: int = 2
    samples: int = 10000
    seed: int = 0
    l: int = 1
    eps: float = 1.0
    f_target: float = 1.0
    shift: float = 1.0
    lam1: tuple = (1e2, 1e3, 1e4, 1e5, 1e6)
    sigma: float = 0.0
    resolution: int = 96
    resolutions: tuple = (17, 25)
    levels: tuple = (17, 33, 65)
    radii: tuple = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5)
    field_kind: str = "exp"
    field_path: str | None = None
    pairs: int = 1000
    tol: float | None = None
    plateau_tol: float = 0.10
    ratio_tol: float = 0.05
    output: str | None = None
    fmt: str = "csv"

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise DomainError(f"unknown command {self.command!r}")
        if self.n < 2:
            raise DomainError("n must be >= 2")
        if self.command in ("concavity", "induction", "spectral-bounds", "ellipticity", "jacobi"):
            if self.k not in (self.n - 1, self.n - 2):
                raise DomainError(
                    f"{self.command} requires k in {{n-1, n-2}}, got (n, k) = ({self.n}, {self.k})"
                )
        elif self.command == "singular":
            if not 1 <= self.k <= self.n - 3:
                raise DomainError(
                    f"singular requires 1 <= k <= n-3, got (n, k) = ({self.n}, {self.k})"
                )
        elif self.command in ("identities", "divergence"):
            if not 1 <= self.k <= self.n - 1:
                raise DomainError(f"k={self.k} out of range [1, {self.n - 1}]")
        if self.samples < 1:
            raise DomainError("samples must be >= 1")
        if self.fmt not in ("csv", "json"):
            raise DomainError(f"unknown format {self.fmt!r}")


@dataclass
class Report:
    header: list = field(default_factory=list)
    columns: list = field(default_factory=list)
    rows: list = field(default_factory=list)

    @staticmethod
    def _fmt(v) -> str:
        if isinstance(v, (bool, np.bool_)):
            return "1" if v else "0"
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        if isinstance(v, (float, np.floating)):
            return f"{float(v):.17g}"
        return str(v)

    def to_csv(self) -> str:
        lines = [f"# {line}" for line in self.header]
        lines.append(",".join(self.columns))
        for row in self.rows:
            lines.append(",".join(self._fmt(v) for v in row))
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        payload = {
            "header": list(self.header),
            "columns": list(self.columns),
            "rows": [[self._fmt(v) for v in row] for row in self.rows],
        }
        return json.dumps(payload, indent=1) + "\n"

    def render(self, fmt: str) -> str:
        return self.to_csv() if fmt == "csv" else self.to_json()


def _base_header(cfg: ExperimentConfig, tolerances: dict) -> list:
    lines = [f"hessq-lab v{__version__}", f"command: {cfg.command}"]
    lines.append(
        "config: "
        + " ".join(
            f"{k}={v}"
            for k, v in (
                ("n", cfg.n),
                ("k", cfg.k),
                ("samples", cfg.samples),
                ("format", cfg.fmt),
            )
        )
    )
    lines.append(f"seed: {cfg.seed}")
    for name, val in tolerances.items():
        lines.append(f"tolerance {name}: {Report._fmt(val)}")
    return lines


def _load_field(cfg: ExperimentConfig):
    if cfg.field_path is not None:
        return _fields.ScalarField.from_file(cfg.field_path)
    return None


# ---------------------------------------------------------------------------
# command implementations; each returns (exit_status, Report)
# ---------------------------------------------------------------------------

def _run_identities(cfg: ExperimentConfig):
    tol = 1e-12 if cfg.tol is None else cfg.tol
    L = _concavity.sample_tuples(cfg.n, cfg.samples, cfg.seed)
    from .symfun import elementary_batch

    R = identity_residuals_batch(L, cfg.k)
    scale = np.maximum(1.0, np.abs(elementary_batch(L, cfg.k)))
    rel = R / scale[:, None]
    worst = int(np.argmax(np.max(rel, axis=1)))
    violations = int(np.count_nonzero(np.max(rel, axis=1) > tol))
    rep = Report(
        header=_base_header(cfg, {"identity_rel": tol}),
        columns=["samples", "max_r1", "max_r2", "max_r3", "max_r4",
                 "max_rel_residual", "violations"],
        rows=[[cfg.samples, *np.max(R, axis=0), float(np.max(rel)), violations]],
    )
    if violations:
        rep.columns += [f"witness_lam{i+1}" for i in range(cfg.n)]
        rep.rows[0] += list(L[worst])
    return (1 if violations else 0), rep


def _run_concavity(cfg: ExperimentConfig):
    tol = 1e-9 if cfg.tol is None else cfg.tol
    gr = _concavity.verify_gap(cfg.n, cfg.k, cfg.samples, cfg.seed, tol=tol)
    rep = Report(
        header=_base_header(cfg, {"gap_rel": tol}),
        columns=["samples", "min_gap", "scale", "violations", "gap_at_witness"]
        + [f"witness_lam{i+1}" for i in range(cfg.n)]
        + [f"witness_xi{i+1}" for i in range(cfg.n)],
        rows=[[gr.samples, gr.min_gap, gr.scale, gr.violations, gr.gap,
               *gr.witness_lam, *gr.witness_xi]],
    )
    return (0 if gr.passed else 1), rep


def _run_induction(cfg: ExperimentConfig):
    op = QuotientOperator(cfg.n, cfg.k)
    rows = _concavity.induction_sweep(
        op, cfg.l, cfg.f_target, cfg.lam1, samples=cfg.samples, seed=cfg.seed
    )
    closed = rows[:, 3]
    variation = float((closed.max() - closed.min()) / closed.min())
    header = _base_header(cfg, {"plateau_rel": cfg.plateau_tol})
    header.append(f"config extra: l={cfg.l} f_target={cfg.f_target:.17g}")
    rep = Report(
        header=header,
        columns=["lam1", "tail", "c0_sampled", "c0_sup"],
        rows=[list(r) for r in rows],
    )
    rep.rows.append([float("nan"), float("nan"), variation, variation])
    header.append("last row: closed-form plateau variation (both c0 columns)")
    return (0 if variation <= cfg.plateau_tol else 1), rep


def _run_spectral_bounds(cfg: ExperimentConfig):
    tol = 1e-12 if cfg.tol is None else cfg.tol
    op = QuotientOperator(cfg.n, cfg.k)
    L = _concavity.sample_tuples(cfg.n, cfg.samples, cfg.seed)
    slack = op.eigen_bounds_slack_batch(L)
    f = op.value_batch(L)
    C = spectral_constant(cfg.n, cfg.k)
    scale = np.maximum(1.0, np.maximum(L[:, 0], C * np.abs(f)))[:, None]
    violations = int(np.count_nonzero(slack < -tol * scale))
    worst = int(np.argmin(np.min(slack / scale, axis=1)))
    header = _base_header(cfg, {"slack_rel": tol})
    header.append("constant: C(n) = binomial(n, k) = " + Report._fmt(C))
    rep = Report(
        header=header,
        columns=["samples", "min_slack1", "min_slack2", "violations"]
        + [f"witness_lam{i+1}" for i in range(cfg.n)],
        rows=[[cfg.samples, float(np.min(slack[:, 0])), float(np.min(slack[:, 1])),
               violations, *L[worst]]],
    )
    return (1 if violations else 0), rep


def _run_ellipticity(cfg: ExperimentConfig):
    op = QuotientOperator(cfg.n, cfg.k)
    sweep = op.ellipticity_sweep(cfg.f_target, cfg.shift, cfg.lam1)
    variation = sweep.ratio_variation()
    header = _base_header(cfg, {"ratio_variation": cfg.ratio_tol})
    header.append(f"config extra: f_target={cfg.f_target:.17g} K={cfg.shift:.17g}")
    header.append("constant: C(n) = binomial(n, k) = "
                  + Report._fmt(spectral_constant(cfg.n, cfg.k)))
    rep = Report(
        header=header,
        columns=list(sweep.columns),
        rows=[list(r) for r in sweep.rows],
    )
    rep.rows.append([float("nan"), float("nan"), float("nan"), float("nan"), variation])
    header.append("last row: ratio variation across the sweep")
    return (0 if variation <= cfg.ratio_tol else 1), rep


def _run_singular(cfg: ExperimentConfig):
    fam = SingularFamily(cfg.n, cfg.k, cfg.sigma)
    lim = fam.limit()
    rs = np.asarray(cfg.radii, dtype=float)
    prof = fam.quotient_profile(rs)
    rows = []
    for r in rs:
        x = np.zeros(cfg.n)
        x[1] = r
        u = fam.value(x)
        gnorm = float(np.linalg.norm(fam.gradient(x)))
        lam = np.sort(np.linalg.eigvalsh(fam.hessian(x)))[::-1]
        fval = prof[np.searchsorted(-rs, -r), 1]
        rows.append([r, u, gnorm, *lam, fval])
    conv = lim.convex_radius(resolution=cfg.resolution)
    est = lim.holder_estimate(rs)
    slope = lim.quotient_log_slope(np.logspace(-4, -2, 9))
    threshold = fam.holder_threshold
    ok = (
        abs(est - threshold) <= 0.05
        and conv.r_hat > 0
        and abs(slope) <= 1e-2
    )
    header = _base_header(cfg, {"holder_abs": 0.05, "log_slope_abs": 1e-2})
    header.append(
        f"config extra: sigma={cfg.sigma:.17g} alpha={fam.alpha:.17g} "
        f"threshold={threshold:.17g} resolution={cfg.resolution}"
    )
    header.append(
        f"summary: holder_estimate={est:.17g} convex_radius={conv.r_hat:.17g} "
        f"f_log_slope={slope:.17g}"
    )
    rep = Report(
        header=header,
        columns=["r", "u", "grad_norm", *[f"lam{i+1}" for i in range(cfg.n)], "f"],
        rows=rows,
    )
    return (0 if ok else 1), rep


def _exp_field(n: int, size: int) -> _fields.ScalarField:
    """Built-in strictly convex field with simple top eigenvalue."""
    a = np.linspace(1.4, 0.6, n)

    def fn(P):
        return sum(np.exp(a[i] * P[..., i]) for i in range(n))

    return _fields.ScalarField.from_function(fn, lo=[-0.25] * n, hi=[0.25] * n, shape=(size,) * n)


def _run_jacobi(cfg: ExperimentConfig):
    op = QuotientOperator(cfg.n, cfg.k)
    rows = []
    ok = True
    loaded = _load_field(cfg)
    sizes = cfg.resolutions if loaded is None else (loaded.shape[0],)
    for size in sizes:
        fld = loaded if loaded is not None else _exp_field(cfg.n, size)
        C_emp = _fields.jacobi_source_sup(fld, op)
        C = C_emp + 1e-9
        c_star, gap_rep = _fields.jacobi_c_estimate(fld, op, C)
        ok = ok and c_star > 0 and gap_rep.flagged_multiplicity == 0
        rows.append([size, gap_rep.admitted, gap_rep.flagged_multiplicity,
                     gap_rep.flagged_nonconvex, C, c_star, gap_rep.min_gap])
    header = _base_header(cfg, {"c_positive": 0.0})
    header.append("field: " + (cfg.field_path or "built-in exponential family"))
    header.append("C choice: empirical sup of 2 f_1^2 / (lambda_1 F) plus 1e-9")
    rep = Report(
        header=header,
        columns=["resolution", "admitted", "flagged_mult", "flagged_nonconvex",
                 "C", "c_star", "min_gap_at_c_star"],
        rows=rows,
    )
    return (0 if ok else 1), rep


def _divergence_test_field(kind: str, n: int):
    if kind == "quadratic":
        A = np.diag(np.linspace(2.0, 1.0, n))

        def fn(P):
            return 0.5 * np.einsum("...i,ij,...j->...", P, A, P)

    elif kind == "cubic":
        if n != 3:
            raise DomainError("the cubic test field is three-dimensional")

        def fn(P):
            return P[..., 0] ** 3 + P[..., 1] ** 3 + P[..., 0] * P[..., 1] * P[..., 2]

    elif kind == "smooth":
        coef = np.linspace(0.5, 0.2, n)

        def fn(P):
            out = np.exp(P[..., 0] + coef[0] * P[..., 1 % n])
            for i in range(1, n):
                out = out + np.exp(P[..., i] + coef[i] * P[..., (i + 1) % n])
            return out

    else:
        raise DomainError(f"unknown field kind {kind!r}")
    return fn


def _run_divergence(cfg: ExperimentConfig):
    tol = 1e-12 if cfg.tol is None else cfg.tol
    rows = []
    if cfg.field_path is not None:
        fld = _fields.ScalarField.from_file(cfg.field_path)
        reps = [_fields.newton_divergence(fld, cfg.k)]
        rows = [[float(np.min(fld.h)), r.max_abs, r.scale, r.relative] for r in reps]
        slope = float("nan")
        exact = all(r.relative <= tol for r in reps)
        ok = exact if cfg.k == 1 else exact
    else:
        fn = _divergence_test_field(cfg.field_kind, cfg.n)
        shapes = [(m,) * cfg.n for m in cfg.levels]
        slope, pairs = _fields.divergence_refinement_slope(
            fn, [-1.0] * cfg.n, [1.0] * cfg.n, shapes, cfg.k
        )
        rels = []
        for (h, mx), shape in zip(pairs, shapes):
            fld = _fields.ScalarField.from_function(fn, [-1.0] * cfg.n, [1.0] * cfg.n, shape)
            r = _fields.newton_divergence(fld, cfg.k)
            rows.append([h, r.max_abs, r.scale, r.relative])
            rels.append(r.relative)
        exact = all(rel <= tol for rel in rels)
        ok = exact if cfg.k == 1 else (exact or slope >= 1.9)
    header = _base_header(cfg, {"exactness_rel": tol, "slope_min": 1.9})
    header.append("field: " + (cfg.field_path or cfg.field_kind))
    header.append("contract: k = 1 exact; k >= 2 exact or refinement order >= 1.9")
    rep = Report(
        header=header,
        columns=["h", "max_residual", "scale", "relative"],
        rows=rows,
    )
    rep.rows.append([float("nan"), float("nan"), float("nan"), slope])
    header.append("last row: measured refinement slope (relative column)")
    return (0 if ok else 1), rep


def _run_legendre(cfg: ExperimentConfig):
    tol = 1e-8 if cfg.tol is None else cfg.tol
    K = cfg.shift
    if cfg.field_path is not None:
        fld = _fields.ScalarField.from_file(cfg.field_path)
        A = None
    else:
        n = cfg.n
        A = np.diag(np.linspace(2.0, 1.0, n)) + 0.1 * (np.ones((n, n)) - np.eye(n))

        def fn(P):
            return 0.5 * np.einsum("...i,ij,...j->...", P, A, P)

        fld = _fields.ScalarField.from_function(fn, [-1.0] * cfg.n, [1.0] * cfg.n, (15,) * cfg.n)
    w, rep_map = _fields.legendre_field(fld, K)
    viol = rep_map.monotonicity_violations(cfg.pairs, cfg.seed)
    if A is not None:
        target = np.linalg.inv(A + K * np.eye(cfg.n))
        d2_err = float(
            np.max(np.abs(rep_map.d2w - target)) / np.max(np.abs(target))
        )
    else:
        d2_err = float("nan")
    ok = viol == 0 and (A is None or d2_err <= tol)
    header = _base_header(cfg, {"d2w_rel": tol, "monotonicity_violations": 0})
    header.append("field: " + (cfg.field_path or "built-in quadratic"))
    header.append(f"config extra: K={K:.17g} pairs={cfg.pairs}")
    rep = Report(
        header=header,
        columns=["matched_points", "monotonicity_violations", "d2w_rel_err"],
        rows=[[rep_map.matched_x.shape[0], viol, d2_err]],
    )
    return (0 if ok else 1), rep


_RUNNERS = {
    "identities": _run_identities,
    "concavity": _run_concavity,
    "induction": _run_induction,
    "spectral-bounds": _run_spectral_bounds,
    "ellipticity": _run_ellipticity,
    "singular": _run_singular,
    "jacobi": _run_jacobi,
    "divergence": _run_divergence,
    "legendre": _run_legendre,
}


def run(cfg: ExperimentConfig):
    """Dispatch a validated config; returns (exit_status, Report)."""
    cfg.validate()
    return _RUNNERS[cfg.command](cfg)


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _float_list(text: str):
    return tuple(float(x) for x in text.split(","))


def _int_list(text: str):
    return tuple(int(x) for x in text.split(","))


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="hessq-lab",
        description="Verifiers and sweeps for the sigma_n/sigma_k Hessian quotient calculus.",
    )
    default_seed = int(os.environ.get("HESSQ_SEED", "0"))
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, k_default=None):
        sp.add_argument("--n", type=int, default=3)
        sp.add_argument("--k", type=int, default=k_default)
        sp.add_argument("--samples", type=int, default=10000)
        sp.add_argument("--seed", type=int, default=default_seed)
        sp.add_argument("--tol", type=float, default=None,
                        help="override the command's default tolerance")
        sp.add_argument("--output", type=str, default=None)
        sp.add_argument("--format", dest="fmt", choices=("csv", "json"), default="csv")

    sp = sub.add_parser("identities", help="symmetric-function identity residuals")
    common(sp)
    sp = sub.add_parser("concavity", help="concavity gap batch verification")
    common(sp)
    sp = sub.add_parser("induction", help="gradient/Newton-tensor bound sweep")
    common(sp)
    sp.add_argument("--l", type=int, default=1)
    sp.add_argument("--f-target", dest="f_target", type=float, default=1.0)
    sp.add_argument("--lam1", type=_float_list, default=(1e2, 1e3, 1e4, 1e5, 1e6))
    sp.add_argument("--plateau-tol", dest="plateau_tol", type=float, default=0.10)
    sp = sub.add_parser("spectral-bounds", help="small-eigenvalue pinch bounds")
    common(sp)
    sp = sub.add_parser("ellipticity", help="transformed-diagonal range sweep")
    common(sp)
    sp.add_argument("--f-target", dest="f_target", type=float, default=1.0)
    sp.add_argument("--K", dest="shift", type=float, default=1.0)
    sp.add_argument("--lam1", type=_float_list, default=(1e3, 1e4, 1e5, 1e6))
    sp.add_argument("--ratio-tol", dest="ratio_tol", type=float, default=0.05)
    sp = sub.add_parser("singular", help="singular family profile and thresholds")
    common(sp, k_default=1)
    sp.add_argument("--sigma", type=float, default=0.0)
    sp.add_argument("--radii", type=_float_list, default=(1e-1, 1e-2, 1e-3, 1e-4, 1e-5))
    sp.add_argument("--resolution", type=int, default=96)
    sp = sub.add_parser("jacobi", help="differential-inequality constant estimate")
    common(sp)
    sp.add_argument("--resolutions", type=_int_list, default=(17, 25))
    sp.add_argument("--field", dest="field_path", type=str, default=None)
    sp = sub.add_parser("divergence", help="Newton-tensor divergence residuals")
    common(sp, k_default=1)
    sp.add_argument("--levels", type=_int_list, default=(17, 33, 65))
    sp.add_argument("--field-kind", dest="field_kind",
                    choices=("quadratic", "cubic", "smooth"), default="smooth")
    sp.add_argument("--field", dest="field_path", type=str, default=None)
    sp = sub.add_parser("legendre", help="discrete shifted conjugate diagnostics")
    common(sp)
    sp.add_argument("--K", dest="shift", type=float, default=1.0)
    sp.add_argument("--pairs", type=int, default=1000)
    sp.add_argument("--field", dest="field_path", type=str, default=None)
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    kwargs = {k: v for k, v in vars(args).items() if v is not None}
    if kwargs.get("k") is None:
        kwargs.pop("k", None)
    if "k" not in kwargs:
        kwargs["k"] = kwargs.get("n", 3) - 1
    cfg = ExperimentConfig(**kwargs)
    try:
        cfg.validate()
    except DomainError as exc:
        print(f"hessq-lab: invalid configuration: {exc}", file=sys.stderr)
        return 2
    status, report = run(cfg)
    text = report.render(cfg.fmt)
    try:
        if cfg.output is None:
            sys.stdout.write(text)
        else:
            with open(cfg.output, "w") as fh:
                fh.write(text)
    except OSError as exc:
        print(f"hessq-lab: cannot write report: {exc}", file=sys.stderr)
        return 3
    return status


if __name__ == "__main__":
    sys.exit(main())
