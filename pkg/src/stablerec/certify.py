"""Recovery, sharpness, uniqueness and stable-recovery certification."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InvalidInputError, NoCertificateError, SolverFailure
from .groups import IndexReport, directional_sets
from .linalg import RANK_TOL, as_matrix, nullspace_basis
from .polyhedra import LP_POSITIVE_TOL, ConeSpec, cone_is_trivial, forced_zero_projection
from .solvers import (
    ProblemInstance,
    SolverConfig,
    solve_basis_pursuit,
    source_coefficient,
    stability_probe,
)

CLASSES = (
    "not_recovered",
    "sharp",
    "strong_nonsharp_stable",
    "strong_nonsharp_uncertified",
    "non_unique",
)


@dataclass
class CertifyConfig:
    solver: SolverConfig = field(default_factory=SolverConfig)
    theta: float = 0.99
    recovery_tol: float = 1e-3
    nsc_margin: float = 1e-3
    rho_band: tuple = (0.95, 1.05)
    rel_tol: float = RANK_TOL
    lp_tol: float = LP_POSITIVE_TOL
    probe: bool = False
    probe_c: float = 1.0
    probe_deltas: tuple = (1e-1, 1e-2, 1e-3, 1e-4)
    probe_dirs: int = 20
    seed: int = 0


@dataclass
class RecoveryCheck:
    recovered: bool
    error: float
    absolute: bool = False

    def __bool__(self):
        return self.recovered


@dataclass
class Diagnosis:
    recovered: bool
    rho: float | None = None
    rho_in_band: bool | None = None
    sharp: bool = False
    sharp_witness: list | None = None
    unique: bool = False
    unique_witness: list | None = None
    nsc: bool = False
    restricted_injectivity: bool = False
    gh_injectivity: bool = False
    stable_certified: bool = False
    stable_witness: list | None = None
    classification: str = "not_recovered"
    relative_error: float | None = None
    active: list = field(default_factory=list)
    K: list = field(default_factory=list)
    H: list = field(default_factory=list)
    certificate: list | None = None
    residuals: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    probe_max_ratio: float | None = None
    errors: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, doc: dict) -> "Diagnosis":
        known = set(cls.__dataclass_fields__)
        extra = set(doc) - known
        if extra:
            raise InvalidInputError(f"unknown diagnosis fields: {sorted(extra)}")
        return cls(**doc)


def _tolist(w):
    return None if w is None else [float(t) for t in w]


def check_recovered(x_opt, x0, threshold: float = 1e-3) -> RecoveryCheck:
    """Relative error below `threshold`; absolute error when ``x0 = 0``."""
    x_opt = np.asarray(x_opt, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    nx = np.linalg.norm(x0)
    err = float(np.linalg.norm(x_opt - x0))
    if nx == 0.0:
        return RecoveryCheck(bool(err < threshold), err, absolute=True)
    return RecoveryCheck(bool(err / nx < threshold), err / nx)


def _blocks(inst: ProblemInstance, Dm, ids):
    P = inst.partition
    return [(k, Dm[:, P.groups[k]].T) for k in ids]


def critical_cone(inst: ProblemInstance, report: IndexReport, with_lines: bool = False,
                  Dm=None) -> ConeSpec:
    """Cone ``{w in Ker phi : D*_H w = 0, D*_J w in R_+ v_J (J in K)}``.

    With `with_lines`, active blocks are also tied to the lines through
    ``ybar_J`` (the uniqueness test).
    """
    Dm = inst.op.materialize() if Dm is None else Dm
    P = inst.partition
    cH = P.coords(report.H)
    eq = np.vstack([inst.phi, Dm[:, cH].T])
    rays = [(B, report.v[P.groups[k]]) for k, B in _blocks(inst, Dm, report.K)]
    lines = []
    if with_lines:
        lines = [(B, report.ybar[P.groups[k]]) for k, B in _blocks(inst, Dm, report.I)]
    return ConeSpec(inst.n, eq, rays, lines)


def check_sharp(inst, report, rel_tol=RANK_TOL, lp_tol=LP_POSITIVE_TOL, Dm=None):
    """Sharp iff the critical cone is trivial; returns ``(flag, witness)``."""
    res = cone_is_trivial(critical_cone(inst, report, False, Dm), rel_tol, lp_tol)
    return res.trivial, res.witness


def check_unique(inst, report, rel_tol=RANK_TOL, lp_tol=LP_POSITIVE_TOL, Dm=None):
    """Unique (equivalently strong) iff the critical cone meets the active lines only at 0."""
    res = cone_is_trivial(critical_cone(inst, report, True, Dm), rel_tol, lp_tol)
    return res.trivial, res.witness


def stability_system(inst: ProblemInstance, report: IndexReport, Dm=None):
    """Linear map and sign functionals whose forced-zero property certifies stability.

    Identity operator: ``z = phi_K^T u`` with ``phi_I^T u = 0``.
    General operator: ``D_K z + phi^T a + D_H b = 0``.
    Returns ``(L, z_dim, functionals)``.
    """
    P = inst.partition
    cK = P.coords(report.K)
    offsets = np.cumsum([0] + [P.groups[k].size for k in report.K])
    funcs = [(np.arange(offsets[i], offsets[i + 1]), report.v[P.groups[k]])
             for i, k in enumerate(report.K)]
    zd = cK.size
    if inst.op.kind == "identity":
        cI = P.coords(report.I)
        top = np.hstack([np.eye(zd), -inst.phi[:, cK].T])
        bot = np.hstack([np.zeros((cI.size, zd)), inst.phi[:, cI].T])
        return np.vstack([top, bot]), zd, funcs
    Dm = inst.op.materialize() if Dm is None else Dm
    cH = P.coords(report.H)
    L = np.hstack([Dm[:, cK], inst.phi.T, Dm[:, cH]])
    return L, zd, funcs


def check_stable_sufficient(inst, report, unique: bool | None = None, rel_tol=RANK_TOL,
                            lp_tol=LP_POSITIVE_TOL, Dm=None):
    """Uniqueness plus the forced-zero condition on the K blocks.

    Returns ``(flag, witness)``; the witness is either a non-uniqueness
    direction or a nonzero ``z`` escaping the forced-zero condition.
    """
    witness = None
    if unique is None:
        unique, witness = check_unique(inst, report, rel_tol, lp_tol, Dm)
    if not unique:
        return False, witness
    if not report.K:
        return True, None
    L, zd, funcs = stability_system(inst, report, Dm)
    res = forced_zero_projection(L, zd, funcs, rel_tol, lp_tol)
    return bool(res.forced), res.witness


def check_side_conditions(inst, report, nsc_margin: float = 1e-3, Dm=None):
    """``(nsc, restricted_injectivity, gh_injectivity)``."""
    Dm = inst.op.materialize() if Dm is None else Dm
    P = inst.partition
    nsc = report.rho < 1.0 - nsc_margin
    ric = np.vstack([inst.phi, Dm[:, P.coords(report.Ic)].T])
    gh = np.vstack([inst.phi, Dm[:, P.coords(report.H)].T])
    return (bool(nsc), nullspace_basis(ric).shape[1] == 0, nullspace_basis(gh).shape[1] == 0)


def check_quadratic_smooth(phi, Q, tol: float = 1e-10) -> bool:
    """Strong-minimum test for ``R(x) = 0.5 <Q x, x>``: ``Ker phi`` meets ``Ker Q`` only at 0."""
    phi = as_matrix(phi, "phi")
    Q = as_matrix(Q, "Q")
    n = phi.shape[1]
    if Q.shape != (n, n):
        raise InvalidInputError(f"Q must be {n}x{n}, got {Q.shape}")
    scale = max(1.0, float(np.abs(Q).max(initial=0.0)))
    if np.abs(Q - Q.T).max(initial=0.0) > tol * scale:
        raise InvalidInputError("Q is not symmetric")
    if np.linalg.eigvalsh(0.5 * (Q + Q.T)).min() < -tol * scale:
        raise InvalidInputError("Q is not positive semi-definite")
    return nullspace_basis(np.vstack([phi, Q])).shape[1] == 0


def classify(recovered: bool, sharp: bool, unique: bool, stable: bool) -> str:
    if not recovered:
        return "not_recovered"
    if sharp:
        return "sharp"
    if unique:
        return "strong_nonsharp_stable" if stable else "strong_nonsharp_uncertified"
    return "non_unique"


def diagnose(inst: ProblemInstance, cfg: CertifyConfig | None = None) -> Diagnosis:
    """Solve, test recovery, then certify sharpness, uniqueness and stability.

    The certificate and index sets are built from the ground truth; the
    solver output decides recovery, which is revoked when no dual certificate
    exists (``x0`` is then not a minimizer even if the solver output is within
    tolerance).  Certification is skipped for instances that are not recovered.
    """
    cfg = cfg or CertifyConfig()
    t0 = time.perf_counter()
    bp = solve_basis_pursuit(inst, cfg.solver)
    t1 = time.perf_counter()
    rec = check_recovered(bp.x, inst.x0, cfg.recovery_tol)
    diag = Diagnosis(recovered=rec.recovered, relative_error=rec.error)
    diag.residuals["bp_kkt"] = float(bp.kkt_residual)
    diag.timings["solve_ms"] = 1e3 * (t1 - t0)
    if not bp.converged:
        diag.errors.append(f"basis pursuit did not converge (residual {bp.kkt_residual:.3g})")
    if rec.absolute:
        diag.errors.append("zero ground truth: absolute recovery error used")
    if rec.recovered:
        try:
            _certify(inst, cfg, diag)
        except NoCertificateError as exc:
            # the solver landed within tolerance of x0, but x0 provably is not a minimizer
            diag.recovered = False
            diag.notes.append(f"not a minimizer: {exc}")
        except SolverFailure as exc:
            diag.errors.append(f"{type(exc).__name__}: {exc}")
    diag.classification = classify(diag.recovered, diag.sharp, diag.unique,
                                   diag.stable_certified)
    diag.timings["certify_ms"] = 1e3 * (time.perf_counter() - t1)
    return diag


def _certify(inst, cfg, diag):
    Dm = inst.op.materialize()
    rep = source_coefficient(inst, theta=cfg.theta)
    diag.rho = float(rep.rho)
    # reported only for comparison with threshold-based pipelines; sharpness is decided exactly
    diag.rho_in_band = bool(cfg.rho_band[0] < rep.rho < cfg.rho_band[1])
    diag.active = [int(k) for k in rep.I]
    diag.K, diag.H = [int(k) for k in rep.K], [int(k) for k in rep.H]
    diag.certificate = _tolist(rep.v)
    diag.residuals["certificate"] = float(rep.residual)
    diag.nsc, diag.restricted_injectivity, diag.gh_injectivity = check_side_conditions(
        inst, rep, cfg.nsc_margin, Dm)

    sharp, w_sharp = check_sharp(inst, rep, cfg.rel_tol, cfg.lp_tol, Dm)
    unique, w_unique = (True, None) if sharp else check_unique(
        inst, rep, cfg.rel_tol, cfg.lp_tol, Dm)
    stable, w_stable = (True, None) if sharp else check_stable_sufficient(
        inst, rep, unique, cfg.rel_tol, cfg.lp_tol, Dm)
    diag.sharp, diag.unique, diag.stable_certified = bool(sharp), bool(unique), bool(stable)
    diag.sharp_witness = _tolist(w_sharp)
    diag.unique_witness = _tolist(w_unique)
    diag.stable_witness = _tolist(w_stable)
    for key, w in (("sharp_witness", w_sharp), ("unique_witness", w_unique)):
        if w is not None:
            _, _, bval = directional_sets(w, inst.op, inst.partition, rep.e, rep.Ic)
            diag.residuals[key + "_kernel"] = float(np.abs(inst.phi @ w).max(initial=0.0))
            diag.residuals[key + "_boundary"] = float(abs(bval))
    if cfg.probe:
        pr = stability_probe(inst, cfg.probe_c, cfg.probe_deltas, cfg.probe_dirs, cfg.seed,
                             cfg.solver)
        diag.probe_max_ratio = float(pr.max_ratio)
        if pr.failures:
            diag.errors.append(f"stability probe: {pr.failures} unconverged rows")
