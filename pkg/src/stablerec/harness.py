"""Random instance generation, phase-transition sweeps, persistence and plotting."""

from __future__ import annotations

import csv
import json
import os
import xml.etree.ElementTree as ET
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .certify import CertifyConfig, diagnose
from .errors import InvalidInputError
from .groups import GroupPartition
from .operators import AnalysisOperator, read_pgm
from .solvers import ProblemInstance, SolverConfig

CSV_COLUMNS = (
    "m",
    "trials",
    "recovered",
    "sharp",
    "strong_nonsharp",
    "stable_certified_nonsharp",
    "failed",
    "mean_solve_ms",
    "mean_certify_ms",
)


# --------------------------------------------------------------------------
# generators


def gen_gaussian_matrix(m: int, n: int, seed) -> np.ndarray:
    """i.i.d. standard normal ``m x n`` matrix via Box-Muller on PCG64 uniforms."""
    if m < 1 or n < 1:
        raise InvalidInputError("matrix dimensions must be positive")
    rng = np.random.Generator(np.random.PCG64(seed))
    k = m * n
    h = (k + 1) // 2
    u1 = 1.0 - rng.random(h)  # (0, 1], keeps the log finite
    u2 = rng.random(h)
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])
    return z[:k].reshape(m, n)


def gen_group_sparse_signal(P: GroupPartition, active: int, seed) -> np.ndarray:
    """Standard normal entries on `active` uniformly chosen groups, zero elsewhere."""
    if not 0 <= active <= P.count:
        raise InvalidInputError(f"active must lie in [0, {P.count}]")
    rng = np.random.default_rng(seed)
    x = np.zeros(P.p)
    for k in rng.choice(P.count, size=active, replace=False):
        g = P.groups[k]
        x[g] = rng.standard_normal(g.size)
    return x


@dataclass
class ImageSample:
    image: np.ndarray
    active_groups: int
    sparsity_bound: int


def gen_piecewise_constant_image(n1: int, n2: int, blocks: int, seed) -> ImageSample:
    """Constant background plus ``blocks - 1`` random rectangles of random intensity.

    The gradient of each rectangle is supported on its boundary, so at most
    ``2 (h + w)`` pixels per rectangle carry a nonzero gradient group; the sum
    is reported as `sparsity_bound` next to the exact count.
    """
    if blocks < 1 or n1 < 1 or n2 < 1:
        raise InvalidInputError("blocks and image sides must be positive")
    rng = np.random.default_rng(seed)
    img = np.full((n1, n2), rng.uniform())
    bound = 0
    for _ in range(blocks - 1):
        h = int(rng.integers(1, max(1, n1 // 2) + 1))
        w = int(rng.integers(1, max(1, n2 // 2) + 1))
        i = int(rng.integers(0, n1 - h + 1))
        j = int(rng.integers(0, n2 - w + 1))
        img[i:i + h, j:j + w] = rng.uniform()
        bound += 2 * (h + w)
    op = AnalysisOperator.gradient2d(n1, n2)
    norms = op.default_partition().block_norms(op.analyze(img.ravel()))
    active = int(np.count_nonzero(norms > 1e-12))
    return ImageSample(img.ravel(), active, min(bound, n1 * n2))


# --------------------------------------------------------------------------
# sweeps


@dataclass
class SweepConfig:
    mode: str = "group_sparsity"
    n: int = 200
    group_size: int = 10
    active: int = 4
    n1: int = 12
    n2: int = 12
    blocks: int = 3
    m_list: list = field(default_factory=lambda: list(range(40, 201, 10)))
    trials: int = 20
    seed: int = 0
    kkt_tol: float = 1e-8
    theta: float = 0.99
    max_iter: int = 200_000
    probe: bool = False
    probe_c: float = 1.0
    probe_deltas: list = field(default_factory=lambda: [1e-1, 1e-2, 1e-3, 1e-4])
    probe_dirs: int = 20

    def __post_init__(self):
        if self.mode not in ("group_sparsity", "total_variation"):
            raise InvalidInputError(f"unknown sweep mode {self.mode!r}")
        self.m_list = [int(m) for m in self.m_list]
        if not self.m_list or any(b <= a for a, b in zip(self.m_list, self.m_list[1:])):
            raise InvalidInputError("m_list must be nonempty and strictly increasing")
        if self.trials < 1:
            raise InvalidInputError("trials must be at least 1")
        if self.mode == "group_sparsity" and self.n % self.group_size:
            raise InvalidInputError("n must be a multiple of group_size")

    @classmethod
    def from_json(cls, doc: dict) -> "SweepConfig":
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidInputError(f"unknown sweep config keys: {sorted(unknown)}")
        return cls(**doc)

    def to_json(self) -> dict:
        return asdict(self)

    def certify_config(self) -> CertifyConfig:
        return CertifyConfig(solver=SolverConfig(max_iter=self.max_iter, kkt_tol=self.kkt_tol),
                             theta=self.theta, probe=self.probe, probe_c=self.probe_c,
                             probe_deltas=tuple(self.probe_deltas), probe_dirs=self.probe_dirs,
                             seed=self.seed)


@dataclass
class SweepRecord:
    m: int
    trials: int
    recovered: int = 0
    sharp: int = 0
    strong_nonsharp: int = 0
    stable_certified_nonsharp: int = 0
    failed: int = 0
    mean_solve_ms: float | None = None
    mean_certify_ms: float | None = None

    def check(self):
        assert self.sharp + self.strong_nonsharp <= self.recovered <= self.trials
        assert self.stable_certified_nonsharp <= self.strong_nonsharp

    def to_row(self) -> list:
        def fmt(t):
            return "" if t is None else f"{t:.3f}"

        return [self.m, self.trials, self.recovered, self.sharp, self.strong_nonsharp,
                self.stable_certified_nonsharp, self.failed,
                fmt(self.mean_solve_ms), fmt(self.mean_certify_ms)]

    @classmethod
    def from_row(cls, row: dict) -> "SweepRecord":
        def opt(t):
            return None if t in ("", None) else float(t)

        ints = {k: int(row[k]) for k in CSV_COLUMNS[:7]}
        return cls(**ints, mean_solve_ms=opt(row["mean_solve_ms"]),
                   mean_certify_ms=opt(row["mean_certify_ms"]))


def trial_seeds(seed: int, m: int, trial: int):
    """Two independent 64-bit seeds for (matrix, signal), derived from (seed, m, trial)."""
    state = np.random.SeedSequence([int(seed), int(m), int(trial)]).generate_state(2, np.uint64)
    return int(state[0]), int(state[1])


def make_trial_instance(cfg: SweepConfig, m: int, trial: int) -> ProblemInstance:
    s_phi, s_x = trial_seeds(cfg.seed, m, trial)
    if cfg.mode == "group_sparsity":
        op = AnalysisOperator.identity(cfg.n)
        P = GroupPartition.contiguous(cfg.n, cfg.group_size)
        x0 = gen_group_sparse_signal(P, cfg.active, s_x)
    else:
        op = AnalysisOperator.gradient2d(cfg.n1, cfg.n2)
        P = op.default_partition()
        x0 = gen_piecewise_constant_image(cfg.n1, cfg.n2, cfg.blocks, s_x).image
    return ProblemInstance(gen_gaussian_matrix(m, op.n, s_phi), op, P, x0)


def _run_trial(args):
    cfg, m, trial = args
    try:
        d = diagnose(make_trial_instance(cfg, m, trial), cfg.certify_config())
    except Exception as exc:  # a failed trial is counted, never fatal
        return None, repr(exc), 0.0, 0.0
    return d.classification, "; ".join(d.errors), d.timings["solve_ms"], d.timings["certify_ms"]


def aggregate(m: int, outcomes, timings: bool = False) -> SweepRecord:
    rec = SweepRecord(m, len(outcomes))
    solve, cert = [], []
    for cls, err, s_ms, c_ms in outcomes:
        if cls is None:
            rec.failed += 1
            continue
        if err:
            rec.failed += 1
        solve.append(s_ms)
        cert.append(c_ms)
        if cls != "not_recovered":
            rec.recovered += 1
        if cls == "sharp":
            rec.sharp += 1
        elif cls.startswith("strong_nonsharp"):
            rec.strong_nonsharp += 1
            if cls == "strong_nonsharp_stable":
                rec.stable_certified_nonsharp += 1
    if timings and solve:
        rec.mean_solve_ms = float(np.mean(solve))
        rec.mean_certify_ms = float(np.mean(cert))
    rec.check()
    return rec


def run_sweep(cfg: SweepConfig, out_csv=None, threads: int = 1, timings: bool = False,
              progress=None) -> list:
    """Diagnose ``cfg.trials`` random instances per measurement count.

    Rows are appended to `out_csv` (and flushed to disk) as soon as every
    trial for that ``m`` has finished.  Timing columns stay empty unless
    `timings` is set, so that repeated runs give byte-identical files.
    """
    records = []
    fh = writer = None
    if out_csv is not None:
        fh = open(out_csv, "w", newline="")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        fh.flush()
    pool = ProcessPoolExecutor(threads) if threads > 1 else None
    try:
        for m in cfg.m_list:
            jobs = [(cfg, m, t) for t in range(cfg.trials)]
            outcomes = list(pool.map(_run_trial, jobs) if pool else map(_run_trial, jobs))
            rec = aggregate(m, outcomes, timings)
            records.append(rec)
            if writer:
                writer.writerow(rec.to_row())
                fh.flush()
                os.fsync(fh.fileno())
            if progress:
                progress(rec)
    finally:
        if pool:
            pool.shutdown()
        if fh:
            fh.close()
    return records


def read_sweep_csv(path) -> list:
    with open(path, newline="") as fh:
        return [SweepRecord.from_row(r) for r in csv.DictReader(fh)]


# --------------------------------------------------------------------------
# plotting

CURVES = (
    ("recovered", "green", "recovered"),
    ("sharp", "blue", "sharp"),
    ("strong_nonsharp", "red", "strong, not sharp"),
    ("stable_certified_nonsharp", "orange", "certified stable, not sharp"),
)


def emit_plot(records, path, title: str = "Proportion of instances vs. measurements"):
    """Write an SVG with one polyline per classification count."""
    if not records:
        raise InvalidInputError("no records to plot")
    W, H, left, right, top, bottom = 640, 420, 60, 190, 40, 50
    pw, ph = W - left - right, H - top - bottom
    ms = [r.m for r in records]
    lo, hi = min(ms), max(ms)
    span = hi - lo or 1

    def px(m, frac):
        x = left + (pw * (m - lo) / span if hi > lo else pw / 2)
        return x, top + ph * (1 - frac)

    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=str(W), height=str(H),
                     viewBox=f"0 0 {W} {H}")
    ET.SubElement(svg, "rect", x="0", y="0", width=str(W), height=str(H), fill="white")
    ET.SubElement(svg, "text", x=str(W // 2 - right // 2), y="22", **{"text-anchor": "middle"}
                  ).text = title
    axes = dict(stroke="black", **{"stroke-width": "1"})
    ET.SubElement(svg, "line", x1=str(left), y1=str(top + ph), x2=str(left + pw),
                  y2=str(top + ph), **axes)
    ET.SubElement(svg, "line", x1=str(left), y1=str(top), x2=str(left), y2=str(top + ph), **axes)
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        _, y = px(lo, frac)
        ET.SubElement(svg, "text", x=str(left - 8), y=f"{y + 4:.1f}",
                      **{"text-anchor": "end", "font-size": "11"}).text = f"{frac:g}"
    for m in sorted(set(ms)):
        x, _ = px(m, 0.0)
        ET.SubElement(svg, "text", x=f"{x:.1f}", y=str(top + ph + 16),
                      **{"text-anchor": "middle", "font-size": "11"}).text = str(m)
    ET.SubElement(svg, "text", x=str(left + pw // 2), y=str(H - 10),
                  **{"text-anchor": "middle"}).text = "m"
    for i, (attr, color, label) in enumerate(CURVES):
        pts = [px(r.m, getattr(r, attr) / r.trials) for r in records]
        ET.SubElement(svg, "polyline", fill="none", stroke=color,
                      points=" ".join(f"{x:.2f},{y:.2f}" for x, y in pts),
                      **{"stroke-width": "2", "data-series": attr})
        for x, y in pts:
            ET.SubElement(svg, "circle", cx=f"{x:.2f}", cy=f"{y:.2f}", r="2.5", fill=color)
        ly = top + 20 * i + 10
        ET.SubElement(svg, "line", x1=str(W - right + 15), y1=str(ly), x2=str(W - right + 35),
                      y2=str(ly), stroke=color, **{"stroke-width": "2"})
        ET.SubElement(svg, "text", x=str(W - right + 40), y=str(ly + 4),
                      **{"font-size": "11"}).text = label
    ET.ElementTree(svg).write(path, encoding="utf-8", xml_declaration=True)
    return Path(path)


# --------------------------------------------------------------------------
# instance files


def instance_to_json(inst: ProblemInstance) -> dict:
    return {
        "phi": inst.phi.tolist(),
        "d": inst.op.to_json(),
        "groups": inst.partition.to_json(),
        "x0": inst.x0.tolist(),
    }


def instance_from_json(doc: dict, base_dir=None) -> ProblemInstance:
    """Build an instance; ``x0`` may be replaced by ``"x0_pgm"``, a P2 image path."""
    try:
        phi = np.asarray(doc["phi"], dtype=float)
        if "x0" in doc:
            x0 = np.asarray(doc["x0"], dtype=float)
        else:
            img = Path(doc["x0_pgm"])
            if base_dir is not None and not img.is_absolute():
                img = Path(base_dir) / img
            x0 = read_pgm(img).ravel()
        op = AnalysisOperator.from_json(doc.get("d", {"kind": "identity"}), n=phi.shape[1])
    except KeyError as exc:
        raise InvalidInputError(f"instance is missing field {exc}") from exc
    P = (GroupPartition.from_json(op.p, doc["groups"]) if "groups" in doc
         else op.default_partition())
    return ProblemInstance(phi, op, P, x0)


def load_instance(path) -> ProblemInstance:
    path = Path(path)
    return instance_from_json(json.loads(path.read_text()), path.parent)


def save_instance(inst: ProblemInstance, path):
    Path(path).write_text(json.dumps(instance_to_json(inst)))
