"""End-to-end pipelines and Table-shaped reports."""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .fw import fw_gaussian, make_rng
from .graph import (
    SignedGraph,
    WeightedGraph,
    build_cost_maxagree,
    build_cost_maxkcut,
    jaccard_signed_graph,
    parse_gset,
    signed_from_jsonl,
)
from .memory import WordLedger
from .penalty import MAXAGREE, MAXKCUT, PenaltyConfig
from .rounding import agree_value, cut_value, round_groups
from .sparsifier import sparsify

KCUT_EPS_MAX = 1 / 5
AGREE_EPS_MAX = 1 / 7


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    kind: str
    input: str | None = None
    input_format: str = "gset"  # gset or signed (jsonl)
    jaccard: bool = False
    jaccard_delta: float = 0.05
    k: int = 2
    samples: int = 2  # sign-pattern samples per Max-Agree rounding
    eps: float = 0.05
    eta: float = 0.5
    p: float | None = None
    max_iters: int | None = None
    reps: int = 10
    seed: int = 0
    tau: float | None = None
    sparsify_c: float = 4.0
    shadow: bool = False
    out: str | None = None
    dataset: str | None = None
    strict_eps: bool = True  # False runs outside the range where the guarantees hold

    def validate(self) -> "RunConfig":
        if self.kind not in (MAXKCUT, MAXAGREE):
            raise ConfigError(f"unknown problem kind {self.kind!r}")
        hi = KCUT_EPS_MAX if self.kind == MAXKCUT else AGREE_EPS_MAX
        if not 0 < self.eps < (hi if self.strict_eps else 1):
            raise ConfigError(f"eps must lie in (0, {hi:.4g}) for {self.kind}" if self.strict_eps
                              else "eps must lie in (0, 1)")
        if not 0 < self.eta < 1:
            raise ConfigError("eta must lie in (0, 1)")
        if self.kind == MAXKCUT and self.k < 2:
            raise ConfigError("k must be >= 2")
        if self.kind == MAXAGREE and self.samples not in (2, 3):
            raise ConfigError("samples must be 2 or 3")
        if self.reps < 1:
            raise ConfigError("reps must be >= 1")
        if self.p is not None and not 0 < self.p <= 0.5:
            raise ConfigError("p must lie in (0, 1/2]")
        if self.max_iters is not None and self.max_iters < 0:
            raise ConfigError("max_iters must be nonnegative")
        if self.tau is not None and not 0 < self.tau < 1:
            raise ConfigError("tau must lie in (0, 1)")
        if self.input_format not in ("gset", "signed"):
            raise ConfigError("input_format must be 'gset' or 'signed'")
        if self.kind == MAXKCUT and self.input_format != "gset":
            raise ConfigError("Max-k-Cut reads GSet input")
        return self


def _coerce(f: dataclasses.Field, raw: str):
    t = str(f.type)
    s = raw.strip()
    if s.lower() in ("none", "") and "None" in t:
        return None
    if t.startswith("bool"):
        if s.lower() in ("1", "true", "yes", "on"):
            return True
        if s.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{f.name}: expected a boolean, got {raw!r}")
    try:
        if t.startswith("int"):
            return int(s)
        if t.startswith("float"):
            return float(s)
    except ValueError:
        raise ConfigError(f"{f.name}: cannot parse {raw!r}") from None
    return s


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    fields = {f.name: f for f in dataclasses.fields(RunConfig)}
    out = {}
    for no, ln in enumerate(text.splitlines(), start=1):
        s = ln.split("#", 1)[0].strip()
        if not s:
            continue
        if "=" not in s:
            raise ConfigError(f"config line {no}: expected 'key = value'")
        key, val = (x.strip() for x in s.split("=", 1))
        key = key.replace("-", "_")
        if key not in fields:
            raise ConfigError(f"config line {no}: unknown key {key!r}")
        out[key] = _coerce(fields[key], val)
    return out


def load_config(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read())


@dataclass
class RunReport:
    dataset: str
    kind: str
    V: int
    E: int
    Eplus: int
    Eminus: int
    k: int
    iterations: int
    converged: bool
    infeas: float
    sdp_value: float
    best_value: float
    AR: float
    memory_words: int
    seed: int
    wall_ms: float
    eps: float = math.nan
    reps: int = 0
    final_gap: float = math.nan
    lanczos_iters: int = 0
    mean_value: float = math.nan
    values: list = field(default_factory=list)
    best_labels: list = field(default_factory=list)
    solver_edges: int = 0
    iteration_bound: int = 0
    reference_iterations: float = math.nan

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        names = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})

    def comparable(self) -> dict:
        d = self.to_dict()
        d.pop("wall_ms")
        return d


def csv_columns(kind: str) -> list[str]:
    sizes = ["Eplus", "Eminus"] if kind == MAXAGREE else ["E"]
    return ["dataset", "V", *sizes, "k", "iterations", "infeas", "sdp_value", "best_value", "AR",
            "memory_words", "seed", "wall_ms"]


def emit_report(reports, csv_path=None, json_path=None) -> tuple[str, str]:
    """CSV with the fixed column set plus a JSON list mirroring every field."""
    reports = list(reports)
    if not reports:
        raise ValueError("need at least one report")
    kinds = {r.kind for r in reports}
    if len(kinds) != 1:
        raise ValueError("cannot mix Max-k-Cut and Max-Agree reports in one table")
    cols = csv_columns(kinds.pop())
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in reports:
        d = r.to_dict()
        w.writerow([repr(d[c]) if isinstance(d[c], float) else d[c] for c in cols])
    csv_text = buf.getvalue()
    json_text = json.dumps([r.to_dict() for r in reports], indent=1)
    if csv_path:
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(csv_text)
    if json_path:
        with open(json_path, "w", encoding="utf-8") as fh:
            fh.write(json_text)
    return csv_text, json_text


def read_reports(path) -> list[RunReport]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if isinstance(data, dict):
        data = [data]
    return [RunReport.from_dict(d) for d in data]


# ---------------------------------------------------------------------------
# pipelines
# ---------------------------------------------------------------------------

def _read_text(path: str) -> str:
    if not os.path.exists(path):
        raise FileNotFoundError(f"input file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _dataset(cfg: RunConfig) -> str:
    if cfg.dataset:
        return cfg.dataset
    if cfg.input:
        return os.path.splitext(os.path.basename(cfg.input))[0]
    return "graph"


def _track_cost(ledger: WordLedger, cost) -> None:
    for a in (cost.diag, cost.rows, cost.cols, cost.vals):
        ledger.track(a)


def run_maxkcut(cfg: RunConfig, graph: WeightedGraph | None = None) -> RunReport:
    """Solve, repair and FJ-round ``reps`` independent groups of k samples."""
    cfg.validate()
    if cfg.kind != MAXKCUT:
        raise ConfigError("run_maxkcut needs kind = maxkcut")
    t0 = time.perf_counter()
    if graph is None:
        if not cfg.input:
            raise ConfigError("no input graph")
        graph = parse_gset(_read_text(cfg.input))
    rng = make_rng(cfg.seed)
    solve_on = graph
    if cfg.tau is not None:
        solve_on = sparsify(graph, cfg.tau, cfg.sparsify_c, rng)
    cost = build_cost_maxkcut(solve_on, cfg.k)
    pc = PenaltyConfig.for_maxkcut(cost, cfg.k, cfg.eps, cfg.eta)
    ledger = WordLedger(graph.n, allow_dense=cfg.shadow)
    _track_cost(ledger, cost)
    z, v, stats = fw_gaussian(cost, pc, cfg.k * cfg.reps, max_iters=cfg.max_iters, seed=rng,
                              shadow=cfg.shadow, p=cfg.p, ledger=ledger)
    ledger.alloc(z.z.shape, bounded_rows=True)  # repaired copy of the samples
    res = round_groups(z, v, pc.lower_bound, cfg.k, rng, "fj", lambda lab: cut_value(graph, lab))
    sdp = cost.inner(v.diag, v.edge_vals)
    return RunReport(
        dataset=_dataset(cfg), kind=MAXKCUT, V=graph.n, E=graph.m, Eplus=graph.m, Eminus=0, k=cfg.k,
        iterations=stats.iterations, converged=stats.converged, infeas=stats.infeasibility,
        sdp_value=sdp, best_value=res.best_value, AR=_ratio(res.best_value, sdp),
        memory_words=ledger.peak, seed=cfg.seed, wall_ms=1e3 * (time.perf_counter() - t0),
        eps=cfg.eps, reps=cfg.reps, final_gap=stats.final_gap, lanczos_iters=stats.lanczos_iters,
        mean_value=float(np.mean(res.values)), values=res.values.tolist(),
        best_labels=res.best_labels.tolist(), solver_edges=solve_on.m,
        iteration_bound=pc.iteration_bound(), reference_iterations=pc.reference_iterations(),
    )


def agreement_sdp_value(sg: SignedGraph, diag: np.ndarray, edge_vals: np.ndarray) -> float:
    """sum w+ X_ij + sum w- (X_ii + X_jj - 2 X_ij) / 2 over the tracked entries.

    This is half of <L_{G-} + W+, X> and equals the agreement value when X is
    the Gram matrix of a clustering.
    """
    mp = sg.plus.m
    p, m = sg.plus, sg.minus
    xp, xm = edge_vals[:mp], edge_vals[mp:]
    return float(p.weights @ xp + 0.5 * (m.weights @ (diag[m.rows] + diag[m.cols] - 2.0 * xm)))


def _sparsify_signed(sg: SignedGraph, tau, c, rng) -> SignedGraph:
    plus = sparsify(sg.plus, tau, c, rng) if sg.plus.m else sg.plus
    minus = sparsify(sg.minus, tau, c, rng) if sg.minus.m else sg.minus
    return SignedGraph(sg.n, plus, minus)


def load_signed(cfg: RunConfig) -> SignedGraph:
    if not cfg.input:
        raise ConfigError("no input graph")
    text = _read_text(cfg.input)
    if cfg.input_format == "signed":
        return signed_from_jsonl(text)
    g = parse_gset(text)
    if not cfg.jaccard:
        raise ConfigError("GSet input for Max-Agree needs the Jaccard conversion (jaccard = true)")
    return jaccard_signed_graph(g, cfg.jaccard_delta)


def run_maxagree(cfg: RunConfig, graph: SignedGraph | None = None) -> RunReport:
    """Solve, repair and sign-pattern-round ``reps`` independent groups of samples."""
    cfg.validate()
    if cfg.kind != MAXAGREE:
        raise ConfigError("run_maxagree needs kind = maxagree")
    t0 = time.perf_counter()
    sg = graph if graph is not None else load_signed(cfg)
    rng = make_rng(cfg.seed)
    solve_on = sg if cfg.tau is None else _sparsify_signed(sg, cfg.tau, cfg.sparsify_c, rng)
    cost, delta = build_cost_maxagree(solve_on)
    pc = PenaltyConfig.for_maxagree(cost, delta, cfg.eps, cfg.eta)
    ledger = WordLedger(sg.n, allow_dense=cfg.shadow)
    _track_cost(ledger, cost)
    z, v, stats = fw_gaussian(cost, pc, cfg.samples * cfg.reps, max_iters=cfg.max_iters, seed=rng,
                              shadow=cfg.shadow, p=cfg.p, ledger=ledger)
    ledger.alloc(z.z.shape, bounded_rows=True)
    res = round_groups(z, v, pc.lower_bound, cfg.samples, rng, "sign", lambda lab: agree_value(sg, lab))
    sdp = agreement_sdp_value(solve_on, v.diag, v.edge_vals)
    return RunReport(
        dataset=_dataset(cfg), kind=MAXAGREE, V=sg.n, E=sg.m, Eplus=sg.plus.m, Eminus=sg.minus.m,
        k=cfg.samples, iterations=stats.iterations, converged=stats.converged, infeas=stats.infeasibility,
        sdp_value=sdp, best_value=res.best_value, AR=_ratio(res.best_value, sdp),
        memory_words=ledger.peak, seed=cfg.seed, wall_ms=1e3 * (time.perf_counter() - t0),
        eps=cfg.eps, reps=cfg.reps, final_gap=stats.final_gap, lanczos_iters=stats.lanczos_iters,
        mean_value=float(np.mean(res.values)), values=res.values.tolist(),
        best_labels=res.best_labels.tolist(), solver_edges=solve_on.m,
        iteration_bound=pc.iteration_bound(), reference_iterations=pc.reference_iterations(),
    )


def _ratio(best: float, sdp: float) -> float:
    return best / sdp if sdp != 0 else math.nan


def run(cfg: RunConfig, graph=None) -> RunReport:
    return (run_maxkcut if cfg.kind == MAXKCUT else run_maxagree)(cfg, graph)
