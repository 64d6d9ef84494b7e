"""Campaign harness: angle/SNR/user-count/spacing sweeps and Monte-Carlo runs.

Per-realization seeds derive deterministically from the master seed, methods
are paired on identical realization seeds so ratios are well defined, and
worker results are gathered in task order, so campaign outputs are
byte-reproducible regardless of the worker-pool size (HOLOBEAM_THREADS).
"""

from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .driver import Method, RunResult, optimize
from .scenario import Scenario, load_scenario

logger = logging.getLogger("holobeam.experiments")

CSV_VERSION_LINE = "# holobeam-csv v1"

# Microstrip line on Duroid 5880 (30 mil) at 28 GHz.
MICROSTRIP_ALPHA = 0.6       # [1/m]
MICROSTRIP_BETA = 827.67     # [rad/m]

DESK_ARRAY = (8, 8)
FULL_ARRAY = (16, 16)
DESK_REALIZATIONS = 50
FULL_REALIZATIONS = 1000
DESK_ANGLE_STEP_DEG = 5.0
FULL_ANGLE_STEP_DEG = 1.0


def scenario_template(n_users: int = 1, sinr_db: float = 30.0,
                      waveguide: str | dict = "identity",
                      full_scale: bool = False, n_r: int | None = None,
                      n_c: int | None = None,
                      dx_over_lambda: float = 0.5) -> dict:
    """Desk-scale scenario defaults mirroring the reference setup at 28 GHz."""
    base_r, base_c = FULL_ARRAY if full_scale else DESK_ARRAY
    return {
        "frequency_hz": 28e9,
        "n_r": n_r if n_r is not None else base_r,
        "n_c": n_c if n_c is not None else base_c,
        "dx_over_lambda": dx_over_lambda,
        "dy_over_lambda": 0.5,
        "gain_exponent": 2.0,
        "noise_dbm": -75.0,
        "sinr_db": sinr_db,
        "users": {"count": n_users, "seed": 0},
        "waveguide": waveguide,
    }


def microstrip_waveguide() -> dict:
    return {"alpha": MICROSTRIP_ALPHA, "beta": MICROSTRIP_BETA}


@dataclass
class Campaign:
    template: dict
    methods: list[Method]
    realizations: int = DESK_REALIZATIONS
    master_seed: int = 0
    out_dir: Path = Path("out")
    full_scale: bool = False
    dump_weights: bool = True
    outer_iters: int = 15

    def __post_init__(self):
        self.out_dir = Path(self.out_dir)


@dataclass
class CampaignResult:
    csv_path: Path
    n_rows: int
    n_feasible: int
    rows: list = field(default_factory=list)


def derive_seed(master: int, *key: int) -> int:
    """Deterministic 64-bit seed from the master seed and an index tuple."""
    ss = np.random.SeedSequence([int(master)] + [int(k) for k in key])
    return int(ss.generate_state(1, np.uint64)[0])


def _pool_size() -> int:
    base = min(8, os.cpu_count() or 1)
    env = os.environ.get("HOLOBEAM_THREADS", "").strip()
    if env:
        base = max(1, min(base, int(env)))
    return base


def _run_tasks(fn, tasks):
    """Map fn over tasks on the worker pool, preserving task order."""
    if len(tasks) <= 1 or _pool_size() == 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=_pool_size()) as pool:
        return list(pool.map(fn, tasks))


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [CSV_VERSION_LINE, ",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _users_field(scenario: Scenario) -> str:
    return ";".join(f"{u.rho:.9g}:{math.degrees(u.theta):.9g}"
                    for u in scenario.users)


def _sinrs_field(result: RunResult) -> str:
    if result.achieved_sinrs is None:
        return ""
    return ";".join(f"{s:.12g}" for s in result.achieved_sinrs)


def _dump_run(campaign: Campaign, tag: str, scenario: Scenario,
              result: RunResult) -> None:
    if not campaign.dump_weights or not result.feasible:
        return
    path = campaign.out_dir / "dumps" / f"{tag}_{result.method}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "method": result.method,
        "p_tx_mw": result.p_tx,
        "achieved_sinrs": [float(s) for s in result.achieved_sinrs],
        "status": result.status,
        "weights_constrained": bool(result.weights.constrained),
        "q": result.weights.to_json_obj(),
        "w": result.precoders.to_json_obj(),
        "users": [[u.rho, u.theta] for u in scenario.users],
        "waveguide_mode": scenario.cfg.waveguide_mode,
    }
    path.write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")


def _named_methods(campaign: Campaign, ensure_fd: bool = False) -> list[Method]:
    methods = list(campaign.methods)
    if ensure_fd and not any(m.variant == "fd" for m in methods):
        methods.append(Method(variant="fd"))
    return methods


def run_angle_sweep(campaign: Campaign, rho_fraction: float = 0.5,
                    theta_grid_deg=None) -> CampaignResult:
    """Single-user angle sweep at fixed radius; FD is evaluated at every point
    so the ratio column is always defined."""
    step = FULL_ANGLE_STEP_DEG if campaign.full_scale else DESK_ANGLE_STEP_DEG
    if theta_grid_deg is None:
        theta_grid_deg = np.arange(0.0, 85.0 + 0.5 * step, step)
    methods = [m for m in campaign.methods if m.variant != "fd"]

    def worker(item):
        idx, theta = item
        template = dict(campaign.template)
        template["users"] = [{"rho_over_df": rho_fraction, "theta_deg": float(theta)}]
        scenario = load_scenario(template)
        seed = derive_seed(campaign.master_seed, idx, 1)
        fd_res = optimize(scenario, Method(variant="fd"), T=campaign.outer_iters,
                          seed=seed)
        results = [optimize(scenario, m, T=campaign.outer_iters, seed=seed)
                   for m in methods]
        return scenario, fd_res, results

    tasks = list(enumerate(theta_grid_deg))
    outputs = _run_tasks(worker, tasks)

    rows = []
    n_feasible = 0
    for (idx, theta), (scenario, fd_res, results) in zip(tasks, outputs):
        tag = f"angle{idx:03d}"
        for res in [fd_res] + results:
            ratio = (res.p_tx / fd_res.p_tx
                     if res.feasible and fd_res.feasible else math.nan)
            rows.append([float(theta), res.method, res.p_tx, ratio, res.status])
            n_feasible += int(res.feasible)
            _dump_run(campaign, tag, scenario, res)
    csv_path = campaign.out_dir / "angle_sweep.csv"
    _write_csv(csv_path, ["theta_deg", "method", "p_tx_mw", "ratio_to_fd", "status"],
               rows)
    return CampaignResult(csv_path=csv_path, n_rows=len(rows),
                          n_feasible=n_feasible, rows=rows)


def run_snr_sweep(campaign: Campaign, delta_grid_db=None) -> CampaignResult:
    """Mean transmit power versus the SINR floor, averaged over random user
    draws; methods and grid points share each realization's seed."""
    if delta_grid_db is None:
        delta_grid_db = np.arange(0.0, 41.0, 5.0)
    methods = _named_methods(campaign, ensure_fd=True)
    n_users = int(campaign.template["users"].get("count", 1)) \
        if isinstance(campaign.template["users"], dict) else len(campaign.template["users"])

    def worker(r):
        out = []
        template = dict(campaign.template)
        template["users"] = {"count": n_users,
                             "seed": derive_seed(campaign.master_seed, r, 0)}
        run_seed = derive_seed(campaign.master_seed, r, 1)
        for delta_db in delta_grid_db:
            t2 = dict(template)
            t2["sinr_db"] = float(delta_db)
            scenario = load_scenario(t2)
            for m in methods:
                out.append((float(delta_db), m.name,
                            optimize(scenario, m, T=campaign.outer_iters,
                                     seed=run_seed)))
        return out

    outputs = _run_tasks(worker, list(range(campaign.realizations)))

    sums: dict = {}
    for chunk in outputs:
        for delta_db, name, res in chunk:
            key = (delta_db, name)
            tot, cnt = sums.get(key, (0.0, 0))
            if res.feasible:
                sums[key] = (tot + res.p_tx, cnt + 1)
            else:
                sums.setdefault(key, (tot, cnt))
    rows = []
    n_feasible = 0
    for delta_db in delta_grid_db:
        for m in methods:
            tot, cnt = sums.get((float(delta_db), m.name), (0.0, 0))
            mean = tot / cnt if cnt else math.nan
            rows.append([float(delta_db), m.name, mean, cnt])
            n_feasible += cnt
    csv_path = campaign.out_dir / "snr_sweep.csv"
    _write_csv(csv_path, ["delta_db", "method", "mean_p_tx_mw", "n_feasible"], rows)
    return CampaignResult(csv_path=csv_path, n_rows=len(rows),
                          n_feasible=n_feasible, rows=rows)


def run_monte_carlo(campaign: Campaign) -> CampaignResult:
    """Per-realization results paired across methods by identical seeds."""
    methods = _named_methods(campaign)
    n_users = int(campaign.template["users"].get("count", 2)) \
        if isinstance(campaign.template["users"], dict) else len(campaign.template["users"])

    def worker(r):
        template = dict(campaign.template)
        template["users"] = {"count": n_users,
                             "seed": derive_seed(campaign.master_seed, r, 0)}
        scenario = load_scenario(template)
        run_seed = derive_seed(campaign.master_seed, r, 1)
        results = [optimize(scenario, m, T=campaign.outer_iters, seed=run_seed)
                   for m in methods]
        return scenario, results

    outputs = _run_tasks(worker, list(range(campaign.realizations)))

    rows = []
    n_feasible = 0
    for r, (scenario, results) in enumerate(outputs):
        users = _users_field(scenario)
        for res in results:
            rows.append([r, users, res.method, res.p_tx, _sinrs_field(res),
                         res.status])
            n_feasible += int(res.feasible)
            _dump_run(campaign, f"real{r:04d}", scenario, res)
    csv_path = campaign.out_dir / "monte_carlo.csv"
    _write_csv(csv_path, ["realization", "users", "method", "p_tx_mw",
                          "achieved_sinrs", "status"], rows)
    return CampaignResult(csv_path=csv_path, n_rows=len(rows),
                          n_feasible=n_feasible, rows=rows)


def run_user_count_sweep(campaign: Campaign, user_counts=None) -> CampaignResult:
    """Mean transmit power versus the number of served users (FD included to
    expose the degrees-of-freedom gap)."""
    if user_counts is None:
        user_counts = [1, 2, 4, 6, 8] if campaign.full_scale else [1, 2, 4]
    n_r = int(campaign.template["n_r"])
    for k in user_counts:
        if k > n_r:
            raise ValueError(
                f"{k} users exceed the {n_r} available RF chains (K <= N_r)")
    methods = _named_methods(campaign, ensure_fd=True)

    def worker(item):
        k_users, r = item
        template = dict(campaign.template)
        template["users"] = {"count": int(k_users),
                             "seed": derive_seed(campaign.master_seed, k_users, r, 0)}
        scenario = load_scenario(template)
        run_seed = derive_seed(campaign.master_seed, k_users, r, 1)
        return [(m.name, optimize(scenario, m, T=campaign.outer_iters,
                                  seed=run_seed)) for m in methods]

    tasks = [(k, r) for k in user_counts for r in range(campaign.realizations)]
    outputs = _run_tasks(worker, tasks)

    sums: dict = {}
    for (k_users, _r), chunk in zip(tasks, outputs):
        for name, res in chunk:
            key = (k_users, name)
            tot, cnt = sums.get(key, (0.0, 0))
            if res.feasible:
                sums[key] = (tot + res.p_tx, cnt + 1)
            else:
                sums.setdefault(key, (tot, cnt))
    rows = []
    n_feasible = 0
    for k_users in user_counts:
        for m in methods:
            tot, cnt = sums.get((k_users, m.name), (0.0, 0))
            rows.append([int(k_users), m.name, tot / cnt if cnt else math.nan, cnt])
            n_feasible += cnt
    csv_path = campaign.out_dir / "user_count_sweep.csv"
    _write_csv(csv_path, ["n_users", "method", "mean_p_tx_mw", "n_feasible"], rows)
    return CampaignResult(csv_path=csv_path, n_rows=len(rows),
                          n_feasible=n_feasible, rows=rows)


def run_spacing_sweep(campaign: Campaign, spacings=None) -> CampaignResult:
    """Element-spacing sweep at fixed aperture: the per-microstrip element
    count is recomputed so N_e * d_x stays constant (within one pitch)."""
    if spacings is None:
        spacings = [1.0, 0.5, 0.25, 1.0 / 6.0]
    base_nc = int(campaign.template["n_c"])
    base_dx = float(campaign.template.get("dx_over_lambda", 0.5))
    methods = _named_methods(campaign, ensure_fd=False)

    def worker(item):
        (si, dx), r = item
        n_c = max(1, round(base_nc * base_dx / dx))
        template = dict(campaign.template)
        template["dx_over_lambda"] = float(dx)
        template["n_c"] = n_c
        n_users = int(campaign.template["users"].get("count", 4)) \
            if isinstance(campaign.template["users"], dict) else len(campaign.template["users"])
        template["users"] = {"count": n_users,
                             "seed": derive_seed(campaign.master_seed, si, r, 0)}
        scenario = load_scenario(template)
        run_seed = derive_seed(campaign.master_seed, si, r, 1)
        return n_c, [(m.name, optimize(scenario, m, T=campaign.outer_iters,
                                       seed=run_seed)) for m in methods]

    tasks = [((si, dx), r) for si, dx in enumerate(spacings)
             for r in range(campaign.realizations)]
    outputs = _run_tasks(worker, tasks)

    sums: dict = {}
    counts_by_spacing: dict = {}
    for (key_s, _r), (n_c, chunk) in zip(tasks, outputs):
        si, dx = key_s
        counts_by_spacing[si] = n_c
        for name, res in chunk:
            key = (si, name)
            tot, cnt = sums.get(key, (0.0, 0))
            if res.feasible:
                sums[key] = (tot + res.p_tx, cnt + 1)
            else:
                sums.setdefault(key, (tot, cnt))
    rows = []
    n_feasible = 0
    for si, dx in enumerate(spacings):
        for m in methods:
            tot, cnt = sums.get((si, m.name), (0.0, 0))
            rows.append([float(dx), counts_by_spacing[si], m.name,
                         tot / cnt if cnt else math.nan, cnt])
            n_feasible += cnt
    csv_path = campaign.out_dir / "spacing_sweep.csv"
    _write_csv(csv_path, ["dx_over_lambda", "n_elements", "method",
                          "mean_p_tx_mw", "n_feasible"], rows)
    return CampaignResult(csv_path=csv_path, n_rows=len(rows),
                          n_feasible=n_feasible, rows=rows)
