"""
Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -s`` or
``python tests/test_acceptance.py``. The optional COIL20 check looks for
the CSV named by ``OCCAFS_COIL20`` (default ``data/COIL20.csv`` under the
repository root) and is skipped when it is absent.
"""
import json
import os
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import random_labels, random_problem, random_stiefel  # noqa: E402
from occafs.baselines import optimal_gamma, peb_objective, pebfs_solve  # noqa: E402
from occafs.datasets import (  # noqa: E402
    Dataset,
    inject_noise_features,
    load_csv,
    make_planted_dataset,
)
from occafs.linalg import orthonormalize_against, top_k_symmetric_eigvecs  # noqa: E402
from occafs.locg import _reduce, locg_solve, reduced_nepv_matrix, reduced_objective  # noqa: E402
from occafs.model import (  # noqa: E402
    ProblemData,
    assemble_problem,
    evaluate,
    nepv_matrix,
    objective,
    row_norm_bounds_check,
)
from occafs.pipeline import (  # noqa: E402
    one_nn_evaluate,
    random_split,
    rank_features,
    run_experiment,
    select_top_q,
)
from occafs.scf import SolverConfig, initial_point, monotone_slack, scf_solve  # noqa: E402

REPO = Path(__file__).resolve().parents[1]
KKT_TOL = SolverConfig().kkt_tol

# Solver runs of criteria 3-5, inspected again by criteria 6 and 7.
RUNS = []


def verdict(capsys, number, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
    if capsys is None:
        print(line)
    else:
        with capsys.disabled():
            print("\n" + line)
    assert ok, line


def solve_recorded(solver, pd, cfg=None, P0=None, tag=""):
    """Run a solver, keeping every iterate for the structural checks."""
    iterates = []
    P, trace = solver(pd, cfg, P0=P0,
                      callback=lambda it, P: iterates.append(P.copy()))
    RUNS.append({"tag": tag, "pd": pd, "P": P, "trace": trace,
                 "iterates": iterates, "cfg": cfg or SolverConfig()})
    return P, trace


def central_fd(pd, P, step=1e-6):
    G = np.empty_like(P)
    for idx in np.ndindex(*P.shape):
        E = np.zeros_like(P)
        E[idx] = step
        G[idx] = (objective(pd, P + E) - objective(pd, P - E)) / (2 * step)
    return G


def test_c01_gradient(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for i in range(50):
        k = int(rng.integers(2, 6))
        n = int(rng.integers(k, 31))
        pd = random_problem(rng, n, k, alpha=(0.0, 0.1, 1.0)[i % 3])
        P = random_stiefel(rng, pd.n, pd.k)
        G = evaluate(pd, P).euclid_grad
        worst = max(worst, np.linalg.norm(G - central_fd(pd, P)) / np.linalg.norm(G))
    dt = time.perf_counter() - t0
    verdict(capsys, 1, worst <= 1e-6 and dt < 10,
            f"max rel FD error {worst:.2e} (<= 1e-6), {dt:.1f} s (< 10 s)")


def test_c02_nepv_identity(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    worst = 0.0
    for i in range(100):
        k = int(rng.integers(2, 6))
        n = int(rng.integers(k, 40))
        pd = random_problem(rng, n, k, alpha=(0.0, 0.1, 1.0)[i % 3])
        P = random_stiefel(rng, pd.n, pd.k)
        ev = evaluate(pd, P)
        H = nepv_matrix(pd, P)
        res = np.linalg.norm(H @ P - ev.euclid_grad - P @ (2 * ev.h * pd.D.T @ P))
        scale = np.linalg.norm(H) * np.linalg.norm(P) + np.linalg.norm(ev.euclid_grad)
        worst = max(worst, res / scale)
    dt = time.perf_counter() - t0
    verdict(capsys, 2, worst <= 1e-10 and dt < 5,
            f"max scaled identity residual {worst:.2e} (<= 1e-10), {dt:.1f} s (< 5 s)")


def test_c03_monotonicity(capsys):
    t0 = time.perf_counter()
    bad = []
    for seed in range(20):
        rng = np.random.default_rng(300 + seed)
        alpha = (0.01, 0.1, 1.0)[seed % 3]
        pd = assemble_problem(rng.standard_normal((50, 200)),
                              random_labels(rng, 200, 5), alpha=alpha)
        cfg = SolverConfig(seed=seed)
        for name, solver in (("nepv", scf_solve), ("accnepv", locg_solve)):
            _, tr = solve_recorded(solver, pd, cfg, tag=f"c3-{name}-{seed}")
            f = tr.objectives
            mono = np.all(np.diff(f) >= -monotone_slack(f[:-1]))
            done = (tr.termination == "converged" and tr.final.kkt_residual <= 1e-5) \
                or tr.termination == "stagnated"
            if not (mono and done):
                bad.append((seed, name, tr.termination))
    dt = time.perf_counter() - t0
    verdict(capsys, 3, not bad and dt < 60,
            f"40 runs, {len(bad)} non-monotone or unterminated {bad[:3]}, "
            f"{dt:.1f} s (< 60 s)")


def test_c04_closed_form(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(404)
    worst = 0.0
    for _ in range(5):
        n, k = int(rng.integers(5, 40)), int(rng.integers(1, 5))
        D = rng.standard_normal((n, k))
        pd = ProblemData(np.eye(n), D, alpha=0.0)
        best = np.linalg.svd(D, compute_uv=False).sum() ** 2 / k
        for solver in (scf_solve, locg_solve):
            _, tr = solve_recorded(solver, pd, tag="c4")
            worst = max(worst, abs(tr.final.objective - best) / best)
    dt = time.perf_counter() - t0
    verdict(capsys, 4, worst <= 1e-8 and dt < 10,
            f"max rel gap to ||D||_tr^2/k {worst:.2e} (<= 1e-8), {dt:.1f} s (< 10 s)")


def test_c05_solver_equivalence(capsys):
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(10):
        rng = np.random.default_rng(500 + seed)
        pd = assemble_problem(rng.standard_normal((100, 400)),
                              random_labels(rng, 400, 4), alpha=0.1)
        cfg = SolverConfig(seed=seed)
        P0 = initial_point(pd, cfg)
        _, t1 = solve_recorded(scf_solve, pd, cfg, P0, tag="c5-nepv")
        _, t2 = solve_recorded(locg_solve, pd, cfg, P0, tag="c5-accnepv")
        f1, f2 = t1.final.objective, t2.final.objective
        worst = max(worst, abs(f1 - f2) / abs(f1))
    dt = time.perf_counter() - t0
    verdict(capsys, 5, worst <= 1e-6 and dt < 60,
            f"max rel objective difference {worst:.2e} (<= 1e-6), {dt:.1f} s (< 60 s)")


def test_c06_row_norm_bounds(capsys):
    if not RUNS:
        pytest.skip("needs the runs of criteria 3-5")
    n_iter, bad = 0, 0
    for run in RUNS:
        for P in run["iterates"]:
            n_iter += 1
            bad += not row_norm_bounds_check(P, slack=1e-10).ok
    verdict(capsys, 6, bad == 0,
            f"{bad} violations over {n_iter} iterates of {len(RUNS)} runs")


def test_c07_cone_and_kkt_structure(capsys):
    conv = [r for r in RUNS if r["trace"].termination == "converged"]
    if not conv:
        pytest.skip("needs converged runs from criteria 3-5")
    worst_psd = worst_sym = worst_eig = 0.0
    for run in conv:
        pd, P, tol = run["pd"], run["P"], run["cfg"].kkt_tol
        nD = np.linalg.norm(pd.D)
        M = P.T @ pd.D
        worst_psd = max(worst_psd, -np.linalg.eigvalsh(0.5 * (M + M.T)).min() / nD)
        worst_sym = max(worst_sym, np.linalg.norm(M - M.T) / (10 * tol * nD))
        H = nepv_matrix(pd, P)
        _, top = top_k_symmetric_eigvecs(H, pd.k)
        inner = np.sort(np.linalg.eigvalsh(P.T @ H @ P))[::-1]
        worst_eig = max(worst_eig, np.abs(inner - top).max() / np.linalg.norm(H, 2))
    ok = worst_psd <= 1e-8 and worst_sym <= 1 and worst_eig <= 1e-6
    verdict(capsys, 7, ok,
            f"{len(conv)} converged points: -min eig(P^T D)/||D|| {worst_psd:.1e} "
            f"(<= 1e-8), asym/(10 tol ||D||) {worst_sym:.1e} (<= 1), "
            f"eig gap/||H||_2 {worst_eig:.1e} (<= 1e-6)")


def test_c08_reduced_congruence(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(808)
    worst_h = worst_f = 0.0
    for i in range(50):
        k = int(rng.integers(2, 6))
        n = int(rng.integers(3 * k, 40))
        pd = random_problem(rng, n, k, alpha=(0.0, 0.1, 1.0)[i % 3])
        m = 3 * k
        P = random_stiefel(rng, n, k)
        W = orthonormalize_against(P, rng.standard_normal((n, m - k)))
        rp = _reduce(pd, W, pd.A @ W)
        Z = random_stiefel(rng, W.shape[1], k)
        ref = W.T @ nepv_matrix(pd, W @ Z) @ W
        worst_h = max(worst_h, np.linalg.norm(reduced_nepv_matrix(rp, Z) - ref)
                      / np.linalg.norm(ref))
        f = objective(pd, W @ Z)
        worst_f = max(worst_f, abs(reduced_objective(rp, Z) - f) / abs(f))
    dt = time.perf_counter() - t0
    verdict(capsys, 8, worst_h <= 1e-10 and worst_f <= 1e-12 and dt < 10,
            f"H congruence {worst_h:.1e} (<= 1e-10), objective {worst_f:.1e} "
            f"(<= 1e-12), {dt:.1f} s (< 10 s)")


def acceleration_instance():
    """
    n = 2000, k = 5: 1000 base features plus 1000 injected noise features.

    Base features are put on the noise scale (std 0.01/sqrt(12)) so that no
    block of nearly null directions dominates A; plain SCF then converges
    within the time budget. 8000 samples keep A well conditioned.
    """
    base = make_planted_dataset(1000, 50, 8000, n_classes=5, separation=1.0,
                                seed=1)
    base = Dataset(base.X * (0.01 / np.sqrt(12.0)), base.labels)
    return inject_noise_features(base, 1, seed=0)


def test_c09_acceleration(capsys):
    t0 = time.perf_counter()
    ds = acceleration_instance()
    pd = assemble_problem(ds.X, ds.labels, alpha=0.1)
    del ds
    cfg = SolverConfig(max_iter=600)
    P0 = initial_point(pd, cfg)
    s = time.perf_counter()
    _, t_locg = locg_solve(pd, cfg, P0=P0)
    sec_locg = time.perf_counter() - s
    s = time.perf_counter()
    _, t_scf = scf_solve(pd, cfg, P0=P0)
    sec_scf = time.perf_counter() - s
    f1, f2 = t_scf.final.objective, t_locg.final.objective
    rel = abs(f1 - f2) / abs(f1)
    dt = time.perf_counter() - t0
    ok = sec_locg < sec_scf and rel <= 1e-6 and dt < 600
    verdict(capsys, 9, ok,
            f"n={pd.n}: accnepv {sec_locg:.1f} s ({t_locg.n_iter} it, "
            f"{t_locg.termination}) vs nepv {sec_scf:.1f} s ({t_scf.n_iter} it, "
            f"{t_scf.termination}), rel diff {rel:.1e} (<= 1e-6), "
            f"total {dt:.0f} s (< 600 s)")


def test_c10_feature_recovery(capsys):
    t0 = time.perf_counter()
    recall, gain = [], []
    alpha = 10.0
    for seed in range(10):
        ds = make_planted_dataset(200, 10, 400, n_classes=2, separation=1.0,
                                  seed=seed)
        planted = set(ds.provenance["informative"])
        r = rank_features(ds, alpha)
        recall.append(len(planted & set(r.order[:10].tolist())) / 10)
        rng = np.random.default_rng(1000 + seed)
        tr, te = random_split(ds.labels, 0.6, rng)
        train, test = ds.samples(tr), ds.samples(te)
        sel = select_top_q(rank_features(train, alpha), 10)
        acc = one_nn_evaluate(train, test, sel)
        rand = np.mean([one_nn_evaluate(train, test,
                                        rng.choice(200, 10, replace=False))
                        for _ in range(20)])
        gain.append(acc - rand)
    dt = time.perf_counter() - t0
    ok = np.mean(recall) >= 0.9 and np.mean(gain) >= 0.15 and dt < 300
    verdict(capsys, 10, ok,
            f"mean recall@10 {np.mean(recall):.2f} (>= 0.90), mean 1-NN gain "
            f"over random-10 {np.mean(gain):.3f} (>= 0.15), alpha={alpha}, "
            f"{dt:.0f} s (< 300 s)")


def test_c11_protocol_shape(capsys):
    ds = make_planted_dataset(200, 10, 400, n_classes=2, separation=1.0, seed=0)
    a = run_experiment(ds, master_seed=7)
    b = run_experiment(ds, master_seed=7)
    agg = a.aggregate()
    shape_ok = (a.q_grid == [10, 20, 30, 40, 50] and a.repeats == 10
                and set(agg) == {"occa-fs", "peb-fs", "ttest"}
                and all(len(agg[m]) == 5 for m in agg)
                and len(a.records) == 3 * 5 * 10
                and a.config["split_frac"] == 0.6)
    same = json.dumps(a.to_dict(include_timing=False)) == \
        json.dumps(b.to_dict(include_timing=False))
    verdict(capsys, 11, shape_ok and same,
            f"3 methods x 5 q x 10 repeats table, deterministic={same}\n"
            + a.format_table())


def test_c12_pebfs_contrast(capsys):
    witnesses, occa_increase, worst = 0, 0, np.inf
    for seed in range(50):
        rng = np.random.default_rng(seed)
        n, k = int(rng.integers(10, 40)), int(rng.integers(2, 5))
        p = int(rng.integers(2 * n, 4 * n))
        alpha = (0.01, 0.1, 1.0)[seed % 3]
        pd = assemble_problem(rng.standard_normal((n, p)),
                              random_labels(rng, p, k), alpha=alpha)
        cfg = SolverConfig(seed=seed)
        _, tp = pebfs_solve(pd, cfg)
        witnesses += bool(np.any(np.diff(tp.objectives) > 0))
        P_occa = None
        for solver in (scf_solve, locg_solve):
            P, tr = solver(pd, cfg)
            occa_increase += not tr.is_monotone()
            if solver is locg_solve:
                P_occa = P
        # common scale: -g(P, gamma*(P))
        f_occa = -peb_objective(pd, P_occa, optimal_gamma(pd, P_occa))
        worst = min(worst, f_occa - (-tp.final.objective))
    ok = witnesses >= 1 and occa_increase == 0 and worst >= -1e-8
    verdict(capsys, 12, ok,
            f"PEB-FS non-monotone on {witnesses}/50, OCCA non-monotone on "
            f"{occa_increase}/100, min(-g_occa - (-g_peb)) = {worst:.3e} (>= -1e-8)")


def coil20_path():
    return Path(os.environ.get("OCCAFS_COIL20", REPO / "data" / "COIL20.csv"))


def test_c13_coil20(capsys):
    path = coil20_path()
    if not path.is_file():
        with capsys.disabled():
            print(f"\n[SKIP] criterion 13: COIL20 CSV not found at {path}")
        pytest.skip("COIL20 CSV not supplied")
    ds = load_csv(path)
    res = run_experiment(ds, methods=["occa-fs"], q_grid=[30], alpha=0.01,
                         rank_check="warn")
    mean = res.aggregate()["occa-fs"][30][0]
    verdict(capsys, 13, abs(mean - 0.9630) <= 0.05,
            f"COIL20 OCCA-FS q=30 mean accuracy {mean:.4f} (0.9630 +- 0.05)")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
