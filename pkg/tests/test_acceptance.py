"""Exit criteria for the package, one test per criterion.

Each test prints a PASS/FAIL line; the lines are repeated in the pytest
terminal summary under "acceptance criteria".
"""

import subprocess
import sys
import time

import numpy as np

import oracles
from ftcm import (
    ClusterAssignment,
    DensityPeakTokenClustering,
    FtcmConfig,
    InteractionWeights,
    Rng,
    assign_tokens,
    cmerge,
    cmerge_grad,
    distance_score,
    knn_graph,
    local_density,
    pairwise_distances,
    run_stages,
    select_centers,
    token_interaction,
)
from ftcm.bench import BENCH_COLUMNS
from ftcm.cli import build_parser
from ftcm.clustering import DensityResult
from ftcm.pipeline import stage_counts


def _library_run(X, k_fuzzy, k_scs, ratio):
    D = pairwise_distances(X)
    rho = local_density(knn_graph(D, k_fuzzy), k_fuzzy)
    delta = distance_score(D, rho)
    sel = select_centers(DensityResult.from_parts(rho, delta), ratio, X.shape[0])
    asg = assign_tokens(knn_graph(D, k_scs), sel)
    return rho, delta, asg


def test_oracle_equivalence(criterion):
    with criterion(1, "oracle equivalence on 200 random instances (exact centers/assignments, rho/delta <= 1e-12, < 10 s)"):
        rng = np.random.default_rng(1)
        start = time.perf_counter()
        worst = 0.0
        for _ in range(200):
            n, c = int(rng.integers(8, 65)), int(rng.integers(2, 17))
            k_fuzzy, k_scs = int(rng.integers(1, 8)), int(rng.integers(1, 8))
            X = rng.normal(size=(n, c))
            rho, delta, asg = _library_run(X, k_fuzzy, k_scs, 4)
            r_ref, d_ref, c_ref, a_ref = oracles.dpc_fknn(X.tolist(), k_fuzzy, k_scs, 4)
            assert asg.centers.tolist() == c_ref
            assert asg.assign.tolist() == a_ref
            worst = max(worst, np.max(np.abs(rho - r_ref)), np.max(np.abs(delta - d_ref)))
        elapsed = time.perf_counter() - start
        print(f"max |rho/delta - oracle| = {worst:.2e}, {elapsed:.2f} s")
        assert worst <= 1e-12
        assert elapsed < 10.0


def _batched_merge_loss(X, P, labels, m, G):
    """Direct evaluation of the merge formula for a batch of (X, P) pairs.

    ``X`` and ``P`` have shape (batch, n, c). No max shift: inputs are O(1).
    """
    member = np.zeros((m, labels.shape[0]))
    member[labels, np.arange(labels.shape[0])] = 1.0
    e = np.exp(P)
    y = np.einsum("mn,bnc->bmc", member, e * X) / np.einsum("mn,bnc->bmc", member, e)
    return np.einsum("bmc,mc->b", y, G)


def _fd_gradient(X, P, labels, m, G, wrt, h=1e-5):
    n, c = X.shape
    eye = np.eye(n * c).reshape(n * c, n, c) * h
    base_x = np.broadcast_to(X, (n * c, n, c))
    base_p = np.broadcast_to(P, (n * c, n, c))
    if wrt == "x":
        plus = _batched_merge_loss(base_x + eye, base_p, labels, m, G)
        minus = _batched_merge_loss(base_x - eye, base_p, labels, m, G)
    else:
        plus = _batched_merge_loss(base_x, base_p + eye, labels, m, G)
        minus = _batched_merge_loss(base_x, base_p - eye, labels, m, G)
    return ((plus - minus) / (2 * h)).reshape(n, c)


def _rel_err(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-300)


def test_gradient_check(criterion):
    with criterion(2, "cmerge gradients vs central differences (h=1e-5), rel. error < 1e-4 on 60 instances, < 5 s"):
        rng = np.random.default_rng(2)
        start = time.perf_counter()
        worst = 0.0
        for _ in range(60):
            n, c = int(rng.integers(2, 33)), int(rng.integers(1, 9))
            X, P = rng.normal(size=(n, c)), rng.normal(size=(n, c))
            m = max(1, n // 4)
            centers = np.sort(rng.choice(n, size=m, replace=False))
            labels = rng.integers(0, m, size=n)
            labels[centers] = np.arange(m)
            asg = ClusterAssignment(centers=centers, assign=labels)
            G = rng.normal(size=(m, c))
            gx, gp = cmerge_grad(X, P, asg, G)
            worst = max(
                worst,
                _rel_err(gx, _fd_gradient(X, P, labels, m, G, "x")),
                _rel_err(gp, _fd_gradient(X, P, labels, m, G, "p")),
            )
        elapsed = time.perf_counter() - start
        print(f"worst relative error {worst:.2e}, {elapsed:.2f} s")
        assert worst < 1e-4
        assert elapsed < 5.0


def _check_invariants(rng):
    n, c = int(rng.integers(2, 33)), int(rng.integers(1, 9))
    # Quantised features create distance and density ties on purpose.
    X = np.round(rng.normal(size=(n, c)), int(rng.integers(0, 3)))
    k = int(rng.integers(1, 8))
    D = pairwise_distances(X)
    g = knn_graph(D, min(k, n - 1))

    assert not np.any(g.neighbors == np.arange(n)[:, None])
    for i in range(n):
        keys = list(zip(g.neighbor_dists[i].tolist(), g.neighbors[i].tolist()))
        assert keys == sorted(keys) and len(set(keys)) == g.k

    rho = local_density(g, g.k)
    delta = distance_score(D, rho)
    top = rho.max()
    for i in np.flatnonzero(rho == top):
        assert delta[i] == D[i].max()
    for i in np.flatnonzero(rho < top):
        assert delta[i] == D[i, rho > rho[i]].min()

    sel = select_centers(DensityResult.from_parts(rho, delta), 4, n)
    asg = assign_tokens(g, sel).validate()
    assert asg.assign.shape == (n,)
    assert asg.assign[sel.centers].tolist() == list(range(sel.centers.size))

    P = rng.normal(size=(n, c)) * 4
    y = cmerge(X, P, asg).merged
    shifted = P + rng.normal(size=asg.n_clusters)[asg.assign][:, None]
    assert np.max(np.abs(cmerge(X, shifted, asg).merged - y)) <= 1e-12
    for cl in range(asg.n_clusters):
        xs = X[asg.members(cl)]
        assert np.all(y[cl] >= xs.min(axis=0) - 1e-12) and np.all(y[cl] <= xs.max(axis=0) + 1e-12)

    w = InteractionWeights.random(c, Rng(int(rng.integers(2**63))))
    _, attn = token_interaction(y, X, P, w, return_attention=True)
    assert np.all(np.abs(attn.sum(axis=1) - 1.0) < 1e-9)


def test_invariant_suite(criterion):
    with criterion(3, "invariant suite on 1000 random instances"):
        rng = np.random.default_rng(3)
        for _ in range(1000):
            _check_invariants(rng)


def test_cascade(criterion):
    with criterion(4, "64x64 input, patch 4, ratio 4: 256 -> 64 -> 16 -> 4 with partitioned origins"):
        img = np.random.default_rng(4).random((64, 64))
        cfg = FtcmConfig(patch=4, ratio=4, stages=3)
        res = run_stages(img, cfg)
        counts = [r.tokens.n_tokens for r in res]
        assert counts == [256, 64, 16, 4] == stage_counts(256, 4, 3)
        for r in res:
            r.tokens.validate()


def _cli(args, cwd):
    proc = subprocess.run([sys.executable, "-m", "ftcm.cli", *args], cwd=cwd, capture_output=True, check=True)
    return proc.stdout


def _snapshot(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


def test_determinism(criterion, tmp_path):
    with criterion(5, "cluster, pipeline and bench are byte-identical across repeated runs"):
        X = np.random.default_rng(5).normal(size=(40, 6))
        tokens = tmp_path / "t.csv"
        tokens.write_text("".join(",".join(repr(v) for v in row) + "\n" for row in X.tolist()))
        assert _cli(["cluster", str(tokens), "--k", "5"], tmp_path) == _cli(["cluster", str(tokens), "--k", "5"], tmp_path)

        from ftcm import io

        io.write_idx(tmp_path / "img.idx", np.random.default_rng(6).random((2, 32, 32)))
        (tmp_path / "cfg.json").write_text('{"seed": 11, "channels": 8}')
        outs = []
        for run in ("a", "b"):
            stdout = _cli(["pipeline", str(tmp_path / "img.idx"), "--config", str(tmp_path / "cfg.json"),
                           "--out-dir", str(tmp_path / run)], tmp_path)
            outs.append((stdout, _snapshot(tmp_path / run)))
        assert outs[0] == outs[1] and len(outs[0][1]) == 8

        bench = ["bench", "--uneven", "--trials", "3", "--seed", "9"]
        assert _cli(bench, tmp_path) == _cli(bench, tmp_path)


def test_defaults_fidelity(criterion):
    with criterion(6, "defaults K_Fuzzy = K_SCS = 5; bench sweeps K in {1,3,5,7,9}"):
        cfg = FtcmConfig()
        assert cfg.k_fuzzy == 5 and cfg.k_scs == 5
        est = DensityPeakTokenClustering()
        assert est.k_fuzzy == 5 and est.k_scs == 5
        args = build_parser().parse_args(["bench", "--uneven"])
        assert args.k_list == [1, 3, 5, 7, 9]


def test_bench_report(criterion, tmp_path):
    with criterion(7, "bench --uneven emits 5 K x 2 methods x T trials recovery rows"):
        trials = 4
        text = _cli(["bench", "--uneven", "--trials", str(trials), "--seed", "7"], tmp_path).decode()
        lines = text.splitlines()
        assert lines[0] == ",".join(BENCH_COLUMNS)
        rows = [line.split(",") for line in lines[1:]]
        assert len(rows) == 5 * 2 * trials
        seen = {(int(r[0]), r[1], int(r[2])) for r in rows}
        assert seen == {(k, m, t) for k in (1, 3, 5, 7, 9) for m in ("dpc-fknn", "dpc-knn") for t in range(trials)}
        for k in (1, 3, 5, 7, 9):
            for m in ("dpc-fknn", "dpc-knn"):
                group = [r for r in rows if int(r[0]) == k and r[1] == m]
                rate = sum(int(r[3]) for r in group) / trials
                assert all(float(r[4]) == rate for r in group)
        summary = {(k, m): float(r[4]) for r in rows for k, m in [(int(r[0]), r[1])]}
        print("recovery rates:", ", ".join(f"{m}@K={k}: {v:.2f}" for (k, m), v in sorted(summary.items())))
