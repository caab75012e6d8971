"""The acceptance gate: one test per criterion, at the stated tolerances.

The heavy square-shift pipeline over primes in [101, 2003] is built once and
shared by the size-bound, shrinkage, axiom, and coarse-dimension criteria.
Each test prints one pass line (visible with -s) after its assertions.
"""

import hashlib
import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np
import pytest

from hlab.asymptotics import profile_family, psi_set
from hlab.cli import main
from hlab.finitemodels import (
    make_cyclic_group,
    make_prime_field,
    primes_in,
)
from hlab.folang import evaluate, parse_formula, solution_counts_all
from hlab.haxioms import run_axiom_checks
from hlab.hgreedy import (
    BEST_EFFORT,
    STRICT,
    build_h,
    derive_config,
    size_threshold_ok,
)
from hlab.hsequence import (
    COARSE_DIM,
    FormulaSchedule,
    build_sequence,
    coarse_dimension_series,
    schedule_in,
)
from hlab.lovelypair import phi_count, run_experiment

MU = 0.4
DECAY = -math.log(1 - MU / 2)  # -ln 0.8
STATED_CONSTANT = 2 * (math.ceil(2 / DECAY) + 1)  # the criterion's own bound


@dataclass
class Pipeline:
    family: list
    config: object
    builds: list  # (structure, h_set, report)
    skipped: list
    elapsed: float
    threshold_checks: dict = field(default_factory=dict)


@pytest.fixture(scope="module")
def pipeline():
    t0 = time.perf_counter()
    family = [make_prime_field(p) for p in primes_in(101, 2003)]
    sig = family[0].sig
    cover = [
        parse_formula("exists z. z*z = x - y", sig),
        parse_formula("!(x = y)", sig),
    ]
    avoid = [parse_formula("x = z", sig), parse_formula("x = z + 1", sig)]
    cfg = derive_config(cover, avoid, MU, family)
    builds, skipped, checks = [], [], {}
    for M in family:
        check = size_threshold_ok(cfg, M)
        checks[M.size] = check
        if not check.ok:
            skipped.append(M.size)
            continue
        h_set, report = build_h(M, cfg, STRICT)
        builds.append((M, h_set, report))
    elapsed = time.perf_counter() - t0
    return Pipeline(family, cfg, builds, skipped, elapsed, checks)


def report_line(number, detail):
    print(f"[criterion {number}] PASS  {detail}")


def test_criterion_1_profiler_exactness():
    t0 = time.perf_counter()
    family = [make_prime_field(p) for p in primes_in(3, 199)]
    pf = parse_formula("exists z. z*z = x - y", family[0].sig)
    for M in family:
        counts = solution_counts_all(M, pf)
        expected = (M.size + 1) // 2
        assert counts.min() == counts.max() == expected, M.size
    profile = profile_family(family, pf)
    elapsed = time.perf_counter() - t0
    assert len(profile.E) == 1
    assert abs(profile.E[0] - 0.5) <= 0.02
    assert profile.C <= 1.0
    assert elapsed < 5.0, f"criterion 1 took {elapsed:.2f}s"
    report_line(1, f"E={profile.E[0]:.4f}, C={profile.C}, {elapsed:.2f}s")


def test_criterion_2_measure_multiplicity():
    t0 = time.perf_counter()
    family = [make_cyclic_group(n) for n in range(5, 61)]
    pf = parse_formula("exists z. x = y + z + z", family[0].sig)
    profile = profile_family(family, pf)
    assert len(profile.E) == 2
    assert abs(profile.E[0] - 0.5) <= 0.02
    assert abs(profile.E[1] - 1.0) <= 0.02
    for M in family:
        counts = solution_counts_all(M, pf)
        assert counts.min() == counts.max()
        count = int(counts[0])
        if M.size % 2 == 1:
            assert count == M.size  # doubling is onto for odd order
            assert abs(count - profile.E[1] * M.size) < profile.C * M.size**0.5
        else:
            assert count == M.size // 2
            assert abs(count - profile.E[0] * M.size) < profile.C * M.size**0.5
    elapsed = time.perf_counter() - t0
    assert elapsed < 2.0, f"criterion 2 took {elapsed:.2f}s"
    report_line(2, f"E={profile.E}, parity classification exact, {elapsed:.2f}s")


def test_criterion_3_greedy_size_bound(pipeline):
    assert pipeline.builds, "some primes in [101, 2003] pass the threshold"
    n_structures = len(pipeline.builds) + len(pipeline.skipped)
    assert n_structures == len(primes_in(101, 2003))
    for M, h_set, report in pipeline.builds:
        for cert in report.cover:
            assert cert.method == "exhaustive"
            assert cert.passed, (M.size, cert.failures[:3])
        for cert in report.avoid:
            assert cert.passed, (M.size, cert.violations[:3])
        assert len(h_set) <= STATED_CONSTANT * math.log(M.size)
        assert report.size_bound_ok  # the tighter config-level bound
    assert pipeline.elapsed < 60.0, f"criterion 3 took {pipeline.elapsed:.2f}s"
    report_line(
        3,
        f"{len(pipeline.builds)} strict builds, |H| <= {STATED_CONSTANT} ln p, "
        f"{pipeline.elapsed:.2f}s",
    )


def test_criterion_4_shrinkage_invariant(pipeline):
    bound = 1 - MU / 2
    violations = 0
    for M, _, report in pipeline.builds:
        assert report.shrink_ok
        h_count = 0
        for phase in report.phases:
            for factor in phase["shrink_factors"]:
                if h_count <= report.h_budget and factor > bound + 1e-12:
                    violations += 1
                h_count += 1
    assert violations == 0
    report_line(4, f"0 shrink violations across {len(pipeline.builds)} builds")


def test_criterion_5_greedy_vs_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20260810)
    cyclic_family = [make_cyclic_group(n) for n in range(5, 31)]
    prime_family = [make_prime_field(p) for p in primes_in(5, 29)]
    group_sig = cyclic_family[0].sig
    ring_sig = prime_family[0].sig
    pool = [
        (cyclic_family, parse_formula("exists z. x = y + z + z", group_sig)),
        (cyclic_family, parse_formula("!(x = y)", group_sig)),
        (cyclic_family, parse_formula("exists z. x = y + z + z + z", group_sig)),
        (prime_family, parse_formula("exists z. z*z = x - y", ring_sig)),
        (prime_family, parse_formula("!(x = y)", ring_sig)),
    ]
    configs = {}
    checked = 0
    for _ in range(20):
        family, pf = pool[int(rng.integers(len(pool)))]
        M = family[int(rng.integers(len(family)))]
        key = (id(family), pf.text)
        if key not in configs:
            xz = parse_formula("x = z", M.sig)
            configs[key] = derive_config([pf], [xz], None, family)
        cfg = configs[key]
        psi = psi_set(M, pf, cfg.delta_profiles[0])
        h_set, report = build_h(M, cfg, BEST_EFFORT)
        assert report.all_passed, (M.size, pf.text)
        opt = minimum_cover_size(M, pf, psi)
        if psi:
            assert opt <= len(h_set) <= opt * (1 + math.log(len(psi))), (
                M.size,
                pf.text,
                opt,
                len(h_set),
            )
        else:
            assert len(h_set) == 0
        checked += 1
    elapsed = time.perf_counter() - t0
    assert checked == 20
    assert elapsed < 30.0, f"criterion 5 took {elapsed:.2f}s"
    report_line(5, f"20 instances within the log bound, {elapsed:.2f}s")


def minimum_cover_size(M, pf, psi):
    if not psi:
        return 0
    full = (1 << len(psi)) - 1
    masks = set()
    for a in range(M.size):
        m = 0
        for j, tup in enumerate(psi):
            assignment = {pf.object_var: a}
            assignment.update(zip(pf.params, tup))
            if evaluate(M, pf.formula, assignment):
                m |= 1 << j
        if m:
            masks.add(m)
    kept = [m for m in masks if not any(m != o and m | o == o for o in masks)]
    import itertools

    for k in range(1, len(kept) + 1):
        for combo in itertools.combinations(kept, k):
            u = 0
            for m in combo:
                u |= m
            if u == full:
                return k
    raise AssertionError("large set not coverable")


def test_criterion_6_axiom_checks(pipeline):
    density_failures = 0
    extension_failures = 0
    for M, h_set, _ in pipeline.builds:
        report = run_axiom_checks(
            M, h_set, pipeline.config, extension_samples=1000, base_max=3, seed=0
        )
        density_failures += report.density["n_failures"]
        extension_failures += len(report.extension["failures"])
        assert report.density["passed"], M.size
        assert all(
            cert["method"] == "exhaustive" for cert in report.density["per_formula"]
        )
        assert report.extension["passed"], M.size
        assert report.extension["n_samples"] == 1000
    assert density_failures == 0
    assert extension_failures == 0
    report_line(
        6,
        f"density exhaustive and extension x1000 clean on {len(pipeline.builds)} builds",
    )


def test_criterion_7_coarse_dimension_trend(pipeline):
    sig = pipeline.family[0].sig
    sched = FormulaSchedule(
        cover=(
            parse_formula("exists z. z*z = x - y", sig),
            parse_formula("!(x = y)", sig),
        ),
        avoid=(parse_formula("x = z", sig), parse_formula("x = z + 1", sig)),
    )
    plan = schedule_in(pipeline.family, sched, MU, mode=COARSE_DIM)
    build_sequence(plan)
    series = coarse_dimension_series(plan, window=3)
    assert series.first_window_avg is not None
    assert series.last_window_avg < series.first_window_avg  # strictly smaller
    report_line(
        7,
        f"window ratio {series.first_window_avg:.4f} -> {series.last_window_avg:.4f}",
    )


def test_criterion_8_lovely_pair_experiment():
    t0 = time.perf_counter()
    primes = [3, 5, 7, 11, 13, 17, 19, 23, 29, 31]
    reports = run_experiment(primes)
    assert [r.p for r in reports] == primes
    for r in reports:
        assert r.subfield_violations == 0, r.p
        assert abs(r.phi_count - r.q / 4.0) <= 1.5 * r.p + 3, r.p
    elapsed = time.perf_counter() - t0
    assert elapsed < 10.0, f"criterion 8 took {elapsed:.2f}s"
    report_line(8, f"10 primes, zero subfield witnesses, {elapsed:.2f}s")


def test_criterion_9_determinism(tmp_path):
    base = {
        "family": {"family": "prime-field", "lo": 101, "hi": 181},
        "cover": ["exists z. z*z = x - y"],
        "avoid": ["x = z"],
        "mu": 0.49,
        "seed": 11,
        "mode": "strict",
        "out_dir": str(tmp_path / "unused"),
        "extension_samples": 100,
    }
    main_path = tmp_path / "exp.json"
    main_path.write_text(json.dumps(base))
    lp = dict(base)
    lp["family"] = {"family": "quadratic-extension-field", "values": [3, 5, 7, 11, 13]}
    lp["cover"] = []
    lp["avoid"] = []
    lp_path = tmp_path / "lp.json"
    lp_path.write_text(json.dumps(lp))

    def run(command, cfg_path, label, threads):
        out = str(tmp_path / label)
        rc = main(
            [command, "--config", str(cfg_path), "--out", out, "--threads", str(threads)]
        )
        assert rc == 0, (command, rc)
        digests = {}
        for root, _, files in os.walk(out):
            for f in files:
                p = os.path.join(root, f)
                digests[os.path.relpath(p, out)] = hashlib.sha256(
                    open(p, "rb").read()
                ).hexdigest()
        assert digests
        return digests

    jobs = [
        ("profile", main_path),
        ("build", main_path),
        ("sequence", main_path),
        ("axioms", main_path),
        ("lovely-pair", lp_path),
    ]
    for command, cfg_path in jobs:
        one = run(command, cfg_path, f"{command}-a", 1)
        eight = run(command, cfg_path, f"{command}-b", 8)
        again = run(command, cfg_path, f"{command}-c", 1)
        assert one == eight == again, command
    report_line(9, "five commands byte-identical across reruns and 1/8 threads")
