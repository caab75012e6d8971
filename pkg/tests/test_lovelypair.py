import numpy as np
import pytest

from hlab.errors import SignatureMismatchError
from hlab.finitemodels import least_nonresidue, make_extension_field, primes_in
from hlab.lovelypair import (
    build_quadratic_pair,
    csv_rows,
    experiment_summary,
    make_report,
    pattern_counts,
    phi_count,
    run_experiment,
    square_mask,
    subfield_violations,
)

ODD_PRIMES_97 = [p for p in primes_in(3, 97)]


@pytest.fixture(scope="module")
def pair_cache():
    """One construction of GF(p^2) per prime; the larger fields are costly."""
    return {p: build_quadratic_pair(p) for p in ODD_PRIMES_97}


def brute_pair_data(p):
    """Independent recomputation in plain integer arithmetic: field elements
    are pairs (a, b) for a + b*t with t*t = r, the least non-residue."""
    r = least_nonresidue(p)

    def mul(u, v):
        (a, b), (c, d) = u, v
        return ((a * c + r * b * d) % p, (a * d + b * c) % p)

    def sub(u, v):
        return ((u[0] - v[0]) % p, (u[1] - v[1]) % p)

    elems = [(a, b) for a in range(p) for b in range(p)]
    squares = {mul(e, e) for e in elems}
    a1 = (0, 1)  # the first element outside the subfield in index order
    a2 = (0, (-1) % p)  # its conjugate: frob(a + b t) = a - b t
    count = sum(
        1 for e in elems if sub(e, a1) in squares and sub(e, a2) not in squares
    )
    violations = sum(
        1
        for a in range(p)
        if sub((a, 0), a1) in squares and sub((a, 0), a2) not in squares
    )
    return count, violations


class TestPairConstruction:
    @pytest.mark.parametrize("p", [3, 5, 7, 11])
    def test_conjugate_pair(self, p):
        K, a1, a2 = build_quadratic_pair(p)
        assert not bool(K.relations["insub"][a1])
        assert a2 == int(K.functions["frob"][a1])
        assert a1 != a2

    @pytest.mark.parametrize("p", [3, 5])
    def test_a2_is_pth_power_of_a1(self, p):
        K, a1, a2 = build_quadratic_pair(p)
        mul = K.functions["mul"]
        acc = a1
        for _ in range(p - 1):
            acc = int(mul[acc, a1])
        assert acc == a2

    def test_char_two_rejected(self):
        with pytest.raises(SignatureMismatchError):
            build_quadratic_pair(2)

    def test_a1_deterministic(self):
        first = build_quadratic_pair(13)[1:]
        second = build_quadratic_pair(13)[1:]
        assert first == second


class TestPhiCount:
    @pytest.mark.parametrize("p", [3, 13])
    def test_quarter_envelope(self, p):
        K, a1, a2 = build_quadratic_pair(p)
        q = K.size
        count = phi_count(K, a1, a2)
        assert abs(count - q / 4.0) <= 1.5 * (q**0.5) + 3

    @pytest.mark.parametrize("p", [3, 5, 7, 11, 13])
    def test_matches_independent_brute_force(self, p):
        K, a1, a2 = build_quadratic_pair(p)
        brute_count, brute_violations = brute_pair_data(p)
        assert phi_count(K, a1, a2) == brute_count
        assert subfield_violations(K, a1, a2) == brute_violations
        assert brute_violations == 0

    @pytest.mark.parametrize("p", ODD_PRIMES_97)
    def test_partition_identity(self, p, pair_cache):
        K, a1, a2 = pair_cache[p]
        counts = pattern_counts(K, a1, a2)
        assert sum(counts.values()) == K.size
        # swapping a1 and a2 mirrors the mixed patterns
        assert phi_count(K, a2, a1) == counts["NS"]

    def test_squares_include_zero(self):
        K, _, _ = build_quadratic_pair(5)
        assert bool(square_mask(K)[0])


class TestSubfieldViolations:
    @pytest.mark.parametrize("p", ODD_PRIMES_97)
    def test_zero_for_conjugate_parameters(self, p, pair_cache):
        K, a1, a2 = pair_cache[p]
        assert subfield_violations(K, a1, a2) == 0

    @pytest.mark.parametrize("p", ODD_PRIMES_97)
    def test_deviation_envelope(self, p, pair_cache):
        K, a1, a2 = pair_cache[p]
        q = K.size
        assert abs(phi_count(K, a1, a2) - q / 4.0) <= 1.5 * (q**0.5) + 3

    def test_nonconjugate_parameter_breaks_the_pattern(self):
        # with a2 not conjugate to a1, some prime in [5, 23] shows a
        # subfield witness: the conjugation is what kills them
        hits = 0
        for p in primes_in(5, 23):
            K, a1, conj = build_quadratic_pair(p)
            insub = K.relations["insub"]
            found = False
            for b in range(K.size):
                if insub[b] or b == a1 or b == conj:
                    continue
                if subfield_violations(K, a1, b) > 0:
                    found = True
                    break
            hits += found
        assert hits > 0


class TestRunExperiment:
    def test_basic_run(self):
        reports = run_experiment([3, 5, 7, 11, 13])
        assert [r.p for r in reports] == [3, 5, 7, 11, 13]
        assert all(r.subfield_violations == 0 for r in reports)
        summary = experiment_summary(reports)
        assert summary["all_violations_zero"]
        assert summary["witnessed"]

    def test_empty_list(self):
        assert run_experiment([]) == []

    def test_counts_large_from_five_up(self):
        reports = run_experiment(primes_in(5, 31))
        assert all(r.phi_count >= r.q / 8.0 for r in reports)

    def test_sweep_covers_every_nonsubfield_choice(self):
        reports = run_experiment([5], sweep_a1=True)
        assert len(reports) == 25 - 5
        assert all(r.subfield_violations == 0 for r in reports)

    def test_csv_shape(self):
        rows = list(csv_rows(run_experiment([3, 5])))
        assert rows[0] == ("p", "q", "phi_count", "q_over_4", "deviation", "violations")
        assert len(rows) == 3
        assert rows[1][0] == 3 and rows[1][1] == 9

    def test_report_deterministic(self):
        a = make_report(7)
        b = make_report(7)
        assert a.to_json_dict() == b.to_json_dict()
