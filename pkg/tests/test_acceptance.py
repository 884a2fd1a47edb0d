"""Acceptance suite: the eight exit criteria, each at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one PASS/FAIL line
per criterion.
"""

import functools
import time

import numpy as np

from torusorbits.fixedpoints import (
    OrbitReport,
    PipelineFailure,
    find_finite_orbit,
    find_torus_fixed_points,
    fix_region,
    index_sum_check,
)
from torusorbits.config import RunConfig
from torusorbits.mcg import (
    H_GROUP,
    IDENTITY,
    MINUS_IDENTITY,
    IntMatrix2,
    RatMatrix2,
    classify_nilpotent_subgroup,
    closure,
    evaluate_word,
    has_one_in_spectrum,
    lefschetz_number,
    select_special_element,
)
from torusorbits.rotation import (
    EmpiricalMeasure,
    invariant_measure_estimate,
    morphism_check,
    pushforward,
    rho_mu,
)
from torusorbits.surfaces import (
    AnnulusMap,
    CircleLift,
    double_annulus,
    klein_lifts,
    reversing_fixed_points,
)
from torusorbits.torusmaps import (
    Compose,
    FourierTerm,
    GroupSpec,
    Inverse,
    Leaf,
    affine,
    translation,
)

M = IntMatrix2.from_rows


def criterion(number: int, title: str):
    def decorate(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"[criterion {number}] FAIL: {title}")
                raise
            print(f"[criterion {number}] PASS: {title}")
        return wrapper
    return decorate


# ---------------------------------------------------------------------------


@criterion(1, "Lefschetz table exhaustive over entries in [-5,5], det +/-1")
def test_criterion_1_lefschetz_table():
    start = time.monotonic()
    span = range(-5, 6)
    checked = 0
    for a in span:
        for b in span:
            for c in span:
                for d in span:
                    det = a * d - b * c
                    if det not in (1, -1):
                        continue
                    m = IntMatrix2(a, b, c, d)
                    direct = (1 - a) * (1 - d) - b * c  # det(Id - A) expanded
                    assert lefschetz_number(m) == direct
                    assert has_one_in_spectrum(m) == (direct == 0)
                    checked += 1
    assert checked == 616  # the full det +/-1 census of this entry box
    assert lefschetz_number(MINUS_IDENTITY) == 4
    for n in span:
        assert lefschetz_number(M([[-1, n], [0, -1]])) == 4
    assert time.monotonic() - start < 1.0


@criterion(2, "dihedral classification, 100 rational conjugates, witness word")
def test_criterion_2_classification():
    start = time.monotonic()

    h_gens = [M([[0, -1], [1, 0]]), M([[1, 0], [0, -1]])]
    closed = closure(h_gens)
    assert closed.finite and len(closed) == 8
    assert set(closed.elements) == set(H_GROUP)
    cls = classify_nilpotent_subgroup(h_gens)
    assert cls.kind == "dihedral"

    rng = np.random.default_rng(20260808)
    produced = 0
    attempts = 0
    while produced < 100:
        attempts += 1
        assert attempts < 20_000
        entries = rng.integers(-3, 4, size=4)
        det = entries[0] * entries[3] - entries[1] * entries[2]
        if det == 0:
            continue
        p = RatMatrix2(*(int(e) for e in entries))
        conj = [p.conjugate(g) for g in h_gens]
        if not all(c.is_integral() for c in conj):
            continue
        gens = [c.to_int() for c in conj]
        out = classify_nilpotent_subgroup(gens)
        assert out.kind == "dihedral"
        q = out.conjugator
        image = {q.conjugate(mat).to_int() for mat, _ in out.table}
        assert image == set(H_GROUP)
        for g in gens:
            assert q.conjugate(g).to_int() in H_GROUP
        produced += 1

    pair = [M([[2, 1], [1, 1]]), M([[1, 1], [0, 1]])]
    out = classify_nilpotent_subgroup(pair)
    assert out.kind == "not-nilpotent"
    witness = evaluate_word(out.witness_word, pair)
    assert witness == out.witness_matrix
    assert witness not in (IDENTITY, MINUS_IDENTITY)

    assert time.monotonic() - start < 10.0


@criterion(3, "special element: root^2 for reversing cyclic, -Id for dihedral")
def test_criterion_3_special_element():
    rng = np.random.default_rng(31)
    alphabet = [M([[1, 1], [0, 1]]), M([[1, 0], [1, 1]]), M([[0, -1], [1, 0]])]
    produced = 0
    while produced < 50:
        u = IDENTITY
        for _ in range(rng.integers(2, 7)):
            step = alphabet[rng.integers(0, len(alphabet))]
            u = u * (step if rng.integers(0, 2) else step.inverse())
        n = u * M([[1, 0], [0, -1]])
        if n.trace() == 0:  # order two: 1 is an eigenvalue
            continue
        assert n.det() == -1 and not has_one_in_spectrum(n)
        cls = classify_nilpotent_subgroup([n])
        assert cls.kind == "cyclic"
        assert cls.root in (n, n.inverse())
        b, word = select_special_element(cls)
        assert b == cls.root * cls.root
        assert b.det() == 1
        assert not has_one_in_spectrum(b)
        assert evaluate_word(word, [n]) == b
        produced += 1

    dihedral = classify_nilpotent_subgroup([M([[0, -1], [1, 0]]), M([[1, 0], [0, -1]])])
    b, _ = select_special_element(dihedral)
    assert b == MINUS_IDENTITY


@criterion(4, "rotation identities: morphism 1e-6, conjugation 1e-9, rho(T)=v 1e-12")
def test_criterion_4_rotation_identities():
    rng = np.random.default_rng(44)
    lebesgue = EmpiricalMeasure.lebesgue_grid(256)

    # morphism residual on 20 Lebesgue-preserving pairs
    def area_preserving(seed):
        r = np.random.default_rng(seed)
        kind = r.integers(0, 3)
        if kind == 0:
            return translation(r.uniform(-1, 1, 2))
        if kind == 1:  # y shifted by a wave in x
            return Leaf(IDENTITY, (float(r.uniform(-1, 1)), float(r.uniform(-1, 1))),
                        (FourierTerm((int(r.integers(1, 4)), 0),
                                     (0.0, float(r.uniform(-0.1, 0.1))),
                                     (0.0, float(r.uniform(-0.1, 0.1)))),))
        return Leaf(IDENTITY, (float(r.uniform(-1, 1)), float(r.uniform(-1, 1))),
                    (FourierTerm((0, int(r.integers(1, 4))),
                                 (float(r.uniform(-0.1, 0.1)), 0.0),
                                 (float(r.uniform(-0.1, 0.1)), 0.0)),))

    for case in range(20):
        f = area_preserving(1000 + case)
        g = area_preserving(2000 + case)
        assert morphism_check(f, g, lebesgue) <= 1e-6

    # conjugation identity on 20 exactly-invariant finite measures
    for case in range(20):
        q = int(rng.choice([2, 4, 8]))
        p1, p2 = int(rng.integers(1, q)), int(rng.integers(1, q))
        phi = translation((p1 / q, p2 / q))
        x0 = (int(rng.integers(0, 16)) / 16.0, int(rng.integers(0, 16)) / 16.0)
        mu = invariant_measure_estimate(phi, x0, n=q)
        cls = [M([[1, 1], [0, 1]]), M([[2, 1], [1, 1]]), M([[0, -1], [1, 0]]),
               M([[1, 0], [0, -1]])][int(rng.integers(0, 4))]
        psi = Leaf(cls, tuple(rng.uniform(-1, 1, 2)),
                   (FourierTerm((1, 1), tuple(rng.uniform(-0.03, 0.03, 2)),
                                tuple(rng.uniform(-0.03, 0.03, 2))),))
        conjugated = Compose(psi, Compose(phi, Inverse(psi)))
        nu = pushforward(mu, psi)
        lhs = psi.class_matrix() @ rho_mu(phi, mu)
        rhs = rho_mu(conjugated, nu)
        assert np.linalg.norm(lhs - rhs) <= 1e-9

    # rho of rigid translations
    atoms = EmpiricalMeasure.uniform(rng.uniform(0, 1, size=(23, 2)))
    for _ in range(20):
        a, b = rng.uniform(-4, 4, size=2)
        assert np.linalg.norm(rho_mu(translation((a, b)), atoms) - [a, b]) <= 1e-12


@criterion(5, "fixed points: -Id sum 4, ten perturbed variants, hyperbolic sum -1")
def test_criterion_5_fixed_point_suite():
    start = time.monotonic()

    flip = affine(MINUS_IDENTITY)
    search = find_torus_fixed_points(flip, fix_region(flip), grid_n=32)
    assert len(search.records) == 4
    check = index_sum_check(search.records, MINUS_IDENTITY)
    assert check.status == "pass" and check.total == 4 == lefschetz_number(MINUS_IDENTITY)

    rng = np.random.default_rng(55)
    for case in range(10):
        terms = tuple(
            FourierTerm((int(k1), int(k2)),
                        tuple(rng.uniform(-0.05, 0.05, 2)),
                        tuple(rng.uniform(-0.05, 0.05, 2)))
            for k1, k2 in [(1, 0), (0, 1), (1, 1)]
        )
        tmap = Leaf(MINUS_IDENTITY, tuple(rng.uniform(-0.2, 0.2, 2)), terms)
        search = find_torus_fixed_points(tmap, fix_region(tmap), grid_n=32)
        check = index_sum_check(search.records, MINUS_IDENTITY)
        assert check.status == "pass" and check.total == 4
        assert all(r.residual <= 1e-10 for r in search.records)

    cat = affine(M([[2, 1], [1, 1]]))
    search = find_torus_fixed_points(cat, fix_region(cat), grid_n=32)
    check = index_sum_check(search.records, cat.mapping_class)
    expected = lefschetz_number(cat.mapping_class)
    assert expected == -1
    assert check.status == "pass" and check.total == expected

    assert time.monotonic() - start < 30.0


@criterion(6, "finite-orbit pipeline: Ghat orbit 4, sqrt(2) failure, perturbed orbit")
def test_criterion_6_pipeline():
    params = RunConfig().pipeline_params()

    start = time.monotonic()
    ghat = GroupSpec(
        ("tx", "ty", "flip"),
        (translation((0.5, 0.0)), translation((0.0, 0.5)), affine(MINUS_IDENTITY)),
    )
    report = find_finite_orbit(ghat, params=params)
    assert isinstance(report, OrbitReport)
    assert report.size == 4
    assert report.max_residual() <= 1e-9
    expected = {(0.0, 0.0), (0.5, 0.0), (0.0, 0.5), (0.5, 0.5)}
    found = {(round(p[0], 9) % 1.0, round(p[1], 9) % 1.0) for p in report.points}
    assert found == expected
    assert time.monotonic() - start < 60.0

    start = time.monotonic()
    stray = GroupSpec(("t",), (translation((np.sqrt(2), 0.0)),))
    failure = find_finite_orbit(stray, params=params)
    assert isinstance(failure, PipelineFailure)
    assert failure.stage == "no-special-element"
    assert time.monotonic() - start < 60.0

    start = time.monotonic()
    rng = np.random.default_rng(66)
    terms = tuple(
        FourierTerm((k1, k2), tuple(rng.uniform(-0.05, 0.05, 2)),
                    tuple(rng.uniform(-0.05, 0.05, 2)))
        for k1, k2 in [(1, 1), (2, 0), (0, 2)]  # even frequency sums commute
    )
    group = GroupSpec(
        ("flip", "t"),
        (Leaf(MINUS_IDENTITY, (0.0, 0.0), terms), translation((0.5, 0.5))),
    )
    report = find_finite_orbit(group, params=params)
    assert isinstance(report, OrbitReport)
    assert report.max_residual() <= 1e-6
    assert time.monotonic() - start < 60.0


@criterion(7, "circle suite: reversing pairs at closed forms, k-fold scaling")
def test_criterion_7_circle_suite():
    cases = [
        (CircleLift(-1), (0.0, 0.5)),
        (CircleLift(-1, 0.3), (0.15, 0.65)),
        (CircleLift(-1, 0.0, ((1, 0.0, 0.1),)), (0.0, 0.5)),
    ]
    for lift, expected in cases:
        p, q = reversing_fixed_points(lift, tol=1e-12)
        assert abs(p - expected[0]) <= 1e-9
        assert abs(q - expected[1]) <= 1e-9

    g = CircleLift(1, 0.3, ((1, 0.02, 0.0), (2, 0.0, 0.015)))
    n = 10_000
    rho = (g.iterate(0.37, n) - 0.37) / n
    for k in (2, 3, 4):
        rho_k = (g.iterate(0.37, k * n) - 0.37) / n / k * k  # k-fold horizon
        diff = abs(float(rho_k - k * rho)) % 1.0
        assert min(diff, 1.0 - diff) <= 3.0 / n


@criterion(8, "doubling: swap class [[-1,n],[0,-1]], L=4, Klein pairs contain 0")
def test_criterion_8_doubling_suite():
    swap = AnnulusMap(degree=-1, shear=0.0, s_scale=-1.0, s_offset=1.0,
                      x_translation=0.0, boundary="swaps-components")
    doubled = double_annulus(swap)
    cls = doubled.mapping_class
    assert cls.a == -1 and cls.c == 0 and cls.d == -1
    assert isinstance(cls.b, int)
    assert lefschetz_number(cls) == 4
    assert swap.seam_mismatch() <= 1e-9

    rng = np.random.default_rng(88)
    for case in range(10):
        e1, e2 = int(rng.choice([-1, 1])), int(rng.choice([-1, 1]))
        terms = []
        if rng.random() < 0.7:
            terms.append(FourierTerm((2, 0),
                                     (float(rng.uniform(-0.05, 0.05)), 0.0),
                                     (float(rng.uniform(-0.05, 0.05)), 0.0)))
        if rng.random() < 0.7:
            terms.append(FourierTerm((0, 1), (0.0, 0.0),
                                     (0.0, float(rng.uniform(-0.05, 0.05)))))
        tmap = Leaf(IntMatrix2(e1, 0, 0, e2),
                    (float(rng.uniform(0, 1)), 0.5 * int(rng.integers(0, 2))),
                    tuple(terms))
        pair = klein_lifts(tmap, check_tol=1e-9)
        assert 0 in pair.lefschetz
