"""Exact-arithmetic tests for the mapping-class algebra."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from torusorbits.mcg import (
    H_GROUP,
    IDENTITY,
    MINUS_IDENTITY,
    GroupStructureError,
    IntMatrix2,
    McgClassification,
    NoSpecialElement,
    RatMatrix2,
    classify_element,
    classify_nilpotent_subgroup,
    closure,
    conjugate_to_H,
    evaluate_word,
    has_one_in_spectrum,
    lefschetz_number,
    select_special_element,
)

M = IntMatrix2.from_rows

# small unimodular alphabet for building random group elements by words
_ALPHABET = [
    M([[1, 1], [0, 1]]),
    M([[1, 0], [1, 1]]),
    M([[0, -1], [1, 0]]),
    M([[1, 0], [0, -1]]),
]


def random_element(rng: np.random.Generator, length: int = 6) -> IntMatrix2:
    out = IDENTITY
    for _ in range(length):
        step = _ALPHABET[rng.integers(0, len(_ALPHABET))]
        if rng.integers(0, 2):
            step = step.inverse()
        out = out * step
    return out


# ---------------------------------------------------------------- basics


def test_constructor_rejects_non_unimodular():
    with pytest.raises(ValueError):
        IntMatrix2(1, 0, 0, 2)
    with pytest.raises(ValueError):
        IntMatrix2(1, 1, 1, 1)


@given(st.lists(st.integers(0, 7), min_size=3, max_size=3),
       st.lists(st.integers(0, 7), min_size=3, max_size=3),
       st.lists(st.integers(0, 7), min_size=3, max_size=3))
def test_multiplication_associative(w1, w2, w3):
    def build(w):
        out = IDENTITY
        for i in w:
            step = _ALPHABET[i % len(_ALPHABET)]
            out = out * (step if i < len(_ALPHABET) else step.inverse())
        return out

    x, y, z = build(w1), build(w2), build(w3)
    assert (x * y) * z == x * (y * z)
    assert x * IDENTITY == x and IDENTITY * x == x
    assert x * x.inverse() == IDENTITY


def test_rational_matrix_canonical_equality():
    p = RatMatrix2.from_json([[{"num": 2, "den": 4}, {"num": 0, "den": 1}],
                              [{"num": 0, "den": 1}, {"num": 1, "den": 1}]])
    q = RatMatrix2.from_json([[{"num": 1, "den": 2}, {"num": 0, "den": 1}],
                              [{"num": 0, "den": 1}, {"num": 3, "den": 3}]])
    assert p == q
    blob = p.to_json()
    assert blob[0][0] == {"num": 1, "den": 2}


# ------------------------------------------------------------- lefschetz


def test_lefschetz_examples():
    assert lefschetz_number(MINUS_IDENTITY) == 4
    assert lefschetz_number(IDENTITY) == 0
    assert lefschetz_number(M([[-1, 5], [0, -1]])) == 4


def test_lefschetz_equals_direct_determinant():
    # independent route: build Id - A explicitly and take its determinant
    rng = np.random.default_rng(7)
    for _ in range(200):
        m = random_element(rng)
        direct = (1 - m.a) * (1 - m.d) - (-m.b) * (-m.c)
        assert lefschetz_number(m) == direct
        assert has_one_in_spectrum(m) == (direct == 0)


def test_spectrum_examples():
    assert has_one_in_spectrum(M([[1, 1], [0, 1]]))
    assert not has_one_in_spectrum(M([[0, 1], [1, 1]]))
    assert not has_one_in_spectrum(MINUS_IDENTITY)
    # oracle: numerical eigenvalues of [[0,1],[1,1]] stay away from 1
    eig = np.linalg.eigvals(np.array([[0.0, 1.0], [1.0, 1.0]]))
    assert np.min(np.abs(eig - 1.0)) > 0.3


# ------------------------------------------------------- element typing


def test_classify_element_examples():
    assert classify_element(MINUS_IDENTITY).kind == "finite-order"
    assert classify_element(MINUS_IDENTITY).order == 2
    assert classify_element(M([[1, 1], [0, 1]])).kind == "parabolic"
    assert classify_element(M([[2, 1], [1, 1]])).kind == "hyperbolic"


def test_parabolic_has_single_projective_fixed_point():
    # eigenvector oracle: trace-2 shear has a repeated eigenvalue and a
    # one-dimensional eigenspace
    a = np.array([[1.0, 1.0], [0.0, 1.0]])
    eig, vecs = np.linalg.eig(a)
    assert np.allclose(eig, [1.0, 1.0])
    # both numerical eigenvectors are parallel
    cross = vecs[0, 0] * vecs[1, 1] - vecs[0, 1] * vecs[1, 0]
    assert abs(cross) < 1e-9


def test_hyperbolic_has_two_real_eigenvalues():
    eig = np.linalg.eigvals(np.array([[2.0, 1.0], [1.0, 1.0]]))
    expected = np.array([(3 + np.sqrt(5)) / 2, (3 - np.sqrt(5)) / 2])
    assert np.allclose(np.sort(eig), np.sort(expected))


def test_finite_orders_are_least():
    cases = {
        IDENTITY: 1,
        MINUS_IDENTITY: 2,
        M([[1, 0], [0, -1]]): 2,
        M([[0, -1], [1, -1]]): 3,
        M([[0, -1], [1, 0]]): 4,
        M([[0, -1], [1, 1]]): 6,
    }
    for m, order in cases.items():
        t = classify_element(m)
        assert t.kind == "finite-order" and t.order == order
        assert m ** order == IDENTITY
        for smaller in range(1, order):
            assert m ** smaller != IDENTITY


# --------------------------------------------------------------- closure


def test_closure_of_minus_identity():
    res = closure([MINUS_IDENTITY])
    assert res.finite
    assert set(res.elements) == {IDENTITY, MINUS_IDENTITY}


def test_closure_of_H_generators():
    res = closure([M([[0, -1], [1, 0]]), M([[1, 0], [0, -1]])])
    assert res.finite
    assert set(res.elements) == set(H_GROUP)
    assert len(res) == 8


def test_closure_cap_exceeded_for_parabolic():
    res = closure([M([[1, 1], [0, 1]])], element_cap=100)
    assert not res.finite
    assert res.cap_hit is not None


def test_closure_words_reproduce_elements():
    gens = [M([[0, -1], [1, 0]]), M([[1, 0], [0, -1]])]
    res = closure(gens)
    for mat, word in res.elements.items():
        assert evaluate_word(word, gens) == mat


# -------------------------------------------------------- classification


def verify_classification(cls: McgClassification, gens):
    """Check the recorded witnesses by re-evaluating everything exactly."""
    if cls.kind in ("cyclic", "plus-minus-cyclic"):
        root = cls.root
        assert evaluate_word(cls.root_word, gens) == root
        for g, (sign, k) in zip(gens, cls.generator_powers):
            expected = root ** k
            if sign == -1:
                expected = -expected
            assert g == expected
            if cls.kind == "cyclic":
                assert sign == 1
        if cls.minus_id_word is not None:
            assert evaluate_word(cls.minus_id_word, gens) == MINUS_IDENTITY
    elif cls.kind == "dihedral":
        conj = cls.conjugator
        for mat, word in cls.table:
            assert evaluate_word(word, gens) == mat
            assert conj.conjugate(mat).to_int() in H_GROUP
        assert {conj.conjugate(m).to_int() for m, _ in cls.table} == set(H_GROUP)
    elif cls.kind == "not-nilpotent":
        w = evaluate_word(cls.witness_word, gens)
        assert w == cls.witness_matrix
        assert w not in (IDENTITY, MINUS_IDENTITY)


def test_classify_single_hyperbolic_generator():
    n = M([[0, 1], [1, 1]])
    cls = classify_nilpotent_subgroup([n])
    assert cls.kind == "cyclic"
    # the recorded root generates the same group as the input generator
    assert cls.root in (n, n.inverse())
    verify_classification(cls, [n])


def test_classify_conjugated_H_is_dihedral():
    # conjugate the dihedral generators by [[2,1],[0,1]] in GL(2,Q); the
    # conjugates happen to be integral, which makes them a valid input
    p = RatMatrix2.from_json([[{"num": 2, "den": 1}, {"num": 1, "den": 1}],
                              [{"num": 0, "den": 1}, {"num": 1, "den": 1}]])
    gens = [p.conjugate(M([[0, -1], [1, 0]])).to_int(),
            p.conjugate(M([[1, 0], [0, -1]])).to_int()]
    cls = classify_nilpotent_subgroup(gens)
    assert cls.kind == "dihedral"
    verify_classification(cls, gens)


def test_classify_non_commuting_pair():
    gens = [M([[2, 1], [1, 1]]), M([[1, 1], [0, 1]])]
    cls = classify_nilpotent_subgroup(gens)
    assert cls.kind == "not-nilpotent"
    verify_classification(cls, gens)


def test_classify_trivial_and_small_groups():
    assert classify_nilpotent_subgroup([IDENTITY]).kind == "trivial"
    cls = classify_nilpotent_subgroup([MINUS_IDENTITY])
    assert cls.kind == "cyclic" and cls.root == MINUS_IDENTITY

    klein = classify_nilpotent_subgroup([M([[1, 0], [0, -1]]), MINUS_IDENTITY])
    assert klein.kind == "plus-minus-cyclic"
    verify_classification(klein, [M([[1, 0], [0, -1]]), MINUS_IDENTITY])


def test_classify_parabolic_with_minus_identity():
    gens = [M([[1, 1], [0, 1]]), MINUS_IDENTITY]
    cls = classify_nilpotent_subgroup(gens)
    assert cls.kind == "plus-minus-cyclic"
    verify_classification(cls, gens)


def test_classify_inconclusive_under_tight_caps():
    n = M([[2, 1], [1, 1]])
    gens = [n ** 2, n ** 3]
    cls = classify_nilpotent_subgroup(gens, word_cap=1, element_cap=10)
    assert cls.kind == "inconclusive"


def test_classify_powers_recover_primitive_root():
    # generators N^2, N^3 only: the primitive root N is a closure word
    n = M([[2, 1], [1, 1]])
    gens = [n ** 2, n ** 3]
    cls = classify_nilpotent_subgroup(gens)
    assert cls.kind == "cyclic"
    assert cls.root in (n, n.inverse())
    verify_classification(cls, gens)


# ------------------------------------------------------- conjugate_to_H


def test_conjugate_to_H_identity_case():
    assert conjugate_to_H(list(H_GROUP)) == RatMatrix2.identity()


def test_conjugate_to_H_recovers_conjugated_group():
    p = RatMatrix2.from_int(M([[1, 1], [0, 1]]))
    group = [p.conjugate(h).to_int() for h in H_GROUP]
    q = conjugate_to_H(group)
    for g in group:
        assert q.conjugate(g).to_int() in H_GROUP
    # conjugation preserves determinant and trace
    for g, h in zip(group, (q.conjugate(g).to_int() for g in group)):
        assert g.det() == h.det() and g.trace() == h.trace()


def test_conjugate_to_H_structural_error():
    # eight distinct matrices containing a quarter turn but no reflection
    # with spectrum {1,-1}: not a dihedral group, must be rejected
    r = M([[0, -1], [1, 0]])
    shear = M([[1, 1], [0, 1]])
    bad = [IDENTITY, MINUS_IDENTITY, r, -r, shear, -shear,
           shear.inverse(), -shear.inverse()]
    with pytest.raises(GroupStructureError):
        conjugate_to_H(bad)


# ------------------------------------------------- select_special_element


def test_special_element_orientation_reversing_cyclic():
    n = M([[0, 1], [1, 1]])
    cls = McgClassification("cyclic", root=n, root_word=(1,),
                            generator_powers=[(1, 1)])
    b, word = select_special_element(cls)
    assert b == M([[1, 1], [1, 2]])
    assert b.det() == 1 and not has_one_in_spectrum(b)
    assert evaluate_word(word, [n]) == b


def test_special_element_dihedral_is_minus_identity():
    gens = [M([[0, -1], [1, 0]]), M([[1, 0], [0, -1]])]
    cls = classify_nilpotent_subgroup(gens)
    b, word = select_special_element(cls)
    assert b == MINUS_IDENTITY
    assert evaluate_word(word, gens) == MINUS_IDENTITY


def test_special_element_parabolic_has_none():
    n = M([[1, 1], [0, 1]])
    cls = McgClassification("cyclic", root=n, root_word=(1,),
                            generator_powers=[(1, 1)])
    with pytest.raises(NoSpecialElement):
        select_special_element(cls)


def test_special_element_orientation_preserving_cyclic():
    n = M([[2, 1], [1, 1]])
    cls = classify_nilpotent_subgroup([n])
    b, word = select_special_element(cls)
    assert b.det() == 1 and not has_one_in_spectrum(b)
    assert lefschetz_number(b) != 0
    assert evaluate_word(word, [n]) == b


def test_special_element_plus_minus_parabolic():
    gens = [M([[1, 1], [0, 1]]), MINUS_IDENTITY]
    cls = classify_nilpotent_subgroup(gens)
    b, word = select_special_element(cls)
    assert b.det() == 1 and not has_one_in_spectrum(b)
    assert evaluate_word(word, gens) == b


@settings(max_examples=60)
@given(st.integers(0, 2 ** 32 - 1))
def test_special_element_invariant_on_random_cyclic_groups(seed):
    rng = np.random.default_rng(seed)
    n = random_element(rng)
    if classify_element(n).kind == "finite-order":
        return
    cls = classify_nilpotent_subgroup([n])
    assert cls.kind == "cyclic"
    try:
        b, word = select_special_element(cls)
    except NoSpecialElement:
        # only parabolic-type roots lack one
        assert has_one_in_spectrum(cls.root) or has_one_in_spectrum(cls.root ** 2)
        return
    assert b.det() == 1
    assert lefschetz_number(b) != 0
    assert evaluate_word(word, [n]) == b
