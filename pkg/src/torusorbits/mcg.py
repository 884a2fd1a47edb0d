"""Exact algebra on torus mapping classes, i.e. the group GL(2,Z).

Everything in this module is integer or rational arithmetic; no floats.
It provides Lefschetz numbers, the eigenvalue-1 test, torsion typing of
single matrices, a capped breadth-first group closure, the classification
of nilpotent subgroups (cyclic / plus-minus cyclic / dihedral of order 8,
with an explicit rational conjugator in the dihedral case), and the
selection of an orientation-preserving "special" element B with
det(B) = 1 and 1 not in spec(B) whose cyclic span has finite index.

Words are tuples of signed 1-based generator indices: (1, -2) stands for
g1 * g2^-1, evaluated left to right.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import gcd
from typing import Literal, Optional, Sequence

Word = tuple[int, ...]


class GroupStructureError(ValueError):
    """The input does not have the group structure the operation needs."""


class NoSpecialElement(ValueError):
    """Every element of the classified group has 1 in its spectrum."""


@dataclass(frozen=True, order=True)
class IntMatrix2:
    """A 2x2 integer matrix with determinant +1 or -1 (an element of GL(2,Z)).

    Entries are row-major: [[a, b], [c, d]]. The constructor rejects any
    determinant other than +1 or -1, so every instance is invertible over Z.
    Instances are immutable and hashable; the derived ordering is the
    lexicographic order on (a, b, c, d) used for deterministic tie-breaking.
    """

    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        for entry in (self.a, self.b, self.c, self.d):
            if not isinstance(entry, int):
                raise TypeError(f"matrix entries must be ints, got {entry!r}")
        if self.det() not in (1, -1):
            raise ValueError(
                f"determinant must be +1 or -1, got {self.det()} for {self.rows()}"
            )

    @staticmethod
    def from_rows(rows: Sequence[Sequence[int]]) -> "IntMatrix2":
        (a, b), (c, d) = rows
        return IntMatrix2(int(a), int(b), int(c), int(d))

    def rows(self) -> list[list[int]]:
        return [[self.a, self.b], [self.c, self.d]]

    def det(self) -> int:
        return self.a * self.d - self.b * self.c

    def trace(self) -> int:
        return self.a + self.d

    def __mul__(self, other: "IntMatrix2") -> "IntMatrix2":
        return IntMatrix2(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def __neg__(self) -> "IntMatrix2":
        return IntMatrix2(-self.a, -self.b, -self.c, -self.d)

    def inverse(self) -> "IntMatrix2":
        # adjugate divided by det; det is +/-1 so this stays integral
        s = self.det()
        return IntMatrix2(s * self.d, -s * self.b, -s * self.c, s * self.a)

    def __pow__(self, n: int) -> "IntMatrix2":
        base = self if n >= 0 else self.inverse()
        out = IDENTITY
        for _ in range(abs(n)):
            out = out * base
        return out

    def apply(self, v: tuple[int, int]) -> tuple[int, int]:
        return (self.a * v[0] + self.b * v[1], self.c * v[0] + self.d * v[1])

    def max_abs(self) -> int:
        return max(abs(self.a), abs(self.b), abs(self.c), abs(self.d))

    def is_identity(self) -> bool:
        return self == IDENTITY


IDENTITY = IntMatrix2(1, 0, 0, 1)
MINUS_IDENTITY = IntMatrix2(-1, 0, 0, -1)


@dataclass(frozen=True)
class RatMatrix2:
    """A 2x2 rational matrix with nonzero determinant.

    Entries are Fractions, which keeps them in lowest terms canonically, so
    equal rationals compare equal. Serialization uses {"num": n, "den": d}
    pairs with d > 0.
    """

    a: Fraction
    b: Fraction
    c: Fraction
    d: Fraction

    def __post_init__(self):
        object.__setattr__(self, "a", Fraction(self.a))
        object.__setattr__(self, "b", Fraction(self.b))
        object.__setattr__(self, "c", Fraction(self.c))
        object.__setattr__(self, "d", Fraction(self.d))
        if self.det() == 0:
            raise ValueError("rational matrix must be invertible")

    @staticmethod
    def from_int(m: IntMatrix2) -> "RatMatrix2":
        return RatMatrix2(Fraction(m.a), Fraction(m.b), Fraction(m.c), Fraction(m.d))

    @staticmethod
    def identity() -> "RatMatrix2":
        return RatMatrix2(Fraction(1), Fraction(0), Fraction(0), Fraction(1))

    def det(self) -> Fraction:
        return self.a * self.d - self.b * self.c

    def __mul__(self, other: "RatMatrix2") -> "RatMatrix2":
        return RatMatrix2(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def inverse(self) -> "RatMatrix2":
        det = self.det()
        return RatMatrix2(self.d / det, -self.b / det, -self.c / det, self.a / det)

    def conjugate(self, m: IntMatrix2) -> "RatMatrix2":
        """Return self^-1 * m * self."""
        return self.inverse() * RatMatrix2.from_int(m) * self

    def to_int(self) -> IntMatrix2:
        for entry in (self.a, self.b, self.c, self.d):
            if entry.denominator != 1:
                raise ValueError(f"matrix is not integral: {self}")
        return IntMatrix2(int(self.a), int(self.b), int(self.c), int(self.d))

    def is_integral(self) -> bool:
        return all(e.denominator == 1 for e in (self.a, self.b, self.c, self.d))

    def to_json(self) -> list[list[dict]]:
        def frac(x: Fraction) -> dict:
            return {"num": x.numerator, "den": x.denominator}

        return [[frac(self.a), frac(self.b)], [frac(self.c), frac(self.d)]]

    @staticmethod
    def from_json(rows) -> "RatMatrix2":
        (a, b), (c, d) = rows
        def frac(x) -> Fraction:
            return Fraction(int(x["num"]), int(x["den"]))
        return RatMatrix2(frac(a), frac(b), frac(c), frac(d))


# The order-8 dihedral group that every non-abelian nilpotent mapping-class
# group is rationally conjugate to: +/-Id, the diagonal reflections, the
# quarter turns, and the antidiagonal reflections.
H_GROUP: tuple[IntMatrix2, ...] = (
    IntMatrix2(1, 0, 0, 1),
    IntMatrix2(-1, 0, 0, -1),
    IntMatrix2(1, 0, 0, -1),
    IntMatrix2(-1, 0, 0, 1),
    IntMatrix2(0, -1, 1, 0),
    IntMatrix2(0, 1, -1, 0),
    IntMatrix2(0, 1, 1, 0),
    IntMatrix2(0, -1, -1, 0),
)


def lefschetz_number(m: IntMatrix2) -> int:
    """det(Id - m) = 1 - trace(m) + det(m), exactly."""
    return 1 - m.trace() + m.det()


def has_one_in_spectrum(m: IntMatrix2) -> bool:
    """True iff 1 is an eigenvalue of m, i.e. the Lefschetz number vanishes."""
    return lefschetz_number(m) == 0


# torsion orders that occur in GL(2,Z)
_FINITE_ORDERS = (1, 2, 3, 4, 6)


@dataclass(frozen=True)
class ElementType:
    kind: Literal["finite-order", "parabolic", "hyperbolic"]
    order: Optional[int] = None  # set exactly when kind == "finite-order"

    def __str__(self) -> str:
        if self.kind == "finite-order":
            return f"finite-order({self.order})"
        return self.kind


def classify_element(m: IntMatrix2) -> ElementType:
    """Type a mapping class: exact finite order, or its projective fixed-point
    count on the circle R u {inf} (parabolic = one, hyperbolic = two).

    Finite order in GL(2,Z) is only possible for orders 1, 2, 3, 4, 6, so the
    least order is found by direct power checks. A determinant-1 matrix with
    trace +/-2 that is not +/-Id is parabolic; everything else of infinite
    order has two real projective fixed points.
    """
    for n in _FINITE_ORDERS:
        if m ** n == IDENTITY:
            return ElementType("finite-order", n)
    if m.det() == 1 and abs(m.trace()) == 2:
        return ElementType("parabolic")
    return ElementType("hyperbolic")


def is_finite_order(m: IntMatrix2) -> bool:
    return classify_element(m).kind == "finite-order"


def evaluate_word(word: Word, gens: Sequence[IntMatrix2]) -> IntMatrix2:
    """Evaluate a signed-index word against a generator list, left to right."""
    out = IDENTITY
    for idx in word:
        if idx == 0 or abs(idx) > len(gens):
            raise ValueError(f"word index {idx} out of range for {len(gens)} generators")
        g = gens[abs(idx) - 1]
        out = out * (g if idx > 0 else g.inverse())
    return out


@dataclass
class ClosureResult:
    """Group closure of a generating set, or the partial set when a cap trips.

    ``elements`` maps each element to one shortest witnessing word, in
    deterministic BFS discovery order. ``finite`` is True only when the BFS
    exhausted its queue, i.e. the closure provably stabilized within caps.
    """

    finite: bool
    elements: dict[IntMatrix2, Word]
    cap_hit: Optional[str] = None  # "element-cap" or "word-cap"

    def __len__(self) -> int:
        return len(self.elements)


def closure(
    gens: Sequence[IntMatrix2],
    element_cap: int = 10_000,
    word_cap: int = 12,
) -> ClosureResult:
    """Breadth-first closure of <gens> under right multiplication by each
    generator and its inverse. Deterministic: the queue order is fixed by the
    generator list, and each element keeps the first (hence shortest) word
    that produced it.
    """
    if element_cap <= 0 or word_cap <= 0:
        raise ValueError("caps must be positive")
    steps: list[tuple[IntMatrix2, int]] = []
    for i, g in enumerate(gens, start=1):
        steps.append((g, i))
        steps.append((g.inverse(), -i))

    elements: dict[IntMatrix2, Word] = {IDENTITY: ()}
    frontier: list[IntMatrix2] = [IDENTITY]
    depth = 0
    while frontier:
        depth += 1
        if depth > word_cap:
            return ClosureResult(False, elements, "word-cap")
        new_frontier: list[IntMatrix2] = []
        for base in frontier:
            base_word = elements[base]
            for step, idx in steps:
                nxt = base * step
                if nxt in elements:
                    continue
                if len(elements) >= element_cap:
                    return ClosureResult(False, elements, "element-cap")
                elements[nxt] = base_word + (idx,)
                new_frontier.append(nxt)
        frontier = new_frontier
    return ClosureResult(True, elements)


@dataclass
class McgClassification:
    """Outcome of classifying a nilpotent mapping-class subgroup.

    kind:
      trivial             the group is {Id}
      cyclic              group = <root>; each generator is root^k
      plus-minus-cyclic   group = <root, -root>; each generator is +/-root^k
      dihedral            rationally conjugate to the 8-element group H_GROUP
      not-nilpotent       witness word evaluates outside {+/-Id} as a
                          commutator (or a deeper commutator is nontrivial)
      inconclusive        caps exhausted without a certificate

    ``generator_powers`` records, per input generator, the certified (sign,
    exponent) pair with respect to ``root``. ``minus_id_word`` is a word for
    -Id when the group is known to contain it. ``table`` lists all 8 elements
    with words in the dihedral case.
    """

    kind: Literal[
        "trivial", "cyclic", "plus-minus-cyclic", "dihedral",
        "not-nilpotent", "inconclusive",
    ]
    root: Optional[IntMatrix2] = None
    root_word: Optional[Word] = None
    generator_powers: Optional[list[tuple[int, int]]] = None
    minus_id_word: Optional[Word] = None
    conjugator: Optional[RatMatrix2] = None
    table: Optional[list[tuple[IntMatrix2, Word]]] = None
    witness_word: Optional[Word] = None
    witness_matrix: Optional[IntMatrix2] = None
    group_order: Optional[int] = None  # set when the closure stabilized
    note: Optional[str] = None


def _commutator_word(i: int, j: int) -> Word:
    return (i, j, -i, -j)


def _as_power_of(
    g: IntMatrix2, root: IntMatrix2, allow_sign: bool, k_cap: int
) -> Optional[tuple[int, int]]:
    """Find (sign, k) with g == sign * root^k, for an infinite-order root.

    Entries of root^k are unbounded as |k| grows (a bounded set of integer
    matrices would force finite order), so the scan stops once both power
    directions have exceeded g's largest entry several times in a row.
    """
    signs = (1, -1) if allow_sign else (1,)
    bound = g.max_abs()
    pos = IDENTITY
    neg = IDENTITY
    grown = 0
    for k in range(k_cap + 1):
        for sign, mat in ((1, pos), (-1, neg)):
            for s in signs:
                if (mat if s == 1 else -mat) == g:
                    return (s, sign * k)
        if min(pos.max_abs(), neg.max_abs()) > bound:
            grown += 1
            if grown >= 8:
                return None
        pos = pos * root
        neg = neg * root.inverse()
    return None


def _finite_group_power_table(root: IntMatrix2) -> list[IntMatrix2]:
    powers = [IDENTITY]
    cur = root
    while cur != IDENTITY:
        powers.append(cur)
        cur = cur * root
        if len(powers) > 12:  # finite subgroups of GL(2,Z) have order <= 12
            raise GroupStructureError("power table did not close; root is not finite order")
    return powers


def _classify_finite(
    gens: Sequence[IntMatrix2], closed: ClosureResult
) -> McgClassification:
    elements = closed.elements
    order = len(elements)
    if order == 1:
        return McgClassification("trivial", group_order=1)

    minus_word = elements.get(MINUS_IDENTITY)

    # cyclic: first element in BFS order whose powers span the whole group
    for el, word in elements.items():
        if el == IDENTITY:
            continue
        powers = _finite_group_power_table(el)
        if len(powers) == order:
            gen_powers = [(1, powers.index(g)) for g in gens]
            return McgClassification(
                "cyclic",
                root=el,
                root_word=word,
                generator_powers=gen_powers,
                minus_id_word=minus_word,
                group_order=order,
            )

    # plus-minus cyclic: some element's powers cover half, with -Id supplying signs
    if MINUS_IDENTITY in elements:
        for el, word in elements.items():
            if el in (IDENTITY, MINUS_IDENTITY):
                continue
            powers = _finite_group_power_table(el)
            signed = set(powers) | {-p for p in powers}
            if len(signed) == order and all(g in signed for g in gens):
                gen_powers = []
                for g in gens:
                    if g in powers:
                        gen_powers.append((1, powers.index(g)))
                    else:
                        gen_powers.append((-1, powers.index(-g)))
                return McgClassification(
                    "plus-minus-cyclic",
                    root=el,
                    root_word=word,
                    generator_powers=gen_powers,
                    minus_id_word=minus_word,
                    group_order=order,
                )

    if order == 8:
        table = sorted(elements.items(), key=lambda kv: kv[0])
        try:
            conj = conjugate_to_H([m for m, _ in table])
        except GroupStructureError as exc:
            return McgClassification(
                "inconclusive", group_order=order,
                note=f"order-8 group without dihedral structure: {exc}",
            )
        return McgClassification(
            "dihedral",
            conjugator=conj,
            table=table,
            minus_id_word=minus_word,
            group_order=order,
        )

    return McgClassification(
        "inconclusive", group_order=order,
        note=f"finite group of order {order} matched no known nilpotent shape",
    )


def _classify_infinite(
    gens: Sequence[IntMatrix2], closed: ClosureResult, word_cap: int
) -> McgClassification:
    # Root candidates: infinite-order elements of the partial closure, by
    # minimal |trace| then lexicographic entries. The choice is certified a
    # posteriori (every generator must be exactly +/-root^k), so trying
    # candidates in order until one certifies is safe.
    candidates = sorted(
        (el for el in closed.elements if not is_finite_order(el)),
        key=lambda m: (abs(m.trace()), (m.a, m.b, m.c, m.d)),
    )
    if not candidates:
        return McgClassification(
            "inconclusive",
            note="closure cap hit before any infinite-order element appeared",
        )
    k_cap = max(64, 8 * word_cap)

    for allow_sign in (False, True):
        for root in candidates:
            powers = [_as_power_of(g, root, allow_sign, k_cap) for g in gens]
            if any(p is None for p in powers):
                continue
            kind = "cyclic" if not allow_sign else "plus-minus-cyclic"
            minus_word = closed.elements.get(MINUS_IDENTITY)
            if allow_sign and minus_word is None:
                # group = <root, -root> must contain -Id; with caps too tight
                # to witness it we refuse to certify
                return McgClassification(
                    "inconclusive",
                    note="generators need signs but -Id was not reached within caps",
                )
            return McgClassification(
                kind,
                root=root,
                root_word=closed.elements[root],
                generator_powers=powers,
                minus_id_word=minus_word,
            )
    return McgClassification(
        "inconclusive",
        note="no infinite-order closure element certified as a primitive root",
    )


def classify_nilpotent_subgroup(
    gens: Sequence[IntMatrix2],
    element_cap: int = 10_000,
    word_cap: int = 12,
) -> McgClassification:
    """Classify the subgroup of GL(2,Z) generated by ``gens``.

    Strategy: a nilpotent subgroup of GL(2,Z) is cyclic, cyclic up to sign,
    or an 8-element dihedral group, and in every one of those shapes all
    commutators land in {Id, -Id} (which is central). So a generator-pair
    commutator outside {+/-Id} certifies non-nilpotency. Once commutators
    pass, the group is nilpotent of class <= 2 and the shape is decided by
    a capped closure (finite case) or primitive-root certification
    (infinite case). Caps exhausted without a certificate yield
    "inconclusive", never a guess.
    """
    if not gens:
        raise ValueError("generator list must be nonempty")

    for i in range(len(gens)):
        for j in range(i + 1, len(gens)):
            comm = gens[i] * gens[j] * gens[i].inverse() * gens[j].inverse()
            if comm not in (IDENTITY, MINUS_IDENTITY):
                return McgClassification(
                    "not-nilpotent",
                    witness_word=_commutator_word(i + 1, j + 1),
                    witness_matrix=comm,
                    note="generator commutator lies outside {Id, -Id}",
                )
            # a commutator equal to +/-Id is central, so deeper commutators
            # vanish identically; checked anyway as a cheap sanity gate
            for k in range(len(gens)):
                deep = comm * gens[k] * comm.inverse() * gens[k].inverse()
                if deep != IDENTITY:
                    return McgClassification(
                        "not-nilpotent",
                        witness_word=_commutator_word(i + 1, j + 1) + (k + 1,)
                        + tuple(-x for x in reversed(_commutator_word(i + 1, j + 1)))
                        + (-(k + 1),),
                        witness_matrix=deep,
                        note="iterated commutator is nontrivial",
                    )

    closed = closure(gens, element_cap=element_cap, word_cap=word_cap)
    if closed.finite:
        return _classify_finite(gens, closed)
    return _classify_infinite(gens, closed, word_cap)


def conjugate_to_H(elements: Sequence[IntMatrix2]) -> RatMatrix2:
    """Build P in GL(2,Q) conjugating an 8-element dihedral group onto H_GROUP.

    Requires an order-4 element A with A^2 = -Id and an order-2 element B with
    spectrum {1, -1} (trace 0, det -1). P's columns are the primitive integer
    eigenvectors of B (positive leading entry), then the second column is
    rescaled so A lands on a quarter turn. Raises GroupStructureError when the
    required pair does not exist or verification fails.
    """
    if len(set(elements)) != len(elements):
        raise GroupStructureError("elements are not distinct")
    if set(elements) == set(H_GROUP):
        return RatMatrix2.identity()

    ordered = sorted(elements)
    a_mat = next((m for m in ordered if m * m == MINUS_IDENTITY), None)
    b_mat = next((m for m in ordered if m.trace() == 0 and m.det() == -1), None)
    if a_mat is None or b_mat is None:
        raise GroupStructureError(
            "no (A, B) pair with A^2 = -Id and spec(B) = {1, -1}"
        )

    def eigenvector(m: IntMatrix2, lam: int) -> tuple[int, int]:
        # kernel of (m - lam*Id): for a nonzero row (p, q) take (q, -p)
        rows = [(m.a - lam, m.b), (m.c, m.d - lam)]
        for p, q in rows:
            if p != 0 or q != 0:
                v = (q, -p)
                break
        else:
            raise GroupStructureError(f"{lam} is not a simple eigenvalue")
        g = gcd(abs(v[0]), abs(v[1]))
        v = (v[0] // g, v[1] // g)
        lead = v[0] if v[0] != 0 else v[1]
        if lead < 0:
            v = (-v[0], -v[1])
        return v

    v_plus = eigenvector(b_mat, 1)
    v_minus = eigenvector(b_mat, -1)
    basis = RatMatrix2(
        Fraction(v_plus[0]), Fraction(v_minus[0]),
        Fraction(v_plus[1]), Fraction(v_minus[1]),
    )

    a_conj = basis.conjugate(a_mat)
    if a_conj.a != 0 or a_conj.d != 0 or a_conj.b == 0:
        raise GroupStructureError("A did not become antidiagonal in B's eigenbasis")
    scale = a_conj.b  # A is now [[0, a], [-1/a, 0]]; rescale to a = 1
    conj = basis * RatMatrix2(Fraction(1), Fraction(0), Fraction(0), Fraction(1) / scale)

    image = set()
    for m in elements:
        res = conj.conjugate(m)
        if not res.is_integral() or res.to_int() not in H_GROUP:
            raise GroupStructureError(f"conjugate of {m.rows()} lands outside H")
        image.add(res.to_int())
    if len(image) != 8:
        raise GroupStructureError("conjugation is not a bijection onto H")
    return conj


def select_special_element(cls: McgClassification) -> tuple[IntMatrix2, Word]:
    """Pick B with det(B) = 1, 1 not in spec(B), and <B> of finite index.

    Case analysis: cyclic with orientation-preserving root takes B = root,
    cyclic with orientation-reversing root takes B = root^2, the plus-minus
    cyclic case takes whichever of root^2, -root^2 avoids eigenvalue 1, and
    the dihedral case takes B = -Id. Raises NoSpecialElement when every
    element of the group has 1 in its spectrum (e.g. parabolic or trivial
    groups), which is exactly when no Lefschetz certificate can exist.
    """
    if cls.kind == "trivial":
        raise NoSpecialElement("the trivial class group has no such element")
    if cls.kind not in ("cyclic", "plus-minus-cyclic", "dihedral"):
        raise NoSpecialElement(f"classification {cls.kind} carries no group structure")

    if cls.kind == "dihedral":
        assert cls.table is not None
        for mat, word in cls.table:
            if mat == MINUS_IDENTITY:
                return mat, word
        raise GroupStructureError("dihedral table lacks -Id")  # unreachable

    root = cls.root
    assert root is not None and cls.root_word is not None

    if cls.kind == "cyclic":
        if root.det() == 1:
            candidate = root
            word = cls.root_word
        else:
            candidate = root * root
            word = cls.root_word + cls.root_word
        if has_one_in_spectrum(candidate):
            raise NoSpecialElement(
                f"every power of {root.rows()} keeps 1 in its spectrum"
            )
        return candidate, word

    # plus-minus cyclic: root^2 has det 1, and trace(root^2) cannot be +2
    # and -2 at once, so one of +/-root^2 always avoids eigenvalue 1
    square = root * root
    sq_word = cls.root_word + cls.root_word
    assert cls.minus_id_word is not None
    if not has_one_in_spectrum(square):
        return square, sq_word
    neg_square = -square
    if not has_one_in_spectrum(neg_square):
        return neg_square, cls.minus_id_word + sq_word
    raise NoSpecialElement("both root^2 and -root^2 have 1 in spectrum")  # impossible
