"""Truncated multivariate power series (jets) and polynomial map germs.

A :class:`Jet` stores a polynomial in ``num_vars`` variables, truncated at a
total degree ``order``, as a sparse mapping from exponent tuples to
:class:`~germglue.scalars.Coeff`.  Jets are the computational stand-in for
germs of holomorphic functions along a zero section: two germs are treated as
equal when their jets agree, and every certificate produced downstream
records the order at which identities were checked.

A :class:`PolyMap` is a tuple of jets sharing one source variable count and
one order, and models a map germ.  Composition and inversion are only defined
for maps all of whose components are constant-free; that is exactly the
condition under which the truncated composite depends on the operands only
through their jets.

An :class:`AlgebraHom` records images of the coordinate generators of a
fibred polynomial algebra.  The dictionary between ideal-preserving algebra
homomorphisms and map germs is implemented by :func:`hom_to_map` /
:func:`map_to_hom`; it is literally a re-labelling once the ideal condition
("fiber images vanish on the zero section") has been checked.

All operations are pure: they never mutate their operands, so values can be
shared freely across threads.
"""

from __future__ import annotations

from typing import Dict, Iterable, Sequence, Tuple

from .errors import (
    CompositionDomainError,
    InvalidHomError,
    NotInvertibleError,
    ShapeError,
)
from .scalars import Coeff, ONE, ZERO

Exponent = Tuple[int, ...]
Terms = Dict[Exponent, Coeff]


class Jet:
    """Polynomial truncated at total degree ``order``.

    ``terms`` maps exponent tuples of length ``num_vars`` to nonzero
    coefficients; no stored exponent exceeds ``order`` in total degree.
    Instances are immutable by convention: no public operation mutates them.
    """

    __slots__ = ("num_vars", "order", "terms")

    def __init__(self, num_vars: int, order: int, terms: Terms):
        self.num_vars = num_vars
        self.order = order
        self.terms = terms

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Jet):
            return NotImplemented
        return jet_eq(self, other)

    def __hash__(self):
        raise TypeError("jets are not hashable")

    def __repr__(self) -> str:
        body = " + ".join(
            f"{c!r}*x^{e}" for e, c in sorted(self.terms.items(), key=_grlex_key)
        )
        return f"Jet({self.num_vars} vars, order {self.order}: {body or '0'})"


def _grlex_key(item):
    e = item[0]
    return (sum(e), e)


def grlex_terms(f: Jet):
    """Terms of ``f`` in graded-lexicographic order (the canonical order used
    for serialization and for reporting offending exponents)."""
    return sorted(f.terms.items(), key=_grlex_key)


def jet_zero(num_vars: int, order: int) -> Jet:
    _check_shape_args(num_vars, order)
    return Jet(num_vars, order, {})


def jet_const(num_vars: int, order: int, value: Coeff) -> Jet:
    _check_shape_args(num_vars, order)
    if value.is_zero():
        return Jet(num_vars, order, {})
    return Jet(num_vars, order, {(0,) * num_vars: value})


def jet_var(num_vars: int, order: int, index: int) -> Jet:
    """The coordinate monomial x_index as a jet."""
    _check_shape_args(num_vars, order)
    if not 0 <= index < num_vars:
        raise ShapeError(f"variable index {index} out of range for {num_vars} vars")
    if order < 1:
        raise ShapeError("order must be >= 1 to hold a coordinate monomial")
    e = tuple(1 if k == index else 0 for k in range(num_vars))
    return Jet(num_vars, order, {e: ONE})


def jet_from_terms(num_vars: int, order: int, terms: Iterable[tuple[Exponent, Coeff]]) -> Jet:
    """Build a jet from explicit terms, rejecting out-of-shape exponents."""
    _check_shape_args(num_vars, order)
    out: Terms = {}
    for e, c in terms:
        e = tuple(e)
        if len(e) != num_vars or any(k < 0 for k in e):
            raise ShapeError(f"exponent {e} does not fit {num_vars} variables")
        if sum(e) > order:
            raise ShapeError(f"exponent {e} exceeds truncation order {order}")
        if c.is_zero():
            continue
        acc = out.get(e)
        c = c if acc is None else acc + c
        if c.is_zero():
            out.pop(e, None)
        else:
            out[e] = c
    return Jet(num_vars, order, out)


def _check_shape_args(num_vars: int, order: int) -> None:
    if num_vars < 0 or order < 0:
        raise ShapeError("num_vars and order must be non-negative")


def _check_same_shape(a: Jet, b: Jet) -> None:
    if a.num_vars != b.num_vars or a.order != b.order:
        raise ShapeError(
            f"jet shape mismatch: ({a.num_vars} vars, order {a.order}) vs "
            f"({b.num_vars} vars, order {b.order})"
        )


def jet_add(a: Jet, b: Jet) -> Jet:
    _check_same_shape(a, b)
    out = dict(a.terms)
    for e, c in b.terms.items():
        acc = out.get(e)
        s = c if acc is None else acc + c
        if s.is_zero():
            out.pop(e, None)
        else:
            out[e] = s
    return Jet(a.num_vars, a.order, out)


def jet_neg(a: Jet) -> Jet:
    return Jet(a.num_vars, a.order, {e: -c for e, c in a.terms.items()})


def jet_sub(a: Jet, b: Jet) -> Jet:
    return jet_add(a, jet_neg(b))


def jet_scale(a: Jet, s: Coeff) -> Jet:
    if s.is_zero():
        return Jet(a.num_vars, a.order, {})
    out = {}
    for e, c in a.terms.items():
        v = s * c
        if not v.is_zero():
            out[e] = v
    return Jet(a.num_vars, a.order, out)


def jet_mul(a: Jet, b: Jet) -> Jet:
    """Truncated product; degree pairs above ``order`` are never formed."""
    _check_same_shape(a, b)
    order = a.order
    if not a.terms or not b.terms:
        return Jet(a.num_vars, order, {})
    bs = sorted(((sum(e), e, c) for e, c in b.terms.items()))
    out: Terms = {}
    for ea, ca in a.terms.items():
        da = sum(ea)
        room = order - da
        if room < 0:
            continue
        for db, eb, cb in bs:
            if db > room:
                break
            e = tuple(x + y for x, y in zip(ea, eb))
            v = ca * cb
            acc = out.get(e)
            if acc is not None:
                v = acc + v
            if v.is_zero():
                out.pop(e, None)
            else:
                out[e] = v
    return Jet(a.num_vars, order, out)


def jet_pow(a: Jet, k: int) -> Jet:
    if k < 0:
        raise ShapeError("negative power of a jet")
    out = jet_const(a.num_vars, a.order, ONE)
    for _ in range(k):
        out = jet_mul(out, a)
    return out


def jet_truncate(a: Jet, order: int) -> Jet:
    """Forget terms above ``order`` (which must not exceed the current one)."""
    if order > a.order:
        raise ShapeError("cannot truncate to a higher order; use jet_with_order")
    return Jet(a.num_vars, order, {e: c for e, c in a.terms.items() if sum(e) <= order})


def jet_with_order(a: Jet, order: int) -> Jet:
    """Re-declare the truncation order, treating the stored terms as exact
    polynomial data.  Raising the order adds no information; lowering it
    truncates."""
    if order < a.order:
        return jet_truncate(a, order)
    return Jet(a.num_vars, order, dict(a.terms))


def jet_eq(a: Jet, b: Jet) -> bool:
    if a.num_vars != b.num_vars or a.order != b.order:
        return False
    if a.terms.keys() == b.terms.keys():
        pairs = ((a.terms[e], b.terms[e]) for e in a.terms)
    else:
        keys = set(a.terms) | set(b.terms)
        zero = ZERO
        pairs = ((a.terms.get(e, zero), b.terms.get(e, zero)) for e in keys)
    return all(x == y for x, y in pairs)


def jet_is_zero(a: Jet) -> bool:
    return all(c.is_zero() for c in a.terms.values())


def jet_partial(a: Jet, var: int) -> Jet:
    """Formal partial derivative; the order drops by one in the differentiated
    grading (total order here), never below zero."""
    if not 0 <= var < a.num_vars:
        raise ShapeError(f"variable index {var} out of range")
    out: Terms = {}
    for e, c in a.terms.items():
        k = e[var]
        if k == 0:
            continue
        d = list(e)
        d[var] = k - 1
        v = Coeff(k) * c
        if not v.is_zero():
            out[tuple(d)] = v
    return Jet(a.num_vars, max(a.order - 1, 0), out)


def jet_mul_var(a: Jet, var: int, power: int = 1) -> Jet:
    """Multiply by the coordinate monomial x_var**power, keeping the order.

    Raises if a shifted term would exceed the truncation order: callers that
    need headroom should lift the order first (`jet_with_order`)."""
    if not 0 <= var < a.num_vars:
        raise ShapeError(f"variable index {var} out of range")
    out: Terms = {}
    for e, c in a.terms.items():
        if sum(e) + power > a.order:
            raise ShapeError("variable shift exceeds truncation order")
        d = list(e)
        d[var] += power
        out[tuple(d)] = c
    return Jet(a.num_vars, a.order, out)


def jet_eval(a: Jet, point: Sequence[Coeff]) -> Coeff:
    """Exact evaluation at a point (tuple of Coeff)."""
    if len(point) != a.num_vars:
        raise ShapeError("evaluation point has wrong length")
    powers: list[dict[int, Coeff]] = [{0: ONE} for _ in range(a.num_vars)]

    def pw(i: int, k: int) -> Coeff:
        cache = powers[i]
        got = cache.get(k)
        if got is None:
            got = cache[k - 1] if k - 1 in cache else pw(i, k - 1)
            got = got * point[i]
            cache[k] = got
        return got

    acc = ZERO
    for e, c in a.terms.items():
        term = c
        for i, k in enumerate(e):
            if k:
                term = term * pw(i, k)
        acc = acc + term
    return acc


def jet_substitute_zero(a: Jet, vars_to_zero: Sequence[int]) -> Jet:
    """Set the given variables to zero, keeping the variable count."""
    kill = set(vars_to_zero)
    out = {e: c for e, c in a.terms.items() if all(e[i] == 0 for i in kill)}
    return Jet(a.num_vars, a.order, dict(out))


def jet_project(a: Jet, keep: Sequence[int]) -> Jet:
    """Project onto a subset of variables; terms involving dropped variables
    must have already been removed (ShapeError otherwise)."""
    keep = list(keep)
    dropped = [i for i in range(a.num_vars) if i not in keep]
    out: Terms = {}
    for e, c in a.terms.items():
        if any(e[i] for i in dropped):
            raise ShapeError("projection would lose a term; substitute zero first")
        out[tuple(e[i] for i in keep)] = c
    return Jet(len(keep), a.order, out)


def jet_extend_vars(a: Jet, num_vars: int) -> Jet:
    """View a jet in a larger variable ring (new variables appended)."""
    if num_vars < a.num_vars:
        raise ShapeError("cannot extend to fewer variables")
    pad = (0,) * (num_vars - a.num_vars)
    return Jet(num_vars, a.order, {e + pad: c for e, c in a.terms.items()})


def jet_flip_var(a: Jet, var: int) -> Jet:
    """Substitute x_var -> -x_var (sign twist by exponent parity)."""
    if not 0 <= var < a.num_vars:
        raise ShapeError(f"variable index {var} out of range")
    out = {}
    for e, c in a.terms.items():
        out[e] = -c if e[var] % 2 else c
    return Jet(a.num_vars, a.order, out)


def jet_constant_term(a: Jet) -> Coeff:
    return a.terms.get((0,) * a.num_vars, ZERO)


def jet_is_constant_free(a: Jet) -> bool:
    return jet_constant_term(a).is_zero()


# ---------------------------------------------------------------------------
# Polynomial map germs
# ---------------------------------------------------------------------------


class PolyMap:
    """Map germ: ``target_vars`` jets, each in ``source_vars`` variables,
    sharing one truncation order."""

    __slots__ = ("source_vars", "target_vars", "order", "components")

    def __init__(self, source_vars: int, components: Sequence[Jet]):
        components = tuple(components)
        if not components:
            raise ShapeError("a map needs at least one component")
        order = components[0].order
        for f in components:
            if f.num_vars != source_vars:
                raise ShapeError("component variable count differs from source_vars")
            if f.order != order:
                raise ShapeError("components must share one truncation order")
        self.source_vars = source_vars
        self.target_vars = len(components)
        self.order = order
        self.components = components

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PolyMap):
            return NotImplemented
        return (
            self.source_vars == other.source_vars
            and self.target_vars == other.target_vars
            and all(jet_eq(a, b) for a, b in zip(self.components, other.components))
        )

    def __hash__(self):
        raise TypeError("maps are not hashable")

    def __repr__(self) -> str:
        return f"PolyMap({self.source_vars} -> {self.target_vars}, order {self.order})"


def identity_map(num_vars: int, order: int) -> PolyMap:
    return PolyMap(num_vars, [jet_var(num_vars, order, i) for i in range(num_vars)])


def map_eq(f: PolyMap, g: PolyMap) -> bool:
    return f == g


def map_is_constant_free(g: PolyMap) -> bool:
    return all(jet_is_constant_free(c) for c in g.components)


def map_sub(f: PolyMap, g: PolyMap) -> PolyMap:
    if (f.source_vars, f.target_vars) != (g.source_vars, g.target_vars):
        raise ShapeError("map shape mismatch")
    return PolyMap(f.source_vars, [jet_sub(a, b) for a, b in zip(f.components, g.components)])


def map_eval(f: PolyMap, point: Sequence[Coeff]) -> tuple[Coeff, ...]:
    return tuple(jet_eval(c, point) for c in f.components)


def linear_part(f: PolyMap) -> list[list[Coeff]]:
    """Matrix L with L[i][j] = coefficient of x_j in component i."""
    mat = []
    for comp in f.components:
        row = []
        for j in range(f.source_vars):
            e = tuple(1 if k == j else 0 for k in range(f.source_vars))
            row.append(comp.terms.get(e, ZERO))
        mat.append(row)
    return mat


def jet_compose(f: Jet, g: PolyMap) -> Jet:
    """K-jet of f o g.

    Requires every component of ``g`` to be constant-free; with a constant
    term present, coefficients of f beyond the truncation order would
    contribute below it and the result would not be a function of the jets.
    """
    if f.num_vars != g.target_vars:
        raise ShapeError(
            f"cannot substitute a {g.target_vars}-component map into a "
            f"{f.num_vars}-variable jet"
        )
    if f.order != g.order:
        raise ShapeError("jet and map must share one truncation order")
    if not map_is_constant_free(g):
        raise CompositionDomainError(
            "substitution target has a constant term; composition is not "
            "defined on truncations"
        )
    order = f.order
    nv = g.source_vars
    one = jet_const(nv, order, ONE)
    cache: dict[Exponent, Jet] = {(0,) * f.num_vars: one}

    def monomial(e: Exponent) -> Jet:
        got = cache.get(e)
        if got is not None:
            return got
        i = next(k for k, v in enumerate(e) if v > 0)
        prev = list(e)
        prev[i] -= 1
        val = jet_mul(monomial(tuple(prev)), g.components[i])
        cache[e] = val
        return val

    acc = jet_zero(nv, order)
    for e, c in sorted(f.terms.items(), key=_grlex_key):
        acc = jet_add(acc, jet_scale(monomial(e), c))
    return acc


def map_compose(g: PolyMap, f: PolyMap) -> PolyMap:
    """The composite f o g (apply ``g`` first, then ``f``)."""
    if g.target_vars != f.source_vars:
        raise ShapeError("inner map target does not match outer map source")
    return PolyMap(g.source_vars, [jet_compose(comp, g) for comp in f.components])


def _coeff_matrix_inverse(mat: list[list[Coeff]]) -> list[list[Coeff]]:
    """Exact Gauss-Jordan inverse of a square Coeff matrix."""
    n = len(mat)
    aug = [[mat[i][j] for j in range(n)] + [ONE if i == j else ZERO for j in range(n)]
           for i in range(n)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if not aug[r][col].is_zero()), None)
        if pivot is None:
            raise NotInvertibleError("linear part is singular")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        inv = ONE / aug[col][col]
        aug[col] = [inv * x for x in aug[col]]
        for r in range(n):
            if r == col:
                continue
            factor = aug[r][col]
            if factor.is_zero():
                continue
            aug[r] = [x - factor * y for x, y in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


def _apply_linear(mat: list[list[Coeff]], vec: Sequence[Jet]) -> list[Jet]:
    out = []
    for row in mat:
        acc = jet_zero(vec[0].num_vars, vec[0].order)
        for c, jet in zip(row, vec):
            if not c.is_zero():
                acc = jet_add(acc, jet_scale(jet, c))
        out.append(acc)
    return out


def map_inverse(f: PolyMap) -> PolyMap:
    """Formal inverse germ of a constant-free square map with invertible
    linear part.  The result ``g`` satisfies f o g = g o f = id up to the
    truncation order."""
    if f.source_vars != f.target_vars:
        raise ShapeError("only square maps can be inverted")
    if not map_is_constant_free(f):
        raise CompositionDomainError("map with constant term has no germ inverse at 0")
    n = f.source_vars
    order = f.order
    lin_inv = _coeff_matrix_inverse(linear_part(f))

    # Higher-degree part h := f - linear(f); the fixed-point iteration
    # g <- L^{-1} (id - h o g) gains at least one correct order per step.
    higher = []
    for comp in f.components:
        terms = {e: c for e, c in comp.terms.items() if sum(e) >= 2}
        higher.append(Jet(n, order, terms))
    ident = identity_map(n, order)
    g = PolyMap(n, _apply_linear(lin_inv, ident.components))
    for _ in range(max(order, 2)):
        hg = [jet_compose(h, g) for h in higher]
        target = [jet_sub(i, h) for i, h in zip(ident.components, hg)]
        g_next = PolyMap(n, _apply_linear(lin_inv, target))
        if g_next == g:
            break
        g = g_next
    return g


# ---------------------------------------------------------------------------
# Algebra homomorphisms along a zero section
# ---------------------------------------------------------------------------


class AlgebraHom:
    """Generator images of an algebra endomorphism of a fibred jet algebra.

    ``base_vars`` of the generators are base coordinates, the rest are fiber
    coordinates; images of fiber generators must vanish on the zero section
    (every term carries positive fiber degree), which is the ideal condition
    making the hom correspond to a map germ along the section.
    """

    __slots__ = ("base_vars", "images")

    def __init__(self, base_vars: int, images: Sequence[Jet]):
        images = tuple(images)
        if not images:
            raise InvalidHomError("a homomorphism needs generator images")
        nv = images[0].num_vars
        order = images[0].order
        if any(j.num_vars != nv or j.order != order for j in images):
            raise InvalidHomError("generator images must share one shape")
        if len(images) != nv:
            raise InvalidHomError("need as many generator images as variables")
        if not 0 <= base_vars <= nv:
            raise InvalidHomError("base_vars out of range")
        fiber = range(base_vars, nv)
        for idx in range(base_vars, nv):
            img = images[idx]
            for e in img.terms:
                if all(e[i] == 0 for i in fiber):
                    raise InvalidHomError(
                        f"image of fiber generator {idx} has a term {e} that "
                        "survives on the zero section"
                    )
        self.base_vars = base_vars
        self.images = images

    def __repr__(self) -> str:
        return f"AlgebraHom({self.base_vars} base of {len(self.images)} generators)"


def hom_to_map(h: AlgebraHom) -> PolyMap:
    """The map germ whose coordinate functions are the generator images."""
    return PolyMap(h.images[0].num_vars, h.images)


def map_to_hom(f: PolyMap, base_vars: int) -> AlgebraHom:
    """The algebra homomorphism sending each generator to the matching
    component of ``f``; validates the ideal condition."""
    if f.source_vars != f.target_vars:
        raise InvalidHomError("only endomorphism-shaped maps define homs")
    return AlgebraHom(base_vars, f.components)
