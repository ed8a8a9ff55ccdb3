"""Terms, declarations and canonical form.

A term is ``coeff * sympow * cfactors * nfactors``.  Factors are plain
tuples ``(head_id, args)`` and arguments are either index ints or
:class:`~formlet.algebra.Polynomial` objects, so canonical keys hash and
compare as ordinary tuples.

Index ints encode the total index order: declared indices first, then
open-bracketed ones (``[a]``), then internal dummies ``N1_?, N2_?, ...``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from . import kernels
from .algebra import (
    ONE,
    R_ONE,
    Polynomial,
    RationalCoefficient,
    rat_add,
    rat_expand,
    rat_mul,
    truncate,
)
from .errors import FormletError, IndexArityViolation

BRACKET_BASE = 1 << 20
INTERNAL_BASE = 1 << 30

NONE, SYMMETRIC, ANTISYMMETRIC = 0, 1, 2
COMMUTING_KINDS = {"cfunction", "ctensor", "tensor", "symbol", "builtin-delta"}


def internal(k):
    return INTERNAL_BASE + k


def is_internal(i):
    return i >= INTERNAL_BASE


@dataclass
class HeadDecl:
    name: str
    kind: str
    symmetry: int = NONE
    id: int = -1

    @property
    def commuting(self):
        return self.kind in COMMUTING_KINDS


@dataclass
class Decls:
    """Declaration tables shared by the parser, matcher and printer."""

    symbols: list = field(default_factory=list)
    symbol_ids: dict = field(default_factory=dict)
    index_names: dict = field(default_factory=dict)  # id -> name
    index_ids: dict = field(default_factory=dict)  # name -> id
    heads: list = field(default_factory=list)
    head_ids: dict = field(default_factory=dict)
    sets: dict = field(default_factory=dict)
    autodeclare: list = field(default_factory=list)
    dimension: object = 4  # int or ("sym", id)
    polyratfun: int | None = None
    expansion: object = None
    _n_index: int = 0

    def __post_init__(self):
        if not self.heads:
            self.add_head("d_", "builtin-delta", SYMMETRIC)
        self.symkind = [h.symmetry for h in self.heads]

    @property
    def delta(self):
        return 0

    def taken(self, name):
        return name in self.symbol_ids or name in self.index_ids or name in self.head_ids

    def add_symbol(self, name):
        if name in self.symbol_ids:
            return self.symbol_ids[name]
        self._check_new(name)
        self.symbol_ids[name] = len(self.symbols)
        self.symbols.append(name)
        return self.symbol_ids[name]

    def add_index(self, name):
        if name in self.index_ids:
            return self.index_ids[name]
        self._check_new(name)
        n = self._n_index
        self._n_index += 1
        iid = BRACKET_BASE + n if name.startswith("[") else n
        self.index_ids[name] = iid
        self.index_names[iid] = name
        return iid

    def add_head(self, name, kind, symmetry=NONE):
        if name in self.head_ids:
            h = self.heads[self.head_ids[name]]
            if h.kind != kind or h.symmetry != symmetry:
                raise FormletError(f"conflicting redeclaration of {name}")
            return h.id
        self._check_new(name)
        h = HeadDecl(name, kind, symmetry, len(self.heads))
        self.heads.append(h)
        self.head_ids[name] = h.id
        if hasattr(self, "symkind"):
            self.symkind.append(symmetry)
        return h.id

    def _check_new(self, name):
        if self.taken(name):
            raise FormletError(f"name {name} is already declared with another kind")

    def resolve_index(self, name):
        """Index id for a name, honouring autodeclare prefixes (None if unknown)."""
        if name in self.index_ids:
            return self.index_ids[name]
        if self.taken(name):
            return None
        best = None
        for prefix in self.autodeclare:
            if prefix.startswith("["):
                continue
            if name.startswith(prefix) and (best is None or len(prefix) > len(best)):
                best = prefix
        if best is None:
            return None
        return self.add_index(name)

    def index_name(self, i):
        if i >= INTERNAL_BASE:
            return f"N{i - INTERNAL_BASE}_?"
        return self.index_names[i]

    def is_commuting(self, head):
        return self.heads[head].commuting


class Term:
    """Canonical term.  Build through :meth:`Canon.make`, not directly."""

    __slots__ = ("coeff", "sym", "cf", "nf", "key", "_heads")

    def __init__(self, coeff, sym, cf, nf):
        self.coeff = coeff
        self.sym = sym
        self.cf = cf
        self.nf = nf
        self.key = (sym, cf, nf)
        self._heads = None

    @property
    def heads(self):
        h = self._heads
        if h is None:
            h = self._heads = frozenset([f[0] for f in self.cf] + [f[0] for f in self.nf])
        return h

    def with_coeff(self, c):
        return Term(c, self.sym, self.cf, self.nf)

    def __eq__(self, other):
        return isinstance(other, Term) and self.key == other.key and self.coeff == other.coeff

    def __hash__(self):
        return hash((self.key, self.coeff))

    def __repr__(self):
        return f"Term({self.coeff!r}, {self.sym}, {self.cf}, {self.nf})"

    def sort_key(self):
        return (self.nf, self.cf, self.sym)


def term_merge_key(t):
    return t.key


def max_internal(factors):
    m = 0
    for _, args in factors:
        for a in args:
            if a.__class__ is int and a >= INTERNAL_BASE and a - INTERNAL_BASE > m:
                m = a - INTERNAL_BASE
    return m


class Canon:
    """Canonicalizer bound to a declaration table."""

    def __init__(self, decls):
        self.decls = decls
        self._cache = {}

    def fix_coeff(self, c):
        exp = self.decls.expansion
        if exp is not None and exp.enabled:
            if not c.den.is_const():
                return rat_expand(c, exp)
            return truncate(c, exp)
        return c

    def make(self, coeff, sym, cf, nf):
        """Canonical Term from raw parts, or None when it vanishes.

        ``sym`` may be a dict or a sorted tuple of (symbol, exponent).
        """
        if coeff.is_zero():
            return None
        if isinstance(sym, dict):
            sym = tuple(sorted((s, e) for s, e in sym.items() if e))
        decls = self.decls
        prf = decls.polyratfun
        cf = list(cf)
        if prf is not None and any(f[0] == prf for f in cf):
            keep = []
            for f in cf:
                if f[0] == prf:
                    coeff = rat_mul(coeff, drat_value(f[1]))
                else:
                    keep.append(f)
            cf = keep
            coeff = self.fix_coeff(coeff)
            if coeff.is_zero():
                return None
        if any(f[0] == 0 for f in cf):
            res = self._contract(cf, nf, sym)
            if res is None:
                return None
            cf, nf, sym, extra = res
            if extra is not None:
                coeff = self.fix_coeff(rat_mul(coeff, extra))
        ck = (tuple(cf), tuple(nf))
        hit = self._cache.get(ck)
        if hit is None:
            hit = kernels.canon_factors(ck[0], ck[1], decls.symkind, INTERNAL_BASE)
            if len(self._cache) > 500000:
                self._cache.clear()
            self._cache[ck] = hit
        sign, rcf, rnf = hit
        if sign == 0:
            return None
        if sign < 0:
            coeff = RationalCoefficient(-coeff.num, coeff.den, True)
        return Term(coeff, sym, rcf, rnf)

    def _contract(self, cf, nf, sym):
        """Kronecker-delta contraction.  Returns None for a zero term."""
        cf = list(cf)
        nf = list(nf)
        extra = None
        dsym = {}
        changed = True
        while changed:
            changed = False
            for i, (h, args) in enumerate(cf):
                if h != 0 or len(args) != 2:
                    continue
                x, y = args
                if not (x.__class__ is int and y.__class__ is int):
                    continue
                if x == y:
                    del cf[i]
                    dim = self.decls.dimension
                    if isinstance(dim, tuple):
                        dsym[dim[1]] = dsym.get(dim[1], 0) + 1
                    else:
                        r = RationalCoefficient(Polynomial.const(dim))
                        extra = r if extra is None else rat_mul(extra, r)
                        if dim == 0:
                            return None
                    changed = True
                    break
                # pick which index to eliminate: internal, then plain, then bracketed
                cands = sorted((x, y), key=_elim_rank)
                for e in cands:
                    keep = y if e == x else x
                    loc = _find_other(cf, nf, e, i)
                    if loc is not None:
                        del cf[i]
                        j = loc[1] if loc[1] < i or loc[0] == "n" else loc[1] - 1
                        lst = nf if loc[0] == "n" else cf
                        hh, aa = lst[j]
                        aa = list(aa)
                        aa[loc[2]] = keep
                        lst[j] = (hh, tuple(aa))
                        changed = True
                        break
                if changed:
                    break
        if dsym:
            d = dict(sym)
            for s, e in dsym.items():
                d[s] = d.get(s, 0) + e
            sym = tuple(sorted(d.items()))
        return cf, nf, sym, extra


def _elim_rank(i):
    if i >= INTERNAL_BASE:
        return 0
    if i >= BRACKET_BASE:
        return 2
    return 1


def _find_other(cf, nf, idx, skip):
    for j, (h, args) in enumerate(cf):
        if j == skip:
            continue
        for s, a in enumerate(args):
            if a.__class__ is int and a == idx:
                return ("c", j, s)
    for j, (h, args) in enumerate(nf):
        for s, a in enumerate(args):
            if a.__class__ is int and a == idx:
                return ("n", j, s)
    return None


def drat_value(args):
    """Coefficient denoted by the arguments of a PolyRatFun factor."""
    if not args or len(args) > 2 or any(a.__class__ is int for a in args):
        raise FormletError("PolyRatFun factor needs one or two polynomial arguments")
    num = args[0]
    den = args[1] if len(args) == 2 else ONE
    if den.is_zero():
        raise FormletError("PolyRatFun factor with zero denominator")
    return RationalCoefficient(num, den)


def canonicalize_term(t, canon):
    """Re-canonicalize an existing term (idempotent on canonical input)."""
    return canon.make(t.coeff, t.sym, t.cf, t.nf)


def normalize_expression(terms, canon=None):
    """Merge like terms, drop zeros and sort deterministically."""
    acc = {}
    order = []
    for t in terms:
        if canon is not None:
            t = canon.make(t.coeff, t.sym, t.cf, t.nf)
            if t is None:
                continue
        k = t.key
        prev = acc.get(k)
        if prev is None:
            acc[k] = t
            order.append(k)
        else:
            acc[k] = prev.with_coeff(rat_add(prev.coeff, t.coeff))
    out = [t for t in acc.values() if not t.coeff.is_zero()]
    out.sort(key=Term.sort_key)
    return out


def index_counts(t):
    counts = {}
    for _, args in t.cf + t.nf:
        for a in args:
            if a.__class__ is int:
                counts[a] = counts.get(a, 0) + 1
    return counts


def sum_indices(t, which, canon):
    """Replace each listed index that appears twice with a fresh dummy."""
    counts = index_counts(t)
    cf, nf = t.cf, t.nf
    nxt = max_internal(cf + nf)
    mapping = {}
    for idx in which:
        n = counts.get(idx, 0)
        if n == 0:
            continue
        if n != 2:
            raise IndexArityViolation(
                f"index {canon.decls.index_name(idx)} appears {n} times in a summed term"
            )
        nxt += 1
        mapping[idx] = INTERNAL_BASE + nxt
    if not mapping:
        return t

    def sub(f):
        return (f[0], tuple(mapping.get(a, a) if a.__class__ is int else a for a in f[1]))

    return canon.make(t.coeff, t.sym, [sub(f) for f in cf], [sub(f) for f in nf])


__all__ = [
    "Term",
    "Decls",
    "HeadDecl",
    "Canon",
    "R_ONE",
    "canonicalize_term",
    "normalize_expression",
    "sum_indices",
    "term_merge_key",
]
