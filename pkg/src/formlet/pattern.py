"""Patterns, matching and substitution for ``id`` statements.

Compiled patterns split the left-hand side into an ordered list of
noncommuting factors (matched as a contiguous slice of the term), a
multiset of commuting factors (matched against unused term factors) and a
symbol monomial (matched by divisibility).

Bindings are plain dicts keyed by ``(kind, name)``:

* ``("I", a)``  index wildcard ``a?``  -> index int
* ``("S", x)``  symbol wildcard ``x?`` -> Polynomial
* ``("F", P)``  head wildcard ``P?``   -> head id
* ``("P", P)``  paired-set image of ``P``  -> head id
* ``("A", A)``  argument field ``?A``   -> tuple of args

Right-hand sides (and ``local`` definitions) are compiled into a list of
:class:`TTerm` templates by distributing sums while keeping factor order.
"""
from __future__ import annotations

from fractions import Fraction
from itertools import permutations

from .algebra import ONE, Polynomial, RationalCoefficient, rat, rat_mul
from .errors import FormletError, FormSyntaxError, UnboundWildcard, UnknownName
from .term import INTERNAL_BASE, Term, max_internal

IDX, IW, POLY, SW, AF = range(5)


# ---------------------------------------------------------------------------
# compiled pattern


class PArg:
    __slots__ = ("kind", "value", "name", "allowed")

    def __init__(self, kind, value=None, name=None, allowed=None):
        self.kind = kind
        self.value = value
        self.name = name
        self.allowed = allowed

    def __repr__(self):
        return f"PArg({self.kind}, {self.value!r}, {self.name!r})"


class PFactor:
    __slots__ = ("head", "wild", "set1", "set2", "args", "commuting", "has_af")

    def __init__(self, head, wild, set1, set2, args, commuting):
        self.head = head
        self.wild = wild
        self.set1 = set1
        self.set2 = set2
        self.args = args
        self.commuting = commuting
        self.has_af = args is not None and any(a.kind == AF for a in args)

    def __repr__(self):
        return f"PFactor({self.head}, {self.wild}, {self.args})"


class Pattern:
    """A compiled left-hand side."""

    def __init__(self, nc, c, sym, wilds):
        self.nc = tuple(nc)
        self.c = tuple(c)
        self.sym = tuple(sorted(sym.items()))
        self.wilds = wilds  # name -> kind letter
        self.heads = frozenset(f.head for f in self.nc + self.c if f.head is not None)
        if not self.nc and not self.c and not self.sym:
            raise FormSyntaxError("pattern has nothing to match")

    def __repr__(self):
        return f"Pattern(nc={self.nc}, c={self.c}, sym={self.sym})"


def _flatten(node, out, sign=1):
    """Flatten a product AST into a list of factor nodes."""
    kind = node[0]
    if kind == "prod":
        for f in node[1]:
            _flatten(f, out)
    elif kind == "pow" and node[1][0] == "name":
        if node[2] < 0:
            raise FormSyntaxError("negative powers are not allowed in patterns")
        out.append(("powname", node[1], node[2]))
    elif kind == "name":
        out.append(("powname", node, 1))
    else:
        raise FormSyntaxError("pattern must be a single monomial of names")
    return out


def _head_set(decls, name):
    if name not in decls.sets:
        raise UnknownName(f"unknown set {name}")
    ids = []
    for n in decls.sets[name]:
        if n not in decls.head_ids:
            raise FormSyntaxError(f"set {name} used as a head set but {n} is not a function")
        ids.append(decls.head_ids[n])
    return tuple(ids)


def _index_set(decls, name):
    if name not in decls.sets:
        raise UnknownName(f"unknown set {name}")
    ids = []
    for n in decls.sets[name]:
        i = decls.resolve_index(n)
        if i is None:
            raise FormSyntaxError(f"set {name} used as an index set but {n} is not an index")
        ids.append(i)
    return frozenset(ids)


def compile_pattern(node, decls):
    """Compile a left-hand side AST into a Pattern."""
    wilds = {}

    def note(name, kind):
        prev = wilds.get(name)
        if prev is not None and prev != kind:
            raise FormSyntaxError(f"wildcard {name}? used with two different kinds")
        wilds[name] = kind

    def parg(a):
        if a[0] == "argfield":
            note(a[1], "A")
            return PArg(AF, name=a[1])
        if a[0] == "name" and a[3] is None:
            _, n, wild, _ = a
            if wild is not None:
                iid = decls.resolve_index(n)
                if iid is not None:
                    note(n, "I")
                    allowed = _index_set(decls, wild[0]) if wild else None
                    return PArg(IW, name=n, allowed=allowed)
                if n in decls.symbol_ids or not decls.taken(n):
                    # undeclared wildcard names in argument slots bind polynomials
                    note(n, "S")
                    return PArg(SW, name=n)
                raise UnknownName(f"wildcard {n}? is neither an index nor a symbol")
            iid = decls.resolve_index(n)
            if iid is not None:
                return PArg(IDX, value=iid)
        return PArg(POLY, value=eval_poly(a, decls, {}))

    nc, c, sym = [], [], {}
    for _, nm, power in _flatten(node, []):
        _, n, wild, args = nm
        if wild is None and args is None and n in decls.symbol_ids:
            sid = decls.symbol_ids[n]
            sym[sid] = sym.get(sid, 0) + power
            continue
        if wild is not None:
            set1 = _head_set(decls, wild[0]) if len(wild) >= 1 else None
            set2 = _head_set(decls, wild[1]) if len(wild) >= 2 else None
            if set2 is not None and len(set1) != len(set2):
                raise FormSyntaxError(f"paired sets for {n}? differ in length")
            if n in decls.head_ids:
                commuting = decls.is_commuting(decls.head_ids[n])
            elif set1:
                commuting = decls.is_commuting(set1[0])
            else:
                raise UnknownName(f"head wildcard {n}? needs a declared name or a set")
            note(n, "F")
            head = None
        else:
            if n not in decls.head_ids:
                raise UnknownName(f"unknown name {n} in pattern")
            head = decls.head_ids[n]
            commuting = decls.is_commuting(head)
            set1 = set2 = None
        pargs = None if args is None else tuple(parg(a) for a in args)
        if pargs is not None and head is not None and decls.symkind[head]:
            if any(p.kind == AF for p in pargs):
                raise FormSyntaxError(f"argument field inside (anti)symmetric {n}")
        f = PFactor(head, n if wild is not None else None, set1, set2, pargs, commuting)
        for _ in range(power):
            (c if commuting else nc).append(f)
    return Pattern(nc, c, sym, wilds)


# ---------------------------------------------------------------------------
# polynomial evaluation of argument ASTs


def _poly_ast(node, decls, wilds):
    """Evaluate an AST to a dict poly {(sym_mono, wild_mono): Fraction}."""
    kind = node[0]
    if kind == "num":
        return {((), ()): node[1]}
    if kind == "name":
        _, n, wild, args = node
        if args is not None:
            raise FormSyntaxError(f"function {n} inside a polynomial argument")
        if wilds.get(n) == "S":
            return {((), ((n, 1),)): Fraction(1)}
        if n in decls.symbol_ids:
            return {(((decls.symbol_ids[n], 1),), ()): Fraction(1)}
        raise UnknownName(f"{n} is not a symbol")
    if kind == "neg":
        return {k: -v for k, v in _poly_ast(node[1], decls, wilds).items()}
    if kind == "sum":
        acc = {}
        for t in node[1]:
            for k, v in _poly_ast(t, decls, wilds).items():
                acc[k] = acc.get(k, 0) + v
        return {k: v for k, v in acc.items() if v}
    if kind == "prod":
        acc = {((), ()): Fraction(1)}
        for f in node[1]:
            acc = _pmul(acc, _poly_ast(f, decls, wilds))
        return acc
    if kind == "pow":
        if node[2] < 0:
            raise FormSyntaxError("negative power inside a polynomial argument")
        base = _poly_ast(node[1], decls, wilds)
        acc = {((), ()): Fraction(1)}
        for _ in range(node[2]):
            acc = _pmul(acc, base)
        return acc
    if kind == "inv":
        d = _poly_ast(node[1], decls, wilds)
        if list(d) != [((), ())]:
            raise FormSyntaxError("division by a non-number inside an argument")
        return {((), ()): 1 / d[((), ())]}
    raise FormSyntaxError(f"{kind} not allowed inside a polynomial argument")


def _mono_mul(a, b):
    d = dict(a)
    for k, e in b:
        d[k] = d.get(k, 0) + e
    return tuple(sorted(d.items()))


def _pmul(a, b):
    out = {}
    for (sa, wa), ca in a.items():
        for (sb, wb), cb in b.items():
            k = (_mono_mul(sa, sb), _mono_mul(wa, wb))
            out[k] = out.get(k, 0) + ca * cb
    return {k: v for k, v in out.items() if v}


def _to_poly(d):
    terms = {}
    for (s, w), c in d.items():
        if w:
            raise UnboundWildcard("unbound symbol wildcard in argument")
        if c.denominator != 1:
            raise FormletError("polynomial argument with a fractional coefficient")
        terms[s] = int(c)
    return Polynomial(terms)


def eval_poly(node, decls, wilds):
    return _to_poly(_poly_ast(node, decls, wilds))


class PolyTemplate:
    """Polynomial argument whose symbol wildcards are filled at substitution."""

    __slots__ = ("mono", "const")

    def __init__(self, d):
        if all(not w for (_, w) in d):
            self.const = _to_poly(d)
            self.mono = None
        else:
            self.const = None
            self.mono = tuple((s, w, c) for (s, w), c in d.items())

    def evaluate(self, b):
        if self.const is not None:
            return self.const
        acc = Polynomial({})
        for s, w, c in self.mono:
            p = Polynomial({s: 1})
            for name, e in w:
                v = b.get(("S", name))
                if v is None:
                    raise UnboundWildcard(f"wildcard {name}? is not bound")
                p = p * v**e
            if c.denominator != 1:
                raise FormletError("polynomial argument with a fractional coefficient")
            acc = acc + p * Polynomial.const(int(c))
        return acc


# ---------------------------------------------------------------------------
# right-hand-side templates


class TTerm:
    """One product in a distributed right-hand side.

    ``items`` is an ordered list of ``("f", head, args)`` factor templates
    and ``("e", name)`` expression references.  ``head`` is an int or
    ``("w", name)``; args are ``("i", id)``, ``("iw", name)``,
    ``("af", name)`` or ``("p", PolyTemplate)``.
    """

    __slots__ = ("coeff", "sym", "wsym", "items")

    def __init__(self, coeff=None, sym=None, wsym=None, items=None):
        self.coeff = coeff if coeff is not None else Fraction(1)
        self.sym = sym or {}
        self.wsym = wsym or {}
        self.items = items or []

    def times(self, other):
        sym = dict(self.sym)
        for k, e in other.sym.items():
            sym[k] = sym.get(k, 0) + e
        wsym = dict(self.wsym)
        for k, e in other.wsym.items():
            wsym[k] = wsym.get(k, 0) + e
        return TTerm(self.coeff * other.coeff, sym, wsym, self.items + other.items)

    def __repr__(self):
        return f"TTerm({self.coeff}, {self.sym}, {self.wsym}, {self.items})"


def compile_rhs(node, decls, wilds=None, exprs=None, allow_internal=False):
    """Distribute an AST into a list of TTerm templates.

    ``wilds`` maps wildcard names bound by the left-hand side to their kind;
    ``exprs`` is the set of expression names that may be referenced;
    ``allow_internal`` accepts ``Nk_?`` internal indices (golden files).
    """
    wilds = wilds or {}
    exprs = exprs or ()

    def arg(a):
        if a[0] == "argfield":
            if wilds.get(a[1]) != "A":
                raise UnboundWildcard(f"argument field ?{a[1]} is not bound by the pattern")
            return ("af", a[1])
        if a[0] == "name" and a[3] is None:
            n = a[1]
            if allow_internal and a[2] == () and n.startswith("N") and n.endswith("_") and n[1:-1].isdigit():
                return ("i", INTERNAL_BASE + int(n[1:-1]))
            if wilds.get(n) == "I":
                return ("iw", n)
            if wilds.get(n) != "S" and n not in decls.symbol_ids:
                iid = decls.resolve_index(n)
                if iid is not None:
                    return ("i", iid)
        return ("p", PolyTemplate(_poly_ast(a, decls, wilds)))

    def go(nd):
        kind = nd[0]
        if kind == "num":
            return [TTerm(nd[1])]
        if kind == "neg":
            return [TTerm(-t.coeff, t.sym, t.wsym, t.items) for t in go(nd[1])]
        if kind == "sum":
            out = []
            for t in nd[1]:
                out.extend(go(t))
            return out
        if kind == "prod":
            acc = [TTerm()]
            for f in nd[1]:
                acc = [a.times(b) for a in acc for b in go(f)]
            return acc
        if kind == "inv":
            ts = go(nd[1])
            if len(ts) != 1 or ts[0].sym or ts[0].wsym or ts[0].items or ts[0].coeff == 0:
                raise FormSyntaxError("division is only supported by nonzero numbers")
            return [TTerm(1 / ts[0].coeff)]
        if kind == "pow":
            base = go(nd[1])
            n = nd[2]
            if n < 0:
                if len(base) != 1 or base[0].sym or base[0].wsym or base[0].items:
                    raise FormSyntaxError("negative powers are only supported on numbers")
                return [TTerm(base[0].coeff**n)]
            acc = [TTerm()]
            for _ in range(n):
                acc = [a.times(b) for a in acc for b in base]
            return acc
        if kind == "argfield":
            raise FormSyntaxError(f"argument field ?{nd[1]} outside an argument list")
        if kind != "name":
            raise FormSyntaxError(f"unexpected {kind}")
        _, n, wild, args = nd
        k = wilds.get(n)
        if args is None:
            if k == "S":
                return [TTerm(wsym={n: 1})]
            if k == "F":
                return [TTerm(items=[("f", ("w", n), ())])]
            if n in decls.symbol_ids:
                return [TTerm(sym={decls.symbol_ids[n]: 1})]
            if n in decls.head_ids:
                return [TTerm(items=[("f", decls.head_ids[n], ())])]
            if n in exprs:
                return [TTerm(items=[("e", n)])]
            raise UnknownName(f"unknown name {n}")
        if k == "F":
            head = ("w", n)
        elif n in decls.head_ids:
            head = decls.head_ids[n]
        else:
            raise UnknownName(f"unknown function {n}")
        return [TTerm(items=[("f", head, tuple(arg(a) for a in args))])]

    return go(node)


# ---------------------------------------------------------------------------
# matching


def _perm_sign(p):
    sign = 1
    p = list(p)
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            sign = -sign
    return sign


_PERM_CACHE = {}


def _perms(n):
    v = _PERM_CACHE.get(n)
    if v is None:
        v = _PERM_CACHE[n] = [(p, _perm_sign(p)) for p in permutations(range(n))]
    return v


def _match_arg(pa, a, b):
    k = pa.kind
    if k == IDX:
        return b if a.__class__ is int and a == pa.value else None
    if k == IW:
        if a.__class__ is not int:
            return None
        if pa.allowed is not None and a not in pa.allowed:
            return None
        key = ("I", pa.name)
        prev = b.get(key)
        if prev is None:
            b = dict(b)
            b[key] = a
            return b
        return b if prev == a else None
    if k == POLY:
        return b if a.__class__ is Polynomial and a == pa.value else None
    if k == SW:
        if a.__class__ is not Polynomial:
            return None
        key = ("S", pa.name)
        prev = b.get(key)
        if prev is None:
            b = dict(b)
            b[key] = a
            return b
        return b if prev == a else None
    raise AssertionError(k)


def _match_args(pargs, i, targs, j, b, n_fixed_left):
    if i == len(pargs):
        if j == len(targs):
            yield b
        return
    pa = pargs[i]
    if pa.kind == AF:
        key = ("A", pa.name)
        prev = b.get(key)
        if prev is not None:
            L = len(prev)
            if tuple(targs[j : j + L]) == prev:
                yield from _match_args(pargs, i + 1, targs, j + L, b, n_fixed_left)
            return
        for L in range(0, len(targs) - j - n_fixed_left + 1):
            b2 = dict(b)
            b2[key] = tuple(targs[j : j + L])
            yield from _match_args(pargs, i + 1, targs, j + L, b2, n_fixed_left)
        return
    if j >= len(targs):
        return
    b2 = _match_arg(pa, targs[j], b)
    if b2 is not None:
        yield from _match_args(pargs, i + 1, targs, j + 1, b2, n_fixed_left - 1)


def match_factor(pf, f, b, decls):
    """Yield (binding, sign) for each way pattern factor pf matches factor f."""
    h, args = f
    if pf.head is not None:
        if h != pf.head:
            return
    else:
        if h == decls.delta or decls.is_commuting(h) != pf.commuting:
            return
        if pf.set1 is not None:
            if h not in pf.set1:
                return
        key = ("F", pf.wild)
        prev = b.get(key)
        if prev is not None:
            if prev != h:
                return
        else:
            b = dict(b)
            b[key] = h
            if pf.set2 is not None:
                b[("P", pf.wild)] = pf.set2[pf.set1.index(h)]
    pargs = pf.args
    if pargs is None:
        if not args:
            yield b, 1
        return
    kind = decls.symkind[h]
    if not pf.has_af:
        if len(pargs) != len(args):
            return
        if kind == 0:
            for b2 in _match_args(pargs, 0, args, 0, b, len(pargs)):
                yield b2, 1
            return
        seen = set()
        for p, s in _perms(len(args)):
            targs = tuple(args[k] for k in p)
            if targs in seen:
                continue
            seen.add(targs)
            for b2 in _match_args(pargs, 0, targs, 0, b, len(pargs)):
                yield b2, (s if kind == 2 else 1)
        return
    if kind:
        return  # argument fields never match inside (anti)symmetric factors
    nfixed = sum(1 for p in pargs if p.kind != AF)
    if nfixed > len(args):
        return
    for b2 in _match_args(pargs, 0, args, 0, b, nfixed):
        yield b2, 1


def _match_c(pcs, k, cf, used, b, sign, decls, chosen):
    if k == len(pcs):
        yield b, sign, tuple(chosen)
        return
    pf = pcs[k]
    tried = set()
    for j, f in enumerate(cf):
        if j in used or f in tried:
            continue
        tried.add(f)
        for b2, s in match_factor(pf, f, b, decls):
            used.add(j)
            chosen.append(j)
            yield from _match_c(pcs, k + 1, cf, used, b2, sign * s, decls, chosen)
            chosen.pop()
            used.discard(j)


def _match_nc(pnc, k, nf, start, b, sign, decls):
    if k == len(pnc):
        yield b, sign
        return
    for b2, s in match_factor(pnc[k], nf[start + k], b, decls):
        yield from _match_nc(pnc, k + 1, nf, start, b2, sign * s, decls)


def _sym_ok(pat, symleft):
    for s, e in pat.sym:
        if symleft.get(s, 0) < e:
            return False
    return True


def first_match(pat, term, decls, used_nc=(), used_c=(), symleft=None):
    """Leftmost match avoiding used positions, or None.

    Returns ``(binding, sign, nc_start, c_positions)``; ``nc_start`` is None
    for patterns without noncommuting factors.
    """
    if symleft is None:
        symleft = dict(term.sym)
    if not _sym_ok(pat, symleft):
        return None
    if pat.heads and not pat.heads <= term.heads:
        return None
    nf, cf = term.nf, term.cf
    m = len(pat.nc)
    used_c = set(used_c)
    if m:
        for s in range(len(nf) - m + 1):
            if any(p in used_nc for p in range(s, s + m)):
                continue
            for b, sign in _match_nc(pat.nc, 0, nf, s, {}, 1, decls):
                for b2, sign2, cpos in _match_c(pat.c, 0, cf, used_c, b, sign, decls, []):
                    return b2, sign2, s, cpos
        return None
    for b2, sign2, cpos in _match_c(pat.c, 0, cf, used_c, {}, 1, decls, []):
        return b2, sign2, None, cpos
    return None


def match_term(pat, term, decls, mode="all"):
    """All disjoint matches (greedy, leftmost first) or just the first one.

    Returns a list of ``(binding, sign, nc_positions, c_positions,
    sym_consumed)`` tuples.
    """
    used_nc, used_c = set(), set()
    symleft = dict(term.sym)
    out = []
    while True:
        m = first_match(pat, term, decls, used_nc, used_c, symleft)
        if m is None:
            break
        b, sign, s, cpos = m
        npos = tuple(range(s, s + len(pat.nc))) if s is not None else ()
        used_nc.update(npos)
        used_c.update(cpos)
        for sid, e in pat.sym:
            symleft[sid] -= e
        out.append((b, sign, npos, cpos, pat.sym))
        if mode == "first":
            break
        if not npos and not cpos and not pat.sym:
            break
    return out


# ---------------------------------------------------------------------------
# substitution


def instantiate(tterms, b, decls):
    """Evaluate templates under a binding.

    Returns a list of raw parts ``(coeff, sym_dict, cf_list, nf_list)``.
    ``coeff`` is a RationalCoefficient.
    """
    out = []
    for tt in tterms:
        cf, nf = [], []
        for it in tt.items:
            if it[0] != "f":
                raise FormletError("expression reference outside a local definition")
            _, head, targs = it
            if head.__class__ is not int:
                name = head[1]
                h = b.get(("P", name))
                if h is None:
                    h = b.get(("F", name))
                if h is None:
                    raise UnboundWildcard(f"head wildcard {name}? is not bound")
            else:
                h = head
            args = []
            for a in targs:
                k = a[0]
                if k == "i":
                    args.append(a[1])
                elif k == "iw":
                    v = b.get(("I", a[1]))
                    if v is None:
                        raise UnboundWildcard(f"index wildcard {a[1]}? is not bound")
                    args.append(v)
                elif k == "af":
                    v = b.get(("A", a[1]))
                    if v is None:
                        raise UnboundWildcard(f"argument field ?{a[1]} is not bound")
                    args.extend(v)
                else:
                    args.append(a[1].evaluate(b))
            f = (h, tuple(args))
            (cf if decls.is_commuting(h) else nf).append(f)
        coeff = rat(tt.coeff.numerator, tt.coeff.denominator)
        if tt.wsym:
            p = ONE
            for name, e in tt.wsym.items():
                v = b.get(("S", name))
                if v is None:
                    raise UnboundWildcard(f"symbol wildcard {name}? is not bound")
                p = p * v**e
            for mono, c in p.terms:
                sym = dict(tt.sym)
                for s, e in mono:
                    sym[s] = sym.get(s, 0) + e
                out.append((rat_mul(coeff, rat(c)), sym, cf, nf))
        else:
            out.append((coeff, tt.sym, cf, nf))
    return out


class IdRule:
    """A compiled ``id`` statement."""

    def __init__(self, lhs, rhs, decls, once=False):
        self.pattern = compile_pattern(lhs, decls)
        self.rhs = compile_rhs(rhs, decls, self.pattern.wilds)
        self.once = once
        self.decls = decls


def apply_id(rule, term, canon):
    """Rewrite one term.  Returns None when nothing matched, else new terms."""
    pat = rule.pattern
    if pat.heads and not pat.heads <= term.heads:
        return None
    decls = canon.decls
    matches = match_term(pat, term, decls, "first" if rule.once else "all")
    if not matches:
        return None
    used_nc = set()
    used_c = set()
    symleft = dict(term.sym)
    sign = 1
    parts_per_match = []
    for b, s, npos, cpos, consumed in matches:
        used_nc.update(npos)
        used_c.update(cpos)
        for sid, e in consumed:
            symleft[sid] -= e
        sign *= s
        parts_per_match.append((npos, instantiate(rule.rhs, b, decls)))
    base_cf = [f for j, f in enumerate(term.cf) if j not in used_c]
    coeff0 = term.coeff if sign > 0 else RationalCoefficient(-term.coeff.num, term.coeff.den, True)
    # combinations of right-hand-side terms, one per match
    combos = [(coeff0, dict(symleft), list(base_cf), {}, [])]
    for mi, (npos, parts) in enumerate(parts_per_match):
        nxt = []
        for coeff, sym, cf, slots, tail in combos:
            for pc, psym, pcf, pnf in parts:
                s2 = dict(sym)
                for k, e in psym.items():
                    s2[k] = s2.get(k, 0) + e
                sl = slots
                tl = tail
                if npos:
                    sl = dict(slots)
                    sl[npos[0]] = (npos, pnf)
                elif pnf:
                    tl = tail + pnf
                nxt.append((rat_mul(coeff, pc), s2, cf + pcf, sl, tl))
        combos = nxt
    out = []
    nf = term.nf
    for coeff, sym, cf, slots, tail in combos:
        new_nf = []
        i = 0
        while i < len(nf):
            hit = slots.get(i)
            if hit is not None:
                new_nf.extend(hit[1])
                i += len(hit[0])
            else:
                new_nf.append(nf[i])
                i += 1
        new_nf.extend(tail)
        t = canon.make(canon.fix_coeff(coeff), sym, cf, new_nf)
        if t is not None:
            out.append(t)
    return out


def rename_apart(cf, nf, offset):
    """Shift internal indices of the given factors by ``offset``."""
    if not offset:
        return cf, nf

    def sh(f):
        return (f[0], tuple(a + offset if a.__class__ is int and a > INTERNAL_BASE else a for a in f[1]))

    return [sh(f) for f in cf], [sh(f) for f in nf]


def build_local(tterms, store, canon):
    """Evaluate a ``local`` right-hand side, splicing referenced expressions."""
    decls = canon.decls
    out = []
    for tt in tterms:
        # partial products: (coeff, sym, cf, nf)
        partial = [(rat(tt.coeff.numerator, tt.coeff.denominator), dict(tt.sym), [], [])]
        for it in tt.items:
            if it[0] == "f":
                (c, s, cf1, nf1), = instantiate([TTerm(items=[it])], {}, decls)
                partial = [(c0, s0, cf0 + cf1, nf0 + nf1) for c0, s0, cf0, nf0 in partial]
                continue
            name = it[1]
            if name not in store:
                raise UnknownName(f"unknown expression {name}")
            nxt = []
            for c0, s0, cf0, nf0 in partial:
                off = max_internal(cf0 + nf0)
                for t in store[name]:
                    cf1, nf1 = rename_apart(list(t.cf), list(t.nf), off)
                    s1 = dict(s0)
                    for k, e in t.sym:
                        s1[k] = s1.get(k, 0) + e
                    nxt.append((rat_mul(c0, t.coeff), s1, cf0 + cf1, nf0 + nf1))
            partial = nxt
        if tt.wsym:
            raise UnboundWildcard("wildcard in a local definition")
        for c, s, cf, nf in partial:
            t = canon.make(canon.fix_coeff(c), s, cf, nf)
            if t is not None:
                out.append(t)
    return out


__all__ = [
    "Pattern",
    "PFactor",
    "PArg",
    "TTerm",
    "IdRule",
    "compile_pattern",
    "compile_rhs",
    "match_term",
    "first_match",
    "match_factor",
    "instantiate",
    "apply_id",
    "build_local",
    "Term",
]
