"""Pure-Python hot kernels.

A factor is a tuple ``(head, args)`` where ``args`` is a tuple whose
entries are either index ints or Polynomial objects.  Internal (dummy)
indices are ints ``>= base``.  ``symkind`` maps head id to 0 (plain),
1 (symmetric) or 2 (antisymmetric).
"""
from itertools import permutations, product

from .errors import IndexArityViolation

MARK = -1
MAX_CANDIDATES = 40320


def sort_args(args, kind):
    """Return (sign, sorted args); sign 0 means an antisymmetric zero."""
    if kind == 1:
        return 1, tuple(sorted(args))
    lst = list(args)
    sign = 1
    n = len(lst)
    # insertion sort so the permutation parity is tracked
    for i in range(1, n):
        j = i
        while j > 0 and lst[j] < lst[j - 1]:
            lst[j], lst[j - 1] = lst[j - 1], lst[j]
            sign = -sign
            j -= 1
    for i in range(1, n):
        if lst[i] == lst[i - 1]:
            return 0, ()
    return sign, tuple(lst)


def _is_dummy(a, base):
    return a.__class__ is int and a >= base


def _shape(f, base, symkind):
    h, args = f
    sh = tuple(MARK if (a.__class__ is int and a >= base) else a for a in args)
    if symkind[h]:
        sh = tuple(sorted(sh))
    return (h, sh)


def canon_factors(cf, nf, symkind, base):
    """Canonical (sign, cfactors, nfactors) after dummy renumbering.

    Symmetric arguments are sorted, commuting factors are sorted and the
    internal indices are renamed ``base+1 .. base+k`` so that the result
    is the lexicographically smallest key over all relabelings that keep
    the occurrence structure.  A sign of 0 means the term vanishes.
    """
    occ = {}
    for p, (h, args) in enumerate(nf):
        sk = symkind[h]
        for s, a in enumerate(args):
            if a.__class__ is int and a >= base:
                occ.setdefault(a, []).append((0, p, -1 if sk else s))
    for f in cf:
        h, args = f
        sk = symkind[h]
        shape = None
        for s, a in enumerate(args):
            if a.__class__ is int and a >= base:
                if shape is None:
                    shape = _shape(f, base, symkind)
                occ.setdefault(a, []).append((1, shape, -1 if sk else s))
    if not occ:
        return _finish(cf, nf, symkind, None)
    for d, lst in occ.items():
        if len(lst) > 2:
            raise IndexArityViolation(f"internal index N{d - base}_? appears {len(lst)} times")
    sig = {d: tuple(sorted(lst)) for d, lst in occ.items()}
    # one refinement round: fold in the signatures of dummies sharing a factor
    if len(sig) > 1 and cf:
        partners = {d: [] for d in sig}
        for h, args in cf:
            ds = [a for a in args if a.__class__ is int and a >= base]
            for a in ds:
                partners[a].extend(sig[b] for b in ds if b != a)
        sig = {d: (sig[d], tuple(sorted(partners[d]))) for d in sig}
    classes = {}
    for d, s in sig.items():
        classes.setdefault(s, []).append(d)
    ordered = [classes[s] for s in sorted(classes)]
    ncand = 1
    for grp in ordered:
        for k in range(2, len(grp) + 1):
            ncand *= k
    if ncand == 1:
        mapping = {}
        for grp in ordered:
            mapping[grp[0]] = base + len(mapping) + 1
        return _finish(cf, nf, symkind, mapping)
    if ncand > MAX_CANDIDATES:
        # degenerate: fall back to a fixed order within each class
        ordered = [[d] for grp in ordered for d in sorted(grp)]
        mapping = {d[0]: base + i + 1 for i, d in enumerate(ordered)}
        return _finish(cf, nf, symkind, mapping)
    best = None
    best_sign = None
    for choice in product(*[permutations(g) for g in ordered]):
        mapping = {}
        for grp in choice:
            for d in grp:
                mapping[d] = base + len(mapping) + 1
        sign, rcf, rnf = _finish(cf, nf, symkind, mapping)
        if sign == 0:
            return 0, (), ()
        key = (rcf, rnf)
        if best is None or key < best:
            best, best_sign = key, sign
        elif key == best and sign != best_sign:
            # the term equals its own negative
            return 0, (), ()
    return best_sign, best[0], best[1]


def _finish(cf, nf, symkind, mapping):
    sign = 1
    out_n = []
    for h, args in nf:
        if mapping:
            args = tuple(mapping.get(a, a) if a.__class__ is int else a for a in args)
        k = symkind[h]
        if k:
            s, args = sort_args(args, k)
            if s == 0:
                return 0, (), ()
            sign *= s
        out_n.append((h, args))
    out_c = []
    for h, args in cf:
        if mapping:
            args = tuple(mapping.get(a, a) if a.__class__ is int else a for a in args)
        k = symkind[h]
        if k:
            s, args = sort_args(args, k)
            if s == 0:
                return 0, (), ()
            sign *= s
        out_c.append((h, args))
    out_c.sort()
    return sign, tuple(out_c), tuple(out_n)
