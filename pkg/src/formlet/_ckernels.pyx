# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled hot kernels; behaviour mirrors ``_kernels`` exactly."""
from itertools import permutations, product

from .errors import IndexArityViolation

cdef long MARK = -1
cdef long MAX_CANDIDATES = 40320


cdef inline bint _dummy(object a, long base):
    return type(a) is int and <long>a >= base


cpdef tuple sort_args(tuple args, int kind):
    """Return (sign, sorted args); sign 0 means an antisymmetric zero."""
    cdef list lst
    cdef Py_ssize_t i, j, n
    cdef int sign = 1
    if kind == 1:
        return 1, tuple(sorted(args))
    lst = list(args)
    n = len(lst)
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


cdef tuple _shape(tuple f, long base, list symkind):
    h, args = f
    cdef list sh = []
    for a in args:
        sh.append(MARK if _dummy(a, base) else a)
    if symkind[h]:
        sh.sort()
    return (h, tuple(sh))


cdef tuple _finish(tuple cf, tuple nf, list symkind, dict mapping):
    cdef int sign = 1
    cdef int s, k
    cdef list out_n = []
    cdef list out_c = []
    cdef tuple args
    for h, args in nf:
        if mapping:
            args = tuple([mapping.get(a, a) if type(a) is int else a for a in args])
        k = symkind[h]
        if k:
            s, args = sort_args(args, k)
            if s == 0:
                return 0, (), ()
            sign *= s
        out_n.append((h, args))
    for h, args in cf:
        if mapping:
            args = tuple([mapping.get(a, a) if type(a) is int else a for a in args])
        k = symkind[h]
        if k:
            s, args = sort_args(args, k)
            if s == 0:
                return 0, (), ()
            sign *= s
        out_c.append((h, args))
    out_c.sort()
    return sign, tuple(out_c), tuple(out_n)


def canon_factors(tuple cf, tuple nf, list symkind, long base):
    """Canonical (sign, cfactors, nfactors) after dummy renumbering."""
    cdef dict occ = {}
    cdef Py_ssize_t p, s
    cdef int sk, sign
    cdef long ncand
    cdef tuple args, shape
    for p in range(len(nf)):
        h, args = nf[p]
        sk = symkind[h]
        for s in range(len(args)):
            a = args[s]
            if _dummy(a, base):
                occ.setdefault(a, []).append((0, p, -1 if sk else s))
    for f in cf:
        h, args = f
        sk = symkind[h]
        shape = None
        for s in range(len(args)):
            a = args[s]
            if _dummy(a, base):
                if shape is None:
                    shape = _shape(f, base, symkind)
                occ.setdefault(a, []).append((1, shape, -1 if sk else s))
    if not occ:
        return _finish(cf, nf, symkind, None)
    for d, lst in occ.items():
        if len(lst) > 2:
            raise IndexArityViolation(f"internal index N{d - base}_? appears {len(lst)} times")
    cdef dict sig = {d: tuple(sorted(lst)) for d, lst in occ.items()}
    cdef dict partners
    if len(sig) > 1 and cf:
        partners = {d: [] for d in sig}
        for h, args in cf:
            ds = [a for a in args if _dummy(a, base)]
            for a in ds:
                partners[a].extend(sig[b] for b in ds if b != a)
        sig = {d: (sig[d], tuple(sorted(partners[d]))) for d in sig}
    cdef dict classes = {}
    for d, sg in sig.items():
        classes.setdefault(sg, []).append(d)
    ordered = [classes[sg] for sg in sorted(classes)]
    ncand = 1
    for grp in ordered:
        for k in range(2, len(grp) + 1):
            ncand *= k
    cdef dict mapping
    if ncand == 1:
        mapping = {}
        for grp in ordered:
            mapping[grp[0]] = base + len(mapping) + 1
        return _finish(cf, nf, symkind, mapping)
    if ncand > MAX_CANDIDATES:
        ordered = [[d] for grp in ordered for d in sorted(grp)]
        mapping = {d[0]: base + i + 1 for i, d in enumerate(ordered)}
        return _finish(cf, nf, symkind, mapping)
    best = None
    best_sign = 0
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
            return 0, (), ()
    return best_sign, best[0], best[1]
