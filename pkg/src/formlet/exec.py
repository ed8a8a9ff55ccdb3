"""Interpreter: session state, statement execution and output rendering."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

from .algebra import ExpansionSetting, format_poly, rat_add, rat_mul
from .errors import FormletError, FormSyntaxError, RepeatDivergence, UnknownName
from .pattern import IdRule, apply_id, build_local, compile_rhs, instantiate
from .program import parse, parse_expression, preprocess
from .term import ANTISYMMETRIC, NONE, SYMMETRIC, Canon, Decls, Term, sum_indices

DEFAULT_REPEAT_CAP = 100000
DEFAULT_WIDTH = 80
_SYMMETRY = {"none": NONE, "symmetric": SYMMETRIC, "antisymmetric": ANTISYMMETRIC}


@dataclass
class OutputEvent:
    name: str
    lines: list
    terms: list

    @property
    def text(self):
        return "\n".join(self.lines)


@dataclass
class ModuleStats:
    index: int
    term_counts: dict = field(default_factory=dict)
    repeat_passes: list = field(default_factory=list)
    seconds: float = 0.0


class Session:
    """Declarations, settings and the expression stores."""

    def __init__(self, repeat_cap=DEFAULT_REPEAT_CAP, memoize=True):
        self.decls = Decls()
        self.canon = Canon(self.decls)
        self.format_width = DEFAULT_WIDTH
        self.repeat_cap = repeat_cap
        self.exprs = {}  # name -> list of Term, in definition order
        self.hidden = set()
        self.outputs = []
        self.stats = []
        self.memoize = memoize
        self._compiled = {}
        self._refold = False
        self._cur_stats = None

    # -- stores
    @property
    def active(self):
        return {n: t for n, t in self.exprs.items() if n not in self.hidden}

    @property
    def hidden_exprs(self):
        return {n: t for n, t in self.exprs.items() if n in self.hidden}

    @property
    def dimension(self):
        return self.decls.dimension

    @property
    def polyratfun(self):
        return self.decls.polyratfun

    # -- program level
    def run_program(self, program):
        """Run all modules; returns the list of OutputEvents."""
        for k, module in enumerate(program.modules):
            self.run_module(module, k)
        return self.outputs

    def run_module(self, stmts, index=0):
        st = ModuleStats(index)
        self._cur_stats = st
        t0 = time.perf_counter()
        settings = {"print": None, "bracket": None, "visibility": []}
        for s in stmts:
            if s.kind in ("sort", "end"):
                break
            self.run_statement(s, settings)
        self._finish_module(settings)
        st.seconds = time.perf_counter() - t0
        st.term_counts = {n: len(t) for n, t in self.exprs.items() if n not in self.hidden}
        self.stats.append(st)
        events = [e for e in self.outputs if getattr(e, "_module", None) == index]
        return events

    def _finish_module(self, settings):
        canon = self.canon
        for name in list(self.exprs):
            if name in self.hidden:
                continue
            terms = self.exprs[name]
            self.exprs[name] = _merge(terms, canon if self._refold else None)
        self._refold = False
        if settings["print"] is not None:
            style, names = settings["print"]
            for name in self.exprs:
                if name in self.hidden or (names and name not in names):
                    continue
                terms = self.exprs[name]
                lines = render_expression(
                    name, terms, self.decls, plus_s=(style == "+s"),
                    bracket=settings["bracket"], width=self.format_width,
                )
                ev = OutputEvent(name, lines, list(terms))
                ev._module = self._cur_stats.index
                self.outputs.append(ev)
        for kind, names in settings["visibility"]:
            if kind == "hide":
                targets = names or [n for n in self.exprs if n not in self.hidden]
            else:
                targets = names or list(self.hidden)
            for n in targets:
                if n not in self.exprs:
                    raise UnknownName(f"cannot {kind} unknown expression {n}")
                if kind == "hide":
                    self.hidden.add(n)
                else:
                    self.hidden.discard(n)

    # -- statements
    def run_statement(self, s, settings=None):
        try:
            self._run_statement(s, settings)
        except FormletError as e:
            if e.origin is None and s.origin:
                e.origin = s.origin
                e.args = (f"{s.origin}: {e.args[0]}",) + e.args[1:]
            raise

    def _run_statement(self, s, settings):
        d = self.decls
        k = s.kind
        if k == "decl":
            for name, sym in s.items:
                if s.name == "symbol":
                    d.add_symbol(name)
                elif s.name == "index":
                    d.add_index(name)
                else:
                    d.add_head(name, s.name, _SYMMETRY[sym])
            return
        if k == "autodeclare":
            for name in s.names:
                if name.startswith("["):
                    d.add_index(name)
                elif name not in d.autodeclare:
                    d.autodeclare.append(name)
            return
        if k == "dimension":
            v = s.value
            if isinstance(v, str):
                if v not in d.symbol_ids:
                    raise UnknownName(f"dimension {v} is not a declared symbol")
                d.dimension = ("sym", d.symbol_ids[v])
            else:
                d.dimension = v
            self._refold = True
            return
        if k == "set":
            d.sets[s.name] = list(s.names)
            return
        if k == "polyratfun":
            if s.name not in d.head_ids:
                d.add_head(s.name, "cfunction")
            d.polyratfun = d.head_ids[s.name]
            if s.value is not None:
                var, order = s.value
                if var not in d.symbol_ids:
                    raise UnknownName(f"expansion variable {var} is not a symbol")
                d.expansion = ExpansionSetting(d.symbol_ids[var], order)
            else:
                d.expansion = None
            self._refold = True
            return
        if k == "local":
            self.run_local(s)
            return
        if k in ("hide", "unhide"):
            settings["visibility"].append((k, list(s.names)))
            return
        if k == "bracket":
            settings["bracket"] = list(s.names)
            return
        if k == "format":
            self.format_width = s.value
            return
        if k == "print":
            settings["print"] = (s.value, list(s.names))
            return
        if k in ("id", "sum", "repeat", "if"):
            for name in list(self.exprs):
                if name in self.hidden:
                    continue
                items = [(t, False) for t in self.exprs[name]]
                items = self._exec(s, items)
                self.exprs[name] = [t for t, _ in items]
            return
        raise FormSyntaxError(f"unsupported statement {k}", s.origin)

    def run_local(self, s):
        tterms = compile_rhs(s.rhs, self.decls, exprs=set(self.exprs))
        terms = build_local(tterms, self.exprs, self.canon)
        self.exprs.pop(s.name, None)
        self.hidden.discard(s.name)
        self.exprs[s.name] = _merge(terms)

    # -- executable statements over (term, changed) items
    def _compile(self, s):
        c = self._compiled.get(id(s))
        if c is None or c[0] is not s:
            d = self.decls
            if s.kind == "id":
                obj = IdRule(s.lhs, s.rhs, d, s.once)
                obj.cache = {}
            elif s.kind == "sum":
                ids = []
                for n in s.names:
                    i = d.resolve_index(n)
                    if i is None:
                        raise UnknownName(f"{n} is not an index")
                    ids.append(i)
                obj = ids
            elif s.kind == "if":
                names, value = s.cond
                heads, syms = set(), set()
                for n in names:
                    if n in d.head_ids:
                        heads.add(d.head_ids[n])
                    elif n in d.symbol_ids:
                        syms.add(d.symbol_ids[n])
                    else:
                        raise UnknownName(f"occurs() of unknown name {n}")
                obj = (frozenset(heads), frozenset(syms), value)
            else:
                obj = None
            c = (s, obj)
            self._compiled[id(s)] = c
        return c[1]

    def _exec_block(self, stmts, items):
        for s in stmts:
            items = self._exec(s, items)
        return items

    def _exec(self, s, items):
        k = s.kind
        try:
            if k == "id":
                return _merge_items(self._exec_id(self._compile(s), items))
            if k == "sum":
                ids = self._compile(s)
                out = []
                for t, ch in items:
                    t2 = sum_indices(t, ids, self.canon)
                    if t2 is not None:
                        out.append((t2, ch))
                return _merge_items(out)
            if k == "if":
                heads, syms, value = self._compile(s)
                inside, outside = [], []
                for it in items:
                    t = it[0]
                    occ = 1 if (heads & t.heads or any(sid in syms for sid, _ in t.sym)) else 0
                    (inside if occ == value else outside).append(it)
                if not inside:
                    return items
                return _merge_items(outside + self._exec_block(s.body, inside))
            if k == "repeat":
                return self._exec_repeat(s, items)
        except FormletError as e:
            if e.origin is None and s.origin:
                e.origin = s.origin
                e.args = (f"{s.origin}: {e.args[0]}",) + e.args[1:]
            raise
        raise FormSyntaxError(f"{k} is not executable", s.origin)

    def _exec_id(self, rule, items):
        canon = self.canon
        cache = rule.cache if self.memoize else None
        out = []
        for t, ch in items:
            if rule.pattern.heads and not rule.pattern.heads <= t.heads:
                out.append((t, ch))
                continue
            if cache is None:
                res = apply_id(rule, t, canon)
                if res is None:
                    out.append((t, ch))
                else:
                    out.extend((r, True) for r in res)
                continue
            key = t.key
            res = cache.get(key, False)
            if res is False:
                unit = Term(_R_ONE, t.sym, t.cf, t.nf)
                res = apply_id(rule, unit, canon)
                if len(cache) > 200000:
                    cache.clear()
                cache[key] = res
            if res is None:
                out.append((t, ch))
                continue
            c = t.coeff
            for r in res:
                nc = canon.fix_coeff(rat_mul(c, r.coeff))
                if not nc.is_zero():
                    out.append((r.with_coeff(nc), True))
        return out

    def _exec_repeat(self, s, items):
        cap = self.repeat_cap
        result = []
        total = 0
        for flag_in in (False, True):
            cur = [(t, False) for t, f in items if f == flag_in]
            first = True
            while cur:
                total += 1
                if total > cap:
                    raise RepeatDivergence(cap, s.origin)
                out = self._exec_block(s.body, cur)
                cur = []
                for t, ch in out:
                    if ch:
                        cur.append((t, False))
                    else:
                        result.append((t, flag_in if first else True))
                first = False
        if self._cur_stats is not None:
            self._cur_stats.repeat_passes.append((s.origin, total))
        return _merge_items(result)


from .algebra import R_ONE as _R_ONE  # noqa: E402


def _merge(terms, canon=None):
    acc = {}
    for t in terms:
        if canon is not None:
            t = canon.make(t.coeff, t.sym, t.cf, t.nf)
            if t is None:
                continue
        prev = acc.get(t.key)
        acc[t.key] = t if prev is None else prev.with_coeff(rat_add(prev.coeff, t.coeff))
    out = [t for t in acc.values() if not t.coeff.is_zero()]
    out.sort(key=Term.sort_key)
    return out


def _merge_items(items):
    acc = {}
    for t, ch in items:
        prev = acc.get(t.key)
        if prev is None:
            acc[t.key] = [t.coeff, ch, t]
        else:
            prev[0] = rat_add(prev[0], t.coeff)
            prev[1] = prev[1] or ch
    return [(t.with_coeff(c), ch) for c, ch, t in acc.values() if not c.is_zero()]


# ---------------------------------------------------------------------------
# rendering


def _arg_str(a, decls):
    if a.__class__ is int:
        return decls.index_name(a)
    return format_poly(a, decls.symbols)


def _factor_str(f, decls):
    h, args = f
    name = decls.heads[h].name
    if not args:
        return name
    return name + "(" + ",".join(_arg_str(a, decls) for a in args) + ")"


def factor_strings(t, decls, exclude=None):
    """Printable factors of a term: symbols, commuting, then noncommuting."""
    out = []
    for sid, e in t.sym:
        if exclude and ("s", sid) in exclude:
            continue
        n = decls.symbols[sid]
        out.append(n if e == 1 else f"{n}^{e}")
    cf = [f for f in t.cf if not (exclude and f[0] in exclude)]
    i = 0
    while i < len(cf):
        f = cf[i]
        j = i
        while j + 1 < len(cf) and cf[j + 1] == f and not f[1]:
            j += 1
        s = _factor_str(f, decls)
        out.append(s if j == i else f"{s}^{j - i + 1}")
        i = j + 1
    for f in t.nf:
        if exclude and f[0] in exclude:
            continue
        out.append(_factor_str(f, decls))
    return out


def coeff_string(c, decls):
    """Rendering of a coefficient as a trailing PolyRatFun factor, or None."""
    if decls.polyratfun is None:
        return None
    name = decls.heads[decls.polyratfun].name
    names = decls.symbols
    if decls.expansion is not None and decls.expansion.enabled and c.den.is_const():
        num = format_poly(c.num, names, ascending=True)
        if c.den.const_value() != 1:
            num = f"({num})/{c.den.const_value()}"
        return f"{name}({num})"
    return f"{name}({format_poly(c.num, names, spaced=True)},{format_poly(c.den, names, spaced=True)})"


def term_string(t, decls, exclude=None, signed=False, plain_numeric=False):
    """Canonical text of a term (parseable by the expression parser).

    With ``plain_numeric`` a purely numeric coefficient prints as a rational
    even when a PolyRatFun head is declared.
    """
    facs = factor_strings(t, decls, exclude)
    c = t.coeff
    numeric = c.num.is_const() and c.den.is_const()
    cs = None if plain_numeric and numeric else coeff_string(c, decls)
    if cs is not None:
        body = "*".join(facs + [cs])
        return ("+ " + body) if signed else body
    q = t.coeff.as_fraction()
    neg = q < 0
    a = -q if neg else q
    if a == 1:
        body = "*".join(facs) if facs else "1"
    else:
        num = str(a.numerator) if a.denominator == 1 else f"{a.numerator}/{a.denominator}"
        body = "*".join([num] + facs)
    if signed:
        return ("- " if neg else "+ ") + body
    return ("-" if neg else "") + body


def _bracket_key(t, decls, names):
    heads, syms = set(), set()
    for n in names:
        if n in decls.head_ids:
            heads.add(decls.head_ids[n])
        elif n in decls.symbol_ids:
            syms.add(("s", decls.symbol_ids[n]))
    excl = heads | syms
    pre_sym = tuple((s, e) for s, e in t.sym if ("s", s) in syms)
    pre_c = tuple(f for f in t.cf if f[0] in heads)
    pre_n = tuple(f for f in t.nf if f[0] in heads)
    return (pre_sym, pre_c, pre_n), excl


def _wrap(text, width, indent):
    """Break an over-long line at '*' or ' ' boundaries."""
    lines = []
    while len(text) > width:
        cut = max(text.rfind("*", 0, width), text.rfind(" ", 0, width))
        if cut <= len(indent):
            break
        lines.append(text[: cut + 1].rstrip())
        text = indent + text[cut + 1 :].lstrip()
    lines.append(text)
    return lines


def render_expression(name, terms, decls, plus_s=False, bracket=None, width=DEFAULT_WIDTH):
    """FORM-style output lines for one expression.

    Numeric coefficients print as PolyRatFun factors only in ``+s`` mode.
    """
    plain = not plus_s
    if not terms:
        return [f"   {name} = 0;"]
    lines = [f"   {name} ="]
    if bracket:
        lines.append("")
        groups = {}
        for t in terms:
            key, excl = _bracket_key(t, decls, bracket)
            groups.setdefault(key, []).append(t)
        keys = list(groups)
        for gi, key in enumerate(keys):
            pre_sym, pre_c, pre_n = key
            probe = Term(None, pre_sym, pre_c, pre_n)
            pre = "*".join(factor_strings(probe, decls))
            last = gi == len(keys) - 1
            if not pre:
                for t in groups[key]:
                    lines.extend(_wrap("       " + term_string(t, decls, signed=True, plain_numeric=plain), width, "         "))
                continue
            lines.append(f"       + {pre} * (")
            for t in groups[key]:
                s = term_string(t, decls, exclude=excl, signed=True, plain_numeric=plain)
                lines.extend(_wrap("          " + s, width, "            "))
            lines.append("          );" if last else "          )")
        if lines[-1].endswith(")"):
            lines[-1] += ";"
        elif not lines[-1].endswith(";"):
            lines.append("      ;")
        return lines
    if plus_s:
        for t in terms:
            lines.extend(_wrap("       " + term_string(t, decls, signed=True, plain_numeric=plain), width, "         "))
        lines.append("      ;")
        return lines
    parts = []
    for i, t in enumerate(terms):
        s = term_string(t, decls, signed=True, plain_numeric=plain)
        if i == 0 and s.startswith("+ "):
            s = s[2:]
        parts.append(s)
    body = "      " + " ".join(parts) + ";"
    lines.extend(_wrap(body, width, "      "))
    return lines


# ---------------------------------------------------------------------------
# golden support


def dump_lines(exprs, decls):
    """Golden-format listing: ``# expr name`` then one term per line."""
    out = []
    for name, terms in exprs.items():
        out.append(f"# expr {name}")
        if not terms:
            out.append("0")
        for t in terms:
            out.append(term_string(t, decls))
    return out


def parse_term_text(text, session):
    """Parse one canonical term line into Terms under the session's decls."""
    ast = parse_expression(text)
    tterms = compile_rhs(ast, session.decls, allow_internal=True)
    out = []
    for coeff, sym, cf, nf in instantiate(tterms, {}, session.decls):
        t = session.canon.make(session.canon.fix_coeff(coeff), sym, cf, nf)
        if t is not None:
            out.append(t)
    return out


def run_source(text, filename="<input>", repeat_cap=DEFAULT_REPEAT_CAP, memoize=True):
    """Preprocess, parse and run a program.  Returns the finished Session."""
    program = parse(preprocess(text, filename))
    sess = Session(repeat_cap=repeat_cap, memoize=memoize)
    sess.run_program(program)
    return sess


def run_program(program, sess0=None):
    sess = sess0 or Session()
    return sess.run_program(program)


__all__ = [
    "Session",
    "OutputEvent",
    "ModuleStats",
    "render_expression",
    "term_string",
    "dump_lines",
    "parse_term_text",
    "run_source",
    "run_program",
]
