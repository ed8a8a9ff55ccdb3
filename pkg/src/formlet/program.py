"""Preprocessor and parser.

The preprocessor resolves ``#define`` / ``'var'`` substitution and
``#procedure`` / ``#call`` splicing and keeps an origin map so that errors
can point at ``file:line``.  The parser turns the resulting text into a
:class:`Program`: a list of modules, each a list of statements.

Expression ASTs are tuples:

``("num", Fraction)``, ``("name", name, wild, args)``, ``("argfield", name)``,
``("sum", [node, ...])``, ``("prod", [node, ...])``, ``("neg", node)``,
``("pow", node, int)``, ``("inv", node)`` (a divisor inside a product).

``wild`` is ``None`` for a plain name, otherwise a tuple of the set names
that follow the ``?`` (possibly empty).  ``args`` is ``None`` when no
parenthesized argument list follows the name.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import (
    FormSyntaxError,
    PreprocessorError,
    RecursionDepthExceeded,
    UnknownPreprocessorVariable,
    UnknownProcedure,
    UnterminatedProcedure,
)

MAX_CALL_DEPTH = 64

# ---------------------------------------------------------------------------
# preprocessor


@dataclass
class PreprocessedSource:
    lines: list
    origins: list  # parallel to lines: "file:line"

    @property
    def text(self):
        return "\n".join(self.lines)


_VAR_RE = re.compile(r"'([A-Za-z_][A-Za-z0-9_]*)'")
_DEFINE_RE = re.compile(r'#define\s+([A-Za-z_][A-Za-z0-9_]*)\s*"([^"]*)"\s*$')
_PROC_RE = re.compile(r"#procedure\s+([A-Za-z_][A-Za-z0-9_]*)\s*(\(([^)]*)\))?\s*:?\s*;?\s*$")
_CALL_RE = re.compile(r"#call\s+([A-Za-z_][A-Za-z0-9_]*)\s*(\(([^)]*)\))?\s*;?\s*$")
_ENDPROC_RE = re.compile(r"#end\s*procedure\s*;?\s*$", re.IGNORECASE)


def preprocess(src, filename="<input>"):
    """Resolve preprocessor directives.  Returns a PreprocessedSource."""
    raw = [(line, f"{filename}:{i + 1}") for i, line in enumerate(src.splitlines())]
    defines = {}
    procedures = {}
    out_lines, out_origins = [], []

    def substitute(line, origin):
        def rep(m):
            name = m.group(1)
            if name not in defines:
                raise UnknownPreprocessorVariable(f"unknown preprocessor variable '{name}'", origin)
            return defines[name]

        return _VAR_RE.sub(rep, line)

    def run(lines, depth, args):
        i = 0
        while i < len(lines):
            line, origin = lines[i]
            i += 1
            stripped = line.strip()
            if stripped.startswith("*") and line.startswith("*"):
                continue  # comment line
            if not stripped.startswith("#"):
                text = line
                for k, v in args.items():
                    text = text.replace(f"'{k}'", v)
                out_lines.append(substitute(text, origin))
                out_origins.append(origin)
                continue
            if stripped in ("#-", "#+"):
                continue
            if stripped.startswith("#define"):
                m = _DEFINE_RE.match(stripped)
                if not m:
                    raise PreprocessorError(f"malformed #define: {stripped}", origin)
                defines[m.group(1)] = substitute(m.group(2), origin)
                continue
            if stripped.startswith("#procedure"):
                m = _PROC_RE.match(stripped)
                if not m:
                    raise PreprocessorError(f"malformed #procedure: {stripped}", origin)
                params = [p.strip() for p in (m.group(3) or "").split(",") if p.strip()]
                body = []
                while True:
                    if i >= len(lines):
                        raise UnterminatedProcedure(f"procedure {m.group(1)} is never closed", origin)
                    bl, bo = lines[i]
                    i += 1
                    if _ENDPROC_RE.match(bl.strip()):
                        break
                    body.append((bl, bo))
                procedures[m.group(1)] = (params, body)
                continue
            if _ENDPROC_RE.match(stripped):
                raise PreprocessorError("#endprocedure without #procedure", origin)
            if stripped.startswith("#call"):
                m = _CALL_RE.match(stripped)
                if not m:
                    raise PreprocessorError(f"malformed #call: {stripped}", origin)
                name = m.group(1)
                if name not in procedures:
                    raise UnknownProcedure(f"unknown procedure {name}", origin)
                if depth >= MAX_CALL_DEPTH:
                    raise RecursionDepthExceeded(f"#call nesting deeper than {MAX_CALL_DEPTH}", origin)
                params, body = procedures[name]
                values = [a.strip() for a in (m.group(3) or "").split(",") if a.strip()]
                if len(values) != len(params):
                    raise PreprocessorError(f"procedure {name} expects {len(params)} arguments", origin)
                run(body, depth + 1, dict(zip(params, values)))
                continue
            raise PreprocessorError(f"unsupported directive: {stripped}", origin)

    run(raw, 0, {})
    return PreprocessedSource(out_lines, out_origins)


# ---------------------------------------------------------------------------
# tokenizer


@dataclass
class Tok:
    kind: str  # name, num, op, dot
    text: str
    line: int  # index into PreprocessedSource.lines
    spaced: bool  # whitespace precedes the token


_NAME_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*")
_NUM_RE = re.compile(r"[0-9]+")
_OPS = set("+-*/^(),=?:;<>")


def bracket_name(s, i):
    """Read a bracketed name starting at s[i] == '['.  Returns (name, end)."""
    depth = 0
    j = i
    while j < len(s):
        ch = s[j]
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
            if depth == 0:
                inner = s[i + 1 : j]
                return "[" + re.sub(r"\s+", "", inner) + "]", j + 1
        elif ch in ";\n":
            break
        j += 1
    return None, i


def tokenize(src):
    toks = []
    for ln, line in enumerate(src.lines):
        i = 0
        spaced = True
        stripped = line.lstrip()
        if stripped[:1] == "." and re.match(r"\.[A-Za-z]+", stripped):
            m = re.match(r"\.([A-Za-z]+)", stripped)
            toks.append(Tok("dot", m.group(1).lower(), ln, True))
            i = len(line) - len(stripped) + m.end()
            spaced = False
        while i < len(line):
            ch = line[i]
            if ch.isspace():
                i += 1
                spaced = True
                continue
            if ch == "[":
                name, j = bracket_name(line, i)
                if name is None:
                    raise FormSyntaxError("unterminated bracketed name", src.origins[ln])
                toks.append(Tok("name", name, ln, spaced))
                i = j
            elif ch.isalpha():
                m = _NAME_RE.match(line, i)
                toks.append(Tok("name", m.group(0), ln, spaced))
                i = m.end()
            elif ch.isdigit():
                m = _NUM_RE.match(line, i)
                toks.append(Tok("num", m.group(0), ln, spaced))
                i = m.end()
            elif ch in _OPS:
                toks.append(Tok("op", ch, ln, spaced))
                i += 1
            else:
                raise FormSyntaxError(f"unexpected character {ch!r}", src.origins[ln])
            spaced = False
    return toks


# ---------------------------------------------------------------------------
# statements


@dataclass
class Stmt:
    kind: str
    origin: str = ""
    # payload fields, used depending on kind
    names: list = field(default_factory=list)
    items: list = field(default_factory=list)  # (name, symmetry) for head decls
    name: str = ""
    lhs: object = None
    rhs: object = None
    once: bool = False
    body: list = field(default_factory=list)
    cond: object = None  # (names, value) for occurs
    value: object = None


@dataclass
class Program:
    modules: list
    source: PreprocessedSource | None = None


DECL_KINDS = {
    "symbol": "symbol",
    "symbols": "symbol",
    "s": "symbol",
    "index": "index",
    "indices": "index",
    "i": "index",
    "function": "function",
    "functions": "function",
    "f": "function",
    "nfunction": "function",
    "nfunctions": "function",
    "cfunction": "cfunction",
    "cfunctions": "cfunction",
    "cf": "cfunction",
    "commuting": "cfunction",
    "ntensor": "ntensor",
    "ntensors": "ntensor",
    "nt": "ntensor",
    "ctensor": "ctensor",
    "ctensors": "ctensor",
    "ct": "ctensor",
    "tensor": "tensor",
    "tensors": "tensor",
    "t": "tensor",
}

EXECUTABLE = {"id", "sum", "repeat", "if"}


class Parser:
    def __init__(self, src):
        self.src = src
        self.toks = tokenize(src)
        self.pos = 0

    # -- token helpers
    def origin(self, tok=None):
        tok = tok or self.peek()
        if tok is None:
            return self.src.origins[-1] if self.src.origins else "<input>"
        return self.src.origins[tok.line]

    def peek(self, k=0):
        p = self.pos + k
        return self.toks[p] if p < len(self.toks) else None

    def next(self):
        t = self.peek()
        if t is None:
            raise FormSyntaxError("unexpected end of input", self.origin())
        self.pos += 1
        return t

    def at_op(self, ch, k=0):
        t = self.peek(k)
        return t is not None and t.kind == "op" and t.text == ch

    def expect_op(self, ch):
        t = self.next()
        if t.kind != "op" or t.text != ch:
            raise FormSyntaxError(f"expected {ch!r}, found {t.text!r}", self.origin(t))
        return t

    def expect_name(self):
        t = self.next()
        if t.kind != "name":
            raise FormSyntaxError(f"expected a name, found {t.text!r}", self.origin(t))
        return t.text

    def at_end(self):
        t = self.peek()
        return t is None or (t.kind == "op" and t.text == ";") or t.kind == "dot"

    def end_statement(self):
        t = self.peek()
        if t is None or t.kind == "dot":
            return
        self.expect_op(";")

    # -- program
    def parse_program(self):
        modules = []
        current = []
        stack = []  # open repeat / if blocks
        ended = False
        while self.peek() is not None:
            t = self.peek()
            if ended:
                raise FormSyntaxError("statements after .end", self.origin(t))
            if t.kind == "op" and t.text == ";":
                self.pos += 1
                continue
            if t.kind == "dot":
                self.pos += 1
                if self.at_op(";"):
                    self.pos += 1
                if t.text not in ("sort", "end"):
                    raise FormSyntaxError(f"unknown module instruction .{t.text}", self.origin(t))
                if stack:
                    raise FormSyntaxError("unclosed repeat/if block at module end", self.origin(t))
                current.append(Stmt(t.text, self.origin(t)))
                modules.append(current)
                current = []
                ended = t.text == "end"
                continue
            st = self.parse_statement()
            if st.kind in ("repeat", "if") and st.body is None:
                st.body = []
                target = stack[-1].body if stack else current
                target.append(st)
                stack.append(st)
                continue
            if st.kind in ("endrepeat", "endif"):
                want = "repeat" if st.kind == "endrepeat" else "if"
                if not stack or stack[-1].kind != want:
                    raise FormSyntaxError(f"{st.kind} without matching {want}", st.origin)
                stack.pop()
                continue
            if stack:
                if st.kind not in EXECUTABLE:
                    raise FormSyntaxError(f"{st.kind} statement inside a block", st.origin)
                stack[-1].body.append(st)
            else:
                current.append(st)
        if stack:
            raise FormSyntaxError("unclosed repeat/if block", self.origin())
        if current:
            raise FormSyntaxError("program does not end with .end", self.origin())
        if not ended:
            raise FormSyntaxError("program does not end with .end", self.origin())
        return Program(modules, self.src)

    def parse_statement(self):
        t = self.next()
        origin = self.origin(t)
        if t.kind != "name":
            raise FormSyntaxError(f"unexpected {t.text!r} at statement start", origin)
        kw = t.text.lower()
        if kw in DECL_KINDS:
            kind = DECL_KINDS[kw]
            items = self.parse_decl_list()
            self.end_statement()
            return Stmt("decl", origin, items=items, name=kind)
        if kw == "autodeclare":
            sub = self.expect_name().lower()
            if DECL_KINDS.get(sub) != "index":
                raise FormSyntaxError("only autodeclare index is supported", origin)
            names = self.parse_name_list()
            self.end_statement()
            return Stmt("autodeclare", origin, names=names)
        if kw == "dimension":
            tok = self.next()
            if tok.kind == "num":
                val = int(tok.text)
            elif tok.kind == "name":
                val = tok.text
            else:
                raise FormSyntaxError("dimension needs a symbol or a number", origin)
            self.end_statement()
            return Stmt("dimension", origin, value=val)
        if kw == "set":
            name = self.expect_name()
            self.expect_op(":")
            names = self.parse_name_list()
            self.end_statement()
            return Stmt("set", origin, name=name, names=names)
        if kw == "polyratfun":
            name = self.expect_name()
            value = None
            if self.at_op("("):
                self.next()
                if self.expect_name().lower() != "expand":
                    raise FormSyntaxError("only the expand option is supported", origin)
                self.expect_op(",")
                var = self.expect_name()
                self.expect_op(",")
                tok = self.next()
                if tok.kind != "num":
                    raise FormSyntaxError("expansion order must be a number", origin)
                self.expect_op(")")
                value = (var, int(tok.text))
            self.end_statement()
            return Stmt("polyratfun", origin, name=name, value=value)
        if kw in ("local", "l"):
            name = self.expect_name()
            self.expect_op("=")
            rhs = self.parse_expr()
            self.end_statement()
            return Stmt("local", origin, name=name, rhs=rhs)
        if kw in ("id", "identify"):
            return self.parse_id(origin)
        if kw == "sum":
            names = self.parse_name_list()
            self.end_statement()
            return Stmt("sum", origin, names=names)
        if kw == "repeat":
            if self.at_end():
                self.end_statement()
                return Stmt("repeat", origin, body=None)
            inner = self.parse_statement()
            if inner.kind not in EXECUTABLE or inner.body is None:
                raise FormSyntaxError("repeat must precede an executable statement", origin)
            return Stmt("repeat", origin, body=[inner])
        if kw == "endrepeat":
            self.end_statement()
            return Stmt("endrepeat", origin)
        if kw == "if":
            cond = self.parse_condition()
            if self.at_end():
                self.end_statement()
                return Stmt("if", origin, cond=cond, body=None)
            inner = self.parse_statement()
            if inner.kind not in EXECUTABLE or inner.body is None:
                raise FormSyntaxError("if must be followed by ; or an executable statement", origin)
            return Stmt("if", origin, cond=cond, body=[inner])
        if kw == "endif":
            self.end_statement()
            return Stmt("endif", origin)
        if kw in ("hide", "unhide"):
            names = [] if self.at_end() else self.parse_name_list()
            self.end_statement()
            return Stmt(kw, origin, names=names)
        if kw in ("bracket", "b"):
            names = [] if self.at_end() else self.parse_name_list()
            self.end_statement()
            return Stmt("bracket", origin, names=names)
        if kw == "format":
            tok = self.next()
            if tok.kind != "num":
                raise FormSyntaxError("Format expects a line width", origin)
            self.end_statement()
            return Stmt("format", origin, value=int(tok.text))
        if kw == "print":
            style = ""
            if self.at_op("+") or self.at_op("-"):
                sign = self.next().text
                opt = self.expect_name()
                style = sign + opt
            names = [] if self.at_end() else self.parse_name_list()
            self.end_statement()
            return Stmt("print", origin, value=style, names=names)
        raise FormSyntaxError(f"unknown statement keyword {t.text!r}", origin)

    def parse_id(self, origin):
        once = False
        t = self.peek()
        if t is not None and t.kind == "name" and t.text.lower() == "once":
            # `once` is a keyword only when another term follows before '='
            nxt = self.peek(1)
            if nxt is not None and not (nxt.kind == "op" and nxt.text in "=?(*^"):
                once = True
                self.pos += 1
        lhs = self.parse_expr()
        self.expect_op("=")
        rhs = self.parse_expr()
        self.end_statement()
        return Stmt("id", origin, lhs=lhs, rhs=rhs, once=once)

    def parse_condition(self):
        self.expect_op("(")
        fn = self.expect_name()
        if fn.lower() != "occurs":
            raise FormSyntaxError("only occurs(...) conditions are supported", self.origin())
        self.expect_op("(")
        names = self.parse_name_list()
        self.expect_op(")")
        self.expect_op("=")
        if self.at_op("="):
            self.next()
        tok = self.next()
        if tok.kind != "num":
            raise FormSyntaxError("occurs comparison needs a number", self.origin(tok))
        self.expect_op(")")
        return (names, int(tok.text))

    def parse_name_list(self):
        names = [self.expect_name()]
        while self.at_op(","):
            self.next()
            names.append(self.expect_name())
        return names

    def parse_decl_list(self):
        items = []
        while True:
            name = self.expect_name()
            sym = "none"
            if self.at_op("("):
                self.next()
                sym = self.expect_name().lower()
                if sym not in ("symmetric", "antisymmetric"):
                    raise FormSyntaxError(f"unsupported property {sym}", self.origin())
                self.expect_op(")")
            items.append((name, sym))
            if not self.at_op(","):
                break
            self.next()
        return items

    # -- expressions
    def parse_expr(self):
        terms = []
        first = True
        while True:
            sign = 1
            if self.at_op("+") or self.at_op("-"):
                sign = -1 if self.next().text == "-" else 1
            elif not first:
                break
            node = self.parse_product()
            terms.append(("neg", node) if sign < 0 else node)
            first = False
            if not (self.at_op("+") or self.at_op("-")):
                break
        return terms[0] if len(terms) == 1 else ("sum", terms)

    def parse_product(self):
        factors = [self.parse_power()]
        while self.at_op("*") or self.at_op("/"):
            op = self.next().text
            f = self.parse_power()
            if op == "/":
                f = ("inv", f)
            factors.append(f)
        return factors[0] if len(factors) == 1 else ("prod", factors)

    def parse_power(self):
        base = self.parse_primary()
        if self.at_op("^"):
            self.next()
            neg = False
            if self.at_op("-"):
                self.next()
                neg = True
            tok = self.next()
            if tok.kind != "num":
                raise FormSyntaxError("exponent must be an integer", self.origin(tok))
            n = int(tok.text)
            base = ("pow", base, -n if neg else n)
        return base

    def parse_primary(self):
        t = self.next()
        if t.kind == "num":
            return ("num", Fraction(int(t.text)))
        if t.kind == "op" and t.text == "(":
            e = self.parse_expr()
            self.expect_op(")")
            return e
        if t.kind == "op" and t.text == "-":
            return ("neg", self.parse_power())
        if t.kind == "op" and t.text == "?":
            return ("argfield", self.expect_name())
        if t.kind == "name":
            name = t.text
            wild = None
            if self.at_op("?") and not self.peek().spaced:
                self.next()
                sets = []
                while True:
                    n = self.peek()
                    if n is not None and n.kind == "name" and not n.spaced:
                        sets.append(self.next().text)
                        if self.at_op("?") and not self.peek().spaced:
                            self.next()
                            continue
                    break
                wild = tuple(sets)
            args = None
            if self.at_op("(") and not self.peek().spaced:
                self.next()
                args = []
                if not self.at_op(")"):
                    while True:
                        args.append(self.parse_arg())
                        if self.at_op(","):
                            self.next()
                            continue
                        break
                self.expect_op(")")
            return ("name", name, wild, None if args is None else tuple(args))
        raise FormSyntaxError(f"unexpected {t.text!r} in expression", self.origin(t))

    def parse_arg(self):
        if self.at_op("?"):
            self.next()
            return ("argfield", self.expect_name())
        return self.parse_expr()


def parse(src):
    """Parse preprocessed source (or raw text) into a Program."""
    if isinstance(src, str):
        src = preprocess(src)
    return Parser(src).parse_program()


def parse_expression(text):
    """Parse a standalone expression (used for golden files)."""
    src = PreprocessedSource([text], ["<expr>"])
    p = Parser(src)
    e = p.parse_expr()
    if p.peek() is not None:
        raise FormSyntaxError(f"trailing input in expression: {p.peek().text!r}", "<expr>")
    return e


# ---------------------------------------------------------------------------
# pretty printing of ASTs (used for round-trip checks)


def format_expr(node):
    """Source text that parses back to exactly ``node``."""
    kind = node[0]
    if kind == "sum":
        out = []
        for i, t in enumerate(node[1]):
            if t[0] == "neg":
                out.append(("-" if i == 0 else " - ") + _fmt_product(t[1]))
            else:
                out.append(("" if i == 0 else " + ") + _fmt_product(t))
        return "".join(out)
    if kind == "neg":
        return "-" + _fmt_product(node[1])
    return _fmt_product(node)


def _fmt_product(node):
    if node[0] != "prod":
        return _fmt_power(node)
    out = []
    for i, f in enumerate(node[1]):
        if i and f[0] == "inv":
            out.append("/" + _fmt_power(f[1]))
        elif i == 0 and f[0] == "neg":
            out.append("(" + format_expr(f) + ")")  # "-a*b" would negate the product
        else:
            out.append(("*" if i else "") + _fmt_power(f))
    return "".join(out)


def _fmt_power(node):
    if node[0] == "neg":
        return "-" + _fmt_power(node[1])
    if node[0] == "pow":
        return _fmt_primary(node[1]) + "^" + str(node[2])
    return _fmt_primary(node)


def _fmt_primary(node):
    kind = node[0]
    if kind == "num":
        q = node[1]
        if q.denominator == 1 and q >= 0:
            return str(q.numerator)
        return f"({q.numerator}/{q.denominator})"
    if kind == "name":
        _, name, wild, args = node
        s = name
        if wild is not None:
            s += "?" + "?".join(wild)
        if args is not None:
            s += "(" + ",".join(format_expr(a) for a in args) + ")"
        return s
    if kind == "argfield":
        return "?" + node[1]
    return "(" + format_expr(node) + ")"
