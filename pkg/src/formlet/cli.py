"""Command-line runner: ``formlet run | compare | dump``.

Exit codes: 0 success / PASS, 1 compare FAIL, 2 usage error,
3 interpreter error.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass

import click

from .algebra import rat_add
from .errors import FormletError, GoldenParseError
from .exec import DEFAULT_REPEAT_CAP, dump_lines, parse_term_text, run_source, term_string

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_ERROR = 0, 1, 2, 3


@dataclass
class RunConfig:
    path: str
    mode: str = "run"  # run | golden-compare | dump-terms
    golden: str | None = None
    repeat_cap: int = DEFAULT_REPEAT_CAP
    stats: bool = False

    def __post_init__(self):
        if (self.mode == "golden-compare") != (self.golden is not None):
            raise ValueError("a golden path is required exactly for golden-compare mode")


def read_golden(text):
    """Parse golden text into {name: [term line, ...]} (order preserved)."""
    out = {}
    cur = None
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split(None, 1)
            if len(parts) != 2 or parts[0] != "expr":
                raise GoldenParseError(f"bad header line: {raw!r}", f"golden:{ln}")
            cur = parts[1].strip()
            out[cur] = []
            continue
        if cur is None:
            raise GoldenParseError("term line before any '# expr' header", f"golden:{ln}")
        if line != "0":
            out[cur].append(line)
    return out


def term_multiset(terms, decls=None):
    """Order-free comparison key: canonical key -> coefficient."""
    acc = {}
    for t in terms:
        prev = acc.get(t.key)
        acc[t.key] = t.coeff if prev is None else rat_add(prev, t.coeff)
    return {k: c for k, c in acc.items() if not c.is_zero()}


def golden_terms(golden, sess):
    """Turn golden term strings into canonical Terms under the session's decls."""
    out = {}
    for name, lines in golden.items():
        terms = []
        for line in lines:
            try:
                terms.extend(parse_term_text(line, sess))
            except FormletError as e:
                raise GoldenParseError(f"cannot parse golden term {line!r}: {e}") from e
        out[name] = terms
    return out


def compare(sess, golden):
    """Compare a finished session with a parsed golden mapping.

    Returns (ok, report_lines).
    """
    report = []
    ok = True
    want_all = golden_terms(golden, sess)
    for name, want_terms in want_all.items():
        if name not in sess.exprs:
            report.append(f"{name}: missing expression")
            ok = False
            continue
        got = term_multiset(sess.exprs[name], sess.decls)
        want = term_multiset(want_terms, sess.decls)
        by_key = {t.key: t for t in list(sess.exprs[name]) + want_terms}
        missing = [k for k in want if k not in got]
        extra = [k for k in got if k not in want]
        wrong = [k for k in want if k in got and got[k] != want[k]]
        if missing or extra or wrong:
            ok = False
            report.append(f"{name}: FAIL ({len(got)} terms, expected {len(want)})")
            for k in missing:
                report.append("  missing: " + term_string(by_key[k].with_coeff(want[k]), sess.decls))
            for k in extra:
                report.append("  extra:   " + term_string(by_key[k].with_coeff(got[k]), sess.decls))
            for k in wrong:
                report.append(
                    "  coeff:   " + term_string(by_key[k].with_coeff(got[k]), sess.decls)
                    + "  expected " + term_string(by_key[k].with_coeff(want[k]), sess.decls)
                )
        else:
            report.append(f"{name}: PASS ({len(got)} terms)")
    return ok, report


def _load(path, repeat_cap):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return run_source(text, path, repeat_cap=repeat_cap)


def _print_stats(sess):
    for st in sess.stats:
        counts = ", ".join(f"{n}={c}" for n, c in st.term_counts.items()) or "-"
        click.echo(f"module {st.index}: {st.seconds:.3f}s terms: {counts}", err=True)
        for origin, passes in st.repeat_passes:
            click.echo(f"  repeat at {origin}: {passes} passes", err=True)


@click.group()
def main():
    """Run FORM-subset programs."""


@main.command()
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--repeat-cap", type=int, default=DEFAULT_REPEAT_CAP, show_default=True)
@click.option("--stats", is_flag=True, help="Per-module term counts and repeat passes.")
def run(file, repeat_cap, stats):
    """Execute FILE and print its output."""
    try:
        sess = _load(file, repeat_cap)
    except FormletError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_ERROR)
    for ev in sess.outputs:
        click.echo(ev.text)
        click.echo("")
    if stats:
        _print_stats(sess)
    sys.exit(EXIT_OK)


@main.command(name="compare")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--golden", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--repeat-cap", type=int, default=DEFAULT_REPEAT_CAP, show_default=True)
def compare_cmd(file, golden, repeat_cap):
    """Run FILE and compare its expressions with a golden file."""
    try:
        with open(golden, encoding="utf-8") as fh:
            gold = read_golden(fh.read())
        sess = _load(file, repeat_cap)
        ok, report = compare(sess, gold)
    except FormletError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_ERROR)
    for line in report:
        click.echo(line)
    click.echo("PASS" if ok else "FAIL")
    sys.exit(EXIT_OK if ok else EXIT_FAIL)


@main.command()
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--repeat-cap", type=int, default=DEFAULT_REPEAT_CAP, show_default=True)
def dump(file, repeat_cap):
    """Run FILE and list every expression in golden format."""
    try:
        sess = _load(file, repeat_cap)
    except FormletError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_ERROR)
    for line in dump_lines(sess.exprs, sess.decls):
        click.echo(line)
    sys.exit(EXIT_OK)


if __name__ == "__main__":  # pragma: no cover
    main()
