import os
import textwrap

from hypothesis import HealthCheck, settings

from formlet.exec import run_source, term_string

# FORMLET_CASES lowers the count for quick local iterations only
N_CASES = int(os.environ.get("FORMLET_CASES", 10_000))

PROP = settings(
    max_examples=N_CASES,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much, HealthCheck.data_too_large],
)


def run(src, **kw):
    """Run a program given as an indented triple-quoted string."""
    return run_source(textwrap.dedent(src).lstrip(), "<test>", **kw)


def dumped(src, **kw):
    """Run and return {name: [term strings]} for every expression."""
    sess = run(src, **kw)
    return {n: [term_string(t, sess.decls) for t in ts] for n, ts in sess.exprs.items()}


# -- acceptance reporting: one line per criterion in the terminal summary

ACCEPTANCE = {}  # criterion label ("1", "3b", ...) -> (ok, label, detail)

# property tests that make up criterion 5
PROPERTY_SUITES = {
    "test_term.py::test_canonicalize_idempotent": "canonicalize idempotence",
    "test_term.py::test_antisymmetric_sign_consistency": "antisymmetric equal-index annihilation",
    "test_term.py::test_delta_chain_collapse": "delta-chain order independence",
    "test_algebra.py::test_results_are_reduced": "rational reducedness",
    "test_algebra.py::test_field_axioms": "field axioms",
    "test_pattern.py::test_matcher_sound_disjoint_maximal": "matcher vs brute force",
    "test_term.py::test_normalize_order_independent": "normalize permutation invariance",
    "test_cli.py::test_dump_parse_dump_fixed_point": "dump/parse/dump fixed point",
}
_suite_outcomes = {}


def record(n, ok, label, detail=""):
    ACCEPTANCE[n] = (ok, label, detail)


def pytest_runtest_logreport(report):
    key = report.nodeid.split("tests/")[-1]
    if key in PROPERTY_SUITES and (report.when == "call" or report.outcome != "passed"):
        _suite_outcomes[key] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    missing = [k for k in PROPERTY_SUITES if k not in _suite_outcomes]
    failed = [k for k, o in _suite_outcomes.items() if o != "passed"]
    if missing:
        detail = f"not run in this session: {len(missing)} suite(s)"
    else:
        detail = f"{len(PROPERTY_SUITES)} suites x {N_CASES} cases"
        if failed:
            detail += "; failed: " + ", ".join(PROPERTY_SUITES[k] for k in failed)
    prior = ACCEPTANCE.get("5", (True, "", ""))
    record("5", prior[0] and not missing and not failed, "property suites", detail + prior[2])
    terminalreporter.section("acceptance")
    for n in sorted(ACCEPTANCE):
        ok, label, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n}. {label}: {detail}")
