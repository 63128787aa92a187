"""Shared fixtures.

Every NonCriticalEntire built during the session is registered so that the
session can audit all of them for zeros of the derivative at the end.
"""

from __future__ import annotations

import numpy as np
import pytest

from noncritical import noncrit_core
from noncritical.audit import zero_counts_noncritical

CREATED: list = []
ACCEPTANCE: dict = {}

_post_init = noncrit_core.NonCriticalEntire.__post_init__


def _register(self):
    _post_init(self)
    CREATED.append(self)


noncrit_core.NonCriticalEntire.__post_init__ = _register


def audit_all_instances() -> tuple[int, list]:
    """(instances audited, list of (index, counts) with a nonzero count)."""
    seen, bad = set(), []
    for k, F in enumerate(CREATED):
        if id(F) in seen:
            continue
        seen.add(id(F))
        counts = zero_counts_noncritical(F)
        if any(c != 0 for c in counts):
            bad.append((k, counts))
    return len(seen), bad


@pytest.fixture
def record():
    """record(criterion, passed, detail) for the acceptance summary."""

    def _record(key: str, passed: bool, detail: str = "") -> None:
        ACCEPTANCE[key] = (bool(passed), detail)
        print(f"{'PASS' if passed else 'FAIL'} criterion {key}: {detail}")

    return _record


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_sessionfinish(session, exitstatus):
    n, bad = audit_all_instances()
    session.config._zero_audit = (n, bad)
    if bad and session.exitstatus == 0:
        session.exitstatus = 1


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE, key=lambda s: (len(s), s)):
            ok, detail = ACCEPTANCE[key]
            terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {key}: {detail}")
    n, bad = getattr(config, "_zero_audit", (0, []))
    terminalreporter.section("session zero-count audit")
    status = "PASS" if not bad else "FAIL"
    terminalreporter.write_line(f"{status} {n} non-critical instances, {len(bad)} with a nonzero count")


def pytest_collection_modifyitems(session, config, items):
    # the acceptance module audits every instance built in the session, so it runs last
    items.sort(key=lambda it: it.module.__name__.endswith("test_acceptance"))
