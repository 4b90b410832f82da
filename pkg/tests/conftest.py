import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

# Filled by test_acceptance: criterion number -> list of (ok, message).
ACCEPTANCE = {}


def record(criterion, ok, message):
    ACCEPTANCE.setdefault(criterion, []).append((bool(ok), message))
    print("[criterion %d] %s: %s" % (criterion, "PASS" if ok else "FAIL", message))
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return

    terminalreporter.section("acceptance criteria")

    for k in sorted(ACCEPTANCE):
        checks = ACCEPTANCE[k]
        ok = all(c[0] for c in checks)
        detail = "; ".join(m for _, m in checks)
        terminalreporter.write_line("criterion %2d %s  %s" % (k, "PASS" if ok else "FAIL", detail))
