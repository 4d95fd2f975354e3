import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# Acceptance verdict lines, printed once more at the end of the session so they
# survive output capture.
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record and print one ``CRITERION n: PASS/FAIL`` line."""

    def emit(number: int, ok: bool, title: str, detail: str) -> bool:
        line = f"CRITERION {number}: {'PASS' if ok else 'FAIL'} | {title} | {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


TINY_CONFIG = """\
; Small option experiment used by the CLI and config tests.
[model]
kind = option
alpha = 0.975
delta = 0.5

[experiment]
algorithms = sa, nsa, mlsa
targets = var, es
epsilons = 1/8, 1/16, 1/32
replications = 3
seed = 7
init = truth

[mlsa]
m = 2
scenario = finite_moment
p_star = 11
calibration_var = 1
calibration_es = 1

[sa.var]
gamma1 = 1
offset = 100
[sa.es]
gamma1 = 0.1
offset = 1e4
[nsa.var]
gamma1 = 1
offset = 100
[nsa.es]
gamma1 = 0.1
offset = 1e4

[mlsa.var.1/8]
h0 = 1/4
gamma1 = 1
offset = 100
[mlsa.var.1/16]
h0 = 1/4
gamma1 = 1
offset = 100
[mlsa.var.1/32]
h0 = 1/4
gamma1 = 1
offset = 100
[mlsa.es.1/8]
h0 = 1/4
gamma1 = 0.1
offset = 1e4
[mlsa.es.1/16]
h0 = 1/4
gamma1 = 0.1
offset = 1e4
[mlsa.es.1/32]
h0 = 1/4
gamma1 = 0.1
offset = 1e4

[bias_study]
h = 1/4, 1/8
iterations = 2000
replications = 3
gamma1 = 0.1
offset = 1e4
"""


@pytest.fixture
def tiny_config(tmp_path):
    """Path to a cheap but complete experiment config."""
    path = tmp_path / "tiny.cfg"
    path.write_text(TINY_CONFIG)
    return path
