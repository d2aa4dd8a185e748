import numpy as np
import pytest

from spongelab.nlp.corpus import build_toy_vocab
from spongelab.nlp.translator import build_toy_translator
from spongelab.vision import build_reference_cnn

# criterion id -> (passed, title, measured)
_ACCEPTANCE: dict[str, tuple[bool, str, str]] = {}


@pytest.fixture(scope="session")
def vocab():
    return build_toy_vocab()


@pytest.fixture(scope="session")
def translator(vocab):
    return build_toy_translator(vocab, seed=0)


@pytest.fixture(scope="session")
def cnn():
    return build_reference_cnn(seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    cid, title = mark.args
    measured = "; ".join(f"{k}={v}" for k, v in item.user_properties)
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        _ACCEPTANCE[cid] = (rep.passed, title, measured)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for cid in sorted(_ACCEPTANCE, key=lambda c: int(c.lstrip("C"))):
        ok, title, measured = _ACCEPTANCE[cid]
        tr.write_line(f"{cid:<4}{'PASS' if ok else 'FAIL'}  {title}" + (f"  [{measured}]" if measured else ""))
