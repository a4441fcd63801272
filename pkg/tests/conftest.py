from importlib import resources

import pytest

from wikinli.preprocess import ProcessedComment, TokenStream


def pc(tokens, tags=None, label=None, cid="c", bounds=None):
    """Processed comment from raw token/tag lists (tags default to the tokens)."""
    tokens = tuple(tokens)
    tags = tuple(tags) if tags is not None else tokens
    if bounds is None:
        bounds = (len(tokens),) if tokens else ()
    return ProcessedComment(cid, label, TokenStream(tokens, tuple(bounds)), tags)


@pytest.fixture
def fixture_dir():
    return resources.files("wikinli").joinpath("data/fixture")


# acceptance results, echoed in the terminal summary so they survive capture
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
