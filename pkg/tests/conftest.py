import numpy as np
import pytest

from stackcnn.model import HyperParams, build_model
from stackcnn.rng import make_rng
from stackcnn.synthetic import data_dir
from stackcnn.text import load_dataset, load_embeddings

_acceptance = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(criterion): acceptance criterion test")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    if "test_acceptance.py" not in report.nodeid:
        return
    _acceptance.append((report.nodeid.split("::")[-1], report.outcome, report.duration))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome, duration in _acceptance:
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{status}  {name}  ({duration:.2f}s)")


@pytest.fixture(scope="session")
def synthetic_config():
    return data_dir() / "synthetic_config.json"


@pytest.fixture(scope="session")
def synthetic_corpus():
    return load_dataset(data_dir() / "synthetic_train.tsv")


@pytest.fixture(scope="session")
def synthetic_table():
    return load_embeddings(data_dir() / "synthetic_emb.txt")


def tiny_model(seed, dtype=np.float64, filter_sizes=(1, 2, 3, 4, 5), dropout_p=0.5):
    hp = HyperParams(num_filters=2, filter_sizes=filter_sizes, dense_size=3, dropout_p=dropout_p)
    return build_model(hp, 4, 5, make_rng(seed), dtype=dtype)


@pytest.fixture
def tiny():
    return tiny_model
