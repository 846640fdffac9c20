import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from emtcalc.dsl import parse

CORPUS = Path(__file__).parent.parent / "src" / "emtcalc" / "corpus"


@pytest.fixture(scope="session")
def corpus_dir() -> Path:
    return CORPUS


@pytest.fixture(scope="session")
def kg():
    return parse((CORPUS / "kg.lag").read_text())


@pytest.fixture(scope="session")
def em():
    return parse((CORPUS / "em.lag").read_text())


@pytest.fixture(scope="session")
def em_bh(em):
    return parse((CORPUS / "em_bessel_hagen.lag").read_text(), base=em)


@pytest.fixture(scope="session")
def gb():
    return parse((CORPUS / "gauss_bonnet.lag").read_text())


@pytest.fixture(scope="session")
def fp():
    return parse((CORPUS / "fierz_pauli.lag").read_text())
