import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # fake_cdp helper import

from screenforge import pipeline
from screenforge.catalog import load_catalog

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def fixture_layouts():
    return pipeline.discover_layouts(FIXTURES / "layouts")


@pytest.fixture(scope="session")
def fixture_catalog():
    return load_catalog(FIXTURES / "catalog.jsonl", FIXTURES / "assets")


def pytest_runtest_logreport(report):
    """One visible pass/fail line per acceptance criterion."""
    if "test_acceptance" in report.nodeid and report.when == "call":
        name = report.nodeid.split("::")[-1]
        outcome = "PASS" if report.passed else "FAIL"
        print(f"\nACCEPTANCE {name}: {outcome}", flush=True)


@pytest.fixture(scope="session")
def golden_run(tmp_path_factory, fixture_layouts, fixture_catalog):
    """One shared seed-42 pipeline run over the fixture layouts."""
    work = tmp_path_factory.mktemp("golden")
    configs = pipeline.generate_configs(
        fixture_layouts, fixture_catalog, 42, 5, work)
    samples, failures = pipeline.render_samples(
        fixture_layouts, configs, work, 42, "all",
        viewport=(1400, 900), asset_root=FIXTURES / "assets")
    assert not failures
    return {"work": work, "configs": configs, "samples": samples,
            "layouts": fixture_layouts, "seed": 42, "variants": 5}
