"""The frontend bridge tests run against committed fixture files; this
guard regenerates them and fails if the committed bytes have drifted from
what the library currently produces."""

import importlib.util
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load_generator():
    spec = importlib.util.spec_from_file_location(
        "export_bridge_fixtures", ROOT / "scripts" / "export_bridge_fixtures.py"
    )
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def test_committed_fixtures_are_fresh(tmp_path):
    generator = load_generator()
    generator.write_fixtures(tmp_path)
    committed = ROOT / "frontend" / "fixtures"
    fresh_names = sorted(p.name for p in tmp_path.iterdir())
    committed_names = sorted(p.name for p in committed.iterdir())
    assert fresh_names == committed_names
    for name in fresh_names:
        assert (tmp_path / name).read_bytes() == (committed / name).read_bytes(), name
