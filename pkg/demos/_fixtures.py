"""Locate the fixture corpus shipped inside the package."""

from pathlib import Path

FIXTURES = Path(__file__).resolve().parents[1] / "src" / "lrkit" / "fixtures"


def fixture_path(name: str) -> str:
    return str(FIXTURES / name)
