from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

PACKAGE_NAME = "kern-sgg"


def get_version() -> str:
    try:
        return version(PACKAGE_NAME)
    except PackageNotFoundError:
        # Source checkout: the version file sits beside setup.py
        version_file = Path(__file__).resolve().parent.parent.joinpath("version")
        return version_file.read_text(encoding="ascii").strip() if version_file.exists() else "unknown"
