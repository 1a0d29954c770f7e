# storage/paths.py
"""
Project path constants and path resolution.
"""
from pathlib import Path
from typing import Optional, Union

THIS_DIR = Path(__file__).resolve().parent
PROJECT_ROOT = THIS_DIR.parent
FIXTURES_DIR = PROJECT_ROOT / "fixtures"
MODELS_DIR = FIXTURES_DIR / "models"


def resolve(path: Union[str, Path], base: Optional[Path] = None) -> Path:
    """Absolute path; relative paths are taken against `base` (never the cwd when base is given)."""
    path = Path(path).expanduser()
    if path.is_absolute() or base is None:
        return path.resolve()
    return (Path(base) / path).resolve()


def ensure_parent(path: Path) -> Path:
    """Create the parent directory of an output file."""
    path.parent.mkdir(parents=True, exist_ok=True)
    return path
