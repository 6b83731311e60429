"""Dataset registry: resolve the named screening datasets to tables.

`adult` loads the UCI adult screening ARFF vendored with the package.
`children` prefers a real ``Autism-Child-Data.arff`` (package data dir,
``ASDKIT_DATA_DIR``, or the working directory) and otherwise falls back to
the committed synthetic twin with a warning.  `combined` concatenates the
two.  Any other name is treated as a path to an ARFF or CSV file.
"""

from __future__ import annotations

import os
import warnings
from importlib import resources
from pathlib import Path

from .dataset import DataTable, combine, parse_arff

__all__ = ["load_dataset", "dataset_provenance", "DATASET_NAMES"]

DATASET_NAMES = ("children", "adult", "combined")

_REAL_CHILDREN = "Autism-Child-Data.arff"
_SYNTH_CHILDREN = "Autism-Child-Data.synthetic.arff"
_ADULT = "Autism-Adult-Data.arff"


class SyntheticDataWarning(UserWarning):
    pass


def _package_data(name: str) -> str | None:
    ref = resources.files("asdkit") / "data" / name
    try:
        return ref.read_text()
    except FileNotFoundError:
        return None


def _children_search_dirs() -> list[Path]:
    dirs = []
    env = os.environ.get("ASDKIT_DATA_DIR")
    if env:
        dirs.append(Path(env))
    dirs.append(Path.cwd() / "data")
    dirs.append(Path.cwd())
    return dirs


def _resolve_children() -> tuple[str, str]:
    """Returns (arff text, provenance tag)."""
    for d in _children_search_dirs():
        p = d / _REAL_CHILDREN
        if p.is_file():
            return p.read_text(), f"real:{p}"
    text = _package_data(_REAL_CHILDREN)
    if text is not None:
        return text, "real:package"
    text = _package_data(_SYNTH_CHILDREN)
    if text is None:
        raise FileNotFoundError(
            "no children dataset available; run `python -m asdkit.synthetic`"
        )
    warnings.warn(
        "children dataset: using the synthetic twin (real ARFF not found); "
        "place Autism-Child-Data.arff in $ASDKIT_DATA_DIR or ./data to use "
        "the original",
        SyntheticDataWarning,
        stacklevel=3,
    )
    return text, "synthetic:package"


def dataset_provenance(name: str) -> str:
    """Provenance tag recorded in experiment manifests."""
    if name == "adult":
        return "real:package"
    if name == "children":
        return _resolve_children_quiet()[1]
    if name == "combined":
        return f"adult=real:package,children={_resolve_children_quiet()[1]}"
    return f"file:{name}"


def _resolve_children_quiet() -> tuple[str, str]:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SyntheticDataWarning)
        return _resolve_children()


def load_dataset(name: str) -> DataTable:
    if name == "adult":
        text = _package_data(_ADULT)
        if text is None:
            raise FileNotFoundError("packaged adult ARFF missing")
        return parse_arff(text)
    if name == "children":
        text, _ = _resolve_children()
        return parse_arff(text)
    if name == "combined":
        return combine(load_dataset("children"), load_dataset("adult"))
    path = Path(name)
    if not path.is_file():
        raise FileNotFoundError(f"dataset {name!r} not found")
    text = path.read_text()
    if path.suffix.lower() == ".csv":
        raise ValueError("CSV ingestion needs a schema; use the library API")
    return parse_arff(text)
