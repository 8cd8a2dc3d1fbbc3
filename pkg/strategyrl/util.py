import csv
import json
import logging
import zlib
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence, Union

import numpy as np
import torch

from .error import ConfigError

_LOGGER = logging.getLogger(__name__)

MANIFEST_PATH = Path(__file__).parent / "manifest.json"


def get_version() -> str:
    """Read the package version from the manifest."""
    with open(MANIFEST_PATH) as manifestfile:
        return json.load(manifestfile)["version"]


def substream_seed(root_seed: int, name: str) -> int:
    """
    Derive the seed of a named random substream.

    All randomness of a run flows from one root seed; env layouts, minibatch shuffling and action
    sampling each get their own stream so that changing one consumer never shifts another.
    """
    sequence = np.random.SeedSequence([int(root_seed) & 0xFFFFFFFF, zlib.crc32(name.encode("utf-8"))])
    return int(sequence.generate_state(1, dtype=np.uint32)[0])


def make_rng(root_seed: int, name: str) -> np.random.Generator:
    """Numpy generator for a named substream."""
    return np.random.default_rng(substream_seed(root_seed, name))


def make_torch_generator(root_seed: int, name: str) -> torch.Generator:
    """Torch generator for a named substream."""
    generator = torch.Generator()
    generator.manual_seed(substream_seed(root_seed, name))
    return generator


def validate_window(history: Optional[Union[int, str]]) -> int:
    """Validate the pseudo-state window length H."""
    if history is None:
        raise ConfigError("History window can't be None")
    value = int(history)
    if value < 0:
        raise ConfigError(f"{history} looks to be an invalid history window")
    return value


def write_csv(path: Union[str, Path], header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    """Write rows to a CSV file, floats rendered with repr for byte-stable output."""
    with open(path, "w", newline="") as csvfile:
        writer = csv.writer(csvfile, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(value) if isinstance(value, float) else value for value in row])
    _LOGGER.debug("Wrote %s", path)


def read_csv(path: Union[str, Path]) -> list[dict[str, str]]:
    """Read a CSV file written by write_csv."""
    with open(path, newline="") as csvfile:
        return list(csv.DictReader(csvfile))
