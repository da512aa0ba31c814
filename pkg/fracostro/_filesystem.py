import csv
import json
import os
from collections.abc import Iterable, Sequence
from functools import lru_cache


@lru_cache(maxsize=1024)
def cached_file_read(path: str) -> str:
    with open(path) as f:
        return f.read()


@lru_cache(maxsize=1024)
def get_config_path(config_name: str) -> str:
    """Get the path to a packaged configuration file.

    Args:
        config_name: The name of the configuration file (e.g., 'defaults.yml')

    Returns:
        The absolute path to the configuration file

    """
    return os.path.abspath(os.path.join(os.path.dirname(__file__), "configuration", config_name))


def get_output_path(out_dir: str, name: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    return os.path.join(out_dir, name)


def write_json(path: str, data: dict) -> None:
    """Write JSON with sorted keys so identical inputs give byte-identical files."""
    with open(path, "w") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[float]], digits: int = 17) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([f"{float(v):.{digits}g}" for v in row])
