"""
Shared utilities for the library modules and the CLI.

- setup_logging: stderr logging configured from LOG_LEVEL
- derive_seed: deterministic seed splitting for trials and sites
- CSV/JSON emission with round-trip exact floats
"""

import csv
import io
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

SEED_MASK = (1 << 64) - 1
FLOAT_FORMAT = ".17g"


def setup_logging() -> None:
    """Configure logging."""
    log_level = os.environ.get("LOG_LEVEL", "INFO")
    logging.basicConfig(
        level=getattr(logging, log_level.upper(), logging.INFO),
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
        stream=sys.stderr,
    )


# ---------------------------------------------------------------------------
# Seeding
# ---------------------------------------------------------------------------


def _key(value: int | str) -> int:
    """Map a signed integer or a label to a non-negative SeedSequence word."""
    if isinstance(value, str):
        return int.from_bytes(value.encode(), "little") & SEED_MASK
    value = int(value)
    # zigzag so that n and -n get distinct keys
    return 2 * value if value >= 0 else -2 * value - 1


def derive_seed(master_seed: int, *keys: int | str) -> int:
    """
    Split a 64-bit master seed into a child seed.

    The child depends only on (master_seed, keys), never on call order, so
    trial t or site n always sees the same stream whatever the scheduling.
    """
    seq = np.random.SeedSequence([int(master_seed) & SEED_MASK, *(_key(k) for k in keys)])
    lo, hi = seq.generate_state(2, dtype=np.uint32)
    return (int(hi) << 32) | int(lo)


def make_rng(master_seed: int, *keys: int | str) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master_seed, *keys))


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def format_value(value: Any) -> str:
    """17 significant digits for floats, '.' decimal; ints and strings as-is."""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), FLOAT_FORMAT)
    return str(value)


def render_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


def to_jsonable(obj: Any) -> Any:
    """Convert numpy arrays, complex numbers and tuples into JSON values."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def render_json(payload: Any) -> str:
    return json.dumps(to_jsonable(payload), indent=2, sort_keys=False) + "\n"


def emit(text: str, path: Optional[str | Path]) -> None:
    """Write output text to path, or to stdout when path is None."""
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="\n", encoding="utf-8") as fh:
        fh.write(text)
    logger.info("Wrote %s (%d bytes)", path, len(text))
