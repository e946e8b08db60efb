"""Plain-text persistence of noise realizations.

Layout::

    alpha=1.5
    seed=7
    K=3
    density=cauchy
    normalization=unit
    k,gamma,xi1,xi2,g
    1,0.53...,...

Floats are written with 17 significant digits, which round-trips every
IEEE double exactly.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .stable_measure import StableParams, TruncatedLePage

__all__ = ["NoiseFileError", "NoiseIntegrityError", "save_noise", "load_noise", "noise_to_text"]

COLUMNS = "k,gamma,xi1,xi2,g"
_REQUIRED = ("alpha", "seed", "K", "density")


class NoiseFileError(ValueError):
    """Malformed noise file; the message names the offending line."""


class NoiseIntegrityError(ValueError):
    """Header and body of a noise file disagree."""


def noise_to_text(series: TruncatedLePage) -> str:
    lines = [
        f"alpha={series.alpha!r}",
        f"seed={series.seed}",
        f"K={series.K}",
        f"density={series.params.density_id}",
        f"normalization={series.params.normalization}",
        COLUMNS,
    ]
    for k in range(series.K):
        x1, x2 = series.atoms[k]
        lines.append(f"{k + 1},{series.gammas[k]:.17g},{x1:.17g},{x2:.17g},{series.gaussians[k]:.17g}")
    return "\n".join(lines) + "\n"


def save_noise(series: TruncatedLePage, path) -> Path:
    path = Path(path)
    path.write_text(noise_to_text(series))
    return path


def load_noise(path) -> TruncatedLePage:
    path = Path(path)
    header: dict[str, str] = {}
    rows: list[list[float]] = []
    in_body = False
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if not in_body:
                if line == COLUMNS:
                    in_body = True
                    continue
                key, sep, val = line.partition("=")
                if not sep:
                    raise NoiseFileError(f"{path}:{lineno}: expected key=value header or column line, got {line!r}")
                header[key.strip()] = val.strip()
                continue
            parts = line.split(",")
            if len(parts) != 5:
                raise NoiseFileError(f"{path}:{lineno}: expected 5 fields, got {len(parts)}")
            try:
                k = int(parts[0])
                vals = [float(p) for p in parts[1:]]
            except ValueError:
                raise NoiseFileError(f"{path}:{lineno}: non-numeric field in {line!r}") from None
            if k != len(rows) + 1:
                raise NoiseIntegrityError(f"{path}:{lineno}: row index {k}, expected {len(rows) + 1}")
            rows.append(vals)
    if not in_body:
        raise NoiseFileError(f"{path}: missing column line {COLUMNS!r}")
    missing = [key for key in _REQUIRED if key not in header]
    if missing:
        raise NoiseFileError(f"{path}: missing header field(s) {', '.join(missing)}")
    try:
        alpha = float(header["alpha"])
        seed = int(header["seed"])
        K = int(header["K"])
    except ValueError as exc:
        raise NoiseFileError(f"{path}: bad header value ({exc})") from None
    if K != len(rows):
        raise NoiseIntegrityError(f"{path}: header declares K={K} but the body holds {len(rows)} rows")
    try:
        params = StableParams(alpha, header["density"], header.get("normalization", "unit"))
    except ValueError as exc:
        raise NoiseIntegrityError(f"{path}: {exc}") from None
    body = np.array(rows, dtype=float).reshape(-1, 4)
    try:
        return TruncatedLePage(params, seed, body[:, 0], body[:, 1:3], body[:, 3])
    except ValueError as exc:
        raise NoiseIntegrityError(f"{path}: {exc}") from None
