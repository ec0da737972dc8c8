"""Application deadline from vehicle speed and sensing-range sharing."""

from __future__ import annotations


def derive_deadline(sensing_range, coverage_fraction, speed_kmh):
    """Time (ms) the vehicle takes to cover the unshared part of the range.

    Results must arrive while at least ``coverage_fraction`` of the node's
    ``sensing_range`` (m) is still ahead of a vehicle moving at ``speed_kmh``.
    """
    if speed_kmh <= 0:
        raise ValueError(f"speed must be positive, got {speed_kmh}")
    if not 0 < coverage_fraction <= 1:
        raise ValueError(f"coverage fraction must lie in (0, 1], got {coverage_fraction}")
    if sensing_range < 0:
        raise ValueError(f"sensing range must be non-negative, got {sensing_range}")
    return (1.0 - coverage_fraction) * sensing_range / (speed_kmh / 3.6) * 1000.0


def deadline_note(exact_ms, rounded_ms=None):
    note = f"derived deadline {exact_ms:.2f} ms (exact)"
    if rounded_ms is not None and abs(rounded_ms - exact_ms) > 1e-9:
        note += f"; the rounded figure {rounded_ms:g} ms is {exact_ms - rounded_ms:+.2f} ms off"
    return note
