"""Host platform features used as model inputs.

Five numbers describe the machine: total memory (GB), compute-unit
count, core clock (MHz), memory bus width (bits) and L2 cache size
(KB). They are captured once at startup and stay fixed for a run.
Detection is best-effort: every field has a documented default, and a
warning is logged whenever a default (rather than a detected or
overridden value) is used.
"""

import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

log = logging.getLogger(__name__)

# Fallbacks when detection has nothing to offer. Memory bus width has
# no portable detection path at all, so it is always a default unless
# overridden.
DEFAULTS = {"gm": 8.0, "sm": 4.0, "cc": 2000.0, "mbw": 64.0, "l2c": 1024.0}

FEATURE_NAMES = ("gm", "sm", "cc", "mbw", "l2c")


@dataclass(frozen=True)
class PlatformFeatures:
    """The five platform features, all strictly positive."""

    gm: float
    sm: float
    cc: float
    mbw: float
    l2c: float

    def __post_init__(self):
        for name in FEATURE_NAMES:
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"platform feature {name} must be > 0, got {value}")

    def as_tuple(self) -> tuple:
        return (self.gm, self.sm, self.cc, self.mbw, self.l2c)


def _detect_gm():
    import psutil

    return psutil.virtual_memory().total / 2**30


def _detect_sm():
    import psutil

    count = psutil.cpu_count(logical=True)
    return float(count) if count else None


def _detect_cc():
    try:
        import psutil

        freq = psutil.cpu_freq()
        if freq and freq.max:
            return float(freq.max)
        if freq and freq.current:
            return float(freq.current)
    except Exception:  # cpu_freq is flaky inside containers
        pass
    try:
        text = Path("/proc/cpuinfo").read_text()
        match = re.search(r"cpu MHz\s*:\s*([0-9.]+)", text)
        if match:
            return float(match.group(1))
    except OSError:
        pass
    return None


def _detect_l2c():
    # sysfs first (exact L2), /proc/cpuinfo "cache size" as a proxy.
    for index in range(4):
        base = Path(f"/sys/devices/system/cpu/cpu0/cache/index{index}")
        try:
            if base.joinpath("level").read_text().strip() == "2":
                size = base.joinpath("size").read_text().strip()
                if size.endswith("K"):
                    return float(size[:-1])
                if size.endswith("M"):
                    return float(size[:-1]) * 1024
        except OSError:
            continue
    try:
        text = Path("/proc/cpuinfo").read_text()
        match = re.search(r"cache size\s*:\s*(\d+)\s*KB", text)
        if match:
            return float(match.group(1))
    except OSError:
        pass
    return None


_DETECTORS = {
    "gm": _detect_gm,
    "sm": _detect_sm,
    "cc": _detect_cc,
    "mbw": lambda: None,
    "l2c": _detect_l2c,
}


def probe_platform(overrides: Mapping[str, float] | None = None) -> PlatformFeatures:
    """Detect host features, applying ``overrides`` where given.

    Always returns a complete, positive feature set: an override wins,
    then detection, then the documented default (with a warning).
    """
    overrides = dict(overrides or {})
    unknown = set(overrides) - set(FEATURE_NAMES)
    if unknown:
        raise ValueError(f"unknown platform override(s): {sorted(unknown)}")
    values = {}
    for name in FEATURE_NAMES:
        if name in overrides:
            values[name] = float(overrides[name])
            continue
        detected = None
        try:
            detected = _DETECTORS[name]()
        except Exception as exc:
            log.warning("detection of %s failed (%s)", name, exc)
        if detected is None or not detected > 0:
            log.warning(
                "could not detect %s; using default %s", name, DEFAULTS[name]
            )
            detected = DEFAULTS[name]
        values[name] = float(detected)
    return PlatformFeatures(**values)
