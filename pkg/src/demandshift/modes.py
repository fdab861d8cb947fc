"""The closed set of transport modes, in canonical column order."""

MODES = ("bus", "tram", "metro", "bike", "car")
N_MODES = len(MODES)
MODE_INDEX = {m: i for i, m in enumerate(MODES)}

# public transport modes, used when describing holiday-like profiles
PUBLIC_TRANSPORT = ("bus", "tram", "metro")


def parse_mode(value):
    """Return the canonical mode name for ``value`` or raise ``ValueError``."""
    key = value.strip().lower()
    if key not in MODE_INDEX:
        raise ValueError(f"unknown mode {value!r}")
    return key
