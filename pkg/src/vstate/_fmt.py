"""Fixed text format for numbers in data files."""


def g17(value) -> str:
    """17 significant digits: enough to round-trip any double."""
    return format(float(value), ".17g")
