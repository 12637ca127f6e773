"""Shared store for acceptance verdict lines (printed by conftest)."""
VERDICTS = {}


def verdict(number, name, ok, detail):
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {name}: {detail}"
    VERDICTS[number] = line
    print(line)
    assert ok, line
