"""Collects one pass/fail line per acceptance criterion for the terminal summary."""

LINES = {}


def report(number, ok, detail):
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'} - {detail}"
    LINES[number] = line
    print(line)
    return ok
