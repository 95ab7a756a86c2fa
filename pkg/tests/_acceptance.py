"""Shared record of acceptance outcomes, printed by the terminal-summary
hook in ``conftest.py``."""

RESULTS = []


def record(number, title, passed, detail=""):
    RESULTS.append((number, title, bool(passed), detail))
    return passed
