import sys
from pathlib import Path

# make tests/oracles.py importable without turning tests/ into a package
sys.path.insert(0, str(Path(__file__).parent))


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if getattr(rep, "when", None) != "call":
                continue
            for key, text in rep.user_properties:
                if key == "criterion":
                    lines.append((text, "PASS" if outcome == "passed" else "FAIL"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for text, status in sorted(lines, key=lambda item: int(item[0].split(".")[0])):
            terminalreporter.write_line(f"[{status}] {text}")
