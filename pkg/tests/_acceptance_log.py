"""Shared store for the one-line-per-criterion acceptance report."""
LINES: list[str] = []


def record(k: int, ok: bool, detail: str) -> str:
    line = f"CRITERION {k}: {'PASS' if ok else 'FAIL'} {detail}"
    LINES.append(line)
    print(line)
    return line
