"""Collects one result per acceptance check; conftest prints the per-criterion lines."""

RESULTS: dict[int, list[tuple[str, bool, str]]] = {}


def record(criterion: int, part: str, passed: bool, detail: str) -> bool:
    RESULTS.setdefault(criterion, []).append((part, bool(passed), detail))
    print(f"criterion {criterion} [{part}]: {'PASS' if passed else 'FAIL'} - {detail}")
    return bool(passed)


def lines() -> list[str]:
    out = []
    for crit in sorted(RESULTS):
        parts = RESULTS[crit]
        ok = all(p for _, p, _ in parts)
        detail = "; ".join(f"{name}: {'ok' if p else 'FAILED'} ({d})" for name, p, d in parts)
        out.append(f"criterion {crit}: {'PASS' if ok else 'FAIL'} - {detail}")
    return out
