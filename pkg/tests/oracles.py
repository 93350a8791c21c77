"""Naive reference implementations used as independent oracles.

These deliberately avoid the package's data structures and evaluation paths:
plain lists, linear scans, and graph search only.
"""

from __future__ import annotations

from datetime import datetime, timedelta


def access_count_decisions(
    bound: int, requests: list[tuple[datetime, int]]
) -> list[bool]:
    """Replay with a bare counter: allow while committed + units <= bound."""
    committed = 0
    out = []
    for _, units in requests:
        allowed = committed + units <= bound
        out.append(allowed)
        if allowed:
            committed += units
    return out


def rate_limit_decisions(
    bound: int, window: timedelta, requests: list[tuple[datetime, int]]
) -> list[bool]:
    """Replay keeping the full exercise history and filtering per request."""
    history: list[datetime] = []
    out = []
    for at, units in requests:
        in_window = [t for t in history if t > at - window]
        allowed = len(in_window) + units <= bound
        out.append(allowed)
        if allowed:
            history.extend([at] * units)
    return out


def duty_status(
    evidence: list[tuple[datetime, str, str, str]],
    actor: str,
    action: str,
    target: str,
    deadline: datetime | None,
    now: datetime,
) -> str:
    """Per-duty scan over (at, actor, action, target) evidence tuples."""
    for at, ev_actor, ev_action, ev_target in evidence:
        if ev_actor != actor or ev_action != action or ev_target != target:
            continue
        if deadline is not None and not at < deadline:
            continue
        return "Fulfilled"
    if deadline is not None and now >= deadline:
        return "Violated"
    return "Pending"


def region_reachable(children: dict[str, list[str]], outer: str, inner: str) -> bool:
    """Breadth-first search from outer down the child edges."""
    known = set(children)
    for kids in children.values():
        known.update(kids)
    if outer not in known or inner not in known:
        return False
    frontier = [outer]
    seen = set()
    while frontier:
        node = frontier.pop()
        if node == inner:
            return True
        if node in seen:
            continue
        seen.add(node)
        frontier.extend(children.get(node, []))
    return False


def conforms(record: object, properties: list[tuple[str, int, str | None]]) -> bool:
    """Property-by-property check of a decoded JSON record."""
    if not isinstance(record, dict):
        return False
    for path, min_count, datatype in properties:
        raw = record.get(path)
        if isinstance(raw, list):
            values = raw
        elif raw is None:
            values = []
        else:
            values = [raw]
        if len(values) < min_count:
            return False
        for value in values:
            if datatype == "string" and not isinstance(value, str):
                return False
            if datatype == "integer" and (isinstance(value, bool) or not isinstance(value, int)):
                return False
            if datatype == "boolean" and not isinstance(value, bool):
                return False
    return True


def window_is_fresh(
    events: list[datetime], interval: timedelta, start: datetime, end: datetime
) -> bool:
    inside = sorted(t for t in events if start <= t <= end)
    points = [start, *inside, end]
    return all(b - a <= interval for a, b in zip(points, points[1:]))
