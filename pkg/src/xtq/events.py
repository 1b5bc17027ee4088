"""Event ingestion: neutral JSONL schema, StatsBomb adapter, possession
chains, and the synthetic event generator.

The neutral JSONL layout is the canonical interchange format; every other
source is converted into it. One event per line with keys exactly::

    match_id, possession_id, team_id, player_id, minute_offset,
    action_kind, x0, y0, x1, y1, success, is_goal

Lines starting with ``#`` are treated as comments (the writer emits a
single schema-version comment line at the top of each file).
"""

from __future__ import annotations

import io
import json
import logging
from dataclasses import dataclass, field
from typing import IO, Iterable

from xtq.errors import ParseError
from xtq.grid import PitchGrid, PitchPoint, cell_center, clamp_unit

log = logging.getLogger(__name__)

ACTION_KINDS = ("pass", "dribble", "error", "clearance", "shot")
MOVE_KINDS = ("pass", "dribble", "error", "clearance")
TERMINALS = ("goal", "shot_missed", "turnover", "truncated")

EVENT_KEYS = (
    "match_id",
    "possession_id",
    "team_id",
    "player_id",
    "minute_offset",
    "action_kind",
    "x0",
    "y0",
    "x1",
    "y1",
    "success",
    "is_goal",
)

EVENTS_SCHEMA = "xtq.events/1"

# StatsBomb open-data event type -> neutral action kind.
_STATSBOMB_KINDS = {
    "Pass": "pass",
    "Carry": "dribble",
    "Shot": "shot",
    "Clearance": "clearance",
    "Error": "error",
}
_STATSBOMB_FRAME = (120.0, 80.0)


@dataclass(frozen=True)
class EventRecord:
    match_id: str
    possession_id: str
    team_id: str
    player_id: str
    minute_offset: float
    action_kind: str
    start: PitchPoint
    end: PitchPoint
    success: bool
    is_goal: bool

    def __post_init__(self) -> None:
        if self.action_kind not in ACTION_KINDS:
            raise ValueError(f"unknown action kind {self.action_kind!r}")
        if self.is_goal and self.action_kind != "shot":
            raise ValueError("is_goal requires action_kind == 'shot'")
        if self.action_kind == "shot" and self.success != self.is_goal:
            raise ValueError("for shots, success must equal is_goal")
        if self.minute_offset < 0:
            raise ValueError("minute_offset must be >= 0")

    @property
    def chain_key(self) -> tuple[str, str, str]:
        return (self.match_id, self.possession_id, self.team_id)


@dataclass(frozen=True)
class PossessionChain:
    """A maximal run of one team's events ending in a shot or a turnover."""

    events: tuple[EventRecord, ...]
    terminal: str

    def __post_init__(self) -> None:
        if not self.events:
            raise ValueError("a possession chain holds at least one event")
        if self.terminal not in TERMINALS:
            raise ValueError(f"unknown terminal {self.terminal!r}")

    def __len__(self) -> int:
        return len(self.events)


@dataclass
class MinutesLedger:
    """Per-player minutes played and primary position label."""

    minutes: dict[str, float] = field(default_factory=dict)
    position: dict[str, str] = field(default_factory=dict)

    def add(self, player_id: str, position: str, minutes: float) -> None:
        if minutes < 0:
            raise ValueError(f"minutes must be >= 0 for {player_id}")
        self.minutes[player_id] = self.minutes.get(player_id, 0.0) + minutes
        self.position.setdefault(player_id, position)

    @classmethod
    def from_csv(cls, fp: IO[str]) -> "MinutesLedger":
        ledger = cls()
        for lineno, line in enumerate(fp, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if parts[0] == "player_id":
                continue
            if len(parts) != 3:
                raise ParseError(f"minutes CSV line {lineno}: expected 3 columns")
            try:
                ledger.add(parts[0], parts[1], float(parts[2]))
            except ValueError as exc:
                raise ParseError(f"minutes CSV line {lineno}: {exc}") from exc
        return ledger

    def to_csv(self, fp: IO[str]) -> None:
        fp.write("# schema: xtq.minutes/1\n")
        fp.write("player_id,position,minutes\n")
        for pid in sorted(self.minutes):
            fp.write(f"{pid},{self.position.get(pid, '')},{self.minutes[pid]!r}\n")


@dataclass
class ParseStats:
    parsed: int = 0
    skipped_unknown_kind: int = 0
    split_after_shot: int = 0


def _as_text(stream: IO) -> IO[str]:
    if isinstance(stream, (bytes, bytearray)):
        return io.StringIO(stream.decode("utf-8"))
    if isinstance(stream, str):
        return io.StringIO(stream)
    if isinstance(stream, io.TextIOBase):
        return stream
    return io.TextIOWrapper(stream, encoding="utf-8")


def parse_events(
    stream: IO,
    format: str = "neutral_jsonl",
    *,
    match_id: str | None = None,
    stats: ParseStats | None = None,
) -> list[EventRecord]:
    """Parse a byte/text stream of events in the declared format.

    Only the five supported action kinds are retained; coordinates are
    clamped into the unit square; the result is ordered by
    ``(match_id, minute_offset)``. Unknown action kinds are skipped and
    counted on ``stats``; structurally broken records raise ParseError
    with the offending line number.
    """
    stats = stats if stats is not None else ParseStats()
    text = _as_text(stream)
    if format == "neutral_jsonl":
        records = _parse_neutral(text, stats)
    elif format == "statsbomb_json":
        records = _parse_statsbomb(text, match_id or "statsbomb", stats)
    else:
        raise ValueError(f"unknown event format {format!r}")
    records.sort(key=lambda e: (e.match_id, e.minute_offset))
    stats.parsed = len(records)
    return records


def _parse_neutral(text: IO[str], stats: ParseStats) -> list[EventRecord]:
    records = []
    for lineno, line in enumerate(text, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"events line {lineno}: invalid JSON ({exc.msg})") from exc
        if not isinstance(raw, dict):
            raise ParseError(f"events line {lineno}: expected an object")
        missing = [k for k in EVENT_KEYS if k not in raw]
        if missing:
            raise ParseError(f"events line {lineno}: missing keys {missing}")
        kind = raw["action_kind"]
        if kind not in ACTION_KINDS:
            stats.skipped_unknown_kind += 1
            log.warning("events line %d: skipping unknown action kind %r", lineno, kind)
            continue
        try:
            start = PitchPoint(clamp_unit(float(raw["x0"])), clamp_unit(float(raw["y0"])))
            end = PitchPoint(clamp_unit(float(raw["x1"])), clamp_unit(float(raw["y1"])))
            rec = EventRecord(
                match_id=str(raw["match_id"]),
                possession_id=str(raw["possession_id"]),
                team_id=str(raw["team_id"]),
                player_id=str(raw["player_id"]),
                minute_offset=float(raw["minute_offset"]),
                action_kind=kind,
                start=start,
                end=start if kind == "shot" else end,
                success=bool(raw["success"]),
                is_goal=bool(raw["is_goal"]),
            )
        except (TypeError, ValueError) as exc:
            raise ParseError(f"events line {lineno}: {exc}") from exc
        records.append(rec)
    return records


def _sb_point(loc, default: PitchPoint | None = None) -> PitchPoint | None:
    if not isinstance(loc, (list, tuple)) or len(loc) < 2:
        return default
    fx, fy = _STATSBOMB_FRAME
    return PitchPoint(clamp_unit(float(loc[0]) / fx), clamp_unit(float(loc[1]) / fy))


def _parse_statsbomb(text: IO[str], match_id: str, stats: ParseStats) -> list[EventRecord]:
    try:
        data = json.load(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"statsbomb events: invalid JSON at line {exc.lineno}") from exc
    if not isinstance(data, list):
        raise ParseError("statsbomb events: expected a top-level array")
    records = []
    for i, ev in enumerate(data):
        type_name = (ev.get("type") or {}).get("name")
        kind = _STATSBOMB_KINDS.get(type_name)
        if kind is None:
            stats.skipped_unknown_kind += 1
            continue
        start = _sb_point(ev.get("location"))
        if start is None:
            stats.skipped_unknown_kind += 1
            log.warning("statsbomb event %d: %s without location, skipped", i, type_name)
            continue
        end = start
        success = True
        is_goal = False
        if kind == "pass":
            detail = ev.get("pass") or {}
            end = _sb_point(detail.get("end_location"), start)
            success = "outcome" not in detail
        elif kind == "dribble":
            detail = ev.get("carry") or {}
            end = _sb_point(detail.get("end_location"), start)
        elif kind == "shot":
            detail = ev.get("shot") or {}
            is_goal = (detail.get("outcome") or {}).get("name") == "Goal"
            success = is_goal
        else:
            # Clearances and errors rarely retain possession; both are
            # modeled as failed moves ending where they started.
            success = False
        possession = ev.get("possession")
        team = (ev.get("possession_team") or ev.get("team") or {}).get("id")
        player = (ev.get("player") or {}).get("id")
        minute = float(ev.get("minute", 0)) + float(ev.get("second", 0)) / 60.0
        records.append(
            EventRecord(
                match_id=match_id,
                possession_id=str(possession),
                team_id=str(team),
                player_id=str(player),
                minute_offset=minute,
                action_kind=kind,
                start=start,
                end=start if kind == "shot" else end,
                success=success,
                is_goal=is_goal,
            )
        )
    return records


def write_events_jsonl(events: Iterable[EventRecord], fp: IO[str]) -> None:
    """Serialize events to neutral JSONL (inverse of parse_events)."""
    fp.write(f"# {EVENTS_SCHEMA}\n")
    for e in events:
        row = {
            "match_id": e.match_id,
            "possession_id": e.possession_id,
            "team_id": e.team_id,
            "player_id": e.player_id,
            "minute_offset": e.minute_offset,
            "action_kind": e.action_kind,
            "x0": e.start.x,
            "y0": e.start.y,
            "x1": e.end.x,
            "y1": e.end.y,
            "success": e.success,
            "is_goal": e.is_goal,
        }
        fp.write(json.dumps(row) + "\n")


def assemble_chains(
    events: list[EventRecord], *, stats: ParseStats | None = None
) -> list[PossessionChain]:
    """Group sorted events into possession chains.

    Consecutive events sharing (match_id, possession_id, team_id) form one
    chain. A shot always terminates its chain; events recorded after a
    shot in the same possession start a fresh chain (counted on stats).
    """
    stats = stats if stats is not None else ParseStats()
    chains: list[PossessionChain] = []
    current: list[EventRecord] = []

    def flush() -> None:
        if not current:
            return
        last = current[-1]
        if last.action_kind == "shot":
            terminal = "goal" if last.is_goal else "shot_missed"
        elif not last.success:
            terminal = "turnover"
        else:
            terminal = "truncated"
        chains.append(PossessionChain(events=tuple(current), terminal=terminal))
        current.clear()

    prev_key = None
    for e in events:
        if prev_key is not None and e.chain_key != prev_key:
            flush()
        elif current and current[-1].action_kind == "shot":
            stats.split_after_shot += 1
            log.warning(
                "possession %s continues after a shot; starting a new chain", e.chain_key
            )
            flush()
        current.append(e)
        prev_key = e.chain_key
    flush()
    return chains


# ---------------------------------------------------------------------------
# Synthetic data

# Bookkeeping constants for synthetic fixtures (not part of any contract).
_TEAMS = 20
_ROSTER = 15
_EVENTS_PER_MATCH = 1200
_MATCH_MINUTES = 95.0
_POSITIONS = ("GK",) + ("DF",) * 5 + ("MF",) * 5 + ("FW",) * 4


def synth_events(grid: PitchGrid, n_events: int, seed: int) -> list[EventRecord]:
    """Generate a deterministic synthetic event set.

    Chains are sampled from the built-in smooth ground-truth model for the
    grid (overall shot share calibrated near 0.02) and dressed with match,
    possession, and player bookkeeping.
    """
    return synth_dataset(grid, n_events, seed)[0]


def synth_dataset(
    grid: PitchGrid, n_events: int, seed: int
) -> tuple[list[EventRecord], MinutesLedger]:
    """Synthetic events plus the matching minutes ledger."""
    # Local imports: the generator rides on the estimator's built-in truth
    # model and the simulator's chain sampler.
    from xtq.estimator import synthetic_truth
    from xtq.simulate import UniformStream, sample_states, sample_tables

    if n_events < 0:
        raise ValueError("n_events must be >= 0")
    truth = synthetic_truth(grid)
    tables = sample_tables(truth)
    stream = UniformStream.from_seed(seed)
    centers = [cell_center(grid, s) for s in range(grid.m)]

    events: list[EventRecord] = []
    ledger = MinutesLedger()
    match_idx = 0
    match_events = 0
    chain_in_match = 0
    total = 0

    def roster(team: str) -> list[str]:
        return [f"{team}-P{i:02d}" for i in range(_ROSTER)]

    def open_match(idx: int) -> tuple[str, str, str]:
        home = f"T{(2 * idx) % _TEAMS:02d}"
        away = f"T{(2 * idx + 1) % _TEAMS:02d}"
        mid = f"M{idx:04d}"
        for team in (home, away):
            for k, pid in enumerate(roster(team)):
                ledger.add(pid, _POSITIONS[k], _MATCH_MINUTES)
        return mid, home, away

    def emit(mid, possession, team, players, kind, s_from, p_end, success, is_goal):
        nonlocal match_events, total
        # Outfield players only; the pick rides on the same uniform stream.
        pid = players[1 + min(_ROSTER - 2, int(stream.next() * (_ROSTER - 1)))]
        minute = _MATCH_MINUTES * min(1.0, match_events / (_EVENTS_PER_MATCH + 50))
        events.append(
            EventRecord(
                match_id=mid,
                possession_id=possession,
                team_id=team,
                player_id=pid,
                minute_offset=minute,
                action_kind=kind,
                start=centers[s_from],
                end=p_end,
                success=success,
                is_goal=is_goal,
            )
        )
        match_events += 1
        total += 1

    mid, home, away = open_match(match_idx)
    while total < n_events:
        if match_events >= _EVENTS_PER_MATCH:
            match_idx += 1
            match_events = 0
            chain_in_match = 0
            mid, home, away = open_match(match_idx)
        team = home if chain_in_match % 2 == 0 else away
        players = roster(team)
        path, end_kind = sample_states(tables, stream)
        possession = str(chain_in_match)
        for j in range(len(path) - 1):
            emit(mid, possession, team, players, "pass", path[j], centers[path[j + 1]], True, False)
        if end_kind in ("goal", "shot_missed"):
            goal = end_kind == "goal"
            emit(mid, possession, team, players, "shot", path[-1], centers[path[-1]], goal, goal)
        elif end_kind == "turnover":
            emit(mid, possession, team, players, "pass", path[-1], centers[path[-1]], False, False)
        chain_in_match += 1
    return events, ledger
