"""Empirical-mean estimation of the possession Markov chain.

Possession chains are reduced to per-state counts; the counts become a
GenerativeModel (shot / goal-given-shot / transition / turnover
probabilities plus an initial-state distribution), which condenses into
the goal vector g and transition matrix T that the xT solver consumes.
"""

from __future__ import annotations

import functools
import logging
from dataclasses import dataclass, field, replace
from typing import IO, Iterable

import numpy as np

from xtq import jsonio
from xtq.errors import ParseError
from xtq.events import MOVE_KINDS, PossessionChain
from xtq.grid import PitchGrid, cell_center, state_of

log = logging.getLogger(__name__)

MODEL_SCHEMA = "xtq.model/1"

#: Closure tolerance for p_shot + row(T) + p_turn = 1.
CLOSURE_ATOL = 1e-12


@dataclass(frozen=True)
class SparseRows:
    """Row-major sparse matrix (CSR triple) over M states."""

    m: int
    indptr: np.ndarray  # int64, len M+1
    cols: np.ndarray  # int64, len nnz
    vals: np.ndarray  # float64, len nnz

    @classmethod
    def empty(cls, m: int) -> "SparseRows":
        return cls(
            m=m,
            indptr=np.zeros(m + 1, dtype=np.int64),
            cols=np.zeros(0, dtype=np.int64),
            vals=np.zeros(0, dtype=np.float64),
        )

    @classmethod
    def from_dict(cls, m: int, rows: dict[int, dict[int, float]]) -> "SparseRows":
        indptr = np.zeros(m + 1, dtype=np.int64)
        cols: list[int] = []
        vals: list[float] = []
        for s in range(m):
            row = rows.get(s)
            if row:
                for c in sorted(row):
                    cols.append(c)
                    vals.append(row[c])
            indptr[s + 1] = len(cols)
        return cls(
            m=m,
            indptr=indptr,
            cols=np.asarray(cols, dtype=np.int64),
            vals=np.asarray(vals, dtype=np.float64),
        )

    @property
    def nnz(self) -> int:
        return int(self.indptr[-1])

    def row_sums(self) -> np.ndarray:
        cs = np.concatenate(([0.0], np.cumsum(self.vals)))
        return cs[self.indptr[1:]] - cs[self.indptr[:-1]]

    def inf_norm(self) -> float:
        if self.nnz == 0:
            return 0.0
        cs = np.concatenate(([0.0], np.cumsum(np.abs(self.vals))))
        return float((cs[self.indptr[1:]] - cs[self.indptr[:-1]]).max())

    def to_scipy(self):
        from scipy.sparse import csr_matrix

        return csr_matrix((self.vals, self.cols, self.indptr), shape=(self.m, self.m))

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.m, self.m))
        for s in range(self.m):
            out[s, self.cols[self.indptr[s] : self.indptr[s + 1]]] = self.vals[
                self.indptr[s] : self.indptr[s + 1]
            ]
        return out

    def rows_dict(self) -> dict[int, dict[int, float]]:
        out: dict[int, dict[int, float]] = {}
        for s in range(self.m):
            lo, hi = self.indptr[s], self.indptr[s + 1]
            if hi > lo:
                out[s] = dict(zip(self.cols[lo:hi].tolist(), self.vals[lo:hi].tolist()))
        return out


@dataclass(frozen=True)
class StateCounts:
    """Action counts per start state; the raw material for estimation."""

    grid: PitchGrid
    shots: np.ndarray
    goals: np.ndarray
    turnovers: np.ndarray
    chain_starts: np.ndarray
    moves: SparseRows  # integer-valued counts stored as float64

    @property
    def visits(self) -> np.ndarray:
        return self.shots + self.turnovers + self.moves.row_sums().astype(np.int64)

    @property
    def n_events(self) -> int:
        return int(self.visits.sum())

    def __add__(self, other: "StateCounts") -> "StateCounts":
        if self.grid != other.grid:
            raise ValueError("cannot merge counts from different grids")
        merged: dict[int, dict[int, float]] = {}
        for src in (self.moves, other.moves):
            for s, row in src.rows_dict().items():
                acc = merged.setdefault(s, {})
                for c, v in row.items():
                    acc[c] = acc.get(c, 0.0) + v
        return StateCounts(
            grid=self.grid,
            shots=self.shots + other.shots,
            goals=self.goals + other.goals,
            turnovers=self.turnovers + other.turnovers,
            chain_starts=self.chain_starts + other.chain_starts,
            moves=SparseRows.from_dict(self.grid.m, merged),
        )


@dataclass(frozen=True)
class GenerativeModel:
    """The full simulatable chain: per-state action law plus start law."""

    grid: PitchGrid
    p_shot: np.ndarray
    xg: np.ndarray
    t: SparseRows
    p_turn: np.ndarray
    pi0: np.ndarray
    dropped: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        m = self.grid.m
        for name in ("p_shot", "xg", "p_turn", "pi0"):
            v = getattr(self, name)
            if v.shape != (m,):
                raise ValueError(f"{name} must have shape ({m},)")
            if (v < -1e-15).any() or (v > 1 + 1e-15).any():
                raise ValueError(f"{name} entries must lie in [0, 1]")
        closure = self.p_shot + self.t.row_sums() + self.p_turn
        if not np.allclose(closure, 1.0, rtol=0.0, atol=CLOSURE_ATOL):
            worst = int(np.argmax(np.abs(closure - 1.0)))
            raise ValueError(
                f"state {worst}: p_shot + transitions + p_turn = {closure[worst]!r} != 1"
            )
        if abs(float(self.pi0.sum()) - 1.0) > 1e-9:
            raise ValueError("pi0 must sum to 1")


@dataclass(frozen=True)
class CondensedModel:
    """Goal vector g = p_shot * xg and the shared transition matrix."""

    grid: PitchGrid
    g: np.ndarray
    t: SparseRows
    t_inf: float


def count(chains: Iterable[PossessionChain], grid: PitchGrid) -> StateCounts:
    """Tally shots, goals, moves, and turnovers per start state."""
    m = grid.m
    shots = np.zeros(m, dtype=np.int64)
    goals = np.zeros(m, dtype=np.int64)
    turnovers = np.zeros(m, dtype=np.int64)
    chain_starts = np.zeros(m, dtype=np.int64)
    moves: dict[int, dict[int, float]] = {}
    for chain in chains:
        chain_starts[state_of(grid, chain.events[0].start)] += 1
        for e in chain.events:
            s = state_of(grid, e.start)
            if e.action_kind == "shot":
                shots[s] += 1
                if e.is_goal:
                    goals[s] += 1
            elif e.action_kind in MOVE_KINDS and e.success:
                row = moves.setdefault(s, {})
                s2 = state_of(grid, e.end)
                row[s2] = row.get(s2, 0.0) + 1.0
            else:
                turnovers[s] += 1
    return StateCounts(
        grid=grid,
        shots=shots,
        goals=goals,
        turnovers=turnovers,
        chain_starts=chain_starts,
        moves=SparseRows.from_dict(m, moves),
    )


def counts_from_arrays(
    grid: PitchGrid,
    shots: np.ndarray,
    goals: np.ndarray,
    turnovers: np.ndarray,
    chain_starts: np.ndarray,
    move_indptr: np.ndarray,
    move_cols: np.ndarray,
    move_vals: np.ndarray,
) -> StateCounts:
    """Assemble counts from kernel output arrays, pruning zero entries."""
    keep = move_vals > 0
    m = grid.m
    row_ids = np.repeat(np.arange(m, dtype=np.int64), np.diff(move_indptr))
    indptr = np.zeros(m + 1, dtype=np.int64)
    indptr[1:] = np.cumsum(np.bincount(row_ids[keep], minlength=m))
    moves = SparseRows(
        m=m,
        indptr=indptr,
        cols=move_cols[keep].astype(np.int64),
        vals=move_vals[keep].astype(np.float64),
    )
    return StateCounts(
        grid=grid,
        shots=shots.astype(np.int64),
        goals=goals.astype(np.int64),
        turnovers=turnovers.astype(np.int64),
        chain_starts=chain_starts.astype(np.int64),
        moves=moves,
    )


def estimate(counts: StateCounts, *, direct_g: bool = False) -> GenerativeModel:
    """Empirical-mean model from counts.

    Unvisited states become pure turnovers (p_turn = 1); states with
    visits but neither shots nor turnovers would make the chain
    infeasible (row mass 1) and are dropped, their incoming transition
    mass redistributed proportionally over each source row's surviving
    destinations.

    direct_g estimates the scoring probability as goals/visits instead of
    (shots/visits) * (goals/shots); the two coincide algebraically and
    the flag exists for experimentation.
    """
    grid = counts.grid
    m = grid.m
    visits = counts.visits.astype(np.float64)
    visited = visits > 0
    p_shot = np.zeros(m)
    xg = np.zeros(m)
    p_turn = np.ones(m)  # unvisited default
    np.divide(counts.shots, visits, out=p_shot, where=visited)
    np.divide(counts.turnovers, visits, out=p_turn, where=visited)
    has_shots = counts.shots > 0
    np.divide(counts.goals, counts.shots, out=xg, where=has_shots)
    if direct_g:
        g_direct = np.zeros(m)
        np.divide(counts.goals, visits, out=g_direct, where=visited)
        with np.errstate(invalid="ignore", divide="ignore"):
            xg = np.where(p_shot > 0, g_direct / p_shot, 0.0)

    rows = counts.moves.rows_dict()
    t_rows = {
        s: {c: v / visits[s] for c, v in row.items()} for s, row in rows.items()
    }

    infeasible = sorted(
        s
        for s in range(m)
        if visited[s] and counts.shots[s] == 0 and counts.turnovers[s] == 0
    )
    if infeasible:
        log.warning("dropping %d state(s) with full transition mass", len(infeasible))
        t_rows, p_turn = _drop_states(t_rows, p_turn, infeasible)
        for s in infeasible:
            p_shot[s] = 0.0
            xg[s] = 0.0
            p_turn[s] = 1.0

    total_starts = counts.chain_starts.sum()
    if total_starts > 0:
        pi0 = counts.chain_starts / float(total_starts)
    else:
        pi0 = np.full(m, 1.0 / m)

    return GenerativeModel(
        grid=grid,
        p_shot=p_shot,
        xg=xg,
        t=SparseRows.from_dict(m, t_rows),
        p_turn=p_turn,
        pi0=pi0,
        dropped=tuple(infeasible),
    )


def _drop_states(
    t_rows: dict[int, dict[int, float]], p_turn: np.ndarray, dropped: list[int]
) -> tuple[dict[int, dict[int, float]], np.ndarray]:
    """Remove states, pushing their incoming mass onto surviving targets."""
    gone = set(dropped)
    p_turn = p_turn.copy()
    out: dict[int, dict[int, float]] = {}
    for s, row in t_rows.items():
        if s in gone:
            continue
        removed = sum(v for c, v in row.items() if c in gone)
        kept = {c: v for c, v in row.items() if c not in gone}
        if removed > 0.0:
            kept_sum = sum(kept.values())
            if kept_sum > 0.0:
                scale = (kept_sum + removed) / kept_sum
                kept = {c: v * scale for c, v in kept.items()}
            else:
                p_turn[s] += removed
        if kept:
            out[s] = kept
    return out, p_turn


def condense(gen: GenerativeModel) -> CondensedModel:
    """Collapse the generative model to Eq. g + T*xT form."""
    g = gen.p_shot * gen.xg
    return CondensedModel(grid=gen.grid, g=g, t=gen.t, t_inf=gen.t.inf_norm())


# ---------------------------------------------------------------------------
# Built-in synthetic ground truth

#: Tunables for the synthetic chain; configuration, not a contract.
SYNTH_PROFILE = {
    "g_scale": 0.25,  # scoring probability at the attacking goal line
    "g_power": 6.0,
    "xg_base": 0.02,
    "xg_slope": 0.33,
    "p_shot_cap": 0.85,
    "turn_base": 0.10,
    "turn_slope": 0.18,
    "fwd_bias": 2.2,
    "side_damp": 0.85,
    "start_x": 0.35,
    "start_y": 0.5,
    "start_width": 0.25,
    "shot_share": 0.02,
}


def _neumann_visits(t: SparseRows, pi0: np.ndarray) -> np.ndarray:
    """Expected visit counts per chain: pi0^T (I - T)^{-1} via iteration."""
    tt = t.to_scipy().T.tocsr()
    nu = pi0.copy()
    term = pi0.copy()
    for _ in range(100000):
        term = tt @ term
        nu += term
        if term.max() < 1e-14:
            break
    return nu


@functools.lru_cache(maxsize=32)
def synthetic_truth(grid: PitchGrid, hotspot: tuple[float, float] | None = None) -> GenerativeModel:
    """Smooth built-in ground-truth chain for a grid.

    The scoring probability rises toward the attacking goal line, moves
    follow the 8-neighborhood with forward bias, and the turnover level is
    calibrated so the stationary shot share lands on the profile's target
    (0.02). With ``hotspot=(g_value, visit_scale)`` one late-pitch corner
    state is turned into a rare, high-value state: its direct-scoring
    probability is raised to ``g_value`` while its incoming transition and
    start mass are scaled down by ``visit_scale``.
    """
    p = SYNTH_PROFILE
    m = grid.m
    cx = np.empty(m)
    cy = np.empty(m)
    for s in range(m):
        c = cell_center(grid, s)
        cx[s], cy[s] = c.x, c.y

    g_target = p["g_scale"] * cx ** p["g_power"]
    xg = np.minimum(0.95, p["xg_base"] + p["xg_slope"] * cx**2)
    p_shot = np.minimum(p["p_shot_cap"], g_target / xg)
    turn_base = p["turn_base"] + p["turn_slope"] * cx

    weights: dict[int, dict[int, float]] = {}
    for s in range(m):
        ix, iy = s % grid.m_x, s // grid.m_x
        row: dict[int, float] = {}
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                if dx == 0 and dy == 0:
                    continue
                jx, jy = ix + dx, iy + dy
                if 0 <= jx < grid.m_x and 0 <= jy < grid.m_y:
                    row[jx + grid.m_x * jy] = p["fwd_bias"] ** dx * p["side_damp"] ** abs(dy)
        weights[s] = row

    pi0 = np.exp(
        -((cx - p["start_x"]) ** 2 + (cy - p["start_y"]) ** 2) / (2 * p["start_width"] ** 2)
    )
    pi0 /= pi0.sum()

    def build(theta: float) -> GenerativeModel:
        p_turn = np.clip(theta * turn_base, 0.01, 0.95)
        p_turn = np.minimum(p_turn, 1.0 - p_shot)  # keep rows feasible
        move_mass = 1.0 - p_shot - p_turn
        rows: dict[int, dict[int, float]] = {}
        for s in range(m):
            if move_mass[s] <= 0:
                continue
            total = sum(weights[s].values())
            rows[s] = {c: move_mass[s] * w / total for c, w in weights[s].items()}
        return GenerativeModel(
            grid=grid,
            p_shot=p_shot,
            xg=xg,
            t=SparseRows.from_dict(m, rows),
            p_turn=p_turn,
            pi0=pi0,
        )

    def shot_share(gen: GenerativeModel) -> float:
        nu = _neumann_visits(gen.t, gen.pi0)
        return float((nu * gen.p_shot).sum() / nu.sum())

    lo, hi = 0.05, 6.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if shot_share(build(mid)) > p["shot_share"]:
            lo = mid  # share too high -> more turnovers
        else:
            hi = mid
    gen = build(0.5 * (lo + hi))
    if hotspot is not None:
        gen = _apply_hotspot(gen, *hotspot)
    return gen


def _apply_hotspot(gen: GenerativeModel, g_value: float, visit_scale: float) -> GenerativeModel:
    """Make one advanced corner state rare but highly valuable."""
    grid = gen.grid
    star = state_of(grid, (1.0 - 0.5 / grid.m_x, 0.5 / grid.m_y))
    xg = gen.xg.copy()
    p_shot = gen.p_shot.copy()
    p_turn = gen.p_turn.copy()
    xg[star] = 0.75
    p_shot[star] = g_value / xg[star]
    if p_shot[star] > 1.0:
        raise ValueError(f"hotspot g={g_value} not reachable with xg=0.75")
    rows = gen.t.rows_dict()
    star_row = rows.get(star, {})
    row_sum = sum(star_row.values())
    budget = 1.0 - p_shot[star]
    move_mass = min(row_sum, 0.2 * budget)
    if row_sum > 0:
        rows[star] = {c: v * move_mass / row_sum for c, v in star_row.items()}
    p_turn[star] = budget - move_mass
    # Starve the state of visits: shrink incoming mass, give the remainder
    # back to each source row's other destinations.
    for s, row in rows.items():
        if s == star or star not in row:
            continue
        keep = row[star] * visit_scale
        removed = row[star] - keep
        others = {c: v for c, v in row.items() if c != star}
        other_sum = sum(others.values())
        if other_sum > 0:
            scale = (other_sum + removed) / other_sum
            row.update({c: v * scale for c, v in others.items()})
        else:
            p_turn[s] += removed
        row[star] = keep
    pi0 = gen.pi0.copy()
    pi0[star] *= visit_scale
    pi0 /= pi0.sum()
    return GenerativeModel(
        grid=grid,
        p_shot=p_shot,
        xg=xg,
        t=SparseRows.from_dict(grid.m, rows),
        p_turn=p_turn,
        pi0=pi0,
    )


# ---------------------------------------------------------------------------
# Model JSON

def model_to_dict(
    gen: GenerativeModel,
    *,
    n_events: int = 0,
    source: str = "unknown",
    xt: np.ndarray | None = None,
    xt_info: dict | None = None,
) -> dict:
    rows = []
    for s in range(gen.grid.m):
        lo, hi = int(gen.t.indptr[s]), int(gen.t.indptr[s + 1])
        if hi > lo:
            rows.append(
                {
                    "s": s,
                    "cols": gen.t.cols[lo:hi].tolist(),
                    "vals": gen.t.vals[lo:hi].tolist(),
                }
            )
    doc = {
        "schema": MODEL_SCHEMA,
        "grid": {"m_x": gen.grid.m_x, "m_y": gen.grid.m_y},
        "p_shot": gen.p_shot.tolist(),
        "xg": gen.xg.tolist(),
        "p_turn": gen.p_turn.tolist(),
        "pi0": gen.pi0.tolist(),
        "T": {"rows": rows},
        "meta": {"n_events": int(n_events), "source": source},
    }
    if xt is not None:
        doc["xt"] = np.asarray(xt, dtype=float).tolist()
        if xt_info:
            doc["xt_info"] = xt_info
    return doc


def save_model(fp: IO[str], gen: GenerativeModel, **kwargs) -> None:
    jsonio.dump(model_to_dict(gen, **kwargs), fp)


def model_from_dict(doc: dict) -> tuple[GenerativeModel, np.ndarray | None, dict]:
    try:
        grid = PitchGrid(int(doc["grid"]["m_x"]), int(doc["grid"]["m_y"]))
        m = grid.m
        rows: dict[int, dict[int, float]] = {}
        for row in doc["T"]["rows"]:
            s = int(row["s"])
            rows[s] = {int(c): float(v) for c, v in zip(row["cols"], row["vals"])}
        gen = GenerativeModel(
            grid=grid,
            p_shot=np.asarray(doc["p_shot"], dtype=float),
            xg=np.asarray(doc["xg"], dtype=float),
            t=SparseRows.from_dict(m, rows),
            p_turn=np.asarray(doc["p_turn"], dtype=float),
            pi0=np.asarray(doc["pi0"], dtype=float),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"invalid model JSON: {exc}") from exc
    xt = np.asarray(doc["xt"], dtype=float) if "xt" in doc else None
    return gen, xt, doc.get("meta", {})


def load_model(fp: IO) -> tuple[GenerativeModel, np.ndarray | None, dict]:
    return model_from_dict(jsonio.load(fp))
