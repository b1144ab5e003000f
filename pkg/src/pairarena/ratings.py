"""Leaderboard statistics from canonical pairwise judgments.

Win/win+tie rates are counted against the reference answer per domain with a
micro-averaged overall. Ratings come from a Bradley-Terry maximum-likelihood
fit (minorization-maximization updates, ties counted as half a win for each
side) presented on a mean-anchored Elo scale, with percentile bootstrap
confidence intervals from resampled judgment sets.
"""

from __future__ import annotations

import math
import warnings
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np

from .agreement import CanonicalLabel

ELO_ANCHOR = 1000.0
ELO_SCALE = 400.0
_LOG10 = math.log(10.0)


class RatingsError(ValueError):
    """Judgment data cannot support the requested statistic."""


class DisconnectedGraphError(RatingsError):
    """The comparison graph has more than one component."""

    def __init__(self, components: Sequence[Sequence[str]]):
        self.components = [sorted(c) for c in components]
        super().__init__(f"comparison graph is disconnected: {self.components}")


class SeparationError(RatingsError):
    """A player never wins or never loses, so the MLE diverges."""


class JudgmentLike(Protocol):
    source_a: str
    source_b: str
    canonical: CanonicalLabel
    query_id: str


@dataclass(frozen=True)
class OutcomeMatrix:
    """Weighted head-to-head wins; ties contribute 0.5 in each direction."""

    players: tuple[str, ...]
    wins: np.ndarray

    def index(self, player: str) -> int:
        return self.players.index(player)

    @property
    def total_weight(self) -> float:
        return float(self.wins.sum())


def build_outcomes(
    judgments: Iterable[JudgmentLike], players: Sequence[str] | None = None
) -> OutcomeMatrix:
    judgments = list(judgments)
    if players is None:
        players = sorted({j.source_a for j in judgments} | {j.source_b for j in judgments})
    players = tuple(players)
    position = {player: i for i, player in enumerate(players)}
    wins = np.zeros((len(players), len(players)))
    for judgment in judgments:
        a = position[judgment.source_a]
        b = position[judgment.source_b]
        if judgment.canonical is CanonicalLabel.A_PREFERRED:
            wins[a, b] += 1.0
        elif judgment.canonical is CanonicalLabel.B_PREFERRED:
            wins[b, a] += 1.0
        else:
            wins[a, b] += 0.5
            wins[b, a] += 0.5
    return OutcomeMatrix(players=players, wins=wins)


def _components(players: Sequence[str], adjacency: np.ndarray) -> list[list[str]]:
    n = len(players)
    seen: set[int] = set()
    components = []
    for start in range(n):
        if start in seen:
            continue
        stack = [start]
        component = []
        while stack:
            node = stack.pop()
            if node in seen:
                continue
            seen.add(node)
            component.append(players[node])
            stack.extend(j for j in range(n) if adjacency[node, j] and j not in seen)
        components.append(component)
    return components


def _log_likelihood(wins: np.ndarray, strengths: np.ndarray) -> float:
    with np.errstate(divide="ignore", invalid="ignore"):
        probs = strengths[:, None] / (strengths[:, None] + strengths[None, :])
        terms = np.where(wins > 0, wins * np.log(probs), 0.0)
    return float(terms.sum())


def bt_fit(
    outcomes: OutcomeMatrix,
    tol: float = 1e-8,
    max_iter: int = 10000,
    *,
    smoothing: float | None = None,
    debug: bool = False,
) -> dict[str, float]:
    """Maximum-likelihood Bradley-Terry strengths, geometric mean 1.

    Minorization-maximization update: s_i <- W_i / sum_j n_ij / (s_i + s_j),
    where W_i is player i's total win weight and n_ij the weight of the i-j
    matchup. Each sweep provably does not decrease the likelihood, which
    `debug=True` asserts. `smoothing` adds pseudo-outcomes of that weight in
    both directions of every compared pair, lifting separated players onto a
    finite estimate; output is then marked only by the caller's choice to use
    the flag.
    """
    players = outcomes.players
    n = len(players)
    if n == 0:
        raise RatingsError("no players to fit")
    if n == 1:
        return {players[0]: 1.0}
    wins = outcomes.wins.astype(float).copy()
    matchups = wins + wins.T
    if smoothing:
        mask = matchups > 0
        wins[mask] += smoothing
        matchups = wins + wins.T
    components = _components(players, matchups > 0)
    if len(components) > 1:
        raise DisconnectedGraphError(components)
    win_weight = wins.sum(axis=1)
    loss_weight = wins.sum(axis=0)
    for i in range(n):
        if win_weight[i] == 0.0:
            raise SeparationError(
                f"player {players[i]!r} has zero win weight; enable smoothing to rate it"
            )
        if loss_weight[i] == 0.0:
            raise SeparationError(
                f"player {players[i]!r} never loses; enable smoothing to rate it"
            )
    strengths = np.ones(n)
    previous_ll = _log_likelihood(wins, strengths) if debug else 0.0
    for _ in range(max_iter):
        pair_sums = strengths[:, None] + strengths[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            denominators = np.where(matchups > 0, matchups / pair_sums, 0.0)
        updated = win_weight / denominators.sum(axis=1)
        updated /= np.exp(np.mean(np.log(updated)))
        if debug:
            current_ll = _log_likelihood(wins, updated)
            if current_ll < previous_ll - 1e-9 * (1.0 + abs(previous_ll)):
                raise AssertionError(
                    f"likelihood decreased: {previous_ll} -> {current_ll}"
                )
            previous_ll = current_ll
        delta = float(np.max(np.abs(updated - strengths) / strengths))
        strengths = updated
        if delta < tol:
            break
    else:
        raise RatingsError(f"Bradley-Terry fit did not converge in {max_iter} iterations")
    return dict(zip(players, strengths.tolist()))


@dataclass(frozen=True)
class RatingEntry:
    player: str
    elo: float
    ci_low: float
    ci_high: float
    votes: int

    def to_record(self) -> dict:
        return {
            "player": self.player,
            "elo": self.elo,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "votes": self.votes,
        }


def elo_from_strengths(
    strengths: Mapping[str, float], anchor: float = ELO_ANCHOR, scale: float = ELO_SCALE
) -> dict[str, float]:
    """Mean-anchored Elo: anchor + (scale/ln 10) * (ln s - mean ln s)."""
    for player, value in strengths.items():
        if value <= 0:
            raise RatingsError(f"strength for {player!r} must be positive, got {value}")
    logs = {player: math.log(value) for player, value in strengths.items()}
    mean_log = sum(logs.values()) / len(logs)
    return {
        player: anchor + (scale / _LOG10) * (logs[player] - mean_log) for player in strengths
    }


def to_elo(
    strengths: Mapping[str, float], anchor: float = ELO_ANCHOR, scale: float = ELO_SCALE
) -> list[RatingEntry]:
    """Point-estimate rating entries, sorted by descending Elo."""
    elos = elo_from_strengths(strengths, anchor, scale)
    entries = [
        RatingEntry(player=player, elo=elo, ci_low=elo, ci_high=elo, votes=0)
        for player, elo in elos.items()
    ]
    entries.sort(key=lambda e: (-e.elo, e.player))
    return entries


def star_closed_form(w: float, t: float, l: float) -> float:
    """Elo difference vs the hub for a player compared only against it.

    With score s = w + t/2 the two-player MLE gives s/(1-s) directly, hence
    diff = (scale/ln 10) * ln(s / (1 - s)). Serves as the independent oracle
    for the iterative fit on star-shaped comparison graphs.
    """
    if abs(w + t + l - 1.0) > 1e-9:
        raise RatingsError(f"fractions must sum to 1, got {w + t + l}")
    s = w + t / 2.0
    if s <= 0.0 or s >= 1.0:
        raise SeparationError(f"score {s} admits no finite rating difference")
    return (ELO_SCALE / _LOG10) * math.log(s / (1.0 - s))


def star_reference_elos(
    score_by_player: Mapping[str, float],
    reference: str,
    anchor: float = ELO_ANCHOR,
    scale: float = ELO_SCALE,
) -> dict[str, float]:
    """Closed-form mean-anchored ratings for a pure star topology.

    `score_by_player` maps each non-hub player to its win-plus-half-tie
    fraction against the hub. Entirely independent of bt_fit.
    """
    lambdas = {reference: 0.0}
    for player, score in score_by_player.items():
        if score <= 0.0 or score >= 1.0:
            raise SeparationError(f"score {score} for {player!r} admits no finite rating")
        lambdas[player] = math.log(score / (1.0 - score))
    mean_lambda = sum(lambdas.values()) / len(lambdas)
    return {p: anchor + (scale / _LOG10) * (lam - mean_lambda) for p, lam in lambdas.items()}


# --- win rates ---


@dataclass(frozen=True)
class WinRateCell:
    wins: int
    ties: int
    losses: int

    @property
    def total(self) -> int:
        return self.wins + self.ties + self.losses

    @property
    def win_pct(self) -> float:
        return 100.0 * self.wins / self.total if self.total else 0.0

    @property
    def tie_pct(self) -> float:
        return 100.0 * self.ties / self.total if self.total else 0.0

    @property
    def win_tie_pct(self) -> float:
        return 100.0 * (self.wins + self.ties) / self.total if self.total else 0.0


def _merge_cells(cells: Iterable[WinRateCell]) -> WinRateCell:
    wins = ties = losses = 0
    for cell in cells:
        wins += cell.wins
        ties += cell.ties
        losses += cell.losses
    return WinRateCell(wins=wins, ties=ties, losses=losses)


@dataclass(frozen=True)
class WinRateTable:
    reference: str
    cells: dict[tuple[str, str], WinRateCell]  # (player, domain) -> counts

    def players(self) -> list[str]:
        return sorted({player for player, _ in self.cells})

    def domains(self) -> list[str]:
        return sorted({domain for _, domain in self.cells})

    def cell(self, player: str, domain: str) -> WinRateCell | None:
        return self.cells.get((player, domain))

    def overall(self, player: str) -> WinRateCell:
        return _merge_cells(
            cell for (p, _), cell in self.cells.items() if p == player
        )

    def to_records(self) -> list[dict]:
        records = []
        for player in self.players():
            row: dict = {"player": player}
            for domain in self.domains():
                cell = self.cell(player, domain)
                if cell is None:
                    continue
                row[domain] = {
                    "wins": cell.wins,
                    "ties": cell.ties,
                    "losses": cell.losses,
                    "win_pct": cell.win_pct,
                    "win_tie_pct": cell.win_tie_pct,
                }
            overall = self.overall(player)
            row["overall"] = {
                "wins": overall.wins,
                "ties": overall.ties,
                "losses": overall.losses,
                "win_pct": overall.win_pct,
                "win_tie_pct": overall.win_tie_pct,
            }
            records.append(row)
        return records


def win_rates(
    judgments: Sequence[JudgmentLike],
    reference: str,
    domain_by_query: Mapping[str, str],
) -> WinRateTable:
    """Per-domain W/T/W+T against the reference, micro-averaged overall.

    Every judgment must include the reference on one side. The overall row is
    derived from summed counts, so it equals the judgment-count-weighted mean
    of the domain rates exactly.
    """
    counts: dict[tuple[str, str], list[int]] = {}
    for judgment in judgments:
        if judgment.source_a == reference:
            player = judgment.source_b
            player_wins = judgment.canonical is CanonicalLabel.B_PREFERRED
            player_loses = judgment.canonical is CanonicalLabel.A_PREFERRED
        elif judgment.source_b == reference:
            player = judgment.source_a
            player_wins = judgment.canonical is CanonicalLabel.A_PREFERRED
            player_loses = judgment.canonical is CanonicalLabel.B_PREFERRED
        else:
            raise RatingsError(
                f"judgment on query {judgment.query_id!r} lacks the reference "
                f"({judgment.source_a} vs {judgment.source_b})"
            )
        domain = domain_by_query.get(judgment.query_id, "unknown")
        bucket = counts.setdefault((player, domain), [0, 0, 0])
        if player_wins:
            bucket[0] += 1
        elif player_loses:
            bucket[2] += 1
        else:
            bucket[1] += 1
    judged_domains = {domain for _, domain in counts}
    for domain in set(domain_by_query.values()) - judged_domains:
        warnings.warn(f"domain {domain!r} has no judgments; row omitted", stacklevel=2)
    cells = {
        key: WinRateCell(wins=w, ties=t, losses=l) for key, (w, t, l) in counts.items()
    }
    return WinRateTable(reference=reference, cells=cells)


# --- bootstrap ---


def _aggregate_cells(
    judgments: Sequence[JudgmentLike],
) -> tuple[list[tuple[str, str, CanonicalLabel]], np.ndarray]:
    counter: Counter = Counter(
        (j.source_a, j.source_b, j.canonical) for j in judgments
    )
    cells = sorted(counter, key=lambda c: (c[0], c[1], c[2].name))
    counts = np.array([counter[c] for c in cells], dtype=float)
    return cells, counts


def _fit_elos_from_counts(
    cells: Sequence[tuple[str, str, CanonicalLabel]],
    counts: np.ndarray,
    players: tuple[str, ...],
    tol: float,
) -> dict[str, float]:
    position = {player: i for i, player in enumerate(players)}
    wins = np.zeros((len(players), len(players)))
    for (source_a, source_b, label), count in zip(cells, counts):
        if count == 0:
            continue
        a, b = position[source_a], position[source_b]
        if label is CanonicalLabel.A_PREFERRED:
            wins[a, b] += count
        elif label is CanonicalLabel.B_PREFERRED:
            wins[b, a] += count
        else:
            wins[a, b] += 0.5 * count
            wins[b, a] += 0.5 * count
    strengths = bt_fit(OutcomeMatrix(players=players, wins=wins), tol=tol)
    return elo_from_strengths(strengths)


MAX_REDRAWS = 10


def bootstrap_ci(
    judgments: Sequence[JudgmentLike],
    rounds: int = 100,
    seed: int = 0,
    *,
    tol: float = 1e-8,
    percentiles: tuple[float, float] = (2.5, 97.5),
) -> dict[str, tuple[float, float]]:
    """Percentile confidence intervals from resampled judgment sets.

    Each round draws len(judgments) judgments with replacement (realized as a
    multinomial over aggregated outcome cells, which is the same
    distribution), refits, and records every player's Elo. Rounds whose
    resample disconnects the graph or separates a player are redrawn from the
    same substream, at most MAX_REDRAWS times. Fixed seed implies identical
    output, independent of scheduling; rounds reduce by index.
    """
    if rounds < 2:
        raise RatingsError(f"bootstrap needs at least 2 rounds, got {rounds}")
    if not judgments:
        raise RatingsError("bootstrap needs at least one judgment")
    cells, counts = _aggregate_cells(judgments)
    total = int(counts.sum())
    probabilities = counts / total
    players = tuple(sorted({c[0] for c in cells} | {c[1] for c in cells}))
    samples = np.empty((rounds, len(players)))
    children = np.random.SeedSequence(seed).spawn(rounds)
    for round_index in range(rounds):
        rng = np.random.default_rng(children[round_index])
        for attempt in range(MAX_REDRAWS + 1):
            resampled = rng.multinomial(total, probabilities).astype(float)
            try:
                elos = _fit_elos_from_counts(cells, resampled, players, tol)
            except (DisconnectedGraphError, SeparationError):
                if attempt == MAX_REDRAWS:
                    raise RatingsError(
                        f"bootstrap round {round_index} exhausted {MAX_REDRAWS} redraws"
                    )
                continue
            break
        samples[round_index] = [elos[player] for player in players]
    lows = np.percentile(samples, percentiles[0], axis=0)
    highs = np.percentile(samples, percentiles[1], axis=0)
    return {
        player: (float(lows[i]), float(highs[i])) for i, player in enumerate(players)
    }


# --- leaderboard assembly ---


@dataclass(frozen=True)
class Leaderboard:
    entries: tuple[RatingEntry, ...]
    win_rate_table: WinRateTable | None

    def to_payload(self) -> dict:
        payload: dict = {"entries": [e.to_record() for e in self.entries]}
        if self.win_rate_table is not None:
            payload["reference"] = self.win_rate_table.reference
            payload["win_rates"] = self.win_rate_table.to_records()
        return payload


def leaderboard(
    judgments: Sequence[JudgmentLike],
    *,
    reference: str | None = None,
    domain_by_query: Mapping[str, str] | None = None,
    bootstrap_rounds: int = 100,
    seed: int = 0,
    smoothing: float | None = None,
) -> Leaderboard:
    """Fit, convert to Elo, attach bootstrap CIs and vote counts."""
    strengths = bt_fit(build_outcomes(judgments), smoothing=smoothing)
    elos = elo_from_strengths(strengths)
    if bootstrap_rounds >= 2 and len(judgments) > 1:
        intervals = bootstrap_ci(judgments, rounds=bootstrap_rounds, seed=seed)
    else:
        intervals = {player: (elo, elo) for player, elo in elos.items()}
    votes: Counter = Counter()
    for judgment in judgments:
        votes[judgment.source_a] += 1
        votes[judgment.source_b] += 1
    entries = [
        RatingEntry(
            player=player,
            elo=elo,
            ci_low=min(intervals[player][0], elo),
            ci_high=max(intervals[player][1], elo),
            votes=votes[player],
        )
        for player, elo in elos.items()
    ]
    entries.sort(key=lambda e: (-e.elo, e.player))
    table = None
    if reference is not None:
        anchored = [
            j for j in judgments if reference in (j.source_a, j.source_b)
        ]
        if anchored:
            table = win_rates(anchored, reference, domain_by_query or {})
    return Leaderboard(entries=tuple(entries), win_rate_table=table)


def _format_votes(votes: int) -> str:
    if votes >= 1000:
        return f"{votes / 1000:.1f}K"
    return str(votes)


def render_leaderboard_table(entries: Sequence[RatingEntry]) -> str:
    """Aligned columns in the familiar Rating / 95% CI / Votes layout."""
    rows = [["Player", "Rating", "95% CI", "Votes"]]
    for entry in entries:
        rows.append(
            [
                entry.player,
                f"{entry.elo:.0f}",
                f"+{max(0.0, entry.ci_high - entry.elo):.0f}/-{max(0.0, entry.elo - entry.ci_low):.0f}",
                _format_votes(entry.votes),
            ]
        )
    widths = [max(len(row[i]) for row in rows) for i in range(4)]
    return "\n".join(
        "  ".join(
            cell.ljust(widths[i]) if i == 0 else cell.rjust(widths[i])
            for i, cell in enumerate(row)
        )
        for row in rows
    )
