"""Rebuild the 12-player rating column from published overall win rates.

Each model's overall win and win+tie percentages against the reference
answer set (16.1K votes each) define a star-shaped outcome matrix; fitting it
and mean-anchoring at 1000 reproduces the published ratings to within a
couple of Elo. Run:

    python3 scripts/reconstruct_leaderboard.py
"""

import numpy as np

from pairarena.ratings import (
    OutcomeMatrix,
    RatingEntry,
    bootstrap_ci,
    bt_fit,
    render_leaderboard_table,
    to_elo,
)

REFERENCE = "reference"
VOTES_PER_MODEL = 16100

OVERALL_RATES = {
    "gpt-4o": (36.9, 41.0),
    "gpt-4-turbo": (34.4, 39.1),
    "gpt-4-0125-preview": (28.9, 33.7),
    "mixtral-8x22b": (34.5, 38.8),
    "mixtral-8x7b": (27.5, 31.0),
    "llama-3-70b": (21.7, 25.2),
    "llama-3-8b": (20.4, 23.5),
    "command-r-plus": (21.1, 25.8),
    "command-r": (11.1, 15.2),
    "qwen1.5-110b-chat": (33.4, 37.8),
    "qwen1.5-32b-chat": (32.8, 37.1),
}

PUBLISHED_RATINGS = {
    REFERENCE: 1144, "gpt-4o": 1066, "gpt-4-turbo": 1050, "mixtral-8x22b": 1049,
    "qwen1.5-110b-chat": 1041, "qwen1.5-32b-chat": 1036, "gpt-4-0125-preview": 1008,
    "mixtral-8x7b": 991, "llama-3-70b": 939, "command-r-plus": 938,
    "llama-3-8b": 924, "command-r": 816,
}


def star_outcomes():
    players = (REFERENCE,) + tuple(sorted(OVERALL_RATES))
    wins = np.zeros((len(players), len(players)))
    for i, model in enumerate(players[1:], start=1):
        w_pct, wt_pct = OVERALL_RATES[model]
        t_pct = wt_pct - w_pct
        wins[i, 0] = VOTES_PER_MODEL * (w_pct + t_pct / 2.0) / 100.0
        wins[0, i] = VOTES_PER_MODEL * (100.0 - wt_pct + t_pct / 2.0) / 100.0
    return OutcomeMatrix(players=players, wins=wins)


def synth_judgments():
    from dataclasses import dataclass

    from pairarena.agreement import CanonicalLabel

    @dataclass(frozen=True)
    class Outcome:
        source_a: str
        source_b: str
        canonical: CanonicalLabel
        query_id: str = "q"

    judgments = []
    for model, (w_pct, wt_pct) in sorted(OVERALL_RATES.items()):
        wins = round(VOTES_PER_MODEL * w_pct / 100.0)
        ties = round(VOTES_PER_MODEL * (wt_pct - w_pct) / 100.0)
        losses = VOTES_PER_MODEL - wins - ties
        judgments += [Outcome(model, REFERENCE, CanonicalLabel.A_PREFERRED)] * wins
        judgments += [Outcome(model, REFERENCE, CanonicalLabel.TIE)] * ties
        judgments += [Outcome(model, REFERENCE, CanonicalLabel.B_PREFERRED)] * losses
    return judgments


def main() -> None:
    strengths = bt_fit(star_outcomes())
    entries = to_elo(strengths)

    print("computing bootstrap intervals (100 rounds on 177K synthetic votes)...")
    intervals = bootstrap_ci(synth_judgments(), rounds=100, seed=0, tol=1e-7)
    votes = {player: VOTES_PER_MODEL for player in OVERALL_RATES}
    votes[REFERENCE] = VOTES_PER_MODEL * len(OVERALL_RATES)
    entries = [
        RatingEntry(
            player=e.player,
            elo=e.elo,
            ci_low=min(intervals[e.player][0], e.elo),
            ci_high=max(intervals[e.player][1], e.elo),
            votes=votes[e.player],
        )
        for e in entries
    ]

    print()
    print(render_leaderboard_table(entries))
    print()
    print(f"{'player':20}  fitted  published  delta")
    for entry in entries:
        published = PUBLISHED_RATINGS[entry.player]
        print(f"{entry.player:20}  {entry.elo:6.1f}  {published:9d}  {entry.elo - published:+5.2f}")


if __name__ == "__main__":
    main()
