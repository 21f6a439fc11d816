"""Rule-level Leduc enumeration that never builds a tree.

A betting round is a walk over (active players, players still owed an
action, bets so far); a bet or raise puts every other active player back
in the owed set.
"""


def betting_round(n, active, max_bets=2):
    """Return (decisions, ends): decisions are (history, actor) pairs, ends are
    (history, survivors) pairs; play opens at the lowest active seat."""
    decisions, ends = [], []

    def walk(history, actor, active, pending, bets, facing):
        if len(active) == 1:
            ends.append((history, active))
            return
        if not pending:
            ends.append((history, active))
            return
        while actor not in pending:
            actor = (actor + 1) % n
        decisions.append((history, actor))
        nxt = (actor + 1) % n
        rest = pending - {actor}
        if actor in facing:
            walk(history + "f", nxt, active - {actor}, rest, bets, facing - {actor})
            walk(history + "c", nxt, active, rest, bets, facing - {actor})
            if bets < max_bets:
                others = active - {actor}
                walk(history + "r", nxt, active, others, bets + 1, others)
        else:
            walk(history + "k", nxt, active, rest, bets, facing)
            if bets < max_bets:
                others = active - {actor}
                walk(history + "b", nxt, active, others, bets + 1, others)

    start = min(active)
    walk("", start, frozenset(active), frozenset(active), 0, frozenset())
    return decisions, ends


def count(n):
    """(infostate count, terminal count) of rank-dealt Leduc with n players."""
    ranks = n + 1
    infostates = set()
    terminals = 0
    everyone = frozenset(range(n))
    r1_decisions, r1_ends = betting_round(n, everyone)

    def private_deals(player, hands, counts):
        if player == n:
            yield hands, counts
            return
        for r in range(ranks):
            if counts[r]:
                left = counts[:r] + (counts[r] - 1,) + counts[r + 1:]
                yield from private_deals(player + 1, hands + (r,), left)

    round2 = {}
    for hands, counts in private_deals(0, (), (2,) * ranks):
        for history, actor in r1_decisions:
            infostates.add((actor, hands[actor], "?", history))
        for history, survivors in r1_ends:
            if len(survivors) == 1:
                terminals += 1
                continue
            if survivors not in round2:
                round2[survivors] = betting_round(n, survivors)
            decisions, ends = round2[survivors]
            for pub in range(ranks):
                if not counts[pub]:
                    continue
                terminals += len(ends)
                for h2, actor in decisions:
                    infostates.add((actor, hands[actor], pub, history, h2))
    return len(infostates), terminals
