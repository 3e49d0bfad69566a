"""TeamGoofspiel(N): two scripted agents against two random opponents.

Each round the top card of the deck is revealed as the prize; all four
players bid a card from their hand and the team with the larger bid sum takes
the prize (ties award nothing).  The agent team is modelled as two Dec-POMDP
agents; the opponents are folded into the transition function.

Agents' hands live in their information states, so the environment state only
tracks what the transition needs: round, deck, opponents' hands and scores.
The game runs for ``N + 1`` time-steps; the last one is an outcome step where
hands are empty and every player passes (action ``0``).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

from .engine import (
    Action,
    AgentModel,
    Context,
    DecPomdpModel,
    FiniteSpace,
    ImplicitSpace,
    Predicate,
    ScmInstance,
    Trajectory,
    build_scm,
    rollout,
)

PASS = 0
AGENTS_DO_NOT_WIN = "agents_do_not_win"
MAX_UNIFORM_DECK_N = 8  # uniform deck prior enumerates N! permutations


class GoofspielState(NamedTuple):
    t: int
    deck: tuple
    opp_hands: tuple  # two sorted tuples
    agents_score: int
    opp_score: int

    @property
    def prize(self) -> int:
        return self.deck[self.t] if self.t < len(self.deck) else 0


class GoofspielInfoState(NamedTuple):
    hand: tuple  # sorted
    prize: int
    winning: bool  # own team strictly ahead entering this round


def ag0_policy(info: GoofspielInfoState) -> int:
    """Match the prize; otherwise the closest card on the side the score suggests."""
    hand, prize = info.hand, info.prize
    if prize in hand:
        return prize
    if info.winning:
        lower = [c for c in hand if c < prize]
        return max(lower) if lower else min(hand)
    higher = [c for c in hand if c > prize]
    return min(higher) if higher else max(hand)


def ag1_policy(info: GoofspielInfoState) -> int:
    """Play the highest card if the prize beats the hand average minus X, else the lowest."""
    x = 0 if info.winning else 1
    mean = Fraction(sum(info.hand), len(info.hand))
    return max(info.hand) if info.prize > mean - x else min(info.hand)


def opponent_policy(info: GoofspielInfoState) -> dict:
    if info.winning:
        pool = [c for c in info.hand if c <= info.prize]
    else:
        pool = [c for c in info.hand if c >= info.prize]
    if not pool:
        pool = list(info.hand)
    return {c: 1.0 / len(pool) for c in pool}


def agents_do_not_win(trajectory: Trajectory) -> bool:
    final = trajectory.states[-1]
    return final.agents_score <= final.opp_score


def agents_do_not_win_event() -> Predicate:
    return Predicate(AGENTS_DO_NOT_WIN)


def score_difference(trajectory: Trajectory) -> int:
    final = trajectory.states[-1]
    return final.agents_score - final.opp_score


def cf_improvement(actual: Trajectory, counterfactual: Trajectory) -> int:
    """Gain in final agents-minus-opponents score of the counterfactual world."""
    if actual.states[0].deck != counterfactual.states[0].deck:
        raise ValueError("trajectories were played with different decks")
    return score_difference(counterfactual) - score_difference(actual)


def _is_permutation(deck, n: int) -> bool:
    return sorted(deck) == list(range(1, n + 1))


@dataclass(frozen=True)
class GoofspielGame:
    n: int
    deck: tuple | None
    model: DecPomdpModel
    agents: tuple
    scm: ScmInstance

    @property
    def event(self) -> Predicate:
        return agents_do_not_win_event()

    def initial_state(self, deck) -> GoofspielState:
        full = tuple(range(1, self.n + 1))
        return GoofspielState(0, tuple(deck), (full, full), 0, 0)

    def play(self, context: Context, interventions=None) -> Trajectory:
        return rollout(self.scm, context, interventions)


def new_game(n: int, deck=None) -> GoofspielGame:
    """Build TeamGoofspiel(n).  ``deck=None`` means a uniformly shuffled deck."""
    if not 3 <= n <= 13:
        raise ValueError("TeamGoofspiel needs 3 <= N <= 13")
    full = tuple(range(1, n + 1))
    if deck is not None:
        deck = tuple(int(c) for c in deck)
        if not _is_permutation(deck, n):
            raise ValueError(f"deck {deck} is not a permutation of 1..{n}")
        initial = {GoofspielState(0, deck, (full, full), 0, 0): 1.0}
    else:
        if n > MAX_UNIFORM_DECK_N:
            raise ValueError(f"uniform deck prior only supported for N <= {MAX_UNIFORM_DECK_N}; pass a deck")
        perms = list(itertools.permutations(full))
        initial = {GoofspielState(0, p, (full, full), 0, 0): 1.0 / len(perms) for p in perms}

    def transition(s: GoofspielState, joint):
        if s.t >= n:
            return {s: 1.0}
        prize = s.deck[s.t]
        opp_winning = s.opp_score > s.agents_score
        dists = [opponent_policy(GoofspielInfoState(h, prize, opp_winning)) for h in s.opp_hands]
        bid = sum(joint)
        out = {}
        for (c0, p0), (c1, p1) in itertools.product(dists[0].items(), dists[1].items()):
            opp_bid = c0 + c1
            a_score = s.agents_score + (prize if bid > opp_bid else 0)
            o_score = s.opp_score + (prize if opp_bid > bid else 0)
            hands = (
                tuple(c for c in s.opp_hands[0] if c != c0),
                tuple(c for c in s.opp_hands[1] if c != c1),
            )
            out[GoofspielState(s.t + 1, s.deck, hands, a_score, o_score)] = p0 * p1
        return out

    def observation(s: GoofspielState):
        o = (s.prize, s.agents_score > s.opp_score)
        return {(o, o): 1.0}

    state_space = ImplicitSpace(
        f"goofspiel{n}_states",
        lambda s: isinstance(s, GoofspielState) and len(s.deck) == n and 0 <= s.t <= n,
    )
    info_space = ImplicitSpace(
        f"goofspiel{n}_info",
        lambda i: isinstance(i, GoofspielInfoState) and set(i.hand) <= set(full),
    )
    obs_space = FiniteSpace(tuple((p, w) for p in range(0, n + 1) for w in (False, True)))
    actions = FiniteSpace((PASS,) + full)

    model = DecPomdpModel(
        state_space=state_space,
        n_agents=2,
        action_spaces=(actions, actions),
        transition=transition,
        observation_spaces=(obs_space, obs_space),
        observation=observation,
        horizon=n + 1,
        initial=initial,
        joint_observation_space=ImplicitSpace(
            "goofspiel_joint_obs", lambda o: len(o) == 2 and all(x in obs_space for x in o)
        ),
    )

    def make_agent(policy, name):
        def pi(info):
            return {policy(info): 1.0} if info.hand else {PASS: 1.0}

        def update(info, action, obs):
            hand = tuple(c for c in info.hand if c != action)
            return {GoofspielInfoState(hand, obs[0], obs[1]): 1.0}

        def init(obs):
            return {GoofspielInfoState(full, obs[0], obs[1]): 1.0}

        return AgentModel(
            info_space=info_space,
            policy=pi,
            info_update=update,
            initial_info=init,
            valid_actions=lambda info: info.hand or (PASS,),
            name=name,
        )

    agents = (make_agent(ag0_policy, "Ag0"), make_agent(ag1_policy, "Ag1"))
    scm = build_scm(
        model,
        agents,
        decision_variables=[Action(i, t) for t in range(n) for i in range(2)],
        predicates={AGENTS_DO_NOT_WIN: agents_do_not_win},
        intervention_values=lambda var: full,
    )
    return GoofspielGame(n, deck, model, agents, scm)


def game_log(trajectory: Trajectory) -> dict:
    """Per-round bids and running scores, for JSON game logs."""
    rounds = []
    states = trajectory.states
    for t in range(len(states) - 1):
        s, nxt = states[t], states[t + 1]
        opp_bids = [
            next(iter(set(s.opp_hands[j]) - set(nxt.opp_hands[j])), None) for j in range(2)
        ]
        rounds.append(
            {
                "round": t,
                "prize": s.prize,
                "agent_bids": [trajectory.actions[i][t] for i in range(2)],
                "opponent_bids": opp_bids,
                "scores": [nxt.agents_score, nxt.opp_score],
            }
        )
    return {"deck": list(states[0].deck), "rounds": rounds, "final": [states[-1].agents_score, states[-1].opp_score]}


def max_total_points(n: int) -> int:
    return n * (n + 1) // 2


__all__ = [
    "GoofspielGame",
    "GoofspielInfoState",
    "GoofspielState",
    "ag0_policy",
    "ag1_policy",
    "agents_do_not_win",
    "agents_do_not_win_event",
    "cf_improvement",
    "game_log",
    "new_game",
    "opponent_policy",
    "score_difference",
]
