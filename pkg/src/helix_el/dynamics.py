"""Per-sentence disambiguation games solved by discrete replicator dynamics.

Players are the sentence's mentions plus any context tokens that have an
embedding. A mention's strategies are its surviving candidate entities (plus
an optional reserved NIL strategy); a context token's strategies are its
senses, one by default. Pairwise payoffs come from a global strategy
similarity matrix Z restricted through the player adjacency matrix A.

The payoff of strategy h for player i is

    u_h = x_i^h * sum_j A_ij * (Z x_j)_h

and one synchronous update replaces each x_i by its payoff vector normalized
to the simplex (players with zero total payoff are left unchanged). Because
A and Z are non-negative and every x_i starts on the simplex, all payoffs are
non-negative and the simplex is preserved.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "DynamicsConfig",
    "Strategy",
    "Player",
    "Game",
    "MentionEntry",
    "TokenEntry",
    "LinkDecision",
    "shifted_cosine",
    "build_game",
    "payoff",
    "replicator_step",
    "run_dynamics",
    "select_link",
    "select_link_static",
]

NIL = "NIL"


@dataclass(frozen=True)
class DynamicsConfig:
    tol: float = 1e-6
    max_iter: int = 1000
    init: str = "uniform"  # "uniform" | "prior"
    edge_threshold: float = 0.25  # A entries below this are zeroed
    nil_kappa: float = 0.5        # constant Z row of the reserved NIL strategy
    nil_in_candidates: bool = False

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.init not in ("uniform", "prior"):
            raise ValueError(f"unknown init {self.init!r}")
        if not 0.0 <= self.nil_kappa <= 1.0:
            raise ValueError(f"nil_kappa must lie in [0, 1], "
                             f"got {self.nil_kappa}")


@dataclass(frozen=True)
class Strategy:
    gid: int
    owner: int
    qid: str | None  # entity QID; None for sense strategies
    is_nil: bool = False


@dataclass(frozen=True)
class Player:
    index: int
    kind: str  # "mention" | "context-token"
    name: str
    strategy_gids: tuple[int, ...]


@dataclass(frozen=True)
class MentionEntry:
    mention_id: str
    embedding: np.ndarray
    # (qid, retrieval score, entity vector or None when unembedded)
    candidates: tuple[tuple[str, float, np.ndarray | None], ...]


@dataclass(frozen=True)
class TokenEntry:
    surface: str
    embedding: np.ndarray
    # (sense id, sense vector); defaults to the token itself
    senses: tuple[tuple[str, np.ndarray], ...] = ()


@dataclass(frozen=True)
class LinkDecision:
    mention_id: str
    predicted: str  # QID or "NIL"
    score: float
    heuristic: str | None = None
    filtered_count: int = 0


@dataclass(frozen=True)
class Game:
    players: tuple[Player, ...]
    strategies: tuple[Strategy, ...]
    X: tuple[np.ndarray, ...]
    A: np.ndarray  # n x n, symmetric, zero diagonal, entries in [0, 1]
    Z: np.ndarray  # M x M, symmetric, entries in [0, 1]
    B: np.ndarray  # M x M coupling: B[h, s] = A[owner h, owner s] * Z[h, s]
    offsets: np.ndarray  # strategy-block start per player
    sizes: np.ndarray    # strategies per player
    nil_strategy: dict[int, int]  # player index -> reserved NIL gid

    def concatenated(self) -> np.ndarray:
        return np.concatenate(self.X)

    def split(self, y: np.ndarray) -> tuple[np.ndarray, ...]:
        return tuple(y[o:o + s].copy()
                     for o, s in zip(self.offsets, self.sizes))


def _unit_rows(vectors: list[np.ndarray | None], dim: int) -> np.ndarray:
    rows = np.zeros((len(vectors), dim), dtype=np.float64)
    for i, v in enumerate(vectors):
        if v is None:
            continue
        v = np.asarray(v, dtype=np.float64)
        norm = np.linalg.norm(v)
        if norm > 0:
            rows[i] = v / norm
    return rows


def shifted_cosine(rows: np.ndarray) -> np.ndarray:
    """Pairwise (1 + cosine)/2 for unit rows; zero rows land on neutral 0.5."""
    return (1.0 + rows @ rows.T) / 2.0


def build_game(mentions: list[MentionEntry], tokens: list[TokenEntry],
               config: DynamicsConfig) -> Game:
    """Assemble players, strategy matrices and the initial strategy space."""
    if not mentions:
        raise ValueError("a game needs at least one mention player")
    dims = [np.asarray(m.embedding).shape[-1] for m in mentions]
    dims += [np.asarray(t.embedding).shape[-1] for t in tokens]
    if len(set(dims)) > 1:
        raise ValueError(f"mixed embedding dimensions {sorted(set(dims))}")
    dim = dims[0]

    players: list[Player] = []
    strategies: list[Strategy] = []
    strategy_vectors: list[np.ndarray | None] = []
    priors: list[np.ndarray] = []
    player_vectors: list[np.ndarray] = []
    nil_strategy: dict[int, int] = {}

    for entry in mentions:
        if not entry.candidates and not config.nil_in_candidates:
            raise ValueError(
                f"mention {entry.mention_id!r} has no surviving candidate and "
                "the NIL strategy is disabled")
        index = len(players)
        gids = []
        scores = []
        for qid, score, vector in entry.candidates:
            gids.append(len(strategies))
            strategies.append(Strategy(gid=gids[-1], owner=index, qid=qid))
            strategy_vectors.append(vector)
            scores.append(score)
        if config.nil_in_candidates:
            gids.append(len(strategies))
            strategies.append(Strategy(gid=gids[-1], owner=index, qid=NIL,
                                       is_nil=True))
            strategy_vectors.append(None)
            scores.append(config.nil_kappa)
            nil_strategy[index] = gids[-1]
        players.append(Player(index=index, kind="mention",
                              name=entry.mention_id,
                              strategy_gids=tuple(gids)))
        player_vectors.append(np.asarray(entry.embedding, dtype=np.float64))
        if config.init == "prior":
            exp = np.exp(np.asarray(scores) - max(scores))
            priors.append(exp / exp.sum())
        else:
            priors.append(np.full(len(gids), 1.0 / len(gids)))

    for entry in tokens:
        index = len(players)
        senses = entry.senses or ((entry.surface, entry.embedding),)
        gids = []
        for _, vector in senses:
            gids.append(len(strategies))
            strategies.append(Strategy(gid=gids[-1], owner=index, qid=None))
            strategy_vectors.append(np.asarray(vector, dtype=np.float64))
        players.append(Player(index=index, kind="context-token",
                              name=entry.surface, strategy_gids=tuple(gids)))
        player_vectors.append(np.asarray(entry.embedding, dtype=np.float64))
        priors.append(np.full(len(gids), 1.0 / len(gids)))

    A = shifted_cosine(_unit_rows(player_vectors, dim))
    np.fill_diagonal(A, 0.0)
    A[A < config.edge_threshold] = 0.0

    Z = shifted_cosine(_unit_rows(strategy_vectors, dim))
    nil_gids = [s.gid for s in strategies if s.is_nil]
    if nil_gids:
        Z[nil_gids, :] = config.nil_kappa
        Z[:, nil_gids] = config.nil_kappa

    owner = np.array([s.owner for s in strategies])
    B = A[np.ix_(owner, owner)] * Z

    sizes = np.array([len(p.strategy_gids) for p in players])
    offsets = np.concatenate(([0], np.cumsum(sizes)[:-1]))
    return Game(players=tuple(players), strategies=tuple(strategies),
                X=tuple(priors), A=A, Z=Z, B=B,
                offsets=offsets, sizes=sizes, nil_strategy=nil_strategy)


def payoff(game: Game, i: int) -> np.ndarray:
    """Payoff vector over player i's strategies (Eq. u_h above)."""
    y = game.concatenated()
    start = game.offsets[i]
    block = game.B[start:start + game.sizes[i]]
    return game.X[i] * (block @ y)


def _step_y(game: Game, y: np.ndarray) -> np.ndarray:
    u = y * (game.B @ y)
    totals = np.add.reduceat(u, game.offsets)
    stalled = totals <= 0.0
    denom = np.where(stalled, 1.0, totals)
    y_next = u / np.repeat(denom, game.sizes)
    if stalled.any():
        mask = np.repeat(stalled, game.sizes)
        y_next[mask] = y[mask]
    return y_next


def replicator_step(game: Game) -> Game:
    """One synchronous multiplicative update of every player's strategy."""
    y = _step_y(game, game.concatenated())
    return replace(game, X=game.split(y))


def run_dynamics(game: Game, config: DynamicsConfig,
                 trace: list[tuple[int, float]] | None = None,
                 ) -> tuple[Game, int, bool]:
    """Iterate replicator steps until the max per-entry change drops below
    ``config.tol`` or ``config.max_iter`` is hit.

    When ``trace`` is a list, (iteration, max-delta) rows are appended to it.
    """
    y = game.concatenated()
    iterations = 0
    converged = False
    for iterations in range(1, config.max_iter + 1):
        y_next = _step_y(game, y)
        delta = float(np.max(np.abs(y_next - y))) if len(y) else 0.0
        y = y_next
        if trace is not None:
            trace.append((iterations, delta))
        if delta < config.tol:
            converged = True
            break
    return replace(game, X=game.split(y)), iterations, converged


def _pick(entries: list[tuple[str, bool, float]]) -> tuple[str, float]:
    """Argmax by value; exact ties go to the lowest QID number, and NIL
    loses ties to any QID."""
    best = max(v for _, _, v in entries)
    tied = [(qid, is_nil) for qid, is_nil, v in entries if v == best]
    tied.sort(key=lambda t: (t[1], int(t[0][1:]) if not t[1] else 0))
    return tied[0][0], best


def select_link(game: Game, player_index: int) -> LinkDecision:
    """Link the mention player to its most probable strategy."""
    player = game.players[player_index]
    if player.kind != "mention":
        raise ValueError(f"player {player_index} is not a mention")
    x = game.X[player_index]
    entries = []
    for slot, gid in enumerate(player.strategy_gids):
        strategy = game.strategies[gid]
        entries.append((strategy.qid or NIL, strategy.is_nil, float(x[slot])))
    qid, prob = _pick(entries)
    return LinkDecision(mention_id=player.name, predicted=qid, score=prob)


def select_link_static(candidate_set, nil_enabled: bool = False,
                       nil_score: float | None = None) -> LinkDecision:
    """Similarity-only variant: argmax over surviving retrieval scores.

    With the NIL pseudo-candidate enabled it competes at ``nil_score``
    (losing ties), mirroring the reserved strategy in the dynamic game.
    """
    survivors = candidate_set.survivors()
    filtered = candidate_set.filtered_count()
    mention_id = candidate_set.mention.mention_id
    if not survivors:
        if not nil_enabled:
            raise ValueError(
                f"mention {mention_id!r}: no surviving candidate and the NIL "
                "pseudo-candidate is disabled")
        return LinkDecision(mention_id=mention_id, predicted=NIL,
                            score=nil_score if nil_score is not None else 0.0,
                            filtered_count=filtered)
    entries = [(c.qid, False, c.score) for c in survivors]
    if nil_enabled and nil_score is not None:
        entries.append((NIL, True, nil_score))
    qid, score = _pick(entries)
    return LinkDecision(mention_id=mention_id, predicted=qid, score=score,
                        filtered_count=filtered)
