"""Greedy optimal sampling from a candidate pool.

At each step the candidate maximizing

    dist(f_L(w), span of already selected f_L) + span_weight * ||f_L(w) - f~_L(w)||

is chosen. Residuals against the growing orthonormal basis are maintained
incrementally for every candidate, so one step costs O(|P| q).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _backend

RANK_TOL = 1e-10


@dataclass
class CandidatePool:
    ids: list
    lf_outputs: np.ndarray
    surrogate_outputs: np.ndarray | None = None

    def __post_init__(self):
        self.lf_outputs = np.atleast_2d(np.asarray(self.lf_outputs, dtype=float))
        if self.lf_outputs.shape[0] == 0:
            raise ValueError("candidate pool is empty")
        if self.ids is None:
            self.ids = list(range(self.lf_outputs.shape[0]))
        self.ids = list(self.ids)
        if len(self.ids) != self.lf_outputs.shape[0]:
            raise ValueError("one identifier per candidate required")
        if self.surrogate_outputs is not None:
            self.surrogate_outputs = np.atleast_2d(np.asarray(self.surrogate_outputs, dtype=float))
            if self.surrogate_outputs.shape != self.lf_outputs.shape:
                raise ValueError("surrogate outputs must match the LF output shape")

    @property
    def q(self):
        return self.lf_outputs.shape[1]

    def __len__(self):
        return self.lf_outputs.shape[0]

    def losses(self):
        if self.surrogate_outputs is None:
            return np.zeros(len(self))
        return np.linalg.norm(self.lf_outputs - self.surrogate_outputs, axis=1)


@dataclass
class SelectionState:
    q: int
    selected: list = field(default_factory=list)
    basis: np.ndarray = None

    def __post_init__(self):
        if self.basis is None:
            self.basis = np.zeros((0, self.q))

    def add(self, index, v):
        """Record a selection and extend the basis by the orthonormalized ``v``."""
        self.selected.append(index)
        r = np.asarray(v, dtype=float).copy()
        for _ in range(2):  # twice is enough for modified Gram-Schmidt
            r -= self.basis.T @ (self.basis @ r)
        norm = np.linalg.norm(r)
        if norm >= RANK_TOL:
            self.basis = np.vstack([self.basis, r / norm])
        return norm


def distance_to_span(v, state):
    """Euclidean distance from ``v`` to the span stored in ``state``."""
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape[0] != state.q:
        raise ValueError(f"vector of length {v.shape[0]} but outputs have dimension {state.q}")
    r = v - state.basis.T @ (state.basis @ v)
    return float(_in_span_to_zero(np.linalg.norm(r)))


def _in_span_to_zero(dist):
    # residuals below the rank tolerance are roundoff; zero keeps ties index-ordered
    return np.where(np.asarray(dist) < RANK_TOL, 0.0, dist)


def _scores(pool, state, span_weight):
    dist = np.array([distance_to_span(v, state) for v in pool.lf_outputs])
    return dist + span_weight * pool.losses()


def _argmax_unselected(scores, selected):
    masked = np.array(scores, dtype=float)
    masked[list(selected)] = -np.inf
    if not np.isfinite(masked).any():
        raise ValueError("no unselected candidates remain")
    return int(np.argmax(masked))  # first maximum = lowest index


def select_next(pool, state, span_weight=None):
    """Identifier of the next candidate (ties go to the lowest pool index).

    ``state.selected`` holds pool indices; record a pick with
    ``state.add(pool.ids.index(w), pool.lf_outputs[...])``.
    """
    if span_weight is None:
        span_weight = 0.0 if pool.surrogate_outputs is None else 1.0
    if len(state.selected) >= len(pool):
        raise ValueError("no unselected candidates remain")
    return pool.ids[_argmax_unselected(_scores(pool, state, span_weight), state.selected)]


def greedy_select(pool, k, span_weight=None, return_scores=False):
    """Greedy ordering of ``k`` pool members; returns their identifiers."""
    if not 1 <= k <= len(pool):
        raise ValueError(f"k must lie in 1..{len(pool)}")
    if span_weight is None:
        span_weight = 0.0 if pool.surrogate_outputs is None else 1.0
    state = SelectionState(pool.q)
    R = np.ascontiguousarray(pool.lf_outputs, dtype=float).copy()
    dist = np.linalg.norm(R, axis=1)
    loss = span_weight * pool.losses()
    picked, scores = [], []
    for _ in range(k):
        s = _in_span_to_zero(dist) + loss
        i = _argmax_unselected(s, state.selected)
        picked.append(i)
        scores.append(float(s[i]))
        norm = state.add(i, pool.lf_outputs[i])
        if norm >= RANK_TOL:
            dist = _backend.kernels.deflate(R, state.basis[-1])
    ids = [pool.ids[i] for i in picked]
    return (ids, scores) if return_scores else ids
