"""Membership oracles and the prompt/answer plumbing shared with the remote one.

An oracle answers two question shapes: "does this candidate belong to the
cluster these representatives describe?" and "should these two clusters
merge?".  Answers are Yes, No, or Unknown; everything downstream treats
Unknown as retry-then-No.
"""

from __future__ import annotations

import hashlib
import re
from abc import ABC, abstractmethod
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Mapping

import numpy as np

from .exceptions import InputError
from .graph import DEFAULT_BETA, compute_edge_weight

__all__ = [
    "OracleDecision",
    "MembershipQuery",
    "MergeQuery",
    "MembershipOracle",
    "ExactOracle",
    "EnsembleNoisyOracle",
    "EmbeddingOracle",
    "PromptTemplate",
    "DEFAULT_TEMPLATE",
    "build_membership_prompt",
    "build_merge_prompt",
    "parse_conclusion",
]


class OracleDecision(Enum):
    YES = "yes"
    NO = "no"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class MembershipQuery:
    """Candidate node assessed against a cluster's representative nodes."""

    representatives: tuple[str, ...]
    candidate: str
    aspect: str = ""

    def __post_init__(self):
        if not self.representatives:
            raise InputError("membership query needs at least one representative")
        if self.candidate in self.representatives:
            raise InputError(f"candidate {self.candidate!r} is already a representative")


@dataclass(frozen=True)
class MergeQuery:
    """Two clusters, each described by its representative nodes."""

    representatives_a: tuple[str, ...]
    representatives_b: tuple[str, ...]
    aspect: str = ""

    def __post_init__(self):
        if not self.representatives_a or not self.representatives_b:
            raise InputError("merge query needs representatives on both sides")
        if set(self.representatives_a) & set(self.representatives_b):
            raise InputError("merge query sides must be disjoint")


class MembershipOracle(ABC):
    """Interface every oracle implements; decisions must be deterministic
    for a fixed configuration and query."""

    descriptor: str = "oracle"

    @abstractmethod
    def assess_membership(self, query: MembershipQuery) -> OracleDecision: ...

    @abstractmethod
    def assess_merge(self, query: MergeQuery) -> OracleDecision: ...


def _majority_label(labels: Mapping[str, str], nodes: tuple[str, ...]) -> str:
    votes = Counter(_label_of(labels, n) for n in nodes)
    top = max(votes.values())
    # Ties go to the lexicographically smallest class.
    return min(lbl for lbl, c in votes.items() if c == top)


def _label_of(labels: Mapping[str, str], node: str) -> str:
    try:
        return labels[node]
    except KeyError:
        raise InputError(f"node {node!r} has no label") from None


class ExactOracle(MembershipOracle):
    """Ground-truth oracle over a node -> class-label mapping.

    Membership is Yes iff the candidate's label equals the plurality label of
    the representatives; a merge is Yes iff the two plurality labels agree.
    """

    descriptor = "exact"

    def __init__(self, labels: Mapping[str, str]):
        self._labels = dict(labels)

    def assess_membership(self, query: MembershipQuery) -> OracleDecision:
        majority = _majority_label(self._labels, query.representatives)
        same = _label_of(self._labels, query.candidate) == majority
        return OracleDecision.YES if same else OracleDecision.NO

    def assess_merge(self, query: MergeQuery) -> OracleDecision:
        same = _majority_label(self._labels, query.representatives_a) == _majority_label(
            self._labels, query.representatives_b
        )
        return OracleDecision.YES if same else OracleDecision.NO


class EnsembleNoisyOracle(MembershipOracle):
    """Label oracle whose per-representative comparisons are independently
    flipped with probability ``flip_probability``.

    Each representative contributes one same-class vote that may be flipped;
    the decision is the majority of votes (exact ties are No).  Because flips
    are per pair, a larger representative set gives the majority more chances
    to outvote the noise, which is what makes accuracy improve with k.
    The flip stream is a pure function of (seed, id, id), so identical queries
    always see identical flips.
    """

    def __init__(self, labels: Mapping[str, str], flip_probability: float, seed: int):
        if not 0.0 <= flip_probability <= 1.0:
            raise InputError(f"flip probability must lie in [0, 1], got {flip_probability!r}")
        self._labels = dict(labels)
        self.flip_probability = float(flip_probability)
        self.seed = int(seed)
        self.descriptor = f"noisy(p={self.flip_probability},seed={self.seed})"

    def _flip(self, u: str, v: str) -> bool:
        digest = hashlib.sha256(f"{self.seed}|{u}|{v}".encode()).digest()
        return int.from_bytes(digest[:8], "big") / 2.0**64 < self.flip_probability

    def _vote(self, u: str, v: str, key: tuple[str, str]) -> bool:
        same = _label_of(self._labels, u) == _label_of(self._labels, v)
        return same ^ self._flip(*key)

    def assess_membership(self, query: MembershipQuery) -> OracleDecision:
        votes = [
            self._vote(rep, query.candidate, (rep, query.candidate))
            for rep in query.representatives
        ]
        yes = sum(votes)
        return OracleDecision.YES if yes * 2 > len(votes) else OracleDecision.NO

    def assess_merge(self, query: MergeQuery) -> OracleDecision:
        votes = []
        for ra in query.representatives_a:
            for rb in query.representatives_b:
                # Canonical key order keeps the merge answer symmetric in its sides.
                key = (ra, rb) if ra < rb else (rb, ra)
                votes.append(self._vote(ra, rb, key))
        yes = sum(votes)
        return OracleDecision.YES if yes * 2 > len(votes) else OracleDecision.NO


class EmbeddingOracle(MembershipOracle):
    """Similarity-only oracle: Yes when the mean edge weight between the
    candidate (or opposite side) and the representatives reaches a threshold.
    Never answers Unknown."""

    def __init__(
        self,
        embeddings: Mapping[str, np.ndarray],
        threshold: float,
        beta: float = DEFAULT_BETA,
    ):
        if not 0.0 <= threshold <= 1.0:
            raise InputError(f"threshold must lie in [0, 1], got {threshold!r}")
        self._vectors = dict(embeddings)
        self.threshold = float(threshold)
        self.beta = float(beta)
        self.descriptor = f"embedding(threshold={self.threshold})"

    def _vector(self, node: str) -> np.ndarray:
        try:
            return self._vectors[node]
        except KeyError:
            raise InputError(f"node {node!r} has no embedding") from None

    def assess_membership(self, query: MembershipQuery) -> OracleDecision:
        cand = self._vector(query.candidate)
        weights = [
            compute_edge_weight(self._vector(rep), cand, self.beta)
            for rep in query.representatives
        ]
        mean = sum(weights) / len(weights)
        return OracleDecision.YES if mean >= self.threshold else OracleDecision.NO

    def assess_merge(self, query: MergeQuery) -> OracleDecision:
        weights = [
            compute_edge_weight(self._vector(ra), self._vector(rb), self.beta)
            for ra in query.representatives_a
            for rb in query.representatives_b
        ]
        mean = sum(weights) / len(weights)
        return OracleDecision.YES if mean >= self.threshold else OracleDecision.NO


# ---------------------------------------------------------------------------
# Prompt construction and answer parsing for chat-based oracles.

_TAG_INSTRUCTION = "Respond with <CONCLUSION> YES </CONCLUSION> or <CONCLUSION> NO </CONCLUSION>."


@dataclass(frozen=True)
class PromptTemplate:
    """Wording knobs for the two question shapes.

    ``aspect_phrase`` overrides the query aspect verbatim (e.g. "color
    similarity" when the aspect is "color"); ``focus_clause`` is an optional
    extra sentence (e.g. "Ignore the suits and focus only on rank comparison.").
    """

    item_noun: str = "image"
    aspect_phrase: str | None = None
    focus_clause: str | None = None

    def _aspect(self, aspect: str) -> str:
        return self.aspect_phrase if self.aspect_phrase is not None else aspect

    def _focus(self) -> str:
        return f" {self.focus_clause}" if self.focus_clause else ""


DEFAULT_TEMPLATE = PromptTemplate()


def build_membership_prompt(
    query: MembershipQuery, template: PromptTemplate = DEFAULT_TEMPLATE
) -> tuple[str, list[str]]:
    """Instruction text plus ordered attachment ids (representatives, then candidate)."""
    aspect = template._aspect(query.aspect)
    if not aspect:
        raise InputError("cannot build a prompt for an empty aspect")
    text = (
        f"Determine whether the candidate {template.item_noun} should be included in the "
        f"existing {template.item_noun} cluster based on {aspect}.{template._focus()} "
        f"{_TAG_INSTRUCTION}"
    )
    return text, [*query.representatives, query.candidate]


def build_merge_prompt(
    query: MergeQuery, template: PromptTemplate = DEFAULT_TEMPLATE
) -> tuple[str, list[str]]:
    """Instruction text plus ordered attachment ids (side a, then side b)."""
    aspect = template._aspect(query.aspect)
    if not aspect:
        raise InputError("cannot build a prompt for an empty aspect")
    text = (
        f"Determine whether the two {template.item_noun} clusters should be merged based on "
        f"{aspect}.{template._focus()} {_TAG_INSTRUCTION}"
    )
    return text, [*query.representatives_a, *query.representatives_b]


_CONCLUSION_RE = re.compile(r"<CONCLUSION>(.*?)</CONCLUSION>", re.DOTALL)


def parse_conclusion(text: str) -> OracleDecision:
    """Map a raw model reply to a decision; total, never raises.

    Only the first <CONCLUSION> span counts.  "yes" is checked before "no"
    (case-insensitively) inside the span; anything else, including a missing
    span, is Unknown.
    """
    if not isinstance(text, str):
        return OracleDecision.UNKNOWN
    match = _CONCLUSION_RE.search(text)
    if match is None:
        return OracleDecision.UNKNOWN
    conclusion = match.group(1).strip().lower()
    if "yes" in conclusion:
        return OracleDecision.YES
    if "no" in conclusion:
        return OracleDecision.NO
    return OracleDecision.UNKNOWN
