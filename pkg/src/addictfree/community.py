"""Support community: posts, comments and connection suggestions grouping
people with a similar background (stage, addiction, vicinity, therapists).

Mutations go through the store with optimistic versioning, so concurrent
commenters retry instead of losing writes.
"""

from __future__ import annotations

import json
import uuid
from dataclasses import dataclass
from datetime import datetime
from typing import Optional, Sequence

from .domain import RecoveryStage, UserProfile
from .geo import haversine_m
from .store import NS_POSTS, NS_USERS, Store, VersionConflict

VICINITY_FULL_M = 50_000.0
VICINITY_ZERO_M = 500_000.0


class UnknownUser(LookupError):
    pass


class UnknownPost(LookupError):
    pass


class EmptyTitle(ValueError):
    pass


class EmptyBody(ValueError):
    pass


@dataclass(frozen=True)
class Comment:
    comment_id: str
    author: str
    body: str
    created_at: datetime

    def to_dict(self) -> dict:
        return {
            "comment_id": self.comment_id,
            "author": self.author,
            "body": self.body,
            "created_at": self.created_at.isoformat(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Comment":
        return cls(d["comment_id"], d["author"], d["body"], datetime.fromisoformat(d["created_at"]))


@dataclass(frozen=True)
class Post:
    post_id: str
    author: str
    title: str
    body: str
    created_at: datetime
    comments: tuple[Comment, ...] = ()

    def to_dict(self) -> dict:
        return {
            "post_id": self.post_id,
            "author": self.author,
            "title": self.title,
            "body": self.body,
            "created_at": self.created_at.isoformat(),
            "comments": [c.to_dict() for c in self.comments],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Post":
        return cls(
            post_id=d["post_id"],
            author=d["author"],
            title=d["title"],
            body=d["body"],
            created_at=datetime.fromisoformat(d["created_at"]),
            comments=tuple(Comment.from_dict(c) for c in d.get("comments", [])),
        )


@dataclass(frozen=True)
class ConnectionSuggestion:
    user_id: str
    candidate_id: str
    score: float
    basis: frozenset[str]

    def to_dict(self) -> dict:
        return {
            "user_id": self.user_id,
            "candidate_id": self.candidate_id,
            "score": self.score,
            "basis": sorted(self.basis),
        }


def vicinity(a: UserProfile, b: UserProfile) -> float:
    """1 within 50 km, linearly down to 0 at 500 km, 0 without home regions.
    Symmetric in its arguments."""
    if a.home_region is None or b.home_region is None:
        return 0.0
    d = haversine_m(a.home_region, b.home_region)
    if d <= VICINITY_FULL_M:
        return 1.0
    if d >= VICINITY_ZERO_M:
        return 0.0
    return (VICINITY_ZERO_M - d) / (VICINITY_ZERO_M - VICINITY_FULL_M)


def suggest_connections(
    user: UserProfile, all_users: Sequence[UserProfile], k: int
) -> list[ConnectionSuggestion]:
    """Top-k candidates scored 0.4 same stage + 0.3 shared addiction +
    0.2 vicinity + 0.1 therapist; descending, ties by candidate id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    suggestions = []
    for cand in all_users:
        if cand.user_id == user.user_id:
            continue
        basis = set()
        score = 0.0
        if cand.recovery_stage is user.recovery_stage:
            score += 0.4
            basis.add("same-stage")
        if user.addiction_kinds & cand.addiction_kinds:
            score += 0.3
            basis.add("same-addiction")
        v = vicinity(user, cand)
        if v > 0.0:
            score += 0.2 * v
            basis.add("vicinity")
        if cand.recovery_stage is RecoveryStage.THERAPIST:
            score += 0.1
            basis.add("therapist")
        suggestions.append(
            ConnectionSuggestion(user.user_id, cand.user_id, score, frozenset(basis))
        )
    suggestions.sort(key=lambda s: (-s.score, s.candidate_id))
    return suggestions[:k]


class CommunityBoard:
    """Post/comment operations over the shared store."""

    def __init__(self, store: Store):
        self._store = store

    def _require_user(self, user_id: str) -> None:
        if self._store.get(NS_USERS, user_id) is None:
            raise UnknownUser(user_id)

    def create_post(
        self,
        author: str,
        title: str,
        body: str,
        at: datetime,
        post_id: Optional[str] = None,
    ) -> Post:
        if not title.strip():
            raise EmptyTitle("post title must be non-empty")
        if not body.strip():
            raise EmptyBody("post body must be non-empty")
        self._require_user(author)
        post = Post(
            post_id=post_id or uuid.uuid4().hex[:12],
            author=author,
            title=title,
            body=body,
            created_at=at,
        )
        self._store.put(NS_POSTS, post.post_id, json.dumps(post.to_dict()).encode("utf-8"))
        return post

    def get_post(self, post_id: str) -> Post:
        entry = self._store.get(NS_POSTS, post_id)
        if entry is None:
            raise UnknownPost(post_id)
        return Post.from_dict(json.loads(entry[0]))

    def list_feed(self) -> list[Post]:
        posts = [Post.from_dict(json.loads(rec.value)) for rec in self._store.scan(NS_POSTS)]
        posts.sort(key=lambda p: (p.created_at, p.post_id))
        return posts

    def add_comment(
        self,
        post_id: str,
        author: str,
        body: str,
        at: datetime,
        comment_id: Optional[str] = None,
    ) -> Comment:
        """Append a comment, retrying on concurrent edits of the same post."""
        if not body.strip():
            raise EmptyBody("comment body must be non-empty")
        self._require_user(author)
        comment = Comment(
            comment_id=comment_id or uuid.uuid4().hex[:12],
            author=author,
            body=body,
            created_at=at,
        )
        while True:
            entry = self._store.get(NS_POSTS, post_id)
            if entry is None:
                raise UnknownPost(post_id)
            raw, version = entry
            post = Post.from_dict(json.loads(raw))
            comments = sorted(post.comments + (comment,), key=lambda c: (c.created_at, c.comment_id))
            updated = Post(
                post_id=post.post_id,
                author=post.author,
                title=post.title,
                body=post.body,
                created_at=post.created_at,
                comments=tuple(comments),
            )
            try:
                self._store.put(
                    NS_POSTS,
                    post_id,
                    json.dumps(updated.to_dict()).encode("utf-8"),
                    expected_version=version,
                )
                return comment
            except VersionConflict:
                continue
