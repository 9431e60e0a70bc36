"""HTTP facade: search, click tracking, and experiment reports.

The service owns three pieces of state: the read-only endorsement index,
an in-memory table of recent search sessions (so clicks can be validated
against what was actually shown), and an append-only click-log CSV that
the report endpoint replays. Every search impression is logged
immediately; every accepted click appends one more line. Reports are
therefore a pure function of the log file and survive restarts.

The click-log path comes from, in order: an explicit argument, the
ENDORSEMENT_RANK_LOG environment variable, then ``clicks.csv`` in the
working directory.
"""

from __future__ import annotations

import os
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from fastapi import Cookie, FastAPI, HTTPException, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .corpus import EndorsementIndex, endorsement_profile
from .experiment import (
    ExperimentConfig,
    SessionRecord,
    append_session,
    assign_variant,
    fnv1a64,
    read_click_log,
    summarize,
)
from .ranking import Query, RankerTag, rank

DEFAULT_LOG_PATH = "clicks.csv"
LOG_ENV_VAR = "ENDORSEMENT_RANK_LOG"

_USER_COOKIE = "endorsement_uid"
_PROFILE_TOP_K = 5


def resolve_log_path(explicit: str | Path | None = None) -> Path:
    """Explicit path, else $ENDORSEMENT_RANK_LOG, else ./clicks.csv."""
    if explicit:
        return Path(explicit)
    return Path(os.environ.get(LOG_ENV_VAR) or DEFAULT_LOG_PATH)


@dataclass
class _Session:
    user_id: str
    variant: str
    query: tuple[int, ...]
    shown: tuple[int, ...]
    timestamp: str
    clicked: set[int] = field(default_factory=set)


class ClickBody(BaseModel):
    session: str
    destination: int
    user: str | None = None


def create_app(
    index: EndorsementIndex,
    experiment: ExperimentConfig | None = None,
    *,
    page_size: int = 10,
    default_ranker: RankerTag = RankerTag.NAIVE_BAYES,
    log_path: str | Path | None = None,
    lenient: bool = False,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    """Build the FastAPI application.

    ``experiment`` turns on hash bucketing; without it all traffic uses
    ``default_ranker`` under the variant name ``default``. ``lenient``
    makes search drop unknown activity tokens instead of rejecting the
    request. ``ui_dir``, if given, is served at the web root.

    The session table grows with traffic and is kept in memory only;
    restarting the service forgets sessions (clicks for them are
    rejected) but never loses logged impressions.
    """
    log_file = resolve_log_path(log_path)
    sessions: dict[str, _Session] = {}
    lock = threading.Lock()
    app = FastAPI(title="endorsement-rank", version="0.1.0")

    def _now() -> str:
        return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")

    def _resolve_activities(raw: str) -> list[int]:
        ids: list[int] = []
        for token in raw.split(","):
            token = token.strip()
            if not token:
                continue
            if token.lstrip("-").isdigit():
                activity_id = int(token)
                if not 0 <= activity_id < index.n_activities:
                    if lenient:
                        continue
                    raise HTTPException(400, f"activity id {activity_id} out of range")
                ids.append(activity_id)
                continue
            resolved = index.vocabulary.resolve(token)
            if resolved is None:
                if lenient:
                    continue
                # unknown names are missing resources; malformed ids above
                # and empty queries below are caller errors (400)
                raise HTTPException(404, f"unknown activity {token!r}")
            ids.append(resolved)
        return ids

    @app.get("/api/health")
    def health() -> dict:
        return {
            "status": "ok",
            "destinations": index.n_destinations,
            "activities": index.n_activities,
            "alpha": index.alpha,
            "source_digest": index.source_digest,
            "experiment": experiment.name if experiment else None,
        }

    @app.get("/api/activities")
    def activities() -> dict:
        return {
            "activities": [
                {"id": i, "name": name} for i, name in enumerate(index.vocabulary.names)
            ]
        }

    @app.get("/api/search")
    def search(
        response: Response,
        activities: str | None = None,
        user: str | None = None,
        limit: int | None = None,
        ranker: str | None = None,
        uid_cookie: str | None = Cookie(default=None, alias=_USER_COOKIE),
    ) -> dict:
        if not activities or not activities.strip(", "):
            raise HTTPException(400, "activities parameter is required")
        query_ids = _resolve_activities(activities)
        if not query_ids:
            raise HTTPException(400, "no valid activities in query")
        if limit is None:
            limit = page_size
        if limit < 1:
            raise HTTPException(400, "limit must be at least 1")
        user_id = (user or "").strip() or uid_cookie or uuid.uuid4().hex
        if ranker is not None:
            try:
                tag = RankerTag(ranker)
            except ValueError:
                raise HTTPException(400, f"unknown ranker {ranker!r}") from None
            variant_name = f"forced:{tag.value}"
        elif experiment is not None:
            variant = assign_variant(user_id, experiment)
            tag = variant.ranker
            variant_name = variant.name
        else:
            tag = default_ranker
            variant_name = "default"
        session_id = uuid.uuid4().hex
        seed = fnv1a64(session_id.encode("utf-8")) % (2**63)
        query = Query.of(query_ids, index.n_activities)
        ranked = rank(index, query, tag, seed=seed)
        shown = tuple(ranked.destination_ids()[:limit])
        scores = dict(ranked.entries)
        timestamp = _now()
        record = SessionRecord(
            user_id=user_id,
            variant=variant_name,
            query=query.activities,
            shown=shown,
            clicked=(),
            timestamp=timestamp,
        )
        with lock:
            sessions[session_id] = _Session(user_id, variant_name, query.activities, shown, timestamp)
            append_session(record, log_file)
        results = []
        for d in shown:
            profile = endorsement_profile(index, d, top_k=_PROFILE_TOP_K)
            dest = index.destinations.destinations[d]
            results.append(
                {
                    "destination_id": d,
                    "name": dest.name,
                    "country_code": dest.country_code,
                    "score": scores[d],
                    "top_activities": [
                        {
                            "activity_id": e,
                            "name": index.vocabulary.names[e],
                            "share": share,
                        }
                        for e, share in profile
                    ],
                }
            )
        response.set_cookie(_USER_COOKIE, user_id, samesite="lax")
        return {
            "session": session_id,
            "user": user_id,
            "variant": variant_name,
            "ranker": tag.value,
            "query": list(query.activities),
            "results": results,
        }

    @app.post("/api/click")
    def click(body: ClickBody) -> dict:
        with lock:
            session = sessions.get(body.session)
            if session is None:
                raise HTTPException(404, "unknown or expired session")
            if body.destination not in session.shown:
                raise HTTPException(409, "destination was not shown in this session")
            if body.destination in session.clicked:
                return {"status": "duplicate"}
            session.clicked.add(body.destination)
            record = SessionRecord(
                user_id=session.user_id,
                variant=session.variant,
                query=session.query,
                shown=session.shown,
                clicked=(body.destination,),
                timestamp=_now(),
            )
            append_session(record, log_file)
        return {"status": "ok"}

    @app.get("/api/experiments/{name}/report")
    def report(name: str, unit: str = "user", level: float = 0.90) -> dict:
        if experiment is None or name != experiment.name:
            raise HTTPException(404, f"unknown experiment {name!r}")
        if unit not in ("user", "session"):
            raise HTTPException(400, "unit must be 'user' or 'session'")
        if not 0 < level < 1:
            raise HTTPException(400, "level must be in (0, 1)")
        if log_file.exists() and log_file.stat().st_size > 0:
            records = read_click_log(log_file)
        else:
            records = ()
        return summarize(records, experiment, level=level, unit=unit).to_dict()

    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
