"""
db/session.py – Engine factory + Session helper.

One Engine per database URL, cached. An empty path means an in-memory
SQLite database shared across threads (StaticPool).
"""
from contextlib import contextmanager
from pathlib import Path
from typing import Generator

from sqlalchemy import create_engine, event
from sqlalchemy.engine import Engine
from sqlalchemy.orm import Session, sessionmaker
from sqlalchemy.pool import StaticPool

from .models import Base


# ── Engine cache (1 engine / database) ────────────────────────────────────────

_engines: dict[str, Engine] = {}
_session_factories: dict[str, sessionmaker] = {}


def _get_engine(db_path: str) -> Engine:
    if db_path not in _engines:
        if db_path:
            Path(db_path).parent.mkdir(parents=True, exist_ok=True)
            engine = create_engine(
                f"sqlite:///{db_path}",
                connect_args={"check_same_thread": False},
                echo=False,
            )

            # WAL so concurrent readers don't block the single writer
            @event.listens_for(engine, "connect")
            def set_wal(conn, _):
                conn.execute("PRAGMA journal_mode=WAL")
                conn.execute("PRAGMA synchronous=NORMAL")
        else:
            engine = create_engine(
                "sqlite://",
                connect_args={"check_same_thread": False},
                poolclass=StaticPool,
                echo=False,
            )

        Base.metadata.create_all(engine)
        _engines[db_path] = engine
        _session_factories[db_path] = sessionmaker(bind=engine, expire_on_commit=False)
    return _engines[db_path]


def get_session_factory(db_path: str) -> sessionmaker:
    _get_engine(db_path)
    return _session_factories[db_path]


@contextmanager
def db_session(db_path: str) -> Generator[Session, None, None]:
    """Session that commits on success, rolls back on error, always closes."""
    factory = get_session_factory(db_path)
    session: Session = factory()
    try:
        yield session
        session.commit()
    except Exception:
        session.rollback()
        raise
    finally:
        session.close()
