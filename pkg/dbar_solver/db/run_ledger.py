"""Run ledger: one SQLite row per solve/verify/decompose run.

Rows are keyed by what went in (config digest) and what came out (report
digest), so a deterministic rerun lands on the row it already has.

Dependencies: none (uses stdlib sqlite3).
"""
import hashlib
import json
import os
import sqlite3
from typing import Dict, List, Optional

from ..settings import LEDGER_PATH


def get_conn(db_path: str = LEDGER_PATH) -> sqlite3.Connection:
    parent = os.path.dirname(db_path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    return sqlite3.connect(db_path)


def ensure_table(db_path: str = LEDGER_PATH) -> None:
    conn = get_conn(db_path)
    cur = conn.cursor()
    cur.execute('''
    CREATE TABLE IF NOT EXISTS runs (
        id INTEGER PRIMARY KEY AUTOINCREMENT,
        command TEXT NOT NULL,
        config_digest TEXT NOT NULL,
        report_digest TEXT NOT NULL,
        passed INTEGER,
        summary TEXT,
        created_date TIMESTAMP DEFAULT CURRENT_TIMESTAMP
    )
    ''')
    conn.commit()
    conn.close()


def digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _make_json_safe(obj):
    """Keep only the JSON-serialisable entries of a summary dict."""
    if isinstance(obj, dict):
        safe = {}
        for k, v in obj.items():
            try:
                json.dumps(v)
                safe[k] = v
            except (TypeError, ValueError):
                pass
        return safe
    return obj


def add_run_entry(
    command: str,
    config_digest: str,
    report_digest: str,
    passed: Optional[bool] = None,
    summary: Optional[Dict] = None,
    db_path: str = LEDGER_PATH,
) -> int:
    """Insert a run and return its row id.

    An identical (command, config, report) triple returns the existing id.
    """
    ensure_table(db_path)
    conn = get_conn(db_path)
    cur = conn.cursor()
    cur.execute(
        "SELECT id FROM runs WHERE command = ? AND config_digest = ? AND report_digest = ? LIMIT 1",
        (command, config_digest, report_digest),
    )
    existing = cur.fetchone()
    if existing:
        conn.close()
        return existing[0]

    cur.execute(
        "INSERT INTO runs (command, config_digest, report_digest, passed, summary) VALUES (?, ?, ?, ?, ?)",
        (
            command,
            config_digest,
            report_digest,
            None if passed is None else int(bool(passed)),
            json.dumps(_make_json_safe(summary or {}), sort_keys=True),
        ),
    )
    conn.commit()
    rowid = cur.lastrowid
    conn.close()
    return rowid


def _rows(cur: sqlite3.Cursor) -> List[Dict]:
    cols = [d[0] for d in cur.description] if cur.description else []
    out = []
    for row in cur.fetchall():
        entry = dict(zip(cols, row))
        if entry.get("summary"):
            entry["summary"] = json.loads(entry["summary"])
        out.append(entry)
    return out


def list_runs(command: Optional[str] = None, limit: int = 50, db_path: str = LEDGER_PATH) -> List[Dict]:
    ensure_table(db_path)
    conn = get_conn(db_path)
    cur = conn.cursor()
    if command:
        cur.execute("SELECT * FROM runs WHERE command = ? ORDER BY id DESC LIMIT ?", (command, limit))
    else:
        cur.execute("SELECT * FROM runs ORDER BY id DESC LIMIT ?", (limit,))
    rows = _rows(cur)
    conn.close()
    return rows


def find_by_digest(config_digest: str, db_path: str = LEDGER_PATH) -> List[Dict]:
    ensure_table(db_path)
    conn = get_conn(db_path)
    cur = conn.cursor()
    cur.execute("SELECT * FROM runs WHERE config_digest = ? ORDER BY id", (config_digest,))
    rows = _rows(cur)
    conn.close()
    return rows


def get_duplicate_count(db_path: str = LEDGER_PATH) -> int:
    """Rows beyond the first per (command, config digest)."""
    ensure_table(db_path)
    conn = get_conn(db_path)
    cur = conn.cursor()
    cur.execute("""
        SELECT COUNT(*) - COUNT(DISTINCT command || ':' || config_digest)
        FROM runs
    """)
    dup_count = cur.fetchone()[0]
    conn.close()
    return dup_count


def remove_duplicates(db_path: str = LEDGER_PATH) -> int:
    """Keep the lowest id per (command, config digest); returns rows deleted."""
    ensure_table(db_path)
    conn = get_conn(db_path)
    cur = conn.cursor()
    cur.execute("""
        DELETE FROM runs
        WHERE id NOT IN (
            SELECT MIN(id)
            FROM runs
            GROUP BY command, config_digest
        )
    """)
    deleted_count = cur.rowcount
    conn.commit()
    conn.close()
    return deleted_count
