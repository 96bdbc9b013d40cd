"""Content-addressed report cache backed by SQLite."""

import sqlite3
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from src.logger import get_logger
from src.models import CacheConfig, ReportRecord

logger = get_logger(__name__)


class ReportCache:
    """Store finished reports keyed by job hash and replay them byte for byte."""

    def __init__(self, config: Optional[CacheConfig] = None):
        """
        Initialize the cache with configuration.

        Args:
            config: CacheConfig instance. If None, uses defaults.
        """
        self.config = config or CacheConfig()
        self.db_path = self.config.db_path
        self.init_database()

    def _connect(self) -> sqlite3.Connection:
        return sqlite3.connect(self.db_path, timeout=self.config.timeout)

    def init_database(self):
        """Initialize database with the reports table."""
        Path(self.config.cache_dir).mkdir(parents=True, exist_ok=True)
        conn = None
        try:
            conn = self._connect()
            conn.execute('''
                CREATE TABLE IF NOT EXISTS reports (
                    job_hash TEXT PRIMARY KEY,
                    operation TEXT NOT NULL,
                    payload TEXT NOT NULL,
                    stored_at DATETIME DEFAULT CURRENT_TIMESTAMP
                )
            ''')
            conn.commit()
            logger.debug(f"Report cache initialized at {self.db_path}")
        except sqlite3.Error as e:
            logger.error(f"Error initializing report cache: {e}")
            raise
        finally:
            if conn is not None:
                conn.close()

    def store(self, record: ReportRecord, payload: Optional[str] = None) -> str:
        """
        Insert or replace a report; the transaction commits atomically.

        Args:
            record: finished report
            payload: exact JSON text to replay. If None, uses record.model_dump_json()

        Returns:
            job hash
        """
        payload = payload if payload is not None else record.model_dump_json()
        conn = None
        try:
            conn = self._connect()
            with conn:
                conn.execute(
                    'INSERT OR REPLACE INTO reports (job_hash, operation, payload) VALUES (?, ?, ?)',
                    (record.job_hash, record.operation.value, payload)
                )
            logger.info(f"Report {record.job_hash[:12]} cached")
            return record.job_hash
        except sqlite3.Error as e:
            logger.error(f"Error caching report {record.job_hash[:12]}: {e}")
            raise
        finally:
            if conn is not None:
                conn.close()

    def lookup_payload(self, job_hash: str) -> Optional[str]:
        """Raw JSON text stored for job_hash, or None."""
        conn = None
        try:
            conn = self._connect()
            row = conn.execute('SELECT payload FROM reports WHERE job_hash = ?', (job_hash,)).fetchone()
            return row[0] if row else None
        except sqlite3.Error as e:
            logger.warning(f"Report cache unreadable, treating {job_hash[:12]} as a miss: {e}")
            return None
        finally:
            if conn is not None:
                conn.close()

    def lookup(self, job_hash: str) -> Optional[ReportRecord]:
        """Cached report for job_hash; a corrupted entry counts as a miss."""
        payload = self.lookup_payload(job_hash)
        if payload is None:
            logger.info(f"Cache miss for {job_hash[:12]}")
            return None
        try:
            record = ReportRecord.model_validate_json(payload)
        except ValidationError as e:
            logger.warning(f"Corrupted cache entry {job_hash[:12]} ignored: {e.error_count()} error(s)")
            return None
        if record.job_hash != job_hash:
            logger.warning(f"Cache entry {job_hash[:12]} holds report {record.job_hash[:12]}; ignored")
            return None
        logger.info(f"Cache hit for {job_hash[:12]}")
        return record

    def all_hashes(self) -> List[str]:
        conn = None
        try:
            conn = self._connect()
            return [row[0] for row in conn.execute('SELECT job_hash FROM reports ORDER BY stored_at')]
        finally:
            if conn is not None:
                conn.close()


def cache_lookup(job_hash: str, cache: Optional[ReportCache] = None) -> Optional[ReportRecord]:
    """Module-level convenience around ReportCache.lookup with the default configuration."""
    return (cache or ReportCache()).lookup(job_hash)
