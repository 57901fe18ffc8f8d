import hashlib
import json
import logging
import os
import threading
from datetime import datetime

from peewee import SqliteDatabase, chunked

from torus_discretization.database_model import SweepResult, database_proxy
from torus_discretization.settings import cache_dir

CACHE_FILE = "results.sqlite"

# Rows written per insert statement
BATCH_SIZE = 100


def canonical_json(document):
    return json.dumps(document, sort_keys=True, separators=(",", ":"))


def content_hash(document):
    """
    Hex SHA-256 of the canonical JSON of a document; independent of key order and time.
    """
    return hashlib.sha256(canonical_json(document).encode("utf-8")).hexdigest()


def create_database(directory):
    if directory != ":memory:":
        os.makedirs(directory, exist_ok=True)
        directory = os.path.join(directory, CACHE_FILE)
    return SqliteDatabase(directory)


class ResultCache:
    """
    Sweep rows keyed by content hash, kept in SQLite.

    All access goes through one lock, since the model proxy is shared.
    """

    def __init__(self, directory=None, db_lock=None):
        self.directory = cache_dir() if directory is None else directory
        self.db_lock = threading.RLock() if db_lock is None else db_lock
        self.database = create_database(self.directory)
        with self._bound():
            self.database.create_tables([SweepResult], safe=True)
        logging.info("Using result cache in {}".format(self.directory))

    def _bound(self):
        return _BoundDatabase(self.database, self.db_lock)

    def lookup(self, key):
        """
        Gets a cached row.

        Args:
            key: the content hash of the row's inputs.
        Returns:
            dict: the stored row fields, or None on a miss.
        """
        with self._bound():
            record = SweepResult.get_or_none(SweepResult.key == key)
        if record is None:
            return None
        logging.info("Cache hit for k={} ({})".format(record.k, key[:12]))
        return json.loads(record.row_json)

    def store(self, entries):
        """
        Stores rows, replacing any with the same key.

        Args:
            entries (list[dict]): each with key, map_key, k, seed, analyses and row (a dict).
        """
        now = datetime.now()
        records = [
            {
                SweepResult.key: entry["key"],
                SweepResult.map_key: entry["map_key"],
                SweepResult.k: entry["k"],
                SweepResult.seed: entry["seed"],
                SweepResult.analyses: entry["analyses"],
                SweepResult.row_json: canonical_json(entry["row"]),
                SweepResult.created: now,
            }
            for entry in entries
        ]
        with self._bound():
            for batch in chunked(records, BATCH_SIZE):
                SweepResult.insert_many(batch).on_conflict_replace().execute()

    def count(self):
        with self._bound():
            return SweepResult.select().count()


class _BoundDatabase:
    """
    Holds the lock and points the model proxy at one database for the duration of a block.
    """

    def __init__(self, database, db_lock):
        self.database = database
        self.db_lock = db_lock

    def __enter__(self):
        self.db_lock.acquire()
        database_proxy.initialize(self.database)
        return self.database

    def __exit__(self, *exc_info):
        # Ensure no other cache writes to the wrong database
        database_proxy.initialize(None)
        self.db_lock.release()
        return False
