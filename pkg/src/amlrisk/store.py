"""Embedded relational store: source tables, engineered features, labels, models.

A single SQLite file holds the four source tables (names and columns exactly
as the ingestion schema), the materialized feature tables for the three
engineering versions, the append-only analyst label events, and the model
registry. Feature engineering runs as set-based SQL inside the store and is
validated in tests against a straight-loop oracle.
"""
from __future__ import annotations

import hashlib
import json
import sqlite3
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import datagen
from .errors import (
    ConfigError,
    IntegrityError,
    NotFoundError,
    ParameterError,
    SchemaError,
)

V1_NAMES = (
    "wire_sent_cnt", "wire_sent_amt", "wire_recv_cnt", "wire_recv_amt",
    "wire_sent_intl_cnt", "wire_recv_intl_cnt",
    "emt_sent_cnt", "emt_sent_amt", "emt_recv_cnt", "emt_recv_amt",
    "cash_dep_cnt", "cash_dep_amt", "cash_wd_cnt", "cash_wd_amt",
)
V2_EXTRA_NAMES = (
    "wire_total_cnt", "wire_total_amt", "emt_total_cnt", "emt_total_amt",
    "cash_total_cnt", "cash_total_amt", "intl_total_cnt",
    "wire_balance", "emt_balance", "cash_balance",
)

NAN_BUCKET = "NAN"
MAX_DEFAULT_COUNTRIES = 20

_SCHEMA_DDL = """
CREATE TABLE IF NOT EXISTS kyc (
    name TEXT NOT NULL,
    gender TEXT NOT NULL,
    occupation TEXT NOT NULL,
    age INTEGER NOT NULL,
    tenur INTEGER NOT NULL,
    cust_id TEXT PRIMARY KEY,
    label INTEGER NOT NULL CHECK (label IN (0, 1))
);
CREATE TABLE IF NOT EXISTS cash_trxns (
    cust_id TEXT NOT NULL,
    amount INTEGER NOT NULL,
    type TEXT NOT NULL CHECK (type IN ('deposit', 'withdrawal')),
    txn_id TEXT PRIMARY KEY
);
CREATE TABLE IF NOT EXISTS emt_trxns (
    "id sender" TEXT NOT NULL,
    "id receiver" TEXT NOT NULL,
    "name sender" TEXT NOT NULL,
    "name receiver" TEXT NOT NULL,
    "emt message" TEXT NOT NULL,
    "emt value" REAL NOT NULL,
    txn_id TEXT PRIMARY KEY
);
CREATE TABLE IF NOT EXISTS wire_trxns (
    "id sender" TEXT NOT NULL,
    "id receiver" TEXT NOT NULL,
    "name sender" TEXT NOT NULL,
    "name receiver" TEXT NOT NULL,
    "wire value" REAL NOT NULL,
    "country sender" TEXT NOT NULL,
    "country receiver" TEXT NOT NULL,
    txn_id TEXT PRIMARY KEY
);
CREATE INDEX IF NOT EXISTS idx_cash_cust ON cash_trxns (cust_id);
CREATE INDEX IF NOT EXISTS idx_emt_sender ON emt_trxns ("id sender");
CREATE INDEX IF NOT EXISTS idx_emt_receiver ON emt_trxns ("id receiver");
CREATE INDEX IF NOT EXISTS idx_wire_sender ON wire_trxns ("id sender");
CREATE INDEX IF NOT EXISTS idx_wire_receiver ON wire_trxns ("id receiver");
CREATE TABLE IF NOT EXISTS label_events (
    event_id INTEGER PRIMARY KEY AUTOINCREMENT,
    cust_id TEXT NOT NULL REFERENCES kyc (cust_id),
    new_label INTEGER NOT NULL CHECK (new_label IN (0, 1)),
    source TEXT NOT NULL,
    timestamp REAL NOT NULL
);
CREATE TABLE IF NOT EXISTS model_registry (
    version INTEGER PRIMARY KEY AUTOINCREMENT,
    created_ts REAL NOT NULL,
    event_watermark INTEGER NOT NULL,
    data_fingerprint TEXT NOT NULL,
    metrics_json TEXT NOT NULL,
    artifact_json TEXT NOT NULL
);
"""


@dataclass(frozen=True)
class FeatureVersion:
    """Feature engineering version; v3 carries its country list."""
    kind: str
    country_list: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("v1", "v2", "v3"):
            raise ParameterError(f"unknown feature version '{self.kind}'")
        if self.kind == "v3" and self.country_list is not None:
            if len(self.country_list) == 0:
                raise ConfigError("v3 country_list must be non-empty")
            if len(set(self.country_list)) != len(self.country_list):
                raise ConfigError("v3 country_list must be duplicate-free")

    @property
    def table(self) -> str:
        return f"features_{self.kind}"


V1 = FeatureVersion("v1")
V2 = FeatureVersion("v2")


def v3(country_list=None) -> FeatureVersion:
    """V3 version; pass None to resolve countries from the store at build time."""
    return FeatureVersion("v3", tuple(country_list) if country_list is not None else None)


def feature_names(version: FeatureVersion) -> list[str]:
    """Stable ordered feature names: 14 (v1), 24 (v2), 24 + 2*(|C|+1) (v3)."""
    if version.kind == "v1":
        return list(V1_NAMES)
    if version.kind == "v2":
        return list(V1_NAMES + V2_EXTRA_NAMES)
    if version.country_list is None:
        raise ParameterError("v3 country list unresolved; build features first "
                             "or pass an explicit list")
    countries = list(version.country_list) + [NAN_BUCKET]
    return list(V1_NAMES + V2_EXTRA_NAMES) + \
        [f"wire_sent_cnt_{c}" for c in countries] + \
        [f"wire_recv_cnt_{c}" for c in countries]


@dataclass(frozen=True)
class FeatureTable:
    version: FeatureVersion
    names: tuple[str, ...]
    cust_ids: tuple[str, ...]
    values: np.ndarray  # one row per customer, ordered by cust_id

    def row(self, cust_id: str) -> dict[str, float]:
        i = self.cust_ids.index(cust_id)
        return dict(zip(self.names, self.values[i]))


@dataclass(frozen=True)
class DatasetProfile:
    gender_counts: dict
    top_occupations: list
    age_hist: dict
    tenur_hist: dict
    class_sizes: dict
    class_sizes_nonunique_names: dict

    @property
    def majority_fraction(self) -> float:
        total = sum(self.class_sizes.values())
        return max(self.class_sizes.values()) / total

    def to_dict(self) -> dict:
        return {
            "gender_counts": self.gender_counts,
            "top_occupations": self.top_occupations,
            "age_hist": self.age_hist,
            "tenur_hist": self.tenur_hist,
            "class_sizes": self.class_sizes,
            "class_sizes_nonunique_names": self.class_sizes_nonunique_names,
            "majority_fraction": self.majority_fraction,
        }


@dataclass
class Design:
    """Raw design data loaded from the store, ready for encoding."""
    cust_ids: tuple[str, ...]
    gender: np.ndarray
    occupation: np.ndarray
    age: np.ndarray
    tenur: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...] = ()
    features: np.ndarray | None = None

    @property
    def n(self) -> int:
        return len(self.cust_ids)

    def subset(self, idx) -> "Design":
        idx = np.asarray(idx, dtype=int)
        return Design(
            cust_ids=tuple(self.cust_ids[i] for i in idx),
            gender=self.gender[idx], occupation=self.occupation[idx],
            age=self.age[idx], tenur=self.tenur[idx], labels=self.labels[idx],
            feature_names=self.feature_names,
            features=self.features[idx] if self.features is not None else None)


class RelationalStore:
    """SQLite-backed store; safe for many readers and serialized writers."""

    def __init__(self, path=":memory:"):
        self.path = str(path)
        self._lock = threading.RLock()
        self._conn = sqlite3.connect(self.path, check_same_thread=False)
        self._conn.execute("PRAGMA foreign_keys = ON")
        with self._lock, self._conn:
            self._conn.executescript(_SCHEMA_DDL)

    def close(self) -> None:
        with self._lock:
            self._conn.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _query(self, sql, params=()):
        with self._lock:
            return self._conn.execute(sql, params).fetchall()

    def _one(self, sql, params=()):
        rows = self._query(sql, params)
        return rows[0] if rows else None

    # -- ingestion ---------------------------------------------------------

    def _insert_rows(self, table: str, columns: list[str], rows) -> None:
        cols = ", ".join(f'"{c}"' for c in columns)
        ph = ", ".join("?" for _ in columns)
        with self._lock, self._conn:
            try:
                self._conn.executemany(
                    f'INSERT INTO {table} ({cols}) VALUES ({ph})', rows)
            except sqlite3.IntegrityError as exc:
                raise IntegrityError(f"{table}: {exc}") from exc

    def row_count(self, table: str) -> int:
        return int(self._one(f"SELECT COUNT(*) FROM {table}")[0])

    def table_checksum(self, table: str) -> str:
        order = {"kyc": "cust_id", "cash_trxns": "txn_id",
                 "emt_trxns": "txn_id", "wire_trxns": "txn_id"}[table]
        digest = hashlib.sha256()
        for row in self._query(f"SELECT * FROM {table} ORDER BY {order}"):
            digest.update(repr(row).encode())
        return digest.hexdigest()

    def data_fingerprint(self) -> str:
        digest = hashlib.sha256()
        for table in ("kyc", "cash_trxns", "emt_trxns", "wire_trxns"):
            digest.update(self.table_checksum(table).encode())
        for cust_id, label in sorted(self.effective_labels().items()):
            digest.update(f"{cust_id}={label}".encode())
        return digest.hexdigest()

    # -- labels ------------------------------------------------------------

    def append_label_event(self, cust_id: str, new_label: int, source: str) -> int:
        if new_label not in (0, 1):
            raise ParameterError(f"label must be 0 or 1, got {new_label!r}")
        if self._one("SELECT 1 FROM kyc WHERE cust_id = ?", (cust_id,)) is None:
            raise NotFoundError(f"unknown cust_id '{cust_id}'")
        with self._lock, self._conn:
            cur = self._conn.execute(
                "INSERT INTO label_events (cust_id, new_label, source, timestamp) "
                "VALUES (?, ?, ?, ?)", (cust_id, int(new_label), source, time.time()))
            return int(cur.lastrowid)

    def label_events(self) -> list[tuple]:
        return self._query(
            "SELECT event_id, cust_id, new_label, source, timestamp "
            "FROM label_events ORDER BY event_id")

    def max_label_event_id(self) -> int:
        row = self._one("SELECT COALESCE(MAX(event_id), 0) FROM label_events")
        return int(row[0])

    def label_events_since(self, watermark: int) -> int:
        row = self._one(
            "SELECT COUNT(*) FROM label_events WHERE event_id > ?", (watermark,))
        return int(row[0])

    def effective_labels(self) -> dict[str, int]:
        """kyc.label overridden by the latest label event per customer."""
        labels = {cid: int(lab) for cid, lab in
                  self._query("SELECT cust_id, label FROM kyc")}
        for cid, lab in self._query(
                "SELECT cust_id, new_label FROM label_events ORDER BY event_id"):
            labels[cid] = int(lab)
        return labels

    # -- model registry ----------------------------------------------------

    def register_model(self, artifact_json: str, metrics_json: str,
                       data_fingerprint: str, created_ts: float,
                       event_watermark: int) -> int:
        with self._lock, self._conn:
            cur = self._conn.execute(
                "INSERT INTO model_registry (created_ts, event_watermark, "
                "data_fingerprint, metrics_json, artifact_json) "
                "VALUES (?, ?, ?, ?, ?)",
                (created_ts, event_watermark, data_fingerprint,
                 metrics_json, artifact_json))
            return int(cur.lastrowid)

    def latest_model(self):
        row = self._one(
            "SELECT version, created_ts, event_watermark, data_fingerprint, "
            "metrics_json, artifact_json FROM model_registry "
            "ORDER BY version DESC LIMIT 1")
        if row is None:
            return None
        return {"version": int(row[0]), "created_ts": float(row[1]),
                "event_watermark": int(row[2]), "data_fingerprint": row[3],
                "metrics_json": row[4], "artifact_json": row[5]}

    # -- feature engineering -----------------------------------------------

    def resolve_version(self, version: FeatureVersion) -> FeatureVersion:
        """Fill in the default v3 country list: observed countries by frequency."""
        if version.kind != "v3" or version.country_list is not None:
            return version
        rows = self._query(
            'SELECT country, SUM(cnt) FROM ('
            '  SELECT "country sender" AS country, COUNT(*) AS cnt '
            '    FROM wire_trxns GROUP BY 1'
            '  UNION ALL'
            '  SELECT "country receiver" AS country, COUNT(*) AS cnt '
            '    FROM wire_trxns GROUP BY 1) '
            'GROUP BY country ORDER BY SUM(cnt) DESC, country ASC LIMIT ?',
            (MAX_DEFAULT_COUNTRIES,))
        countries = tuple(r[0] for r in rows)
        if not countries:
            raise ParameterError("no wire transactions to derive a v3 country list")
        return FeatureVersion("v3", countries)

    def _feature_select_sql(self, version: FeatureVersion):
        intl = '"country sender" <> "country receiver"'
        params: list = []
        cols = [
            "COALESCE(ws.cnt, 0)", "COALESCE(ws.amt, 0)",
            "COALESCE(wr.cnt, 0)", "COALESCE(wr.amt, 0)",
            "COALESCE(ws.intl, 0)", "COALESCE(wr.intl, 0)",
            "COALESCE(es.cnt, 0)", "COALESCE(es.amt, 0)",
            "COALESCE(er.cnt, 0)", "COALESCE(er.amt, 0)",
            "COALESCE(cd.cnt, 0)", "COALESCE(cd.amt, 0)",
            "COALESCE(cw.cnt, 0)", "COALESCE(cw.amt, 0)",
        ]
        if version.kind in ("v2", "v3"):
            cols += [
                "COALESCE(ws.cnt, 0) + COALESCE(wr.cnt, 0)",
                "COALESCE(ws.amt, 0) + COALESCE(wr.amt, 0)",
                "COALESCE(es.cnt, 0) + COALESCE(er.cnt, 0)",
                "COALESCE(es.amt, 0) + COALESCE(er.amt, 0)",
                "COALESCE(cd.cnt, 0) + COALESCE(cw.cnt, 0)",
                "COALESCE(cd.amt, 0) + COALESCE(cw.amt, 0)",
                "COALESCE(ws.intl, 0) + COALESCE(wr.intl, 0)",
                "COALESCE(wr.amt, 0) - COALESCE(ws.amt, 0)",
                "COALESCE(er.amt, 0) - COALESCE(es.amt, 0)",
                "COALESCE(cd.amt, 0) - COALESCE(cw.amt, 0)",
            ]
        sent_country_cols = []
        recv_country_cols = []
        if version.kind == "v3":
            countries = list(version.country_list)
            for c in countries:
                sent_country_cols.append(
                    'SUM(CASE WHEN "country receiver" = ? THEN 1 ELSE 0 END)')
            sent_country_cols.append(
                'SUM(CASE WHEN "country receiver" NOT IN ({}) THEN 1 ELSE 0 END)'
                .format(", ".join("?" for _ in countries)))
            for c in countries:
                recv_country_cols.append(
                    'SUM(CASE WHEN "country sender" = ? THEN 1 ELSE 0 END)')
            recv_country_cols.append(
                'SUM(CASE WHEN "country sender" NOT IN ({}) THEN 1 ELSE 0 END)'
                .format(", ".join("?" for _ in countries)))
            n_extra = len(countries) + 1
            cols += [f"COALESCE(wsc.c{i}, 0)" for i in range(n_extra)]
            cols += [f"COALESCE(wrc.c{i}, 0)" for i in range(n_extra)]

        ctes = [
            f'ws AS (SELECT "id sender" AS cid, COUNT(*) AS cnt, '
            f'SUM("wire value") AS amt, SUM(CASE WHEN {intl} THEN 1 ELSE 0 END) '
            f'AS intl FROM wire_trxns GROUP BY "id sender")',
            f'wr AS (SELECT "id receiver" AS cid, COUNT(*) AS cnt, '
            f'SUM("wire value") AS amt, SUM(CASE WHEN {intl} THEN 1 ELSE 0 END) '
            f'AS intl FROM wire_trxns GROUP BY "id receiver")',
            'es AS (SELECT "id sender" AS cid, COUNT(*) AS cnt, '
            'SUM("emt value") AS amt FROM emt_trxns GROUP BY "id sender")',
            'er AS (SELECT "id receiver" AS cid, COUNT(*) AS cnt, '
            'SUM("emt value") AS amt FROM emt_trxns GROUP BY "id receiver")',
            "cd AS (SELECT cust_id AS cid, COUNT(*) AS cnt, SUM(amount) AS amt "
            "FROM cash_trxns WHERE type = 'deposit' GROUP BY cust_id)",
            "cw AS (SELECT cust_id AS cid, COUNT(*) AS cnt, SUM(amount) AS amt "
            "FROM cash_trxns WHERE type = 'withdrawal' GROUP BY cust_id)",
        ]
        joins = ["ws", "wr", "es", "er", "cd", "cw"]
        if version.kind == "v3":
            countries = list(version.country_list)
            sent_cols_sql = ", ".join(
                f"{expr} AS c{i}" for i, expr in enumerate(sent_country_cols))
            recv_cols_sql = ", ".join(
                f"{expr} AS c{i}" for i, expr in enumerate(recv_country_cols))
            ctes.append(f'wsc AS (SELECT "id sender" AS cid, {sent_cols_sql} '
                        f'FROM wire_trxns GROUP BY "id sender")')
            params.extend(countries + countries)
            ctes.append(f'wrc AS (SELECT "id receiver" AS cid, {recv_cols_sql} '
                        f'FROM wire_trxns GROUP BY "id receiver")')
            params.extend(countries + countries)
            joins += ["wsc", "wrc"]
        join_sql = " ".join(f"LEFT JOIN {j} ON {j}.cid = k.cust_id" for j in joins)
        select = (f"WITH {', '.join(ctes)} "
                  f"SELECT k.cust_id, {', '.join(cols)} FROM kyc k {join_sql}")
        return select, params

    def build_features(self, version: FeatureVersion) -> FeatureTable:
        """Materialize one feature table and return it (idempotent rebuild)."""
        version = self.resolve_version(version)
        names = feature_names(version)
        select, params = self._feature_select_sql(version)
        cols_ddl = ", ".join(f'"{name}" REAL NOT NULL' for name in names)
        with self._lock, self._conn:
            self._conn.execute(f"DROP TABLE IF EXISTS {version.table}")
            self._conn.execute(
                f"CREATE TABLE {version.table} (cust_id TEXT PRIMARY KEY, {cols_ddl})")
            self._conn.execute(
                f"INSERT INTO {version.table} {select} ORDER BY k.cust_id", params)
        return self.feature_table(version)

    def feature_table(self, version: FeatureVersion) -> FeatureTable:
        version = self.resolve_version(version)
        names = feature_names(version)
        rows = self._query(
            f"SELECT * FROM {version.table} ORDER BY cust_id")
        cust_ids = tuple(r[0] for r in rows)
        values = np.array([r[1:] for r in rows], dtype=float)
        if len(cust_ids) != self.row_count("kyc"):
            raise IntegrityError(
                f"{version.table} has {len(cust_ids)} rows for "
                f"{self.row_count('kyc')} customers")
        return FeatureTable(version=version, names=tuple(names),
                            cust_ids=cust_ids, values=values)

    def customer_feature_row(self, cust_id: str, version: FeatureVersion) -> np.ndarray:
        """One customer's engineered features computed from current raw tables."""
        version = self.resolve_version(version)
        if self._one("SELECT 1 FROM kyc WHERE cust_id = ?", (cust_id,)) is None:
            raise NotFoundError(f"unknown cust_id '{cust_id}'")
        select, params = self._feature_select_sql(version)
        row = self._one(f"{select} WHERE k.cust_id = ?", params + [cust_id])
        return np.asarray(row[1:], dtype=float)

    def customer_kyc(self, cust_id: str) -> dict:
        row = self._one(
            "SELECT name, gender, occupation, age, tenur, cust_id, label "
            "FROM kyc WHERE cust_id = ?", (cust_id,))
        if row is None:
            raise NotFoundError(f"unknown cust_id '{cust_id}'")
        return dict(zip(datagen.KYC_COLUMNS, row))

    # -- design loading ------------------------------------------------------

    def load_design(self, version: FeatureVersion | None = None) -> Design:
        """KYC columns plus engineered features (built on demand), with
        effective labels, ordered by cust_id."""
        rows = self._query(
            "SELECT cust_id, gender, occupation, age, tenur FROM kyc "
            "ORDER BY cust_id")
        if not rows:
            raise ParameterError("kyc table is empty")
        cust_ids = tuple(r[0] for r in rows)
        effective = self.effective_labels()
        design = Design(
            cust_ids=cust_ids,
            gender=np.array([r[1] for r in rows], dtype=object),
            occupation=np.array([r[2] for r in rows], dtype=object),
            age=np.array([r[3] for r in rows], dtype=float),
            tenur=np.array([r[4] for r in rows], dtype=float),
            labels=np.array([effective[c] for c in cust_ids], dtype=int))
        if version is not None:
            version = self.resolve_version(version)
            try:
                table = self.feature_table(version)
            except (sqlite3.OperationalError, IntegrityError):
                table = self.build_features(version)  # missing or stale
            if table.cust_ids != cust_ids:
                raise IntegrityError(
                    f"{version.table} is stale: customer set differs from kyc")
            design.feature_names = table.names
            design.features = table.values
        return design

    # -- profiling -----------------------------------------------------------

    def profile_dataset(self, top_k: int = 10) -> DatasetProfile:
        if self.row_count("kyc") == 0:
            raise ParameterError("cannot profile an empty kyc table")
        gender_counts: dict[int, dict[str, int]] = {0: {}, 1: {}}
        for gender, label, cnt in self._query(
                "SELECT gender, label, COUNT(*) FROM kyc GROUP BY gender, label"):
            gender_counts[int(label)][gender] = int(cnt)
        occ = [(r[0], float(r[1]), int(r[2])) for r in self._query(
            "SELECT occupation, AVG(label), COUNT(*) FROM kyc "
            "GROUP BY occupation ORDER BY AVG(label) DESC, occupation ASC "
            "LIMIT ?", (top_k,))]
        age_hist = {}
        tenur_hist = {}
        for label in (0, 1):
            ages = [r[0] for r in self._query(
                "SELECT age FROM kyc WHERE label = ?", (label,))]
            tens = [r[0] for r in self._query(
                "SELECT tenur FROM kyc WHERE label = ?", (label,))]
            a_counts, a_edges = np.histogram(ages, bins=np.arange(18, 98, 5))
            t_counts, t_edges = np.histogram(tens, bins=np.arange(0, 55, 5))
            age_hist[label] = {"edges": a_edges.tolist(),
                               "counts": a_counts.tolist()}
            tenur_hist[label] = {"edges": t_edges.tolist(),
                                 "counts": t_counts.tolist()}
        class_sizes = {int(r[0]): int(r[1]) for r in self._query(
            "SELECT label, COUNT(*) FROM kyc GROUP BY label")}
        class_sizes.setdefault(0, 0)
        class_sizes.setdefault(1, 0)
        nonunique = {int(r[0]): int(r[1]) for r in self._query(
            "SELECT label, COUNT(*) FROM kyc WHERE name IN "
            "(SELECT name FROM kyc GROUP BY name HAVING COUNT(*) > 1) "
            "GROUP BY label")}
        nonunique.setdefault(0, 0)
        nonunique.setdefault(1, 0)
        return DatasetProfile(
            gender_counts=gender_counts, top_occupations=occ,
            age_hist=age_hist, tenur_hist=tenur_hist,
            class_sizes=class_sizes, class_sizes_nonunique_names=nonunique)


def _read_csv(path, expected_columns):
    import csv

    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: file is empty") from None
        missing = [c for c in expected_columns if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {missing}")
        extra = [c for c in header if c not in expected_columns]
        if extra:
            raise SchemaError(f"{path}: unexpected column(s) {extra}")
        idx = [header.index(c) for c in expected_columns]
        rows = []
        for raw in reader:
            rows.append([raw[i] for i in idx])
    return rows


_INT_COLUMNS = {"age", "tenur", "label", "amount"}
_FLOAT_COLUMNS = {"emt value", "wire value"}


def _coerce(rows, columns, path):
    out = []
    for line_no, row in enumerate(rows, start=2):
        coerced = []
        for col, val in zip(columns, row):
            try:
                if col in _INT_COLUMNS:
                    coerced.append(int(val))
                elif col in _FLOAT_COLUMNS:
                    coerced.append(float(val))
                else:
                    coerced.append(val)
            except ValueError:
                raise SchemaError(
                    f"{path}:{line_no}: column '{col}' has non-numeric "
                    f"value {val!r}") from None
        out.append(coerced)
    return out


def ingest_csv(kyc_path, cash_path, emt_path, wire_path,
               db_path=":memory:") -> RelationalStore:
    """Load the four CSVs into a fresh store, preserving row counts.

    Headers must match the ingestion schema exactly; a missing column raises
    a SchemaError naming it, and duplicate cust_ids raise an IntegrityError.
    """
    specs = [
        ("kyc", kyc_path, datagen.KYC_COLUMNS),
        ("cash_trxns", cash_path, datagen.CASH_COLUMNS),
        ("emt_trxns", emt_path, datagen.EMT_COLUMNS),
        ("wire_trxns", wire_path, datagen.WIRE_COLUMNS),
    ]
    parsed = []
    for table, path, columns in specs:
        rows = _coerce(_read_csv(path, columns), columns, path)
        parsed.append((table, columns, rows))
    db_file = Path(db_path)
    if db_path != ":memory:" and db_file.exists():
        db_file.unlink()
    store = RelationalStore(db_path)
    for table, columns, rows in parsed:
        store._insert_rows(table, columns, rows)
    return store


def store_from_dataset(ds: datagen.SyntheticDataset,
                       db_path=":memory:") -> RelationalStore:
    """Load a generated dataset directly, bypassing the CSV round trip."""
    store = RelationalStore(db_path)
    for table, columns, data in [
            ("kyc", datagen.KYC_COLUMNS, ds.kyc),
            ("cash_trxns", datagen.CASH_COLUMNS, ds.cash),
            ("emt_trxns", datagen.EMT_COLUMNS, ds.emt),
            ("wire_trxns", datagen.WIRE_COLUMNS, ds.wire)]:
        rows = list(zip(*(data[c] for c in columns))) if data[columns[0]] else []
        store._insert_rows(table, columns, rows)
    return store


def replay_effective_labels(base_labels: dict[str, int],
                            events: list[tuple]) -> dict[str, int]:
    """Pure replay of label events over base labels (audit helper)."""
    labels = dict(base_labels)
    for _, cust_id, new_label, _, _ in events:
        labels[cust_id] = int(new_label)
    return labels


def ingest_dataset_dir(data_dir, db_path=":memory:") -> RelationalStore:
    d = Path(data_dir)
    return ingest_csv(d / datagen.KYC_FILE, d / datagen.CASH_FILE,
                      d / datagen.EMT_FILE, d / datagen.WIRE_FILE, db_path)
