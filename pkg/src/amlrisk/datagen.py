"""Synthetic dataset generation matching the four-table KYC/transaction schema.

Labels are drawn first at the configured majority ratio; conditional feature
distributions are then shifted per the configured signal strengths, so the
planted ground truth stays analyzable: high-risk customers send and receive
more wires, skew younger, have shorter tenure, and cluster in a risky slice
of the occupation list. Generation is a pure function of the config.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import poisson

from .errors import ConfigError

KYC_COLUMNS = ["name", "gender", "occupation", "age", "tenur", "cust_id", "label"]
CASH_COLUMNS = ["cust_id", "amount", "type", "txn_id"]
EMT_COLUMNS = ["id sender", "id receiver", "name sender", "name receiver",
               "emt message", "emt value", "txn_id"]
WIRE_COLUMNS = ["id sender", "id receiver", "name sender", "name receiver",
                "wire value", "country sender", "country receiver", "txn_id"]

KYC_FILE = "kyc.csv"
CASH_FILE = "cash_trxns.csv"
EMT_FILE = "emt_trxns.csv"
WIRE_FILE = "wire_trxns.csv"

SIGNAL_MOTIFS = ("wire_count", "young_age", "low_tenure", "risky_occupation")

DEFAULT_COUNTRIES = ("CA", "US", "GB", "FR", "DE", "CN", "IN", "MX", "BR", "AU")

_FIRST_NAMES = [
    "Olive", "Marcus", "Priya", "Dmitri", "Amara", "Felix", "Yuki", "Carmen",
    "Tobias", "Ingrid", "Rashid", "Leona", "Viktor", "Sana", "Emil", "Dara",
    "Nadia", "Quentin", "Mira", "Stefan", "Aiko", "Bruno", "Celia", "Hamza",
    "Greta", "Idris", "Jolene", "Kasper", "Lucia", "Mateo", "Noor", "Petra",
]
_LAST_NAMES = [
    "Okafor", "Lindqvist", "Moreau", "Tanaka", "Alvarez", "Novak", "Haddad",
    "Bergstrom", "Castillo", "Duarte", "Eriksen", "Fontaine", "Grabowski",
    "Hoffman", "Ivanova", "Jansen", "Kaur", "Lombardi", "Mbeki", "Nilsen",
    "Oyelaran", "Petrov", "Quirke", "Rossi", "Santos", "Takacs", "Umarov",
    "Varga", "Weiss", "Xiang", "Yilmaz", "Zhang",
]
_LOREM = ("rent", "thanks", "invoice", "split", "dinner", "loan", "gift",
          "share", "ticket", "repair", "deposit", "trip", "bill", "fee")


@dataclass(frozen=True)
class GenConfig:
    n_customers: int
    majority_ratio: float = 0.972
    seed: int = 0
    n_occupations: int = 250
    country_list: tuple[str, ...] = DEFAULT_COUNTRIES
    signal_strengths: dict = field(default_factory=lambda: {
        "wire_count": 2.0, "young_age": 1.0, "low_tenure": 1.0,
        "risky_occupation": 1.5})

    def __post_init__(self):
        if self.n_customers < 1:
            raise ConfigError("n_customers must be a positive count")
        if not 0.5 < self.majority_ratio < 1.0:
            raise ConfigError("majority_ratio must be strictly between 0.5 and 1")
        if self.n_occupations < 1:
            raise ConfigError("n_occupations must be >= 1")
        if not self.country_list:
            raise ConfigError("country_list must be non-empty")
        for motif, s in self.signal_strengths.items():
            if motif not in SIGNAL_MOTIFS:
                raise ConfigError(f"signal_strengths: unknown motif '{motif}'")
            if s < 0:
                raise ConfigError(f"signal_strengths[{motif}] must be >= 0")

    def strength(self, motif: str) -> float:
        return float(self.signal_strengths.get(motif, 0.0))


@dataclass
class SyntheticDataset:
    kyc: dict[str, list]
    cash: dict[str, list]
    emt: dict[str, list]
    wire: dict[str, list]

    @property
    def n_customers(self) -> int:
        return len(self.kyc["cust_id"])


def _name_pool(n_customers: int) -> list[str]:
    # pool smaller than the customer count, so repeated names occur
    size = max(2, min(len(_FIRST_NAMES) * len(_LAST_NAMES), (n_customers + 1) // 2))
    pool = []
    for i in range(size):
        pool.append(f"{_FIRST_NAMES[i % len(_FIRST_NAMES)]} "
                    f"{_LAST_NAMES[(i // len(_FIRST_NAMES) + i) % len(_LAST_NAMES)]}")
    return pool


def _clipped_ints(values: np.ndarray, lo: int, hi: int) -> np.ndarray:
    return np.clip(np.rint(values).astype(int), lo, hi)


def generate_dataset(cfg: GenConfig) -> SyntheticDataset:
    """Build the four tables; identical configs reproduce identical datasets."""
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_customers
    n_majority = int(round(n * cfg.majority_ratio))
    labels = np.zeros(n, dtype=int)
    labels[rng.permutation(n)[:n - n_majority]] = 1
    risky = labels == 1

    cust_ids = [f"C{i:07d}" for i in range(n)]
    pool = _name_pool(n)
    names = [pool[i] for i in rng.integers(0, len(pool), size=n)]
    genders = [["female", "male", "other"][g]
               for g in rng.choice(3, size=n, p=[0.48, 0.48, 0.04])]

    # occupations: risky slice gets extra weight for high-risk customers
    occ_names = [f"occ_{i:03d}" for i in range(cfg.n_occupations)]
    n_risky_occ = max(1, cfg.n_occupations // 10)
    base_w = np.ones(cfg.n_occupations)
    risky_w = base_w.copy()
    risky_w[:n_risky_occ] *= 1.0 + cfg.strength("risky_occupation") * 4.0
    occ_idx = np.empty(n, dtype=int)
    occ_idx[~risky] = rng.choice(cfg.n_occupations, size=int(np.sum(~risky)),
                                 p=base_w / base_w.sum())
    occ_idx[risky] = rng.choice(cfg.n_occupations, size=int(np.sum(risky)),
                                p=risky_w / risky_w.sum())
    occupations = [occ_names[i] for i in occ_idx]

    ages = _clipped_ints(rng.normal(46, 15, size=n), 18, 92)
    q_age = cfg.strength("young_age") / (1.0 + cfg.strength("young_age"))
    young_mask = risky & (rng.uniform(size=n) < q_age)
    ages[young_mask] = _clipped_ints(
        18 + np.abs(rng.normal(0, 4.5, size=int(young_mask.sum()))), 18, 92)

    tenur = _clipped_ints(rng.normal(22, 12, size=n), 0, 49)
    q_ten = cfg.strength("low_tenure") / (1.0 + cfg.strength("low_tenure"))
    fresh_mask = risky & (rng.uniform(size=n) < q_ten)
    tenur[fresh_mask] = _clipped_ints(
        np.abs(rng.normal(0, 2.2, size=int(fresh_mask.sum()))), 0, 49)

    kyc = {
        "name": names, "gender": genders, "occupation": occupations,
        "age": ages.tolist(), "tenur": tenur.tolist(),
        "cust_id": cust_ids, "label": labels.tolist(),
    }

    # cash transactions: label-independent
    cash_counts = rng.poisson(2.0, size=n)
    cash = {c: [] for c in CASH_COLUMNS}
    txn = 0
    for i in range(n):
        for _ in range(cash_counts[i]):
            cash["cust_id"].append(cust_ids[i])
            cash["amount"].append(int(max(1, round(rng.lognormal(5.5, 1.0)))))
            cash["type"].append("deposit" if rng.uniform() < 0.5 else "withdrawal")
            cash["txn_id"].append(f"CSH{txn:08d}")
            txn += 1

    # EMT transfers: label-independent; a small share of external counterparties
    emt_counts = rng.poisson(1.5, size=n)
    emt = {c: [] for c in EMT_COLUMNS}
    txn = 0
    for i in range(n):
        for _ in range(emt_counts[i]):
            if n > 1 and rng.uniform() < 0.95:
                j = int(rng.integers(0, n - 1))
                j = j if j < i else j + 1
                recv_id, recv_name = cust_ids[j], names[j]
            else:
                recv_id = f"X{int(rng.integers(0, 10**6)):06d}"
                recv_name = pool[int(rng.integers(0, len(pool)))]
            emt["id sender"].append(cust_ids[i])
            emt["id receiver"].append(recv_id)
            emt["name sender"].append(names[i])
            emt["name receiver"].append(recv_name)
            emt["emt message"].append(" ".join(
                _LOREM[k] for k in rng.integers(0, len(_LOREM), size=3)))
            emt["emt value"].append(round(float(rng.lognormal(5.0, 1.0)), 2))
            emt["txn_id"].append(f"EMT{txn:08d}")
            txn += 1

    # wire transfers carry the main planted signal: high-risk customers send
    # more (Poisson rate scaled by 1+s) and attract more incoming wires.
    # Counts come from inverse-CDF coupling on shared uniforms, so the gap
    # between classes grows monotonically with the strength at fixed seed.
    s_wire = cfg.strength("wire_count")
    lam = np.where(risky, 1.2 * (1.0 + s_wire), 1.2)
    wire_counts = poisson.ppf(rng.uniform(size=n), lam).astype(int)
    recv_w = np.where(risky, 1.0 + s_wire, 1.0).astype(float)
    recv_p = recv_w / recv_w.sum()
    country_w = 1.0 / np.arange(1, len(cfg.country_list) + 1)
    country_p = country_w / country_w.sum()
    wire = {c: [] for c in WIRE_COLUMNS}
    txn = 0

    def add_wire(sender_id, sender_name, recv_id, recv_name):
        nonlocal txn
        wire["id sender"].append(sender_id)
        wire["id receiver"].append(recv_id)
        wire["name sender"].append(sender_name)
        wire["name receiver"].append(recv_name)
        wire["wire value"].append(round(float(rng.lognormal(6.0, 1.2)), 2))
        wire["country sender"].append(
            cfg.country_list[int(rng.choice(len(cfg.country_list), p=country_p))])
        wire["country receiver"].append(
            cfg.country_list[int(rng.choice(len(cfg.country_list), p=country_p))])
        wire["txn_id"].append(f"WIR{txn:08d}")
        txn += 1

    for i in range(n):
        for _ in range(wire_counts[i]):
            if n > 1 and rng.uniform() < 0.93:
                j = int(rng.choice(n, p=recv_p))
                add_wire(cust_ids[i], names[i], cust_ids[j], names[j])
            else:
                add_wire(cust_ids[i], names[i],
                         f"X{int(rng.integers(0, 10**6)):06d}",
                         pool[int(rng.integers(0, len(pool)))])
    # a few externally-originated wires received by customers
    for _ in range(int(round(0.02 * n))):
        j = int(rng.choice(n, p=recv_p))
        add_wire(f"X{int(rng.integers(0, 10**6)):06d}",
                 pool[int(rng.integers(0, len(pool)))], cust_ids[j], names[j])

    return SyntheticDataset(kyc=kyc, cash=cash, emt=emt, wire=wire)


def _write_table(path: Path, columns: list[str], table: dict[str, list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        if table[columns[0]]:
            writer.writerows(zip(*(table[c] for c in columns)))


def write_csv(ds: SyntheticDataset, out_dir) -> dict[str, Path]:
    """Emit kyc.csv, cash_trxns.csv, emt_trxns.csv, wire_trxns.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "kyc": out / KYC_FILE,
        "cash": out / CASH_FILE,
        "emt": out / EMT_FILE,
        "wire": out / WIRE_FILE,
    }
    _write_table(paths["kyc"], KYC_COLUMNS, ds.kyc)
    _write_table(paths["cash"], CASH_COLUMNS, ds.cash)
    _write_table(paths["emt"], EMT_COLUMNS, ds.emt)
    _write_table(paths["wire"], WIRE_COLUMNS, ds.wire)
    return paths
