import numpy as np
import pytest

from amlrisk import datagen, store


def toy_dataset():
    """Four hand-built tables with known aggregates (customer A and friends)."""
    kyc = {
        "name": ["Ada A", "Bob B", "Cleo C", "Ada A"],
        "gender": ["female", "male", "other", "female"],
        "occupation": ["occ_001", "occ_002", "occ_001", "occ_003"],
        "age": [30, 55, 41, 25],
        "tenur": [3, 20, 11, 1],
        "cust_id": ["A", "B", "C", "D"],
        "label": [1, 0, 0, 0],
    }
    cash = {
        "cust_id": ["A", "A", "A", "B"],
        "amount": [100, 50, 30, 700],
        "type": ["deposit", "deposit", "withdrawal", "deposit"],
        "txn_id": ["c1", "c2", "c3", "c4"],
    }
    emt = {
        "id sender": ["B", "B"],
        "id receiver": ["A", "X999"],
        "name sender": ["Bob B", "Bob B"],
        "name receiver": ["Ada A", "Zed Z"],
        "emt message": ["rent", "gift"],
        "emt value": [75.0, 12.5],
        "txn_id": ["e1", "e2"],
    }
    wire = {
        "id sender": ["A", "C"],
        "id receiver": ["X001", "B"],
        "name sender": ["Ada A", "Cleo C"],
        "name receiver": ["Ext One", "Bob B"],
        "wire value": [200.0, 40.0],
        "country sender": ["CA", "US"],
        "country receiver": ["US", "US"],
        "txn_id": ["w1", "w2"],
    }
    return datagen.SyntheticDataset(kyc=kyc, cash=cash, emt=emt, wire=wire)


@pytest.fixture
def toy_store():
    with store.store_from_dataset(toy_dataset()) as s:
        yield s


def feature_loop_oracle(ds: datagen.SyntheticDataset, version: store.FeatureVersion):
    """Independent straight-loop recomputation of every engineered feature."""
    names = store.feature_names(version)
    cust_ids = sorted(ds.kyc["cust_id"])
    rows = {c: {n: 0.0 for n in names} for c in cust_ids}

    for i in range(len(ds.cash["cust_id"])):
        cid = ds.cash["cust_id"][i]
        if cid not in rows:
            continue
        amount = ds.cash["amount"][i]
        if ds.cash["type"][i] == "deposit":
            rows[cid]["cash_dep_cnt"] += 1
            rows[cid]["cash_dep_amt"] += amount
        else:
            rows[cid]["cash_wd_cnt"] += 1
            rows[cid]["cash_wd_amt"] += amount

    for i in range(len(ds.emt["txn_id"])):
        sender, receiver = ds.emt["id sender"][i], ds.emt["id receiver"][i]
        value = ds.emt["emt value"][i]
        if sender in rows:
            rows[sender]["emt_sent_cnt"] += 1
            rows[sender]["emt_sent_amt"] += value
        if receiver in rows:
            rows[receiver]["emt_recv_cnt"] += 1
            rows[receiver]["emt_recv_amt"] += value

    countries = list(version.country_list or ()) if version.kind == "v3" else []
    for i in range(len(ds.wire["txn_id"])):
        sender, receiver = ds.wire["id sender"][i], ds.wire["id receiver"][i]
        value = ds.wire["wire value"][i]
        c_s, c_r = ds.wire["country sender"][i], ds.wire["country receiver"][i]
        intl = c_s != c_r
        if sender in rows:
            rows[sender]["wire_sent_cnt"] += 1
            rows[sender]["wire_sent_amt"] += value
            rows[sender]["wire_sent_intl_cnt"] += int(intl)
            if version.kind == "v3":
                bucket = c_r if c_r in countries else store.NAN_BUCKET
                rows[sender][f"wire_sent_cnt_{bucket}"] += 1
        if receiver in rows:
            rows[receiver]["wire_recv_cnt"] += 1
            rows[receiver]["wire_recv_amt"] += value
            rows[receiver]["wire_recv_intl_cnt"] += int(intl)
            if version.kind == "v3":
                bucket = c_s if c_s in countries else store.NAN_BUCKET
                rows[receiver][f"wire_recv_cnt_{bucket}"] += 1

    if version.kind in ("v2", "v3"):
        for r in rows.values():
            r["wire_total_cnt"] = r["wire_sent_cnt"] + r["wire_recv_cnt"]
            r["wire_total_amt"] = r["wire_sent_amt"] + r["wire_recv_amt"]
            r["emt_total_cnt"] = r["emt_sent_cnt"] + r["emt_recv_cnt"]
            r["emt_total_amt"] = r["emt_sent_amt"] + r["emt_recv_amt"]
            r["cash_total_cnt"] = r["cash_dep_cnt"] + r["cash_wd_cnt"]
            r["cash_total_amt"] = r["cash_dep_amt"] + r["cash_wd_amt"]
            r["intl_total_cnt"] = r["wire_sent_intl_cnt"] + r["wire_recv_intl_cnt"]
            r["wire_balance"] = r["wire_recv_amt"] - r["wire_sent_amt"]
            r["emt_balance"] = r["emt_recv_amt"] - r["emt_sent_amt"]
            r["cash_balance"] = r["cash_dep_amt"] - r["cash_wd_amt"]

    matrix = np.array([[rows[c][n] for n in names] for c in cust_ids])
    return cust_ids, names, matrix


def random_toy_dataset(rng: np.random.Generator) -> datagen.SyntheticDataset:
    """Small random dataset exercising external counterparties and empty tables."""
    n = int(rng.integers(3, 12))
    cfg = datagen.GenConfig(
        n_customers=n,
        majority_ratio=float(rng.uniform(0.6, 0.95)),
        seed=int(rng.integers(0, 2**31)),
        n_occupations=int(rng.integers(1, 8)),
        country_list=("CA", "US", "GB")[:int(rng.integers(1, 4))],
    )
    return datagen.generate_dataset(cfg)
