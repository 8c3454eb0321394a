"""Train and persist the final model, score customers with explanations,
record analyst feedback, and let the continuous-learning policy retrain."""
import tempfile
import time
from pathlib import Path

from amlrisk import datagen, service, store
from amlrisk.encode import EncodingMode
from amlrisk.harness import PipelineSpec

workdir = Path(tempfile.mkdtemp(prefix="amlrisk_demo_"))
ds = datagen.generate_dataset(
    datagen.GenConfig(n_customers=4000, majority_ratio=0.95, seed=13))
s = store.store_from_dataset(ds)

# a trimmed final config so the demo trains in seconds; `amlrisk train`
# defaults to the full production hyperparameters
spec = PipelineSpec(
    learner="gbdt",
    params={"n_estimators": 60, "learning_rate": 0.2, "num_leaves": 31,
            "max_depth": 5, "reg_lambda": 1.0, "max_bin": 255},
    feature_version=store.V2, encoding=EncodingMode.ONE_HOT,
    imbalance="undersample_dev", seed=2)

artifact = service.train_final(s, spec)
m = artifact.metrics
print(f"model v{artifact.version_id} holdout: AUROC {m.auroc:.3f}, "
      f"acc {m.accuracy:.3f}, prec {m.precision:.3f}, rec {m.recall:.3f}, "
      f"f1 {m.f1:.3f}")

path = service.save_model(artifact, workdir / "model.json")
clone = service.load_model(path)
print(f"artifact saved to {path} and reloaded "
      f"(version {clone.version_id}, fingerprint "
      f"{clone.data_fingerprint[:12]}...)")

svc = service.RiskService(s, spec=spec)
queue = svc.list_customers(sort="risk", limit=5)
print("\ntop of the risk queue:")
for row in queue["rows"]:
    print(f"  {row['cust_id']}  score {row['score']:.3f}  age {row['age']}  "
          f"tenur {row['tenur']}  label {row['effective_label']}")

top = queue["rows"][0]["cust_id"]
response = svc.score(top, top_k=4)
print(f"\nwhy {top} scores {response.score:.3f} "
      f"({response.shap_space} space, base {response.base_value:+.2f}):")
for name, value in response.top_features:
    print(f"  {name:24s} {value:+.3f}")

# analyst feedback drives the CML change counter
policy = service.CmlPolicy(max_age_seconds=None, change_threshold=5)
cids = s.load_design(None).cust_ids
for i in range(6):
    svc.submit_label(cids[i], 1, "analyst")
info = svc.model_info()
print(f"\nlabel events since training: {info['changes_since_train']}")

result = service.cml_tick(s, policy, spec)
print(f"cml_tick: retrained={result.retrained} ({result.reason})")
if result.retrained:
    svc.activate(result.artifact)
    print(f"active model is now v{svc.model_info()['model_version']}")

noop = service.cml_tick(s, policy, spec, now=time.time())
print(f"immediate second tick: retrained={noop.retrained} ({noop.reason})")
s.close()
