"""Sweep repair parameters on the composite and report criteria 5/6 status."""

import sys

import numpy as np
from collections import Counter

import composite
from canfp.simulator import run_scenario, scenario_to_dict, scenario_from_dict
from canfp.trace_io import read_trace
from canfp import classifier as clf
from canfp.engine import IdsConfig, IdsEngine, DriftKind, evaluate, truth_from_frames


def assess(cfg, tag):
    paths = run_scenario(cfg, f"/tmp/sweep_{tag}")
    header, frames = read_trace(paths[0])
    X = composite.featurize(frames)
    y = np.array([f.true_ecu for f in frames])
    seqs = np.array([f.seq for f in frames])
    tr = composite.first_n_per_ecu(frames, 200)
    model = clf.train(X[tr], y[tr], training_seqs=seqs[tr], trace_config_hash=header.config_hash)

    _, rows_s, summ_s, verdicts_s, truths_s = composite.run_static(frames, X, model, header)
    pre = [r.roll_confidence for r, t in zip(rows_s, truths_s) if t.trip < 4]
    post = [r.roll_confidence for r, t in zip(rows_s, truths_s) if t.trip >= 4]
    drop = float(np.mean(pre) - np.min(post))

    eng, rows_u, summ_u, verdicts_u, truths_u = composite.run_engine(frames, X, model, header, IdsConfig())
    kinds = [e.kind for e in eng.drift_events]
    errs = Counter()
    for v, t in zip(verdicts_u, truths_u):
        if v.predicted != t.true_ecu:
            errs[(t.trip, t.true_ecu, v.predicted)] += 1
    c5 = 0.80 <= summ_s.identification_rate <= 0.96 and summ_s.tp_rate < 0.85 and drop >= 0.1
    c6 = (
        summ_u.identification_rate >= 0.999
        and summ_u.tp_rate >= 0.99
        and summ_u.fp_count == 0
        and any(k == DriftKind.INCREMENTAL for k in kinds)
        and any(k == DriftKind.ABRUPT for k in kinds)
    )
    print(f"[{tag}] static id {summ_s.identification_rate:.4f} tp {summ_s.tp_rate:.3f} drop {drop:.3f} {'C5-PASS' if c5 else 'C5-FAIL'}")
    print(f"[{tag}] update id {summ_u.identification_rate:.5f} tp {summ_u.tp_rate:.4f} fp {summ_u.fp_count} fn {summ_u.fn_count} "
          f"inc {sum(k==DriftKind.INCREMENTAL for k in kinds)} abr {sum(k==DriftKind.ABRUPT for k in kinds)} {'C6-PASS' if c6 else 'C6-FAIL'}")
    if errs:
        print(f"[{tag}] update errors: {sum(errs.values())} {dict(sorted(errs.items()))}")
    sys.stdout.flush()
    return c5, c6


if __name__ == "__main__":
    for repair_std, jitter in [(0.013, 0.05), (0.013, 0.08), (0.016, 0.08)]:
        cfg = composite.composite_config(repair_std=repair_std)
        obj = scenario_to_dict(cfg)
        obj["repair_tau_jitter"] = jitter
        cfg = scenario_from_dict(obj)
        assess(cfg, f"std{int(repair_std*1000)}_jit{int(jitter*100)}")
