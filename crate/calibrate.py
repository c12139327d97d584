#!/usr/bin/env python3
"""Scratch calibration harness: sweeps workload/gateway knobs, runs A/B pairs."""
import json, math, subprocess, sys, tempfile, os, re

MB = 1024 * 1024
GIB = 1024 * MB
PHYSICAL = 4 * GIB

def log_uniform_mean(a, b):
    if a == b:
        return a
    return (b - a) / math.log(b / a)

def classes(shape, ws=(0.25, 0.5), grant=(1/16, 1/8), peak=(0.7, 1.4),
            growth_rule=None):
    """shape: list of (center_mb, weight, [compile_lo_s, compile_hi_s])."""
    out = []
    e = 0.0
    tw = sum(w for _, w, _ in shape)
    for i, (c, w, comp) in enumerate(shape):
        if growth_rule:
            growth = growth_rule(c, i)
        else:
            growth = ["linear", "front_loaded", "back_loaded"][i % 3]
        e += w * log_uniform_mean(c * peak[0], c * peak[1]) / tw
        out.append({
            "name": f"sales_q{i+1:02d}", "weight": w,
            "compile_s": comp,
            "peak_compile_memory": [int(c * MB * peak[0]), int(c * MB * peak[1])],
            "growth": growth,
            "exec_s": [30.0, 600.0],
            "exec_grant": [int(c * MB * grant[0]), int(c * MB * grant[1])],
            "working_set": [int(c * MB * ws[0]), int(c * MB * ws[1])],
        })
    return out, e

def run(tag, cls, gw=None, eng=None, brk=None, seeds=range(1, 6), n=30,
        show_demand=False):
    cfg = {"physical": "4 GB", "cpus": 8,
           "workload": {"classes": cls, "clients": n}}
    if gw: cfg["gateways"] = gw
    if eng: cfg["engine"] = eng
    if brk: cfg["broker"] = brk
    d = tempfile.mkdtemp(prefix="cal_")
    p = os.path.join(d, "cfg.json")
    json.dump(cfg, open(p, "w"))
    env = dict(os.environ)
    if show_demand:
        env["SIMDB_CALIBRATION_STATS"] = "1"
    wins = oomless = tradeok = 0
    detail = []
    for s in seeds:
        out = os.path.join(d, f"s{s}")
        r = subprocess.run(["target/release/simdb", "compare", "--config", p,
                            "--seed", str(s), "--out", out],
                           capture_output=True, text=True, env=env)
        if r.returncode != 0:
            print(tag, "FAILED:", r.stderr.strip()); return
        demand = ""
        if show_demand:
            m = re.search(r"calibration: (.*)", r.stderr)
            if m: demand = " | " + m.group(1)
        doc = json.load(open(os.path.join(out, "compare.json")))
        t, u = doc["throttled"], doc["unthrottled"]
        ratio = doc["throughput_ratio"]
        if ratio is None: ratio = float("inf")
        if ratio >= 1.2: wins += 1
        oomwin = t["totals"]["failed_oom"] < u["totals"]["failed_oom"]
        totwin = (t["totals"]["failed_oom"] + t["totals"]["failed_timeout"]
                  <= u["totals"]["failed_oom"] + u["totals"]["failed_timeout"])
        if oomwin: oomless += 1
        if oomwin and totwin: tradeok += 1
        detail.append(f"s{s}: r={ratio if ratio==float('inf') else round(ratio,2)} "
                      f"T({t['finished']}f {t['totals']['failed_oom']}o {t['totals']['failed_timeout']}t) "
                      f"U({u['finished']}f {u['totals']['failed_oom']}o {u['totals']['failed_timeout']}t)"
                      + demand)
    k = len(list(seeds))
    print(f"{tag}: ratio>=1.2 in {wins}/{k}, oom< in {oomless}/{k}, trade-ok in {tradeok}/{k}")
    for line in detail:
        print("   ", line)
    return wins, oomless, tradeok

# Small-heavy mixes with a long-ramp monster tail.
SHAPE_A = [
    (4,   50, [10.0, 30.0]),
    (16,  18, [10.0, 40.0]),
    (48,  12, [15.0, 60.0]),
    (128,  8, [20.0, 75.0]),
    (320,  6, [30.0, 90.0]),
    (640,  3, [45.0, 120.0]),
    (1024, 2, [60.0, 150.0]),
    (1536, 1, [75.0, 180.0]),
]
SHAPE_B = [
    (4,   44, [10.0, 30.0]),
    (16,  16, [10.0, 40.0]),
    (48,  12, [15.0, 60.0]),
    (128,  8, [20.0, 75.0]),
    (320,  8, [30.0, 90.0]),
    (640,  6, [45.0, 120.0]),
    (1024, 4, [60.0, 150.0]),
    (1536, 2, [75.0, 180.0]),
]

if __name__ == "__main__":
    gw = {"f_small": 0.15, "f_medium": 0.6, "timeouts_s": [240.0, 600.0, 1500.0]}
    eng = {"compile_reserve_fraction": 0.25, "plan_cache_working_size": 64 * MB}
    brk = {"low_water": 0.97, "horizon_s": 30.0, "slack": 0.02}
    for name, shape in [("A", SHAPE_A), ("B", SHAPE_B)]:
        cls, e = classes(shape)
        print(f"[shape {name}: E[peak] = {e:.0f} MB]")
        run(f"shape{name}", cls, gw=gw, eng=eng, brk=brk, show_demand=True)
