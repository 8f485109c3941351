"""Smoke test for the ctfsim extension module.

Build and install first:
    pip install --no-build-isolation ./crates/py
then run:
    python python/smoke_test.py
"""

import math
import sys
import tempfile
from pathlib import Path

import ctfsim

NOOP = (1, 1, 0)


def check(cond, msg):
    if not cond:
        print(f"FAIL {msg}")
        sys.exit(1)
    print(f"ok   {msg}")


def main():
    w = ctfsim.World(42)
    check(w.tick == 0 and w.outcome == ("ongoing", None), "fresh world")
    check(len(w.observe(0)) == 196, "observation length")

    a, b = ctfsim.World(7), ctfsim.World(7)
    for _ in range(500):
        acts = [a.expert_action(i) for i in range(ctfsim.NUM_PLAYERS)]
        a.step(acts)
        b.step(acts)
        if a.outcome[0] != "ongoing":
            a.reset_round()
            b.reset_round()
    check(a.observe(3) == b.observe(3), "same seed, same trajectory")

    hit = w.raycast(w.player_pos(0), (1.0, 0.0), 30.0, 0)
    check(hit is not None and hit[0] > 0, f"raycast {hit}")

    c = ctfsim.World(1, "curriculum")
    while c.outcome[0] == "ongoing":
        c.step([NOOP] * 6)
    check(c.outcome == ("draw", None) and math.isclose(c.time_s, 20.0), "no-op curriculum round is a draw")

    adv, ret = ctfsim.compute_gae([1.0, 0.0], [0.5, 0.5], [False, True], 0.0, 0.9, 1.0)
    check(abs(adv[1] + 0.5) < 1e-12 and abs(ret[0] - (adv[0] + 0.5)) < 1e-12, "gae")

    with tempfile.TemporaryDirectory() as d:
        bundles = ctfsim.expert_demos(1, 3, d, "curriculum")
        files = bundles[0]
        check(len(files) == 6, "expert session writes six demos")
        report = ctfsim.validate_demo(files[0])
        check(report["ok"] and report["rounds"] == 10, "demo validates")
        header, steps = ctfsim.load_demo(files[0])
        check(header["obs_dim"] == 196 and len(steps) == report["steps"], "demo loads")

        m = ctfsim.evaluate("expert", "random", 5, 1, "curriculum")
        total = m["draw_rate"] + m["win_rate_blue"] + m["win_rate_white"]
        check(m["episodes"] == 5 and abs(total - 1) < 1e-12, "evaluate")

        cfg = Path(d) / "run.json"
        cfg.write_text(
            '{"run_id": "py", "algorithm": "PPO", "scenario": "fetch_flag", "max_env_steps": 1024,'
            f' "eval_every": 1024, "ppo": {{"horizon": 512, "minibatch": 128}}, "checkpoint_dir": "{d}/ck"}}'
        )
        ck = ctfsim.train(str(cfg))
        p = ctfsim.Policy.load(ck)
        act = p.act(c.observe(0))
        check(p.obs_dim == 196 and len(act) == 3, f"trained policy acts {act}")

    try:
        w.step([NOOP] * 5)
    except ValueError:
        check(True, "wrong action count raises ValueError")
    else:
        check(False, "wrong action count raises ValueError")
    print("smoke test passed")


if __name__ == "__main__":
    main()
