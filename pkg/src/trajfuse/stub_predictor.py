"""Reference implementation of the external-predictor wire protocol.

Reads one JSON request per stdin line and answers with constant-velocity
extrapolations of the target agent. Useful as a loopback test double and
as the template for wrapping a real predictor:

    trajfuse run --predictors external,rule_hierarchy \
        --external.command "python -m trajfuse.stub_predictor"
"""

from __future__ import annotations

import json
import math
import sys


def respond(request: dict) -> dict:
    scene = request["scene"]
    n, horizon = int(request["N"]), int(request["T"])
    dt = float(scene["dt"])
    last = scene["histories"][scene["target_agent_id"]][-1]
    x, y = float(last["x"]), float(last["y"])
    heading, speed = float(last["heading"]), float(last["v"])
    vx, vy = speed * math.cos(heading), speed * math.sin(heading)
    row = [{"x": x + vx * dt * (k + 1), "y": y + vy * dt * (k + 1),
            "heading": heading, "v": speed} for k in range(horizon)]
    return {"samples": [row for _ in range(n)]}


def main() -> int:
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        print(json.dumps(respond(json.loads(line))), flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
