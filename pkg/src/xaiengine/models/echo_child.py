"""Reference child program for the external model protocol.

Run as ``python -m xaiengine.models.echo_child``. Options select the
behaviour: ``--mode echo`` returns each row's first input, ``--mode
threshold --feature J --cut C`` a two-class probability for
``x[J] > C``, and ``--malformed N`` answers the N-th predict request with
a broken line.
"""

import argparse
import json
import math
import sys


def main(argv=None) -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--mode", choices=["echo", "threshold"], default="echo")
    ap.add_argument("--feature", type=int, default=0)
    ap.add_argument("--cut", type=float, default=0.0)
    ap.add_argument("--malformed", type=int, default=0)
    args = ap.parse_args(argv)
    task, n_out = ("regression", 1) if args.mode == "echo" else ("classification", 2)
    for line in sys.stdin:
        msg = json.loads(line)
        kind = msg.get("type")
        if kind == "spec":
            reply = {"type": "spec", "task": task, "n_outputs": n_out}
        elif kind == "predict":
            if msg["id"] == args.malformed:
                sys.stderr.write(f"child: corrupting response to request {msg['id']}\n")
                sys.stderr.flush()
                sys.stdout.write("{not json\n")
                sys.stdout.flush()
                continue
            if args.mode == "echo":
                outputs = [[row[0]] for row in msg["inputs"]]
            else:
                outputs = []
                for row in msg["inputs"]:
                    z = 50.0 * (row[args.feature] - args.cut) / (abs(args.cut) + 1.0)
                    p = 1.0 / (1.0 + math.exp(-max(min(z, 500.0), -500.0)))
                    outputs.append([1.0 - p, p])
            reply = {"type": "predict", "id": msg["id"], "outputs": outputs}
        elif kind == "shutdown":
            return 0
        else:
            sys.stderr.write(f"child: unknown message {kind!r}\n")
            return 1
        sys.stdout.write(json.dumps(reply) + "\n")
        sys.stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
