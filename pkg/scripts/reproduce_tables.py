"""Print the reference-case table: value, expectation, tolerance, pass/fail, runtime."""
import sys

from qchanbound.cli import REGISTRY, run_case


def main() -> int:
    rows = [run_case(c) for c in REGISTRY.values()]
    print(f"{'case':32s} {'value':>14s} {'expected':>14s} {'tol':>8s}  ok  ms")
    for r in rows:
        print(f"{r['case_id']:32s} {r['value']:14.8f} {r['expected']:14.8f} {r['tol']:8.0e}  "
              f"{'y' if r['pass'] else 'n':2s}  {r['runtime_ms']:.0f}")
    return 0 if all(r["pass"] for r in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
