"""
Driving the command line end to end
===================================

validate-config, simulate, estimate and rates, all against one JSON
config.  The simulate step exports curves tabulated on a periodic grid;
estimate ingests files like these, so the pair round-trips the on-disk
format.
"""

import json
import pathlib
import shutil
import subprocess
import sys
import tempfile

CONFIG = {
    "seed": 2024,
    "D": 3,
    "process": {"J": 10},
    "n_grid": [150, 300, 600],
    "replications": 10,
    "anchors_per_run": 6,
    "bandwidth_rule": {"kind": "fixed", "h": 0.5},
}


# prefer the installed console script; fall back to the module
LAUNCHER = ([shutil.which("pcasmooth")] if shutil.which("pcasmooth")
            else [sys.executable, "-m", "pcasmooth.cli"])


def cli(*args):
    proc = subprocess.run([*LAUNCHER, *args], capture_output=True, text=True)
    print(f"$ pcasmooth {' '.join(args)}  ->  exit {proc.returncode}")
    for line in (proc.stderr.strip() or "(no log output)").splitlines()[:4]:
        print("   ", line)
    return proc


with tempfile.TemporaryDirectory() as tmp:
    root = pathlib.Path(tmp)
    cfg = root / "sweep.json"
    cfg.write_text(json.dumps(CONFIG, indent=2))

    cli("validate-config", "--config", str(cfg))

    # overrides compose on the command line without editing the file
    cli("validate-config", "--config", str(cfg), "--set", "replications=4")

    sim = root / "sim"
    cli("simulate", "--config", str(cfg), "--out", str(sim))
    print("    wrote:", ", ".join(sorted(p.name for p in sim.iterdir())))

    est = root / "est"
    cli("estimate", "--config", str(cfg), "--out", str(est))
    table = (est / "estimates.csv").read_text().splitlines()
    print("    " + table[0])
    for line in table[1:4]:
        print("    " + line)

    rates = root / "rates"
    cli("rates", "--config", str(cfg), "--out", str(rates), "--workers", "2")
    summary = json.loads((rates / "summary.json").read_text())
    for name, fits in summary["rate_fits"].items():
        for stat, fit in fits.items():
            print(f"    {stat}: slope {fit['slope']:+.3f}  "
                  f"r^2 {fit['r_squared']:.3f}")

    # bad input surfaces as a machine-readable error record on stderr
    cfg.write_text(json.dumps({**CONFIG, "kernel": {"family": "box"}}))
    bad = cli("validate-config", "--config", str(cfg))
    record = json.loads(bad.stderr.splitlines()[-1])
    print("    parsed error record:", record["error"], "/", record["message"])
