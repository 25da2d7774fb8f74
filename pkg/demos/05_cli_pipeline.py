"""The command-line pipeline on the bundled configurations.

Equivalent shell session:

    multitime-games validate --spec demos/configs/transport.yaml
    multitime-games value --spec demos/configs/transport.yaml --out value.csv
    multitime-games crosscheck --spec demos/configs/transport.yaml
    multitime-games represent --spec demos/configs/norm_hamiltonian.yaml --form homogeneous
"""

import tempfile
from pathlib import Path

from multitime_games.cli import main

configs = Path(__file__).parent / "configs"
out = Path(tempfile.mkdtemp())

runs = [
    ["validate", "--spec", configs / "transport.yaml", "--out", out / "report.txt"],
    ["value", "--spec", configs / "transport.yaml", "--out", out / "value.csv"],
    ["crosscheck", "--spec", configs / "transport.yaml"],
    ["simulate", "--spec", configs / "two_time_linear.yaml", "--out", out / "traj.csv"],
    ["hji", "--spec", configs / "zero.yaml"],
    ["represent", "--spec", configs / "norm_hamiltonian.yaml", "--form", "homogeneous"],
    ["validate", "--spec", configs / "not_closed.yaml", "--out", out / "bad.txt"],
]
for argv in runs:
    code = main([str(a) for a in argv])
    print(f"-> exit {code}\n")
print((out / "bad.txt").read_text())
