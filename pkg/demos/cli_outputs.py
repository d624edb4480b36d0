# %% [markdown]
# # Command line run and its outputs
#
# Runs a short stationary check through the `chvisco` entry point, then reads
# back the CSV time series and the last VTK snapshot.

# %%
import glob
import json
import os
import subprocess
import sys
import tempfile

import numpy as np

from chvisco.output import read_csv, read_vtk

out = tempfile.mkdtemp(prefix="chvisco_")
cmd = [sys.executable, "-m", "chvisco", "--preset", "STAT1", "--scheme", "DSAV", "--steps", "5", "--out", out]
proc = subprocess.run(cmd, capture_output=True, text=True)
print("exit code", proc.returncode)
print(proc.stdout.strip())

# %% [markdown]
# The run directory holds the resolved INI, metadata, the series and snapshots.

# %%
print(sorted(os.listdir(out)))
print(json.load(open(os.path.join(out, "metadata.json"))))

# %%
series = read_csv(os.path.join(out, "series.csv"))
print("L per step:", series["L"])
print("beta per step:", series["beta"])

# %% [markdown]
# STAT1 starts on the energy minimizer of the pure phase, so the snapshot at
# the last step should equal the first one.

# %%
snaps = sorted(glob.glob(os.path.join(out, "state_*.vtk")))
first, last = read_vtk(snaps[0]), read_vtk(snaps[-1])
for name in ("phi", "detF", "F_xy"):
    print(name, np.abs(first["point_data"][name] - last["point_data"][name]).max())

# %% [markdown]
# Bad input exits with code 2 and a JSON message on stderr.

# %%
bad = subprocess.run([sys.executable, "-m", "chvisco", "--preset", "TC9"], capture_output=True, text=True)
print(bad.returncode, bad.stderr.strip())
