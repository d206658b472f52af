"""The same workflow through the ``sidforge`` command line.

Each call below is what you would type in a shell; ``run`` returns the
exit status instead of exiting.
"""
# %%
import tempfile
from pathlib import Path

from sidforge.cli import run

work = Path(tempfile.mkdtemp(prefix="sidforge-cli-"))

# %%
run(["synth", "--toy", "12", "--size", "64", "--out", str(work / "corpus")])
run(["corrmap", str(work / "corpus" / "toy" / "1_fake"), "--window", "3", "--out", str(work / "corr.csv")])
print((work / "corr.csv").read_text().splitlines()[:3])

# %%
run(["train", str(work / "corpus"), "--crop", "64", "--epochs", "4", "--batch-size", "8",
     "--out", str(work / "model.sidm")])
print((work / "model.loss.csv").read_text())

# %%
run(["eval", str(work / "model.sidm"), str(work / "corpus"), "--crop", "64", "--sigma", "1.0"])

# %%
run(["sweep", "--model", str(work / "model.sidm"), "--test", str(work / "corpus"), "--crop", "64",
     "--param", "eval-mask-ratio", "--values", "0,0.25,0.5", "--eval-patch", "8"])

# %%
run(["selftest"])
