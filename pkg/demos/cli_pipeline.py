"""
The command-line pipeline
=========================

Runs every stage in a scratch directory with a small model, then reruns one
stage to show it being skipped.
"""
import subprocess
import sys
import tempfile

work = tempfile.mkdtemp()
small = ["--set", f"run.workdir={work}", "--set", "corpus.n_conversations=40",
         "--set", "model.embedding_dim=32", "--set", "model.layer_count=1",
         "--set", "train.epochs=5", "--set", "decode.max_len=10"]


def run(*args):
    out = subprocess.run([sys.executable, "-m", "supportrefine", *args, *small], capture_output=True, text=True)
    print(f"$ supportrefine {' '.join(args)}  -> exit {out.returncode}")
    print(out.stdout.strip() or out.stderr.strip())


for command in ("train-base", "sample", "annotate", "refine", "evaluate", "report"):
    run(command)

run("evaluate")
run("sample", "--dry-run")
run("bogus")
