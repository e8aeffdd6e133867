"""Regenerate the CLI golden reports: ``python tests/make_golden.py``.

Run this only after an intentional change to a report; review the diff.
"""

import os

from tscontrol.cli import main

HERE = os.path.dirname(os.path.abspath(__file__))
DOCS = os.path.join(os.path.dirname(HERE), "demos", "documents")

GOLDEN = [
    ("analyze", "discrete_pair.json", "analyze_discrete_pair"),
    ("realize", "transfer.json", "realize_transfer"),
    ("stability", "varying_sinusoid.json", "stability_varying_sinusoid"),
]


def run(command, document, stem, outdir):
    json_path = os.path.join(outdir, stem + ".json")
    text_path = os.path.join(outdir, stem + ".txt")
    code = main([command, os.path.join(DOCS, document), "-o", json_path, "--text", text_path])
    return code, json_path, text_path


if __name__ == "__main__":
    for command, document, stem in GOLDEN:
        code, path, _ = run(command, document, stem, os.path.join(HERE, "golden"))
        print(f"{command} {document}: exit {code} -> {os.path.relpath(path)}")
