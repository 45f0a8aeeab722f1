"""
Driving runs from a configuration file
======================================

The same workflows are available as ``volfill <subcommand> --config FILE``.
Here the entry point is called in-process on the bundled configuration.
"""

import os
import tempfile

from volfill.cli import main

here = os.path.dirname(os.path.abspath(__file__))
config = os.path.join(here, "configs", "margin_0725.toml")

main(["check-coefficients", "--config", config])

with tempfile.TemporaryDirectory() as out:
    main(["run-pde", "--config", config, "--out", out])
    print(sorted(os.listdir(out)))
    with open(os.path.join(out, "pde_0003.csv")) as fh:
        print("".join(fh.readlines()[:3]))
    main(["convergence", "--config", config, "--out", out])
