"""Small SNR sweep through the library entry points (the CLI does the same).

Uses few trials so it finishes in about a minute; the RMSEs are noisy.
"""
import sys

from hybridloc import ProtocolConfig
from hybridloc.cli import ExperimentSpec, run_experiment, write_csv

spec = ExperimentSpec(protocol=ProtocolConfig(trials=20, cycles=10), axis="snr", values=(-10.0, 0.0, 10.0, 20.0))
rows = run_experiment(spec, progress=sys.stderr)
write_csv(rows, sys.stdout)
