""" Batch driver of the magnetoelastic experiments.

Usage
-----
$ python magnetoelastic_lab.py --config config.json --out data/run --snapshots --threads 4 --seed 1

Without `--config` the default gamma study is run. A `manifest.json` written by a
previous run is accepted as configuration and reproduces that run.
"""
import argparse
import sys

from modules.experiment import ConfigError, ExperimentConfig, run_experiment


def parse_args(argv=None):
    parser = argparse.ArgumentParser(description="Magnetoelastic energy experiments.")
    parser.add_argument('--config', help="JSON configuration or manifest of a previous run.")
    parser.add_argument('--out', help="Output directory. Automatically numbered in data/ if not specified.")
    parser.add_argument('--snapshots', action='store_true', help="Write VTK snapshots of the fields.")
    parser.add_argument('--threads', type=int, help="Workers of the FFT transforms.")
    parser.add_argument('--seed', type=int, help="Seed of the random initial states.")
    return parser.parse_args(argv)


def main(argv=None):
    args = parse_args(argv)
    try:
        config = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
    except (ConfigError, TypeError) as e:
        print('\033[31m' + 'Error:' + str(e) + '\033[0m')
        return 2
    # Command line flags override the file
    if args.out is not None:
        config.out = args.out
    if args.snapshots:
        config.snapshots = True
    if args.threads is not None:
        config.threads = args.threads
    if args.seed is not None:
        config.seed = args.seed
    print("Running {} experiment.".format(config.kind))
    return run_experiment(config)


if __name__ == "__main__":
    sys.exit(main())
