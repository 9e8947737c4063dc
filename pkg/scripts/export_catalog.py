#!/usr/bin/env python3
import argparse
import logging
import os
import sys

import yaml

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from finsler.errors import FinslerError  # noqa: E402
from finsler.metrics import CATALOG_NAMES, catalog  # noqa: E402

# Setup logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

# Catalog entries that need user parameters are skipped
PARAMETER_FREE = [name for name in CATALOG_NAMES if name not in ('randers', 'custom', 'conformal', 'riemannian')]


def parse_args():
    """Parse command line arguments"""
    parser = argparse.ArgumentParser(description='Export catalog metrics as profiles for config/metrics.yaml')
    parser.add_argument('--output', required=True, help='Output YAML file path')
    parser.add_argument('--n', type=int, default=2, help='Chart dimension of the exported profiles')
    return parser.parse_args()


def export_profiles(n: int):
    profiles = {}
    for name in PARAMETER_FREE:
        dimension = max(n, 3) if name == 'perturbed_randers' else n
        try:
            spec = catalog(name, dimension=dimension)
        except FinslerError as e:
            logger.error(f"Skipping '{name}': {e}")
            continue
        profile = spec.config.model_dump(exclude_none=True)
        if not profile.get('params'):
            profile.pop('params', None)
        profiles[name] = profile
        logger.info(f"Exported '{name}' (n={spec.dimension})")
    return profiles


def main():
    args = parse_args()
    profiles = export_profiles(args.n)
    with open(args.output, 'w') as f:
        yaml.safe_dump(profiles, f, sort_keys=True)
    logger.info(f"Wrote {len(profiles)} profiles to {args.output}")


if __name__ == "__main__":
    main()
