#!/usr/bin/env python3
"""
Smoke run for isolab
Runs `full-report` on every configuration under configs/ and prints the verdicts
"""

import sys
from pathlib import Path

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

import logging

from app.exceptions import LabError
from app.main import execute, load_run_config
from app.schemas import Command

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

CONFIG_DIR = Path(__file__).parent.parent / "configs"


def main() -> int:
    """Run every configuration and return the worst exit status"""
    worst = 0
    for path in sorted(CONFIG_DIR.glob("*.json")):
        try:
            config = load_run_config(path)
        except LabError as e:
            logger.error(f"❌ {path.name}: {e}")
            worst = max(worst, e.exit_code)
            continue

        # Metrics with a sloped boundary cannot be doubled; expansion is what they support
        command = Command.FULL_REPORT
        if getattr(config.metric, "closed", True) is False:
            command = Command.EXPANSION

        logger.info(f"Running {command.value} on {path.name}...")
        status = execute(command, path)
        if status == 0:
            logger.info(f"✅ {path.name}: artifacts in {config.output_dir}")
        else:
            logger.error(f"❌ {path.name}: exit status {status}")
        worst = max(worst, status)
    return worst


if __name__ == "__main__":
    sys.exit(main())
