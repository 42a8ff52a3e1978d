#!/usr/bin/env python
"""
Test runner using pytest.
Supports running unit tests, integration tests, the slow acceptance sweeps, or all tests.
"""
import sys
import subprocess
from pathlib import Path

# Get project root (parent of scripts directory)
SCRIPT_DIR = Path(__file__).parent
PROJECT_ROOT = SCRIPT_DIR.parent
TESTS_DIR = PROJECT_ROOT / "tests"

SELECTIONS = {
    "unit": ([TESTS_DIR / "unit"], None, "UNIT TESTS (pure functions, seconds)"),
    "integration": ([TESTS_DIR / "integration"], "integration and not slow", "INTEGRATION TESTS (CLI and file round trips)"),
    "slow": ([TESTS_DIR / "integration"], "slow", "ACCEPTANCE SWEEPS (oracles and seed sweeps, minutes)"),
    "e2e": ([TESTS_DIR / "integration"], "e2e", "END-TO-END TESTS (complete scenario suites)"),
    "fast": ([TESTS_DIR], "not slow", "ALL TESTS EXCEPT SLOW SWEEPS"),
    "all": ([TESTS_DIR], None, "ALL TESTS"),
}


# Main function
def main():
    """Run tests based on command line arguments."""
    if len(sys.argv) < 2 or sys.argv[1].lower() in ("-h", "--help"):
        print_usage()
        return

    test_type = sys.argv[1].lower()
    if test_type not in SELECTIONS:
        print(f"Unknown test type: {test_type}")
        print_usage()
        sys.exit(1)

    paths, marker, title = SELECTIONS[test_type]
    # python -m pytest for Windows compatibility
    cmd = [sys.executable, "-m", "pytest", *map(str, paths)]
    if marker:
        cmd.extend(["-m", marker])
    cmd.extend(sys.argv[2:])

    print("=" * 80)
    print(f"Running {title}")
    print("=" * 80)

    try:
        result = subprocess.run(cmd, cwd=str(PROJECT_ROOT))
        sys.exit(result.returncode)
    except FileNotFoundError:
        print("\nError: pytest not found!")
        print("Install it with: pip install -r requirements.txt")
        sys.exit(1)


# Function to print usage information
def print_usage():
    """Print usage information."""
    print("""
Test Runner with pytest

Usage:
    python scripts/run_pytest.py <test_type> [extra pytest args]

Test Types:
    unit         - Unit tests only (fast)
    integration  - CLI and round-trip tests, without the slow sweeps
    slow         - Acceptance sweeps: Pareto and placement oracles, gradient check,
                   elitism, sinusoid learning, timing and scenario ordering
    e2e          - Complete scenario suites
    fast         - Everything except the slow sweeps
    all          - Every test

Options:
    -h, --help   - Show this help message

Examples:
    python scripts/run_pytest.py unit
    python scripts/run_pytest.py unit -k placement
    python scripts/run_pytest.py slow -x

Additional pytest options:
    pytest tests -m "not slow"             # Skip the sweeps
    pytest tests/unit/test_training_service.py -k Tade
    pytest tests --lf                      # Run last failed tests
""")


# Entry point
if __name__ == "__main__":
    main()
