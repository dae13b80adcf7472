import argparse
import os
import subprocess
import sys
from pathlib import Path


def main():
    parser = argparse.ArgumentParser(description="Run the unittest suite in a fresh interpreter.")
    parser.add_argument("pattern", nargs="?", default="test_*.py", help="Test file pattern (default: test_*.py)")
    parser.add_argument("--slow", action="store_true", help="Also run the large acceptance checks (sets LZEND_SLOW_TESTS=1).")
    parser.add_argument("--timeout", type=int, default=None, help="Kill the run after this many seconds (default: none)")
    args = parser.parse_args()

    repo_root = Path(__file__).parent
    if not (repo_root / "tests").is_dir():
        raise SystemExit(f"Provided path does not exist: {repo_root / 'tests'}")

    py = os.environ.get("VENV_PY", sys.executable)
    env = dict(os.environ)
    if args.slow:
        env["LZEND_SLOW_TESTS"] = "1"

    cmd = [py, "-m", "unittest", "discover", "-s", "tests", "-t", ".", "-p", args.pattern, "-v"]
    print("Running:", " ".join(cmd))
    try:
        completed = subprocess.run(cmd, cwd=repo_root, env=env, timeout=args.timeout, check=False)
    except subprocess.TimeoutExpired:
        raise SystemExit(f"Test run timed out after {args.timeout}s")
    sys.exit(completed.returncode)


if __name__ == "__main__":
    main()
