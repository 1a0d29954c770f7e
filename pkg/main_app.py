# main_app.py
"""Entry script: `python main_app.py <command> ...` (see app/cli.py)."""
import sys

from app.cli import main

if __name__ == "__main__":
    sys.exit(main())
