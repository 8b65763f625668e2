"""Main module to run the program.
"""

import sys

from code.cli import main


if __name__ == "__main__":
    sys.exit(main())
