"""Enable running gru-enhance as a module: python -m gru_enhance."""

import sys

from gru_enhance.cli import main

if __name__ == "__main__":
    sys.exit(main())
